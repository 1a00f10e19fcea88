//! The aggregated two-pipeline estimator and its ensembles.

mod alrite;
mod ensemble;

pub use alrite::{
    alrite_fit, alrite_predict, combine, eta_sensitivity_check, AlriteModel, Components, FitReport, SensitivityCheck,
    PROPENSITY_FOLDS,
};
pub use ensemble::{
    build_softmax_ensemble, build_topk_ensemble, candidate_modes, lambda_grid, member_weights,
    select_ensemble_hyperparam, EnsembleCandidateScore, EnsembleFamily, EnsembleMode, EnsembleModel, MemberOutputs,
    RankedPipeline,
};
