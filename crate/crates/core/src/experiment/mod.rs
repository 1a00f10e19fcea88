//! Experiment runner: configuration, sweeps over the hyper-parameter grid,
//! candidate scoring, ensembles, and the file-producing commands behind the CLI.

mod commands;
mod config;
mod sweep;

pub use commands::{
    cmd_bounds, cmd_ensemble, cmd_evaluate, cmd_fit, cmd_generate, cmd_report, cmd_select, cmd_sweep, RunPaths,
};
pub use config::{
    alpha_domain, beta_domain, BoundsConfig, DatasetSource, EnsembleConfig, ExperimentConfig, FitConfig, SearchSpace,
    SplitConfig, BATCH_DOMAIN, LAYER_DOMAIN, WIDTH_DOMAIN,
};
pub use sweep::{
    ensemble_curves, materialize, prepare, run_sweep, score_candidates, select_per_proxy, train_members, CandidateRow,
    CurvePoint, EnsembleCurves, MemberRecord, Prepared, SelectionRow, SweepResult,
};
