//! Effect-estimation metrics, PEHE bounds and the discrete minimizer check.

mod bounds;
mod evaluation;
mod lemma4;

pub use bounds::{
    bound_m1, bound_m2, bound_m3, latent_lipschitz, m3_hyperparams, plug_in_effects, BoundKind, BoundReport,
    LipschitzSource,
};
pub use evaluation::{eps_ate, pehe, pehe_values, policy_risks, Pehe, PolicyRisks};
pub use lemma4::{
    collapsed_pairs_toy, lemma4_sanity, projection_counter_example, DiscretePoint, DiscreteToy, Lemma4Outcome,
    Lemma4Report,
};
