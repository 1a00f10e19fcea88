//! Datasets, synthetic generators, CSV ingestion, splitting and standardization.

mod csv_io;
mod dataset;
mod generators;
mod scaler;
mod split;

pub use csv_io::{format_real, load_csv, read_csv, save_csv, write_csv};
pub use dataset::{Dataset, FeatureKind, GroundTruth};
#[allow(unused_imports)]
pub(crate) use generators::sigmoid;
pub use generators::{
    generate_acic_like, generate_ihdp_like, generate_two_cluster_toy, generate_two_cluster_toy_labeled, AcicProtocol,
    Assignment, IhdpConfig, Link, Surface, Term, PROPENSITY_CLIP, TOY_CLUSTER_OFFSET, TOY_SLOPE, TOY_SPREAD_X,
    TOY_SPREAD_Y,
};
pub use scaler::{standardize, Scaler};
pub use split::{split, split_sizes, SplitIndices};
