//! Progressive domain augmentation for unsupervised domain adaptation.
//!
//! Labelled source data is moved toward an unlabelled target through a
//! sequence of mixup-generated virtual domains. At each step the source is
//! partitioned into local linear subspaces, those subspaces are aligned to
//! the virtual domain's on the Grassmann manifold, and confidently
//! pseudo-labelled virtual samples are absorbed into the source.

pub mod classifier;
pub mod data;
pub mod error;
pub mod grassmann;
pub mod linalg;
pub mod mixup;
pub mod pipeline;
pub mod probe;
pub mod subspaces;

pub use classifier::{SoftmaxModel, TrainConfig};
pub use data::{DataFormat, Dataset, ShiftFamily, ShiftSpec};
pub use error::{PrdaError, Result};
pub use linalg::{Basis, Matrix};
pub use mixup::{LambdaSchedule, Pairing};
pub use pipeline::{
    run_prda, run_prda_observed, run_sa_baseline, run_source_only, AdaptationResult, Method,
    PipelineConfig, RoundReport,
};
pub use probe::{divergence_probe, stratified_folds, ProbeResult};
pub use subspaces::{generate_subspaces, SubspaceCollection};
