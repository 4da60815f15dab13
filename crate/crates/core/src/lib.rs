//! Measuring and reducing distribution shift with empirical characteristic
//! functions.
//!
//! - [`ecf`]: frequency banks, the ECF estimator and feature standardisation.
//! - [`loss`]: the characteristic-function loss (CFL) and domain distance
//!   matrices.
//! - [`model`] / [`trainer`]: a small feature adapter trained with
//!   cross-entropy plus a weighted CFL alignment term.
//! - [`data`]: synthetic multi-domain datasets and the CSV embedding format.
//! - [`baseline`]: PCA, for comparing against a plain spatial view.

pub mod baseline;
pub mod data;
pub mod ecf;
pub mod error;
pub mod loss;
pub mod model;
pub mod trainer;

pub use baseline::{pca_fit, pca_project, PcaModel};
pub use data::{
    generate, load_embeddings, save_embeddings, Domain, DomainRole, DomainTransform,
    EmbeddingFormat, LabeledDataset, SyntheticSpec,
};
pub use ecf::{
    ecf_eval, sample_frequency_bank, standardize, BankParams, EcfVector, FeatureMatrix,
    FrequencyBank, Scheme, Standardizer,
};
pub use error::{Error, Result};
pub use loss::{cfl_between, cfl_distance, distance_matrix, ShiftReport};
pub use model::{forward, load_checkpoint, save_checkpoint, AdapterModel, Layer, ModelDims};
pub use trainer::{
    cfl_step_loss, erm_loss, evaluate, total_loss, train, CflTerm, EpochRecord, LabeledBatch,
    LossEval, TrainConfig, TrainOutcome,
};
