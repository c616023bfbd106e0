//! memdex-core: a memory-based indexing and classification engine.
//!
//! Subjects carry two feature modalities: variable-sized sets of local
//! descriptors ("shallow" keypoints) and one fixed-length "deep" vector.
//! Each modality is scored against candidate classes with a kernel density
//! likelihood over stored training features; the two log-likelihoods are
//! fused with a single weight and evaluated with ROC/AUC over instance
//! (retrieval) or group (classification) protocols. Deep vectors can be
//! compressed to one bit per element with thresholds that maximize the
//! empirical mutual information between bit and class.

pub mod binarize;
pub mod deep;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod index;
pub mod io;
pub mod model;
pub mod shallow;
pub mod synth;

pub use error::{Error, Result};
pub use model::{ClassBy, Dataset, DatasetView, DeepVector, Keypoint, SubjectRecord};
