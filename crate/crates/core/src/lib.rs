//! Mutagenesis screens for transformer weight matrices.
//!
//! A screen overwrites one block of one weight matrix at a time with the
//! matrix's maximum, minimum or zero, regenerates text, and records
//! whether the output changed. The resulting per-matrix maps feed the
//! analyses in [`atlas`], [`copa`] and [`text`], and the renderers in
//! [`report`].

pub mod analysis;
pub mod atlas;
pub mod copa;
pub mod error;
pub mod model;
pub mod mutation;
pub mod report;
pub mod screen;
pub mod stats;
pub mod text;

pub use error::{Error, Result};
pub use model::{Backend, GenParams, MatrixDescriptor, MatrixId, MatrixKind, ToyModel, ToyModelConfig};
pub use mutation::{BlockRef, Mutation, MutationAddress, MutationKind};
pub use screen::{ExperimentConfig, ModelSource, Prompt, ScreenRecord, ScreenResult};
