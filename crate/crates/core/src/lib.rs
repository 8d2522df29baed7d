//! Video object detection, recognition and multi-object tracking.
//!
//! The crate is organised as a pipeline:
//!
//! * [`frame_io`]: frame conversion, PGM/PPM sequences, synthetic scenes.
//! * [`background`]: adaptive background model and motion masks.
//! * [`shadow`]: color invariants, hard-shadow edges, Poisson reconstruction.
//! * [`vocabulary`]: dense descriptors, k-means codebooks, bag of words,
//!   pyramid match kernel.
//! * [`classifier`]: cubic-kernel SVM trained by SMO, cross validation.
//! * [`recognition`]: implicit-shape-model voting, mean-shift modes,
//!   pictorial structures.
//! * [`agpso`] and [`tracker`]: annealed Gaussian swarm optimisation and the
//!   multi-species tracker built on it.
//! * [`config`], [`metrics`], [`pipeline`]: configuration, evaluation and
//!   end-to-end orchestration.

pub mod agpso;
pub mod background;
pub mod classifier;
pub mod config;
pub mod error;
pub mod frame_io;
pub mod pipeline;
pub mod image;
pub mod metrics;
pub mod recognition;
pub mod shadow;
pub mod tracker;
pub mod training;
pub mod vocabulary;

pub use error::{Error, Result};
pub use image::{BinaryMask, BoxF, GrayFrame, RgbFrame};
