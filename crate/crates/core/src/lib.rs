//! Noisy evolutionary optimization.
//!
//! Elitist evolutionary algorithms ((1+1), (μ+1), (1+λ)) running on OneMax and
//! LeadingOnes under one-bit, symmetric, reverse and segmented noise, with
//! fixed-size and adaptive sampling. The [`analysis`] module computes the
//! exact one-step quantities (mutation kernels, acceptance probabilities,
//! drift) that govern these runs, and [`harness`] runs seeded, reproducible
//! trial batches and summarizes them.

pub mod algorithms;
pub mod analysis;
pub mod bitstring;
mod error;
pub mod estimation;
pub mod harness;
pub mod noise;
pub mod presets;
pub mod problems;
pub mod rng;
pub mod stats;

pub use algorithms::{Algorithm, TrialResult, UpdateRule};
pub use bitstring::Bitstring;
pub use error::{Error, Result};
pub use estimation::{AdaptiveParams, AdaptiveSpec, ComparisonOutcome, Route, SamplePolicy};
pub use harness::{ExperimentSpec, SummaryRow, TrialRecord};
pub use noise::{EvalCounter, NoiseModel, NoisyObjective, Spectrum, StateClass};
pub use problems::{Problem, ProblemKind};
pub use rng::{Purpose, RandomStream, TrialStreams};
