//! Token-level adapter/calibrator modules for exemplar-free
//! class-incremental learning on frozen feature vectors.
//!
//! Everything here is `no_std` + `alloc`. File formats, reports and the
//! command-line harness live in the `tosca` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
pub mod engine;
pub mod error;
pub mod gradcheck;
pub mod heads;
pub mod luca;
pub mod numerics;
pub mod optim;
pub mod rng;

pub use error::{Error, Result};
pub use data::{FeatureDataset, SplitPlan, SynthConfig};
pub use engine::{
    BankEntry, InferenceConfig, Method, ModuleBank, Prediction, ScenarioConfig, ScenarioReport,
    TrainConfig,
};
pub use heads::{PrototypeBank, SessionHead};
pub use luca::{LucaConfig, LucaGradients, LucaModule};
pub use optim::{L1Mode, OptimConfig};
pub use numerics::{Activation, Matrix, ProbVector, Real};
