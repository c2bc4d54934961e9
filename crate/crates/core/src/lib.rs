//! Reservoir computing networks viewed as linear realizations: simulation,
//! readout training, minimal realization by projection, and the experiments
//! built on top of them.

pub mod datagen;
pub mod error;
pub mod experiments;
pub mod fixtures;
pub mod numerics;
pub mod realization;
pub mod reservoir;
pub mod rng;
pub mod series;
pub mod training;

pub use error::{Error, Result};
pub use experiments::{run_experiment, ExperimentConfig, ExperimentReport};
pub use numerics::{Matrix, RankTolerance, Vector};
pub use realization::{
    reduce, Irreducibility, Realization, ReductionStep, ReductionTrace, StepKind,
};
pub use reservoir::{
    Activation, Readout, ReservoirNet, ReservoirSpec, StateModel, StateTrajectory,
};
pub use series::TimeSeries;
pub use training::{FitResult, TrainConfig};
