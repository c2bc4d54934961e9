//! Shared inputs for the criterion benches.

use rcn_core::fixtures::{padded, random_stable};
use rcn_core::reservoir::random_reservoir;
use rcn_core::{Activation, Realization, ReservoirNet, ReservoirSpec, TimeSeries};

/// Dimension-`d` system padded with `pad` unreachable and `pad` unobservable states.
pub fn padded_system(d: usize, pad: usize, seed: u64) -> Realization {
    padded(&random_stable(d, 1, 1, 0.8, seed), pad, pad, seed + 1)
}

pub fn reservoir(n: usize, seed: u64) -> ReservoirNet {
    random_reservoir(
        &ReservoirSpec {
            n,
            input_dim: 1,
            sparsity: 0.632,
            target_norm: 0.9,
            leakage: 0.8,
            activation: Activation::Tanh,
        },
        seed,
    )
    .expect("valid spec")
}

pub fn sine(len: usize) -> TimeSeries {
    TimeSeries::scalar((0..len).map(|k| (k as f64 * 0.05).sin()).collect()).expect("non-empty")
}
