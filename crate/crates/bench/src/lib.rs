//! Shared inputs for the criterion benches.

use hvtest_core::{BaseModel, ModelSpec, SamplePath, SimGrid};

/// Constant-volatility path at the one-second grid of a 6.5 hour session.
pub fn null_path(n: usize, seed: u64) -> SamplePath {
    ModelSpec::new(BaseModel::constant_reference())
        .simulate(SimGrid::new(n).expect("grid"), seed)
        .expect("simulate")
}

pub fn noisy_heston_path(n: usize, eta: f64, seed: u64) -> SamplePath {
    ModelSpec::new(BaseModel::heston_reference())
        .with_noise(eta)
        .simulate(SimGrid::new(n).expect("grid"), seed)
        .expect("simulate")
}

pub fn jump_path(n: usize, lambda: f64, seed: u64) -> SamplePath {
    ModelSpec::new(BaseModel::constant_reference())
        .with_jumps(lambda, 0.5)
        .simulate(SimGrid::new(n).expect("grid"), seed)
        .expect("simulate")
}
