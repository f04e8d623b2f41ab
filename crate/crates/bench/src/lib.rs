//! Deterministic inputs shared by the kernel benchmarks.

use euler_lab::presets::{clm_cosine, random_bandlimited};
use euler_lab::{EulerState, Grid1, Grid2, SpectralField1, SpectralField2};

/// Random band-limited vorticity on an `n × n` grid.
pub fn vorticity(n: usize) -> SpectralField2 {
    let grid = Grid2::square(n).expect("benchmark grid");
    random_bandlimited(grid, 7, 8, 1.0).expect("benchmark field")
}

pub fn euler_state(n: usize) -> EulerState {
    EulerState::new(vorticity(n), 0.0).expect("mean-free field")
}

pub fn clm_data(n: usize) -> SpectralField1 {
    clm_cosine(Grid1::new(n).expect("benchmark grid"), 1.0, 0.0)
}
