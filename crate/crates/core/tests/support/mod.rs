#![allow(dead_code)]

pub mod simplex;

use std::sync::Arc;

use sphere_superres::signal::{add_noise, calibrate_sigma, gen_signal, gen_support, CellSeparation, CellSizing};
use sphere_superres::{build_grid, forward, DiracSignal, Measurement, MeasurementMatrix};

pub const NU: f64 = 2.5 * std::f64::consts::PI;

pub fn operator(l: usize, n: usize) -> MeasurementMatrix {
    MeasurementMatrix::new(Arc::new(build_grid(l).unwrap()), n)
}

/// Seeded instance; `snr_db = inf` gives clean data.
pub fn instance(op: &MeasurementMatrix, r: usize, per_cell: usize, snr_db: f64, seed: u64) -> (DiracSignal, Measurement) {
    let grid = op.grid();
    let support = gen_support(r, NU, op.degree(), grid, CellSizing::PerCell(per_cell), CellSeparation::Fixed, seed).unwrap();
    let signal = gen_signal(grid, &support, seed + 1000).unwrap();
    let clean = forward(&signal, op.degree()).unwrap();
    let sigma = calibrate_sigma(&clean, snr_db).unwrap();
    let m = add_noise(op, &clean, sigma, seed + 2000).unwrap();
    (signal, m)
}
