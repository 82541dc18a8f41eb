//! Fixtures shared by the benches.

use std::sync::Arc;

use fkwalk_core::{DataFn, Kernel, LatticeConfig, ProblemData};

pub fn example_a_phi() -> DataFn {
    Arc::new(|t: f64, x: f64| (5.0 * t).exp() * (1.0 + x) * (1.0 - x).powi(2) * x)
}

/// Initial-history problem on `[-1, 1]` with `cells` cells and horizon `horizon`.
pub fn example_a(kernel: Kernel, cells: usize, horizon: f64) -> ProblemData {
    let lattice = LatticeConfig::new(cells).expect("even cell count");
    ProblemData::new(kernel, example_a_phi(), horizon, lattice).expect("positive horizon")
}

/// Forcing-only problem.
pub fn example_b(kernel: Kernel, cells: usize, horizon: f64) -> ProblemData {
    let lattice = LatticeConfig::new(cells).expect("even cell count");
    let zero: DataFn = Arc::new(|_: f64, _: f64| 0.0);
    ProblemData::new(kernel, zero, horizon, lattice)
        .expect("positive horizon")
        .with_forcing(Arc::new(|t: f64, x: f64| {
            (10.0 * t).sin() * (1.0 - x) * x * (std::f64::consts::PI * x).sin()
        }))
}
