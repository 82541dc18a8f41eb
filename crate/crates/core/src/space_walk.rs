//! Killed Brownian motion on `Ω = (-1, 1)`: the lattice walk used by the
//! Monte Carlo estimator and the killed heat kernel `p^Ω_s(x, y)`.
//!
//! `B^x(s) = x + B(2s)`, so the generator is `d²/dx²` and the Dirichlet
//! eigenpairs are `λ_n = (nπ/2)²`, `φ_n(x) = sin(nπ(x+1)/2)` with unit norm.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::RngCore;
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::quad::{integrate, QuadOptions};
use crate::rng::CoinFlips;

pub const DEFAULT_TERMS: usize = 200;
/// Below this time the eigen series needs more than the default terms.
const SERIES_AUTO_BELOW: f64 = 0.01;
/// Below this time the eigen series is refused.
const SERIES_FLOOR: f64 = 1e-4;
/// Crossover from the image sum to the eigen series in the hybrid evaluators.
const IMAGE_BELOW: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeConfig {
    /// Number of cells `M`.
    pub cells: usize,
    /// Mesh size `h = 2 / M`.
    pub h: f64,
}

impl LatticeConfig {
    pub fn new(cells: usize) -> Result<Self> {
        if cells < 2 || !cells.is_multiple_of(2) {
            return Err(Error::config(format!(
                "cell count M = {cells} must be an even integer ≥ 2"
            )));
        }
        Ok(Self {
            cells,
            h: 2.0 / cells as f64,
        })
    }

    /// Lattice with mesh `h`; `2 / h` must be an even integer.
    pub fn from_h(h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::config(format!("mesh size h = {h} must be positive")));
        }
        let m = (2.0 / h).round();
        if ((2.0 / h) - m).abs() > 1e-9 * m {
            return Err(Error::config(format!("h = {h} does not divide the interval (-1, 1)")));
        }
        Self::new(m as usize)
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.h - 1.0
    }

    /// Grid index of `x`, if `x` is a grid point.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let j = ((x + 1.0) / self.h).round();
        if j < 0.0 || j > self.cells as f64 || (self.x(j as usize) - x).abs() > 1e-9 {
            None
        } else {
            Some(j as usize)
        }
    }

    #[inline]
    pub fn is_boundary(&self, j: usize) -> bool {
        j == 0 || j == self.cells
    }

    pub fn interior(&self) -> impl Iterator<Item = usize> {
        1..self.cells
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceExitSample {
    /// Visited indices including the start (empty unless recording).
    pub positions: Vec<usize>,
    /// Step at which `{0, M}` was first reached; `None` if the budget ran out.
    pub exit_step: Option<u64>,
    pub final_index: usize,
}

/// Symmetric ±1 walk from `start` until it hits `{0, M}` or `max_steps` elapse.
pub fn step_walk<R: RngCore>(
    config: &LatticeConfig,
    start: usize,
    max_steps: u64,
    record: bool,
    rng: &mut R,
) -> Result<SpaceExitSample> {
    if start > config.cells {
        return Err(Error::domain(format!(
            "start index {start} outside [0, {}]",
            config.cells
        )));
    }
    let mut positions = Vec::new();
    if record {
        positions.push(start);
    }
    if config.is_boundary(start) {
        return Ok(SpaceExitSample {
            positions,
            exit_step: Some(0),
            final_index: start,
        });
    }
    let mut coins = CoinFlips::new();
    let mut j = start;
    for step in 1..=max_steps {
        if coins.flip(rng) {
            j += 1;
        } else {
            j -= 1;
        }
        if record {
            positions.push(j);
        }
        if config.is_boundary(j) {
            return Ok(SpaceExitSample {
                positions,
                exit_step: Some(step),
                final_index: j,
            });
        }
    }
    Ok(SpaceExitSample {
        positions,
        exit_step: None,
        final_index: j,
    })
}

#[inline]
pub fn eigenvalue(n: usize) -> f64 {
    let a = n as f64 * FRAC_PI_2;
    a * a
}

#[inline]
pub fn eigenfunction(n: usize, x: f64) -> f64 {
    (n as f64 * FRAC_PI_2 * (x + 1.0)).sin()
}

/// Terms needed so the first dropped mode is below `e^{-40}`.
fn terms_for(s: f64, n_terms: usize) -> usize {
    if s >= SERIES_AUTO_BELOW {
        n_terms
    } else {
        n_terms.max((2.0 * (40.0 / s).sqrt() / PI).ceil() as usize)
    }
}

/// Killed heat kernel by eigenfunction expansion.
pub fn killed_heat_kernel(x: f64, y: f64, s: f64, n_terms: usize) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain(format!("time s = {s} must be positive")));
    }
    if n_terms == 0 {
        return Err(Error::config("n_terms must be at least 1"));
    }
    if s < SERIES_FLOOR {
        return Err(Error::numerical(
            "killed heat kernel",
            format!("s = {s} is below {SERIES_FLOOR}; the eigen series does not converge usefully"),
        ));
    }
    let n = terms_for(s, n_terms);
    Ok(eigen_sum(x, y, s, n))
}

fn eigen_sum(x: f64, y: f64, s: f64, n: usize) -> f64 {
    let mut acc = 0.0;
    for i in 1..=n {
        let decay = (-eigenvalue(i) * s).exp();
        if decay == 0.0 {
            break;
        }
        acc += decay * (eigenfunction(i, x) * eigenfunction(i, y));
    }
    acc
}

#[inline]
fn gauss(z: f64, s: f64) -> f64 {
    (-z * z / (4.0 * s)).exp() / (4.0 * PI * s).sqrt()
}

/// Image-sum form of `p^Ω_s`, accurate for small `s`.
fn image_density(x: f64, y: f64, s: f64) -> f64 {
    let mut acc = 0.0;
    for k in -3i32..=3 {
        let shift = 4.0 * k as f64;
        acc += gauss(y - x + shift, s) - gauss(y + x + 2.0 + shift, s);
    }
    acc
}

/// `p^Ω_s(x, y)` for any `s > 0`: image sum for small `s`, eigen series otherwise.
pub fn killed_density(x: f64, y: f64, s: f64) -> f64 {
    if s < IMAGE_BELOW {
        image_density(x, y, s).max(0.0)
    } else {
        eigen_sum(x, y, s, DEFAULT_TERMS)
    }
}

/// `P[s < τ_Ω(x)] = ∫_Ω p^Ω_s(x, y) dy`.
pub fn survival_probability(x: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return if x.abs() < 1.0 { 1.0 } else { 0.0 };
    }
    if s < IMAGE_BELOW {
        let sigma = (4.0 * s).sqrt();
        let mass = |c: f64| 0.5 * (erf((1.0 - c) / sigma) - erf((-1.0 - c) / sigma));
        let mut acc = 0.0;
        for k in -3i32..=3 {
            let shift = 4.0 * k as f64;
            acc += mass(x - shift) - mass(-x - 2.0 - shift);
        }
        acc.clamp(0.0, 1.0)
    } else {
        // ∫ φ_n = 4/(nπ) for odd n, 0 for even n.
        let mut acc = 0.0;
        for n in (1..=DEFAULT_TERMS).step_by(2) {
            let decay = (-eigenvalue(n) * s).exp();
            if decay < 1e-300 {
                break;
            }
            acc += decay * eigenfunction(n, x) * 4.0 / (n as f64 * PI);
        }
        acc.clamp(0.0, 1.0)
    }
}

/// Sine coefficients `c_n = ∫_Ω ψ φ_n`, for evaluating
/// `E[ψ(B^x(s)); s < τ_Ω] = Σ e^{-λ_n s} c_n φ_n(x)`.
#[derive(Debug, Clone)]
pub struct SineSeries {
    coeffs: Vec<f64>,
}

impl SineSeries {
    pub fn new<F: Fn(f64) -> f64>(psi: F, n_terms: usize) -> Result<Self> {
        let coeffs = (1..=n_terms)
            .map(|n| {
                // Integrate per half-period so oscillation never spans a panel.
                let panels = n.max(1);
                let w = 2.0 / panels as f64;
                let mut c = 0.0;
                for p in 0..panels {
                    let a = -1.0 + p as f64 * w;
                    c += integrate(
                        |y| psi(y) * eigenfunction(n, y),
                        a,
                        a + w,
                        QuadOptions::rel(1e-12).with_abs(1e-15),
                    )?
                    .value;
                }
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn expectation(&self, x: f64, s: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| (-eigenvalue(i + 1) * s).exp() * c * eigenfunction(i + 1, x))
            .sum()
    }

    /// `∫_0^∞ λ e^{-λ s} E[ψ(B^x(s)); s < τ_Ω] ds = Σ λ/(λ+λ_n) c_n φ_n(x)`.
    pub fn exponential_average(&self, x: f64, lambda: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| lambda / (lambda + eigenvalue(i + 1)) * c * eigenfunction(i + 1, x))
            .sum()
    }
}
