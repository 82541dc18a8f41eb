//! Monte Carlo evaluation of the stochastic representation
//!
//! ```text
//! u(t,x) = E[ φ(-X^t(τ_0), B^x(τ_0)) ; τ_0 < τ_Ω ] + E[ ∫_0^{τ_0 ∧ τ_Ω} f(-X^t(s), B^x(s)) ds ]
//! ```
//!
//! on the coupled lattice: every Monte Carlo step moves the time chain by one
//! jump and the space walk by `±h`. With `2α k^α = h² δ^{α-1}` both walks run
//! at about `2/h²` events per unit time, so one step lasts `h²/2` — the exact
//! clock of the lattice approximation of `B^x(s) = x + B(2s)`.
//!
//! The atomic kernel runs its time process exactly (exponential clocks) and
//! advances the space walk one lattice step per `h²/2` of elapsed clock.

use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::quad::{integrate, QuadOptions};
use crate::rng::{run_trials, run_trials_vec, CoinFlips, TrialRng};
use crate::space_walk::LatticeConfig;
use crate::stats::McEstimate;
use crate::time_walk::{
    atomic_jump_count, compute_weights, sample_gamma_clock, snap_to_grid, JumpWeights, PowerLawChain, TimeChain,
};

/// Largest forcing table (entries) precomputed on the space-time lattice.
const MAX_TABLE: usize = 1 << 23;

/// A real function of `(t, x)`.
pub trait SpaceTimeFn: Send + Sync {
    fn eval(&self, t: f64, x: f64) -> f64;
}

impl<F: Fn(f64, f64) -> f64 + Send + Sync> SpaceTimeFn for F {
    fn eval(&self, t: f64, x: f64) -> f64 {
        self(t, x)
    }
}

pub type DataFn = Arc<dyn SpaceTimeFn>;

/// Boundary-value data. `phi` is read on `t ≤ 0`, `forcing` on `(0, T]`;
/// both are expected to vanish at `x = ±1`.
#[derive(Clone)]
pub struct ProblemData {
    pub kernel: Kernel,
    pub phi: DataFn,
    /// `None` means `f ≡ 0`.
    pub forcing: Option<DataFn>,
    pub horizon: f64,
    pub lattice: LatticeConfig,
    /// Time-grid spacing; derived from the clock scaling when `None`.
    pub k_override: Option<f64>,
}

impl fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData")
            .field("kernel", &self.kernel)
            .field("forcing", &self.forcing.is_some())
            .field("horizon", &self.horizon)
            .field("lattice", &self.lattice)
            .field("k_override", &self.k_override)
            .finish_non_exhaustive()
    }
}

impl ProblemData {
    pub fn new(kernel: Kernel, phi: DataFn, horizon: f64, lattice: LatticeConfig) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::config(format!("final time T = {horizon} must be positive")));
        }
        Ok(Self {
            kernel,
            phi,
            forcing: None,
            horizon,
            lattice,
            k_override: None,
        })
    }

    pub fn with_forcing(mut self, forcing: DataFn) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k_override = Some(k);
        self
    }

    /// `φ(t, x)` with the convention `φ(t) = φ(0)` for `t > 0`.
    pub fn phi_extended(&self, t: f64, x: f64) -> f64 {
        self.phi.eval(t.min(0.0), x)
    }
}

pub fn zero_fn() -> DataFn {
    Arc::new(|_: f64, _: f64| 0.0)
}

/// Raw time step from `2α k^α = h² δ^{α-1}`.
pub fn clock_scaling(alpha: f64, delta: f64, h: f64) -> f64 {
    (h * h * delta.powf(alpha - 1.0) / (2.0 * alpha)).powf(1.0 / alpha)
}

/// Time grid actually used by the estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockInfo {
    /// Step from the scaling before `δ/k` was made integral (equals `k`
    /// when no adjustment applies).
    pub raw_k: f64,
    pub k: f64,
    /// `δ / k` for the truncated kernel, 0 otherwise.
    pub m: usize,
    /// Physical duration of one Monte Carlo step.
    pub step_duration: f64,
}

/// Rounds `δ / k_raw` to an integer `m ≥ 1` and returns `(δ/m, m)`.
pub fn integral_grid(delta: f64, raw_k: f64) -> (f64, usize) {
    let m = (delta / raw_k).round().max(1.0) as usize;
    (delta / m as f64, m)
}

enum Forcing {
    Zero,
    Unit,
    Table { rows: usize, values: Vec<f64> },
    Direct(DataFn),
}

enum Walk {
    Lattice(TimeChain),
    Atomic { lambda: f64, delta: f64 },
}

/// Configured estimator; immutable and shareable across threads.
pub struct FeynmanKac {
    problem: ProblemData,
    walk: Walk,
    clock: ClockInfo,
    forcing: Forcing,
}

impl FeynmanKac {
    pub fn new(problem: &ProblemData) -> Result<Self> {
        let h = problem.lattice.h;
        let step_duration = 0.5 * h * h;
        let (walk, clock) = match &problem.kernel {
            Kernel::Truncated { alpha, delta } => {
                let raw_k = problem.k_override.unwrap_or_else(|| clock_scaling(*alpha, *delta, h));
                let k = match problem.k_override {
                    Some(k) => k,
                    None => integral_grid(*delta, raw_k).0,
                };
                let weights: JumpWeights = compute_weights(*alpha, *delta, k)?;
                let clock = ClockInfo {
                    raw_k,
                    k: weights.k,
                    m: weights.m,
                    step_duration,
                };
                (Walk::Lattice(TimeChain::Truncated(weights)), clock)
            }
            Kernel::Atomic { lambda, delta } => (
                Walk::Atomic {
                    lambda: *lambda,
                    delta: *delta,
                },
                ClockInfo {
                    raw_k: 0.0,
                    k: 0.0,
                    m: 0,
                    step_duration,
                },
            ),
            other => {
                if problem.k_override.is_some() {
                    return Err(Error::config(format!(
                        "the {} kernel derives its time step from h; k cannot be overridden",
                        other.name()
                    )));
                }
                let chain = PowerLawChain::new(other, 1.0 / step_duration)?;
                let clock = ClockInfo {
                    raw_k: chain.k(),
                    k: chain.k(),
                    m: 0,
                    step_duration,
                };
                (Walk::Lattice(TimeChain::PowerLaw(chain)), clock)
            }
        };
        let forcing = match (&problem.forcing, &walk) {
            (None, _) => Forcing::Zero,
            (Some(f), Walk::Lattice(_)) => {
                let rows = (problem.horizon / clock.k).floor() as usize + 2;
                let cols = problem.lattice.cells + 1;
                if rows.saturating_mul(cols) <= MAX_TABLE {
                    let mut values = Vec::with_capacity(rows * cols);
                    for n in 0..rows {
                        let t = n as f64 * clock.k;
                        values.extend((0..cols).map(|j| f.eval(t, problem.lattice.x(j))));
                    }
                    Forcing::Table { rows, values }
                } else {
                    Forcing::Direct(f.clone())
                }
            }
            (Some(f), Walk::Atomic { .. }) => Forcing::Direct(f.clone()),
        };
        Ok(Self {
            problem: problem.clone(),
            walk,
            clock,
            forcing,
        })
    }

    pub fn clock(&self) -> ClockInfo {
        self.clock
    }

    pub fn problem(&self) -> &ProblemData {
        &self.problem
    }

    fn with_forcing_mode(&self, forcing: Forcing, phi: DataFn) -> Self {
        let mut problem = self.problem.clone();
        problem.phi = phi;
        Self {
            problem,
            walk: match &self.walk {
                Walk::Lattice(c) => Walk::Lattice(c.clone()),
                Walk::Atomic { lambda, delta } => Walk::Atomic {
                    lambda: *lambda,
                    delta: *delta,
                },
            },
            clock: self.clock,
            forcing,
        }
    }

    /// Time actually simulated for a requested `t`.
    pub fn snap_time(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) || t > self.problem.horizon * (1.0 + 1e-12) {
            return Err(Error::domain(format!("time {t} outside (0, {}]", self.problem.horizon)));
        }
        match self.walk {
            Walk::Atomic { .. } => Ok(t),
            Walk::Lattice(_) => {
                let (n, snapped) = snap_to_grid(t, self.clock.k);
                if n == 0 {
                    return Err(Error::domain(format!(
                        "time {t} is below one grid step {}",
                        self.clock.k
                    )));
                }
                Ok(snapped)
            }
        }
    }

    /// Estimate of `u(t, x_j)` from `n_trials` independent paths.
    pub fn estimate(&self, t: f64, x_index: usize, n_trials: u64, seed: u64) -> Result<McEstimate> {
        if n_trials == 0 {
            return Err(Error::config("n_trials must be at least 1"));
        }
        let snapped = self.snap_time(t)?;
        let lattice = &self.problem.lattice;
        if x_index > lattice.cells {
            return Err(Error::domain(format!(
                "x index {x_index} outside [0, {}]",
                lattice.cells
            )));
        }
        if lattice.is_boundary(x_index) {
            return Ok(McEstimate {
                mean: 0.0,
                stderr: 0.0,
                n_trials,
                seed,
                snapped_t: snapped,
                x_index,
            });
        }
        let stats = match &self.walk {
            Walk::Lattice(chain) => {
                let start = (snapped / self.clock.k).round() as i64;
                run_trials(n_trials, seed, |rng| self.lattice_trial(chain, start, x_index, rng))
            }
            Walk::Atomic { lambda, delta } => run_trials(n_trials, seed, |rng| {
                self.atomic_trial(*lambda, *delta, snapped, x_index, rng)
            }),
        };
        Ok(McEstimate::from_stats(&stats, seed, snapped, x_index))
    }

    /// Estimates at every grid point (boundary points are exactly 0).
    ///
    /// Trial `i` uses the same random stream at every `x`, so one shared time
    /// path and one shared ±1 sequence serve all starting points; the result
    /// equals calling [`estimate`](Self::estimate) point by point.
    pub fn estimate_profile(&self, t: f64, n_trials: u64, seed: u64) -> Result<Vec<McEstimate>> {
        if n_trials == 0 {
            return Err(Error::config("n_trials must be at least 1"));
        }
        let snapped = self.snap_time(t)?;
        let width = self.problem.lattice.cells + 1;
        let stats = match &self.walk {
            Walk::Lattice(chain) => {
                let start = (snapped / self.clock.k).round() as i64;
                run_trials_vec(n_trials, seed, width, |rng, out| {
                    self.lattice_profile_trial(chain, start, rng, out)
                })
            }
            Walk::Atomic { lambda, delta } if matches!(self.forcing, Forcing::Zero) => {
                run_trials_vec(n_trials, seed, width, |rng, out| {
                    self.atomic_profile_trial(*lambda, *delta, snapped, rng, out)
                })
            }
            Walk::Atomic { .. } => {
                return (0..width).map(|j| self.estimate(t, j, n_trials, seed)).collect();
            }
        };
        Ok(stats
            .iter()
            .enumerate()
            .map(|(j, s)| {
                if self.problem.lattice.is_boundary(j) {
                    McEstimate {
                        mean: 0.0,
                        stderr: 0.0,
                        n_trials,
                        seed,
                        snapped_t: snapped,
                        x_index: j,
                    }
                } else {
                    McEstimate::from_stats(s, seed, snapped, j)
                }
            })
            .collect())
    }

    /// Estimate of `E[τ_0(t) ∧ τ_Ω(x)]`: the solution with `φ ≡ 0`, `f ≡ 1`.
    pub fn estimate_mean_exit(&self, t: f64, x_index: usize, n_trials: u64, seed: u64) -> Result<McEstimate> {
        self.with_forcing_mode(Forcing::Unit, zero_fn())
            .estimate(t, x_index, n_trials, seed)
    }

    #[inline]
    fn forcing_at(&self, pos: i64, j: usize) -> f64 {
        match &self.forcing {
            Forcing::Zero => 0.0,
            Forcing::Unit => 1.0,
            Forcing::Table { rows, values } => {
                let n = (pos.max(0) as usize).min(rows - 1);
                values[n * (self.problem.lattice.cells + 1) + j]
            }
            Forcing::Direct(f) => f.eval((pos as f64 * self.clock.k).max(0.0), self.problem.lattice.x(j)),
        }
    }

    fn lattice_trial(&self, chain: &TimeChain, start: i64, x_index: usize, rng: &mut TrialRng) -> f64 {
        let lattice = &self.problem.lattice;
        let k = self.clock.k;
        let dt = self.clock.step_duration;
        let has_forcing = !matches!(self.forcing, Forcing::Zero);
        let mut coins = CoinFlips::new();
        let mut pos = start;
        let mut j = x_index;
        let mut integral = 0.0;
        let mut f_prev = if has_forcing { self.forcing_at(pos, j) } else { 0.0 };
        loop {
            let cells = chain.sample_cells(pos, rng);
            let j_prev = j;
            if coins.flip(rng) {
                j += 1;
            } else {
                j -= 1;
            }
            pos = pos.saturating_sub(cells);
            if has_forcing {
                let f_now = self.forcing_at(pos, j);
                integral += 0.5 * (f_prev + f_now) * dt;
                f_prev = f_now;
            }
            let crossed = pos <= 0;
            let killed = lattice.is_boundary(j);
            if crossed && killed {
                // Both clocks rang within one step; order them at random.
                return if coins.flip(rng) {
                    integral + self.problem.phi.eval(pos as f64 * k, lattice.x(j_prev))
                } else {
                    integral
                };
            }
            if killed {
                return integral;
            }
            if crossed {
                return integral + self.problem.phi.eval(pos as f64 * k, lattice.x(j));
            }
        }
    }

    /// All starting points at once. Start `j` is alive while `j + S_n` stays
    /// interior, i.e. for `j` in `1 - min S ..= M - 1 - max S`.
    fn lattice_profile_trial(&self, chain: &TimeChain, start: i64, rng: &mut TrialRng, out: &mut [f64]) {
        let lattice = &self.problem.lattice;
        let m = lattice.cells as i64;
        let k = self.clock.k;
        let dt = self.clock.step_duration;
        let has_forcing = !matches!(self.forcing, Forcing::Zero);
        out.fill(0.0);
        let mut integral = vec![0.0; out.len()];
        let mut f_prev = vec![0.0; out.len()];
        let mut pos = start;
        if has_forcing {
            for (j, f) in f_prev.iter_mut().enumerate().take(lattice.cells).skip(1) {
                *f = self.forcing_at(pos, j);
            }
        }
        let mut coins = CoinFlips::new();
        let (mut s, mut min_s, mut max_s) = (0i64, 0i64, 0i64);
        loop {
            let (lo, hi) = (1 - min_s, m - 1 - max_s);
            let cells = chain.sample_cells(pos, rng);
            let s_prev = s;
            s += if coins.flip(rng) { 1 } else { -1 };
            pos = pos.saturating_sub(cells);
            if has_forcing {
                for j in lo..=hi {
                    let ju = j as usize;
                    let f_now = self.forcing_at(pos, (j + s) as usize);
                    integral[ju] += 0.5 * (f_prev[ju] + f_now) * dt;
                    f_prev[ju] = f_now;
                }
            }
            let killed = if s < min_s {
                min_s = s;
                Some(lo)
            } else if s > max_s {
                max_s = s;
                Some(hi)
            } else {
                None
            };
            let (lo, hi) = (1 - min_s, m - 1 - max_s);
            if pos <= 0 {
                let tp = pos as f64 * k;
                for j in lo..=hi {
                    out[j as usize] = integral[j as usize] + self.problem.phi.eval(tp, lattice.x((j + s) as usize));
                }
                if let Some(j) = killed {
                    let ju = j as usize;
                    out[ju] = if coins.flip(rng) {
                        integral[ju] + self.problem.phi.eval(tp, lattice.x((j + s_prev) as usize))
                    } else {
                        integral[ju]
                    };
                }
                return;
            }
            if let Some(j) = killed {
                out[j as usize] = integral[j as usize];
            }
            if lo > hi {
                return;
            }
        }
    }

    fn atomic_profile_trial(&self, lambda: f64, delta: f64, t: f64, rng: &mut TrialRng, out: &mut [f64]) {
        let lattice = &self.problem.lattice;
        let m = lattice.cells as i64;
        let dt = self.clock.step_duration;
        let n = atomic_jump_count(t, delta);
        let crossing = t - n as f64 * delta;
        out.fill(0.0);
        let clock = sample_gamma_clock(n, lambda, rng);
        let steps = (clock / dt).floor() as u64;
        let mut coins = CoinFlips::new();
        let (mut s, mut min_s, mut max_s) = (0i64, 0i64, 0i64);
        for _ in 0..steps {
            s += if coins.flip(rng) { 1 } else { -1 };
            min_s = min_s.min(s);
            max_s = max_s.max(s);
            if 1 - min_s > m - 1 - max_s {
                return;
            }
        }
        for j in (1 - min_s)..=(m - 1 - max_s) {
            out[j as usize] = self.problem.phi.eval(crossing, lattice.x((j + s) as usize));
        }
    }

    fn atomic_trial(&self, lambda: f64, delta: f64, t: f64, x_index: usize, rng: &mut TrialRng) -> f64 {
        let lattice = &self.problem.lattice;
        let dt = self.clock.step_duration;
        let n = atomic_jump_count(t, delta);
        let crossing = t - n as f64 * delta;
        let mut coins = CoinFlips::new();
        let mut j = x_index;
        if matches!(self.forcing, Forcing::Zero) {
            let clock = sample_gamma_clock(n, lambda, rng);
            let steps = (clock / dt).floor() as u64;
            for _ in 0..steps {
                if coins.flip(rng) {
                    j += 1;
                } else {
                    j -= 1;
                }
                if lattice.is_boundary(j) {
                    return 0.0;
                }
            }
            return self.problem.phi.eval(crossing, lattice.x(j));
        }
        // Event-driven: the path is piecewise constant between walk steps and jumps.
        let exp = Exp::new(lambda).expect("rate validated positive");
        let mut now = 0.0;
        let mut next_step = dt;
        let mut next_jump = exp.sample(rng);
        let mut jumps = 0u64;
        let mut integral = 0.0;
        loop {
            let next = next_step.min(next_jump);
            let time_pos = t - jumps as f64 * delta;
            integral += self.forcing_value(time_pos, j) * (next - now);
            now = next;
            if next_jump <= next_step {
                jumps += 1;
                if jumps == n {
                    return integral + self.problem.phi.eval(crossing, lattice.x(j));
                }
                next_jump += exp.sample(rng);
            } else {
                if coins.flip(rng) {
                    j += 1;
                } else {
                    j -= 1;
                }
                if lattice.is_boundary(j) {
                    return integral;
                }
                next_step += dt;
            }
        }
    }

    fn forcing_value(&self, t: f64, j: usize) -> f64 {
        match &self.forcing {
            Forcing::Zero => 0.0,
            Forcing::Unit => 1.0,
            Forcing::Direct(f) => f.eval(t, self.problem.lattice.x(j)),
            Forcing::Table { .. } => self.forcing_at((t / self.clock.k).round() as i64, j),
        }
    }
}

/// One-shot form of [`FeynmanKac::estimate`].
pub fn estimate_solution(
    problem: &ProblemData,
    t: f64,
    x_index: usize,
    n_trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    FeynmanKac::new(problem)?.estimate(t, x_index, n_trials, seed)
}

/// One-shot form of [`FeynmanKac::estimate_mean_exit`].
pub fn estimate_mean_exit(
    problem: &ProblemData,
    t: f64,
    x_index: usize,
    n_trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    FeynmanKac::new(problem)?.estimate_mean_exit(t, x_index, n_trials, seed)
}

/// History forcing `f_φ(t,x) = ∫_t^∞ (φ(t-r, x) - φ(0, x)) ρ(t, r) dr`.
pub fn compute_phi_forcing(problem: &ProblemData, t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("time {t} must be positive")));
    }
    let phi0 = problem.phi.eval(0.0, x);
    let jump = |r: f64| problem.phi.eval(t - r, x) - phi0;
    let opts = QuadOptions::rel(1e-10).with_abs(1e-13);
    match problem.kernel {
        Kernel::Atomic { lambda, delta } => Ok(if t < delta { lambda * jump(delta) } else { 0.0 }),
        Kernel::Truncated { delta, .. } => {
            if t >= delta {
                return Ok(0.0);
            }
            let kern = &problem.kernel;
            integrate(
                |s| jump(t + s) * kern.evaluate(t, t + s).unwrap_or(0.0),
                0.0,
                delta - t,
                opts,
            )
            .map(|r| r.value)
            .map_err(|e| relabel(e, "history forcing"))
        }
        _ => {
            // r = t v^{-1/α} turns the power tail into a bounded integrand on (0, 1).
            let kern = &problem.kernel;
            let alpha = kern.order_at(t)?;
            integrate(
                |v| {
                    if v <= 0.0 {
                        return 0.0;
                    }
                    let r = t * v.powf(-1.0 / alpha);
                    let dr = t / alpha * v.powf(-1.0 / alpha - 1.0);
                    let w = kern.evaluate(t, r).unwrap_or(0.0) * dr;
                    if w == 0.0 || !w.is_finite() {
                        0.0
                    } else {
                        jump(r) * w
                    }
                },
                0.0,
                1.0,
                opts,
            )
            .map(|r| r.value)
            .map_err(|e| relabel(e, "history forcing"))
        }
    }
}

fn relabel(e: Error, context: &str) -> Error {
    match e {
        Error::Numerical { detail, .. } => Error::numerical(context, detail),
        other => other,
    }
}

#[allow(dead_code)]
fn assert_send_sync() {
    fn check<T: Send + Sync>() {}
    check::<FeynmanKac>();
    check::<ProblemData>();
}
