//! The decreasing time chain: a lattice walk on `{t - jk}` approximating the
//! time process generated by `-D^{(ρ)}`, and its first passage below zero.
//!
//! Two lattice chains are provided:
//!
//! * [`JumpWeights`] — the truncated kernel's scheme. From every grid point
//!   the chain jumps back `i` cells with probability `p_i = ω_i / ω_0`, one
//!   jump per step.
//! * [`PowerLawChain`] — fractional, tempered and variable-order kernels.
//!   Cell weights are the same construction (first-cell moment `∫_0^k rρ / k`,
//!   then `∫_{(j-1)k}^{jk} ρ`), sampled exactly without a cutoff: the jump
//!   beyond the first cell is `⌈Y/k⌉` for a Pareto-distributed `Y`, thinned
//!   by `e^{-λY}` for tempering. The chain is uniformized at a fixed rate, so
//!   a step may leave the position unchanged.
//!
//! The atomic kernel is simulated exactly in continuous time.

use rand::Rng;
use rand_distr::{weighted::WeightedAliasIndex, Distribution, Exp, Gamma};

use crate::error::{Error, Result};
use crate::kernel::{fractional_constant, Kernel};
use crate::rng::run_trials;
use crate::stats::McEstimate;

/// Largest jump, in cells, that is tracked exactly.
const MAX_CELLS: f64 = 9.0e15;

/// Sum of exponentials up to this shape, a Gamma sampler above.
const GAMMA_SUM_LIMIT: u64 = 50;

/// Relative slack when checking that a value sits on the time grid.
const GRID_TOL: f64 = 1e-9;

/// Discretization weights of the truncated kernel on a grid of spacing `k`.
#[derive(Debug, Clone)]
pub struct JumpWeights {
    pub alpha: f64,
    pub delta: f64,
    pub k: f64,
    pub m: usize,
    /// `ω_0, ω_1, …, ω_m`.
    pub omega: Vec<f64>,
    /// `p_1, …, p_m` (index `i - 1` holds `p_i`).
    pub prob: Vec<f64>,
    alias: WeightedAliasIndex<f64>,
}

/// Weights `ω_j` for `δ = m k`. Rejects `δ / k` that is not a positive integer.
pub fn compute_weights(alpha: f64, delta: f64, k: f64) -> Result<JumpWeights> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("order α = {alpha} must lie in (0, 1)")));
    }
    if !(delta > 0.0 && k > 0.0) {
        return Err(Error::config(format!("δ = {delta} and k = {k} must be positive")));
    }
    let ratio = delta / k;
    let m = ratio.round();
    if m < 1.0 {
        return Err(Error::config(format!("δ / k = {ratio} gives m = 0")));
    }
    if (ratio - m).abs() > GRID_TOL * m {
        return Err(Error::config(format!("δ / k = {ratio} is not an integer")));
    }
    let m = m as usize;
    let k = delta / m as f64;
    let scale = delta.powf(alpha - 1.0);
    let c = (1.0 - alpha) / alpha;
    let mut omega = Vec::with_capacity(m + 1);
    omega.push(scale * (1.0 + c * (1.0 - (m as f64).powf(-alpha))));
    omega.push(scale);
    for j in 2..=m {
        let j = j as f64;
        omega.push(scale * c * ((j - 1.0).powf(-alpha) - j.powf(-alpha)));
    }
    let prob: Vec<f64> = omega[1..].iter().map(|w| w / omega[0]).collect();
    let alias =
        WeightedAliasIndex::new(omega[1..].to_vec()).map_err(|e| Error::config(format!("jump distribution: {e}")))?;
    Ok(JumpWeights {
        alpha,
        delta,
        k,
        m,
        omega,
        prob,
        alias,
    })
}

impl JumpWeights {
    /// Jump length in cells, distributed as `p_1..p_m`.
    #[inline]
    pub fn sample_cells<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        self.alias.sample(rng) as i64 + 1
    }

    /// Total jump rate `ω_0 / k^α` of the discrete generator.
    pub fn rate(&self) -> f64 {
        self.omega[0] / self.k.powf(self.alpha)
    }
}

/// Per-position jump law of a [`PowerLawChain`] step.
#[derive(Debug, Clone, Copy)]
struct StepLaw {
    alpha: f64,
    /// Probability of a one-cell jump.
    p_first: f64,
    /// Probability of proposing a Pareto jump beyond the first cell.
    p_far: f64,
}

/// Uniformized lattice chain for kernels with power-law small jumps.
#[derive(Debug, Clone)]
pub struct PowerLawChain {
    kernel: Kernel,
    k: f64,
    rate: f64,
    tempering: Option<f64>,
    homogeneous: Option<StepLaw>,
}

fn power_law_step(alpha: f64, rate: f64) -> f64 {
    (fractional_constant(alpha) / (alpha * (1.0 - alpha) * rate)).powf(1.0 / alpha)
}

impl PowerLawChain {
    /// Builds the chain whose proposal rate equals `rate` (jumps per unit of
    /// physical time); the grid spacing `k` follows from it.
    pub fn new(kernel: &Kernel, rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::config(format!("uniformization rate {rate} must be positive")));
        }
        let tempering = match kernel {
            Kernel::Fractional { .. } | Kernel::VariableOrder { .. } => None,
            Kernel::Tempered { lambda, .. } => Some(*lambda),
            other => {
                return Err(Error::Unsupported {
                    op: "power-law time chain",
                    kernel: other.name(),
                })
            }
        };
        let mut k: f64 = 0.0;
        for t in kernel.window_samples() {
            k = k.max(power_law_step(kernel.order_at(t)?, rate));
        }
        let mut chain = Self {
            kernel: kernel.clone(),
            k,
            rate,
            tempering,
            homogeneous: None,
        };
        if kernel.is_time_homogeneous() {
            chain.homogeneous = Some(chain.law_at(0.0)?);
        }
        Ok(chain)
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    fn law_at(&self, t: f64) -> Result<StepLaw> {
        let alpha = self.kernel.order_at(t)?;
        let first = self.kernel.first_moment(t, self.k)? / self.k;
        let far = fractional_constant(alpha) * self.k.powf(-alpha) / alpha;
        let mut p_first = first / self.rate;
        let mut p_far = far / self.rate;
        let total = p_first + p_far;
        if total > 1.0 {
            // Only reachable for a variable order between its sample points.
            p_first /= total;
            p_far /= total;
        }
        Ok(StepLaw { alpha, p_first, p_far })
    }

    /// Jump length in cells from grid position `pos` (time `pos·k`); zero when
    /// the uniformized step leaves the chain in place.
    #[inline]
    pub fn sample_cells<R: Rng + ?Sized>(&self, pos: i64, rng: &mut R) -> i64 {
        let law = match self.homogeneous {
            Some(l) => l,
            None => match self.law_at(pos as f64 * self.k) {
                Ok(l) => l,
                // Outside the order's admissible range the chain freezes.
                Err(_) => return 0,
            },
        };
        let u: f64 = rng.random();
        if u < law.p_first {
            return 1;
        }
        if u >= law.p_first + law.p_far {
            return 0;
        }
        let v = 1.0 - rng.random::<f64>();
        let y = v.powf(-1.0 / law.alpha);
        if let Some(lambda) = self.tempering {
            if rng.random::<f64>() >= (-lambda * y * self.k).exp() {
                return 0;
            }
        }
        y.ceil().min(MAX_CELLS) as i64
    }

    /// Total jump rate at time `t`.
    pub fn jump_rate(&self, t: f64) -> Result<f64> {
        let first = self.kernel.first_moment(t, self.k)? / self.k;
        Ok(first + self.kernel.tail_mass(t, self.k)?)
    }
}

/// A lattice time chain with a grid spacing `k`.
#[derive(Debug, Clone)]
pub enum TimeChain {
    Truncated(JumpWeights),
    PowerLaw(PowerLawChain),
}

impl TimeChain {
    pub fn k(&self) -> f64 {
        match self {
            TimeChain::Truncated(w) => w.k,
            TimeChain::PowerLaw(c) => c.k,
        }
    }

    #[inline]
    pub fn sample_cells<R: Rng + ?Sized>(&self, pos: i64, rng: &mut R) -> i64 {
        match self {
            TimeChain::Truncated(w) => w.sample_cells(rng),
            TimeChain::PowerLaw(c) => c.sample_cells(pos, rng),
        }
    }
}

/// Snaps `t` down onto the grid `{n k}`; returns `(n, n k)`.
pub fn snap_to_grid(t: f64, k: f64) -> (i64, f64) {
    let n = (t / k * (1.0 + GRID_TOL)).floor() as i64;
    (n, n as f64 * k)
}

/// Outcome of one run of the time chain until it reaches `(-∞, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeExitSample {
    pub steps_to_exit: u64,
    /// Position after the crossing jump, `≤ 0`.
    pub crossing_value: f64,
    /// Visited times, starting at `t_start`, when recording was requested.
    pub path: Option<Vec<f64>>,
}

fn start_index(t_start: f64, k: f64) -> Result<i64> {
    if !(t_start > 0.0) {
        return Err(Error::domain(format!("start time {t_start} must be positive")));
    }
    let n = (t_start / k).round();
    if (t_start / k - n).abs() > GRID_TOL * n.max(1.0) {
        return Err(Error::domain(format!(
            "start time {t_start} is not on the grid of spacing {k}"
        )));
    }
    Ok(n as i64)
}

/// Runs `chain` from the grid time `t_start` until its position is `≤ 0`.
pub fn simulate_exit<R: Rng + ?Sized>(
    chain: &TimeChain,
    t_start: f64,
    record_path: bool,
    rng: &mut R,
) -> Result<TimeExitSample> {
    let k = chain.k();
    let mut pos = start_index(t_start, k)?;
    let mut path = record_path.then(|| vec![pos as f64 * k]);
    let mut steps = 0u64;
    while pos > 0 {
        let j = chain.sample_cells(pos, rng);
        steps += 1;
        if j == 0 {
            continue;
        }
        pos = pos.saturating_sub(j);
        if let Some(p) = path.as_mut() {
            p.push(pos as f64 * k);
        }
    }
    Ok(TimeExitSample {
        steps_to_exit: steps,
        crossing_value: pos as f64 * k,
        path,
    })
}

/// Exact first passage of the atomic kernel's decreasing Poisson process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomicExitSample {
    /// Number of jumps `n = ⌈t/δ⌉`.
    pub jumps: u64,
    /// Continuous exit clock, a `Gamma(n, λ)` sample.
    pub exit_clock: f64,
    /// `t - n δ`.
    pub crossing_value: f64,
}

/// `n = ⌈t/δ⌉`, robust to `t/δ` rounding just above an integer.
pub fn atomic_jump_count(t: f64, delta: f64) -> u64 {
    let mut n = (t / delta).ceil().max(1.0);
    if n > 1.0 && (n - 1.0) * delta >= t {
        n -= 1.0;
    }
    n as u64
}

pub fn sample_gamma_clock<R: Rng + ?Sized>(n: u64, lambda: f64, rng: &mut R) -> f64 {
    if n <= GAMMA_SUM_LIMIT {
        let exp = Exp::new(lambda).expect("rate validated positive");
        (0..n).map(|_| exp.sample(rng)).sum()
    } else {
        Gamma::new(n as f64, 1.0 / lambda)
            .expect("shape and scale are positive")
            .sample(rng)
    }
}

pub fn simulate_exit_atomic<R: Rng + ?Sized>(
    lambda: f64,
    delta: f64,
    t_start: f64,
    rng: &mut R,
) -> Result<AtomicExitSample> {
    if !(t_start > 0.0) {
        return Err(Error::domain(format!("start time {t_start} must be positive")));
    }
    if !(lambda > 0.0 && delta > 0.0) {
        return Err(Error::domain("atomic kernel needs λ > 0 and δ > 0"));
    }
    let n = atomic_jump_count(t_start, delta);
    Ok(AtomicExitSample {
        jumps: n,
        exit_clock: sample_gamma_clock(n, lambda, rng),
        crossing_value: t_start - n as f64 * delta,
    })
}

/// What clock [`mean_exit_clock`] averages.
#[derive(Debug, Clone, Copy)]
pub enum ExitClock<'a> {
    /// Lattice chain; each step lasts `step_duration` physical time units.
    Lattice {
        chain: &'a TimeChain,
        step_duration: f64,
    },
    Atomic {
        lambda: f64,
        delta: f64,
    },
}

/// Monte Carlo estimate of `E[τ_0(t)]`.
pub fn mean_exit_clock(clock: ExitClock<'_>, t_start: f64, n_trials: u64, seed: u64) -> Result<McEstimate> {
    if n_trials == 0 {
        return Err(Error::config("n_trials must be at least 1"));
    }
    let (t, stats) = match clock {
        ExitClock::Lattice { chain, step_duration } => {
            let (_, snapped) = snap_to_grid(t_start, chain.k());
            if snapped <= 0.0 {
                return Err(Error::domain(format!("start time {t_start} snaps to 0")));
            }
            let stats = run_trials(n_trials, seed, |rng| {
                let s = simulate_exit(chain, snapped, false, rng).expect("start validated");
                s.steps_to_exit as f64 * step_duration
            });
            (snapped, stats)
        }
        ExitClock::Atomic { lambda, delta } => {
            simulate_exit_atomic(lambda, delta, t_start, &mut crate::rng::trial_rng(seed, 0))?;
            let stats = run_trials(n_trials, seed, |rng| {
                simulate_exit_atomic(lambda, delta, t_start, rng)
                    .expect("parameters validated")
                    .exit_clock
            });
            (t_start, stats)
        }
    };
    Ok(McEstimate::from_stats(&stats, seed, t, 0))
}
