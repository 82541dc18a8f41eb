//! Finite-difference reference solvers on `[0, T] × [-1, 1]`.

use crate::error::{Error, Result};
use crate::feynman_kac::{compute_phi_forcing, ProblemData};
use crate::kernel::Kernel;
use crate::time_walk::compute_weights;
use crate::tridiag::shifted_laplacian;

/// Solution on the full space-time grid, row-major in time.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    values: Vec<f64>,
    pub steps: usize,
    pub cells: usize,
    pub h: f64,
    pub k: f64,
    pub horizon: f64,
}

impl Field {
    fn zeros(steps: usize, cells: usize, horizon: f64) -> Self {
        Self {
            values: vec![0.0; (steps + 1) * (cells + 1)],
            steps,
            cells,
            h: 2.0 / cells as f64,
            k: horizon / steps as f64,
            horizon,
        }
    }

    pub fn x(&self, j: usize) -> f64 {
        -1.0 + j as f64 * self.h
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.k
    }

    /// Profile at time level `n`, boundary nodes included.
    pub fn row(&self, n: usize) -> &[f64] {
        let w = self.cells + 1;
        &self.values[n * w..(n + 1) * w]
    }

    fn row_mut(&mut self, n: usize) -> &mut [f64] {
        let w = self.cells + 1;
        &mut self.values[n * w..(n + 1) * w]
    }

    /// Index of the time level equal to `t` up to rounding.
    pub fn level_of(&self, t: f64) -> Result<usize> {
        let r = t / self.k;
        let n = r.round();
        if !(n >= 0.0 && n <= self.steps as f64) || (r - n).abs() > 1e-6 {
            return Err(Error::domain(format!(
                "time {t} is not a level of the grid with k = {}",
                self.k
            )));
        }
        Ok(n as usize)
    }

    pub fn profile_at(&self, t: f64) -> Result<&[f64]> {
        Ok(self.row(self.level_of(t)?))
    }

    /// Linear interpolation in `x` on the time level `t`.
    pub fn sample(&self, t: f64, x: f64) -> Result<f64> {
        let row = self.profile_at(t)?;
        interpolate(row, x)
    }
}

/// Piecewise-linear interpolation of a profile on the uniform grid of `[-1, 1]`.
pub fn interpolate(profile: &[f64], x: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x) || profile.len() < 2 {
        return Err(Error::domain(format!("x = {x} outside [-1, 1]")));
    }
    let cells = profile.len() - 1;
    let s = (x + 1.0) * cells as f64 / 2.0;
    let j = (s.floor() as usize).min(cells - 1);
    let w = s - j as f64;
    if w.abs() < 1e-9 {
        return Ok(profile[j]);
    }
    if (1.0 - w).abs() < 1e-9 {
        return Ok(profile[j + 1]);
    }
    Ok((1.0 - w) * profile[j] + w * profile[j + 1])
}

/// How the datum on `t ≤ 0` enters the scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HistoryMode {
    /// Past levels read `φ(t_j, x)` directly.
    #[default]
    Pointwise,
    /// Past levels frozen at `φ(0, x)` and the remainder moved into the
    /// source term as `f_φ`, evaluated by quadrature.
    ForcingTransfer,
}

fn check_grid(problem: &ProblemData, steps: usize, cells: usize) -> Result<()> {
    if steps == 0 {
        return Err(Error::config("number of time steps must be positive"));
    }
    if cells < 2 || !cells.is_multiple_of(2) {
        return Err(Error::config(format!("cell count {cells} must be even and at least 2")));
    }
    if !(problem.horizon > 0.0) {
        return Err(Error::config("final time must be positive"));
    }
    Ok(())
}

fn history_steps(delta: f64, k: f64) -> Result<usize> {
    let r = delta / k;
    let m = r.round();
    if m < 1.0 || (r - m).abs() > 1e-8 * m {
        return Err(Error::config(format!("δ / k = {r} is not a positive integer")));
    }
    Ok(m as usize)
}

fn fill_forcing(problem: &ProblemData, field: &Field, t: f64, rhs: &mut [f64]) {
    if let Some(f) = &problem.forcing {
        for (i, r) in rhs.iter_mut().enumerate() {
            *r += f.eval(t, field.x(i + 1));
        }
    }
}

/// Implicit scheme for the truncated kernel with pointwise history.
pub fn solve_nonlocal_fd(problem: &ProblemData, steps: usize, cells: usize) -> Result<Field> {
    solve_nonlocal_fd_with(problem, steps, cells, HistoryMode::Pointwise)
}

pub fn solve_nonlocal_fd_with(problem: &ProblemData, steps: usize, cells: usize, mode: HistoryMode) -> Result<Field> {
    let Kernel::Truncated { alpha, delta } = problem.kernel else {
        return Err(Error::Unsupported {
            op: "solve_nonlocal_fd",
            kernel: problem.kernel.name(),
        });
    };
    check_grid(problem, steps, cells)?;
    let mut field = Field::zeros(steps, cells, problem.horizon);
    let k = field.k;
    let m = history_steps(delta, k)?;
    let w = compute_weights(alpha, delta, k)?;
    let scale = k.powf(-alpha);
    let weights: Vec<f64> = w.omega.iter().map(|o| o * scale).collect();
    let factor = shifted_laplacian(cells - 1, field.h, weights[0]).factor()?;

    let phi_at = |t: f64, x: f64| match mode {
        HistoryMode::Pointwise => problem.phi.eval(t, x),
        HistoryMode::ForcingTransfer => problem.phi.eval(0.0, x),
    };
    // history[l] holds level -l for l = 0..m-1
    let width = cells + 1;
    let mut history = vec![0.0; m * width];
    for l in 0..m {
        let t = -(l as f64) * k;
        for j in 1..cells {
            history[l * width + j] = phi_at(t, field.x(j));
        }
    }
    field.row_mut(0).copy_from_slice(&history[..width]);

    let mut rhs = vec![0.0; cells - 1];
    for n in 1..=steps {
        rhs.iter_mut().for_each(|r| *r = 0.0);
        for (j, wj) in weights.iter().enumerate().skip(1) {
            let past = if j <= n {
                field.row(n - j)
            } else {
                let l = j - n;
                &history[l * width..(l + 1) * width]
            };
            for (r, u) in rhs.iter_mut().zip(&past[1..cells]) {
                *r += wj * u;
            }
        }
        let t = field.t(n);
        fill_forcing(problem, &field, t, &mut rhs);
        if mode == HistoryMode::ForcingTransfer && t < delta {
            for (i, r) in rhs.iter_mut().enumerate() {
                *r += compute_phi_forcing(problem, t, field.x(i + 1))?;
            }
        }
        factor.solve_in_place(&mut rhs);
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(
                "solve_nonlocal_fd",
                format!("non-finite value at step {n}"),
            ));
        }
        field.row_mut(n)[1..cells].copy_from_slice(&rhs);
    }
    Ok(field)
}

/// Implicit scheme `λ(u^n - u^{n-m}) - ∂xx u^n = f^n` for the atomic kernel.
pub fn solve_atomic_fd(problem: &ProblemData, steps: usize, cells: usize) -> Result<Field> {
    let Kernel::Atomic { lambda, delta } = problem.kernel else {
        return Err(Error::Unsupported {
            op: "solve_atomic_fd",
            kernel: problem.kernel.name(),
        });
    };
    check_grid(problem, steps, cells)?;
    let mut field = Field::zeros(steps, cells, problem.horizon);
    let k = field.k;
    let m = history_steps(delta, k)?;
    let factor = shifted_laplacian(cells - 1, field.h, lambda).factor()?;
    for j in 1..cells {
        let x = field.x(j);
        field.row_mut(0)[j] = problem.phi.eval(0.0, x);
    }
    let mut rhs = vec![0.0; cells - 1];
    for n in 1..=steps {
        if n >= m {
            let past = field.row(n - m);
            for (r, u) in rhs.iter_mut().zip(&past[1..cells]) {
                *r = lambda * u;
            }
        } else {
            let tp = (n as f64 - m as f64) * k;
            for (i, r) in rhs.iter_mut().enumerate() {
                *r = lambda * problem.phi.eval(tp, field.x(i + 1));
            }
        }
        fill_forcing(problem, &field, field.t(n), &mut rhs);
        factor.solve_in_place(&mut rhs);
        field.row_mut(n)[1..cells].copy_from_slice(&rhs);
    }
    Ok(field)
}

/// Atomic-kernel solution at time `t` by solving `λv - v'' = f + λ u(t - δ)`
/// slice by slice back to the datum. Only the space discretization on
/// `cells` cells introduces error.
pub fn exact_atomic_solution(problem: &ProblemData, t: f64, cells: usize) -> Result<Vec<f64>> {
    let Kernel::Atomic { lambda, delta } = problem.kernel else {
        return Err(Error::Unsupported {
            op: "exact_atomic_solution",
            kernel: problem.kernel.name(),
        });
    };
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("time {t} must be positive")));
    }
    if cells < 2 || !cells.is_multiple_of(2) {
        return Err(Error::config(format!("cell count {cells} must be even and at least 2")));
    }
    let h = 2.0 / cells as f64;
    let x = |j: usize| -1.0 + j as f64 * h;
    let factor = shifted_laplacian(cells - 1, h, lambda).factor()?;
    let slices = (t / delta).ceil().max(1.0) as usize;
    let t_first = t - (slices - 1) as f64 * delta;
    let mut v: Vec<f64> = (1..cells)
        .map(|j| lambda * problem.phi.eval(t_first - delta, x(j)))
        .collect();
    for s in 0..slices {
        let ts = t_first + s as f64 * delta;
        if s > 0 {
            v.iter_mut().for_each(|u| *u *= lambda);
        }
        if let Some(f) = &problem.forcing {
            for (i, r) in v.iter_mut().enumerate() {
                *r += f.eval(ts, x(i + 1));
            }
        }
        factor.solve_in_place(&mut v);
    }
    let mut out = Vec::with_capacity(cells + 1);
    out.push(0.0);
    out.extend_from_slice(&v);
    out.push(0.0);
    Ok(out)
}
