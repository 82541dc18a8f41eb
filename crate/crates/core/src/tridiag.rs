//! Thomas algorithm for diagonally dominant tridiagonal systems.

use crate::error::{Error, Result};

/// Tridiagonal matrix stored by diagonals. `lower[0]` and `upper[n-1]` are unused.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    /// Constant-coefficient matrix of size `n`.
    pub fn constant(n: usize, lower: f64, diag: f64, upper: f64) -> Self {
        Self {
            lower: vec![lower; n],
            diag: vec![diag; n],
            upper: vec![upper; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                v += self.upper[i] * x[i + 1];
            }
            out[i] = v;
        }
    }

    /// Forward-elimination factors, reusable across right-hand sides.
    pub fn factor(&self) -> Result<ThomasFactor> {
        let n = self.len();
        if n == 0 {
            return Err(Error::config("empty tridiagonal system"));
        }
        let mut c_prime = vec![0.0; n];
        let mut inv_denom = vec![0.0; n];
        let mut denom = self.diag[0];
        for i in 0..n {
            if i > 0 {
                denom = self.diag[i] - self.lower[i] * c_prime[i - 1];
            }
            if denom == 0.0 || !denom.is_finite() {
                return Err(Error::numerical(
                    "thomas factorization",
                    format!("zero pivot at row {i}"),
                ));
            }
            inv_denom[i] = 1.0 / denom;
            c_prime[i] = self.upper[i] * inv_denom[i];
        }
        Ok(ThomasFactor {
            lower: self.lower.clone(),
            c_prime,
            inv_denom,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ThomasFactor {
    lower: Vec<f64>,
    c_prime: Vec<f64>,
    inv_denom: Vec<f64>,
}

impl ThomasFactor {
    /// Overwrites `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.c_prime.len();
        debug_assert_eq!(rhs.len(), n);
        rhs[0] *= self.inv_denom[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) * self.inv_denom[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.c_prime[i] * rhs[i + 1];
        }
    }
}

/// Second-order central-difference operator `λ·I - d²/dx²` on the interior
/// nodes of a uniform grid with zero Dirichlet data.
pub fn shifted_laplacian(interior: usize, h: f64, shift: f64) -> Tridiagonal {
    let inv_h2 = 1.0 / (h * h);
    Tridiagonal::constant(interior, -inv_h2, shift + 2.0 * inv_h2, -inv_h2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_is_tiny() {
        let n = 50;
        let mut m = shifted_laplacian(n, 0.04, 3.0);
        m.lower[7] = -700.0;
        m.diag[7] = 1500.0;
        let b: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.37).sin()).collect();
        let mut x = b.clone();
        m.factor().unwrap().solve_in_place(&mut x);
        let mut ax = vec![0.0; n];
        m.apply(&x, &mut ax);
        let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (l, r) in ax.iter().zip(&b) {
            assert!((l - r).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn single_unknown() {
        let m = Tridiagonal::constant(1, 0.0, 4.0, 0.0);
        let mut x = vec![2.0];
        m.factor().unwrap().solve_in_place(&mut x);
        assert_eq!(x[0], 0.5);
    }

    #[test]
    fn zero_pivot_is_reported() {
        let m = Tridiagonal::constant(2, 1.0, 0.0, 1.0);
        assert!(m.factor().is_err());
    }
}
