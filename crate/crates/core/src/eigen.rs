//! Perron roots of small dense matrices.
//!
//! Two independent routes are provided: power iteration on an entrywise
//! nonnegative matrix, and bisection on the characteristic polynomial
//! `det(xI - A)` evaluated by pivoted elimination. Callers compare them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(dim: usize) -> Self {
        DenseMatrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = DenseMatrix::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Usage("matrix rows must all have length equal to the row count".into()));
        }
        Ok(DenseMatrix { dim, data: rows.concat() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    /// Deletes row and column `k`.
    pub fn minor(&self, k: usize) -> DenseMatrix {
        let d = self.dim - 1;
        let mut out = DenseMatrix::zeros(d);
        for (oi, i) in (0..self.dim).filter(|&i| i != k).enumerate() {
            for (oj, j) in (0..self.dim).filter(|&j| j != k).enumerate() {
                out[(oi, oj)] = self[(i, j)];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(usize, usize, f64) -> f64) -> DenseMatrix {
        let mut out = self.clone();
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(i, j)] = f(i, j, self[(i, j)]);
            }
        }
        out
    }

    /// `self * v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// Row vector times matrix, `v * self`.
    pub fn vec_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Gershgorin interval containing the real parts of all eigenvalues.
    pub fn gershgorin_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.dim {
            let off: f64 = (0..self.dim).filter(|&j| j != i).map(|j| self[(i, j)].abs()).sum();
            lo = lo.min(self[(i, i)] - off);
            hi = hi.max(self[(i, i)] + off);
        }
        (lo, hi)
    }

    /// `det(x I - self)`.
    pub fn char_poly_at(&self, x: f64) -> f64 {
        let d = self.dim;
        let mut a = self.map(|i, j, v| if i == j { x - v } else { -v }).data;
        let mut det = 1.0;
        for col in 0..d {
            let pivot = (col..d).max_by(|&r, &s| a[r * d + col].abs().total_cmp(&a[s * d + col].abs())).unwrap();
            if a[pivot * d + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for c in 0..d {
                    a.swap(pivot * d + c, col * d + c);
                }
                det = -det;
            }
            let p = a[col * d + col];
            det *= p;
            for r in col + 1..d {
                let factor = a[r * d + col] / p;
                if factor != 0.0 {
                    for c in col..d {
                        a[r * d + c] -= factor * a[col * d + c];
                    }
                }
            }
        }
        det
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    /// `‖A v - ρ v‖∞` for the unit-norm final iterate.
    pub residual: f64,
}

pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITER: usize = 1_000_000;

/// Power iteration with Rayleigh-quotient stopping. `a` must be entrywise
/// nonnegative so that the dominant eigenvalue is the real Perron root.
pub fn power_iteration(a: &DenseMatrix, tol: f64, max_iter: usize) -> Result<PowerResult> {
    if a.min_entry() < 0.0 {
        return Err(Error::Numerical(format!(
            "power iteration needs a nonnegative matrix; min entry {}",
            a.min_entry()
        )));
    }
    let d = a.dim();
    if d == 0 {
        return Err(Error::Usage("empty matrix".into()));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut prev = f64::NAN;
    for it in 1..=max_iter {
        let w = a.mul_vec(&v);
        let rho: f64 = v.iter().zip(&w).map(|(x, y)| x * y).sum();
        let wn = norm(&w);
        if wn == 0.0 {
            // Nilpotent block: the Perron root is zero.
            return Ok(PowerResult { value: 0.0, vector: v, iterations: it, residual: 0.0 });
        }
        v = w.iter().map(|x| x / wn).collect();
        if (rho - prev).abs() < tol {
            let av = a.mul_vec(&v);
            let residual = av.iter().zip(&v).map(|(x, y)| (x - rho * y).abs()).fold(0.0, f64::max);
            return Ok(PowerResult { value: rho, vector: v, iterations: it, residual });
        }
        prev = rho;
    }
    Err(Error::Numerical(format!("power iteration did not converge in {max_iter} iterations")))
}

/// Largest real root of `det(xI - a)`: scans down from the Gershgorin upper
/// edge for the first sign change, then bisects.
pub fn largest_real_eigenvalue(a: &DenseMatrix) -> Result<f64> {
    const SCAN_STEPS: usize = 20_000;
    let (lo, hi) = a.gershgorin_bounds();
    let span = (hi - lo).max(f64::EPSILON);
    let hi = hi + 1e-9 * span.max(1.0);
    let step = (hi - lo) / SCAN_STEPS as f64;
    let sign_top = a.char_poly_at(hi).signum();
    let mut upper = hi;
    for s in 1..=SCAN_STEPS + 1 {
        let x = hi - step * s as f64;
        let px = a.char_poly_at(x);
        if px == 0.0 {
            return Ok(x);
        }
        if px.signum() != sign_top {
            return Ok(bisect(a, x, upper));
        }
        upper = x;
    }
    Err(Error::Numerical("characteristic polynomial has no real root in the Gershgorin interval".into()))
}

fn bisect(a: &DenseMatrix, mut lo: f64, mut hi: f64) -> f64 {
    let s_lo = a.char_poly_at(lo).signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let pm = a.char_poly_at(mid);
        if pm == 0.0 {
            return mid;
        }
        if pm.signum() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
