//! Symmetric tridiagonal matrices: products, quadratic forms, an LDLᵀ
//! (Thomas) factorization and Sturm-count bisection for pencil eigenvalues.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix stored by its diagonal and first off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::DimensionMismatch {
                expected: diag.len().saturating_sub(1),
                found: off.len(),
            });
        }
        Ok(Self { diag, off })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &SymTridiag) -> SymTridiag {
        debug_assert_eq!(self.dim(), other.dim());
        SymTridiag {
            diag: self
                .diag
                .iter()
                .zip(&other.diag)
                .map(|(a, b)| a + c * b)
                .collect(),
            off: self
                .off
                .iter()
                .zip(&other.off)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.diag.iter().chain(&self.off).all(|&v| v == 0.0)
    }

    /// `out = A v`.
    pub fn mul_into(&self, v: &[f64], out: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(v.len(), n);
        debug_assert_eq!(out.len(), n);
        if n == 1 {
            out[0] = self.diag[0] * v[0];
            return;
        }
        out[0] = self.diag[0] * v[0] + self.off[0] * v[1];
        for i in 1..n - 1 {
            out[i] = self.off[i - 1] * v[i - 1] + self.diag[i] * v[i] + self.off[i] * v[i + 1];
        }
        out[n - 1] = self.off[n - 2] * v[n - 2] + self.diag[n - 1] * v[n - 1];
    }

    pub fn mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.mul_into(v, &mut out);
        out
    }

    /// `out += c * A v`.
    pub fn mul_add_into(&self, c: f64, v: &[f64], out: &mut [f64]) {
        let n = self.dim();
        if n == 1 {
            out[0] += c * self.diag[0] * v[0];
            return;
        }
        out[0] += c * (self.diag[0] * v[0] + self.off[0] * v[1]);
        for i in 1..n - 1 {
            out[i] +=
                c * (self.off[i - 1] * v[i - 1] + self.diag[i] * v[i] + self.off[i] * v[i + 1]);
        }
        out[n - 1] += c * (self.off[n - 2] * v[n - 2] + self.diag[n - 1] * v[n - 1]);
    }

    /// `wᵀ A v`.
    pub fn bilinear(&self, w: &[f64], v: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            acc += w[i] * self.diag[i] * v[i];
        }
        for i in 0..n - 1 {
            acc += self.off[i] * (w[i] * v[i + 1] + w[i + 1] * v[i]);
        }
        acc
    }

    pub fn quad_form(&self, v: &[f64]) -> f64 {
        self.bilinear(v, v)
    }

    /// LDLᵀ factorization; fails unless every pivot is strictly positive.
    pub fn factor(&self) -> Result<TridiagFactor> {
        let n = self.dim();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        d[0] = self.diag[0];
        if !(d[0] > 0.0) || !d[0].is_finite() {
            return Err(Error::NotPositiveDefinite { row: 0, pivot: d[0] });
        }
        for i in 1..n {
            l[i - 1] = self.off[i - 1] / d[i - 1];
            d[i] = self.diag[i] - l[i - 1] * self.off[i - 1];
            if !(d[i] > 0.0) || !d[i].is_finite() {
                return Err(Error::NotPositiveDefinite { row: i, pivot: d[i] });
            }
        }
        Ok(TridiagFactor { d, l })
    }

    /// Number of eigenvalues of the pencil (self, b) strictly below `sigma`,
    /// by Sylvester inertia of `self - sigma b`. Requires `b` SPD.
    pub fn pencil_count_below(&self, b: &SymTridiag, sigma: f64) -> usize {
        let n = self.dim();
        let mut count = 0;
        let mut pivot = self.diag[0] - sigma * b.diag[0];
        if pivot < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let e = self.off[i - 1] - sigma * b.off[i - 1];
            let p = if pivot == 0.0 { f64::MIN_POSITIVE } else { pivot };
            pivot = self.diag[i] - sigma * b.diag[i] - e * e / p;
            if pivot < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Bracket `[lo, hi]` of the k-th smallest (0-based) eigenvalue of the
    /// pencil (self, b), refined by bisection from an initial bracket.
    pub fn pencil_eigen_bracket(
        &self,
        b: &SymTridiag,
        k: usize,
        mut lo: f64,
        mut hi: f64,
    ) -> (f64, f64) {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.pencil_count_below(b, mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE) {
                break;
            }
        }
        (lo, hi)
    }
}

/// LDLᵀ factors of an SPD tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct TridiagFactor {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl TridiagFactor {
    /// Solves `A x = rhs` in place.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.d.len();
        for i in 1..n {
            rhs[i] -= self.l[i - 1] * rhs[i - 1];
        }
        for i in 0..n {
            rhs[i] /= self.d[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.l[i] * rhs[i + 1];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn min_pivot(&self) -> f64 {
        self.d.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}
