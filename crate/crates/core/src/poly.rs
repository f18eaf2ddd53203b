//! Polynomials in a discretely orthogonal basis built by Arnoldi iteration on
//! sample points, and complex least squares.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Basis `q_0, ..., q_d` orthonormal (up to the factor `N`) on the points it was
/// built from. `q_k` is a polynomial of exact degree `k` in `t = (z - center) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArnoldiBasis {
    pub center: C64,
    pub scale: f64,
    /// Column `k` holds the `k + 2` recurrence coefficients producing `q_{k+1}`.
    pub hess: Vec<Vec<C64>>,
}

impl ArnoldiBasis {
    pub fn degree(&self) -> usize {
        self.hess.len()
    }

    /// Builds the basis on `points` and returns it with the `N x (d+1)` matrix of
    /// basis values there.
    pub fn new(points: &[C64], degree: usize) -> Result<(Self, DMatrix<C64>)> {
        let n = points.len();
        if n <= degree {
            return Err(Error::Invariant(format!("{n} points cannot support degree {degree}")));
        }
        let (mut lo, mut hi) = (points[0], points[0]);
        for p in points {
            lo = C64::new(lo.re.min(p.re), lo.im.min(p.im));
            hi = C64::new(hi.re.max(p.re), hi.im.max(p.im));
        }
        let center = 0.5 * (lo + hi);
        let scale = points.iter().map(|p| (p - center).norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let t: Vec<C64> = points.iter().map(|p| (p - center) / scale).collect();
        let nf = n as f64;
        let mut q = DMatrix::<C64>::zeros(n, degree + 1);
        q.column_mut(0).fill(C64::new(1.0, 0.0));
        let mut hess = Vec::with_capacity(degree);
        for k in 1..=degree {
            let mut v: Vec<C64> = (0..n).map(|i| t[i] * q[(i, k - 1)]).collect();
            let mut hk = vec![C64::new(0.0, 0.0); k + 1];
            for _ in 0..2 {
                for j in 0..k {
                    let mut dot = C64::new(0.0, 0.0);
                    for i in 0..n {
                        dot += q[(i, j)].conj() * v[i];
                    }
                    dot /= nf;
                    hk[j] += dot;
                    for i in 0..n {
                        v[i] -= dot * q[(i, j)];
                    }
                }
            }
            let norm = (v.iter().map(|x| x.norm_sqr()).sum::<f64>() / nf).sqrt();
            if !(norm > 1e-14) {
                return Err(Error::Invariant(format!("sample points do not support degree {k}")));
            }
            hk[k] = C64::new(norm, 0.0);
            for i in 0..n {
                q[(i, k)] = v[i] / norm;
            }
            hess.push(hk);
        }
        Ok((ArnoldiBasis { center, scale, hess }, q))
    }

    /// Basis values at arbitrary points, `len x (d+1)`.
    pub fn eval(&self, points: &[C64]) -> DMatrix<C64> {
        let d = self.degree();
        let mut w = DMatrix::<C64>::zeros(points.len(), d + 1);
        for (i, p) in points.iter().enumerate() {
            let t = (p - self.center) / self.scale;
            w[(i, 0)] = C64::new(1.0, 0.0);
            for k in 1..=d {
                let hk = &self.hess[k - 1];
                let mut v = t * w[(i, k - 1)];
                for j in 0..k {
                    v -= hk[j] * w[(i, j)];
                }
                w[(i, k)] = v / hk[k];
            }
        }
        w
    }

    /// Basis values at one point.
    pub fn eval_one(&self, p: C64) -> Vec<C64> {
        let d = self.degree();
        let t = (p - self.center) / self.scale;
        let mut w = vec![C64::new(0.0, 0.0); d + 1];
        w[0] = C64::new(1.0, 0.0);
        for k in 1..=d {
            let hk = &self.hess[k - 1];
            let mut v = t * w[k - 1];
            for j in 0..k {
                v -= hk[j] * w[j];
            }
            w[k] = v / hk[k];
        }
        w
    }
}

/// A polynomial stored as coefficients in an Arnoldi basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisPolynomial {
    pub basis: ArnoldiBasis,
    pub coeffs: Vec<C64>,
}

impl BasisPolynomial {
    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.basis.eval_one(z).iter().zip(&self.coeffs).map(|(a, b)| a * b).sum()
    }

    pub fn eval_many(&self, zs: &[C64]) -> Vec<C64> {
        let m = self.basis.eval(zs);
        (0..zs.len())
            .map(|i| (0..self.coeffs.len()).map(|k| m[(i, k)] * self.coeffs[k]).sum())
            .collect()
    }
}

/// Least-squares polynomial fit of `values` at `points`.
pub fn fit_polynomial(points: &[C64], values: &[C64], degree: usize) -> Result<BasisPolynomial> {
    let (basis, q) = ArnoldiBasis::new(points, degree)?;
    let n = points.len() as f64;
    let coeffs = (0..=degree)
        .map(|k| (0..points.len()).map(|i| q[(i, k)].conj() * values[i]).sum::<C64>() / n)
        .collect();
    Ok(BasisPolynomial { basis, coeffs })
}

/// Solution of `min || diag(w) (A x - b) ||` by Householder QR. Columns whose
/// diagonal entry in `R` falls below `rank_tol` times the largest are dropped
/// (their coefficient is zero); their indices are returned.
pub fn weighted_lstsq(a: &DMatrix<C64>, b: &[C64], w: &[f64], rank_tol: f64) -> Result<(Vec<C64>, Vec<usize>)> {
    let (n, m) = a.shape();
    let mut keep: Vec<usize> = (0..m).collect();
    let mut dropped = Vec::new();
    loop {
        let mut aw = DMatrix::<C64>::zeros(n, keep.len());
        for (jj, &j) in keep.iter().enumerate() {
            for i in 0..n {
                aw[(i, jj)] = a[(i, j)] * w[i];
            }
        }
        let bw = nalgebra::DVector::<C64>::from_iterator(n, (0..n).map(|i| b[i] * w[i]));
        let qr = aw.qr();
        let r = qr.r();
        let diag_max = (0..keep.len()).map(|i| r[(i, i)].norm()).fold(0.0, f64::max);
        if let Some(bad) = (0..keep.len()).find(|&i| r[(i, i)].norm() <= rank_tol * diag_max) {
            dropped.push(keep.remove(bad));
            if keep.is_empty() {
                return Err(Error::Invariant("least-squares dictionary is empty".into()));
            }
            continue;
        }
        let qtb = qr.q().adjoint() * bw;
        let sol = r
            .solve_upper_triangular(&qtb)
            .ok_or_else(|| Error::Invariant("singular least-squares system".into()))?;
        let mut x = vec![C64::new(0.0, 0.0); m];
        for (jj, &j) in keep.iter().enumerate() {
            x[j] = sol[jj];
        }
        dropped.sort_unstable();
        return Ok((x, dropped));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn circle(n: usize, r: f64) -> Vec<C64> {
        (0..n).map(|k| C64::from_polar(r, TAU * k as f64 / n as f64)).collect()
    }

    #[test]
    fn basis_is_orthonormal_and_reproducible() {
        let pts: Vec<C64> = (0..300).map(|k| C64::new(k as f64 / 299.0 * 2.0 - 1.0, 0.05 * (k % 5) as f64)).collect();
        let (b, q) = ArnoldiBasis::new(&pts, 40).unwrap();
        let g = (q.adjoint() * &q).map(|x| x / pts.len() as f64);
        for i in 0..41 {
            for j in 0..41 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).norm() < 1e-10);
            }
        }
        let w = b.eval(&pts);
        assert!((w - q).norm() < 1e-9);
    }

    #[test]
    fn fits_a_pole_outside_the_disk() {
        let pts = circle(400, 1.0);
        let a = C64::new(1.5, 0.5);
        let vals: Vec<C64> = pts.iter().map(|z| 1.0 / (z - a)).collect();
        let p = fit_polynomial(&pts, &vals, 60).unwrap();
        let err = circle(997, 1.0).iter().map(|z| (p.eval(*z) - 1.0 / (z - a)).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn lstsq_drops_collinear_columns() {
        let a = DMatrix::<C64>::from_fn(10, 3, |i, j| match j {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(i as f64, 0.0),
            _ => C64::new(2.0 * i as f64, 0.0),
        });
        let b: Vec<C64> = (0..10).map(|i| C64::new(1.0 + 3.0 * i as f64, 0.0)).collect();
        let (x, dropped) = weighted_lstsq(&a, &b, &[1.0; 10], 1e-12).unwrap();
        assert_eq!(dropped, vec![2]);
        assert!((x[0] - 1.0).norm() < 1e-12 && (x[1] - 3.0).norm() < 1e-12);
    }
}
