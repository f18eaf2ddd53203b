//! Dense linear programming for `max c^T x` subject to `A x <= b`, `x >= 0`,
//! with `b >= 0`.
//!
//! The solver works on the dual `min b^T y`, `A^T y >= c`, `y >= 0`, whose basis
//! has only `n = dim x` rows, so problems with few variables and many
//! constraints stay cheap. Rows can be appended after a solve; the next solve
//! warm-starts from the previous basis (new rows are new dual columns).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-10;
const PIV_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 64;

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Lp {
    n: usize,
    c: Vec<f64>,
    /// Constraint rows, row-major `m x n`.
    a: Vec<f64>,
    b: Vec<f64>,
    /// Basic column of each basis row; `k < n` is surplus `k`, otherwise row `k - n`.
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    pi: Vec<f64>,
    d: Vec<f64>,
    since_refactor: usize,
    pub max_iterations: usize,
}

impl Lp {
    pub fn new(c: Vec<f64>) -> Self {
        let n = c.len();
        let mut binv = vec![0.0; n * n];
        for i in 0..n {
            binv[i * n + i] = 1.0;
        }
        Lp {
            n,
            xb: c.iter().map(|v| -v).collect(),
            c,
            a: Vec::new(),
            b: Vec::new(),
            basis: (0..n).collect(),
            is_basic: vec![true; n],
            binv,
            pi: vec![0.0; n],
            d: vec![0.0; n],
            since_refactor: 0,
            max_iterations: 200_000,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.a[j * self.n..(j + 1) * self.n]
    }

    pub fn rhs(&self, j: usize) -> f64 {
        self.b[j]
    }

    pub fn add_row(&mut self, row: &[f64], rhs: f64) -> Result<()> {
        if row.len() != self.n {
            return Err(Error::Lp(format!("row has {} entries, expected {}", row.len(), self.n)));
        }
        if !(rhs >= 0.0) || row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Lp("rows need finite entries and a nonnegative right-hand side".into()));
        }
        self.a.extend_from_slice(row);
        self.b.push(rhs);
        self.is_basic.push(false);
        // reduced cost of the new dual column: b + pi . row
        let dn = rhs + dot(&self.pi, row);
        self.d.push(dn);
        Ok(())
    }

    fn cost(&self, k: usize) -> f64 {
        if k < self.n {
            0.0
        } else {
            self.b[k - self.n]
        }
    }

    /// `v . column_k` where surplus columns are unit vectors and row columns are `-A_j`.
    #[inline]
    fn dot_col(&self, v: &[f64], k: usize) -> f64 {
        if k < self.n {
            v[k]
        } else {
            -dot(v, self.row(k - self.n))
        }
    }

    fn column(&self, k: usize) -> Vec<f64> {
        if k < self.n {
            let mut e = vec![0.0; self.n];
            e[k] = 1.0;
            e
        } else {
            self.row(k - self.n).iter().map(|v| -v).collect()
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let n = self.n;
        let mut bm = DMatrix::<f64>::zeros(n, n);
        for (r, &k) in self.basis.iter().enumerate() {
            let col = self.column(k);
            for i in 0..n {
                bm[(i, r)] = col[i];
            }
        }
        let inv = bm
            .try_inverse()
            .ok_or_else(|| Error::Lp("basis matrix became singular".into()))?;
        for r in 0..n {
            for i in 0..n {
                self.binv[r * n + i] = inv[(r, i)];
            }
        }
        let rhs: Vec<f64> = self.c.iter().map(|v| -v).collect();
        for r in 0..n {
            self.xb[r] = dot(&self.binv[r * n..(r + 1) * n], &rhs);
        }
        let mut pi = vec![0.0; n];
        for r in 0..n {
            let cb = self.cost(self.basis[r]);
            if cb != 0.0 {
                for i in 0..n {
                    pi[i] += cb * self.binv[r * n + i];
                }
            }
        }
        self.pi = pi;
        let total = n + self.b.len();
        let mut d = vec![0.0; total];
        for k in 0..total {
            if !self.is_basic[k] {
                d[k] = self.cost(k) - self.dot_col(&self.pi, k);
            }
        }
        self.d = d;
        self.since_refactor = 0;
        Ok(())
    }

    /// Row `r` of `B^{-1} N` for every column (basic columns get their exact values).
    fn pivot_row(&self, r: usize) -> Vec<f64> {
        let n = self.n;
        let rho = &self.binv[r * n..(r + 1) * n];
        (0..n + self.b.len()).map(|k| self.dot_col(rho, k)).collect()
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) -> Result<()> {
        let n = self.n;
        let col = self.column(q);
        let u: Vec<f64> = (0..n).map(|i| dot(&self.binv[i * n..(i + 1) * n], &col)).collect();
        let ur = u[r];
        if ur.abs() < PIV_TOL {
            return Err(Error::Lp("pivot element vanished".into()));
        }
        let theta_d = self.d[q] / alpha[q];
        let rho: Vec<f64> = self.binv[r * n..(r + 1) * n].to_vec();
        // multipliers and reduced costs
        for i in 0..n {
            self.pi[i] += theta_d * rho[i];
        }
        for (k, dk) in self.d.iter_mut().enumerate() {
            *dk -= theta_d * alpha[k];
        }
        // basis inverse and basic values
        let theta_p = self.xb[r] / ur;
        let new_r: Vec<f64> = rho.iter().map(|v| v / ur).collect();
        for i in 0..n {
            if i == r {
                continue;
            }
            let f = u[i];
            if f != 0.0 {
                for t in 0..n {
                    self.binv[i * n + t] -= f * new_r[t];
                }
                self.xb[i] -= theta_p * f;
            }
        }
        self.binv[r * n..(r + 1) * n].copy_from_slice(&new_r);
        self.xb[r] = theta_p;
        let leaving = self.basis[r];
        self.is_basic[leaving] = false;
        self.is_basic[q] = true;
        self.basis[r] = q;
        for &k in &self.basis {
            self.d[k] = 0.0;
        }
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        1.0 + self.c.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn solve(&mut self) -> Result<LpSolution> {
        self.refactor()?;
        let mut iterations = 0usize;
        let mut stall = 0usize;
        let mut last_obj = f64::INFINITY;
        let tol_p = FEAS_TOL * self.scale();
        loop {
            if iterations >= self.max_iterations {
                return Err(Error::NotConverged(format!("simplex exceeded {} iterations", self.max_iterations)));
            }
            let bland = stall > 50;
            // dual simplex step if the dual basis is infeasible
            let leave = if bland {
                self.xb.iter().enumerate().filter(|(_, v)| **v < -tol_p).map(|(r, _)| r).min_by_key(|r| self.basis[*r])
            } else {
                self.xb
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v < -tol_p)
                    .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(r, _)| r)
            };
            if let Some(r) = leave {
                let alpha = self.pivot_row(r);
                let mut best: Option<(usize, f64, f64)> = None;
                for k in 0..alpha.len() {
                    if self.is_basic[k] || alpha[k] >= -PIV_TOL {
                        continue;
                    }
                    let ratio = self.d[k].max(0.0) / -alpha[k];
                    let better = match best {
                        None => true,
                        Some((_, br, ba)) => {
                            ratio < br - 1e-14 || (ratio <= br + 1e-14 && !bland && -alpha[k] > ba)
                        }
                    };
                    if better {
                        best = Some((k, ratio, -alpha[k]));
                    }
                }
                let (q, _, _) = best.ok_or_else(|| Error::Lp("objective is unbounded".into()))?;
                self.pivot(r, q, &alpha)?;
            } else {
                // primal simplex step on the dual
                let tol_d = OPT_TOL * self.scale();
                let enter = if bland {
                    (0..self.d.len()).find(|&k| !self.is_basic[k] && self.d[k] < -tol_d)
                } else {
                    (0..self.d.len())
                        .filter(|&k| !self.is_basic[k] && self.d[k] < -tol_d)
                        .min_by(|&a, &b| self.d[a].partial_cmp(&self.d[b]).unwrap())
                };
                let Some(q) = enter else { break };
                let n = self.n;
                let col = self.column(q);
                let u: Vec<f64> = (0..n).map(|i| dot(&self.binv[i * n..(i + 1) * n], &col)).collect();
                let mut best: Option<(usize, f64)> = None;
                for i in 0..n {
                    if u[i] > PIV_TOL {
                        let ratio = self.xb[i].max(0.0) / u[i];
                        let better = match best {
                            None => true,
                            Some((bi, br)) => {
                                ratio < br - 1e-14
                                    || (ratio <= br + 1e-14
                                        && if bland { self.basis[i] < self.basis[bi] } else { u[i] > u[bi] })
                            }
                        };
                        if better {
                            best = Some((i, ratio));
                        }
                    }
                }
                let (r, _) = best.ok_or_else(|| Error::Lp("constraints are infeasible".into()))?;
                let alpha = self.pivot_row(r);
                self.pivot(r, q, &alpha)?;
            }
            iterations += 1;
            let obj = self.objective_value();
            if (obj - last_obj).abs() <= 1e-14 * obj.abs().max(1.0) {
                stall += 1;
            } else {
                stall = 0;
            }
            last_obj = obj;
        }
        self.refactor()?;
        let x: Vec<f64> = self.pi.iter().map(|p| (-p).max(0.0)).collect();
        Ok(LpSolution {
            objective: dot(&self.c, &x),
            x,
            iterations,
        })
    }

    fn objective_value(&self) -> f64 {
        -dot(&self.pi, &self.c)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y; x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = Lp::new(vec![3.0, 5.0]);
        lp.add_row(&[1.0, 0.0], 4.0).unwrap();
        lp.add_row(&[0.0, 2.0], 12.0).unwrap();
        lp.add_row(&[3.0, 2.0], 18.0).unwrap();
        let s = lp.solve().unwrap();
        assert!((s.objective - 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn unbounded_is_reported() {
        let mut lp = Lp::new(vec![1.0, 1.0]);
        lp.add_row(&[1.0, -1.0], 1.0).unwrap();
        assert!(matches!(lp.solve(), Err(Error::Lp(_))));
    }

    #[test]
    fn warm_start_after_adding_rows() {
        let mut lp = Lp::new(vec![1.0, 1.0]);
        lp.add_row(&[1.0, 0.0], 2.0).unwrap();
        lp.add_row(&[0.0, 1.0], 2.0).unwrap();
        assert!((lp.solve().unwrap().objective - 4.0).abs() < 1e-12);
        lp.add_row(&[1.0, 1.0], 3.0).unwrap();
        assert!((lp.solve().unwrap().objective - 3.0).abs() < 1e-12);
        lp.add_row(&[1.0, 2.0], 3.0).unwrap();
        let s = lp.solve().unwrap();
        assert!((s.objective - 2.5).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 0.5).abs() < 1e-9);
    }

    /// Vertex enumeration oracle for three variables.
    fn brute_force(c: &[f64; 3], rows: &[([f64; 3], f64)]) -> f64 {
        let mut all: Vec<([f64; 3], f64)> = rows.to_vec();
        all.push(([-1.0, 0.0, 0.0], 0.0));
        all.push(([0.0, -1.0, 0.0], 0.0));
        all.push(([0.0, 0.0, -1.0], 0.0));
        let mut best = f64::NEG_INFINITY;
        let m = all.len();
        for i in 0..m {
            for j in i + 1..m {
                for k in j + 1..m {
                    let a = nalgebra::Matrix3::from_rows(&[
                        nalgebra::RowVector3::from(all[i].0),
                        nalgebra::RowVector3::from(all[j].0),
                        nalgebra::RowVector3::from(all[k].0),
                    ]);
                    let rhs = nalgebra::Vector3::new(all[i].1, all[j].1, all[k].1);
                    if let Some(inv) = a.try_inverse() {
                        let x = inv * rhs;
                        let feasible = all
                            .iter()
                            .all(|(r, b)| r[0] * x[0] + r[1] * x[1] + r[2] * x[2] <= b + 1e-9);
                        if feasible {
                            best = best.max(c[0] * x[0] + c[1] * x[1] + c[2] * x[2]);
                        }
                    }
                }
            }
        }
        best
    }

    proptest! {
        #[test]
        fn matches_vertex_enumeration(
            c in prop::array::uniform3(0.1f64..2.0),
            rows in prop::collection::vec((prop::array::uniform3(-1.0f64..3.0), 0.0f64..2.0), 3..9),
        ) {
            // make the problem bounded with a box
            let mut all = rows.clone();
            all.push(([1.0, 1.0, 1.0], 5.0));
            let mut lp = Lp::new(c.to_vec());
            for (r, b) in &all {
                lp.add_row(r, *b).unwrap();
            }
            let s = lp.solve().unwrap();
            let oracle = brute_force(&c, &all);
            prop_assert!((s.objective - oracle).abs() < 1e-7 * (1.0 + oracle.abs()), "{} vs {}", s.objective, oracle);
            for (r, b) in &all {
                prop_assert!(r[0] * s.x[0] + r[1] * s.x[1] + r[2] * s.x[2] <= b + 1e-8);
            }
        }
    }
}
