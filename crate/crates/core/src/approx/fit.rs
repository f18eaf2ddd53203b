//! Lawson iteration for near-minimax fits `p + q F` with polynomials `p, q`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CellLabel, CompactSetModel};
use crate::poly::{weighted_lstsq, ArnoldiBasis};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LawsonOptions {
    pub iterations: usize,
    /// Stop after this many rounds without a lower training error.
    pub stall_rounds: usize,
    /// Relative pivot size below which a dictionary column is dropped.
    pub rank_tol: f64,
}

impl Default for LawsonOptions {
    fn default() -> Self {
        LawsonOptions {
            iterations: 50,
            stall_rounds: 5,
            rank_tol: 1e-12,
        }
    }
}

/// Sample points of K: a training lattice and its 2x refinement for validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModuleGrid {
    pub spacing: f64,
    pub train: Vec<C64>,
    pub valid: Vec<C64>,
}

impl ModuleGrid {
    /// Lattice nodes over the frame of `model` lying in cells of K, `per_side`
    /// training nodes along the longer side. Every training node is also a
    /// validation node.
    pub fn over(model: &CompactSetModel, per_side: usize) -> Result<Self> {
        let fr = model.frame_rect();
        let spacing = fr.width().max(fr.height()) / per_side.max(1) as f64;
        let half = 0.5 * spacing;
        let nx = (fr.width() / half).floor() as usize;
        let ny = (fr.height() / half).floor() as usize;
        let mut train = Vec::new();
        let mut valid = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                let z = C64::new(fr.x0 + i as f64 * half, fr.y0 + j as f64 * half);
                let in_k = model
                    .cell_of(z)
                    .is_some_and(|(ix, iy)| !matches!(model.label(ix, iy), CellLabel::Complement(_)));
                if in_k {
                    if i % 2 == 0 && j % 2 == 0 {
                        train.push(z);
                    }
                    valid.push(z);
                }
            }
        }
        if train.len() < 2 {
            return Err(Error::ResolutionTooCoarse(format!(
                "{} training nodes in K at spacing {spacing:.3e}",
                train.len()
            )));
        }
        Ok(ModuleGrid { spacing, train, valid })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LawsonStep {
    pub iteration: usize,
    pub train_error: f64,
    pub valid_error: f64,
    /// Max weight over mean weight after the update.
    pub concentration: f64,
}

/// `p + q F` with `p, q` stored in an Arnoldi basis whose center and scale map K
/// into a unit-size frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModuleFit {
    pub degree: usize,
    pub basis: ArnoldiBasis,
    pub p: Vec<C64>,
    pub q: Vec<C64>,
    /// Sup error on the validation nodes.
    pub sup_error: f64,
    pub train_error: f64,
    /// Dictionary columns dropped as collinear (`0..=d` for `p`, `d+1..` for `q`).
    pub dropped: Vec<usize>,
    pub rank_deficient: bool,
    pub log: Vec<LawsonStep>,
}

impl ModuleFit {
    /// Value at `z` given `f_value = F(z)`.
    pub fn eval(&self, z: C64, f_value: C64) -> C64 {
        self.basis
            .eval_one(z)
            .iter()
            .zip(self.p.iter().zip(&self.q))
            .map(|(b, (p, q))| b * (p + q * f_value))
            .sum()
    }
}

fn dictionary(q: &DMatrix<C64>, f: &[C64]) -> DMatrix<C64> {
    let (n, k) = q.shape();
    let mut a = DMatrix::<C64>::zeros(n, 2 * k);
    for j in 0..k {
        for i in 0..n {
            a[(i, j)] = q[(i, j)];
            a[(i, k + j)] = q[(i, j)] * f[i];
        }
    }
    a
}

fn sup_residual(a: &DMatrix<C64>, x: &[C64], target: &[C64]) -> (f64, Vec<f64>) {
    let (n, m) = a.shape();
    let mut worst = 0.0f64;
    let mut r = Vec::with_capacity(n);
    for i in 0..n {
        let mut v = -target[i];
        for j in 0..m {
            v += a[(i, j)] * x[j];
        }
        let e = v.norm();
        worst = worst.max(e);
        r.push(e);
    }
    (worst, r)
}

/// Sampled data for one fit: target values and `F` on both grids.
pub struct FitData<'a> {
    pub grid: &'a ModuleGrid,
    pub f_train: &'a [C64],
    pub f_valid: &'a [C64],
    pub phi_train: &'a [C64],
    pub phi_valid: &'a [C64],
}

/// Lawson-weighted least squares over the dictionary `{q_k, q_k F}`, `k <= degree`.
/// Returns the iterate with the smallest validation error. A lower-degree fit on
/// the same grid is a member of the degree-`degree` module and competes as the
/// starting iterate.
pub fn fit_module(data: &FitData<'_>, degree: usize, opts: &LawsonOptions, warm: Option<&ModuleFit>) -> Result<ModuleFit> {
    let grid = data.grid;
    let n = grid.train.len();
    if data.f_train.len() != n || data.phi_train.len() != n {
        return Err(Error::Invariant("training data does not match the grid".into()));
    }
    if data.f_valid.len() != grid.valid.len() || data.phi_valid.len() != grid.valid.len() {
        return Err(Error::Invariant("validation data does not match the grid".into()));
    }
    if data.phi_train.iter().chain(data.f_train).any(|v| !v.is_finite()) {
        return Err(Error::Invariant("non-finite sample in the fitting data".into()));
    }
    let (basis, q) = ArnoldiBasis::new(&grid.train, degree)?;
    let a = dictionary(&q, data.phi_train);
    let av = dictionary(&basis.eval(&grid.valid), data.phi_valid);
    let k = degree + 1;

    let mut best: Option<(f64, f64, Vec<C64>, Vec<usize>)> = None;
    if let Some(w) = warm.filter(|w| w.degree <= degree) {
        let mut x = vec![C64::new(0.0, 0.0); 2 * k];
        for (j, c) in w.p.iter().enumerate() {
            x[j] = *c;
        }
        for (j, c) in w.q.iter().enumerate() {
            x[k + j] = *c;
        }
        let (tv, _) = sup_residual(&a, &x, data.f_train);
        let (vv, _) = sup_residual(&av, &x, data.f_valid);
        best = Some((vv, tv, x, w.dropped.clone()));
    }

    let mut weights = vec![1.0 / n as f64; n];
    let mut log = Vec::new();
    let mut best_train = f64::INFINITY;
    let mut stall = 0;
    let scale = data.f_train.iter().fold(0.0f64, |m, v| m.max(v.norm())).max(f64::MIN_POSITIVE);
    for it in 0..opts.iterations.max(1) {
        let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let (x, dropped) = weighted_lstsq(&a, data.f_train, &sw, opts.rank_tol)?;
        let (tv, r) = sup_residual(&a, &x, data.f_train);
        let (vv, _) = sup_residual(&av, &x, data.f_valid);
        if best.as_ref().is_none_or(|b| vv < b.0) {
            best = Some((vv, tv, x, dropped));
        }
        if tv < best_train * (1.0 - 1e-12) {
            best_train = tv;
            stall = 0;
        } else {
            stall += 1;
        }
        let mut total = 0.0;
        for (w, e) in weights.iter_mut().zip(&r) {
            *w *= e;
            total += *w;
        }
        let exact = !(total > 0.0) || tv <= 1e-15 * scale;
        if !exact {
            for w in weights.iter_mut() {
                *w /= total;
            }
        }
        let mean = 1.0 / n as f64;
        let concentration = weights.iter().fold(0.0f64, |m, w| m.max(*w)) / mean;
        log.push(LawsonStep {
            iteration: it,
            train_error: tv,
            valid_error: vv,
            concentration,
        });
        if exact || stall >= opts.stall_rounds {
            break;
        }
    }
    let (sup_error, train_error, x, dropped) = best.expect("at least one Lawson round");
    Ok(ModuleFit {
        degree,
        basis,
        p: x[..k].to_vec(),
        q: x[k..].to_vec(),
        sup_error,
        train_error,
        rank_deficient: !dropped.is_empty(),
        dropped,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SetSpec;

    fn disk_grid() -> ModuleGrid {
        let s = SetSpec::Disk { center: [0.0, 0.0], radius: 1.0 };
        let model = CompactSetModel::build(&s, 1.0 / 32.0).unwrap();
        ModuleGrid::over(&model, 24).unwrap()
    }

    fn data_for<'a>(
        grid: &'a ModuleGrid,
        buf: &'a mut Vec<Vec<C64>>,
        f: impl Fn(C64) -> C64,
        phi: impl Fn(C64) -> C64,
    ) -> FitData<'a> {
        *buf = vec![
            grid.train.iter().map(|z| f(*z)).collect(),
            grid.valid.iter().map(|z| f(*z)).collect(),
            grid.train.iter().map(|z| phi(*z)).collect(),
            grid.valid.iter().map(|z| phi(*z)).collect(),
        ];
        FitData {
            grid,
            f_train: &buf[0],
            f_valid: &buf[1],
            phi_train: &buf[2],
            phi_valid: &buf[3],
        }
    }

    #[test]
    fn validation_contains_training() {
        let g = disk_grid();
        assert!(g.valid.len() > 3 * g.train.len());
        for z in &g.train {
            assert!(g.valid.contains(z));
        }
    }

    #[test]
    fn module_members_are_recovered() {
        let g = disk_grid();
        let phi = |z: C64| 1.0 / (z - C64::new(1.5, 0.2));
        let f = |z: C64| (z * z - 0.3) + (C64::new(0.5, 1.0) * z * z * z + 2.0) * phi(z);
        let mut buf = Vec::new();
        let d = data_for(&g, &mut buf, f, phi);
        let fit = fit_module(&d, 3, &LawsonOptions::default(), None).unwrap();
        assert!(fit.sup_error <= 1e-8, "error {}", fit.sup_error);
        let z = C64::new(0.3, -0.4);
        assert!((fit.eval(z, phi(z)) - f(z)).norm() <= 1e-8);
    }

    #[test]
    fn constant_is_exact_at_degree_zero() {
        let g = disk_grid();
        let mut buf = Vec::new();
        let d = data_for(&g, &mut buf, |_| C64::new(1.0, 0.0), |z| z.conj());
        let fit = fit_module(&d, 0, &LawsonOptions::default(), None).unwrap();
        assert!(fit.sup_error <= 1e-14);
    }

    #[test]
    fn conjugate_stays_at_distance_one_on_the_disk() {
        let g = disk_grid();
        let mut buf = Vec::new();
        // F analytic on the disk, so the module is analytic there
        let d = data_for(&g, &mut buf, |z| z.conj(), |z| 1.0 / (z - C64::new(3.0, 0.0)));
        let mut prev: Option<ModuleFit> = None;
        for deg in [0, 4, 8] {
            let fit = fit_module(&d, deg, &LawsonOptions::default(), prev.as_ref()).unwrap();
            if let Some(p) = &prev {
                assert!(fit.sup_error <= p.sup_error + 1e-9);
            }
            assert!(fit.sup_error >= 0.9, "degree {deg}: {}", fit.sup_error);
            prev = Some(fit);
        }
    }

    #[test]
    fn affine_change_of_frame_keeps_the_error() {
        let g = disk_grid();
        let phi = |z: C64| z.conj() * z.conj();
        let f = |z: C64| (2.0 * z).exp() / (z - C64::new(0.0, 1.4));
        let mut buf = Vec::new();
        let d = data_for(&g, &mut buf, f, phi);
        let base = fit_module(&d, 6, &LawsonOptions::default(), None).unwrap();

        let (a, b) = (C64::new(0.0, 3.0), C64::new(-5.0, 2.0));
        let moved = ModuleGrid {
            spacing: g.spacing * 3.0,
            train: g.train.iter().map(|z| a * z + b).collect(),
            valid: g.valid.iter().map(|z| a * z + b).collect(),
        };
        let back = |w: C64| (w - b) / a;
        let mut buf2 = Vec::new();
        let d2 = data_for(&moved, &mut buf2, |w| f(back(w)), |w| phi(back(w)));
        let other = fit_module(&d2, 6, &LawsonOptions::default(), None).unwrap();
        assert!((base.sup_error - other.sup_error).abs() <= 1e-10, "{} vs {}", base.sup_error, other.sup_error);
    }
}
