//! Error-versus-degree curves for a suite of test functions.

use serde::{Deserialize, Serialize};

use super::fit::{fit_module, FitData, LawsonOptions, ModuleFit, ModuleGrid};
use super::suite::{FunctionClass, TestFunction, TestKind};
use crate::error::{Error, Result};
use crate::etabuild::EtaArtifact;
use crate::geometry::{CompactSetModel, Rect};
use crate::transform::FastTransform;
use crate::C64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApproxOptions {
    /// Training nodes along the longer side of the frame.
    pub grid_per_side: usize,
    pub degrees: Vec<usize>,
    pub lawson: LawsonOptions,
    /// Error the rational member must reach by `rational_degree`.
    pub rational_target: f64,
    pub rational_degree: usize,
    /// Final error of the other members relative to their sup on the grid.
    pub relative_target: f64,
    /// The control must stay above this times diam(K).
    pub control_floor: f64,
    /// Interior analyticity tolerance relative to `max(1, sup |f|)`.
    pub dbar_tol: f64,
    pub monotone_slack: f64,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        ApproxOptions {
            grid_per_side: 64,
            degrees: vec![0, 5, 10, 20, 30, 40],
            lawson: LawsonOptions::default(),
            rational_target: 1e-3,
            rational_degree: 40,
            relative_target: 0.5,
            control_floor: 0.1,
            dbar_tol: 1e-6,
            monotone_slack: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    pub function: String,
    pub degree: usize,
    pub sup_error: f64,
    pub train_error: f64,
    pub iterations: usize,
    pub rank_deficient: bool,
    /// Weight concentration after the last Lawson round.
    pub concentration: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionSummary {
    pub name: String,
    pub kind: TestKind,
    pub class: FunctionClass,
    pub sup_f: f64,
    pub monotone: bool,
    pub final_error: f64,
    /// Smallest error over the ladder (up to `rational_degree` for the rational member).
    pub best_error: f64,
    pub target: f64,
    pub dbar: Option<f64>,
    pub pass: bool,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityReport {
    pub diam: f64,
    pub train_points: usize,
    pub valid_points: usize,
    pub curves: Vec<CurvePoint>,
    pub summaries: Vec<FunctionSummary>,
    /// Highest-degree fit per function.
    pub fits: Vec<(String, ModuleFit)>,
    pub pass: bool,
}

fn ladder(
    f: &TestFunction,
    grid: &ModuleGrid,
    phi: (&[C64], &[C64]),
    opts: &ApproxOptions,
) -> Result<(Vec<CurvePoint>, ModuleFit, f64)> {
    let f_train = f.eval_many(&grid.train);
    let f_valid = f.eval_many(&grid.valid);
    if f_valid.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invariant(format!("{} is not finite on K", f.name)));
    }
    let sup_f = f_valid.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let data = FitData {
        grid,
        f_train: &f_train,
        f_valid: &f_valid,
        phi_train: phi.0,
        phi_valid: phi.1,
    };
    let mut prev: Option<ModuleFit> = None;
    let mut curve = Vec::new();
    for &d in &opts.degrees {
        let fit = fit_module(&data, d, &opts.lawson, prev.as_ref())?;
        curve.push(CurvePoint {
            function: f.name.clone(),
            degree: d,
            sup_error: fit.sup_error,
            train_error: fit.train_error,
            iterations: fit.log.len(),
            rank_deficient: fit.rank_deficient,
            concentration: fit.log.last().map_or(1.0, |s| s.concentration),
        });
        prev = Some(fit);
    }
    let last = prev.ok_or_else(|| Error::Config { path: "approx.degrees".into(), msg: "empty degree ladder".into() })?;
    Ok((curve, last, sup_f))
}

fn summarize(f: &TestFunction, curve: &[CurvePoint], sup_f: f64, diam: f64, opts: &ApproxOptions) -> FunctionSummary {
    let errors: Vec<f64> = curve.iter().map(|c| c.sup_error).collect();
    let monotone = errors.windows(2).all(|w| w[1] <= w[0] + opts.monotone_slack);
    let final_error = *errors.last().unwrap_or(&f64::INFINITY);
    let dbar = f.max_dbar_residual();
    let mut failures = Vec::new();
    let (best_error, target) = match (&f.kind, f.class) {
        (_, FunctionClass::Control) => {
            let best = errors.iter().copied().fold(f64::INFINITY, f64::min);
            let floor = opts.control_floor * diam;
            if !(best >= floor) {
                failures.push(format!("control error fell to {best:.3e} below {floor:.3e}"));
            }
            (best, floor)
        }
        (TestKind::Rational { .. }, _) => {
            let best = curve
                .iter()
                .filter(|c| c.degree <= opts.rational_degree)
                .map(|c| c.sup_error)
                .fold(f64::INFINITY, f64::min);
            if !(best <= opts.rational_target) {
                failures.push(format!(
                    "error {best:.3e} by degree {} above {:.1e}",
                    opts.rational_degree, opts.rational_target
                ));
            }
            (best, opts.rational_target)
        }
        _ => {
            let t = opts.relative_target * sup_f;
            if !(final_error <= t) {
                failures.push(format!("final error {final_error:.3e} above {t:.3e}"));
            }
            (final_error, t)
        }
    };
    if f.class == FunctionClass::InClass {
        if !monotone {
            failures.push("error is not monotone in the degree".into());
        }
        if let Some(r) = dbar {
            let tol = opts.dbar_tol * sup_f.max(1.0);
            if !(r <= tol) {
                failures.push(format!("interior dbar residual {r:.3e} above {tol:.3e}"));
            }
        }
    }
    FunctionSummary {
        name: f.name.clone(),
        kind: f.kind.clone(),
        class: f.class,
        sup_f,
        monotone,
        final_error,
        best_error,
        target,
        dbar,
        pass: failures.is_empty(),
        failures,
    }
}

/// Diagonal of the bounding box of the cells of K.
pub fn k_diameter(model: &CompactSetModel) -> f64 {
    let mut bb: Option<Rect> = None;
    for (ix, iy) in model.k_mask().iter_set() {
        let r = model.cell_rect(ix, iy);
        bb = Some(bb.map_or(r, |b| b.union(&r)));
    }
    bb.map_or(0.0, |b| b.width().hypot(b.height()))
}

/// Fits every suite member over the degree ladder. Members run on separate threads.
pub fn density_experiment(
    model: &CompactSetModel,
    artifact: &EtaArtifact,
    suite: &[TestFunction],
    opts: &ApproxOptions,
) -> Result<DensityReport> {
    if opts.degrees.is_empty() {
        return Err(Error::Config { path: "approx.degrees".into(), msg: "must not be empty".into() });
    }
    let grid = ModuleGrid::over(model, opts.grid_per_side)?;
    let ft = FastTransform::new(&artifact.eta, 1.0 / 32.0);
    let phi_train = ft.eval_many(&grid.train)?;
    let phi_valid = ft.eval_many(&grid.valid)?;
    let diam = k_diameter(model);

    let results: Vec<Result<(Vec<CurvePoint>, ModuleFit, f64)>> = std::thread::scope(|s| {
        let handles: Vec<_> = suite
            .iter()
            .map(|f| {
                let (g, pt, pv) = (&grid, &phi_train, &phi_valid);
                s.spawn(move || ladder(f, g, (pt, pv), opts))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Invariant("fit thread panicked".into()))))
            .collect()
    });

    let mut curves = Vec::new();
    let mut summaries = Vec::new();
    let mut fits = Vec::new();
    for (f, r) in suite.iter().zip(results) {
        let (curve, fit, sup_f) = r?;
        summaries.push(summarize(f, &curve, sup_f, diam, opts));
        curves.extend(curve);
        fits.push((f.name.clone(), fit));
    }
    let pass = summaries.iter().all(|s| s.pass);
    Ok(DensityReport {
        diam,
        train_points: grid.train.len(),
        valid_points: grid.valid.len(),
        curves,
        summaries,
        fits,
        pass,
    })
}
