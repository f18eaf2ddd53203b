//! Final measure, division certificates and the residual ledger.

use serde::{Deserialize, Serialize};

use super::assemble::SetE;
use super::fixtures::{ComponentKind, FixtureSet};
use super::recursion::{
    defect_values, fit_inverse, hull_boundary, multiplied, refine, transform_on, DivisionPoint, EvalGrid,
    LadderDefect, LadderFit, LevelLedger, Recursion,
};
use super::EtaParams;
use crate::error::{Error, Result};
use crate::geometry::{modulus_of_continuity, CompactSetModel, Mask, ModulusReport};
use crate::poly::BasisPolynomial;
use crate::transform::{FastTransform, PlanarMeasure};
use crate::C64;

/// How a certified point was reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "route", rename_all = "kebab-case")]
pub enum Route {
    /// Rung `l` of the polynomial ladder at `u_k`.
    Ladder { k: usize, l: u32 },
    /// Term `j` of a sequence converging to the center of a hole fixture.
    Limit { fixture: usize, j: u32 },
    /// Sample of an interior fixture.
    Sample { fixture: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DivisionCertificate {
    pub point: C64,
    pub route: Route,
    pub degree: usize,
    pub fit_error: f64,
    /// `sup |C(p eta) - (C eta(z) - C eta(point)) / (z - point)|` on the grid.
    pub residual: f64,
    /// `sup |C eta(z) - C eta(point) - (z - point) C(p eta)(z)|` on the grid.
    pub identity_residual: f64,
    pub bound: f64,
    pub certified: bool,
    /// `F = C(p eta)` is the quotient handle.
    pub handle: BasisPolynomial,
}

/// Quotients at points converging to a fixture center.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitSequence {
    pub fixture: usize,
    pub limit: C64,
    pub points: Vec<C64>,
    /// `sup |F_j - F_{j+1}|` for consecutive quotients.
    pub cauchy: Vec<f64>,
    /// `sup |F_last - F_limit|`.
    pub to_limit: f64,
    pub converging: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EtaArtifact {
    pub params: EtaParams,
    pub fixtures: FixtureSet,
    pub e_cells: usize,
    pub e_pieces: usize,
    pub ledger: Vec<LevelLedger>,
    pub level_masses: Vec<f64>,
    pub points: Vec<DivisionPoint>,
    pub fits: Vec<LadderFit>,
    pub defects: Vec<LadderDefect>,
    pub eta: PlanarMeasure,
    /// Factor the recursion output was divided by (1 when untouched).
    pub normalization: f64,
    pub grid: EvalGrid,
    pub fine_max: f64,
    pub mass: f64,
    /// `|mass(eta) - sum a_n mass(eta_n)|` before normalization.
    pub mass_identity_error: f64,
    pub certificates: Vec<DivisionCertificate>,
    pub limits: Vec<LimitSequence>,
    /// `(k, sup |quotient - C(eta / (w - u_k))|)`.
    pub consistency: Vec<(usize, f64)>,
    pub modulus: Option<ModulusReport>,
    pub violations: Vec<String>,
}

impl EtaArtifact {
    /// Fails when a ladder residual or the sup-norm bound is violated.
    pub fn validate(&self) -> Result<()> {
        if self.violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Invariant(self.violations.join("; ")))
        }
    }

    pub fn ladder_certificates(&self) -> impl Iterator<Item = &DivisionCertificate> {
        self.certificates.iter().filter(|c| matches!(c.route, Route::Ladder { .. }))
    }
}

struct Context<'a> {
    eta: &'a PlanarMeasure,
    fine: PlanarMeasure,
    pts: &'a [C64],
    values: Vec<C64>,
    ft: FastTransform,
}

impl Context<'_> {
    fn quotient(&self, lam: C64) -> Result<Vec<C64>> {
        let c = self.ft.eval(lam)?;
        Ok(self
            .values
            .iter()
            .zip(self.pts)
            .map(|(v, z)| if (z - lam).norm() > 1e-12 { (v - c) / (z - lam) } else { C64::new(0.0, 0.0) })
            .collect())
    }

    fn certify(
        &self,
        lam: C64,
        route: Route,
        boundary: &(Vec<C64>, Vec<C64>),
        target: f64,
        bound: f64,
        max_degree: usize,
    ) -> Result<DivisionCertificate> {
        let (poly, fit_error) = fit_inverse(&boundary.0, &boundary.1, lam, target, max_degree)?;
        let d = defect_values(&self.fine, &poly, lam, self.pts)?;
        Ok(self.certificate(lam, route, poly, fit_error, &d, bound))
    }

    fn certificate(
        &self,
        lam: C64,
        route: Route,
        handle: BasisPolynomial,
        fit_error: f64,
        defect: &[C64],
        bound: f64,
    ) -> DivisionCertificate {
        let residual = defect.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let identity_residual = defect
            .iter()
            .zip(self.pts)
            .fold(0.0f64, |m, (v, z)| m.max((v * (z - lam)).norm()));
        DivisionCertificate {
            point: lam,
            route,
            degree: handle.degree(),
            fit_error,
            residual,
            identity_residual,
            bound,
            certified: residual.is_finite() && residual <= bound,
            handle,
        }
    }
}

fn sup_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}

pub fn finalize_eta(
    model: &CompactSetModel,
    e: &SetE,
    fixtures: &FixtureSet,
    rec: Recursion,
    params: &EtaParams,
) -> Result<EtaArtifact> {
    let pts = &rec.grid.points;
    let mut violations = Vec::new();
    let raw_max = rec.grid.max_modulus(&rec.xi)?;
    let normalization = if raw_max > 1.0 { raw_max } else { 1.0 };
    let eta = rec.xi.scaled(C64::new(1.0 / normalization, 0.0));
    let values = transform_on(&eta, pts)?;
    let fine_max = values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if fine_max > 1.0 + 1e-6 {
        violations.push(format!("fine-grid max |C eta| = {fine_max:.9} exceeds 1"));
    }
    let level_masses: Vec<f64> = rec.levels.iter().map(|l| l.measure.mass().re).collect();
    let booked: f64 = rec.ledger.iter().zip(&level_masses).map(|(l, m)| l.a_n * m).sum();
    let mass_identity_error = (rec.xi.mass().re - booked).abs();
    let ctx = Context {
        eta: &eta,
        fine: refine(&eta, 2.0 * model.h),
        pts,
        values,
        ft: FastTransform::new(&eta, 1.0 / 32.0),
    };

    let mut certificates = Vec::new();
    for (fit, vals) in rec.fits.iter().zip(&rec.fit_values) {
        let d: Vec<C64> = vals.iter().map(|v| v / normalization).collect();
        let bound = 2f64.powi(1 - fit.l as i32) + params.residual_tol;
        let c = ctx.certificate(fit.point, Route::Ladder { k: fit.k, l: fit.l }, fit.poly.clone(), fit.fit_error, &d, bound);
        if !c.certified {
            violations.push(format!(
                "division residual {:.3e} at u_{} with l = {} exceeds {:.3e}",
                c.residual, fit.k, fit.l, bound
            ));
        }
        certificates.push(c);
    }

    // quotient against the division identity, on sub-cells of side h / 2
    let half = refine(ctx.eta, 0.5 * model.h);
    let mut consistency = Vec::new();
    for p in &rec.points {
        let q = ctx.quotient(p.z)?;
        let direct = transform_on(&multiplied(&half, |w| 1.0 / (w - p.z))?, pts)?;
        consistency.push((p.k, sup_diff(&q, &direct)));
    }

    // limit sequences and interior samples use the last hull
    let hull: Mask = rec.hull.clone().unwrap_or_else(|| Mask::new(model.nx, model.ny));
    let boundary = hull_boundary(model, &hull);
    let last = rec.ledger.last();
    let target = last.map_or(1e-3, |l| l.d_n / (2.0 * (4.0 * eta.total_variation() + 1.0)));
    let bound = 2f64.powi(1 - params.n_max as i32) + params.residual_tol;
    let mut limits = Vec::new();
    for (fi, f) in fixtures.fixtures.iter().enumerate() {
        match f.kind {
            ComponentKind::Hole => {
                let mut seq = Vec::new();
                let mut quotients = Vec::new();
                for j in 1..=5u32 {
                    let z = f.lambda + C64::new(0.0, f.delta * 0.5f64.powi(j as i32));
                    certificates.push(ctx.certify(z, Route::Limit { fixture: fi, j }, &boundary, target, bound, params.max_degree)?);
                    quotients.push(ctx.quotient(z)?);
                    seq.push(z);
                }
                let cauchy: Vec<f64> = quotients.windows(2).map(|w| sup_diff(&w[0], &w[1])).collect();
                let to_limit = sup_diff(quotients.last().unwrap(), &ctx.quotient(f.lambda)?);
                let converging = cauchy.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-15)
                    && to_limit <= cauchy[0] + 1e-15;
                limits.push(LimitSequence {
                    fixture: fi,
                    limit: f.lambda,
                    points: seq,
                    cauchy,
                    to_limit,
                    converging,
                });
            }
            ComponentKind::Interior => {
                for t in [0.0, 0.5, -0.5] {
                    let z = f.lambda + C64::new(0.0, t * f.delta);
                    certificates.push(ctx.certify(z, Route::Sample { fixture: fi }, &boundary, target, bound, params.max_degree)?);
                }
            }
        }
    }

    let frame = model.frame_rect();
    let ft = &ctx.ft;
    let modulus = modulus_of_continuity(
        |z| ft.eval(z).unwrap_or(C64::new(f64::NAN, 0.0)),
        &frame,
        &[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
        24,
    )
    .ok();

    let mass = eta.mass().re;
    Ok(EtaArtifact {
        params: *params,
        fixtures: fixtures.clone(),
        e_cells: e.cells.count(),
        e_pieces: e.pieces.len(),
        ledger: rec.ledger,
        level_masses,
        points: rec.points,
        fits: rec.fits,
        defects: rec.defects,
        eta,
        normalization,
        grid: rec.grid,
        fine_max,
        mass,
        mass_identity_error,
        certificates,
        limits,
        consistency,
        modulus,
        violations,
    })
}
