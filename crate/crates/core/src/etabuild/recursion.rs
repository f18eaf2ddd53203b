//! Weight recursion: level weights `a_n`, the partial sums `xi_j`, division
//! points on the fixtures, and the polynomial ladder `p_kl`.

use serde::{Deserialize, Serialize};

use super::assemble::{cells_of_rect, SetE};
use super::fixtures::FixtureSet;
use super::levels::{level_measure, LevelMeasure};
use super::EtaParams;
use crate::error::{Error, Result};
use crate::geometry::raster::{distance_transform_sq, label_components};
use crate::geometry::{CompactSetModel, Connectivity, Mask, Rect};
use crate::poly::{fit_polynomial, BasisPolynomial};
use crate::quad::gauss;
use crate::transform::{Carrier, FastTransform, PlanarMeasure};
use crate::C64;

/// Tile side of the tiled evaluator used for sup norms.
const TILE: f64 = 1.0 / 32.0;
const DEGREES: [usize; 10] = [8, 12, 18, 27, 40, 60, 90, 135, 170, 200];

/// Regular lattice of cell-centered points over a rectangle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalGrid {
    pub spacing: f64,
    pub points: Vec<C64>,
}

impl EvalGrid {
    pub fn over(r: &Rect, spacing: f64) -> Self {
        let nx = (r.width() / spacing).ceil().max(1.0) as usize;
        let ny = (r.height() / spacing).ceil().max(1.0) as usize;
        let mut points = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                points.push(C64::new(
                    r.x0 + (i as f64 + 0.5) * spacing,
                    r.y0 + (j as f64 + 0.5) * spacing,
                ));
            }
        }
        EvalGrid { spacing, points }
    }

    pub fn max_modulus(&self, mu: &PlanarMeasure) -> Result<f64> {
        Ok(transform_on(mu, &self.points)?.iter().fold(0.0f64, |m, v| m.max(v.norm())))
    }
}

pub fn transform_on(mu: &PlanarMeasure, pts: &[C64]) -> Result<Vec<C64>> {
    if mu.is_empty() {
        return Ok(vec![C64::new(0.0, 0.0); pts.len()]);
    }
    FastTransform::new(mu, TILE).eval_many(pts)
}

/// Splits cell carriers into sub-rectangles of side at most `side`; densities are kept.
pub fn refine(mu: &PlanarMeasure, side: f64) -> PlanarMeasure {
    let mut items = Vec::with_capacity(mu.len());
    for (c, w) in mu.items() {
        match c {
            Carrier::Cell(r) if r.width() > side || r.height() > side => {
                let nx = (r.width() / side).ceil() as usize;
                let ny = (r.height() / side).ceil() as usize;
                for b in 0..ny {
                    for a in 0..nx {
                        let x0 = r.x0 + r.width() * a as f64 / nx as f64;
                        let x1 = if a + 1 == nx { r.x1 } else { r.x0 + r.width() * (a + 1) as f64 / nx as f64 };
                        let y0 = r.y0 + r.height() * b as f64 / ny as f64;
                        let y1 = if b + 1 == ny { r.y1 } else { r.y0 + r.height() * (b + 1) as f64 / ny as f64 };
                        items.push((Carrier::cell(x0, y0, x1, y1), *w));
                    }
                }
            }
            _ => items.push((*c, *w)),
        }
    }
    PlanarMeasure::complex(items).expect("refinement keeps carriers valid")
}

/// `g mu` with `g` sampled at carrier anchors.
pub fn multiplied(mu: &PlanarMeasure, g: impl Fn(C64) -> C64) -> Result<PlanarMeasure> {
    PlanarMeasure::complex(mu.items().iter().map(|(c, w)| (*c, w * g(c.anchor()))).collect())
}

/// `C((p - 1/(w-u)) mu)` on `pts`.
pub fn defect_values(mu: &PlanarMeasure, p: &BasisPolynomial, u: C64, pts: &[C64]) -> Result<Vec<C64>> {
    let e = multiplied(mu, |w| p.eval(w) - 1.0 / (w - u))?;
    transform_on(&e, pts)
}

/// `sup |C mu(z) - C mu(lam)| / |z - lam|` over the grid.
pub fn quotient_sup(values: &[C64], pts: &[C64], lam: C64, at_lam: C64) -> f64 {
    values
        .iter()
        .zip(pts)
        .filter(|(_, z)| (**z - lam).norm() > 1e-12)
        .map(|(v, z)| (v - at_lam).norm() / (z - lam).norm())
        .fold(0.0, f64::max)
}

/// `int d|mu|(w) / |w - lam|`, with Gauss quadrature on carriers near `lam`.
pub fn inverse_distance_integral(mu: &PlanarMeasure, lam: C64) -> f64 {
    let rule = gauss(8);
    let mut acc = 0.0;
    for (c, w) in mu.items() {
        let wn = w.norm();
        match c {
            Carrier::Cell(r) => {
                let size = r.width().max(r.height());
                if r.dist_to_point(lam.re, lam.im) > 2.0 * size {
                    acc += wn * r.area() / (c.anchor() - lam).norm();
                } else {
                    for (x, wx) in rule.mapped(r.x0, r.x1) {
                        for (y, wy) in rule.mapped(r.y0, r.y1) {
                            let d = (C64::new(x, y) - lam).norm().max(1e-300);
                            acc += wn * wx * wy / d;
                        }
                    }
                }
            }
            _ => acc += wn * c.mass() / (c.anchor() - lam).norm().max(1e-300),
        }
    }
    acc
}

/// Grid cells meeting a carrier of `mu`.
pub fn support_mask(model: &CompactSetModel, mu: &PlanarMeasure) -> Mask {
    let mut m = Mask::new(model.nx, model.ny);
    for (c, _) in mu.items() {
        for (ix, iy) in cells_of_rect(model, &c.bbox()) {
            m.set(ix, iy, true);
        }
    }
    m
}

/// Cells within `radius` of `features` and the polynomial hull of that set
/// (bounded complementary components filled in).
pub fn hull(model: &CompactSetModel, features: &Mask, radius: f64) -> (Mask, Mask) {
    let d2 = distance_transform_sq(features);
    let rc = radius / model.h;
    let mut near = Mask::new(model.nx, model.ny);
    for (i, v) in d2.iter().enumerate() {
        near.bits[i] = *v <= rc * rc;
    }
    let (lab, _) = label_components(&near.not(), Connectivity::Four);
    let mut outside = vec![false; lab.len() as usize + 1];
    let (nx, ny) = (model.nx, model.ny);
    for ix in 0..nx {
        for iy in [0, ny - 1] {
            outside[lab[iy * nx + ix] as usize] = true;
        }
    }
    for iy in 0..ny {
        for ix in [0, nx - 1] {
            outside[lab[iy * nx + ix] as usize] = true;
        }
    }
    let mut filled = Mask::new(nx, ny);
    for i in 0..lab.len() {
        filled.bits[i] = near.bits[i] || !outside[lab[i] as usize];
    }
    (near, filled)
}

/// Points on the cells just outside `hull` (4-adjacent to it): centers and
/// corners train a fit; adding edge midpoints gives the validation set.
pub fn hull_boundary(model: &CompactSetModel, hull: &Mask) -> (Vec<C64>, Vec<C64>) {
    let mut centers = Vec::new();
    // doubled lattice coordinates: corners are (even, even), midpoints mixed
    let mut lattice = std::collections::BTreeSet::new();
    for iy in 0..model.ny {
        for ix in 0..model.nx {
            if hull.get(ix as i64, iy as i64) {
                continue;
            }
            let touches = Connectivity::Four
                .offsets()
                .iter()
                .any(|(dx, dy)| hull.get(ix as i64 + dx, iy as i64 + dy));
            if touches {
                centers.push(model.cell_center(ix, iy));
                for (a, b) in [(0, 0), (1, 0), (2, 0), (0, 1), (2, 1), (0, 2), (1, 2), (2, 2)] {
                    lattice.insert((2 * iy + b, 2 * ix + a));
                }
            }
        }
    }
    let at = |(y2, x2): (usize, usize)| {
        C64::new(model.x0 + x2 as f64 * 0.5 * model.h, model.y0 + y2 as f64 * 0.5 * model.h)
    };
    let mut train = centers;
    let mut check = train.clone();
    for &(y2, x2) in &lattice {
        let z = at((y2, x2));
        if y2 % 2 == 0 && x2 % 2 == 0 {
            train.push(z);
        }
        check.push(z);
    }
    (train, check)
}

/// Least-squares fit of `1/(z - u)` on the hull boundary with degree escalation
/// until the validated sup error is at most `target`.
pub fn fit_inverse(
    train: &[C64],
    check: &[C64],
    u: C64,
    target: f64,
    max_degree: usize,
) -> Result<(BasisPolynomial, f64)> {
    if train.is_empty() {
        return Err(Error::RungeTarget("empty hull boundary".into()));
    }
    let f = |z: &C64| 1.0 / (z - u);
    let values: Vec<C64> = train.iter().map(f).collect();
    let mut best_err = f64::INFINITY;
    for &d in DEGREES.iter().filter(|d| **d <= max_degree) {
        let d = d.min(train.len().saturating_sub(1));
        let p = fit_polynomial(train, &values, d)?;
        let err = p
            .eval_many(check)
            .iter()
            .zip(check)
            .map(|(v, z)| (v - f(z)).norm())
            .fold(0.0, f64::max);
        best_err = best_err.min(err);
        if err <= target {
            return Ok((p, err));
        }
    }
    Err(Error::RungeTarget(format!(
        "1/(z - {u}) not reached: best sup error {best_err:.3e} above target {target:.3e} at degree {max_degree}"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivisionPoint {
    pub k: usize,
    pub fixture: usize,
    pub z: C64,
}

/// Round-robin enumeration over fixtures.
pub fn enumerate_points(fixtures: &FixtureSet, count: usize) -> Vec<DivisionPoint> {
    let nf = fixtures.fixtures.len();
    if nf == 0 {
        return Vec::new();
    }
    (0..count)
        .map(|k| DivisionPoint {
            k: k + 1,
            fixture: k % nf,
            z: fixtures.fixtures[k % nf].point(k / nf),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderFit {
    pub k: usize,
    pub l: u32,
    pub point: C64,
    pub degree: usize,
    pub fit_error: f64,
    pub target: f64,
    pub poly: BasisPolynomial,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelLedger {
    pub n: u32,
    pub m_n: usize,
    pub mass: f64,
    pub b_integral: f64,
    pub b_quotient: f64,
    pub b_n: f64,
    /// Largest defect of earlier ladder polynomials against the new level.
    pub a_defect: f64,
    pub a_n: f64,
    pub xi_mass: f64,
    pub d_n: f64,
    pub hull_cells: usize,
}

/// Sup-grid defect of fit `(k, l)` against `xi_j`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderDefect {
    pub k: usize,
    pub l: u32,
    pub j: u32,
    pub defect: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Recursion {
    pub levels: Vec<LevelMeasure>,
    pub ledger: Vec<LevelLedger>,
    pub points: Vec<DivisionPoint>,
    pub fits: Vec<LadderFit>,
    pub defects: Vec<LadderDefect>,
    pub xi: PlanarMeasure,
    pub grid: EvalGrid,
    /// `C((p_kl - f_k) xi)` on the grid for every fit, after the last level.
    #[serde(skip)]
    pub fit_values: Vec<Vec<C64>>,
    /// Filled hull of the last level.
    #[serde(skip)]
    pub hull: Option<Mask>,
}

/// Distance between the fixture cells and `spt`, less one cell diagonal of slack.
fn fixture_distance(model: &CompactSetModel, fixture_mask: &Mask, spt: &Mask) -> f64 {
    let d2 = distance_transform_sq(spt);
    let dmin = fixture_mask
        .iter_set()
        .map(|(ix, iy)| d2[fixture_mask.idx(ix, iy)])
        .fold(f64::INFINITY, f64::min);
    ((dmin.sqrt() - std::f64::consts::SQRT_2) * model.h).max(model.h)
}

pub fn weight_recursion(
    model: &CompactSetModel,
    e: &SetE,
    fixtures: &FixtureSet,
    params: &EtaParams,
) -> Result<Recursion> {
    let grid = EvalGrid::over(&model.frame_rect(), params.grid_spacing);
    let pts = &grid.points;
    let n_points = params.points.unwrap_or(params.n_max as usize);
    let points = enumerate_points(fixtures, n_points);
    let samples: Vec<C64> = fixtures
        .fixtures
        .iter()
        .flat_map(|f| f.samples(params.grid_spacing))
        .collect();
    let fixture_mask = fixtures.mask(model);
    let quad_side = 2.0 * model.h;

    let mut levels = Vec::new();
    let mut ledger = Vec::new();
    let mut fits: Vec<LadderFit> = Vec::new();
    let mut fit_values: Vec<Vec<C64>> = Vec::new();
    let mut defects = Vec::new();
    let mut xi = PlanarMeasure::zero();
    let mut hull_mask = None;
    for n in 1..=params.n_max {
        let lm = level_measure(model, e, n, params)?;
        if lm.m_n == 0 {
            return Err(Error::NothingToCharge(format!("level {n}: no square of E passes the detection floor")));
        }
        let eta_n = &lm.measure;
        // B_n
        let values = transform_on(eta_n, pts)?;
        let at = FastTransform::new(eta_n, TILE).eval_many(&samples)?;
        let mut b_integral = 0.0f64;
        let mut b_quotient = 0.0f64;
        let mut b_n = 0.0f64;
        for (lam, c) in samples.iter().zip(&at) {
            let i1 = inverse_distance_integral(eta_n, *lam);
            let i2 = quotient_sup(&values, pts, *lam, *c);
            if i1 + i2 > b_n {
                b_n = i1 + i2;
                b_integral = i1;
                b_quotient = i2;
            }
        }
        // A_n from the committed ladder
        let fine_n = refine(eta_n, quad_side);
        let mut a_defect = 0.0f64;
        let mut level_defects = Vec::with_capacity(fits.len());
        for fit in &fits {
            let u = points[fit.k - 1].z;
            let dv = defect_values(&fine_n, &fit.poly, u, pts)?;
            a_defect = a_defect.max(dv.iter().fold(0.0f64, |m, v| m.max(v.norm())));
            level_defects.push(dv);
        }
        let two_n = 2f64.powi(n as i32);
        let mut a_n = 1.0 / two_n;
        if a_defect > 0.0 {
            a_n = a_n.min(1.0 / (two_n * a_defect));
        }
        if b_n > 0.0 {
            a_n = a_n.min(1.0 / (two_n * b_n));
        }
        xi = xi.plus(&eta_n.scaled(C64::new(a_n, 0.0))).consolidate();
        for ((fit, vals), dv) in fits.iter().zip(fit_values.iter_mut()).zip(&level_defects) {
            for (v, d) in vals.iter_mut().zip(dv) {
                *v += d * a_n;
            }
            defects.push(LadderDefect {
                k: fit.k,
                l: fit.l,
                j: n,
                defect: vals.iter().fold(0.0f64, |m, v| m.max(v.norm())),
            });
        }
        // new rung of the ladder
        let spt = support_mask(model, &xi);
        let d_n = fixture_distance(model, &fixture_mask, &spt);
        let (_, filled) = hull(model, &spt, d_n / 2.0);
        let (train, check) = hull_boundary(model, &filled);
        let xi_mass = xi.total_variation();
        let target = d_n / (2.0 * (4.0 * xi_mass + 1.0));
        let fine_xi = refine(&xi, quad_side);
        for p in points.iter().take((n as usize).min(points.len())) {
            if let Some((ix, iy)) = model.cell_of(p.z) {
                if filled.get(ix as i64, iy as i64) {
                    return Err(Error::RungeTarget(format!(
                        "division point u_{} = {} lies in the polynomial hull at level {n}",
                        p.k, p.z
                    )));
                }
            }
            let (poly, err) = fit_inverse(&train, &check, p.z, target, params.max_degree)?;
            let vals = defect_values(&fine_xi, &poly, p.z, pts)?;
            defects.push(LadderDefect {
                k: p.k,
                l: n,
                j: n,
                defect: vals.iter().fold(0.0f64, |m, v| m.max(v.norm())),
            });
            fit_values.push(vals);
            fits.push(LadderFit {
                k: p.k,
                l: n,
                point: p.z,
                degree: poly.degree(),
                fit_error: err,
                target,
                poly,
            });
        }
        ledger.push(LevelLedger {
            n,
            m_n: lm.m_n,
            mass: eta_n.mass().re,
            b_integral,
            b_quotient,
            b_n,
            a_defect,
            a_n,
            xi_mass,
            d_n,
            hull_cells: filled.count(),
        });
        hull_mask = Some(filled);
        levels.push(lm);
    }
    Ok(Recursion {
        levels,
        ledger,
        points,
        fits,
        defects,
        xi,
        grid,
        fit_values,
        hull: hull_mask,
    })
}
