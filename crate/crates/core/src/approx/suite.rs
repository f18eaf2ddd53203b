//! Test functions for density experiments.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::etabuild::{ComponentKind, EtaArtifact};
use crate::geometry::{Bump, CompactSetModel, DyadicFrame, SquareIndex};
use crate::quad::{breakpoints, gauss, integrate_rect_breaks};
use crate::transform::{Carrier, FastTransform, PlanarMeasure};
use crate::vitushkin::Field;
use crate::C64;

/// Tile side for fast transform evaluation.
const TILE: f64 = 1.0 / 32.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestKind {
    /// `1 / (z - pole)` with the pole in a hole.
    Rational { pole: C64 },
    /// Transform of an area measure on boundary cells, scaled to sup about 1.
    BoundaryTransform { cells: usize, scale: f64 },
    /// Square of the transform of eta.
    Product,
    /// Localization of the transform of eta to the dyadic square carrying most of eta.
    Localized { square: SquareIndex, delta: f64 },
    /// `conj(z)`: not analytic on the interior.
    Conjugate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionClass {
    /// Continuous on the sphere and analytic on int K.
    InClass,
    /// Negative control.
    Control,
}

#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    pub kind: TestKind,
    pub class: FunctionClass,
    /// `|int f dbar(psi) dA|` over bumps inside interior fixtures; empty when K has none.
    pub dbar_residuals: Vec<f64>,
    handle: Field,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("class", &self.class)
            .field("dbar_residuals", &self.dbar_residuals)
            .finish()
    }
}

impl TestFunction {
    pub fn new(name: &str, kind: TestKind, class: FunctionClass, handle: Field) -> Self {
        TestFunction {
            name: name.to_string(),
            kind,
            class,
            dbar_residuals: Vec::new(),
            handle,
        }
    }

    pub fn eval(&self, z: C64) -> C64 {
        (self.handle)(z)
    }

    pub fn eval_many(&self, zs: &[C64]) -> Vec<C64> {
        zs.iter().map(|z| (self.handle)(*z)).collect()
    }

    pub fn max_dbar_residual(&self) -> Option<f64> {
        self.dbar_residuals.iter().copied().reduce(f64::max)
    }
}

/// `int f dbar(psi) dA`, zero when `f` is analytic on the support of `psi`.
pub fn dbar_pairing(f: &dyn Fn(C64) -> C64, psi: &Bump) -> C64 {
    let (bx, by) = psi.breaks();
    let split = |b: [f64; 4]| {
        let extra: Vec<f64> = b
            .windows(2)
            .flat_map(|w| (1..4).map(move |k| w[0] + (w[1] - w[0]) * k as f64 / 4.0))
            .collect();
        breakpoints(b[0], b[3], b.iter().copied().chain(extra))
    };
    let rule = gauss(12);
    integrate_rect_breaks(&split(bx), &split(by), &rule, |x, y| {
        let z = C64::new(x, y);
        f(z) * psi.eval(z).1
    })
}

/// Bumps inside the disks of the interior fixtures.
pub fn interior_bumps(artifact: &EtaArtifact) -> Vec<Bump> {
    artifact
        .fixtures
        .fixtures
        .iter()
        .filter(|f| f.kind == ComponentKind::Interior)
        .map(|f| Bump {
            center: f.lambda,
            delta: 0.5 * f.delta,
        })
        .collect()
}

/// Cells carrying the boundary-transform member: cells of the inner boundary
/// near a seed, or boundary cells next to a hole when the inner boundary is empty.
fn strip_cells(model: &CompactSetModel, radius: f64) -> Vec<(usize, usize)> {
    let pool: Vec<(usize, usize)> = if model.inner_boundary.count() > 0 {
        model.inner_boundary.iter_set().collect()
    } else {
        let holes = model.any_complement_mask().and_not(&model.complement_mask(0));
        model
            .boundary_mask()
            .iter_set()
            .filter(|&(ix, iy)| {
                [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)]
                    .iter()
                    .any(|(dx, dy)| holes.get(ix as i64 + dx, iy as i64 + dy))
            })
            .collect()
    };
    if pool.is_empty() {
        return pool;
    }
    let seed = model.cell_center(pool[pool.len() / 2].0, pool[pool.len() / 2].1);
    pool.into_iter()
        .filter(|&(ix, iy)| (model.cell_center(ix, iy) - seed).norm() <= radius)
        .collect()
}

/// Rational, boundary-transform, product and localized members, plus the
/// conjugate control when K has interior.
pub fn make_test_suite(model: &CompactSetModel, artifact: &EtaArtifact) -> Result<Vec<TestFunction>> {
    if artifact.eta.is_empty() {
        return Err(Error::InvalidMeasure("eta is empty".into()));
    }
    let ft = Arc::new(FastTransform::new(&artifact.eta, TILE));
    let diam = super::experiment::k_diameter(model);
    let mut suite = Vec::new();

    let pole_fixture = artifact
        .fixtures
        .fixtures
        .iter()
        .filter(|f| f.kind == ComponentKind::Hole)
        .max_by(|a, b| {
            let ra = a.aux.as_ref().map_or(a.delta, |x| x.delta);
            let rb = b.aux.as_ref().map_or(b.delta, |x| x.delta);
            ra.total_cmp(&rb)
        });
    if let Some(f) = pole_fixture {
        let pole = f.aux.as_ref().map_or(f.lambda, |a| a.center);
        suite.push(TestFunction::new(
            "rational",
            TestKind::Rational { pole },
            FunctionClass::InClass,
            Arc::new(move |z: C64| 1.0 / (z - pole)),
        ));
    }

    let cells = strip_cells(model, diam / 16.0);
    if !cells.is_empty() {
        let items: Vec<(Carrier, f64)> = cells.iter().map(|&(ix, iy)| (Carrier::Cell(model.cell_rect(ix, iy)), 1.0)).collect();
        let mu = PlanarMeasure::positive(items)?;
        let raw = FastTransform::new(&mu, TILE);
        let peak = cells
            .iter()
            .step_by((cells.len() / 256).max(1))
            .map(|&(ix, iy)| raw.eval(model.cell_center(ix, iy)).map(|v| v.norm()))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        if !(peak > 0.0) {
            return Err(Error::InvalidMeasure("boundary strip measure has a vanishing transform".into()));
        }
        let scale = 1.0 / peak;
        let t = Arc::new(FastTransform::new(&mu.scaled(C64::new(scale, 0.0)), TILE));
        suite.push(TestFunction::new(
            "boundary-transform",
            TestKind::BoundaryTransform { cells: cells.len(), scale },
            FunctionClass::InClass,
            Arc::new(move |z: C64| t.eval(z).unwrap_or(C64::new(f64::NAN, 0.0))),
        ));
    }

    let g = ft.clone();
    suite.push(TestFunction::new(
        "product",
        TestKind::Product,
        FunctionClass::InClass,
        Arc::new(move |z: C64| {
            let v = g.eval(z).unwrap_or(C64::new(f64::NAN, 0.0));
            v * v
        }),
    ));

    // the square carrying the most mass of eta, so the piece is not trivially zero
    let level = (8.0 / diam).log2().ceil() as i32;
    let frame = DyadicFrame::new(level);
    let mut by_square: BTreeMap<SquareIndex, f64> = BTreeMap::new();
    for (c, w) in artifact.eta.items() {
        let (x, y) = c.bbox().center();
        let q = ((x / frame.delta).floor() as i64, (y / frame.delta).floor() as i64);
        *by_square.entry(q).or_default() += w.norm() * c.mass();
    }
    let square = by_square
        .iter()
        .fold(None, |best: Option<(SquareIndex, f64)>, (&q, &m)| match best {
            Some((_, bm)) if bm >= m => best,
            _ => Some((q, m)),
        })
        .map(|(q, _)| q)
        .ok_or_else(|| Error::InvalidMeasure("eta is empty".into()))?;
    // T_phi C(eta) = C(phi eta); carriers of eta are far smaller than the bump,
    // so phi is taken at their anchors
    let bump = frame.bump_of(square);
    let items: Vec<(Carrier, C64)> = artifact
        .eta
        .items()
        .iter()
        .filter_map(|&(c, w)| {
            let phi = bump.eval(c.anchor()).0;
            (phi > 0.0).then_some((c, w * phi))
        })
        .collect();
    let local = Arc::new(FastTransform::new(&PlanarMeasure::complex(items)?, TILE));
    suite.push(TestFunction::new(
        "localized",
        TestKind::Localized { square, delta: frame.delta },
        FunctionClass::InClass,
        Arc::new(move |z: C64| local.eval(z).unwrap_or(C64::new(f64::NAN, 0.0))),
    ));

    if model.n_interior > 0 {
        suite.push(TestFunction::new(
            "conjugate",
            TestKind::Conjugate,
            FunctionClass::Control,
            Arc::new(|z: C64| z.conj()),
        ));
    }

    let bumps = interior_bumps(artifact);
    for f in &mut suite {
        let h = f.handle.clone();
        f.dbar_residuals = bumps.iter().map(|b| dbar_pairing(&|z| h(z), b).norm()).collect();
    }
    Ok(suite)
}
