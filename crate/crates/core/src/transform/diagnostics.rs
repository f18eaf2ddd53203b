//! Numerical identities and descriptive statistics for measures: the dbar
//! identity, the product rule, duality pairings, Menger curvature and growth.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use super::carrier::Carrier;
use super::measure::PlanarMeasure;
use crate::error::{Error, Result};
use crate::geometry::{Bump, Rect};
use crate::quad::{adaptive_1d, breakpoints, gauss};
use crate::C64;

/// `\int g dmu` by per-carrier Gauss quadrature; cells are split into `sub x sub`
/// pieces with an 8-point rule on each.
pub fn integrate_against<G>(mu: &PlanarMeasure, sub: usize, g: G) -> Result<C64>
where
    G: FnMut(C64) -> Result<C64>,
{
    integrate_against_split(mu, sub, &[], &[], g)
}

/// As [`integrate_against`], additionally splitting cells at the given axis
/// breakpoints (where `g` has kinks).
pub fn integrate_against_split<G>(mu: &PlanarMeasure, sub: usize, bx: &[f64], by: &[f64], mut g: G) -> Result<C64>
where
    G: FnMut(C64) -> Result<C64>,
{
    let sub = sub.max(1);
    let r8 = gauss(8);
    let r64 = gauss(64);
    let mut total = C64::new(0.0, 0.0);
    for (c, w) in mu.items() {
        let mut acc = C64::new(0.0, 0.0);
        match *c {
            Carrier::Cell(r) => {
                let split = |lo: f64, hi: f64, extra: &[f64]| {
                    let d = (hi - lo) / sub as f64;
                    breakpoints(lo, hi, (1..sub).map(|k| lo + k as f64 * d).chain(extra.iter().copied()))
                };
                let xs = split(r.x0, r.x1, bx);
                let ys = split(r.y0, r.y1, by);
                for wx_ in xs.windows(2) {
                    for wy_ in ys.windows(2) {
                        for (x, wx) in r8.mapped(wx_[0], wx_[1]) {
                            for (y, wy) in r8.mapped(wy_[0], wy_[1]) {
                                acc += g(C64::new(x, y))? * (wx * wy);
                            }
                        }
                    }
                }
            }
            Carrier::Segment { p, q } => {
                let l = (q - p).norm();
                for (s, ws) in r64.mapped(0.0, l) {
                    let dens = (PI * s / l).sin().powi(2);
                    acc += g(p + (q - p) * (s / l))? * (ws * dens);
                }
            }
            Carrier::Arc { center, radius, theta0, theta1 } => {
                for (t, wt) in r64.mapped(theta0, theta1) {
                    acc += g(center + C64::from_polar(radius, t))? * (wt * radius);
                }
            }
            Carrier::Disk { center, radius } => acc += polar_integral(center, 0.0, radius, sub, &mut g)?,
            Carrier::Annulus { center, r_inner, r_outer } => {
                acc += polar_integral(center, r_inner, r_outer, sub, &mut g)?
            }
        }
        total += w * acc;
    }
    Ok(total)
}

fn polar_integral<G>(c: C64, r0: f64, r1: f64, sub: usize, g: &mut G) -> Result<C64>
where
    G: FnMut(C64) -> Result<C64>,
{
    let rr = gauss(16);
    let nt = 64 * sub;
    let mut acc = C64::new(0.0, 0.0);
    for (r, wr) in rr.mapped(r0, r1) {
        for k in 0..nt {
            let t = std::f64::consts::TAU * k as f64 / nt as f64;
            acc += g(c + C64::from_polar(r, t))? * (wr * r * std::f64::consts::TAU / nt as f64);
        }
    }
    Ok(acc)
}

/// Circles across which transforms of the measure have kinks.
fn circles(mu: &PlanarMeasure) -> Vec<(C64, f64)> {
    let mut out = Vec::new();
    for (c, _) in mu.items() {
        match *c {
            Carrier::Disk { center, radius } => out.push((center, radius)),
            Carrier::Annulus { center, r_inner, r_outer } => out.extend([(center, r_inner), (center, r_outer)]),
            _ => {}
        }
    }
    out
}

/// `\int h dA` over `rect`, where `h` may have kinks on the given axis lines and
/// circles. The inner integral in y is split where the vertical line meets a
/// circle, so every Gauss panel sees a smooth integrand; the outer integral in x
/// is adaptive because of the square-root behaviour near tangent points.
fn integrate_region<H>(rect: &Rect, step: f64, extra_x: &[f64], extra_y: &[f64], circles: &[(C64, f64)], mut h: H) -> Result<C64>
where
    H: FnMut(C64) -> Result<C64>,
{
    if !(rect.width() > 0.0 && rect.height() > 0.0) {
        return Ok(C64::new(0.0, 0.0));
    }
    let refine = |pts: Vec<f64>| {
        let mut out = vec![pts[0]];
        for w in pts.windows(2) {
            let n = ((w[1] - w[0]) / step).ceil().max(1.0) as usize;
            for k in 1..=n {
                out.push(w[0] + (w[1] - w[0]) * k as f64 / n as f64);
            }
        }
        out
    };
    let xs = breakpoints(
        rect.x0,
        rect.x1,
        extra_x.iter().copied().chain(circles.iter().flat_map(|(c, r)| [c.re - r, c.re + r])),
    );
    let xs = refine(xs);
    let rule = gauss(10);
    let mut failure = None;
    let mut inner = |x: f64| {
        let crossings = circles.iter().flat_map(|(c, r)| {
            let d = r * r - (x - c.re) * (x - c.re);
            let s = if d > 0.0 { d.sqrt() } else { 0.0 };
            [c.im - s, c.im + s]
        });
        let ys = refine(breakpoints(rect.y0, rect.y1, extra_y.iter().copied().chain(crossings)));
        let mut acc = C64::new(0.0, 0.0);
        for w in ys.windows(2) {
            for (y, wy) in rule.mapped(w[0], w[1]) {
                match h(C64::new(x, y)) {
                    Ok(v) => acc += v * wy,
                    Err(e) => {
                        failure.get_or_insert(e);
                    }
                }
            }
        }
        acc
    };
    let tol = 1e-13 * rect.width() * rect.height() / (step * step);
    let mut total = C64::new(0.0, 0.0);
    for w in xs.windows(2) {
        total += match adaptive_1d(w[0], w[1], tol, 30, &mut inner) {
            Ok(v) | Err(v) => v,
        };
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// `\int h dbar(psi) dA` over the support of `psi`, split at the bump breakpoints,
/// at any extra axis breakpoints (cell edges of the measures involved) and at
/// circles.
fn integrate_dbar<H>(psi: &Bump, extra_x: &[f64], extra_y: &[f64], circles: &[(C64, f64)], mut h: H) -> Result<C64>
where
    H: FnMut(C64) -> Result<C64>,
{
    let (bx, by) = psi.breaks();
    let ex: Vec<f64> = extra_x.iter().copied().chain(bx).collect();
    let ey: Vec<f64> = extra_y.iter().copied().chain(by).collect();
    integrate_region(&psi.support(), psi.delta / 8.0, &ex, &ey, circles, |z| {
        let d = psi.eval(z).1;
        if d.norm() == 0.0 {
            Ok(C64::new(0.0, 0.0))
        } else {
            Ok(h(z)? * d)
        }
    })
}

/// `\int psi g dmu`, where `g` may have kinks on `circles`. Area carriers are
/// integrated over their intersection with the support of `psi`.
fn pair_with_bump<G>(
    mu: &PlanarMeasure,
    psi: &Bump,
    circles: &[(C64, f64)],
    extra_x: &[f64],
    extra_y: &[f64],
    mut g: G,
) -> Result<C64>
where
    G: FnMut(C64) -> Result<C64>,
{
    let s = psi.support();
    let (bx, by) = psi.breaks();
    let ex: Vec<f64> = extra_x.iter().copied().chain(bx).collect();
    let ey: Vec<f64> = extra_y.iter().copied().chain(by).collect();
    let step = psi.delta / 8.0;
    let mut total = C64::new(0.0, 0.0);
    let mut curves = Vec::new();
    for &(c, w) in mu.items() {
        let b = c.bbox();
        let clip = Rect::new(b.x0.max(s.x0), b.y0.max(s.y0), b.x1.min(s.x1), b.y1.min(s.y1));
        if !(clip.x1 > clip.x0 && clip.y1 > clip.y0) {
            continue;
        }
        let own: Vec<(C64, f64)> = match c {
            Carrier::Disk { center, radius } => vec![(center, radius)],
            Carrier::Annulus { center, r_inner, r_outer } => vec![(center, r_inner), (center, r_outer)],
            Carrier::Cell(_) => Vec::new(),
            _ => {
                curves.push((c, w));
                continue;
            }
        };
        let all: Vec<(C64, f64)> = circles.iter().copied().chain(own).collect();
        let v = integrate_region(&clip, step, &ex, &ey, &all, |z| {
            let inside = match c {
                Carrier::Disk { center, radius } => (z - center).norm() < radius,
                Carrier::Annulus { center, r_inner, r_outer } => {
                    let d = (z - center).norm();
                    d > r_inner && d < r_outer
                }
                _ => true,
            };
            if inside {
                Ok(psi.eval(z).0 * g(z)?)
            } else {
                Ok(C64::new(0.0, 0.0))
            }
        })?;
        total += w * v;
    }
    if !curves.is_empty() {
        let rest = PlanarMeasure::complex(curves)?;
        total += integrate_against_split(&rest, 4, &bx, &by, |z| Ok(psi.eval(z).0 * g(z)?))?;
    }
    Ok(total)
}

fn cell_edges(mu: &PlanarMeasure) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (c, _) in mu.items() {
        if let Carrier::Cell(r) = c {
            xs.extend([r.x0, r.x1]);
            ys.extend([r.y0, r.y1]);
        }
    }
    (xs, ys)
}

/// The distribution `dbar C(mu) + pi mu` paired with `psi`, i.e.
/// `-\int C(mu) dbar(psi) dA + pi \int psi dmu`; vanishes identically.
pub fn dbar_residual(mu: &PlanarMeasure, psi: &Bump) -> Result<C64> {
    let (ex, ey) = cell_edges(mu);
    let circ = circles(mu);
    let left = integrate_dbar(psi, &ex, &ey, &circ, |z| mu.transform(z))?;
    let right = pair_with_bump(mu, psi, &[], &[], &[], |_| Ok(C64::new(1.0, 0.0)))?;
    Ok(-left + PI * right)
}

/// `dbar(C(e1) C(e2)) + pi (C(e1) e2 + C(e2) e1)` paired with `psi`.
pub fn product_rule_residual(e1: &PlanarMeasure, e2: &PlanarMeasure, psi: &Bump) -> Result<C64> {
    let (mut ex, mut ey) = cell_edges(e1);
    let (fx, fy) = cell_edges(e2);
    ex.extend(fx);
    ey.extend(fy);
    let (c1, c2) = (circles(e1), circles(e2));
    let both: Vec<(C64, f64)> = c1.iter().chain(&c2).copied().collect();
    let left = integrate_dbar(psi, &ex, &ey, &both, |z| Ok(e1.transform(z)? * e2.transform(z)?))?;
    let (e1x, e1y) = cell_edges(e1);
    let (e2x, e2y) = cell_edges(e2);
    // kinks of C(e1) inside the carriers of e2 come from e1's circles and cell edges
    let a = pair_with_bump(e2, psi, &c1, &e1x, &e1y, |z| e1.transform(z))?;
    let b = pair_with_bump(e1, psi, &c2, &e2x, &e2y, |z| e2.transform(z))?;
    Ok(-left + PI * (a + b))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DualityPairing {
    /// `\int C(eta) dnu`.
    pub lhs: C64,
    /// `\int C(nu) deta`.
    pub rhs: C64,
    pub residual: C64,
}

/// Compares `\int C(eta) dnu` with `-\int C(nu) deta`.
pub fn duality_pairing(eta: &PlanarMeasure, nu: &PlanarMeasure, sub: usize) -> Result<DualityPairing> {
    if !eta.is_positive() {
        return Err(Error::InvalidMeasure("duality pairing expects a positive eta".into()));
    }
    let lhs = integrate_against(nu, sub, |z| eta.transform(z))?;
    let rhs = integrate_against(eta, sub, |z| nu.transform(z))?;
    Ok(DualityPairing {
        lhs,
        rhs,
        residual: lhs + rhs,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MengerReport {
    /// `c^2(mu)` summed over ordered triples of distinct points.
    pub total: f64,
    /// Sample points with their weights.
    pub points: Vec<(C64, f64)>,
    /// `c^2_mu(x) = sum_{y, z} w_y w_z c(x, y, z)^2` at each sample point.
    pub pointwise: Vec<f64>,
    /// Whether the point cloud was aggregated to respect the cap.
    pub aggregated: bool,
}

/// `1 / R(x, y, z)^2`; zero for collinear or coincident triples.
pub fn inverse_circumradius_sq(x: C64, y: C64, z: C64) -> f64 {
    let a = (y - x).norm_sqr();
    let b = (z - y).norm_sqr();
    let c = (x - z).norm_sqr();
    if a == 0.0 || b == 0.0 || c == 0.0 {
        return 0.0;
    }
    let cross = (y - x).re * (z - x).im - (y - x).im * (z - x).re;
    // c = 4 Area / (|x-y||y-z||z-x|), Area = |cross| / 2
    4.0 * cross * cross / (a * b * c)
}

/// Menger curvature of the measure, discretized to at most `cap` weighted points
/// (cell centers and curve nodes; aggregated on a grid when there are more).
pub fn menger_curvature(mu: &PlanarMeasure, cap: usize) -> MengerReport {
    let raw: Vec<(C64, f64)> = mu.discretize(1).into_iter().map(|(z, w)| (z, w.norm())).collect();
    let (points, aggregated) = if raw.len() > cap && cap > 0 {
        (aggregate(&raw, cap), true)
    } else {
        (raw, false)
    };
    let n = points.len();
    let mut pointwise = vec![0.0; n];
    if n < 3 {
        return MengerReport {
            total: 0.0,
            points,
            pointwise,
            aggregated,
        };
    }
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let mut inner = 0.0;
            for k in (j + 1)..n {
                if k == i {
                    continue;
                }
                inner += points[k].1 * inverse_circumradius_sq(points[i].0, points[j].0, points[k].0);
            }
            s += points[j].1 * inner;
        }
        // unordered pairs (j, k) counted once above; ordered pairs twice
        pointwise[i] = 2.0 * s;
    }
    let total = points.iter().zip(&pointwise).map(|(p, c)| p.1 * c).sum();
    MengerReport {
        total,
        points,
        pointwise,
        aggregated,
    }
}

/// Mass-preserving aggregation of a weighted cloud onto grid bins.
fn aggregate(points: &[(C64, f64)], cap: usize) -> Vec<(C64, f64)> {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (z, _) in points {
        x0 = x0.min(z.re);
        y0 = y0.min(z.im);
        x1 = x1.max(z.re);
        y1 = y1.max(z.im);
    }
    let side = (x1 - x0).max(y1 - y0).max(1e-300);
    let mut bins = (cap as f64).sqrt().floor().max(1.0) as usize;
    loop {
        let cell = side / bins as f64 * (1.0 + 1e-12);
        let mut map: BTreeMap<(usize, usize), (C64, f64)> = BTreeMap::new();
        for (z, w) in points {
            let key = (((z.re - x0) / cell) as usize, ((z.im - y0) / cell) as usize);
            let e = map.entry(key).or_insert((C64::new(0.0, 0.0), 0.0));
            e.0 += z * *w;
            e.1 += w;
        }
        if map.len() <= cap || bins == 1 {
            return map
                .into_values()
                .filter(|(_, w)| *w > 0.0)
                .map(|(zw, w)| (zw / w, w))
                .collect();
        }
        bins = (bins as f64 * 0.9).floor().max(1.0) as usize;
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GrowthEntry {
    pub center: C64,
    pub radius: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub entries: Vec<GrowthEntry>,
    pub sup: f64,
    /// Ratio at the smallest radius for each center, as an estimate of the density.
    pub theta: Vec<(C64, f64)>,
    /// `|mu|(B(l, r)) <= r` on every sampled ball.
    pub linear_growth_one: bool,
    /// Every density estimate is below the tolerance.
    pub vanishing_density: bool,
}

pub fn growth_report(mu: &PlanarMeasure, centers: &[C64], radii: &[f64], theta_tol: f64) -> GrowthReport {
    let mut entries = Vec::with_capacity(centers.len() * radii.len());
    let mut theta = Vec::with_capacity(centers.len());
    let rmin = radii.iter().copied().fold(f64::INFINITY, f64::min);
    for &c in centers {
        let mut th = 0.0;
        for &r in radii {
            let ratio = mu.mass_in_ball(c, r) / r;
            if r == rmin {
                th = ratio;
            }
            entries.push(GrowthEntry { center: c, radius: r, ratio });
        }
        theta.push((c, th));
    }
    let sup = entries.iter().map(|e| e.ratio).fold(0.0, f64::max);
    GrowthReport {
        linear_growth_one: sup <= 1.0,
        vanishing_density: theta.iter().all(|(_, t)| *t <= theta_tol),
        entries,
        sup,
        theta,
    }
}
