//! Elementary carriers with exact Cauchy-transform evaluators.
//!
//! The transform convention is `C(mu)(z) = \int dmu(w) / (w - z)`, so that
//! `C(mu)(z) ~ -mass / z` at infinity.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::quad::gauss;
use crate::C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Elementary carrier of unit weight.
///
/// * `Cell`: Lebesgue area measure on a rectangle.
/// * `Segment`: arclength density `sin^2(pi s / L)` on `[p, q]`, vanishing at both ends.
/// * `Arc`: arclength on the arc `center + radius e^{i theta}`, `theta0 <= theta <= theta1`.
/// * `Disk`, `Annulus`: area measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Carrier {
    Cell(Rect),
    Segment { p: C64, q: C64 },
    Arc { center: C64, radius: f64, theta0: f64, theta1: f64 },
    Disk { center: C64, radius: f64 },
    Annulus { center: C64, r_inner: f64, r_outer: f64 },
}

/// Which side of a segment a one-sided limit is taken from, relative to the
/// direction `p -> q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Carrier {
    pub fn cell(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Carrier::Cell(Rect::new(x0, y0, x1, y1))
    }

    pub fn mass(&self) -> f64 {
        match self {
            Carrier::Cell(r) => r.area(),
            Carrier::Segment { p, q } => 0.5 * (q - p).norm(),
            Carrier::Arc { radius, theta0, theta1, .. } => radius * (theta1 - theta0),
            Carrier::Disk { radius, .. } => PI * radius * radius,
            Carrier::Annulus { r_inner, r_outer, .. } => PI * (r_outer * r_outer - r_inner * r_inner),
        }
    }

    /// `int (w - s) dmu(w)` for the unit-density measure on the carrier.
    pub fn first_moment(&self, s: C64) -> C64 {
        match *self {
            Carrier::Arc { center, radius, theta0, theta1 } => {
                let chord = C64::from_polar(1.0, theta1) - C64::from_polar(1.0, theta0);
                self.mass() * (center - s) - C64::i() * radius * radius * chord
            }
            Carrier::Annulus { center, .. } => self.mass() * (center - s),
            _ => self.mass() * (self.anchor() - s),
        }
    }

    /// Carriers whose transform is continuous on the whole plane.
    pub fn is_continuous(&self) -> bool {
        matches!(self, Carrier::Cell(_) | Carrier::Disk { .. } | Carrier::Annulus { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Carrier::Cell(r) => r.width() > 0.0 && r.height() > 0.0 && r.x0.is_finite() && r.y1.is_finite(),
            Carrier::Segment { p, q } => (q - p).norm() > 0.0 && p.is_finite() && q.is_finite(),
            Carrier::Arc { radius, theta0, theta1, .. } => {
                *radius > 0.0 && theta1 > theta0 && theta1 - theta0 <= TAU + 1e-12
            }
            Carrier::Disk { radius, .. } => *radius > 0.0,
            Carrier::Annulus { r_inner, r_outer, .. } => *r_inner > 0.0 && r_outer > r_inner,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidMeasure(format!("degenerate carrier {self:?}")))
        }
    }

    pub fn bbox(&self) -> Rect {
        match *self {
            Carrier::Cell(r) => r,
            Carrier::Segment { p, q } => Rect::new(p.re.min(q.re), p.im.min(q.im), p.re.max(q.re), p.im.max(q.im)),
            Carrier::Arc { center, radius, .. } | Carrier::Disk { center, radius } => Rect::new(
                center.re - radius,
                center.im - radius,
                center.re + radius,
                center.im + radius,
            ),
            Carrier::Annulus { center, r_outer, .. } => Rect::new(
                center.re - r_outer,
                center.im - r_outer,
                center.re + r_outer,
                center.im + r_outer,
            ),
        }
    }

    /// A representative point of the support.
    pub fn anchor(&self) -> C64 {
        match *self {
            Carrier::Cell(r) => {
                let (x, y) = r.center();
                C64::new(x, y)
            }
            Carrier::Segment { p, q } => 0.5 * (p + q),
            Carrier::Arc { center, radius, theta0, theta1 } => center + C64::from_polar(radius, 0.5 * (theta0 + theta1)),
            Carrier::Disk { center, .. } => center,
            Carrier::Annulus { center, r_inner, r_outer } => center + 0.5 * (r_inner + r_outer),
        }
    }

    /// `C(carrier)(z)`. Segments return the principal value on the open segment;
    /// arcs reject on-arc points.
    pub fn transform(&self, z: C64) -> Result<C64> {
        match *self {
            Carrier::Cell(r) => Ok(cell_transform(&r, z)),
            Carrier::Segment { p, q } => Ok(segment_transform(p, q, z, None)),
            Carrier::Arc { center, radius, theta0, theta1 } => arc_transform(center, radius, theta0, theta1, z),
            Carrier::Disk { center, radius } => Ok(disk_transform(center, radius, z)),
            Carrier::Annulus { center, r_inner, r_outer } => {
                let zeta = z - center;
                let n2 = zeta.norm_sqr();
                let (a, b) = (r_inner * r_inner, r_outer * r_outer);
                if n2 <= a {
                    Ok(C64::new(0.0, 0.0))
                } else {
                    Ok(-PI * (n2.min(b) - a) / zeta)
                }
            }
        }
    }

    /// One-sided limit of the transform. Identical to `transform` except on the
    /// open support of a segment.
    pub fn transform_side(&self, z: C64, side: Side) -> Result<C64> {
        match *self {
            Carrier::Segment { p, q } => Ok(segment_transform(p, q, z, Some(side))),
            _ => self.transform(z),
        }
    }

    /// Density at a support point with respect to the carrier's reference measure
    /// (area or arclength); zero off the support.
    pub fn density_at(&self, z: C64) -> f64 {
        match *self {
            Carrier::Segment { p, q } => {
                let l = (q - p).norm();
                let zeta = (z - p) / ((q - p) / l);
                if zeta.im.abs() > 1e-12 * l || zeta.re < 0.0 || zeta.re > l {
                    0.0
                } else {
                    (PI * zeta.re / l).sin().powi(2)
                }
            }
            _ => 1.0,
        }
    }
}

/// Exact transform of a unit-density area measure on `r`.
pub fn cell_transform(r: &Rect, z: C64) -> C64 {
    let (cx, cy) = r.center();
    let zeta = z - C64::new(cx, cy);
    let (a, b) = (0.5 * r.width(), 0.5 * r.height());
    if zeta.norm_sqr() > 36.0 * (a * a + b * b) {
        return rect_multipole(a, b, zeta);
    }
    let corners = [
        C64::new(r.x0, r.y0),
        C64::new(r.x1, r.y0),
        C64::new(r.x1, r.y1),
        C64::new(r.x0, r.y1),
    ];
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..4 {
        acc += edge_term(corners[k], corners[(k + 1) % 4], z);
    }
    acc / (2.0 * I)
}

/// `\int_a^b conj(w - z) / (w - z) dw` along the straight edge `a -> b`.
pub(crate) fn edge_term(a: C64, b: C64, z: C64) -> C64 {
    let d = b - a;
    let alpha = d.conj() / d;
    let za = a - z;
    let zb = b - z;
    let beta = za.conj() - alpha * za;
    let mut t = alpha * (zb - za);
    if za.norm_sqr() > 0.0 && zb.norm_sqr() > 0.0 && beta.norm_sqr() > 0.0 {
        t += beta * (zb / za).ln();
    }
    t
}

/// Far-field expansion `-sum_k M_k / zeta^{k+1}` for a centered rectangle with
/// half-sides `a`, `b`; only even moments are nonzero.
fn rect_multipole(a: f64, b: f64, zeta: C64) -> C64 {
    const ORDER: usize = 14;
    let mut xm = [0.0f64; ORDER + 1];
    let mut ym = [0.0f64; ORDER + 1];
    for p in (0..=ORDER).step_by(2) {
        xm[p] = 2.0 * a.powi(p as i32 + 1) / (p as f64 + 1.0);
        ym[p] = 2.0 * b.powi(p as i32 + 1) / (p as f64 + 1.0);
    }
    let inv = 1.0 / zeta;
    let inv2 = inv * inv;
    let mut pow = inv;
    let mut acc = C64::new(0.0, 0.0);
    for k in (0..=ORDER).step_by(2) {
        // M_k = sum_j binom(k, j) i^j X_{k-j} Y_j, j even
        let mut mk = 0.0;
        let mut binom = 1.0f64;
        for j in 0..=k {
            if j > 0 {
                binom = binom * (k + 1 - j) as f64 / j as f64;
            }
            if j % 2 == 0 {
                let sign = if j % 4 == 0 { 1.0 } else { -1.0 };
                mk += sign * binom * xm[k - j] * ym[j];
            }
        }
        acc -= mk * pow;
        pow *= inv2;
    }
    acc
}

pub fn disk_transform(center: C64, radius: f64, z: C64) -> C64 {
    let zeta = z - center;
    if zeta.norm_sqr() <= radius * radius {
        -PI * zeta.conj()
    } else {
        -PI * radius * radius / zeta
    }
}

/// `sin(x)/x` for complex arguments.
fn sinc(x: C64) -> C64 {
    if x.norm() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `\int_a^b sin^2(pi s / l) / (s - zeta) ds` for `0 <= a < b <= l`.
///
/// `side` selects a one-sided limit when `zeta` lies on `(a, b)`; `None` gives the
/// principal value there.
pub(crate) fn segment_integral(l: f64, a: f64, b: f64, zeta: C64, side: Option<Side>) -> C64 {
    let rule = gauss(32);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let near = (zeta - mid).norm() <= 2.0 * half;
    let k = PI / l;
    if !near {
        let mut acc = C64::new(0.0, 0.0);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let s = mid + half * x;
            acc += w * (k * s).sin().powi(2) / (s - zeta);
        }
        return acc * half;
    }
    // sin^2 is entire: subtract its value at zeta and integrate the smooth quotient
    let mut acc = C64::new(0.0, 0.0);
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        let s = mid + half * x;
        acc += w * k * sinc(k * (s - zeta)) * (k * (s + zeta)).sin();
    }
    acc *= half;
    let rho = (k * zeta).sin().powi(2);
    let (za, zb) = (a - zeta, b - zeta);
    let tiny = 1e-300;
    if rho.norm() > 0.0 && za.norm() > tiny && zb.norm() > tiny {
        let mut lg = (zb / za).ln();
        if zeta.im == 0.0 && zeta.re > a && zeta.re < b {
            // on the open interval: real principal value plus the selected jump
            lg = C64::new(lg.re, 0.0);
            match side {
                Some(Side::Left) => lg.im = PI,
                Some(Side::Right) => lg.im = -PI,
                None => {}
            }
        }
        acc += rho * lg;
    }
    acc
}

fn segment_local(p: C64, q: C64, z: C64) -> (f64, C64, C64) {
    let l = (q - p).norm();
    let u = (q - p) / l;
    let mut zeta = (z - p) / u;
    // snap points that lie on the carrier line up to rounding
    if zeta.im.abs() <= 1e-14 * l {
        zeta.im = 0.0;
    }
    (l, u, zeta)
}

pub fn segment_transform(p: C64, q: C64, z: C64, side: Option<Side>) -> C64 {
    let (l, u, zeta) = segment_local(p, q, z);
    segment_integral(l, 0.0, l, zeta, side) / u
}

pub(crate) fn segment_transform_parts(p: C64, q: C64, z: C64, parts: &[(f64, f64)]) -> C64 {
    let (l, u, zeta) = segment_local(p, q, z);
    let mut acc = C64::new(0.0, 0.0);
    for &(a, b) in parts {
        if b > a {
            acc += segment_integral(l, a, b, zeta, None);
        }
    }
    acc / u
}

/// Transform of arclength on the arc; errors on the arc itself.
pub fn arc_transform(c: C64, r: f64, t0: f64, t1: f64, z: C64) -> Result<C64> {
    let zc = z - c;
    let d = zc.norm();
    if (d - r).abs() <= 1e-13 * r {
        let th = zc.arg();
        let t = th + TAU * ((t0 - th) / TAU).ceil();
        if t <= t1 + 1e-13 {
            return Err(Error::JumpDiscontinuity(format!(
                "arc transform queried on the arc at {z}"
            )));
        }
    }
    Ok(arc_transform_unchecked(c, r, t0, t1, z))
}

pub(crate) fn arc_transform_unchecked(c: C64, r: f64, t0: f64, t1: f64, z: C64) -> C64 {
    let zc = z - c;
    let d = zc.norm();
    let pieces = ((t1 - t0) / FRAC_PI_2).ceil().max(1.0) as usize;
    let dt = (t1 - t0) / pieces as f64;
    let mut acc = C64::new(0.0, 0.0);
    if d < 0.5 * r || d > 3.0 * r {
        let rule = gauss(32);
        for k in 0..pieces {
            let (a, b) = (t0 + k as f64 * dt, t0 + (k + 1) as f64 * dt);
            let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let w_pt = c + C64::from_polar(r, m + h * x);
                acc += w * h * r / (w_pt - z);
            }
        }
        return acc;
    }
    let mut dlog = C64::new(0.0, 0.0);
    for k in 0..pieces {
        let (a, b) = (t0 + k as f64 * dt, t0 + (k + 1) as f64 * dt);
        let wa = c + C64::from_polar(r, a);
        let wb = c + C64::from_polar(r, b);
        dlog += ((wb - z) / (wa - z)).ln();
        // inside the circular segment cut off by the chord: winding correction
        let chord = wb - wa;
        let cross = chord.re * (z - wa).im - chord.im * (z - wa).re;
        if d < r && cross < 0.0 {
            dlog += TAU * I;
        }
    }
    r / (I * (c - z)) * (I * (t1 - t0) - dlog)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{adaptive_1d, integrate_rect_singular};

    fn cell_oracle(r: &Rect, z: C64) -> C64 {
        // adaptive nested quadrature of the defining integral
        let mut outer = |x: f64| {
            let mut inner = |y: f64| 1.0 / (C64::new(x, y) - z);
            adaptive_1d(r.y0, r.y1, 1e-13, 40, &mut inner).unwrap()
        };
        adaptive_1d(r.x0, r.x1, 1e-12, 40, &mut outer).unwrap()
    }

    #[test]
    fn first_moments_match_contour_coefficients() {
        let s = C64::new(0.1, -0.2);
        let carriers = [
            Carrier::Cell(Rect::new(0.0, 0.0, 0.3, 0.2)),
            Carrier::Segment { p: C64::new(-0.3, 0.1), q: C64::new(0.4, 0.3) },
            Carrier::Arc { center: C64::new(0.0, 0.1), radius: 0.4, theta0: 0.3, theta1: 2.0 },
            Carrier::Disk { center: C64::new(0.2, 0.0), radius: 0.3 },
            Carrier::Annulus { center: C64::new(0.0, 0.1), r_inner: 0.2, r_outer: 0.35 },
        ];
        for c in carriers {
            // C(mu) = -sum m_k / (z - s)^(k+1)
            let n = 256;
            let mut c2 = C64::new(0.0, 0.0);
            for k in 0..n {
                let w = C64::from_polar(3.0, std::f64::consts::TAU * k as f64 / n as f64);
                c2 += c.transform(s + w).unwrap() * w * w;
            }
            c2 /= n as f64;
            assert!((c2 + c.first_moment(s)).norm() < 1e-10, "{c:?}");
        }
    }

    #[test]
    fn unit_cell_matches_adaptive_oracle() {
        let r = Rect::new(0.0, 0.0, 1.0, 1.0);
        for z in [C64::new(2.0, 2.0), C64::new(-0.3, 0.5), C64::new(0.5, 1.7), C64::new(7.0, -9.0)] {
            let v = cell_transform(&r, z);
            let o = cell_oracle(&r, z);
            assert!((v - o).norm() < 1e-8, "{z}: {v} vs {o}");
        }
    }

    #[test]
    fn cell_inside_matches_singular_quadrature() {
        let r = Rect::new(0.0, 0.0, 1.0, 0.5);
        let z = C64::new(0.3, 0.2);
        let rule = gauss(24);
        let o = integrate_rect_singular(0.0, 1.0, 0.0, 0.5, (z.re, z.im), &rule, |x, y| 1.0 / (C64::new(x, y) - z));
        assert!((cell_transform(&r, z) - o).norm() < 1e-10);
    }

    #[test]
    fn cell_corner_and_edge_are_continuous() {
        let r = Rect::new(0.0, 0.0, 1.0, 1.0);
        for z in [C64::new(0.0, 0.0), C64::new(1.0, 0.5), C64::new(0.25, 1.0)] {
            let v = cell_transform(&r, z);
            for k in 0..8 {
                let e = C64::from_polar(1e-9, k as f64);
                assert!((cell_transform(&r, z + e) - v).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn multipole_matches_closed_form() {
        let r = Rect::new(0.1, 0.2, 0.3, 0.25);
        let z = C64::new(1.7, -0.4);
        let (cx, cy) = r.center();
        let v = rect_multipole(0.1, 0.025, z - C64::new(cx, cy));
        let mut acc = C64::new(0.0, 0.0);
        let c = [
            C64::new(r.x0, r.y0),
            C64::new(r.x1, r.y0),
            C64::new(r.x1, r.y1),
            C64::new(r.x0, r.y1),
        ];
        for k in 0..4 {
            acc += edge_term(c[k], c[(k + 1) % 4], z);
        }
        acc /= 2.0 * I;
        assert!((v - acc).norm() < 1e-14 * acc.norm().max(1e-3) + 1e-16);
    }

    fn segment_oracle(p: C64, q: C64, z: C64) -> C64 {
        let l = (q - p).norm();
        let mut f = |s: f64| (PI * s / l).sin().powi(2) / (p + (q - p) * (s / l) - z);
        adaptive_1d(0.0, l, 1e-13, 50, &mut f).unwrap()
    }

    #[test]
    fn segment_matches_oracle_off_support() {
        let (p, q) = (C64::new(-1.0, 0.2), C64::new(1.5, 0.9));
        for z in [C64::new(0.0, 0.0), C64::new(0.3, 0.6), C64::new(2.0, 1.0), C64::new(-5.0, 3.0)] {
            let v = segment_transform(p, q, z, None);
            let o = segment_oracle(p, q, z);
            assert!((v - o).norm() < 1e-10, "{z}: {v} vs {o}");
        }
    }

    #[test]
    fn segment_jump_across_support() {
        let (p, q) = (C64::new(0.0, 0.0), C64::new(2.0, 0.0));
        let x = 0.7;
        let rho = (PI * x / 2.0).sin().powi(2);
        let up = segment_transform(p, q, C64::new(x, 1e-9), None);
        let dn = segment_transform(p, q, C64::new(x, -1e-9), None);
        assert!(((up - dn) - 2.0 * PI * I * rho).norm() < 1e-6);
        let left = segment_transform(p, q, C64::new(x, 0.0), Some(Side::Left));
        assert!((left - up).norm() < 1e-6);
        let pv = segment_transform(p, q, C64::new(x, 0.0), None);
        assert!((pv - 0.5 * (up + dn)).norm() < 1e-6);
    }

    #[test]
    fn arc_matches_quadrature() {
        let (c, r, t0, t1) = (C64::new(0.2, -0.1), 0.8, -0.4, 2.9);
        for z in [C64::new(0.1, 0.2), C64::new(0.9, 0.5), C64::new(0.2, 0.65), C64::new(4.0, 0.0), C64::new(-0.7, -0.2)] {
            let mut g = |t: f64| r / (c + C64::from_polar(r, t) - z);
            let o = adaptive_1d(t0, t1, 1e-13, 50, &mut g).unwrap();
            let v = arc_transform(c, r, t0, t1, z).unwrap();
            assert!((v - o).norm() < 1e-10, "{z}: {v} vs {o}");
        }
    }

    #[test]
    fn arc_rejects_on_arc_query() {
        let c = C64::new(0.0, 0.0);
        assert!(arc_transform(c, 1.0, 0.0, 1.0, C64::from_polar(1.0, 0.5)).is_err());
        assert!(arc_transform(c, 1.0, 0.0, 1.0, C64::from_polar(1.0, 2.5)).is_ok());
    }

    #[test]
    fn annulus_is_difference_of_disks() {
        let c = C64::new(0.3, 0.1);
        let a = Carrier::Annulus { center: c, r_inner: 0.2, r_outer: 0.5 };
        for z in [C64::new(0.3, 0.15), C64::new(0.6, 0.1), C64::new(2.0, 2.0)] {
            let v = a.transform(z).unwrap();
            let d = disk_transform(c, 0.5, z) - disk_transform(c, 0.2, z);
            assert!((v - d).norm() < 1e-14);
        }
    }
}
