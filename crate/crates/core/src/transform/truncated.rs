//! Transforms truncated outside a disk, and carrier mass inside a disk.

use std::f64::consts::{PI, TAU};

use super::carrier::{arc_transform_unchecked, cell_transform, edge_term, segment_transform_parts, Carrier};
use super::measure::PlanarMeasure;
use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::quad::adaptive_1d;
use crate::C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Parameters `t1 < t2` where the line `a + t d` meets the circle `|w - z| = eps`.
fn line_circle(a: C64, d: C64, z: C64, eps: f64) -> Option<(f64, f64)> {
    let az = a - z;
    let qa = d.norm_sqr();
    let qb = (d.conj() * az).re;
    let qc = az.norm_sqr() - eps * eps;
    let disc = qb * qb - qa * qc;
    if disc <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some(((-qb - s) / qa, (-qb + s) / qa))
}

fn rect_corners(r: &Rect) -> [C64; 4] {
    [
        C64::new(r.x0, r.y0),
        C64::new(r.x1, r.y0),
        C64::new(r.x1, r.y1),
        C64::new(r.x0, r.y1),
    ]
}

/// Angles (about `z`) of the arcs of `|w - z| = eps` lying inside `r`, as
/// counter-clockwise intervals.
fn circle_arcs_in_rect(r: &Rect, z: C64, eps: f64) -> Vec<(f64, f64)> {
    let c = rect_corners(r);
    let mut angles = Vec::new();
    for k in 0..4 {
        let (a, b) = (c[k], c[(k + 1) % 4]);
        if let Some((t1, t2)) = line_circle(a, b - a, z, eps) {
            for t in [t1, t2] {
                if (0.0..=1.0).contains(&t) {
                    angles.push((a + (b - a) * t - z).arg());
                }
            }
        }
    }
    if angles.is_empty() {
        return Vec::new();
    }
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = angles.len();
    let mut arcs = Vec::new();
    for k in 0..n {
        let a = angles[k];
        let b = if k + 1 < n { angles[k + 1] } else { angles[0] + TAU };
        if b - a <= 0.0 {
            continue;
        }
        let m = z + C64::from_polar(eps, 0.5 * (a + b));
        if r.contains_point(m.re, m.im) {
            arcs.push((a, b));
        }
    }
    arcs
}

/// Transform of the area measure on `r` minus the disk `B(z, eps)`, at `z`.
fn cell_truncated(r: &Rect, z: C64, eps: f64) -> C64 {
    if r.dist_to_point(z.re, z.im) >= eps {
        return cell_transform(r, z);
    }
    let c = rect_corners(r);
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..4 {
        let (a, b) = (c[k], c[(k + 1) % 4]);
        let d = b - a;
        match line_circle(a, d, z, eps) {
            None => acc += edge_term(a, b, z),
            Some((t1, t2)) => {
                if t1 > 0.0 {
                    acc += edge_term(a, a + d * t1.min(1.0), z);
                }
                if t2 < 1.0 {
                    acc += edge_term(a + d * t2.max(0.0), b, z);
                }
            }
        }
    }
    // circle arcs inside the cell, traversed clockwise
    for (p1, p2) in circle_arcs_in_rect(r, z, eps) {
        acc += -eps * C64::from_polar(1.0, -p1) + eps * C64::from_polar(1.0, -p2);
    }
    acc / (2.0 * I)
}

/// Area of `r` inside `B(z, eps)`.
fn cell_area_in_ball(r: &Rect, z: C64, eps: f64) -> f64 {
    if r.dist_to_point(z.re, z.im) >= eps {
        return 0.0;
    }
    if r.far_dist_to_point(z.re, z.im) <= eps {
        return r.area();
    }
    let arcs = circle_arcs_in_rect(r, z, eps);
    let c = rect_corners(r);
    let mut twice = 0.0;
    let mut any_edge = false;
    for k in 0..4 {
        let (a, b) = (c[k] - z, c[(k + 1) % 4] - z);
        let d = b - a;
        if let Some((t1, t2)) = line_circle(a, d, C64::new(0.0, 0.0), eps) {
            let (s, e) = (t1.max(0.0), t2.min(1.0));
            if e > s {
                any_edge = true;
                let (p, q) = (a + d * s, a + d * e);
                twice += p.re * q.im - p.im * q.re;
            }
        }
    }
    if !any_edge && arcs.is_empty() {
        // disk strictly inside the cell
        return PI * eps * eps;
    }
    for (p1, p2) in arcs {
        twice += eps * eps * (p2 - p1);
    }
    0.5 * twice
}

fn lens_area(d: f64, r1: f64, r2: f64) -> f64 {
    if d >= r1 + r2 {
        return 0.0;
    }
    if d <= (r1 - r2).abs() {
        let r = r1.min(r2);
        return PI * r * r;
    }
    let a1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).clamp(-1.0, 1.0).acos();
    let a2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).clamp(-1.0, 1.0).acos();
    let k = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2);
    r1 * r1 * a1 + r2 * r2 * a2 - 0.5 * k.max(0.0).sqrt()
}

/// `\int_{D(c, rad) \cap B(z, eps)} dA(w) / (w - z)` by polar quadrature about `z`.
fn disk_local(c: C64, rad: f64, z: C64, eps: f64) -> Result<C64> {
    let v = z - c;
    let dist = v.norm();
    if dist >= rad + eps {
        return Ok(C64::new(0.0, 0.0));
    }
    // radial extent along direction theta: roots of r^2 + 2 r Re(e^{-i theta} v) + |v|^2 - rad^2
    let len = |th: f64| -> f64 {
        let b = (C64::from_polar(1.0, -th) * v).re;
        let disc = b * b - (dist * dist - rad * rad);
        if disc <= 0.0 {
            return 0.0;
        }
        let s = disc.sqrt();
        let (r1, r2) = ((-b - s).max(0.0), (-b + s).min(eps));
        (r2 - r1).max(0.0)
    };
    let mut breaks = vec![0.0, TAU];
    let phi = (-v).arg();
    if dist > rad {
        let t = (rad / dist).asin();
        breaks.push(phi - t);
        breaks.push(phi + t);
    }
    if dist > 0.0 && dist + eps > rad && (dist - eps).abs() < rad {
        let cosang = ((eps * eps + dist * dist - rad * rad) / (2.0 * eps * dist)).clamp(-1.0, 1.0);
        let t = cosang.acos();
        breaks.push(phi - t);
        breaks.push(phi + t);
    }
    let mut bs: Vec<f64> = breaks.iter().map(|b| b.rem_euclid(TAU)).collect();
    bs.push(TAU);
    bs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bs.dedup();
    let mut acc = C64::new(0.0, 0.0);
    for w in bs.windows(2) {
        let mut f = |th: f64| C64::from_polar(1.0, -th) * len(th);
        acc += adaptive_1d(w[0], w[1], 1e-13 * eps.max(1e-300), 40, &mut f)
            .map_err(|_| Error::Quadrature("polar clipping of a disk carrier".into()))?;
    }
    Ok(acc)
}

/// Parameter interval of `[0, L]` inside `B(z, eps)` for a segment.
fn segment_ball(p: C64, q: C64, z: C64, eps: f64) -> Option<(f64, f64)> {
    let l = (q - p).norm();
    let u = (q - p) / l;
    let zeta = (z - p) / u;
    let h2 = eps * eps - zeta.im * zeta.im;
    if h2 <= 0.0 {
        return None;
    }
    let h = h2.sqrt();
    let (a, b) = ((zeta.re - h).max(0.0), (zeta.re + h).min(l));
    if b > a {
        Some((a, b))
    } else {
        None
    }
}

/// Angle intervals (within `[t0, t1]`) of an arc that lie inside `B(z, eps)`.
fn arc_ball(c: C64, r: f64, t0: f64, t1: f64, z: C64, eps: f64) -> Vec<(f64, f64)> {
    let v = z - c;
    let d = v.norm();
    if d == 0.0 {
        return if r < eps { vec![(t0, t1)] } else { Vec::new() };
    }
    let cosa = (r * r + d * d - eps * eps) / (2.0 * r * d);
    if cosa >= 1.0 {
        return Vec::new();
    }
    if cosa <= -1.0 {
        return vec![(t0, t1)];
    }
    let a = cosa.acos();
    let phi = v.arg();
    let mut out = Vec::new();
    let kmin = ((t0 - phi - a) / TAU).floor() as i64 - 1;
    let kmax = ((t1 - phi + a) / TAU).ceil() as i64 + 1;
    for k in kmin..=kmax {
        let (lo, hi) = (phi - a + TAU * k as f64, phi + a + TAU * k as f64);
        let (s, e) = (lo.max(t0), hi.min(t1));
        if e > s {
            out.push((s, e));
        }
    }
    out
}

fn complement(t0: f64, t1: f64, inside: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut v = inside.to_vec();
    v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out = Vec::new();
    let mut cur = t0;
    for (s, e) in v {
        if s > cur {
            out.push((cur, s));
        }
        cur = cur.max(e);
    }
    if t1 > cur {
        out.push((cur, t1));
    }
    out
}

impl Carrier {
    /// `\int_{|w - z| > eps} d(carrier)(w) / (w - z)`.
    pub fn truncated_transform(&self, z: C64, eps: f64) -> Result<C64> {
        match *self {
            Carrier::Cell(r) => Ok(cell_truncated(&r, z, eps)),
            Carrier::Segment { p, q } => {
                let l = (q - p).norm();
                match segment_ball(p, q, z, eps) {
                    None => Ok(segment_transform_parts(p, q, z, &[(0.0, l)])),
                    Some((a, b)) => Ok(segment_transform_parts(p, q, z, &[(0.0, a), (b, l)])),
                }
            }
            Carrier::Arc { center, radius, theta0, theta1 } => {
                let inside = arc_ball(center, radius, theta0, theta1, z, eps);
                let mut acc = C64::new(0.0, 0.0);
                for (s, e) in complement(theta0, theta1, &inside) {
                    acc += arc_transform_unchecked(center, radius, s, e, z);
                }
                Ok(acc)
            }
            Carrier::Disk { center, radius } => {
                Ok(self.transform(z)? - disk_local(center, radius, z, eps)?)
            }
            Carrier::Annulus { center, r_inner, r_outer } => Ok(self.transform(z)?
                - disk_local(center, r_outer, z, eps)?
                + disk_local(center, r_inner, z, eps)?),
        }
    }

    /// Carrier mass inside the closed disk `B(z, eps)`.
    pub fn mass_in_ball(&self, z: C64, eps: f64) -> f64 {
        match *self {
            Carrier::Cell(r) => cell_area_in_ball(&r, z, eps),
            Carrier::Segment { p, q } => {
                let l = (q - p).norm();
                let prim = |s: f64| 0.5 * s - l * (2.0 * PI * s / l).sin() / (4.0 * PI);
                segment_ball(p, q, z, eps).map_or(0.0, |(a, b)| prim(b) - prim(a))
            }
            Carrier::Arc { center, radius, theta0, theta1 } => arc_ball(center, radius, theta0, theta1, z, eps)
                .iter()
                .map(|(s, e)| radius * (e - s))
                .sum(),
            Carrier::Disk { center, radius } => lens_area((z - center).norm(), radius, eps),
            Carrier::Annulus { center, r_inner, r_outer } => {
                let d = (z - center).norm();
                lens_area(d, r_outer, eps) - lens_area(d, r_inner, eps)
            }
        }
    }
}

impl PlanarMeasure {
    pub fn truncated_transform(&self, z: C64, eps: f64) -> Result<C64> {
        if !(eps > 0.0) {
            return Err(Error::InvalidMeasure(format!("truncation radius must be positive, got {eps}")));
        }
        let mut acc = C64::new(0.0, 0.0);
        for (c, w) in self.items() {
            acc += w * c.truncated_transform(z, eps)?;
        }
        Ok(acc)
    }

    /// `|mu|(B(z, eps))`.
    pub fn mass_in_ball(&self, z: C64, eps: f64) -> f64 {
        self.items().iter().map(|(c, w)| w.norm() * c.mass_in_ball(z, eps)).sum()
    }

    /// `max_k |C_{eps_k}(mu)(z)|` over the grid; a lower bound for the maximal transform.
    pub fn maximal_transform(&self, z: C64, eps_grid: &[f64]) -> Result<f64> {
        if eps_grid.is_empty() {
            return Err(Error::InvalidMeasure("empty truncation grid".into()));
        }
        let mut best = 0.0f64;
        for &e in eps_grid {
            best = best.max(self.truncated_transform(z, e)?.norm());
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{adaptive_1d, gauss, integrate_rect_singular};

    fn cell_truncated_oracle(r: &Rect, z: C64, eps: f64) -> C64 {
        // nested adaptive quadrature, split where the inner line crosses the circle
        let mut outer = |x: f64| {
            let mut inner = |y: f64| 1.0 / (C64::new(x, y) - z);
            let dx = x - z.re;
            if dx.abs() >= eps {
                return adaptive_1d(r.y0, r.y1, 1e-13, 50, &mut inner).unwrap();
            }
            let h = (eps * eps - dx * dx).sqrt();
            let (lo, hi) = ((z.im - h).clamp(r.y0, r.y1), (z.im + h).clamp(r.y0, r.y1));
            adaptive_1d(r.y0, lo, 1e-13, 50, &mut inner).unwrap()
                + adaptive_1d(hi, r.y1, 1e-13, 50, &mut inner).unwrap()
        };
        let mut xs = vec![r.x0, r.x1];
        for x in [z.re - eps, z.re + eps] {
            if x > r.x0 && x < r.x1 {
                xs.push(x);
            }
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.windows(2)
            .map(|w| adaptive_1d(w[0], w[1], 1e-11, 50, &mut outer).unwrap())
            .sum()
    }

    #[test]
    fn cell_truncation_matches_oracle() {
        let r = Rect::new(0.0, 0.0, 1.0, 1.0);
        for (z, eps) in [
            (C64::new(0.3, 0.4), 0.2),
            (C64::new(0.1, 0.5), 0.3),
            (C64::new(1.2, 0.5), 0.4),
            (C64::new(0.5, 0.5), 0.9),
        ] {
            let v = cell_truncated(&r, z, eps);
            let o = cell_truncated_oracle(&r, z, eps);
            assert!((v - o).norm() < 1e-9, "{z} {eps}: {v} vs {o}");
        }
    }

    #[test]
    fn cell_truncation_limits() {
        let r = Rect::new(0.0, 0.0, 1.0, 1.0);
        let z = C64::new(0.5, 0.5);
        assert!(cell_truncated(&r, z, 5.0).norm() < 1e-14);
        let far = C64::new(3.0, 1.0);
        assert!((cell_truncated(&r, far, 0.5) - cell_transform(&r, far)).norm() < 1e-15);
    }

    #[test]
    fn cell_area_in_ball_cases() {
        let r = Rect::new(0.0, 0.0, 1.0, 1.0);
        assert!((cell_area_in_ball(&r, C64::new(0.5, 0.5), 0.2) - PI * 0.04).abs() < 1e-14);
        assert!((cell_area_in_ball(&r, C64::new(0.0, 0.0), 0.5) - PI * 0.25 / 4.0).abs() < 1e-14);
        assert!((cell_area_in_ball(&r, C64::new(0.5, 0.0), 0.3) - PI * 0.09 / 2.0).abs() < 1e-14);
        assert!((cell_area_in_ball(&r, C64::new(0.5, 0.5), 2.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn disk_truncation_matches_cell_quadrature() {
        let c = Carrier::Disk { center: C64::new(0.0, 0.0), radius: 1.0 };
        let z = C64::new(0.6, 0.3);
        let eps = 0.7;
        let v = c.truncated_transform(z, eps).unwrap();
        // oracle: polar integral about z over the annulus eps < r, clipped to the disk
        let rule = gauss(40);
        let o = integrate_rect_singular(-1.0, 1.0, -1.0, 1.0, (z.re, z.im), &rule, |x, y| {
            let w = C64::new(x, y);
            if w.norm() <= 1.0 && (w - z).norm() > eps {
                1.0 / (w - z)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        assert!((v - o).norm() < 2e-2, "{v} vs {o}");
        // inside-out consistency: eps below the distance to the boundary keeps the local part radial
        let small = c.truncated_transform(C64::new(0.1, 0.0), 0.05).unwrap();
        assert!((small - c.transform(C64::new(0.1, 0.0)).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn segment_and_arc_mass_in_ball() {
        let s = Carrier::Segment { p: C64::new(0.0, 0.0), q: C64::new(2.0, 0.0) };
        assert!((s.mass_in_ball(C64::new(1.0, 0.0), 5.0) - 1.0).abs() < 1e-14);
        let a = Carrier::Arc { center: C64::new(0.0, 0.0), radius: 1.0, theta0: 0.0, theta1: PI };
        assert!((a.mass_in_ball(C64::new(0.0, 0.0), 2.0) - PI).abs() < 1e-14);
        let m = a.mass_in_ball(C64::new(1.0, 0.0), 2f64.sqrt());
        assert!((m - PI / 2.0).abs() < 1e-12, "{m}");
    }
}
