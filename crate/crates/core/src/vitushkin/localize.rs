use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Bump, DyadicFrame, Rect, SquareIndex};
use crate::quad::{breakpoints, gauss, integrate_rect, integrate_rect_singular, GaussRule};
use crate::C64;

/// A complex function of one complex variable.
pub type Field = Arc<dyn Fn(C64) -> C64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalizeOptions {
    /// Gauss order per panel.
    pub order: usize,
    /// Maximum panel side in units of delta.
    pub panel: f64,
    /// Pieces whose sup estimate and `|c1|` both fall below this are dropped.
    pub drop_tol: f64,
    /// Extra axis breakpoints where the field is not smooth (e.g. cell edges).
    pub breaks_x: Vec<f64>,
    pub breaks_y: Vec<f64>,
}

impl Default for LocalizeOptions {
    fn default() -> Self {
        LocalizeOptions {
            order: 12,
            panel: 0.25,
            drop_tol: 1e-13,
            breaks_x: Vec::new(),
            breaks_y: Vec::new(),
        }
    }
}

/// `f = T_phi F` for one square of the frame.
#[derive(Clone)]
pub struct LocalPiece {
    pub square: SquareIndex,
    pub bump: Bump,
    pub c1: C64,
    /// Second Laurent coefficient about the square center.
    pub c2: C64,
    /// Max of `|f|` on the circle of radius `2 delta` about the center.
    pub sup_estimate: f64,
    field: Field,
    panels: Arc<Vec<Rect>>,
    /// Quadrature nodes and weights `w F dbar(phi)`.
    nodes: Vec<(C64, C64)>,
    order: usize,
}

impl std::fmt::Debug for LocalPiece {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LocalPiece")
            .field("square", &self.square)
            .field("c1", &self.c1)
            .field("c2", &self.c2)
            .field("sup_estimate", &self.sup_estimate)
            .finish()
    }
}

fn panels_of(bump: &Bump, opts: &LocalizeOptions) -> Vec<Rect> {
    let (bx, by) = bump.breaks();
    let xs = breakpoints(bx[0], bx[3], bx.iter().copied().chain(opts.breaks_x.iter().copied()));
    let ys = breakpoints(by[0], by[3], by.iter().copied().chain(opts.breaks_y.iter().copied()));
    let max_side = opts.panel * bump.delta;
    let mut out = Vec::new();
    for wx in xs.windows(2) {
        for wy in ys.windows(2) {
            let (x0, x1, y0, y1) = (wx[0], wx[1], wy[0], wy[1]);
            // dbar phi vanishes on the plateau
            let mx = 0.5 * (x0 + x1);
            let my = 0.5 * (y0 + y1);
            if mx > bx[1] && mx < bx[2] && my > by[1] && my < by[2] {
                continue;
            }
            let nx = ((x1 - x0) / max_side).ceil().max(1.0) as usize;
            let ny = ((y1 - y0) / max_side).ceil().max(1.0) as usize;
            for i in 0..nx {
                for j in 0..ny {
                    out.push(Rect::new(
                        x0 + (x1 - x0) * i as f64 / nx as f64,
                        y0 + (y1 - y0) * j as f64 / ny as f64,
                        x0 + (x1 - x0) * (i + 1) as f64 / nx as f64,
                        y0 + (y1 - y0) * (j + 1) as f64 / ny as f64,
                    ));
                }
            }
        }
    }
    out
}

impl LocalPiece {
    pub fn new(field: Field, frame: &DyadicFrame, square: SquareIndex, opts: &LocalizeOptions) -> Result<Self> {
        let bump = frame.bump_of(square);
        let panels = panels_of(&bump, opts);
        let rule = gauss(opts.order);
        let mut nodes = Vec::with_capacity(panels.len() * rule.len() * rule.len());
        for p in &panels {
            for (x, wx) in rule.mapped(p.x0, p.x1) {
                for (y, wy) in rule.mapped(p.y0, p.y1) {
                    let z = C64::new(x, y);
                    let v = field(z) * bump.eval(z).1 * (wx * wy);
                    if !v.is_finite() {
                        return Err(Error::Quadrature(format!("field is not finite at {z}")));
                    }
                    nodes.push((z, v));
                }
            }
        }
        let s = bump.center;
        let mut c1 = C64::new(0.0, 0.0);
        let mut c2 = C64::new(0.0, 0.0);
        for (z, v) in &nodes {
            c1 -= v / PI;
            c2 -= v * (z - s) / PI;
        }
        let mut piece = LocalPiece {
            square,
            bump,
            c1,
            c2,
            sup_estimate: 0.0,
            field,
            panels: Arc::new(panels),
            nodes,
            order: opts.order,
        };
        piece.sup_estimate = (0..64)
            .map(|k| piece.eval_far(s + C64::from_polar(2.0 * bump.delta, TAU * k as f64 / 64.0)).norm())
            .fold(0.0, f64::max);
        Ok(piece)
    }

    pub fn center(&self) -> C64 {
        self.bump.center
    }

    pub fn support(&self) -> Rect {
        self.bump.support()
    }

    fn eval_far(&self, lam: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (z, v) in &self.nodes {
            acc += v / (z - lam);
        }
        acc / PI
    }

    /// `T_phi F` at `lam`.
    pub fn eval(&self, lam: C64) -> C64 {
        if self.support().dist_to_point(lam.re, lam.im) >= 0.5 * self.bump.delta {
            return self.eval_far(lam);
        }
        let fl = (self.field)(lam);
        let rule = gauss(self.order);
        let mut acc = C64::new(0.0, 0.0);
        for p in self.panels.iter() {
            acc += self.near_panel(p, lam, fl, &rule, 0);
        }
        acc / PI
    }

    fn near_panel(&self, p: &Rect, lam: C64, fl: C64, rule: &GaussRule, depth: usize) -> C64 {
        let g = |x: f64, y: f64| {
            let z = C64::new(x, y);
            let d = z - lam;
            if d.norm_sqr() == 0.0 {
                return C64::new(0.0, 0.0);
            }
            ((self.field)(z) - fl) * self.bump.eval(z).1 / d
        };
        if p.contains_point(lam.re, lam.im) {
            return integrate_rect_singular(p.x0, p.x1, p.y0, p.y1, (lam.re, lam.im), rule, g);
        }
        let d = p.dist_to_point(lam.re, lam.im);
        let side = p.width().max(p.height());
        if side <= d || depth >= 16 {
            return integrate_rect(p.x0, p.x1, p.y0, p.y1, rule, g);
        }
        let (cx, cy) = p.center();
        let mut acc = C64::new(0.0, 0.0);
        for q in [
            Rect::new(p.x0, p.y0, cx, cy),
            Rect::new(cx, p.y0, p.x1, cy),
            Rect::new(p.x0, cy, cx, p.y1),
            Rect::new(cx, cy, p.x1, p.y1),
        ] {
            acc += self.near_panel(&q, lam, fl, rule, depth + 1);
        }
        acc
    }

    /// Max of `|f|` over an `n x n` grid on the support and a ring at `2 delta`.
    pub fn sup_on_grid(&self, n: usize) -> f64 {
        let r = self.support();
        let n = n.max(2);
        let mut m = self.sup_estimate;
        for i in 0..n {
            for j in 0..n {
                let z = C64::new(
                    r.x0 + r.width() * i as f64 / (n - 1) as f64,
                    r.y0 + r.height() * j as f64 / (n - 1) as f64,
                );
                m = m.max(self.eval(z).norm());
            }
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct Localization {
    pub frame: DyadicFrame,
    pub pieces: Vec<LocalPiece>,
    pub dropped: usize,
}

impl Localization {
    /// `sum f_ij` at `lam`.
    pub fn eval(&self, lam: C64) -> C64 {
        self.pieces.iter().map(|p| p.eval(lam)).sum()
    }
}

/// Pieces of `F` for every square whose bump meets `region`; `F` must be analytic
/// outside `region` for the pieces to sum to `F`.
pub fn localize(field: Field, frame: &DyadicFrame, region: &Rect, opts: &LocalizeOptions) -> Result<Localization> {
    let mut pieces = Vec::new();
    let mut dropped = 0;
    for q in frame.squares_meeting(region) {
        let p = LocalPiece::new(field.clone(), frame, q, opts)?;
        if p.sup_estimate <= opts.drop_tol && p.c1.norm() <= opts.drop_tol {
            dropped += 1;
        } else {
            pieces.push(p);
        }
    }
    Ok(Localization {
        frame: *frame,
        pieces,
        dropped,
    })
}

/// First two Laurent coefficients of `g` about `a` by the trapezoid rule on
/// `|z - a| = radius`.
pub fn laurent_coeffs(g: impl Fn(C64) -> C64, a: C64, radius: f64, n: usize) -> Result<(C64, C64)> {
    if !(radius > 0.0) {
        return Err(Error::Quadrature("contour radius must be positive".into()));
    }
    let mut c1 = C64::new(0.0, 0.0);
    let mut c2 = C64::new(0.0, 0.0);
    for k in 0..n {
        let w = C64::from_polar(radius, TAU * k as f64 / n as f64);
        let v = g(a + w);
        if !v.is_finite() {
            return Err(Error::Quadrature("contour meets a singularity".into()));
        }
        c1 += v * w;
        c2 += v * w * w;
    }
    Ok((c1 / n as f64, c2 / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::Carrier;

    #[test]
    fn laurent_of_simple_poles() {
        let a = C64::new(0.3, -0.2);
        let (c1, c2) = laurent_coeffs(|z| 1.0 / (z - a), a, 1.0, 64).unwrap();
        assert!((c1 - 1.0).norm() < 1e-12 && c2.norm() < 1e-12);
        let (c1, c2) = laurent_coeffs(|z| 1.0 / ((z - a) * (z - a)), a, 1.0, 64).unwrap();
        assert!(c1.norm() < 1e-12 && (c2 - 1.0).norm() < 1e-12);
    }

    #[test]
    fn entire_field_has_vanishing_pieces() {
        let f: Field = Arc::new(|z: C64| z * z);
        let frame = DyadicFrame::new(2);
        let loc = localize(f, &frame, &Rect::new(-0.5, -0.5, 0.5, 0.5), &LocalizeOptions::default()).unwrap();
        for p in &loc.pieces {
            assert!(p.sup_estimate <= 1e-8 && p.c1.norm() <= 1e-8, "{p:?}");
            assert!(p.eval(p.center()).norm() <= 1e-8);
        }
    }

    #[test]
    fn area_and_contour_coefficients_agree() {
        let cell = Carrier::Cell(Rect::new(0.05, 0.02, 0.2, 0.1));
        let f: Field = Arc::new(move |z| cell.transform(z).unwrap());
        let frame = DyadicFrame::new(2);
        let opts = LocalizeOptions {
            breaks_x: vec![0.05, 0.2],
            breaks_y: vec![0.02, 0.1],
            ..Default::default()
        };
        let p = LocalPiece::new(f, &frame, (0, 0), &opts).unwrap();
        let (c1, c2) = laurent_coeffs(|z| p.eval(z), p.center(), 3.0 * frame.delta, 256).unwrap();
        assert!((c1 - p.c1).norm() < 1e-6, "{c1} {}", p.c1);
        assert!((c2 - p.c2).norm() < 1e-6, "{c2} {}", p.c2);
    }

    #[test]
    fn pieces_reconstruct_a_compact_field() {
        // C^3 field supported in the unit disk
        let f: Field = Arc::new(|z: C64| {
            let r = 1.0 - z.norm_sqr();
            if r <= 0.0 {
                C64::new(0.0, 0.0)
            } else {
                r.powi(4) * C64::new(1.0, 2.0) * z.conj()
            }
        });
        let frame = DyadicFrame::new(2);
        let loc = localize(f.clone(), &frame, &Rect::new(-1.0, -1.0, 1.0, 1.0), &LocalizeOptions::default()).unwrap();
        let mut worst = 0.0f64;
        for i in 0..9 {
            for j in 0..9 {
                let z = C64::new(-1.1 + 0.27 * i as f64, -1.05 + 0.26 * j as f64);
                worst = worst.max((loc.eval(z) - f(z)).norm());
            }
        }
        assert!(worst < 1e-6, "{worst}");
    }
}
