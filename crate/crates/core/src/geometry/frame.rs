//! Dyadic squares and a smooth partition of unity subordinate to their doubles.

use std::sync::OnceLock;

use super::shapes::Rect;
use crate::C64;

/// Half-width of the transition band, in units of the square side.
pub const TRANSITION: f64 = 0.375;

/// Index of the dyadic square `[i delta, (i+1) delta] x [j delta, (j+1) delta]`.
pub type SquareIndex = (i64, i64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicFrame {
    pub level: i32,
    pub delta: f64,
}

/// Value and derivative of the one-dimensional window at offset `t` (in units
/// of delta) from the square center.
fn window(t: f64) -> (f64, f64) {
    let s = TRANSITION;
    let u = (0.5 + s - t.abs()) / (2.0 * s);
    if u >= 1.0 {
        return (1.0, 0.0);
    }
    if u <= 0.0 {
        return (0.0, 0.0);
    }
    let v = u * u * (3.0 - 2.0 * u);
    let dv = 6.0 * u * (1.0 - u) * (-t.signum() / (2.0 * s));
    (v, dv)
}

/// Smooth bump `phi(z) = w((x - cx) / d) w((y - cy) / d)`: equal to 1 on the central
/// square of side `(1 - 2s) d` and supported in the square of side `(1 + 2s) d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: C64,
    pub delta: f64,
}

impl Bump {
    pub fn eval(&self, z: C64) -> (f64, C64) {
        let (wx, dwx) = window((z.re - self.center.re) / self.delta);
        let (wy, dwy) = window((z.im - self.center.im) / self.delta);
        let dx = dwx * wy / self.delta;
        let dy = wx * dwy / self.delta;
        (wx * wy, C64::new(0.5 * dx, 0.5 * dy))
    }

    pub fn support(&self) -> Rect {
        let r = (0.5 + TRANSITION) * self.delta;
        Rect::new(self.center.re - r, self.center.im - r, self.center.re + r, self.center.im + r)
    }

    /// Axis breakpoints: support edges and plateau edges.
    pub fn breaks(&self) -> ([f64; 4], [f64; 4]) {
        let c = self.center;
        let a = (0.5 - TRANSITION) * self.delta;
        let b = (0.5 + TRANSITION) * self.delta;
        (
            [c.re - b, c.re - a, c.re + a, c.re + b],
            [c.im - b, c.im - a, c.im + a, c.im + b],
        )
    }
}

impl DyadicFrame {
    pub fn bump_of(&self, q: SquareIndex) -> Bump {
        Bump {
            center: self.center(q),
            delta: self.delta,
        }
    }

    pub fn new(level: i32) -> Self {
        DyadicFrame {
            level,
            delta: 0.5f64.powi(level),
        }
    }

    pub fn from_delta(delta: f64) -> Self {
        let level = (-delta.log2()).round() as i32;
        DyadicFrame::new(level)
    }

    pub fn center(&self, q: SquareIndex) -> C64 {
        C64::new((q.0 as f64 + 0.5) * self.delta, (q.1 as f64 + 0.5) * self.delta)
    }

    pub fn square(&self, q: SquareIndex) -> Rect {
        let d = self.delta;
        Rect::new(q.0 as f64 * d, q.1 as f64 * d, (q.0 + 1) as f64 * d, (q.1 + 1) as f64 * d)
    }

    /// Concentric square with twice the side.
    pub fn double(&self, q: SquareIndex) -> Rect {
        let d = self.delta;
        let c = self.center(q);
        Rect::new(c.re - d, c.im - d, c.re + d, c.im + d)
    }

    /// Closed support of the bump of square `q`.
    pub fn support(&self, q: SquareIndex) -> Rect {
        let r = (0.5 + TRANSITION) * self.delta;
        let c = self.center(q);
        Rect::new(c.re - r, c.im - r, c.re + r, c.im + r)
    }

    /// Breakpoints of the bump along each axis (support edges and plateau edges).
    pub fn breaks(&self, q: SquareIndex) -> ([f64; 4], [f64; 4]) {
        self.bump_of(q).breaks()
    }

    /// `(phi, dbar phi)` of square `q` at `z`.
    pub fn bump(&self, q: SquareIndex, z: C64) -> (f64, C64) {
        self.bump_of(q).eval(z)
    }

    /// Squares whose bump may be nonzero at `z`.
    pub fn squares_near(&self, z: C64) -> Vec<SquareIndex> {
        let r = 0.5 + TRANSITION;
        let range = |x: f64| {
            let t = x / self.delta - 0.5;
            ((t - r).ceil() as i64)..=((t + r).floor() as i64)
        };
        let mut out = Vec::with_capacity(4);
        for i in range(z.re) {
            for j in range(z.im) {
                out.push((i, j));
            }
        }
        out
    }

    /// All `(square, phi, dbar phi)` with nonzero contribution at `z`.
    pub fn partition_of_unity(&self, z: C64) -> Vec<(SquareIndex, f64, C64)> {
        self.squares_near(z)
            .into_iter()
            .map(|q| {
                let (p, d) = self.bump(q, z);
                (q, p, d)
            })
            .filter(|(_, p, d)| *p != 0.0 || d.norm() != 0.0)
            .collect()
    }

    /// Squares whose bump support meets `r`.
    pub fn squares_meeting(&self, r: &Rect) -> Vec<SquareIndex> {
        let m = 0.5 + TRANSITION;
        let lo = |x: f64| ((x / self.delta - 0.5 - m).floor() as i64) + 1;
        let hi = |x: f64| ((x / self.delta - 0.5 + m).ceil() as i64) - 1;
        let mut out = Vec::new();
        for j in lo(r.y0)..=hi(r.y1) {
            for i in lo(r.x0)..=hi(r.x1) {
                out.push((i, j));
            }
        }
        out
    }

    /// `sup |dbar phi| * delta`, independent of the level.
    pub fn dbar_constant() -> f64 {
        static C: OnceLock<f64> = OnceLock::new();
        *C.get_or_init(|| {
            let f = DyadicFrame::new(0);
            let q = (0, 0);
            let n = 600;
            let r = 0.5 + TRANSITION;
            let mut best = 0.0f64;
            for a in 0..=n {
                for b in 0..=n {
                    let z = C64::new(0.5 + r * a as f64 / n as f64, 0.5 + r * b as f64 / n as f64);
                    best = best.max(f.bump(q, z).1.norm());
                }
            }
            best
        })
    }

    /// `sup |dbar phi|` at this level.
    pub fn dbar_bound(&self) -> f64 {
        Self::dbar_constant() / self.delta
    }
}
