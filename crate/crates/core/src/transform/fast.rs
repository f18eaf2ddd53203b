//! Tile multipole evaluation of transforms of large cell measures.

use std::collections::BTreeMap;

use super::{Carrier, PlanarMeasure};
use crate::error::Result;
use crate::quad::gauss;
use crate::C64;

/// Number of Laurent terms kept per tile.
const ORDER: usize = 24;
/// A tile is expanded when the target is farther than this many tile radii.
const FAR: f64 = 3.0;

#[derive(Debug, Clone)]
struct Tile {
    center: C64,
    radius: f64,
    /// `int (w - center)^k dmu`, `k < ORDER`.
    moments: Vec<C64>,
    items: Vec<(Carrier, C64)>,
}

/// Evaluator for `C(mu)` that replaces distant tiles by truncated Laurent series.
#[derive(Debug, Clone)]
pub struct FastTransform {
    tiles: Vec<Tile>,
    /// Carriers evaluated directly everywhere (curves).
    direct: Vec<(Carrier, C64)>,
}

fn cell_moments(r: &crate::geometry::Rect, c: C64, w: C64, out: &mut [C64]) {
    let rule = gauss(13);
    for (x, wx) in rule.mapped(r.x0, r.x1) {
        for (y, wy) in rule.mapped(r.y0, r.y1) {
            let d = C64::new(x, y) - c;
            let mut p = w * (wx * wy);
            for m in out.iter_mut() {
                *m += p;
                p *= d;
            }
        }
    }
}

impl FastTransform {
    /// `tile` is the tile side; a few dozen carriers per tile works well.
    pub fn new(mu: &PlanarMeasure, tile: f64) -> Self {
        let mut groups: BTreeMap<(i64, i64), Vec<(Carrier, C64)>> = BTreeMap::new();
        let mut direct = Vec::new();
        for (c, w) in mu.items() {
            match c {
                Carrier::Cell(_) | Carrier::Disk { .. } | Carrier::Annulus { .. } => {
                    let a = c.anchor();
                    let key = ((a.re / tile).floor() as i64, (a.im / tile).floor() as i64);
                    groups.entry(key).or_default().push((*c, *w));
                }
                _ => direct.push((*c, *w)),
            }
        }
        let tiles = groups
            .into_values()
            .map(|items| {
                let bb = items.iter().map(|(c, _)| c.bbox()).reduce(|a, b| a.union(&b)).unwrap();
                let (cx, cy) = bb.center();
                let center = C64::new(cx, cy);
                let radius = 0.5 * bb.width().hypot(bb.height());
                let mut moments = vec![C64::new(0.0, 0.0); ORDER];
                for (c, w) in &items {
                    match *c {
                        Carrier::Cell(r) => cell_moments(&r, center, *w, &mut moments),
                        // analytic powers average to their value at the center
                        Carrier::Disk { center: o, .. } | Carrier::Annulus { center: o, .. } => {
                            let mut p = *w * c.mass();
                            for m in moments.iter_mut() {
                                *m += p;
                                p *= o - center;
                            }
                        }
                        _ => unreachable!(),
                    }
                }
                Tile { center, radius, moments, items }
            })
            .collect();
        FastTransform { tiles, direct }
    }

    pub fn eval(&self, z: C64) -> Result<C64> {
        let mut acc = C64::new(0.0, 0.0);
        for t in &self.tiles {
            let d = z - t.center;
            if d.norm() > FAR * t.radius {
                // -sum m_k / d^(k+1) by Horner in 1/d
                let inv = 1.0 / d;
                let mut s = C64::new(0.0, 0.0);
                for m in t.moments.iter().rev() {
                    s = s * inv + m;
                }
                acc -= s * inv;
            } else {
                for (c, w) in &t.items {
                    acc += w * c.transform(z)?;
                }
            }
        }
        for (c, w) in &self.direct {
            acc += w * c.transform(z)?;
        }
        Ok(acc)
    }

    pub fn eval_many(&self, zs: &[C64]) -> Result<Vec<C64>> {
        zs.iter().map(|&z| self.eval(z)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;

    #[test]
    fn agrees_with_direct_sum() {
        let h = 1.0 / 64.0;
        let mut items = Vec::new();
        for i in 0..40 {
            for j in 0..12 {
                let r = Rect::new(i as f64 * h, j as f64 * h, (i + 1) as f64 * h, (j + 1) as f64 * h);
                items.push((Carrier::Cell(r), C64::new(1.0 + 0.1 * (i % 7) as f64, -0.05 * (j % 3) as f64)));
            }
        }
        items.push((Carrier::Disk { center: C64::new(0.3, 0.5), radius: 0.05 }, C64::new(2.0, 0.0)));
        items.push((Carrier::Segment { p: C64::new(0.0, 0.6), q: C64::new(0.4, 0.7) }, C64::new(0.5, 0.0)));
        let mu = PlanarMeasure::complex(items).unwrap();
        let fast = FastTransform::new(&mu, 4.0 * h);
        let mut worst = 0.0f64;
        for k in 0..200 {
            let z = C64::new(-0.1 + 0.0041 * k as f64, -0.05 + 0.0043 * ((k * 37) % 200) as f64);
            worst = worst.max((fast.eval(z).unwrap() - mu.transform(z).unwrap()).norm());
        }
        assert!(worst < 1e-11, "{worst}");
    }
}
