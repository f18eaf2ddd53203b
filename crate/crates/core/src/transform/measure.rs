//! Weighted sums of carriers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::carrier::Carrier;
use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::C64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarMeasure {
    items: Vec<(Carrier, C64)>,
    positive: bool,
}

impl Default for PlanarMeasure {
    fn default() -> Self {
        PlanarMeasure::zero()
    }
}

impl PlanarMeasure {
    pub fn zero() -> Self {
        PlanarMeasure {
            items: Vec::new(),
            positive: true,
        }
    }

    /// Positive measure; rejects negative or non-finite weights and degenerate carriers.
    pub fn positive(items: Vec<(Carrier, f64)>) -> Result<Self> {
        let mut out = Vec::with_capacity(items.len());
        for (c, w) in items {
            c.validate()?;
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidMeasure(format!("weight {w} is not a nonnegative number")));
            }
            if w > 0.0 {
                out.push((c, C64::new(w, 0.0)));
            }
        }
        Ok(PlanarMeasure { items: out, positive: true })
    }

    pub fn complex(items: Vec<(Carrier, C64)>) -> Result<Self> {
        let mut out = Vec::with_capacity(items.len());
        let mut positive = true;
        for (c, w) in items {
            c.validate()?;
            if !w.is_finite() {
                return Err(Error::InvalidMeasure(format!("weight {w} is not finite")));
            }
            if w.norm() > 0.0 {
                positive &= w.im == 0.0 && w.re > 0.0;
                out.push((c, w));
            }
        }
        Ok(PlanarMeasure { items: out, positive })
    }

    pub fn items(&self) -> &[(Carrier, C64)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_positive(&self) -> bool {
        self.positive
    }

    /// True when every carrier has a transform continuous on the plane.
    pub fn has_continuous_transform(&self) -> bool {
        self.items.iter().all(|(c, _)| c.is_continuous())
    }

    /// `mu(C)`.
    pub fn mass(&self) -> C64 {
        self.items.iter().map(|(c, w)| w * c.mass()).sum()
    }

    /// `int (w - s) dmu(w)`.
    pub fn first_moment(&self, s: C64) -> C64 {
        self.items.iter().map(|(c, w)| w * c.first_moment(s)).sum()
    }

    pub fn total_variation(&self) -> f64 {
        self.items.iter().map(|(c, w)| w.norm() * c.mass()).sum()
    }

    pub fn scaled(&self, s: C64) -> PlanarMeasure {
        if s.norm() == 0.0 {
            return PlanarMeasure::zero();
        }
        PlanarMeasure {
            items: self.items.iter().map(|(c, w)| (*c, w * s)).collect(),
            positive: self.positive && s.im == 0.0 && s.re > 0.0,
        }
    }

    pub fn plus(&self, other: &PlanarMeasure) -> PlanarMeasure {
        let mut items = self.items.clone();
        items.extend_from_slice(&other.items);
        PlanarMeasure {
            items,
            positive: self.positive && other.positive,
        }
    }

    /// Keeps the carriers selected by `keep`.
    pub fn filter(&self, keep: impl Fn(&Carrier) -> bool) -> PlanarMeasure {
        PlanarMeasure {
            items: self.items.iter().filter(|(c, _)| keep(c)).copied().collect(),
            positive: self.positive,
        }
    }

    /// Multiplies each carrier weight by `f(carrier)`; used for piecewise-constant densities.
    pub fn reweighted(&self, f: impl Fn(&Carrier) -> f64) -> PlanarMeasure {
        let items: Vec<_> = self
            .items
            .iter()
            .map(|(c, w)| (*c, w * f(c)))
            .filter(|(_, w)| w.norm() > 0.0)
            .collect();
        PlanarMeasure {
            items,
            positive: self.positive,
        }
    }

    pub fn support_bbox(&self) -> Option<Rect> {
        self.items.iter().map(|(c, _)| c.bbox()).reduce(|a, b| a.union(&b))
    }

    pub fn diameter(&self) -> f64 {
        self.support_bbox()
            .map(|r| r.width().hypot(r.height()))
            .unwrap_or(0.0)
    }

    pub fn transform(&self, z: C64) -> Result<C64> {
        let mut acc = C64::new(0.0, 0.0);
        for (c, w) in &self.items {
            acc += w * c.transform(z)?;
        }
        Ok(acc)
    }

    /// Merges carriers with identical geometry and fuses runs of equal-weight cells
    /// into larger rectangles. The measure is unchanged.
    pub fn consolidate(&self) -> PlanarMeasure {
        let mut cells: BTreeMap<(u64, u64, u64, u64, u64), Vec<(f64, f64)>> = BTreeMap::new();
        let mut others: Vec<(Carrier, C64)> = Vec::new();
        let mut cell_weights: BTreeMap<[u64; 4], C64> = BTreeMap::new();
        for (c, w) in &self.items {
            match c {
                Carrier::Cell(r) => {
                    *cell_weights
                        .entry([r.x0.to_bits(), r.y0.to_bits(), r.x1.to_bits(), r.y1.to_bits()])
                        .or_insert(C64::new(0.0, 0.0)) += w;
                }
                _ => match others.iter_mut().find(|(o, _)| o == c) {
                    Some((_, ow)) => *ow += w,
                    None => others.push((*c, *w)),
                },
            }
        }
        // horizontal runs keyed by (weight, row)
        for (k, w) in &cell_weights {
            let r = [f64::from_bits(k[0]), f64::from_bits(k[1]), f64::from_bits(k[2]), f64::from_bits(k[3])];
            cells
                .entry((w.re.to_bits(), w.im.to_bits(), k[1], k[3], 0))
                .or_default()
                .push((r[0], r[2]));
        }
        let mut runs: BTreeMap<(u64, u64, u64, u64), Vec<(f64, f64)>> = BTreeMap::new();
        for ((wr, wi, y0, y1, _), mut xs) in cells {
            xs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut cur = xs[0];
            for &(a, b) in &xs[1..] {
                if a == cur.1 {
                    cur.1 = b;
                } else {
                    runs.entry((wr, wi, cur.0.to_bits(), cur.1.to_bits())).or_default().push((f64::from_bits(y0), f64::from_bits(y1)));
                    cur = (a, b);
                }
            }
            runs.entry((wr, wi, cur.0.to_bits(), cur.1.to_bits())).or_default().push((f64::from_bits(y0), f64::from_bits(y1)));
        }
        let mut items = Vec::new();
        for ((wr, wi, x0, x1), mut ys) in runs {
            let w = C64::new(f64::from_bits(wr), f64::from_bits(wi));
            let (x0, x1) = (f64::from_bits(x0), f64::from_bits(x1));
            ys.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut cur = ys[0];
            for &(a, b) in &ys[1..] {
                if a == cur.1 {
                    cur.1 = b;
                } else {
                    items.push((Carrier::cell(x0, cur.0, x1, cur.1), w));
                    cur = (a, b);
                }
            }
            items.push((Carrier::cell(x0, cur.0, x1, cur.1), w));
        }
        items.extend(others);
        items.retain(|(_, w)| w.norm() > 0.0);
        PlanarMeasure {
            items,
            positive: self.positive,
        }
    }

    /// Weighted point cloud approximating the measure: cell and disk carriers are
    /// split into at most `per_carrier` sub-cells, curves into Gauss nodes.
    pub fn discretize(&self, per_side: usize) -> Vec<(C64, C64)> {
        let n = per_side.max(1);
        let mut pts = Vec::new();
        for (c, w) in &self.items {
            match *c {
                Carrier::Cell(r) => {
                    let (dx, dy) = (r.width() / n as f64, r.height() / n as f64);
                    for a in 0..n {
                        for b in 0..n {
                            let z = C64::new(r.x0 + (a as f64 + 0.5) * dx, r.y0 + (b as f64 + 0.5) * dy);
                            pts.push((z, w * dx * dy));
                        }
                    }
                }
                Carrier::Segment { p, q } => {
                    let rule = crate::quad::gauss(n.max(2));
                    let start = pts.len();
                    let mut raw = 0.0;
                    for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                        let s = 0.5 * (1.0 + x);
                        let dens = 0.5 * wt * (std::f64::consts::PI * s).sin().powi(2);
                        raw += dens;
                        pts.push((p + (q - p) * s, C64::new(dens, 0.0)));
                    }
                    // renormalize so the point masses carry the exact carrier mass
                    let scale = w * c.mass() / raw;
                    for pt in &mut pts[start..] {
                        pt.1 *= scale;
                    }
                }
                Carrier::Arc { center, radius, theta0, theta1 } => {
                    let rule = crate::quad::gauss(n.max(2));
                    let h = 0.5 * (theta1 - theta0);
                    for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                        let t = theta0 + h * (1.0 + x);
                        pts.push((center + C64::from_polar(radius, t), w * wt * h * radius));
                    }
                }
                Carrier::Disk { center, radius } => polar_points(center, 0.0, radius, n, *w, &mut pts),
                Carrier::Annulus { center, r_inner, r_outer } => {
                    polar_points(center, r_inner, r_outer, n, *w, &mut pts)
                }
            }
        }
        pts
    }
}

fn polar_points(c: C64, r0: f64, r1: f64, n: usize, w: C64, out: &mut Vec<(C64, C64)>) {
    let nt = 4 * n;
    for a in 0..n {
        let (ra, rb) = (r0 + (r1 - r0) * a as f64 / n as f64, r0 + (r1 - r0) * (a + 1) as f64 / n as f64);
        let area = std::f64::consts::PI * (rb * rb - ra * ra) / nt as f64;
        let rm = (0.5 * (ra * ra + rb * rb)).sqrt();
        for t in 0..nt {
            let th = std::f64::consts::TAU * (t as f64 + 0.5) / nt as f64;
            out.push((c + C64::from_polar(rm, th), w * area));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn consolidate_preserves_transform() {
        let h = 0.1;
        let mut items = Vec::new();
        for i in 0..5 {
            for j in 0..3 {
                let w = if i < 3 { 1.0 } else { 2.0 };
                items.push((
                    Carrier::cell(i as f64 * h, j as f64 * h, (i + 1) as f64 * h, (j + 1) as f64 * h),
                    w,
                ));
            }
        }
        let m = PlanarMeasure::positive(items).unwrap();
        let c = m.consolidate();
        assert_eq!(c.len(), 2);
        for z in [C64::new(0.13, 0.05), C64::new(2.0, -1.0), C64::new(0.5, 0.3)] {
            assert!((m.transform(z).unwrap() - c.transform(z).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn negative_weight_rejected() {
        assert!(PlanarMeasure::positive(vec![(Carrier::cell(0.0, 0.0, 1.0, 1.0), -1.0)]).is_err());
    }

    #[test]
    fn degenerate_carrier_rejected() {
        let atom = Carrier::cell(0.5, 0.5, 0.5, 0.5);
        assert!(matches!(
            PlanarMeasure::positive(vec![(atom, 1.0)]),
            Err(Error::InvalidMeasure(_))
        ));
    }

    #[test]
    fn discretize_preserves_mass() {
        let m = PlanarMeasure::positive(vec![
            (Carrier::cell(0.0, 0.0, 1.0, 2.0), 0.5),
            (Carrier::Segment { p: C64::new(0.0, 0.0), q: C64::new(3.0, 4.0) }, 2.0),
            (Carrier::Disk { center: C64::new(5.0, 5.0), radius: 0.5 }, 1.0),
        ])
        .unwrap();
        let total: C64 = m.discretize(6).iter().map(|(_, w)| w).sum();
        assert!((total - m.mass()).norm() < 1e-12);
    }
}
