//! Exact set descriptions and their cell-coverage classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn union(&self, o: &Rect) -> Rect {
        Rect::new(self.x0.min(o.x0), self.y0.min(o.y0), self.x1.max(o.x1), self.y1.max(o.y1))
    }

    pub fn inflate(&self, m: f64) -> Rect {
        Rect::new(self.x0 - m, self.y0 - m, self.x1 + m, self.y1 + m)
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    /// Euclidean distance from a point to the rectangle (0 inside).
    pub fn dist_to_point(&self, x: f64, y: f64) -> f64 {
        let dx = (self.x0 - x).max(0.0).max(x - self.x1);
        let dy = (self.y0 - y).max(0.0).max(y - self.y1);
        dx.hypot(dy)
    }

    /// Largest distance from a point to the rectangle's corners.
    pub fn far_dist_to_point(&self, x: f64, y: f64) -> f64 {
        let dx = (x - self.x0).abs().max((x - self.x1).abs());
        let dy = (y - self.y0).abs().max((y - self.y1).abs());
        dx.hypot(dy)
    }

    pub fn intersects_interior(&self, o: &Rect) -> bool {
        self.x0 < o.x1 && o.x0 < self.x1 && self.y0 < o.y1 && o.y0 < self.y1
    }

    pub fn contains_rect(&self, o: &Rect) -> bool {
        o.x0 >= self.x0 && o.x1 <= self.x1 && o.y0 >= self.y0 && o.y1 <= self.y1
    }
}

/// How much of a cell a set covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cover {
    Full,
    Empty,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskSpec {
    pub center: [f64; 2],
    pub radius: f64,
}

impl DiskSpec {
    fn cover(&self, r: &Rect) -> Cover {
        disk_cover(self.center, self.radius, r)
    }
}

/// A lattice of tiny removed disks, finer than the grid, modelling dust that the
/// raster cannot resolve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perforation {
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub spacing: f64,
    pub radius: f64,
}

impl Perforation {
    fn cover_removed(&self, r: &Rect) -> Cover {
        let s = self.spacing;
        let nx = ((self.max[0] - self.min[0]) / s).floor() as i64;
        let ny = ((self.max[1] - self.min[1]) / s).floor() as i64;
        let reach = self.radius;
        let i0 = (((r.x0 - reach - self.min[0]) / s).floor() as i64).max(0);
        let i1 = (((r.x1 + reach - self.min[0]) / s).ceil() as i64).min(nx);
        let j0 = (((r.y0 - reach - self.min[1]) / s).floor() as i64).max(0);
        let j1 = (((r.y1 + reach - self.min[1]) / s).ceil() as i64).min(ny);
        let mut any = false;
        for i in i0..=i1 {
            for j in j0..=j1 {
                let c = [self.min[0] + i as f64 * s, self.min[1] + j as f64 * s];
                match disk_cover(c, self.radius, r) {
                    Cover::Full => return Cover::Full,
                    Cover::Mixed => any = true,
                    Cover::Empty => {}
                }
            }
        }
        if any {
            Cover::Mixed
        } else {
            Cover::Empty
        }
    }
}

/// Compact planar sets with exact membership.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetSpec {
    Disk {
        center: [f64; 2],
        radius: f64,
    },
    Square {
        center: [f64; 2],
        side: f64,
    },
    Rect {
        min: [f64; 2],
        max: [f64; 2],
    },
    Annulus {
        center: [f64; 2],
        r_inner: f64,
        r_outer: f64,
    },
    /// A base set with open disks removed.
    SwissCheese {
        base: Box<SetSpec>,
        holes: Vec<DiskSpec>,
        #[serde(default)]
        perforation: Option<Perforation>,
    },
    /// Product of two fat Cantor sets on `[min, min + side]`: at each level every
    /// interval keeps two end pieces of relative length `ratio / 2`.
    CantorProduct {
        min: [f64; 2],
        side: f64,
        ratio: f64,
        depth: u32,
    },
    Union {
        parts: Vec<SetSpec>,
    },
}

pub(crate) fn disk_cover(c: [f64; 2], rad: f64, r: &Rect) -> Cover {
    if r.dist_to_point(c[0], c[1]) >= rad {
        Cover::Empty
    } else if r.far_dist_to_point(c[0], c[1]) <= rad {
        Cover::Full
    } else {
        Cover::Mixed
    }
}

fn rect_cover(a: &Rect, r: &Rect) -> Cover {
    if a.contains_rect(r) {
        Cover::Full
    } else if !a.intersects_interior(r) {
        Cover::Empty
    } else {
        Cover::Mixed
    }
}

/// Retained intervals of a fat Cantor set.
pub fn cantor_intervals(a: f64, side: f64, ratio: f64, depth: u32) -> Vec<(f64, f64)> {
    let mut cur = vec![(a, a + side)];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(cur.len() * 2);
        for (lo, hi) in cur {
            let keep = 0.5 * ratio * (hi - lo);
            next.push((lo, lo + keep));
            next.push((hi - keep, hi));
        }
        cur = next;
    }
    cur
}

fn interval_cover(iv: &[(f64, f64)], lo: f64, hi: f64) -> Cover {
    let mut any = false;
    for &(a, b) in iv {
        if a <= lo && hi <= b {
            return Cover::Full;
        }
        if a < hi && lo < b {
            any = true;
        }
    }
    if any {
        Cover::Mixed
    } else {
        Cover::Empty
    }
}

impl SetSpec {
    /// Axis-aligned bounding box.
    pub fn bbox(&self) -> Rect {
        match self {
            SetSpec::Disk { center, radius } => Rect::new(
                center[0] - radius,
                center[1] - radius,
                center[0] + radius,
                center[1] + radius,
            ),
            SetSpec::Square { center, side } => {
                let h = side / 2.0;
                Rect::new(center[0] - h, center[1] - h, center[0] + h, center[1] + h)
            }
            SetSpec::Rect { min, max } => Rect::new(min[0], min[1], max[0], max[1]),
            SetSpec::Annulus { center, r_outer, .. } => SetSpec::Disk {
                center: *center,
                radius: *r_outer,
            }
            .bbox(),
            SetSpec::SwissCheese { base, .. } => base.bbox(),
            SetSpec::CantorProduct { min, side, .. } => {
                Rect::new(min[0], min[1], min[0] + side, min[1] + side)
            }
            SetSpec::Union { parts } => parts
                .iter()
                .map(|p| p.bbox())
                .reduce(|a, b| a.union(&b))
                .unwrap_or(Rect::new(0.0, 0.0, 0.0, 0.0)),
        }
    }

    /// Checks geometric consistency.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSet(m));
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            SetSpec::Disk { center, radius } => {
                if !finite(&[center[0], center[1], *radius]) || *radius <= 0.0 {
                    return bad(format!("disk radius must be positive, got {radius}"));
                }
            }
            SetSpec::Square { center, side } => {
                if !finite(&[center[0], center[1], *side]) || *side <= 0.0 {
                    return bad(format!("square side must be positive, got {side}"));
                }
            }
            SetSpec::Rect { min, max } => {
                if !finite(&[min[0], min[1], max[0], max[1]]) || max[0] <= min[0] || max[1] <= min[1] {
                    return bad("rect must have max > min in both coordinates".into());
                }
            }
            SetSpec::Annulus { r_inner, r_outer, .. } => {
                if !(*r_inner > 0.0 && r_outer > r_inner) {
                    return bad(format!("annulus needs 0 < r_inner < r_outer, got {r_inner}, {r_outer}"));
                }
            }
            SetSpec::SwissCheese { base, holes, perforation } => {
                base.validate()?;
                let bb = base.bbox();
                for (i, d) in holes.iter().enumerate() {
                    if d.radius <= 0.0 || !finite(&[d.center[0], d.center[1], d.radius]) {
                        return bad(format!("hole {i} has non-positive radius"));
                    }
                    let hb = Rect::new(
                        d.center[0] - d.radius,
                        d.center[1] - d.radius,
                        d.center[0] + d.radius,
                        d.center[1] + d.radius,
                    );
                    if base.cover(&hb) != Cover::Full {
                        return bad(format!("hole {i} is not contained in the base set"));
                    }
                    for (j, e) in holes.iter().enumerate().skip(i + 1) {
                        let dist = (d.center[0] - e.center[0]).hypot(d.center[1] - e.center[1]);
                        if dist < d.radius + e.radius {
                            return bad(format!("holes {i} and {j} overlap"));
                        }
                    }
                }
                if let Some(p) = perforation {
                    if !(p.spacing > 0.0 && p.radius > 0.0 && 2.0 * p.radius < p.spacing) {
                        return bad("perforation needs 0 < 2 radius < spacing".into());
                    }
                    let pr = Rect::new(p.min[0], p.min[1], p.max[0], p.max[1]).inflate(p.radius);
                    if !bb.contains_rect(&pr) {
                        return bad("perforation band leaves the base set".into());
                    }
                    for (i, d) in holes.iter().enumerate() {
                        if pr.dist_to_point(d.center[0], d.center[1]) < d.radius {
                            return bad(format!("perforation band overlaps hole {i}"));
                        }
                    }
                }
            }
            SetSpec::CantorProduct { side, ratio, .. } => {
                if !(*side > 0.0 && *ratio > 0.0 && *ratio < 1.0) {
                    return bad("cantor product needs side > 0 and 0 < ratio < 1".into());
                }
            }
            SetSpec::Union { parts } => {
                if parts.is_empty() {
                    return bad("union of no sets".into());
                }
                for p in parts {
                    p.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Smallest feature the raster must resolve (sub-grid dust excluded).
    pub fn min_feature(&self) -> f64 {
        match self {
            SetSpec::Disk { radius, .. } => *radius,
            SetSpec::Square { side, .. } => side / 2.0,
            SetSpec::Rect { min, max } => (max[0] - min[0]).min(max[1] - min[1]) / 2.0,
            SetSpec::Annulus { r_inner, r_outer, .. } => (r_outer - r_inner).min(*r_inner),
            SetSpec::SwissCheese { base, holes, .. } => holes
                .iter()
                .map(|h| h.radius)
                .fold(base.min_feature(), f64::min),
            SetSpec::CantorProduct { side, .. } => side / 2.0,
            SetSpec::Union { parts } => parts.iter().map(|p| p.min_feature()).fold(f64::INFINITY, f64::min),
        }
    }

    /// Exact coverage of the closed rectangle `r` by the set, up to null sets.
    pub fn cover(&self, r: &Rect) -> Cover {
        match self {
            SetSpec::Disk { center, radius } => disk_cover(*center, *radius, r),
            SetSpec::Square { .. } | SetSpec::Rect { .. } => rect_cover(&self.bbox(), r),
            SetSpec::Annulus { center, r_inner, r_outer } => {
                match (disk_cover(*center, *r_outer, r), disk_cover(*center, *r_inner, r)) {
                    (Cover::Empty, _) | (_, Cover::Full) => Cover::Empty,
                    (Cover::Full, Cover::Empty) => Cover::Full,
                    _ => Cover::Mixed,
                }
            }
            SetSpec::SwissCheese { base, holes, perforation } => {
                let b = base.cover(r);
                if b == Cover::Empty {
                    return Cover::Empty;
                }
                let mut removed = Cover::Empty;
                for h in holes {
                    match h.cover(r) {
                        Cover::Full => return Cover::Empty,
                        Cover::Mixed => removed = Cover::Mixed,
                        Cover::Empty => {}
                    }
                }
                if let Some(p) = perforation {
                    match p.cover_removed(r) {
                        Cover::Full => return Cover::Empty,
                        Cover::Mixed => removed = Cover::Mixed,
                        Cover::Empty => {}
                    }
                }
                if b == Cover::Full && removed == Cover::Empty {
                    Cover::Full
                } else {
                    Cover::Mixed
                }
            }
            SetSpec::CantorProduct { min, side, ratio, depth } => {
                // intervals are recomputed per call; callers on hot paths use `CellCoverer`
                let ix = cantor_intervals(min[0], *side, *ratio, *depth);
                let iy = cantor_intervals(min[1], *side, *ratio, *depth);
                product_cover(&ix, &iy, r)
            }
            SetSpec::Union { parts } => {
                let mut all_empty = true;
                for p in parts {
                    match p.cover(r) {
                        Cover::Full => return Cover::Full,
                        Cover::Mixed => all_empty = false,
                        Cover::Empty => {}
                    }
                }
                if all_empty {
                    Cover::Empty
                } else {
                    Cover::Mixed
                }
            }
        }
    }

    /// Point membership (closed set; removed holes are open).
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let r = Rect::new(x, y, x, y);
        match self {
            SetSpec::Disk { center, radius } => (x - center[0]).hypot(y - center[1]) <= *radius,
            SetSpec::Square { .. } | SetSpec::Rect { .. } => self.bbox().contains_point(x, y),
            SetSpec::Annulus { center, r_inner, r_outer } => {
                let d = (x - center[0]).hypot(y - center[1]);
                d >= *r_inner && d <= *r_outer
            }
            SetSpec::SwissCheese { base, holes, perforation } => {
                base.contains(x, y)
                    && holes
                        .iter()
                        .all(|h| (x - h.center[0]).hypot(y - h.center[1]) >= h.radius)
                    && perforation.map_or(true, |p| p.cover_removed(&r) != Cover::Full)
            }
            SetSpec::CantorProduct { min, side, ratio, depth } => {
                let ix = cantor_intervals(min[0], *side, *ratio, *depth);
                let iy = cantor_intervals(min[1], *side, *ratio, *depth);
                ix.iter().any(|&(a, b)| a <= x && x <= b) && iy.iter().any(|&(a, b)| a <= y && y <= b)
            }
            SetSpec::Union { parts } => parts.iter().any(|p| p.contains(x, y)),
        }
    }

    /// Disks removed from the base that are resolved by the raster.
    pub fn holes(&self) -> &[DiskSpec] {
        match self {
            SetSpec::SwissCheese { holes, .. } => holes,
            _ => &[],
        }
    }
}

fn product_cover(ix: &[(f64, f64)], iy: &[(f64, f64)], r: &Rect) -> Cover {
    match (interval_cover(ix, r.x0, r.x1), interval_cover(iy, r.y0, r.y1)) {
        (Cover::Empty, _) | (_, Cover::Empty) => Cover::Empty,
        (Cover::Full, Cover::Full) => Cover::Full,
        _ => Cover::Mixed,
    }
}

/// Caches derived data (Cantor intervals) so that classifying many cells is cheap.
pub struct CellCoverer<'a> {
    spec: &'a SetSpec,
    cantor: Option<(Vec<(f64, f64)>, Vec<(f64, f64)>)>,
}

impl<'a> CellCoverer<'a> {
    pub fn new(spec: &'a SetSpec) -> Self {
        let cantor = match spec {
            SetSpec::CantorProduct { min, side, ratio, depth } => Some((
                cantor_intervals(min[0], *side, *ratio, *depth),
                cantor_intervals(min[1], *side, *ratio, *depth),
            )),
            _ => None,
        };
        CellCoverer { spec, cantor }
    }

    pub fn cover(&self, r: &Rect) -> Cover {
        match &self.cantor {
            Some((ix, iy)) => product_cover(ix, iy, r),
            None => self.spec.cover(r),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_cover_cases() {
        let d = SetSpec::Disk { center: [0.0, 0.0], radius: 1.0 };
        assert_eq!(d.cover(&Rect::new(-0.1, -0.1, 0.1, 0.1)), Cover::Full);
        assert_eq!(d.cover(&Rect::new(2.0, 2.0, 3.0, 3.0)), Cover::Empty);
        assert_eq!(d.cover(&Rect::new(0.9, -0.1, 1.1, 0.1)), Cover::Mixed);
    }

    #[test]
    fn annulus_cover_cases() {
        let a = SetSpec::Annulus { center: [0.0, 0.0], r_inner: 0.5, r_outer: 1.0 };
        assert_eq!(a.cover(&Rect::new(-0.1, -0.1, 0.1, 0.1)), Cover::Empty);
        assert_eq!(a.cover(&Rect::new(0.7, -0.05, 0.8, 0.05)), Cover::Full);
        assert_eq!(a.cover(&Rect::new(0.45, -0.05, 0.55, 0.05)), Cover::Mixed);
    }

    #[test]
    fn overlapping_holes_rejected() {
        let s = SetSpec::SwissCheese {
            base: Box::new(SetSpec::Square { center: [0.5, 0.5], side: 1.0 }),
            holes: vec![
                DiskSpec { center: [0.4, 0.5], radius: 0.1 },
                DiskSpec { center: [0.5, 0.5], radius: 0.1 },
            ],
            perforation: None,
        };
        assert!(matches!(s.validate(), Err(Error::InvalidSet(_))));
    }

    #[test]
    fn hole_outside_base_rejected() {
        let s = SetSpec::SwissCheese {
            base: Box::new(SetSpec::Square { center: [0.5, 0.5], side: 1.0 }),
            holes: vec![DiskSpec { center: [0.95, 0.5], radius: 0.1 }],
            perforation: None,
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn cantor_intervals_total_length() {
        let iv = cantor_intervals(0.0, 1.0, 0.75, 3);
        assert_eq!(iv.len(), 8);
        let total: f64 = iv.iter().map(|(a, b)| b - a).sum();
        assert!((total - 0.75f64.powi(3)).abs() < 1e-14);
    }
}
