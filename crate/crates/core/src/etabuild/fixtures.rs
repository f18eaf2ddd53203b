//! Line fixtures inside holes and interior components, and the Cantor-product
//! sets placed in the holes.

use serde::{Deserialize, Serialize};

use super::EtaParams;
use crate::error::{Error, Result};
use crate::geometry::raster::{component_count, distance_transform_sq};
use crate::geometry::shapes::cantor_intervals;
use crate::geometry::{CellLabel, CompactSetModel, Connectivity, Cover, Mask, Rect, SetSpec};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentKind {
    Hole,
    Interior,
}

/// Disk next to the line fixture of a hole, carrying a fat Cantor product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxDisk {
    pub center: C64,
    pub delta: f64,
    pub cantor: SetSpec,
    pub area: f64,
}

impl AuxDisk {
    /// Retained rectangles of the Cantor product.
    pub fn pieces(&self) -> Vec<Rect> {
        match &self.cantor {
            SetSpec::CantorProduct { min, side, ratio, depth } => {
                let ix = cantor_intervals(min[0], *side, *ratio, *depth);
                let iy = cantor_intervals(min[1], *side, *ratio, *depth);
                let mut out = Vec::with_capacity(ix.len() * iy.len());
                for &(y0, y1) in &iy {
                    for &(x0, x1) in &ix {
                        out.push(Rect::new(x0, y0, x1, y1));
                    }
                }
                out
            }
            _ => Vec::new(),
        }
    }
}

/// Closed disk `B(lambda, delta)` plus the vertical line through `lambda`,
/// clipped to the model frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineFixture {
    pub kind: ComponentKind,
    pub component: u32,
    pub lambda: C64,
    pub delta: f64,
    pub line_x: f64,
    pub line_y: (f64, f64),
    pub aux: Option<AuxDisk>,
}

impl LineFixture {
    pub fn meets_rect(&self, r: &Rect) -> bool {
        let on_line = r.x0 <= self.line_x && self.line_x <= r.x1 && r.y1 >= self.line_y.0 && r.y0 <= self.line_y.1;
        on_line || r.dist_to_point(self.lambda.re, self.lambda.im) <= self.delta
    }

    pub fn contains(&self, z: C64) -> bool {
        (z - self.lambda).norm() <= self.delta
            || (z.re == self.line_x && z.im >= self.line_y.0 && z.im <= self.line_y.1)
    }

    /// Points of the fixture: the line at the given spacing and a few rings of the disk.
    pub fn samples(&self, spacing: f64) -> Vec<C64> {
        let (y0, y1) = self.line_y;
        let n = ((y1 - y0) / spacing).ceil().max(1.0) as usize;
        let mut out: Vec<C64> = (0..=n)
            .map(|k| C64::new(self.line_x, y0 + (y1 - y0) * k as f64 / n as f64))
            .collect();
        for ring in 1..=2 {
            let r = self.delta * ring as f64 / 2.0;
            for k in 0..16 {
                out.push(self.lambda + C64::from_polar(r, std::f64::consts::TAU * k as f64 / 16.0));
            }
        }
        out
    }

    /// Enumeration of division points: the disk center, two points inside the
    /// disk, then dyadic heights along the clipped line.
    pub fn point(&self, k: usize) -> C64 {
        let half = C64::new(0.0, self.delta / 2.0);
        match k {
            0 => self.lambda,
            1 => self.lambda + half,
            2 => self.lambda - half,
            _ => {
                // k = 3, 4, ... -> 1/2, 1/4, 3/4, 1/8, 3/8, ...
                let j = k - 2;
                let level = usize::BITS - j.leading_zeros();
                let denom = 1u64 << level;
                let num = 2 * (j as u64 - (1u64 << (level - 1))) + 1;
                let t = num as f64 / denom as f64;
                C64::new(self.line_x, self.line_y.0 + t * (self.line_y.1 - self.line_y.0))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureSet {
    pub fixtures: Vec<LineFixture>,
    pub warnings: Vec<String>,
}

impl FixtureSet {
    pub fn holes(&self) -> impl Iterator<Item = &LineFixture> {
        self.fixtures.iter().filter(|f| f.kind == ComponentKind::Hole)
    }

    pub fn interiors(&self) -> impl Iterator<Item = &LineFixture> {
        self.fixtures.iter().filter(|f| f.kind == ComponentKind::Interior)
    }

    /// Cells meeting a line or a closed fixture disk.
    pub fn mask(&self, model: &CompactSetModel) -> Mask {
        let mut m = Mask::new(model.nx, model.ny);
        for f in &self.fixtures {
            mark_fixture(model, f, &mut m);
        }
        m
    }
}

fn mark_fixture(model: &CompactSetModel, f: &LineFixture, m: &mut Mask) {
    let fx = ((f.line_x - model.x0) / model.h).floor() as i64;
    // a line on a cell edge meets both neighbours
    for ix in (fx - 1).max(0)..=(fx + 1).min(model.nx as i64 - 1) {
        let ix = ix as usize;
        for iy in 0..model.ny {
            if f.meets_rect(&model.cell_rect(ix, iy)) {
                m.set(ix, iy, true);
            }
        }
    }
    for (ix, iy) in cells_near(model, f.lambda, f.delta) {
        if f.meets_rect(&model.cell_rect(ix, iy)) {
            m.set(ix, iy, true);
        }
    }
}

/// Cells whose rectangle lies within `r` of `c` in the max norm.
pub(crate) fn cells_near(model: &CompactSetModel, c: C64, r: f64) -> Vec<(usize, usize)> {
    let h = model.h;
    let lo = |v: f64, o: f64, n: usize| (((v - r - o) / h).floor().max(0.0) as usize).min(n);
    let hi = |v: f64, o: f64, n: usize| (((v + r - o) / h).ceil().max(0.0) as usize).min(n);
    let mut out = Vec::new();
    for iy in lo(c.im, model.y0, model.ny)..hi(c.im, model.y0, model.ny) {
        for ix in lo(c.re, model.x0, model.nx)..hi(c.re, model.x0, model.nx) {
            out.push((ix, iy));
        }
    }
    out
}

/// Deepest cell of `mask` and a conservative inscribed radius around its center.
fn inscribed(model: &CompactSetModel, mask: &Mask) -> Option<(C64, f64)> {
    inscribed_where(model, mask, |_| true)
}

/// Like `inscribed`, preferring the deepest cell whose center passes `accept`
/// provided it keeps at least half the best depth.
fn inscribed_where(model: &CompactSetModel, mask: &Mask, accept: impl Fn(C64) -> bool) -> Option<(C64, f64)> {
    let d2 = distance_transform_sq(&mask.not());
    let pick = |ok: &dyn Fn(usize) -> bool| {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in d2.iter().enumerate() {
            if mask.bits[i] && v.is_finite() && ok(i) && best.map_or(true, |(_, b)| *v > b) {
                best = Some((i, *v));
            }
        }
        best
    };
    let center = |i: usize| model.cell_center(i % model.nx, i / model.nx);
    let (mut i, mut v) = pick(&|_| true)?;
    if !accept(center(i)) {
        if let Some((j, w)) = pick(&|j| accept(center(j))) {
            if w >= 0.25 * v {
                (i, v) = (j, w);
            }
        }
    }
    Some((center(i), (v.sqrt() - 1.0) * model.h))
}

/// Every cell meeting the closed disk carries the given label.
fn disk_in_label(model: &CompactSetModel, c: C64, r: f64, label: CellLabel) -> bool {
    let frame = model.frame_rect();
    if frame.dist_to_point(c.re, c.im) > 0.0 || !frame.inflate(-r).contains_point(c.re, c.im) {
        return false;
    }
    cells_near(model, c, r)
        .into_iter()
        .filter(|&(ix, iy)| model.cell_rect(ix, iy).dist_to_point(c.re, c.im) <= r)
        .all(|(ix, iy)| model.label(ix, iy) == label)
}

/// Masks of the components of one kind with at least `min_cells` cells, and the
/// labels of the smaller ones.
fn component_masks(model: &CompactSetModel, kind: ComponentKind, min_cells: usize) -> (Vec<(u32, Mask)>, Vec<u32>) {
    let n = match kind {
        ComponentKind::Hole => model.n_holes,
        ComponentKind::Interior => model.n_interior,
    };
    let label_of = |l: &CellLabel| match (kind, l) {
        (ComponentKind::Hole, CellLabel::Complement(m)) if *m > 0 => Some(*m),
        (ComponentKind::Interior, CellLabel::Interior(m)) => Some(*m),
        _ => None,
    };
    let mut counts = vec![0usize; n as usize + 1];
    for l in &model.labels {
        if let Some(m) = label_of(l) {
            counts[m as usize] += 1;
        }
    }
    let mut masks: Vec<Option<Mask>> = counts
        .iter()
        .map(|c| (*c >= min_cells).then(|| Mask::new(model.nx, model.ny)))
        .collect();
    for (i, l) in model.labels.iter().enumerate() {
        if let Some(mask) = label_of(l).and_then(|m| masks[m as usize].as_mut()) {
            mask.bits[i] = true;
        }
    }
    let small = (1..=n).filter(|m| counts[*m as usize] > 0 && counts[*m as usize] < min_cells).collect();
    let big = masks
        .into_iter()
        .enumerate()
        .filter_map(|(m, k)| k.map(|k| (m as u32, k)))
        .collect();
    (big, small)
}

fn hole_fixture(
    model: &CompactSetModel,
    m: u32,
    c: C64,
    r: f64,
    scale: f64,
    params: &EtaParams,
) -> std::result::Result<LineFixture, String> {
    let h = model.h;
    let label = CellLabel::Complement(m);
    let delta = scale * r / 10.0;
    let delta1 = scale * r / 5.0;
    if delta < 2.0 * h || delta1 < 4.0 * h {
        return Err(format!("hole {m} too small for fixtures (inscribed radius {r:.3e})"));
    }
    let lambda = c + 0.7 * r;
    if !disk_in_label(model, lambda, 2.0 * delta, label) || !disk_in_label(model, c, 2.0 * delta1, label) {
        return Err(format!("hole {m}: fixture disks leave the component"));
    }
    if (lambda - c).norm() <= 2.0 * (delta + delta1) {
        return Err(format!("hole {m}: fixture disks overlap"));
    }
    let side = 0.98 * std::f64::consts::SQRT_2 * delta1;
    let cantor = SetSpec::CantorProduct {
        min: [c.re - side / 2.0, c.im - side / 2.0],
        side,
        ratio: params.cantor_ratio,
        depth: params.cantor_depth,
    };
    cantor.validate().map_err(|e| e.to_string())?;
    let area = side * side * params.cantor_ratio.powi(2 * params.cantor_depth as i32);
    let aux = AuxDisk { center: c, delta: delta1, cantor, area };
    if !(area > 0.0) {
        return Err(format!("hole {m}: Cantor product has no area"));
    }
    // the part of B(c, delta1) missed by the product must be connected at grid level
    let mut free = Mask::new(model.nx, model.ny);
    for (ix, iy) in cells_near(model, c, delta1) {
        let rect = model.cell_rect(ix, iy);
        if rect.far_dist_to_point(c.re, c.im) <= delta1 && aux.cantor.cover(&rect) == Cover::Empty {
            free.set(ix, iy, true);
        }
    }
    if component_count(&free, Connectivity::Four) != 1 {
        return Err(format!("hole {m}: complement of the Cantor product is not connected in its disk"));
    }
    let fr = model.frame_rect();
    Ok(LineFixture {
        kind: ComponentKind::Hole,
        component: m,
        lambda,
        delta,
        line_x: lambda.re,
        line_y: (fr.y0, fr.y1),
        aux: Some(aux),
    })
}

/// Builds one fixture per hole and per interior component large enough to hold it.
pub fn build_fixtures(model: &CompactSetModel, params: &EtaParams) -> Result<FixtureSet> {
    let h = model.h;
    let mut fixtures = Vec::new();
    let mut warnings = Vec::new();
    let min_cells = 64;
    let (holes, small) = component_masks(model, ComponentKind::Hole, min_cells);
    for m in small {
        warnings.push(format!("hole {m} skipped: fewer than {min_cells} cells"));
    }
    for (m, mask) in holes {
        let (c, r) = match inscribed(model, &mask) {
            Some(v) => v,
            None => continue,
        };
        match hole_fixture(model, m, c, r, 1.0, params) {
            Ok(f) => fixtures.push(f),
            Err(first) => match hole_fixture(model, m, c, r, 0.5, params) {
                Ok(f) => {
                    warnings.push(format!("{first}; radii halved"));
                    fixtures.push(f);
                }
                Err(e) if e.contains("too small") => warnings.push(format!("{e}; skipped")),
                Err(e) => return Err(Error::Invariant(e)),
            },
        }
    }
    let (interiors, small) = component_masks(model, ComponentKind::Interior, min_cells);
    for (m, mask) in interiors {
        // keep the vertical line clear of the Cantor disks
        let clear = |z: C64| {
            fixtures.iter().all(|f: &LineFixture| {
                f.aux.as_ref().map_or(true, |a| {
                    (z.re - a.center.re).abs() > a.delta + (params.dilation_cells + 2) as f64 * h
                })
            })
        };
        let Some((c, r)) = inscribed_where(model, &mask, clear) else { continue };
        let delta = r / 4.0;
        if delta < 2.0 * h {
            warnings.push(format!("interior component {m} skipped: inscribed radius {r:.3e}"));
            continue;
        }
        if !disk_in_label(model, c, 2.0 * delta, CellLabel::Interior(m)) {
            return Err(Error::Invariant(format!("interior component {m}: fixture disk leaves the component")));
        }
        let fr = model.frame_rect();
        fixtures.push(LineFixture {
            kind: ComponentKind::Interior,
            component: m,
            lambda: c,
            delta,
            line_x: c.re,
            line_y: (fr.y0, fr.y1),
            aux: None,
        });
    }
    if !small.is_empty() {
        warnings.push(format!("{} interior components below {min_cells} cells skipped", small.len()));
    }
    Ok(FixtureSet { fixtures, warnings })
}
