//! The charged set: inner boundary cells and Cantor pieces, with the fixtures cut out.

use serde::{Deserialize, Serialize};

use super::fixtures::FixtureSet;
use crate::capacity::{alpha_lower_bound, cell_dictionary, CapacityOptions};
use crate::error::{Error, Result};
use crate::geometry::raster::distance_transform_sq;
use crate::geometry::{CompactSetModel, DyadicFrame, Mask, Rect, SquareIndex};

#[derive(Debug, Clone)]
pub struct SetE {
    /// Grid cells of the inner boundary kept in E.
    pub cells: Mask,
    /// Cantor rectangles kept in E.
    pub pieces: Vec<Rect>,
    /// Fixture cells dilated by `dilation` cells; E avoids them.
    pub removed: Mask,
    pub dilation: usize,
    pub removed_cells: usize,
    pub removed_pieces: usize,
}

impl SetE {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty() && self.pieces.is_empty()
    }

    /// Rectangles of E whose center lies in `r`.
    pub fn rects_in(&self, model: &CompactSetModel, r: &Rect) -> Vec<Rect> {
        let h = model.h;
        let ix0 = (((r.x0 - model.x0) / h - 0.5).ceil().max(0.0)) as usize;
        let iy0 = (((r.y0 - model.y0) / h - 0.5).ceil().max(0.0)) as usize;
        let ix1 = ((((r.x1 - model.x0) / h - 0.5).floor() + 1.0).max(0.0) as usize).min(model.nx);
        let iy1 = ((((r.y1 - model.y0) / h - 0.5).floor() + 1.0).max(0.0) as usize).min(model.ny);
        let mut out = Vec::new();
        for iy in iy0..iy1 {
            for ix in ix0..ix1 {
                if self.cells.get(ix as i64, iy as i64) {
                    let c = model.cell_center(ix, iy);
                    if r.contains_point(c.re, c.im) {
                        out.push(model.cell_rect(ix, iy));
                    }
                }
            }
        }
        for p in &self.pieces {
            let (x, y) = p.center();
            if r.contains_point(x, y) {
                out.push(*p);
            }
        }
        out
    }

    pub fn all_rects(&self, model: &CompactSetModel) -> Vec<Rect> {
        let mut out: Vec<Rect> = self.cells.iter_set().map(|(ix, iy)| model.cell_rect(ix, iy)).collect();
        out.extend_from_slice(&self.pieces);
        out
    }

    /// Grid cells meeting E.
    pub fn support_mask(&self, model: &CompactSetModel) -> Mask {
        let mut m = self.cells.clone();
        for p in &self.pieces {
            for (ix, iy) in cells_of_rect(model, p) {
                m.set(ix, iy, true);
            }
        }
        m
    }

    pub fn bbox(&self, model: &CompactSetModel) -> Option<Rect> {
        self.all_rects(model).into_iter().reduce(|a, b| a.union(&b))
    }
}

pub(crate) fn cells_of_rect(model: &CompactSetModel, r: &Rect) -> Vec<(usize, usize)> {
    let h = model.h;
    let clamp = |v: f64, n: usize| (v.max(0.0) as usize).min(n);
    let ix0 = clamp(((r.x0 - model.x0) / h).floor(), model.nx);
    let ix1 = clamp(((r.x1 - model.x0) / h).ceil(), model.nx);
    let iy0 = clamp(((r.y0 - model.y0) / h).floor(), model.ny);
    let iy1 = clamp(((r.y1 - model.y0) / h).ceil(), model.ny);
    let mut out = Vec::new();
    for iy in iy0..iy1.max(iy0 + 1).min(model.ny) {
        for ix in ix0..ix1.max(ix0 + 1).min(model.nx) {
            out.push((ix, iy));
        }
    }
    out
}

/// `E = (inner boundary cells + Cantor pieces) minus cells within `dilation` cells
/// of a fixture line or disk`.
pub fn assemble_e(model: &CompactSetModel, fixtures: &FixtureSet, dilation: usize) -> Result<SetE> {
    let fm = fixtures.mask(model);
    let d2 = distance_transform_sq(&fm);
    let r2 = (dilation * dilation) as f64;
    let mut removed = Mask::new(model.nx, model.ny);
    for (i, v) in d2.iter().enumerate() {
        removed.bits[i] = *v <= r2;
    }
    let cells = model.inner_boundary.and_not(&removed);
    let removed_cells = model.inner_boundary.and(&removed).count();
    let mut pieces = Vec::new();
    let mut removed_pieces = 0;
    for f in fixtures.holes() {
        if let Some(aux) = &f.aux {
            for p in aux.pieces() {
                if cells_of_rect(model, &p).iter().any(|&(ix, iy)| removed.get(ix as i64, iy as i64)) {
                    removed_pieces += 1;
                } else {
                    pieces.push(p);
                }
            }
        }
    }
    let e = SetE {
        cells,
        pieces,
        removed,
        dilation,
        removed_cells,
        removed_pieces,
    };
    if e.is_empty() {
        return Err(Error::NothingToCharge(
            "E is empty: no inner boundary cells or Cantor pieces survive at this resolution".into(),
        ));
    }
    Ok(e)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetentionEntry {
    pub square: SquareIndex,
    pub alpha_e: f64,
    pub alpha_inner: f64,
    pub ratio: f64,
}

/// Certified bounds of `2S ∩ E` against `2S ∩ inner boundary` on the given squares.
pub fn retention_check(
    model: &CompactSetModel,
    e: &SetE,
    frame: &DyadicFrame,
    squares: &[SquareIndex],
    options: CapacityOptions,
) -> Result<Vec<RetentionEntry>> {
    let inner = SetE {
        cells: model.inner_boundary.clone(),
        pieces: Vec::new(),
        removed: Mask::new(model.nx, model.ny),
        dilation: 0,
        removed_cells: 0,
        removed_pieces: 0,
    };
    let mut out = Vec::new();
    for &q in squares {
        let d = frame.double(q);
        let bound = |s: &SetE| -> Result<f64> {
            let rects = s.rects_in(model, &d);
            if rects.is_empty() {
                return Ok(0.0);
            }
            Ok(alpha_lower_bound(cell_dictionary(&rects, options.max_columns), options)?.certified)
        };
        let alpha_inner = bound(&inner)?;
        if alpha_inner <= 0.0 {
            continue;
        }
        let alpha_e = bound(e)?;
        out.push(RetentionEntry {
            square: q,
            alpha_e,
            alpha_inner,
            ratio: alpha_e / alpha_inner,
        });
    }
    Ok(out)
}
