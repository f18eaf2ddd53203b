//! Rasterized model of a compact set: cell classes, interior and complement
//! components, and the inner boundary.

use std::io::Write;
use std::path::Path;

use super::raster::{label_components, Connectivity, Mask};
use super::shapes::{CellCoverer, Cover, Rect, SetSpec};
use crate::error::{Error, Result};
use crate::C64;

/// Cells per frame ring around the bounding box.
const PAD: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellLabel {
    /// Component `m >= 1` of the resolved interior.
    Interior(u32),
    /// Cell meeting the topological boundary of K.
    Boundary,
    /// Complement component; `0` is the unbounded one.
    Complement(u32),
}

#[derive(Debug, Clone)]
pub struct CompactSetModel {
    pub spec: SetSpec,
    pub h: f64,
    pub x0: f64,
    pub y0: f64,
    pub nx: usize,
    pub ny: usize,
    pub cover: Vec<Cover>,
    pub labels: Vec<CellLabel>,
    pub inner_boundary: Mask,
    /// Number of bounded complement components.
    pub n_holes: u32,
    /// Number of interior components.
    pub n_interior: u32,
}

impl CompactSetModel {
    pub fn build(spec: &SetSpec, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::ResolutionTooCoarse(format!("grid spacing must be positive, got {h}")));
        }
        spec.validate()?;
        let feat = spec.min_feature();
        if feat < 2.0 * h {
            return Err(Error::ResolutionTooCoarse(format!(
                "smallest feature {feat:.3e} is below two grid cells (h = {h:.3e})"
            )));
        }
        let bb = spec.bbox();
        let x0 = (bb.x0 / h).floor() * h - PAD as f64 * h;
        let y0 = (bb.y0 / h).floor() * h - PAD as f64 * h;
        let nx = ((bb.x1 - x0) / h).ceil() as usize + PAD;
        let ny = ((bb.y1 - y0) / h).ceil() as usize + PAD;
        let coverer = CellCoverer::new(spec);
        let mut cover = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                let r = Rect::new(
                    x0 + ix as f64 * h,
                    y0 + iy as f64 * h,
                    x0 + (ix + 1) as f64 * h,
                    y0 + (iy + 1) as f64 * h,
                );
                cover.push(coverer.cover(&r));
            }
        }
        if cover.iter().all(|c| *c == Cover::Empty) {
            return Err(Error::ResolutionTooCoarse("no grid cell meets the set".into()));
        }

        let mut empty = Mask::new(nx, ny);
        for (i, c) in cover.iter().enumerate() {
            empty.bits[i] = *c == Cover::Empty;
        }
        let touches = |m: &Mask, ix: usize, iy: usize| {
            Connectivity::Eight
                .offsets()
                .iter()
                .any(|(dx, dy)| m.get(ix as i64 + dx, iy as i64 + dy))
        };
        let mut boundary = Mask::new(nx, ny);
        let mut interior = Mask::new(nx, ny);
        for iy in 0..ny {
            for ix in 0..nx {
                let i = iy * nx + ix;
                match cover[i] {
                    Cover::Mixed => boundary.bits[i] = true,
                    Cover::Full => {
                        if touches(&empty, ix, iy) {
                            boundary.bits[i] = true;
                        } else {
                            interior.bits[i] = true;
                        }
                    }
                    Cover::Empty => {}
                }
            }
        }

        let (elab, ecount) = label_components(&empty, Connectivity::Four);
        // the frame cell (0, 0) is always empty and belongs to the unbounded component
        let outer = elab[0];
        debug_assert!(outer != 0);
        let mut remap = vec![0u32; ecount as usize + 1];
        let mut next = 1;
        for l in 1..=ecount {
            if l == outer {
                remap[l as usize] = 0;
            } else {
                remap[l as usize] = next;
                next += 1;
            }
        }
        let n_holes = next - 1;
        let (ilab, icount) = label_components(&interior, Connectivity::Four);

        let mut labels = Vec::with_capacity(nx * ny);
        for i in 0..nx * ny {
            labels.push(if empty.bits[i] {
                CellLabel::Complement(remap[elab[i] as usize])
            } else if interior.bits[i] {
                CellLabel::Interior(ilab[i])
            } else {
                CellLabel::Boundary
            });
        }
        let mut inner_boundary = Mask::new(nx, ny);
        for (ix, iy) in boundary.iter_set().collect::<Vec<_>>() {
            if !touches(&empty, ix, iy) {
                inner_boundary.set(ix, iy, true);
            }
        }
        Ok(CompactSetModel {
            spec: spec.clone(),
            h,
            x0,
            y0,
            nx,
            ny,
            cover,
            labels,
            inner_boundary,
            n_holes,
            n_interior: icount,
        })
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn label(&self, ix: usize, iy: usize) -> CellLabel {
        self.labels[self.index(ix, iy)]
    }

    pub fn cell_rect(&self, ix: usize, iy: usize) -> Rect {
        let h = self.h;
        Rect::new(
            self.x0 + ix as f64 * h,
            self.y0 + iy as f64 * h,
            self.x0 + (ix + 1) as f64 * h,
            self.y0 + (iy + 1) as f64 * h,
        )
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> C64 {
        C64::new(
            self.x0 + (ix as f64 + 0.5) * self.h,
            self.y0 + (iy as f64 + 0.5) * self.h,
        )
    }

    pub fn cell_of(&self, z: C64) -> Option<(usize, usize)> {
        let fx = ((z.re - self.x0) / self.h).floor();
        let fy = ((z.im - self.y0) / self.h).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    /// Bounding rectangle of the whole grid (including the frame).
    pub fn frame_rect(&self) -> Rect {
        Rect::new(
            self.x0,
            self.y0,
            self.x0 + self.nx as f64 * self.h,
            self.y0 + self.ny as f64 * self.h,
        )
    }

    fn mask_where(&self, f: impl Fn(CellLabel) -> bool) -> Mask {
        let mut m = Mask::new(self.nx, self.ny);
        for (i, l) in self.labels.iter().enumerate() {
            m.bits[i] = f(*l);
        }
        m
    }

    /// Cells meeting K.
    pub fn k_mask(&self) -> Mask {
        self.mask_where(|l| !matches!(l, CellLabel::Complement(_)))
    }

    pub fn boundary_mask(&self) -> Mask {
        self.mask_where(|l| l == CellLabel::Boundary)
    }

    pub fn interior_mask(&self, m: u32) -> Mask {
        self.mask_where(|l| l == CellLabel::Interior(m))
    }

    pub fn complement_mask(&self, m: u32) -> Mask {
        self.mask_where(|l| l == CellLabel::Complement(m))
    }

    pub fn any_complement_mask(&self) -> Mask {
        self.mask_where(|l| matches!(l, CellLabel::Complement(_)))
    }

    /// Cells fully covered by K.
    pub fn full_mask(&self) -> Mask {
        let mut m = Mask::new(self.nx, self.ny);
        for (i, c) in self.cover.iter().enumerate() {
            m.bits[i] = *c == Cover::Full;
        }
        m
    }

    pub fn count(&self, label: CellLabel) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }

    /// Writes a binary PGM: unbounded complement white, holes light grey, outer
    /// boundary mid grey, inner boundary dark grey, interior black.
    pub fn export_pgm(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        write!(f, "P5\n{} {}\n255\n", self.nx, self.ny)?;
        let mut px = Vec::with_capacity(self.nx * self.ny);
        for iy in (0..self.ny).rev() {
            for ix in 0..self.nx {
                let i = self.index(ix, iy);
                px.push(match self.labels[i] {
                    CellLabel::Complement(0) => 255u8,
                    CellLabel::Complement(_) => 200,
                    CellLabel::Boundary if self.inner_boundary.bits[i] => 60,
                    CellLabel::Boundary => 120,
                    CellLabel::Interior(_) => 0,
                });
            }
        }
        f.write_all(&px)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes::DiskSpec;

    #[test]
    fn disk_has_one_interior_no_holes() {
        let s = SetSpec::Disk { center: [0.0, 0.0], radius: 0.5 };
        let m = CompactSetModel::build(&s, 1.0 / 64.0).unwrap();
        assert_eq!(m.n_interior, 1);
        assert_eq!(m.n_holes, 0);
        assert_eq!(m.inner_boundary.count(), 0);
    }

    #[test]
    fn annulus_has_one_hole() {
        let s = SetSpec::Annulus { center: [0.0, 0.0], r_inner: 0.3, r_outer: 0.6 };
        let m = CompactSetModel::build(&s, 1.0 / 64.0).unwrap();
        assert_eq!(m.n_holes, 1);
        assert_eq!(m.n_interior, 1);
    }

    #[test]
    fn swiss_cheese_three_holes() {
        let s = SetSpec::SwissCheese {
            base: Box::new(SetSpec::Square { center: [0.5, 0.5], side: 1.0 }),
            holes: vec![
                DiskSpec { center: [0.25, 0.3], radius: 0.12 },
                DiskSpec { center: [0.75, 0.3], radius: 0.12 },
                DiskSpec { center: [0.5, 0.75], radius: 0.14 },
            ],
            perforation: None,
        };
        let m = CompactSetModel::build(&s, 1.0 / 128.0).unwrap();
        assert_eq!(m.n_holes, 3);
        assert_eq!(m.n_interior, 1);
    }

    #[test]
    fn tiny_square_is_too_coarse() {
        let s = SetSpec::Square { center: [0.0, 0.0], side: 0.01 };
        assert!(matches!(
            CompactSetModel::build(&s, 0.01),
            Err(Error::ResolutionTooCoarse(_))
        ));
    }

    #[test]
    fn perforation_yields_inner_boundary() {
        let s = SetSpec::SwissCheese {
            base: Box::new(SetSpec::Square { center: [0.5, 0.5], side: 1.0 }),
            holes: vec![],
            perforation: Some(crate::geometry::shapes::Perforation {
                min: [0.4, 0.4],
                max: [0.6, 0.6],
                spacing: 1.0 / 256.0,
                radius: 1.0 / 2048.0,
            }),
        };
        let m = CompactSetModel::build(&s, 1.0 / 64.0).unwrap();
        assert!(m.inner_boundary.count() > 100);
        assert_eq!(m.n_holes, 0);
    }
}
