use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::capacity::{cell_dictionary, cells_in_ball, gamma_lower_bound, CapacityOptions};
use crate::error::Result;
use crate::geometry::{CellLabel, CompactSetModel, DyadicFrame, Rect, SquareIndex};
use crate::transform::{Carrier, PlanarMeasure};
use crate::C64;

/// Where building blocks come from.
#[derive(Debug, Clone, Copy)]
pub enum BlockSource<'a> {
    /// Transforms of measures on the complement of K near each square.
    RationalK(&'a CompactSetModel),
    /// Transforms of a reference measure restricted to each double square.
    ReferenceMeasure(&'a PlanarMeasure),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Restriction of the reference measure.
    Restriction,
    /// Uniform disk inside the complement.
    ComplementDisk,
    /// Capacity certificate on complement cells.
    ComplementCapacity,
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildingBlock {
    pub square: SquareIndex,
    pub center: C64,
    /// Normalized generating measure; the block is its transform.
    pub measure: PlanarMeasure,
    pub provenance: Provenance,
    /// Mass of `measure`; `c1 = -capacity`.
    pub capacity: f64,
    pub c1: C64,
    /// Second coefficient about `center`.
    pub c2: C64,
    /// Measured sup of the block on its check grid.
    pub sup: f64,
    /// Radius about `center` containing the generating measure.
    pub reach: f64,
    pub flagged: bool,
}

impl BuildingBlock {
    fn from_measure(
        square: SquareIndex,
        center: C64,
        measure: PlanarMeasure,
        provenance: Provenance,
        sup: f64,
        reach: f64,
    ) -> Self {
        let mass = measure.mass();
        BuildingBlock {
            square,
            center,
            capacity: mass.re,
            c1: -mass,
            c2: -measure.first_moment(center),
            measure,
            provenance,
            sup,
            reach,
            flagged: false,
        }
    }

    pub fn eval(&self, z: C64) -> Result<C64> {
        self.measure.transform(z)
    }

    /// Second Laurent coefficient about `a`.
    pub fn c2_at(&self, a: C64) -> C64 {
        self.c2 + self.c1 * (self.center - a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlockOptions {
    /// Dilation of the ball `B(s, k sqrt(2) delta)` for complement blocks.
    pub k: f64,
    pub capacity: CapacityOptions,
}

impl Default for BlockOptions {
    fn default() -> Self {
        BlockOptions {
            k: 3.0,
            capacity: CapacityOptions {
                max_columns: 32,
                max_rounds: 20,
                ..CapacityOptions::default()
            },
        }
    }
}

fn sup_near(measure: &PlanarMeasure, region: &Rect, spacing: f64) -> Result<f64> {
    let nx = (region.width() / spacing).ceil().max(1.0) as usize;
    let ny = (region.height() / spacing).ceil().max(1.0) as usize;
    let mut m = 0.0f64;
    for i in 0..=nx {
        for j in 0..=ny {
            let z = C64::new(
                region.x0 + region.width() * i as f64 / nx as f64,
                region.y0 + region.height() * j as f64 / ny as f64,
            );
            m = m.max(measure.transform(z)?.norm());
        }
    }
    Ok(m)
}

fn complement_block(
    model: &CompactSetModel,
    square: SquareIndex,
    s: C64,
    r: f64,
    opts: &BlockOptions,
) -> Result<Option<BuildingBlock>> {
    let cells = cells_in_ball(model, s, r, |l| matches!(l, CellLabel::Complement(_)));
    if cells.is_empty() {
        return Ok(None);
    }
    // every cell meeting the ball lies in the complement: the whole disk is available
    let reach = r + model.h * SQRT_2;
    let touching = cells_in_ball(model, s, reach, |_| true).len();
    let free = cells_in_ball(model, s, reach, |l| matches!(l, CellLabel::Complement(_))).len();
    if touching == free {
        let m = PlanarMeasure::positive(vec![(Carrier::Disk { center: s, radius: r }, 1.0 / (PI * r))])?;
        return Ok(Some(BuildingBlock::from_measure(square, s, m, Provenance::ComplementDisk, 1.0, r)));
    }
    let cert = gamma_lower_bound(cell_dictionary(&cells, opts.capacity.max_columns), opts.capacity)?;
    if cert.certified <= 0.0 {
        return Ok(None);
    }
    let mut b = BuildingBlock::from_measure(square, s, cert.measure.clone(), Provenance::ComplementCapacity, 1.0, reach);
    b.flagged = !cert.converged;
    Ok(Some(b))
}

fn restriction_block(eta: &PlanarMeasure, frame: &DyadicFrame, square: SquareIndex) -> Result<Option<BuildingBlock>> {
    let dbl = frame.double(square);
    let part = eta.filter(|c| {
        let a = c.anchor();
        dbl.contains_point(a.re, a.im)
    });
    if part.is_empty() {
        return Ok(None);
    }
    let region = part.support_bbox().unwrap().union(&dbl).inflate(0.5 * frame.delta);
    let sup = sup_near(&part, &region, frame.delta / 16.0)?;
    let scale = sup.max(1.0);
    let m = part.scaled(C64::new(1.0 / scale, 0.0));
    let reach = part.support_bbox().unwrap().far_dist_to_point(frame.center(square).re, frame.center(square).im);
    Ok(Some(BuildingBlock::from_measure(
        square,
        frame.center(square),
        m,
        Provenance::Restriction,
        sup / scale,
        reach,
    )))
}

/// One block per square where the source offers positive capacity.
pub fn make_blocks(
    frame: &DyadicFrame,
    squares: &[SquareIndex],
    source: BlockSource<'_>,
    opts: &BlockOptions,
) -> Result<BTreeMap<SquareIndex, BuildingBlock>> {
    let mut out = BTreeMap::new();
    for &q in squares {
        let s = frame.center(q);
        let block = match source {
            BlockSource::RationalK(model) => complement_block(model, q, s, opts.k * SQRT_2 * frame.delta, opts)?,
            BlockSource::ReferenceMeasure(eta) => restriction_block(eta, frame, q)?,
        };
        if let Some(b) = block {
            out.insert(q, b);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SetSpec;

    #[test]
    fn blocks_on_an_annulus() {
        let spec = SetSpec::Annulus { center: [0.0, 0.0], r_inner: 0.5, r_outer: 1.0 };
        let model = CompactSetModel::build(&spec, 1.0 / 64.0).unwrap();
        let frame = DyadicFrame::new(3);
        let squares = [(0, 0), (-1, 2), (5, 0), (0, 10)];
        let opts = BlockOptions { k: 2.0, ..BlockOptions::default() };
        let blocks = make_blocks(&frame, &squares, BlockSource::RationalK(&model), &opts).unwrap();
        // deep in the hole: exact disk block
        let b = &blocks[&(0, 0)];
        assert_eq!(b.provenance, Provenance::ComplementDisk);
        assert!((b.capacity - 2.0 * SQRT_2 / 8.0).abs() < 1e-12);
        // square inside the ring: only complement cells of the big ball count
        let b = &blocks[&(5, 0)];
        assert_eq!(b.provenance, Provenance::ComplementCapacity);
        assert!(b.capacity > 0.0);
        for bl in blocks.values() {
            let (c1, c2) =
                crate::vitushkin::laurent_coeffs(|z| bl.eval(z).unwrap(), bl.center, 2.0 * bl.reach, 512).unwrap();
            assert!((c1 - bl.c1).norm() < 1e-9 && (c2 - bl.c2).norm() < 1e-9, "{:?}", bl.square);
        }
    }

    #[test]
    fn restriction_blocks_carry_the_restricted_mass() {
        let h = 1.0 / 32.0;
        let items: Vec<(Carrier, f64)> = (0..32)
            .map(|i| (Carrier::Cell(Rect::new(i as f64 * h, 0.0, (i + 1) as f64 * h, h)), 0.5))
            .collect();
        let eta = PlanarMeasure::positive(items).unwrap();
        let frame = DyadicFrame::new(2);
        let blocks =
            make_blocks(&frame, &[(1, 0), (3, 3)], BlockSource::ReferenceMeasure(&eta), &BlockOptions::default()).unwrap();
        assert_eq!(blocks.len(), 1);
        let b = &blocks[&(1, 0)];
        // the double square of (1, 0) spans x in [0.125, 0.625]: 16 cells by anchor
        let mass = 16.0 * h * h * 0.5;
        assert!(b.sup <= 1.0);
        assert!((b.capacity - mass).abs() < 1e-12, "{} {}", b.capacity, mass);
    }
}
