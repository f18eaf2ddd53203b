use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::blocks::BuildingBlock;
use crate::geometry::{DyadicFrame, SquareIndex};
use crate::C64;

/// Laurent coefficients of a residual piece `g = f - f*` about its square center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualCoeffs {
    pub c1: C64,
    pub c2: C64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupCorrection {
    pub row: i64,
    pub members: Vec<SquareIndex>,
    pub first: Vec<SquareIndex>,
    pub second: Vec<SquareIndex>,
    pub complete: bool,
    pub center: C64,
    /// Second coefficient of the aggregated residual about `center`.
    pub target_c2: C64,
    /// Squares of the two blocks combined into the correction.
    pub blocks: Option<[SquareIndex; 2]>,
    pub beta: [C64; 2],
    /// `|c1|` of the correction.
    pub residual_c1: f64,
    /// `|c2(correction) - target|`.
    pub residual_c2: f64,
    /// Sum of block capacities over the members.
    pub mass: f64,
    pub flagged: bool,
}

impl GroupCorrection {
    fn open(row: i64) -> Self {
        GroupCorrection {
            row,
            members: Vec::new(),
            first: Vec::new(),
            second: Vec::new(),
            complete: false,
            center: C64::new(0.0, 0.0),
            target_c2: C64::new(0.0, 0.0),
            blocks: None,
            beta: [C64::new(0.0, 0.0); 2],
            residual_c1: 0.0,
            residual_c2: 0.0,
            mass: 0.0,
            flagged: false,
        }
    }
}

fn by_capacity(sub: &[SquareIndex], blocks: &BTreeMap<SquareIndex, BuildingBlock>) -> Vec<SquareIndex> {
    let mut v: Vec<SquareIndex> = sub.iter().copied().filter(|q| blocks.contains_key(q)).collect();
    v.sort_by(|a, b| blocks[b].capacity.partial_cmp(&blocks[a].capacity).unwrap().then(a.cmp(b)));
    v
}

fn correct(
    g: &mut GroupCorrection,
    frame: &DyadicFrame,
    residuals: &BTreeMap<SquareIndex, ResidualCoeffs>,
    blocks: &BTreeMap<SquareIndex, BuildingBlock>,
) {
    let n = g.members.len() as f64;
    g.center = g.members.iter().map(|&q| frame.center(q)).sum::<C64>() / n;
    let s = g.center;
    g.target_c2 = g
        .members
        .iter()
        .filter_map(|q| residuals.get(q).map(|r| r.c2 + r.c1 * (frame.center(*q) - s)))
        .sum();
    if !g.complete {
        return;
    }
    for a in by_capacity(&g.first, blocks) {
        for b in by_capacity(&g.second, blocks) {
            let (ha, hb) = (&blocks[&a], &blocks[&b]);
            let (c1a, c1b) = (ha.c1, hb.c1);
            let (c2a, c2b) = (ha.c2_at(s), hb.c2_at(s));
            let det = c1a * c2b - c1b * c2a;
            if det.norm() <= 1e-8 * c1a.norm() * c1b.norm() * frame.delta {
                continue;
            }
            let t = g.target_c2;
            let b1 = -c1b * t / det;
            let b2 = c1a * t / det;
            g.beta = [b1, b2];
            g.blocks = Some([a, b]);
            g.residual_c1 = (b1 * c1a + b2 * c1b).norm();
            g.residual_c2 = (b1 * c2a + b2 * c2b - t).norm();
            return;
        }
    }
    // no usable pair: keep the group uncorrected
    g.complete = false;
    g.flagged = true;
}

/// Greedy left-to-right grouping along each row of squares. A group closes as
/// complete once it holds two runs of squares, each with block capacity at least
/// `theta * delta`, separated by at least one empty square width; the leftover
/// squares of the row form the incomplete group.
pub fn group_rows(
    frame: &DyadicFrame,
    residuals: &BTreeMap<SquareIndex, ResidualCoeffs>,
    blocks: &BTreeMap<SquareIndex, BuildingBlock>,
    theta: f64,
) -> Vec<GroupCorrection> {
    let squares: BTreeSet<SquareIndex> = residuals.keys().chain(blocks.keys()).copied().collect();
    let mut rows: BTreeMap<i64, (i64, i64)> = BTreeMap::new();
    for &(i, j) in &squares {
        let e = rows.entry(j).or_insert((i, i));
        e.0 = e.0.min(i);
        e.1 = e.1.max(i);
    }
    let need = theta * frame.delta;
    let mut out = Vec::new();
    for (&row, &(lo, hi)) in &rows {
        let mut g = GroupCorrection::open(row);
        let mut phase = 0;
        let mut acc = 0.0;
        let mut end_first = lo;
        for i in lo..=hi {
            let q = (i, row);
            let alpha = blocks.get(&q).map_or(0.0, |b| b.capacity);
            g.members.push(q);
            g.mass += alpha;
            if phase == 0 {
                g.first.push(q);
                acc += alpha;
                if acc >= need {
                    phase = 1;
                    acc = 0.0;
                    end_first = i;
                }
            } else if i >= end_first + 2 {
                g.second.push(q);
                acc += alpha;
                if acc >= need {
                    g.complete = true;
                    correct(&mut g, frame, residuals, blocks);
                    out.push(std::mem::replace(&mut g, GroupCorrection::open(row)));
                    phase = 0;
                    acc = 0.0;
                }
            }
        }
        if !g.members.is_empty() {
            correct(&mut g, frame, residuals, blocks);
            out.push(g);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::{Carrier, PlanarMeasure};
    use std::f64::consts::PI;

    fn disk_block(frame: &DyadicFrame, q: SquareIndex, r: f64) -> BuildingBlock {
        let s = frame.center(q);
        let m = PlanarMeasure::positive(vec![(Carrier::Disk { center: s, radius: r }, 1.0 / (PI * r))]).unwrap();
        let mass = m.mass();
        BuildingBlock {
            square: q,
            center: s,
            c1: -mass,
            c2: -m.first_moment(s),
            capacity: mass.re,
            measure: m,
            provenance: super::super::Provenance::ComplementDisk,
            sup: 1.0,
            reach: r,
            flagged: false,
        }
    }

    #[test]
    fn uniform_row_groups_are_complete() {
        let frame = DyadicFrame::new(4);
        let mut blocks = BTreeMap::new();
        let mut res = BTreeMap::new();
        for i in 0..12 {
            blocks.insert((i, 0), disk_block(&frame, (i, 0), 0.3 * frame.delta));
            res.insert((i, 0), ResidualCoeffs { c1: C64::new(0.0, 0.0), c2: C64::new(1e-4, -2e-4 * i as f64) });
        }
        let groups = group_rows(&frame, &res, &blocks, 0.25);
        assert_eq!(groups.len(), 4);
        for g in &groups {
            assert!(g.complete);
            assert_eq!(g.members.len(), 3);
            assert!(g.residual_c1 <= 1e-10 * (1.0 + g.target_c2.norm()));
            assert!(g.residual_c2 <= 1e-8 * (1.0 + g.target_c2.norm()));
        }
    }

    #[test]
    fn single_charged_square_is_incomplete() {
        let frame = DyadicFrame::new(4);
        let mut blocks = BTreeMap::new();
        blocks.insert((3, 1), disk_block(&frame, (3, 1), 0.3 * frame.delta));
        let mut res = BTreeMap::new();
        res.insert((3, 1), ResidualCoeffs { c1: C64::new(0.0, 0.0), c2: C64::new(1.0, 0.0) });
        let groups = group_rows(&frame, &res, &blocks, 0.25);
        assert_eq!(groups.len(), 1);
        assert!(!groups[0].complete && groups[0].blocks.is_none());
    }
}
