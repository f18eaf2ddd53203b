//! Level measures: one extremal measure per dyadic square whose double meets E,
//! averaged over the charged squares.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::assemble::SetE;
use super::EtaParams;
use crate::capacity::{alpha_lower_bound, cell_dictionary};
use crate::error::{Error, Result};
use crate::geometry::{CompactSetModel, DyadicFrame, SquareIndex};
use crate::transform::PlanarMeasure;
use crate::C64;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SquareCharge {
    pub square: SquareIndex,
    pub rects: usize,
    pub certified: f64,
    pub mass: f64,
    /// Certified bound over the bound implied by the area of `2S ∩ E`.
    pub mass_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelMeasure {
    pub n: u32,
    pub delta: f64,
    pub squares: Vec<SquareCharge>,
    /// Squares whose solver run did not converge.
    pub dropped: usize,
    /// Squares below the detection floor.
    pub below_floor: usize,
    pub m_n: usize,
    pub measure: PlanarMeasure,
}

/// Squares of side `2^-n` whose double contains the center of some rectangle of E.
pub fn candidate_squares(model: &CompactSetModel, e: &SetE, frame: &DyadicFrame) -> Vec<SquareIndex> {
    let d = frame.delta;
    let mut out = BTreeSet::new();
    for r in e.all_rects(model) {
        let (x, y) = r.center();
        let range = |t: f64| ((t / d - 1.5).ceil() as i64)..=((t / d + 0.5).floor() as i64);
        for j in range(y) {
            for i in range(x) {
                out.insert((i, j));
            }
        }
    }
    // row-major order: j first
    let mut v: Vec<SquareIndex> = out.into_iter().collect();
    v.sort_by_key(|&(i, j)| (j, i));
    v
}

pub fn level_measure(model: &CompactSetModel, e: &SetE, n: u32, params: &EtaParams) -> Result<LevelMeasure> {
    let frame = DyadicFrame::new(n as i32);
    let delta = frame.delta;
    if delta < 4.0 * model.h {
        return Err(Error::ResolutionTooCoarse(format!(
            "level {n}: square side {delta:.3e} is below four cells (h = {:.3e})",
            model.h
        )));
    }
    let tau = params.detection_floor * delta;
    let mut squares = Vec::new();
    let mut parts = Vec::new();
    let mut dropped = 0;
    let mut below_floor = 0;
    for q in candidate_squares(model, e, &frame) {
        let rects = e.rects_in(model, &frame.double(q));
        if rects.is_empty() {
            continue;
        }
        let cert = alpha_lower_bound(cell_dictionary(&rects, params.capacity.max_columns), params.capacity)?;
        if !cert.converged {
            dropped += 1;
            continue;
        }
        if cert.certified <= tau {
            below_floor += 1;
            continue;
        }
        let area: f64 = rects.iter().map(|r| r.area()).sum();
        let area_bound = (area / (4.0 * std::f64::consts::PI)).sqrt();
        squares.push(SquareCharge {
            square: q,
            rects: rects.len(),
            certified: cert.certified,
            mass: cert.measure.mass().re,
            mass_ratio: cert.certified / area_bound,
        });
        parts.push(cert.measure);
    }
    let m_n = parts.len();
    let measure = if m_n == 0 {
        PlanarMeasure::zero()
    } else {
        let scale = C64::new(1.0 / m_n as f64, 0.0);
        parts
            .iter()
            .fold(PlanarMeasure::zero(), |acc, p| acc.plus(p))
            .scaled(scale)
            .consolidate()
    };
    Ok(LevelMeasure {
        n,
        delta,
        squares,
        dropped,
        below_floor,
        m_n,
        measure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::etabuild::{assemble_e, build_fixtures};
    use crate::geometry::SetSpec;
    use crate::transform::FastTransform;

    #[test]
    fn level_measures_of_cantor_pieces_are_bounded() {
        let s = SetSpec::Annulus { center: [0.0, 0.0], r_inner: 0.5, r_outer: 1.0 };
        let model = CompactSetModel::build(&s, 1.0 / 128.0).unwrap();
        let params = EtaParams::default();
        let fx = build_fixtures(&model, &params).unwrap();
        let e = assemble_e(&model, &fx, 2).unwrap();
        let mut prev = 0;
        for n in 2..=3 {
            let lm = level_measure(&model, &e, n, &params).unwrap();
            assert!(lm.m_n >= prev, "M_n decreased at level {n}");
            prev = lm.m_n;
            assert!(lm.m_n > 0);
            let ft = FastTransform::new(&lm.measure, 0.05);
            let bb = lm.measure.support_bbox().unwrap().inflate(0.05);
            let mut worst = 0.0f64;
            for a in 0..=60 {
                for b in 0..=60 {
                    let z = C64::new(
                        bb.x0 + bb.width() * a as f64 / 60.0,
                        bb.y0 + bb.height() * b as f64 / 60.0,
                    );
                    worst = worst.max(ft.eval(z).unwrap().norm());
                }
            }
            assert!(worst <= 1.0 + 1e-6, "level {n}: max |C eta_n| = {worst}");
        }
    }

    #[test]
    fn resolution_guard() {
        let s = SetSpec::Annulus { center: [0.0, 0.0], r_inner: 0.5, r_outer: 1.0 };
        let model = CompactSetModel::build(&s, 1.0 / 16.0).unwrap();
        let e = SetE {
            cells: model.inner_boundary.clone(),
            pieces: vec![model.cell_rect(3, 3)],
            removed: model.inner_boundary.clone(),
            dilation: 0,
            removed_cells: 0,
            removed_pieces: 0,
        };
        assert!(matches!(
            level_measure(&model, &e, 3, &EtaParams::default()),
            Err(Error::ResolutionTooCoarse(_))
        ));
    }
}
