use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::blocks::{make_blocks, BlockOptions, BlockSource, BuildingBlock};
use super::groups::{group_rows, GroupCorrection, ResidualCoeffs};
use super::localize::{localize, Field, LocalizeOptions};
use crate::error::{Error, Result};
use crate::geometry::{modulus_of_continuity, CellLabel, CompactSetModel, DyadicFrame, Rect, SquareIndex};
use crate::transform::{Carrier, PlanarMeasure};
use crate::C64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeOptions {
    pub theta: f64,
    pub blocks: BlockOptions,
    pub localize: LocalizeOptions,
    /// Abort with `NotInClass` when `|c1(f)| > 2 C omega(delta) capacity` for
    /// some square.
    pub premise_constant: Option<f64>,
    /// `|c1(f)|` below this counts as zero.
    pub c1_tol: f64,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        SchemeOptions {
            theta: 0.25,
            blocks: BlockOptions::default(),
            localize: LocalizeOptions::default(),
            premise_constant: None,
            c1_tol: 1e-12,
        }
    }
}

/// Per-square diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct SquareReport {
    pub square: SquareIndex,
    pub c1: C64,
    pub c2: C64,
    pub capacity: f64,
    pub coefficient: C64,
    pub matched: bool,
    pub premise_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelReport {
    pub delta: f64,
    /// `sup |F - f_delta|` on the validation points.
    pub error: f64,
    pub omega: f64,
    pub pieces: usize,
    pub dropped: usize,
    pub blocks: usize,
    pub unmatched: usize,
    pub complete_groups: usize,
    pub incomplete_groups: usize,
    pub incomplete_mass: f64,
    /// Max `|c1(f - f*)| / max(1, |c1(f)|)` over matched squares.
    pub max_match_residual: f64,
    pub max_correction_c1: f64,
    pub max_correction_c2: f64,
    pub max_premise_ratio: f64,
    /// Max of `|g(z)| / (omega (delta alpha / d^2 + delta^3 / d^3))` over sampled
    /// squares and points.
    pub tail_ratio: f64,
    pub flagged_blocks: usize,
    #[serde(skip)]
    pub squares: Vec<SquareReport>,
    #[serde(skip)]
    pub groups: Vec<GroupCorrection>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemeReport {
    pub levels: Vec<LevelReport>,
    pub validation_points: usize,
}

impl SchemeReport {
    /// `err(delta) / err(delta / 2)` for consecutive levels.
    pub fn ratios(&self) -> Vec<f64> {
        self.levels.windows(2).map(|w| w[0].error / w[1].error).collect()
    }
}

/// Centers of the boundary cells of the model. Differences of functions analytic on
/// the interior and continuous on K peak on the boundary.
pub fn validation_points(model: &CompactSetModel) -> Vec<C64> {
    let mut out = Vec::new();
    for j in 0..model.ny {
        for i in 0..model.nx {
            if model.label(i, j) == CellLabel::Boundary {
                out.push(model.cell_center(i, j));
            }
        }
    }
    out
}

fn level(
    field: &Field,
    region: &Rect,
    source: BlockSource<'_>,
    delta: f64,
    validation: &[C64],
    opts: &SchemeOptions,
) -> Result<LevelReport> {
    let frame = DyadicFrame::from_delta(delta);
    let loc = localize(field.clone(), &frame, region, &opts.localize)?;
    let squares: Vec<SquareIndex> = loc.pieces.iter().map(|p| p.square).collect();
    let blocks: BTreeMap<SquareIndex, BuildingBlock> = make_blocks(&frame, &squares, source, &opts.blocks)?;
    let f = field.clone();
    let omega = modulus_of_continuity(move |z| f(z), &region.inflate(2.0 * delta), &[delta], 48)?
        .at(delta)
        .unwrap_or(0.0);

    let mut items: Vec<(Carrier, C64)> = Vec::new();
    let mut residuals = BTreeMap::new();
    let mut reports = Vec::new();
    let mut unmatched = 0;
    let mut max_match = 0.0f64;
    let mut max_premise = 0.0f64;
    for p in &loc.pieces {
        let small = p.c1.norm() <= opts.c1_tol;
        let (coef, cap, matched) = match blocks.get(&p.square) {
            Some(b) => (p.c1 / b.c1, b.capacity, true),
            None => (C64::new(0.0, 0.0), 0.0, false),
        };
        let premise = if small {
            0.0
        } else if cap > 0.0 && omega > 0.0 {
            p.c1.norm() / (omega * cap)
        } else {
            f64::INFINITY
        };
        max_premise = max_premise.max(premise);
        if let Some(c) = opts.premise_constant {
            if premise > 2.0 * c {
                return Err(Error::NotInClass(format!(
                    "square {:?} at delta {delta}: |c1| = {:.3e} exceeds 2 C omega capacity (ratio {premise:.3e})",
                    p.square,
                    p.c1.norm()
                )));
            }
        }
        let (g1, g2) = match blocks.get(&p.square) {
            Some(b) => {
                for (c, w) in b.measure.items() {
                    items.push((*c, coef * w));
                }
                (p.c1 - coef * b.c1, p.c2 - coef * b.c2)
            }
            None => {
                if !small {
                    unmatched += 1;
                }
                (p.c1, p.c2)
            }
        };
        if matched {
            max_match = max_match.max(g1.norm() / p.c1.norm().max(1.0));
        }
        residuals.insert(p.square, ResidualCoeffs { c1: g1, c2: g2 });
        reports.push(SquareReport {
            square: p.square,
            c1: p.c1,
            c2: p.c2,
            capacity: cap,
            coefficient: coef,
            matched,
            premise_ratio: premise,
        });
    }

    let groups = group_rows(&frame, &residuals, &blocks, opts.theta);
    let mut max_c1 = 0.0f64;
    let mut max_c2 = 0.0f64;
    let mut incomplete_mass = 0.0;
    for g in &groups {
        if let Some([a, b]) = g.blocks {
            for (q, beta) in [(a, g.beta[0]), (b, g.beta[1])] {
                for (c, w) in blocks[&q].measure.items() {
                    items.push((*c, beta * w));
                }
            }
            max_c1 = max_c1.max(g.residual_c1);
            max_c2 = max_c2.max(g.residual_c2);
        } else {
            incomplete_mass += g.mass;
        }
    }
    let approx = PlanarMeasure::complex(items)?;
    let mut error = 0.0f64;
    for &z in validation {
        error = error.max((field(z) - approx.transform(z)?).norm());
    }

    // tail scatter on a few matched squares
    let mut tail = 0.0f64;
    let stride = (validation.len() / 64).max(1);
    for p in loc.pieces.iter().filter(|p| blocks.contains_key(&p.square)).take(8) {
        let b = &blocks[&p.square];
        let coef = p.c1 / b.c1;
        for &z in validation.iter().step_by(stride) {
            let d = (z - p.center()).norm();
            if d < 2.0 * delta.max(b.reach) {
                continue;
            }
            let g = p.eval(z) - coef * b.eval(z)?;
            let bound = omega * (delta * b.capacity / (d * d) + delta.powi(3) / d.powi(3));
            if bound > 0.0 {
                tail = tail.max(g.norm() / bound);
            }
        }
    }

    Ok(LevelReport {
        delta,
        error,
        omega,
        pieces: loc.pieces.len(),
        dropped: loc.dropped,
        blocks: blocks.len(),
        unmatched,
        complete_groups: groups.iter().filter(|g| g.complete).count(),
        incomplete_groups: groups.iter().filter(|g| !g.complete).count(),
        incomplete_mass,
        max_match_residual: max_match,
        max_correction_c1: max_c1,
        max_correction_c2: max_c2,
        max_premise_ratio: max_premise,
        tail_ratio: tail,
        flagged_blocks: blocks.values().filter(|b| b.flagged).count(),
        squares: reports,
        groups,
    })
}

/// Runs the matched-coefficient scheme for each `delta`. `region` must contain the
/// set where `field` fails to be analytic; errors are measured on `validation`.
pub fn run_scheme(
    field: Field,
    region: &Rect,
    source: BlockSource<'_>,
    deltas: &[f64],
    validation: &[C64],
    opts: &SchemeOptions,
) -> Result<SchemeReport> {
    if validation.is_empty() {
        return Err(Error::InvalidSet("no validation points".into()));
    }
    let levels = deltas
        .iter()
        .map(|&d| level(&field, region, source, d, validation, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(SchemeReport {
        levels,
        validation_points: validation.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SetSpec;
    use std::sync::Arc;

    #[test]
    fn field_equal_to_a_block_is_reproduced() {
        // F is the transform of a uniform disk deep in the hole of an annulus;
        // at this delta the disk is one square's block up to scaling
        let spec = SetSpec::Annulus { center: [0.0, 0.0], r_inner: 0.5, r_outer: 1.0 };
        let model = CompactSetModel::build(&spec, 1.0 / 64.0).unwrap();
        let disk = Carrier::Disk { center: C64::new(0.0625, 0.0625), radius: 0.05 };
        let field: Field = Arc::new(move |z| disk.transform(z).unwrap());
        let opts = SchemeOptions {
            blocks: BlockOptions { k: 1.0, ..BlockOptions::default() },
            ..SchemeOptions::default()
        };
        let rep = run_scheme(
            field,
            &Rect::new(0.0125, 0.0125, 0.1125, 0.1125),
            BlockSource::RationalK(&model),
            &[0.125],
            &validation_points(&model),
            &opts,
        )
        .unwrap();
        let l = &rep.levels[0];
        assert!(l.max_match_residual <= 1e-8);
        assert!(l.error.is_finite());
    }
}
