//! Construction of a positive measure whose Cauchy transform separates the
//! holes of a compact set: fixtures, the charged set, level measures, the
//! weight recursion with its polynomial ladder, and assumption checks.

pub mod assemble;
pub mod assumptions;
pub mod finalize;
pub mod fixtures;
pub mod levels;
pub mod recursion;

use serde::{Deserialize, Serialize};

use crate::capacity::CapacityOptions;

pub use assemble::{assemble_e, retention_check, RetentionEntry, SetE};
pub use assumptions::{check_assumptions, AssumptionOptions, AssumptionReport, CheckOutcome, FloorSample};
pub use finalize::{finalize_eta, DivisionCertificate, EtaArtifact, LimitSequence, Route};
pub use fixtures::{build_fixtures, AuxDisk, ComponentKind, FixtureSet, LineFixture};
pub use levels::{candidate_squares, level_measure, LevelMeasure, SquareCharge};
pub use recursion::{enumerate_points, weight_recursion, DivisionPoint, EvalGrid, LadderDefect, LadderFit, LevelLedger, Recursion};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EtaParams {
    pub n_max: u32,
    /// Retained fraction per level of the Cantor sets in the holes.
    pub cantor_ratio: f64,
    pub cantor_depth: u32,
    /// Cells removed around fixture lines and disks.
    pub dilation_cells: usize,
    /// Squares count as charged when their certified bound exceeds this times delta.
    pub detection_floor: f64,
    /// Spacing of the evaluation grid for sup norms.
    pub grid_spacing: f64,
    /// Number of division points; `None` uses `n_max`.
    pub points: Option<usize>,
    pub max_degree: usize,
    /// Slack added to the ladder bound `2^(1-l)`.
    pub residual_tol: f64,
    pub capacity: CapacityOptions,
}

impl Default for EtaParams {
    fn default() -> Self {
        EtaParams {
            n_max: 6,
            cantor_ratio: 0.75,
            cantor_depth: 4,
            dilation_cells: 4,
            detection_floor: 1e-4,
            grid_spacing: 1.0 / 128.0,
            points: None,
            max_degree: 200,
            residual_tol: 1e-3,
            capacity: CapacityOptions {
                max_columns: 32,
                max_rounds: 30,
                modulus_grid: 0,
                ..CapacityOptions::default()
            },
        }
    }
}

/// Fixtures, the charged set E, the weight recursion and the final certificates.
pub fn build_eta(model: &crate::geometry::CompactSetModel, params: &EtaParams) -> crate::Result<EtaArtifact> {
    let fixtures = build_fixtures(model, params)?;
    let e = assemble_e(model, &fixtures, params.dilation_cells)?;
    let rec = weight_recursion(model, &e, &fixtures, params)?;
    finalize_eta(model, &e, &fixtures, rec, params)
}
