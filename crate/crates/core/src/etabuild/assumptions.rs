//! Checks of the hypotheses the density argument needs, evaluated on a finished artifact.

use serde::{Deserialize, Serialize};

use super::finalize::{EtaArtifact, Route};
use super::fixtures::ComponentKind;
use super::recursion::support_mask;
use crate::capacity::{comparability_sweep, CapacityOptions, ComparabilityEntry};
use crate::error::Result;
use crate::geometry::raster::component_count;
use crate::geometry::{CellLabel, CompactSetModel, Connectivity, SetSpec};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssumptionOptions {
    /// Inner-boundary points sampled for (C).
    pub c_samples: usize,
    pub c_deltas: [f64; 4],
    /// Points and radii of the comparability sweep; 0 points skips it.
    pub sweep_points: usize,
    pub sweep_deltas: [f64; 2],
    pub sweep_k: f64,
    pub capacity: CapacityOptions,
}

impl Default for AssumptionOptions {
    fn default() -> Self {
        AssumptionOptions {
            c_samples: 16,
            c_deltas: [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            sweep_points: 2,
            sweep_deltas: [1.0 / 16.0, 1.0 / 32.0],
            sweep_k: 3.0,
            capacity: CapacityOptions {
                max_columns: 32,
                max_rounds: 20,
                modulus_grid: 0,
                ..CapacityOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub pass: bool,
    pub failures: Vec<String>,
}

impl CheckOutcome {
    fn from_failures(failures: Vec<String>) -> Self {
        CheckOutcome {
            pass: failures.is_empty(),
            failures,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FloorSample {
    pub lambda: C64,
    pub delta: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub a: CheckOutcome,
    pub b: CheckOutcome,
    pub c: CheckOutcome,
    /// Smallest bound / delta over the (C) samples; `None` when there is nothing to sample.
    pub c_floor: Option<f64>,
    pub c_samples: Vec<FloorSample>,
    pub sweep: Vec<ComparabilityEntry>,
    pub sweep_max_ratio: Option<f64>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.a.pass && self.b.pass && self.c.pass
    }
}

fn check_a(artifact: &EtaArtifact, model: &CompactSetModel) -> CheckOutcome {
    let mut failures = Vec::new();
    let fixtures = &artifact.fixtures.fixtures;
    for m in 1..=model.n_interior {
        let Some(fi) = fixtures
            .iter()
            .position(|f| f.kind == ComponentKind::Interior && f.component == m)
        else {
            if model.count(CellLabel::Interior(m)) >= 64 {
                failures.push(format!("interior component {m} has no fixture"));
            }
            continue;
        };
        let f = &fixtures[fi];
        let area = std::f64::consts::PI * f.delta * f.delta;
        let certs: Vec<_> = artifact
            .certificates
            .iter()
            .filter(|c| c.route == Route::Sample { fixture: fi })
            .collect();
        if !(area > 0.0) || certs.is_empty() {
            failures.push(format!("interior component {m}: no certified disk"));
        }
        for c in certs.iter().filter(|c| !c.certified) {
            failures.push(format!(
                "interior component {m}: residual {:.3e} at {} above {:.3e}",
                c.residual, c.point, c.bound
            ));
        }
    }
    CheckOutcome::from_failures(failures)
}

fn check_b(artifact: &EtaArtifact, model: &CompactSetModel) -> CheckOutcome {
    let mut failures = Vec::new();
    let spt = support_mask(model, &artifact.eta);
    let fixtures = &artifact.fixtures.fixtures;
    for m in 1..=model.n_holes {
        let u = model.complement_mask(m);
        if u.and(&spt).is_empty() {
            failures.push(format!("hole {m}: support of eta misses it"));
        }
        if component_count(&u.and_not(&spt), Connectivity::Four) != 1 {
            failures.push(format!("hole {m}: hole minus support is not connected"));
        }
        let Some(fi) = fixtures.iter().position(|f| f.kind == ComponentKind::Hole && f.component == m) else {
            failures.push(format!("hole {m}: no fixture"));
            continue;
        };
        match artifact.limits.iter().find(|l| l.fixture == fi) {
            Some(l) if l.converging => {}
            Some(_) => failures.push(format!("hole {m}: quotients along the sequence do not contract")),
            None => failures.push(format!("hole {m}: no limit sequence")),
        }
        for c in artifact
            .certificates
            .iter()
            .filter(|c| matches!(c.route, Route::Limit { fixture, .. } if fixture == fi))
        {
            if !c.certified {
                failures.push(format!("hole {m}: residual {:.3e} at {} above {:.3e}", c.residual, c.point, c.bound));
            }
        }
    }
    CheckOutcome::from_failures(failures)
}

/// Closed-form lower bound for the analytic capacity of the part of `B(lam, delta)`
/// covered by fixture lines and disks, resolved holes and perforation disks.
fn c_bound(artifact: &EtaArtifact, model: &CompactSetModel, lam: C64, delta: f64) -> f64 {
    let mut best = 0.0f64;
    for f in &artifact.fixtures.fixtures {
        // chord of the vertical line: gamma(segment) = length / 4
        let dx = (f.line_x - lam.re).abs();
        if dx < delta {
            let half = (delta * delta - dx * dx).sqrt();
            let lo = (lam.im - half).max(f.line_y.0);
            let hi = (lam.im + half).min(f.line_y.1);
            best = best.max((hi - lo).max(0.0) / 4.0);
        }
        if (f.lambda - lam).norm() + f.delta <= delta {
            best = best.max(f.delta);
        }
    }
    // resolved holes: cells fully inside the ball, area bound sqrt(area / (4 pi))
    let h = model.h;
    let mut area = 0.0;
    let (i0, i1) = (((lam.re - delta - model.x0) / h).floor().max(0.0) as usize, (((lam.re + delta - model.x0) / h).ceil().max(0.0) as usize).min(model.nx));
    let (j0, j1) = (((lam.im - delta - model.y0) / h).floor().max(0.0) as usize, (((lam.im + delta - model.y0) / h).ceil().max(0.0) as usize).min(model.ny));
    for iy in j0..j1 {
        for ix in i0..i1 {
            if let CellLabel::Complement(m) = model.label(ix, iy) {
                if m > 0 && model.cell_rect(ix, iy).far_dist_to_point(lam.re, lam.im) <= delta {
                    area += h * h;
                }
            }
        }
    }
    best = best.max((area / (4.0 * std::f64::consts::PI)).sqrt());
    // sub-grid perforation disks
    if let SetSpec::SwissCheese { perforation: Some(p), .. } = &model.spec {
        let s = p.spacing;
        let nx = ((p.max[0] - p.min[0]) / s).floor() as i64;
        let ny = ((p.max[1] - p.min[1]) / s).floor() as i64;
        let reach = delta - p.radius;
        if reach > 0.0 {
            let a0 = (((lam.re - reach - p.min[0]) / s).ceil() as i64).max(0);
            let a1 = (((lam.re + reach - p.min[0]) / s).floor() as i64).min(nx);
            let b0 = (((lam.im - reach - p.min[1]) / s).ceil() as i64).max(0);
            let b1 = (((lam.im + reach - p.min[1]) / s).floor() as i64).min(ny);
            let mut count = 0usize;
            for a in a0..=a1 {
                for b in b0..=b1 {
                    let c = C64::new(p.min[0] + a as f64 * s, p.min[1] + b as f64 * s);
                    if (c - lam).norm() <= reach {
                        count += 1;
                    }
                }
            }
            if count > 0 {
                best = best.max(p.radius).max(p.radius * (count as f64).sqrt() / 2.0);
            }
        }
    }
    best
}

fn inner_samples(model: &CompactSetModel, n: usize) -> Vec<C64> {
    let cells: Vec<(usize, usize)> = model.inner_boundary.iter_set().collect();
    if cells.is_empty() || n == 0 {
        return Vec::new();
    }
    let n = n.min(cells.len());
    (0..n)
        .map(|i| {
            let (ix, iy) = cells[(2 * i + 1) * cells.len() / (2 * n)];
            model.cell_center(ix, iy)
        })
        .collect()
}

pub fn check_assumptions(
    artifact: &EtaArtifact,
    model: &CompactSetModel,
    options: &AssumptionOptions,
) -> Result<AssumptionReport> {
    let a = check_a(artifact, model);
    let b = check_b(artifact, model);

    let mut samples = Vec::new();
    for lam in inner_samples(model, options.c_samples) {
        for &delta in &options.c_deltas {
            let bound = c_bound(artifact, model, lam, delta);
            samples.push(FloorSample {
                lambda: lam,
                delta,
                bound,
                ratio: bound / delta,
            });
        }
    }
    let c_floor = samples.iter().map(|s| s.ratio).reduce(f64::min);
    let c = match c_floor {
        Some(f) if !(f > 0.0) => CheckOutcome::from_failures(
            samples
                .iter()
                .filter(|s| !(s.ratio > 0.0))
                .map(|s| format!("no certified capacity near {} at radius {:.3e}", s.lambda, s.delta))
                .collect(),
        ),
        _ => CheckOutcome::from_failures(Vec::new()),
    };

    let (sweep, sweep_max_ratio) = if options.sweep_points > 0 {
        let lams = inner_samples(model, options.sweep_points);
        if lams.is_empty() {
            (Vec::new(), None)
        } else {
            let (entries, worst) = comparability_sweep(
                model,
                &artifact.eta,
                &lams,
                &options.sweep_deltas,
                options.sweep_k,
                options.capacity,
            )?;
            (entries, Some(worst))
        }
    } else {
        (Vec::new(), None)
    };

    Ok(AssumptionReport {
        a,
        b,
        c,
        c_floor,
        c_samples: samples,
        sweep,
        sweep_max_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::etabuild::{build_eta, EtaParams, EvalGrid, FixtureSet};
    use crate::transform::PlanarMeasure;

    fn annulus_artifact() -> (CompactSetModel, EtaArtifact) {
        let s = SetSpec::Annulus { center: [0.0, 0.0], r_inner: 0.5, r_outer: 1.0 };
        let model = CompactSetModel::build(&s, 1.0 / 128.0).unwrap();
        let params = EtaParams { n_max: 3, grid_spacing: 1.0 / 32.0, ..EtaParams::default() };
        let art = build_eta(&model, &params).unwrap();
        (model, art)
    }

    #[test]
    fn annulus_passes_and_uncharged_hole_fails() {
        let (model, art) = annulus_artifact();
        art.validate().unwrap();
        let opts = AssumptionOptions { sweep_points: 0, ..AssumptionOptions::default() };
        let rep = check_assumptions(&art, &model, &opts).unwrap();
        assert!(rep.a.pass, "{:?}", rep.a.failures);
        assert!(rep.b.pass, "{:?}", rep.b.failures);
        assert!(rep.c.pass);
        // no inner boundary on an annulus
        assert!(rep.c_floor.is_none());

        let mut bare = art.clone();
        bare.eta = PlanarMeasure::zero();
        bare.limits.clear();
        let rep = check_assumptions(&bare, &model, &opts).unwrap();
        assert!(!rep.b.pass);
        assert!(rep.b.failures.iter().any(|f| f.contains("misses")));
    }

    #[test]
    fn perforation_gives_positive_floor() {
        let h = 1.0 / 64.0;
        let s = SetSpec::SwissCheese {
            base: Box::new(SetSpec::Square { center: [0.5, 0.5], side: 1.0 }),
            holes: vec![],
            perforation: Some(crate::geometry::Perforation {
                min: [0.1, 0.1],
                max: [0.9, 0.3],
                spacing: h,
                radius: h / 8.0,
            }),
        };
        let model = CompactSetModel::build(&s, h).unwrap();
        let art = EtaArtifact {
            params: EtaParams::default(),
            fixtures: FixtureSet { fixtures: Vec::new(), warnings: Vec::new() },
            e_cells: 0,
            e_pieces: 0,
            ledger: Vec::new(),
            level_masses: Vec::new(),
            points: Vec::new(),
            fits: Vec::new(),
            defects: Vec::new(),
            eta: PlanarMeasure::zero(),
            normalization: 1.0,
            grid: EvalGrid { spacing: 1.0, points: Vec::new() },
            fine_max: 0.0,
            mass: 0.0,
            mass_identity_error: 0.0,
            certificates: Vec::new(),
            limits: Vec::new(),
            consistency: Vec::new(),
            modulus: None,
            violations: Vec::new(),
        };
        let rep = check_assumptions(&art, &model, &AssumptionOptions { sweep_points: 0, ..Default::default() }).unwrap();
        let floor = rep.c_floor.unwrap();
        assert!(floor > 0.0 && rep.c.pass, "floor {floor}");
    }
}
