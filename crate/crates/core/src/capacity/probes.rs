use serde::{Deserialize, Serialize};

use super::{alpha_lower_bound, cell_dictionary, gamma_lower_bound, restricted_capacity, CapacityOptions};
use crate::error::Result;
use crate::geometry::{CellLabel, CompactSetModel, Rect};
use crate::transform::PlanarMeasure;
use crate::C64;

/// Lattice cells of the model whose centers lie in `B(center, r)` and whose label
/// passes `keep`. Cells outside the model frame count as `Complement(0)`.
pub fn cells_in_ball(
    model: &CompactSetModel,
    center: C64,
    r: f64,
    keep: impl Fn(CellLabel) -> bool,
) -> Vec<Rect> {
    let h = model.h;
    let i0 = ((center.re - r - model.x0) / h).floor() as i64;
    let i1 = ((center.re + r - model.x0) / h).ceil() as i64;
    let j0 = ((center.im - r - model.y0) / h).floor() as i64;
    let j1 = ((center.im + r - model.y0) / h).ceil() as i64;
    let mut out = Vec::new();
    for j in j0..=j1 {
        for i in i0..=i1 {
            let x = model.x0 + (i as f64 + 0.5) * h;
            let y = model.y0 + (j as f64 + 0.5) * h;
            if (x - center.re).hypot(y - center.im) > r {
                continue;
            }
            let inside = i >= 0 && j >= 0 && (i as usize) < model.nx && (j as usize) < model.ny;
            let label = if inside {
                model.label(i as usize, j as usize)
            } else {
                CellLabel::Complement(0)
            };
            if keep(label) {
                out.push(Rect::new(x - 0.5 * h, y - 0.5 * h, x + 0.5 * h, y + 0.5 * h));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparabilityEntry {
    pub lambda: [f64; 2],
    pub delta: f64,
    pub k: f64,
    /// Continuous capacity of `B(lambda, delta)` minus the interior of K.
    pub lhs: f64,
    /// Capacity of `B(lambda, k delta)` relative to the reference measure.
    pub mid: f64,
    /// Capacity of `B(lambda, k delta)` minus K.
    pub rhs: f64,
    pub ratio: f64,
    pub flagged: bool,
}

pub fn comparability_probe(
    model: &CompactSetModel,
    eta: &PlanarMeasure,
    lambda: C64,
    delta: f64,
    k: f64,
    options: CapacityOptions,
) -> Result<ComparabilityEntry> {
    let not_interior = cells_in_ball(model, lambda, delta, |l| !matches!(l, CellLabel::Interior(_)));
    let lhs = alpha_lower_bound(cell_dictionary(&not_interior, options.max_columns), options)?;
    let big = k * delta;
    let mid = restricted_capacity(eta, |c| (c.anchor() - lambda).norm() <= big, options)?;
    let outside = cells_in_ball(model, lambda, big, |l| matches!(l, CellLabel::Complement(_)));
    let rhs = gamma_lower_bound(cell_dictionary(&outside, options.max_columns), options)?;
    let denom = mid.certified + rhs.certified;
    let ratio = if lhs.certified == 0.0 {
        0.0
    } else if denom > 0.0 {
        lhs.certified / denom
    } else {
        f64::INFINITY
    };
    let unconverged = |c: &super::CapacityCertificate| c.flag.as_deref() == Some("unconverged");
    Ok(ComparabilityEntry {
        lambda: [lambda.re, lambda.im],
        delta,
        k,
        lhs: lhs.certified,
        mid: mid.certified,
        rhs: rhs.certified,
        ratio,
        flagged: unconverged(&lhs) || unconverged(&mid) || unconverged(&rhs),
    })
}

/// Runs the probe over all `(lambda, delta)` pairs; returns the entries and the
/// largest finite ratio.
pub fn comparability_sweep(
    model: &CompactSetModel,
    eta: &PlanarMeasure,
    lambdas: &[C64],
    deltas: &[f64],
    k: f64,
    options: CapacityOptions,
) -> Result<(Vec<ComparabilityEntry>, f64)> {
    let mut out = Vec::new();
    let mut worst = 0.0f64;
    for &l in lambdas {
        for &d in deltas {
            let e = comparability_probe(model, eta, l, d, k, options)?;
            if e.ratio.is_finite() {
                worst = worst.max(e.ratio);
            }
            out.push(e);
        }
    }
    Ok((out, worst))
}

#[derive(Debug, Clone, Serialize)]
pub struct SemiadditivityReport {
    pub first: f64,
    pub second: f64,
    pub union: f64,
    pub ratio: f64,
}

pub fn semiadditivity_probe(e1: &[Rect], e2: &[Rect], options: CapacityOptions) -> Result<SemiadditivityReport> {
    let g1 = gamma_lower_bound(cell_dictionary(e1, options.max_columns), options)?.certified;
    let g2 = gamma_lower_bound(cell_dictionary(e2, options.max_columns), options)?.certified;
    let all: Vec<Rect> = e1.iter().chain(e2).copied().collect();
    let g = gamma_lower_bound(cell_dictionary(&all, options.max_columns), options)?.certified;
    let denom = g1 + g2;
    Ok(SemiadditivityReport {
        first: g1,
        second: g2,
        union: g,
        ratio: if denom > 0.0 { g / denom } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SetSpec;

    fn disk_cells(cx: f64, h: f64) -> Vec<Rect> {
        let n = (1.0 / h) as i64;
        let mut v = Vec::new();
        for i in -n..n {
            for j in -n..n {
                let r = Rect::new(cx + i as f64 * h, j as f64 * h, cx + (i + 1) as f64 * h, (j + 1) as f64 * h);
                if r.far_dist_to_point(cx, 0.0) <= 1.0 {
                    v.push(r);
                }
            }
        }
        v
    }

    #[test]
    fn semiadditivity_with_empty_part() {
        let r = semiadditivity_probe(&disk_cells(0.0, 1.0 / 16.0), &[], CapacityOptions::default()).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-3, "{r:?}");
    }

    #[test]
    fn far_disks_nearly_add() {
        let r = semiadditivity_probe(&disk_cells(-10.0, 1.0 / 16.0), &disk_cells(10.0, 1.0 / 16.0), CapacityOptions::default())
            .unwrap();
        assert!(r.ratio <= 1.1, "{r:?}");
    }

    #[test]
    fn probe_deep_inside_is_zero() {
        let spec = SetSpec::Disk { center: [0.0, 0.0], radius: 1.0 };
        let model = CompactSetModel::build(&spec, 1.0 / 64.0).unwrap();
        let e = comparability_probe(&model, &PlanarMeasure::zero(), C64::new(0.0, 0.0), 0.1, 2.0, CapacityOptions::default())
            .unwrap();
        assert_eq!(e.lhs, 0.0);
        assert_eq!(e.ratio, 0.0);
    }
}
