//! Lower bounds for positive-measure capacities by linear programming.
//!
//! A dictionary of columns (fixed positive measures) is combined with
//! nonnegative weights to maximize total mass subject to `|C(eta)| <= 1`. The
//! modulus constraint is linearized by half-planes at a fixed set of angles plus
//! exact-angle cuts at points where a finer scan finds a violation. The result is
//! certified by dividing by the measured maximum of `|C(eta)|` on a verification
//! grid.

mod probes;

pub use probes::{
    cells_in_ball, comparability_probe, comparability_sweep, semiadditivity_probe, ComparabilityEntry,
    SemiadditivityReport,
};

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{modulus_of_continuity, ModulusReport, Rect};
use crate::lp::Lp;
use crate::transform::{Carrier, FastTransform, PlanarMeasure};
use crate::C64;

/// A fixed positive measure used as one LP variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub parts: Vec<(Carrier, f64)>,
}

impl Column {
    pub fn single(c: Carrier) -> Self {
        Column { parts: vec![(c, 1.0)] }
    }

    pub fn mass(&self) -> f64 {
        self.parts.iter().map(|(c, w)| w * c.mass()).sum()
    }

    pub fn transform(&self, z: C64) -> Result<C64> {
        let mut acc = C64::new(0.0, 0.0);
        for (c, w) in &self.parts {
            acc += *w * c.transform(z)?;
        }
        Ok(acc)
    }

    pub fn is_continuous(&self) -> bool {
        self.parts.iter().all(|(c, _)| c.is_continuous())
    }

    pub fn bbox(&self) -> Rect {
        self.parts
            .iter()
            .map(|(c, _)| c.bbox())
            .reduce(|a, b| a.union(&b))
            .expect("column without carriers")
    }
}

/// Groups unit-density cells into at most `max_columns` spatial clusters.
pub fn cell_dictionary(cells: &[Rect], max_columns: usize) -> Vec<Column> {
    if cells.is_empty() {
        return Vec::new();
    }
    let bb = cells.iter().copied().reduce(|a, b| a.union(&b)).unwrap();
    let mut bin = cells.iter().map(|r| r.width().max(r.height())).fold(0.0, f64::max);
    let max_columns = max_columns.max(1);
    loop {
        let mut groups: BTreeMap<(i64, i64), Vec<(Carrier, f64)>> = BTreeMap::new();
        for r in cells {
            let (cx, cy) = r.center();
            let key = (((cx - bb.x0) / bin).floor() as i64, ((cy - bb.y0) / bin).floor() as i64);
            groups.entry(key).or_default().push((Carrier::Cell(*r), 1.0));
        }
        if groups.len() <= max_columns {
            return groups
                .into_values()
                .map(|parts| {
                    let m = PlanarMeasure::positive(parts).expect("cells are valid carriers").consolidate();
                    Column {
                        parts: m.items().iter().map(|(c, w)| (*c, w.re)).collect(),
                    }
                })
                .collect();
        }
        bin *= 2.0;
    }
}

/// Overlapping windowed segments covering `[p, q]`; interior windows sum to a
/// constant density.
pub fn segment_dictionary(p: C64, q: C64, pieces: usize) -> Vec<Column> {
    let n = pieces.max(1);
    let step = (q - p) / (n as f64 + 1.0);
    (0..n)
        .map(|k| {
            Column::single(Carrier::Segment {
                p: p + step * k as f64,
                q: p + step * (k as f64 + 2.0),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacityOptions {
    /// Half-planes per collocation point.
    pub angles: usize,
    /// Relative violation accepted by the cutting-plane loop.
    pub tol: f64,
    pub max_rounds: usize,
    pub max_columns: usize,
    /// Scan spacing; `None` picks `diam / 96`.
    pub spacing: Option<f64>,
    pub max_cuts_per_round: usize,
    /// Base grid of the modulus-of-continuity sample in `alpha_lower_bound`; 0 skips it.
    pub modulus_grid: usize,
}

impl Default for CapacityOptions {
    fn default() -> Self {
        CapacityOptions {
            angles: 16,
            tol: 1e-6,
            max_rounds: 40,
            max_columns: 128,
            spacing: None,
            max_cuts_per_round: 400,
            modulus_grid: 24,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CapacityProblem {
    pub columns: Vec<Column>,
    /// Optional per-column upper bounds on the weights.
    pub upper: Option<Vec<f64>>,
    pub options: CapacityOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundLog {
    pub round: usize,
    pub rows: usize,
    pub objective: f64,
    pub max_modulus: f64,
    pub cuts: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityCertificate {
    /// Extremal measure normalized so that `|C| <= 1` on the verification grid.
    pub measure: PlanarMeasure,
    pub raw_objective: f64,
    /// Maximum of `|C|` of the unnormalized LP measure on the verification grid.
    pub normalizer: f64,
    pub certified: f64,
    pub rounds: Vec<RoundLog>,
    pub converged: bool,
    /// Verification grid spacing and region.
    pub grid_spacing: f64,
    pub grid_region: Rect,
    pub modulus: Option<ModulusReport>,
    pub flag: Option<String>,
}

impl CapacityCertificate {
    pub fn empty(flag: &str) -> Self {
        CapacityCertificate {
            measure: PlanarMeasure::zero(),
            raw_objective: 0.0,
            normalizer: 1.0,
            certified: 0.0,
            rounds: Vec::new(),
            converged: true,
            grid_spacing: 0.0,
            grid_region: Rect::new(0.0, 0.0, 0.0, 0.0),
            modulus: None,
            flag: Some(flag.to_string()),
        }
    }
}

fn grid_points(r: &Rect, spacing: f64) -> Vec<C64> {
    let nx = (r.width() / spacing).ceil().max(1.0) as usize;
    let ny = (r.height() / spacing).ceil().max(1.0) as usize;
    let mut pts = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            pts.push(C64::new(
                r.x0 + r.width() * i as f64 / nx as f64,
                r.y0 + r.height() * j as f64 / ny as f64,
            ));
        }
    }
    pts
}

/// Points just off each side of every curve carrier, approximating one-sided limits.
fn curve_points(columns: &[Column], spacing: f64) -> Vec<C64> {
    let mut pts = Vec::new();
    for col in columns {
        for (c, _) in &col.parts {
            match *c {
                Carrier::Segment { p, q } => {
                    let l = (q - p).norm();
                    let n = (l / spacing).ceil().max(2.0) as usize;
                    let off = C64::new(0.0, 1e-9 * l) * (q - p) / l;
                    for k in 0..=n {
                        let z = p + (q - p) * (k as f64 / n as f64);
                        pts.push(z + off);
                        pts.push(z - off);
                    }
                }
                Carrier::Arc { center, radius, theta0, theta1 } => {
                    let n = (radius * (theta1 - theta0) / spacing).ceil().max(2.0) as usize;
                    for k in 0..=n {
                        let t = theta0 + (theta1 - theta0) * k as f64 / n as f64;
                        for s in [1.0 + 1e-9, 1.0 - 1e-9] {
                            pts.push(center + C64::from_polar(radius * s, t));
                        }
                    }
                }
                _ => {}
            }
        }
    }
    pts
}

struct Geometry {
    region: Rect,
    spacing: f64,
    far: Vec<C64>,
}

impl Geometry {
    fn new(columns: &[Column], opts: &CapacityOptions) -> Self {
        let bb = columns.iter().map(|c| c.bbox()).reduce(|a, b| a.union(&b)).unwrap();
        let diam = bb.width().hypot(bb.height());
        let spacing = opts.spacing.unwrap_or(diam / 96.0);
        let region = bb.inflate(2.0 * spacing);
        let (cx, cy) = bb.center();
        let far = (0..64)
            .map(|k| C64::new(cx, cy) + C64::from_polar(2.0 * diam, TAU * k as f64 / 64.0))
            .collect();
        Geometry { region, spacing, far }
    }

    fn points(&self, columns: &[Column], factor: f64) -> Vec<C64> {
        let s = self.spacing * factor;
        let mut pts = grid_points(&self.region, s);
        pts.extend(curve_points(columns, 0.5 * s));
        pts.extend(self.far.iter().copied());
        pts
    }
}

fn eval_row(columns: &[Column], z: C64) -> Result<Vec<C64>> {
    columns.iter().map(|c| c.transform(z)).collect()
}

/// Rows of column transforms at `pts`; columns with many parts use the tiled evaluator.
fn scan_matrix(columns: &[Column], pts: &[C64], extent: f64) -> Result<Vec<Vec<C64>>> {
    let mut rows = vec![vec![C64::new(0.0, 0.0); columns.len()]; pts.len()];
    for (k, col) in columns.iter().enumerate() {
        if col.parts.len() > 32 && col.is_continuous() {
            let ft = FastTransform::new(&PlanarMeasure::positive(col.parts.clone())?, extent / 8.0);
            for (row, &z) in rows.iter_mut().zip(pts) {
                row[k] = ft.eval(z)?;
            }
        } else {
            for (row, &z) in rows.iter_mut().zip(pts) {
                row[k] = col.transform(z)?;
            }
        }
    }
    Ok(rows)
}

fn measure_of(columns: &[Column], x: &[f64]) -> Result<PlanarMeasure> {
    let mut items = Vec::new();
    for (col, &w) in columns.iter().zip(x) {
        if w > 0.0 {
            for (c, cw) in &col.parts {
                items.push((*c, w * cw));
            }
        }
    }
    Ok(PlanarMeasure::positive(items)?.consolidate())
}

fn add_cut(lp: &mut Lp, row: &[C64], theta: f64) -> Result<()> {
    let rot = C64::from_polar(1.0, -theta);
    let coeffs: Vec<f64> = row.iter().map(|g| (rot * g).re).collect();
    lp.add_row(&coeffs, 1.0)
}

/// Solves the capacity LP; see the module documentation.
pub fn capacity_lower_bound(problem: &CapacityProblem) -> Result<CapacityCertificate> {
    let columns = &problem.columns;
    if columns.is_empty() {
        return Ok(CapacityCertificate::empty("nothing to charge"));
    }
    let opts = problem.options;
    let geo = Geometry::new(columns, &opts);
    let masses: Vec<f64> = columns.iter().map(|c| c.mass()).collect();
    let mut lp = Lp::new(masses.clone());
    if let Some(up) = &problem.upper {
        for (k, &u) in up.iter().enumerate() {
            let mut row = vec![0.0; columns.len()];
            row[k] = 1.0;
            lp.add_row(&row, u.max(0.0))?;
        }
    }
    for z in geo.points(columns, 2.0) {
        let row = eval_row(columns, z)?;
        for j in 0..opts.angles {
            add_cut(&mut lp, &row, TAU * j as f64 / opts.angles as f64)?;
        }
    }
    let scan = geo.points(columns, 1.0);
    // column transforms at scan points, computed once
    let scan_rows = scan_matrix(columns, &scan, geo.region.width().max(geo.region.height()))?;
    let mut rounds = Vec::new();
    let mut converged = false;
    let mut x = vec![0.0; columns.len()];
    for round in 0..opts.max_rounds {
        let sol = lp.solve()?;
        x = sol.x;
        let mut viol: Vec<(f64, usize, C64)> = Vec::new();
        let mut maxm = 0.0f64;
        for (i, row) in scan_rows.iter().enumerate() {
            let v: C64 = row.iter().zip(&x).filter(|(_, w)| **w > 0.0).map(|(g, w)| g * w).sum();
            let m = v.norm();
            maxm = maxm.max(m);
            if m > 1.0 + opts.tol {
                viol.push((m, i, v));
            }
        }
        viol.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        viol.truncate(opts.max_cuts_per_round);
        rounds.push(RoundLog {
            round,
            rows: lp.num_rows(),
            objective: sol.objective,
            max_modulus: maxm,
            cuts: viol.len(),
        });
        if viol.is_empty() {
            converged = true;
            break;
        }
        for (_, i, v) in &viol {
            add_cut(&mut lp, &scan_rows[*i], v.arg())?;
        }
    }
    if !converged {
        // the last round added cuts; use the solution they produce
        let sol = lp.solve()?;
        x = sol.x;
    }
    let raw: f64 = x.iter().zip(&masses).map(|(a, b)| a * b).sum();
    let eta = measure_of(columns, &x)?;
    let m = max_modulus(&eta, &geo.points(columns, 0.5), geo.region.width().max(geo.region.height()))?;
    if m <= 0.0 {
        return Err(Error::Invariant("extremal measure has vanishing transform".into()));
    }
    let normalizer = m;
    let measure = eta.scaled(C64::new(1.0 / normalizer, 0.0));
    let certified = measure.mass().re;
    Ok(CapacityCertificate {
        measure,
        raw_objective: raw,
        normalizer: m,
        certified,
        rounds,
        converged,
        grid_spacing: 0.5 * geo.spacing,
        grid_region: geo.region,
        modulus: None,
        flag: if converged { None } else { Some("unconverged".into()) },
    })
}

/// `max |C(mu)|` over `pts`; measures with many carriers go through the tiled evaluator.
fn max_modulus(mu: &PlanarMeasure, pts: &[C64], extent: f64) -> Result<f64> {
    let mut m = 0.0f64;
    if mu.len() > 64 {
        let ft = FastTransform::new(mu, extent / 8.0);
        for &z in pts {
            m = m.max(ft.eval(z)?.norm());
        }
    } else {
        for &z in pts {
            m = m.max(mu.transform(z)?.norm());
        }
    }
    Ok(m)
}

/// Maximum of `|C(mu)|` on the verification grid recorded in a certificate,
/// recomputed from scratch.
pub fn verification_max(cert: &CapacityCertificate) -> Result<f64> {
    if cert.measure.is_empty() {
        return Ok(0.0);
    }
    let cols = vec![Column {
        parts: cert.measure.items().iter().map(|(c, w)| (*c, w.re)).collect(),
    }];
    let mut pts = grid_points(&cert.grid_region, cert.grid_spacing);
    pts.extend(curve_points(&cols, 0.5 * cert.grid_spacing));
    let mut m = 0.0f64;
    for z in pts {
        m = m.max(cert.measure.transform(z)?.norm());
    }
    Ok(m)
}

/// `gamma_+`-type bound: any carriers.
pub fn gamma_lower_bound(columns: Vec<Column>, options: CapacityOptions) -> Result<CapacityCertificate> {
    capacity_lower_bound(&CapacityProblem {
        columns,
        upper: None,
        options,
    })
}

/// `alpha_+`-type bound: only columns with continuous transforms are admitted, and
/// the certificate records a sampled modulus of continuity of the result.
pub fn alpha_lower_bound(columns: Vec<Column>, options: CapacityOptions) -> Result<CapacityCertificate> {
    let cols: Vec<Column> = columns.into_iter().filter(|c| c.is_continuous()).collect();
    let mut cert = capacity_lower_bound(&CapacityProblem {
        columns: cols,
        upper: None,
        options,
    })?;
    if options.modulus_grid == 0 {
        return Ok(cert);
    }
    if let Some(bb) = cert.measure.support_bbox() {
        let d = bb.width().hypot(bb.height());
        let region = bb.inflate(0.1 * d);
        let mu = cert.measure.clone();
        let rep = modulus_of_continuity(
            |z| mu.transform(z).unwrap_or(C64::new(f64::NAN, 0.0)),
            &region,
            &[d / 4.0, d / 16.0, d / 64.0],
            options.modulus_grid,
        )?;
        cert.modulus = Some(rep);
    }
    Ok(cert)
}

/// Bound for the capacity of `target` relative to densities `0 <= f <= 1` against a
/// fixed reference measure: carriers of `eta` inside `target` are grouped into at
/// most `max_columns` clusters, each with its own constant density.
pub fn restricted_capacity(
    eta: &PlanarMeasure,
    target: impl Fn(&Carrier) -> bool,
    options: CapacityOptions,
) -> Result<CapacityCertificate> {
    if !eta.is_positive() {
        return Err(Error::InvalidMeasure("reference measure must be positive".into()));
    }
    let kept: Vec<(Carrier, f64)> = eta
        .items()
        .iter()
        .filter(|(c, _)| c.is_continuous() && target(c))
        .map(|(c, w)| (*c, w.re))
        .collect();
    if kept.is_empty() {
        return Ok(CapacityCertificate::empty("reference measure charges no mass in the target"));
    }
    let bb = kept.iter().map(|(c, _)| c.bbox()).reduce(|a, b| a.union(&b)).unwrap();
    let mut bin = kept.iter().map(|(c, _)| c.bbox().width().max(c.bbox().height())).fold(0.0, f64::max);
    let columns = loop {
        let mut groups: BTreeMap<(i64, i64), Vec<(Carrier, f64)>> = BTreeMap::new();
        for (c, w) in &kept {
            let a = c.anchor();
            let key = (((a.re - bb.x0) / bin).floor() as i64, ((a.im - bb.y0) / bin).floor() as i64);
            groups.entry(key).or_default().push((*c, *w));
        }
        if groups.len() <= options.max_columns.max(1) {
            break groups.into_values().map(|parts| Column { parts }).collect::<Vec<_>>();
        }
        bin *= 2.0;
    };
    let upper = vec![1.0; columns.len()];
    capacity_lower_bound(&CapacityProblem {
        columns,
        upper: Some(upper),
        options,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_dictionary_gives_zero() {
        let c = gamma_lower_bound(Vec::new(), CapacityOptions::default()).unwrap();
        assert_eq!(c.certified, 0.0);
    }

    #[test]
    fn single_disk_carrier_is_nearly_exact() {
        // uniform area measure on the unit disk has |C| = |z| inside; only the grid gap
        // at the rim separates the bound from 1
        let cols = vec![Column::single(Carrier::Disk { center: C64::new(0.0, 0.0), radius: 1.0 })];
        let c = gamma_lower_bound(cols, CapacityOptions::default()).unwrap();
        assert!((c.certified - 1.0).abs() < 5e-3, "{}", c.certified);
        assert!((verification_max(&c).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cell_dictionary_respects_cap() {
        let cells: Vec<Rect> = (0..40)
            .flat_map(|i| (0..40).map(move |j| Rect::new(i as f64, j as f64, i as f64 + 1.0, j as f64 + 1.0)))
            .collect();
        let d = cell_dictionary(&cells, 30);
        assert!(d.len() <= 30);
        let total: f64 = d.iter().map(|c| c.mass()).sum();
        assert!((total - 1600.0).abs() < 1e-9);
    }
}

#[cfg(test)]
mod bounds {
    use super::*;
    use std::time::Instant;

    #[test]
    fn unit_disk_from_cells() {
        let t = Instant::now();
        let h = 1.0 / 32.0;
        let mut cells = Vec::new();
        for i in -32..32 {
            for j in -32..32 {
                let r = Rect::new(i as f64 * h, j as f64 * h, (i + 1) as f64 * h, (j + 1) as f64 * h);
                if r.far_dist_to_point(0.0, 0.0) <= 1.0 {
                    cells.push(r);
                }
            }
        }
        let c = gamma_lower_bound(cell_dictionary(&cells, 128), CapacityOptions::default()).unwrap();
        eprintln!("disk {} raw {} M {} rounds {} {:?}", c.certified, c.raw_objective, c.normalizer, c.rounds.len(), t.elapsed());
        assert!(c.certified >= 0.93 && c.certified <= 1.02, "{}", c.certified);
    }

    #[test]
    fn segment_of_length_four() {
        let t = Instant::now();
        let cols = segment_dictionary(C64::new(-2.0, 0.0), C64::new(2.0, 0.0), 32);
        let c = gamma_lower_bound(cols, CapacityOptions::default()).unwrap();
        eprintln!("segment {} raw {} M {} rounds {} {:?}", c.certified, c.raw_objective, c.normalizer, c.rounds.len(), t.elapsed());
        assert!(c.certified >= 0.85 && c.certified <= 1.05, "{}", c.certified);
    }
}
