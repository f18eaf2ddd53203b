//! Stage execution, artifact files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Bound, Command, ExperimentConfig};
use crate::approx::{density_experiment, make_test_suite, DensityReport};
use crate::capacity::{alpha_lower_bound, cell_dictionary, gamma_lower_bound, verification_max};
use crate::error::{Error, Result};
use crate::etabuild::{build_eta, check_assumptions, AssumptionReport, EtaArtifact, Route};
use crate::geometry::{Bump, CompactSetModel, Rect};
use crate::transform::diagnostics::dbar_residual;
use crate::transform::table::write_table;
use crate::transform::{Carrier, FastTransform, PlanarMeasure};
use crate::vitushkin::{run_scheme, validation_points, BlockSource, Field};
use crate::C64;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
    pub pass: bool,
    pub summary: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    pub version: String,
    /// Configuration with every default filled in.
    pub config: ExperimentConfig,
    pub stages: Vec<StageRecord>,
    /// Files written, relative to the output directory.
    pub artifacts: Vec<String>,
    pub pass: bool,
    pub failure: Option<String>,
    pub exit_code: i32,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(p, body)?;
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let body = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
        self.text(name, &body)
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        let p = self.path(name);
        fs::write(p, bytes)?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

struct Stage {
    pass: bool,
    summary: Vec<String>,
}

#[derive(Serialize)]
struct KeyValue<'a> {
    quantity: &'a str,
    value: f64,
}

fn build_set(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(CompactSetModel, Stage)> {
    let model = CompactSetModel::build(&cfg.set, cfg.h)?;
    let p = out.path("set.pgm");
    model.export_pgm(&p)?;
    let summary = vec![format!(
        "{} x {} cells, {} holes, {} interior components, {} inner boundary cells",
        model.nx,
        model.ny,
        model.n_holes,
        model.n_interior,
        model.inner_boundary.count()
    )];
    Ok((model, Stage { pass: true, summary }))
}

fn k_cells(model: &CompactSetModel) -> Vec<Rect> {
    model.k_mask().iter_set().map(|(ix, iy)| model.cell_rect(ix, iy)).collect()
}

fn stage_cap(cfg: &ExperimentConfig, model: &CompactSetModel, out: &mut Outputs) -> Result<Stage> {
    let cols = cell_dictionary(&k_cells(model), cfg.cap.options.max_columns);
    let cert = match cfg.cap.bound {
        Bound::Alpha => alpha_lower_bound(cols, cfg.cap.options)?,
        Bound::Gamma => gamma_lower_bound(cols, cfg.cap.options)?,
    };
    let fine = verification_max(&cert)?;
    let rows = [
        KeyValue { quantity: "certified", value: cert.certified },
        KeyValue { quantity: "raw_objective", value: cert.raw_objective },
        KeyValue { quantity: "normalizer", value: cert.normalizer },
        KeyValue { quantity: "fine_grid_max", value: fine },
        KeyValue { quantity: "converged", value: if cert.converged { 1.0 } else { 0.0 } },
        KeyValue { quantity: "rounds", value: cert.rounds.len() as f64 },
    ];
    out.csv("cap.csv", rows)?;
    out.csv("cap_rounds.csv", cert.rounds.iter())?;
    out.text("cap_measure.txt", &write_table(&cert.measure))?;
    let pass = cert.converged && fine <= 1.0 + 1e-6;
    Ok(Stage {
        pass,
        summary: vec![format!(
            "certified {:.6} after {} rounds, fine-grid max {:.9}",
            cert.certified,
            cert.rounds.len(),
            fine
        )],
    })
}

#[derive(Serialize)]
struct GridValue {
    x: f64,
    y: f64,
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct DbarRow {
    cx: f64,
    cy: f64,
    delta: f64,
    re: f64,
    im: f64,
    relative: f64,
}

fn stage_transform(cfg: &ExperimentConfig, model: &CompactSetModel, out: &mut Outputs) -> Result<Stage> {
    let items: Vec<(Carrier, f64)> = k_cells(model).into_iter().map(|r| (Carrier::Cell(r), 1.0)).collect();
    let mu = PlanarMeasure::positive(items)?;
    let mass = mu.mass().re;
    let fr = model.frame_rect();
    let side = fr.width().max(fr.height());
    let ft = FastTransform::new(&mu, side / 16.0);
    let n = cfg.transform.grid;
    let mut rows = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let z = C64::new(
                fr.x0 + fr.width() * i as f64 / (n - 1) as f64,
                fr.y0 + fr.height() * j as f64 / (n - 1) as f64,
            );
            let v = ft.eval(z)?;
            rows.push(GridValue { x: z.re, y: z.im, re: v.re, im: v.im });
        }
    }
    out.csv("transform.csv", rows)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let delta = cfg.transform.bump_size * side;
    let mut worst = 0.0f64;
    let mut dbar = Vec::new();
    for _ in 0..cfg.transform.bumps {
        let c = C64::new(rng.gen_range(fr.x0..fr.x1), rng.gen_range(fr.y0..fr.y1));
        let r = dbar_residual(&mu, &Bump { center: c, delta })?;
        let relative = r.norm() / mass;
        worst = worst.max(relative);
        dbar.push(DbarRow { cx: c.re, cy: c.im, delta, re: r.re, im: r.im, relative });
    }
    out.csv("transform_dbar.csv", dbar)?;
    Ok(Stage {
        pass: worst <= cfg.transform.dbar_tol,
        summary: vec![format!("mass {mass:.6}, worst dbar residual / mass {worst:.3e}")],
    })
}

#[derive(Serialize)]
struct VitushkinRow {
    delta: f64,
    error: f64,
    omega: f64,
    pieces: usize,
    blocks: usize,
    unmatched: usize,
    complete_groups: usize,
    incomplete_groups: usize,
    max_match_residual: f64,
    max_premise_ratio: f64,
    tail_ratio: f64,
}

fn stage_vitushkin(cfg: &ExperimentConfig, model: &CompactSetModel, out: &mut Outputs) -> Result<Stage> {
    let fr = model.frame_rect();
    let (cx, cy) = fr.center();
    let strip = match cfg.vitushkin.strip {
        Some([x0, y0, x1, y1]) => Rect::new(x0, y0, x1, y1),
        None => Rect::new(
            cx - 0.025 * fr.width(),
            cy - 0.15 * fr.height(),
            cx + 0.025 * fr.width(),
            cy + 0.15 * fr.height(),
        ),
    };
    let carrier = Carrier::Cell(strip);
    let field: Field = Arc::new(move |z| carrier.transform(z).unwrap_or(C64::new(f64::NAN, 0.0)));
    let mut opts = cfg.vitushkin.scheme.clone();
    opts.localize.breaks_x.extend([strip.x0, strip.x1]);
    opts.localize.breaks_y.extend([strip.y0, strip.y1]);
    let val = validation_points(model);
    let rep = run_scheme(field, &strip, BlockSource::RationalK(model), &cfg.vitushkin.deltas, &val, &opts)?;
    let rows: Vec<VitushkinRow> = rep
        .levels
        .iter()
        .map(|l| VitushkinRow {
            delta: l.delta,
            error: l.error,
            omega: l.omega,
            pieces: l.pieces,
            blocks: l.blocks,
            unmatched: l.unmatched,
            complete_groups: l.complete_groups,
            incomplete_groups: l.incomplete_groups,
            max_match_residual: l.max_match_residual,
            max_premise_ratio: l.max_premise_ratio,
            tail_ratio: l.tail_ratio,
        })
        .collect();
    out.csv("vitushkin.csv", rows)?;
    let worst = rep.levels.iter().map(|l| l.max_match_residual).fold(0.0, f64::max);
    let errors: Vec<String> = rep.levels.iter().map(|l| format!("{:.3e}", l.error)).collect();
    Ok(Stage {
        pass: worst <= cfg.vitushkin.match_tol,
        summary: vec![
            format!("errors {}", errors.join(", ")),
            format!("ratios {:?}", rep.ratios()),
            format!("worst matched c1 residual {worst:.3e}"),
        ],
    })
}

#[derive(Serialize)]
struct LevelRow {
    n: u32,
    delta: f64,
    charged: usize,
    dropped: usize,
    below_floor: usize,
    mass: f64,
    b_integral: f64,
    b_quotient: f64,
    b_n: f64,
    a_defect: f64,
    a_n: f64,
    xi_mass: f64,
    d_n: f64,
}

#[derive(Serialize)]
struct ResidualRow {
    route: String,
    index: usize,
    rung: u32,
    re: f64,
    im: f64,
    degree: usize,
    fit_error: f64,
    residual: f64,
    identity_residual: f64,
    bound: f64,
    certified: bool,
}

#[derive(Serialize)]
struct PolynomialEntry<'a> {
    route: &'a Route,
    point: C64,
    handle: &'a crate::poly::BasisPolynomial,
}

fn write_eta(art: &EtaArtifact, out: &mut Outputs) -> Result<()> {
    out.json("eta.json", art)?;
    out.text("eta_measure.txt", &write_table(&art.eta))?;
    let deltas: Vec<f64> = art.ledger.iter().map(|l| 0.5f64.powi(l.n as i32)).collect();
    out.csv(
        "eta_weights.csv",
        art.ledger.iter().zip(deltas).map(|(l, delta)| LevelRow {
            n: l.n,
            delta,
            charged: l.m_n,
            dropped: 0,
            below_floor: 0,
            mass: l.mass,
            b_integral: l.b_integral,
            b_quotient: l.b_quotient,
            b_n: l.b_n,
            a_defect: l.a_defect,
            a_n: l.a_n,
            xi_mass: l.xi_mass,
            d_n: l.d_n,
        }),
    )?;
    let rows = art.certificates.iter().map(|c| {
        let (route, index, rung) = match c.route {
            Route::Ladder { k, l } => ("ladder", k, l),
            Route::Limit { fixture, j } => ("limit", fixture, j),
            Route::Sample { fixture } => ("sample", fixture, 0),
        };
        ResidualRow {
            route: route.to_string(),
            index,
            rung,
            re: c.point.re,
            im: c.point.im,
            degree: c.degree,
            fit_error: c.fit_error,
            residual: c.residual,
            identity_residual: c.identity_residual,
            bound: c.bound,
            certified: c.certified,
        }
    });
    out.csv("eta_residuals.csv", rows)?;
    let polys: Vec<PolynomialEntry> = art
        .certificates
        .iter()
        .map(|c| PolynomialEntry { route: &c.route, point: c.point, handle: &c.handle })
        .collect();
    out.json("eta_polynomials.json", &polys)?;
    Ok(())
}

fn eta_stage(art: &EtaArtifact) -> Stage {
    let worst = art
        .ladder_certificates()
        .map(|c| c.residual / c.bound)
        .fold(0.0, f64::max);
    let mut summary = vec![
        format!("{} levels, {} division points, mass {:.6e}", art.ledger.len(), art.points.len(), art.mass),
        format!("fine-grid max |C eta| {:.9}", art.fine_max),
        format!("worst ladder residual / bound {worst:.3e}"),
    ];
    summary.extend(art.violations.iter().cloned());
    Stage {
        pass: art.violations.is_empty(),
        summary,
    }
}

fn load_artifact(path: &Path) -> Result<EtaArtifact> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct CheckRow<'a> {
    check: &'a str,
    pass: bool,
    failures: String,
}

#[derive(Serialize)]
struct FloorRow {
    re: f64,
    im: f64,
    delta: f64,
    bound: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct SweepRow {
    re: f64,
    im: f64,
    delta: f64,
    k: f64,
    lhs: f64,
    mid: f64,
    rhs: f64,
    ratio: f64,
    flagged: bool,
}

fn write_assumptions(rep: &AssumptionReport, out: &mut Outputs) -> Result<Stage> {
    let rows = [("A", &rep.a), ("B", &rep.b), ("C", &rep.c)].map(|(check, o)| CheckRow {
        check,
        pass: o.pass,
        failures: o.failures.join("; "),
    });
    out.csv("assumptions.csv", rows)?;
    out.csv(
        "assumptions_floor.csv",
        rep.c_samples.iter().map(|s| FloorRow {
            re: s.lambda.re,
            im: s.lambda.im,
            delta: s.delta,
            bound: s.bound,
            ratio: s.ratio,
        }),
    )?;
    out.csv(
        "assumptions_sweep.csv",
        rep.sweep.iter().map(|e| SweepRow {
            re: e.lambda[0],
            im: e.lambda[1],
            delta: e.delta,
            k: e.k,
            lhs: e.lhs,
            mid: e.mid,
            rhs: e.rhs,
            ratio: e.ratio,
            flagged: e.flagged,
        }),
    )?;
    let mut summary = vec![format!(
        "(A) {} (B) {} (C) {}",
        verdict(rep.a.pass),
        verdict(rep.b.pass),
        verdict(rep.c.pass)
    )];
    summary.push(match rep.c_floor {
        Some(f) => format!("(C) floor {f:.3e}"),
        None => "(C) vacuous: no inner boundary".to_string(),
    });
    if let Some(r) = rep.sweep_max_ratio {
        summary.push(format!("comparability max ratio {r:.3e}"));
    }
    for o in [&rep.a, &rep.b, &rep.c] {
        summary.extend(o.failures.iter().cloned());
    }
    Ok(Stage {
        pass: rep.all_pass(),
        summary,
    })
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    function: &'a str,
    class: &'a str,
    sup_f: f64,
    monotone: bool,
    final_error: f64,
    best_error: f64,
    target: f64,
    dbar: Option<f64>,
    pass: bool,
}

fn write_approx(rep: &DensityReport, out: &mut Outputs) -> Result<Stage> {
    out.csv("approx.csv", rep.curves.iter())?;
    out.csv(
        "approx_summary.csv",
        rep.summaries.iter().map(|s| SummaryRow {
            function: &s.name,
            class: match s.class {
                crate::approx::FunctionClass::InClass => "in-class",
                crate::approx::FunctionClass::Control => "control",
            },
            sup_f: s.sup_f,
            monotone: s.monotone,
            final_error: s.final_error,
            best_error: s.best_error,
            target: s.target,
            dbar: s.dbar,
            pass: s.pass,
        }),
    )?;
    out.json("approx_fits.json", &rep.fits)?;
    let mut summary = vec![format!("suite {} ({} functions)", verdict(rep.pass), rep.summaries.len())];
    for s in &rep.summaries {
        summary.push(format!(
            "{}: {} best {:.3e} target {:.3e}{}",
            s.name,
            verdict(s.pass),
            s.best_error,
            s.target,
            if s.failures.is_empty() { String::new() } else { format!(" ({})", s.failures.join("; ")) }
        ));
    }
    Ok(Stage {
        pass: rep.pass,
        summary,
    })
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    out: Outputs,
    stages: Vec<StageRecord>,
}

impl Runner<'_> {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&ExperimentConfig, &mut Outputs) -> Result<(T, Stage)>) -> Result<T> {
        let t = Instant::now();
        let r = f(self.cfg, &mut self.out);
        let seconds = t.elapsed().as_secs_f64();
        match r {
            Ok((v, s)) => {
                self.stages.push(StageRecord {
                    name: name.to_string(),
                    seconds,
                    pass: s.pass,
                    summary: s.summary,
                });
                Ok(v)
            }
            Err(e) => {
                self.stages.push(StageRecord {
                    name: name.to_string(),
                    seconds,
                    pass: false,
                    summary: vec![e.to_string()],
                });
                Err(e)
            }
        }
    }

    fn passed(&self) -> bool {
        self.stages.iter().all(|s| s.pass)
    }

    fn artifact(&mut self, model: &CompactSetModel) -> Result<EtaArtifact> {
        match &self.cfg.artifact {
            Some(p) => {
                let p = p.clone();
                self.stage("load-eta", |_, _| {
                    let a = load_artifact(&p)?;
                    let s = eta_stage(&a);
                    Ok((a, s))
                })
            }
            None => self.stage("eta", |cfg, out| {
                let a = build_eta(model, &cfg.eta)?;
                write_eta(&a, out)?;
                let s = eta_stage(&a);
                Ok((a, s))
            }),
        }
    }

    fn execute(&mut self, command: Command) -> Result<()> {
        let model = self.stage("build-set", build_set)?;
        match command {
            Command::Cap => self.stage("cap", |c, o| Ok(((), stage_cap(c, &model, o)?)))?,
            Command::Transform => self.stage("transform", |c, o| Ok(((), stage_transform(c, &model, o)?)))?,
            Command::Vitushkin => self.stage("vitushkin", |c, o| Ok(((), stage_vitushkin(c, &model, o)?)))?,
            Command::Eta => {
                self.artifact(&model)?;
            }
            Command::CheckAssumptions => {
                let art = self.artifact(&model)?;
                self.stage("check-assumptions", |c, o| {
                    let rep = check_assumptions(&art, &model, &c.assumptions)?;
                    Ok(((), write_assumptions(&rep, o)?))
                })?;
            }
            Command::Approx | Command::Pipeline => {
                let art = self.artifact(&model)?;
                if command == Command::Pipeline {
                    if !self.passed() {
                        return Ok(());
                    }
                    self.stage("check-assumptions", |c, o| {
                        let rep = check_assumptions(&art, &model, &c.assumptions)?;
                        Ok(((), write_assumptions(&rep, o)?))
                    })?;
                    if !self.passed() {
                        return Ok(());
                    }
                }
                self.stage("approx", |c, o| {
                    let suite = make_test_suite(&model, &art)?;
                    let rep = density_experiment(&model, &art, &suite, &c.approx)?;
                    Ok(((), write_approx(&rep, o)?))
                })?;
            }
        }
        Ok(())
    }
}

/// Runs `command`, writes its files and `manifest.json` into `out_dir`, and returns
/// the manifest. Stage errors are recorded in the manifest; only failures to
/// write outputs are returned as errors.
pub fn run(cfg: &ExperimentConfig, command: Command, out_dir: &Path) -> Result<RunManifest> {
    if let Some(c) = cfg.command {
        if c != command {
            return Err(Error::Config {
                path: "command".into(),
                msg: format!("config is for `{}` but `{}` was requested", c.name(), command.name()),
            });
        }
    }
    fs::create_dir_all(out_dir)?;
    let mut runner = Runner {
        cfg,
        out: Outputs {
            dir: out_dir.to_path_buf(),
            files: Vec::new(),
        },
        stages: Vec::new(),
    };
    let result = runner.execute(command);
    let (failure, exit_code) = match &result {
        Err(Error::Io(e)) => return Err(Error::Io(std::io::Error::new(e.kind(), e.to_string()))),
        Err(e) => (Some(e.to_string()), e.exit_code()),
        Ok(()) => match runner.stages.iter().find(|s| !s.pass) {
            Some(s) => (Some(format!("stage `{}` failed its checks", s.name)), 4),
            None => (None, 0),
        },
    };
    let mut config = cfg.clone();
    config.command = Some(command);
    let mut manifest = RunManifest {
        command,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config,
        stages: runner.stages,
        artifacts: runner.out.files.clone(),
        pass: exit_code == 0,
        failure,
        exit_code,
    };
    manifest.artifacts.push("manifest.json".into());
    manifest.artifacts.push("config.toml".into());
    fs::write(out_dir.join("config.toml"), manifest.config.to_toml()?)?;
    let body = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(out_dir.join("manifest.json"), body)?;
    Ok(manifest)
}
