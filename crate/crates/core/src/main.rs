use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use capflow::cli::{run, Command, ExperimentConfig};

const OUTPUTS: &str = "\
Every run writes manifest.json (config snapshot, version, per-stage wall time,
summary lines, artifact list, PASS/FAIL) and config.toml with all defaults filled,
plus set.pgm (0 = K, 255 = complement). CSV files by command:

  cap                cap.csv             quantity,value
                     cap_rounds.csv      round,rows,objective,max_modulus,cuts
                     cap_measure.txt     measure table of the optimal density
  transform          transform.csv       x,y,re,im   (Cauchy transform of area on K)
                     transform_dbar.csv  cx,cy,delta,re,im,relative
  vitushkin          vitushkin.csv       delta,error,omega,pieces,blocks,unmatched,
                                         complete_groups,incomplete_groups,
                                         max_match_residual,max_premise_ratio,tail_ratio
  eta                eta.json            full artifact, readable by `artifact = ...`
                     eta_measure.txt     measure table of eta
                     eta_weights.csv     n,delta,charged,dropped,below_floor,mass,b_integral,
                                         b_quotient,b_n,a_defect,a_n,xi_mass,d_n
                     eta_residuals.csv   route,index,rung,re,im,degree,fit_error,residual,
                                         identity_residual,bound,certified
                     eta_polynomials.json  division polynomials by route
  check-assumptions  assumptions.csv     check,pass,failures
                     assumptions_floor.csv  re,im,delta,bound,ratio
                     assumptions_sweep.csv  re,im,delta,k,lhs,mid,rhs,ratio,flagged
  approx             approx.csv          function,degree,sup_error,train_error,iterations,
                                         rank_deficient,concentration
                     approx_summary.csv  function,class,sup_f,monotone,final_error,
                                         best_error,target,dbar,pass
                     approx_fits.json    highest-degree fit per function
  pipeline           eta, check-assumptions and approx outputs

Exit codes: 0 all checks pass, 1 usage or config error, 2 geometry or resolution,
3 solver did not converge, 4 invariant or check failure.";

#[derive(Parser)]
#[command(name = "capflow", version, about = "Cauchy transforms, analytic capacity and module approximation on planar compact sets", after_long_help = OUTPUTS)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config (default: ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Sub {
    /// Certified lower bound for alpha or gamma of K.
    Cap(Common),
    /// Cauchy transform of area measure on K, with dbar checks at seeded bumps.
    Transform(Common),
    /// Localization and coefficient matching for a cell transform.
    Vitushkin(Common),
    /// Build the measure eta with its certificates.
    Eta(Common),
    /// Check the hypotheses on a built or saved eta.
    CheckAssumptions(Common),
    /// Degree ladders in the module generated by the transform of eta.
    Approx(Common),
    /// eta, then check-assumptions, then approx.
    Pipeline(Common),
}

impl Sub {
    fn split(self) -> (Command, Common) {
        match self {
            Sub::Cap(c) => (Command::Cap, c),
            Sub::Transform(c) => (Command::Transform, c),
            Sub::Vitushkin(c) => (Command::Vitushkin, c),
            Sub::Eta(c) => (Command::Eta, c),
            Sub::CheckAssumptions(c) => (Command::CheckAssumptions, c),
            Sub::Approx(c) => (Command::Approx, c),
            Sub::Pipeline(c) => (Command::Pipeline, c),
        }
    }
}

fn execute(command: Command, args: Common) -> anyhow::Result<i32> {
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let out = args.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    cfg.out = Some(out.clone());
    let manifest = run(&cfg, command, &out)?;
    for s in &manifest.stages {
        println!("{} {} ({:.1} s)", if s.pass { "PASS" } else { "FAIL" }, s.name, s.seconds);
        for line in &s.summary {
            println!("    {line}");
        }
    }
    match &manifest.failure {
        Some(f) => eprintln!("capflow {}: {f}", command.name()),
        None => println!("PASS {}", command.name()),
    }
    Ok(manifest.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (command, args) = cli.command.split();
    match execute(command, args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<capflow::error::Error>().map_or(1, |e| e.exit_code());
            ExitCode::from(code as u8)
        }
    }
}
