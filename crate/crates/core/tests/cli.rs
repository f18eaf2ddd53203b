use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

const ANNULUS: &str = "\
h = 0.0078125
seed = 3

[set]
kind = \"annulus\"
center = [0.0, 0.0]
r_inner = 0.5
r_outer = 1.0

[eta]
n_max = 3
grid_spacing = 0.03125

[assumptions]
sweep_points = 0

[approx]
grid_per_side = 32
";

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("capflow-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn capflow(args: &[&str], config: &Path, out: &Path) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_capflow"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn annulus_pipeline_passes_and_is_reproducible() {
    let dir = scratch("annulus");
    let cfg = dir.join("annulus.toml");
    fs::write(&cfg, ANNULUS).unwrap();
    let (a, b) = (dir.join("a"), dir.join("b"));

    let (code, stdout, stderr) = capflow(&["pipeline"], &cfg, &a);
    assert_eq!(code, 0, "{stdout}\n{stderr}");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["pass"], true);
    let artifacts: Vec<&str> = manifest["artifacts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(artifacts.contains(&"eta.json"));
    assert!(artifacts.contains(&"approx_summary.csv"));
    let approx = manifest["stages"].as_array().unwrap().iter().find(|s| s["name"] == "approx").unwrap();
    assert_eq!(approx["pass"], true);
    // the snapshot has every default filled in
    let snapshot = fs::read_to_string(a.join("config.toml")).unwrap();
    assert!(snapshot.contains("angles = 16"), "{snapshot}");

    // rerun from the snapshot
    let (code, _, stderr) = capflow(&["pipeline"], &a.join("config.toml"), &b);
    assert_eq!(code, 0, "{stderr}");
    let (ca, cb) = (csv_files(&a), csv_files(&b));
    assert!(ca.len() >= 6);
    assert_eq!(ca, cb);
}

#[test]
fn one_pixel_set_is_too_coarse() {
    let dir = scratch("pixel");
    let cfg = dir.join("pixel.toml");
    fs::write(&cfg, "h = 0.5\nset = { kind = \"disk\", center = [0.0, 0.0], radius = 0.2 }\n").unwrap();
    let (code, stdout, stderr) = capflow(&["pipeline"], &cfg, &dir.join("out"));
    assert_eq!(code, 2, "{stdout}\n{stderr}");
    assert!(stderr.to_lowercase().contains("too coarse"), "{stderr}");
    let manifest = fs::read_to_string(dir.join("out/manifest.json")).unwrap();
    assert!(manifest.contains("build-set"));
}

#[test]
fn usage_and_config_errors_exit_one() {
    let dir = scratch("usage");
    let cfg = dir.join("bad.toml");
    fs::write(&cfg, "h = -1.0\nset = { kind = \"disk\", center = [0.0, 0.0], radius = 1.0 }\n").unwrap();
    let (code, _, stderr) = capflow(&["cap"], &cfg, &dir.join("out"));
    assert_eq!(code, 1);
    assert!(stderr.contains("h"), "{stderr}");

    fs::write(&cfg, "command = \"eta\"\nh = 0.1\nset = { kind = \"disk\", center = [0.0, 0.0], radius = 1.0 }\n").unwrap();
    let (code, _, stderr) = capflow(&["cap"], &cfg, &dir.join("out"));
    assert_eq!(code, 1, "{stderr}");

    let o = Command::new(env!("CARGO_BIN_EXE_capflow")).arg("nonsense").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_capflow")).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn transform_is_seeded() {
    let dir = scratch("transform");
    let cfg = dir.join("disk.toml");
    fs::write(
        &cfg,
        "h = 0.0625\nset = { kind = \"disk\", center = [0.0, 0.0], radius = 1.0 }\n[transform]\ngrid = 9\n",
    )
    .unwrap();
    let run = |seed: &str, out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_capflow"))
            .args(["transform", "--seed", seed, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.join(out))
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
        fs::read(dir.join(out).join("transform_dbar.csv")).unwrap()
    };
    assert_eq!(run("5", "a"), run("5", "b"));
    assert_ne!(run("5", "a"), run("6", "c"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let text = fs::read_to_string(&p).unwrap();
        if let Err(e) = capflow::cli::ExperimentConfig::parse(&text) {
            panic!("{}: {e}", p.display());
        }
        n += 1;
    }
    assert!(n >= 3);
}
