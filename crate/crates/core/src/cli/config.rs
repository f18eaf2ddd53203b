//! Experiment configuration: a TOML document with every default spelled out on save.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::approx::ApproxOptions;
use crate::capacity::CapacityOptions;
use crate::error::{Error, Result};
use crate::etabuild::{AssumptionOptions, EtaParams};
use crate::geometry::SetSpec;
use crate::vitushkin::SchemeOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Cap,
    Transform,
    Vitushkin,
    Eta,
    CheckAssumptions,
    Approx,
    Pipeline,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Cap => "cap",
            Command::Transform => "transform",
            Command::Vitushkin => "vitushkin",
            Command::Eta => "eta",
            Command::CheckAssumptions => "check-assumptions",
            Command::Approx => "approx",
            Command::Pipeline => "pipeline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    /// Carriers with continuous transforms only.
    Alpha,
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapConfig {
    pub bound: Bound,
    pub options: CapacityOptions,
}

impl Default for CapConfig {
    fn default() -> Self {
        CapConfig {
            bound: Bound::Alpha,
            options: CapacityOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformConfig {
    /// Evaluation nodes per side of the frame.
    pub grid: usize,
    /// Bumps at random positions for the dbar check.
    pub bumps: usize,
    /// Bump side relative to the frame side.
    pub bump_size: f64,
    /// Passes when every dbar residual is below this times the mass.
    pub dbar_tol: f64,
}

impl Default for TransformConfig {
    fn default() -> Self {
        TransformConfig {
            grid: 33,
            bumps: 4,
            bump_size: 0.125,
            dbar_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VitushkinConfig {
    /// `[x0, y0, x1, y1]` of the cell whose transform is approximated; `None`
    /// uses a thin vertical strip through the middle of the frame.
    pub strip: Option<[f64; 4]>,
    pub deltas: Vec<f64>,
    pub scheme: SchemeOptions,
    /// Passes when the matched first coefficients agree to this.
    pub match_tol: f64,
}

impl Default for VitushkinConfig {
    fn default() -> Self {
        VitushkinConfig {
            strip: None,
            deltas: vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            scheme: SchemeOptions::default(),
            match_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the command line when present.
    #[serde(default)]
    pub command: Option<Command>,
    pub set: SetSpec,
    /// Grid spacing of the raster model.
    pub h: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Saved eta artifact for `check-assumptions` and `approx`; built when absent.
    #[serde(default)]
    pub artifact: Option<PathBuf>,
    #[serde(default)]
    pub cap: CapConfig,
    #[serde(default)]
    pub transform: TransformConfig,
    #[serde(default)]
    pub vitushkin: VitushkinConfig,
    #[serde(default)]
    pub eta: EtaParams,
    #[serde(default)]
    pub assumptions: AssumptionOptions,
    #[serde(default)]
    pub approx: ApproxOptions,
}

fn bad(path: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        msg: msg.into(),
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(bad(path, format!("must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::de::Deserializer::parse(text).map_err(|e| Error::Parse(e.to_string()))?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            // toml messages carry a source excerpt; the first line is the reason
            let msg = inner.message().lines().next().unwrap_or_default().to_string();
            bad(&path, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        positive("h", self.h)?;
        self.set.validate()?;
        positive("cap.options.tol", self.cap.options.tol)?;
        if self.cap.options.angles < 3 {
            return Err(bad("cap.options.angles", "needs at least 3 half-planes"));
        }
        if let Some(s) = self.cap.options.spacing {
            positive("cap.options.spacing", s)?;
        }
        positive("transform.bump_size", self.transform.bump_size)?;
        positive("transform.dbar_tol", self.transform.dbar_tol)?;
        if self.transform.grid < 2 {
            return Err(bad("transform.grid", "needs at least 2 nodes per side"));
        }
        if let Some([x0, y0, x1, y1]) = self.vitushkin.strip {
            if !(x1 > x0 && y1 > y0) {
                return Err(bad("vitushkin.strip", "expects [x0, y0, x1, y1] with x0 < x1 and y0 < y1"));
            }
        }
        if self.vitushkin.deltas.is_empty() {
            return Err(bad("vitushkin.deltas", "must not be empty"));
        }
        for (i, d) in self.vitushkin.deltas.iter().enumerate() {
            positive(&format!("vitushkin.deltas[{i}]"), *d)?;
        }
        if self.eta.n_max == 0 {
            return Err(bad("eta.n_max", "must be at least 1"));
        }
        if !(self.eta.cantor_ratio > 0.0 && self.eta.cantor_ratio < 1.0) {
            return Err(bad("eta.cantor_ratio", "must lie in (0, 1)"));
        }
        positive("eta.grid_spacing", self.eta.grid_spacing)?;
        positive("eta.detection_floor", self.eta.detection_floor)?;
        positive("eta.residual_tol", self.eta.residual_tol)?;
        if self.approx.degrees.is_empty() {
            return Err(bad("approx.degrees", "must not be empty"));
        }
        if self.approx.degrees.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("approx.degrees", "must be strictly increasing"));
        }
        if self.approx.grid_per_side < 2 {
            return Err(bad("approx.grid_per_side", "needs at least 2 nodes per side"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DISK: &str = "set = { kind = \"disk\", center = [0.0, 0.0], radius = 1.0 }\nh = 0.05\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::parse(DISK).unwrap();
        assert_eq!(c.cap.options.angles, 16);
        assert_eq!(c.cap.options.tol, 1e-6);
        assert_eq!(c.seed, 0);
        assert_eq!(c.eta, EtaParams::default());
    }

    #[test]
    fn negative_resolution_names_the_field() {
        let text = DISK.replace("h = 0.05", "h = -0.01");
        match ExperimentConfig::parse(&text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "h"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_and_mistyped_keys_report_paths() {
        let text = format!("{DISK}[cap.options]\nangels = 8\n");
        match ExperimentConfig::parse(&text) {
            Err(Error::Config { path, msg }) => {
                assert_eq!(path, "cap.options.angels");
                assert!(msg.contains("angels"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = format!("{DISK}[eta]\nn_max = \"six\"\n");
        match ExperimentConfig::parse(&text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "eta.n_max"),
            other => panic!("unexpected {other:?}"),
        }
        match ExperimentConfig::parse("h = 0.1\n") {
            Err(Error::Config { msg, .. }) => assert!(msg.contains("set"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let text = "command = \"pipeline\"\nh = 0.0078125\nseed = 7\n\
            [set]\nkind = \"swiss-cheese\"\nbase = { kind = \"square\", center = [0.5, 0.5], side = 1.0 }\n\
            holes = [{ center = [0.3, 0.3], radius = 0.1 }]\n\
            [approx]\ndegrees = [0, 4, 8]\n";
        let c = ExperimentConfig::parse(text).unwrap();
        let back = ExperimentConfig::parse(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, back);
    }
}
