//! Run configuration: a TOML document with one section per component.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dgtau_core::adaptation::AdaptConfig;
use dgtau_core::mesh::{Grading, Rectangle, Wall};
use dgtau_core::multigrid::{CoarseningRule, SmootherConfig};
use dgtau_core::physics::CASE_NAMES;
use dgtau_core::time::CflConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "rk3")]
    Rk3,
    #[serde(rename = "fas")]
    Fas,
    #[serde(rename = "fas+adapt")]
    FasAdapt,
    #[serde(rename = "fas+multistage")]
    FasMultistage,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Rk3 => "rk3",
            Mode::Fas => "fas",
            Mode::FasAdapt => "fas+adapt",
            Mode::FasMultistage => "fas+multistage",
        }
    }

    pub fn adapts(self) -> bool {
        matches!(self, Mode::FasAdapt | Mode::FasMultistage)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    /// Mesh file; when set the generator keys are ignored.
    pub file: Option<PathBuf>,
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub grading_wall: Option<Wall>,
    pub grading_ratio: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            file: None,
            nx: 4,
            ny: 4,
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
            grading_wall: None,
            grading_ratio: 1.0,
        }
    }
}

impl MeshConfig {
    pub fn domain(&self) -> Rectangle {
        Rectangle {
            x0: self.x0,
            x1: self.x1,
            y0: self.y0,
            y1: self.y1,
        }
    }

    pub fn grading(&self) -> Option<Grading> {
        self.grading_wall.map(|wall| Grading {
            wall,
            ratio: self.grading_ratio,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Uniform order of the rk3 and fas modes.
    pub order: usize,
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub max_cycles: usize,
    /// Residual logging period of the rk3 mode, in sweeps.
    pub log_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            order: 4,
            tolerance: 1e-9,
            max_sweeps: 2_000_000,
            max_cycles: 500,
            log_every: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MgSection {
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
    pub eta: f64,
    pub coarsest_sweeps: usize,
    pub max_batches: usize,
    pub fmg_level_tol: f64,
    pub rule: CoarseningRule,
    /// Smoothing on adapted order fields.
    pub adapted_pre_sweeps: usize,
    pub adapted_post_sweeps: usize,
    pub adapted_coarsest_sweeps: usize,
}

impl Default for MgSection {
    fn default() -> Self {
        let before = SmootherConfig::default();
        let after = SmootherConfig::post_adaptation();
        Self {
            pre_sweeps: before.pre_sweeps,
            post_sweeps: before.post_sweeps,
            eta: before.eta,
            coarsest_sweeps: before.coarsest_sweeps,
            max_batches: before.max_batches,
            fmg_level_tol: 1e-1,
            rule: CoarseningRule::HighOrder,
            adapted_pre_sweeps: after.pre_sweeps,
            adapted_post_sweeps: after.post_sweeps,
            adapted_coarsest_sweeps: after.coarsest_sweeps,
        }
    }
}

impl MgSection {
    pub fn smoother(&self) -> SmootherConfig {
        SmootherConfig {
            pre_sweeps: self.pre_sweeps,
            post_sweeps: self.post_sweeps,
            eta: self.eta,
            coarsest_sweeps: self.coarsest_sweeps,
            max_batches: self.max_batches,
        }
    }

    pub fn adapted_smoother(&self) -> SmootherConfig {
        SmootherConfig {
            pre_sweeps: self.adapted_pre_sweeps,
            post_sweeps: self.adapted_post_sweeps,
            coarsest_sweeps: self.adapted_coarsest_sweeps,
            ..self.smoother()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Run directory, relative to `DGTAU_OUTPUT_ROOT` when that is set.
    pub dir: PathBuf,
    pub tau_csv: bool,
    pub solution: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs/default"),
            tau_csv: true,
            solution: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub case: String,
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub cfl: CflConfig,
    #[serde(default)]
    pub mg: MgSection,
    #[serde(default)]
    pub adapt: AdaptConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

pub const OUTPUT_ROOT_VAR: &str = "DGTAU_OUTPUT_ROOT";

impl RunConfig {
    /// Parses `text`, applying `key=value` overrides first. Relative mesh
    /// paths are resolved against `base`.
    pub fn parse(text: &str, overrides: &[String], base: Option<&Path>) -> CliResult<Self> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let mut cfg: RunConfig = doc.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        if let (Some(base), Some(file)) = (base, cfg.mesh.file.as_ref()) {
            if file.is_relative() {
                cfg.mesh.file = Some(base.join(file));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, overrides, path.parent())
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |key: &str, msg: String| Err(CliError::Config(format!("{key}: {msg}")));
        if !CASE_NAMES.contains(&self.case.as_str()) {
            return bad("case", format!("unknown case '{}', expected one of {CASE_NAMES:?}", self.case));
        }
        if !(self.solver.tolerance > 0.0) {
            return bad("solver.tolerance", "must be positive".into());
        }
        if self.solver.order < 1 {
            return bad("solver.order", "must be at least 1".into());
        }
        if self.mesh.file.is_none() && (self.mesh.nx == 0 || self.mesh.ny == 0) {
            return bad("mesh.nx", "element counts must be positive".into());
        }
        if !(self.mg.fmg_level_tol > 0.0) {
            return bad("mg.fmg_level_tol", "must be positive".into());
        }
        self.cfl.validate().or_else(|e| bad("cfl", e.to_string()))?;
        self.mg.smoother().validate().or_else(|e| bad("mg", e.to_string()))?;
        self.mg.adapted_smoother().validate().or_else(|e| bad("mg", e.to_string()))?;
        if self.mode.adapts() {
            self.adapt.validate().or_else(|e| bad("adapt", e.to_string()))?;
        }
        if self.mode == Mode::FasMultistage && self.adapt.stages.len() < 2 {
            return bad("adapt.stages", "multi-stage mode needs at least two stages".into());
        }
        Ok(())
    }

    /// Canonical JSON used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_VAR) {
            Some(root) if self.output.dir.is_relative() => PathBuf::from(root).join(&self.output.dir),
            _ => self.output.dir.clone(),
        }
    }
}

/// Sets the dotted `key` of `doc` to `value`, parsed as a TOML value when
/// possible and as a plain string otherwise.
pub fn apply_override(doc: &mut toml::Table, entry: &str) -> CliResult<()> {
    let (key, raw) = entry
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{entry}' is not key=value")))?;
    let key = key.trim();
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key '{key}' is malformed")));
    }
    let mut table = doc;
    for (i, part) in parts[..parts.len() - 1].iter().enumerate() {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = match entry {
            toml::Value::Table(t) => t,
            _ => {
                return Err(CliError::Config(format!(
                    "override '{key}': '{}' is not a section",
                    parts[..=i].join(".")
                )))
            }
        };
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
