//! TOML run configuration with `--set key=value` overrides.

use std::path::{Path, PathBuf};

use neuralmaps_core::analytic::AnalyticSurface;
use neuralmaps_core::domain::Domain;
use neuralmaps_core::neuralmap::Architecture;
use neuralmaps_core::optimize::OptimizationTask;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Directory receiving checkpoints, logs, exports and the report.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub domain: Domain,
    #[serde(default)]
    pub task: OptimizationTask,
    pub overfit: Option<OverfitConfig>,
    pub parameterize: Option<ParamConfig>,
    pub map: Option<MapConfig>,
    pub collection: Option<CollectionConfig>,
    pub eval: Option<EvalConfig>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

fn default_export_grid() -> usize {
    32
}

/// A named preset or a full architecture table.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArchitectureSpec {
    Preset(String),
    Explicit(Architecture),
}

impl ArchitectureSpec {
    pub fn resolve(&self) -> Result<Architecture, CliError> {
        match self {
            ArchitectureSpec::Explicit(a) => Ok(a.clone()),
            ArchitectureSpec::Preset(name) => match name.as_str() {
                "surface_default" => Ok(Architecture::surface_default()),
                "surface_small" => Ok(Architecture::surface_small()),
                "warp_default" => Ok(Architecture::warp_default()),
                "warp_small" => Ok(Architecture::warp_small()),
                other => Err(CliError::Config(format!(
                    "unknown architecture preset {other:?} (expected surface_default, surface_small, warp_default or warp_small)"
                ))),
            },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverfitConfig {
    /// Disk-topology OBJ to parameterize and fit.
    pub mesh: PathBuf,
    #[serde(default = "surface_default_spec")]
    pub architecture: ArchitectureSpec,
}

fn surface_default_spec() -> ArchitectureSpec {
    ArchitectureSpec::Preset("surface_default".into())
}

fn warp_default_spec() -> ArchitectureSpec {
    ArchitectureSpec::Preset("warp_default".into())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarpInit {
    /// Seeded weights with a damped output layer.
    #[default]
    NearIdentity,
    /// All weights zero: exactly the identity.
    Identity,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarpConfig {
    #[serde(default = "warp_default_spec")]
    pub architecture: ArchitectureSpec,
    #[serde(default)]
    pub init: WarpInit,
    /// Start from this checkpoint instead of a fresh network.
    pub checkpoint: Option<PathBuf>,
}

impl Default for WarpConfig {
    fn default() -> Self {
        WarpConfig {
            architecture: warp_default_spec(),
            init: WarpInit::default(),
            checkpoint: None,
        }
    }
}

/// A frozen surface: an overfitted checkpoint (optionally with the mesh it
/// was fitted to) or an analytic surface.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub checkpoint: Option<PathBuf>,
    pub analytic: Option<AnalyticSurface>,
    /// Mesh of a neural surface: resolves vertex and point keypoints and
    /// carries the exports.
    pub mesh: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamConfig {
    pub surface: SurfaceConfig,
    #[serde(default)]
    pub warp: WarpConfig,
    /// Grid resolution of the export when the surface has no mesh.
    #[serde(default = "default_export_grid")]
    pub export_grid: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub source: SurfaceConfig,
    pub target: SurfaceConfig,
    /// Lines of `<source keypoint> <target keypoint>`.
    pub keypoints: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub fixed_corners: bool,
    #[serde(default)]
    pub warp: WarpConfig,
    #[serde(default = "default_export_grid")]
    pub export_grid: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectionConfig {
    pub surfaces: Vec<SurfaceConfig>,
    /// Lines with one keypoint per surface.
    pub keypoints: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub fixed_corners: bool,
    #[serde(default)]
    pub warp: WarpConfig,
    #[serde(default = "default_export_grid")]
    pub export_grid: usize,
    /// Random common-domain samples of the cycle check.
    #[serde(default = "default_cycle_samples")]
    pub cycle_samples: usize,
}

fn default_cycle_samples() -> usize {
    1000
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalTarget {
    Overfit,
    Parameterize,
    Map,
    Collection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Which command's section describes the setup.
    pub command: EvalTarget,
    /// Trained maps: the surface for `overfit`, the warp for `parameterize`
    /// and `map`, one warp per surface for `collection`.
    pub checkpoints: Vec<PathBuf>,
}

/// The config file as read, the overrides and the parsed result.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub text: String,
    pub overrides: Vec<String>,
    pub config: RunConfig,
}

pub fn load(path: &Path, overrides: &[String], seed: Option<u64>) -> Result<LoadedConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let config = parse(&text, overrides, seed)?;
    Ok(LoadedConfig {
        text,
        overrides: overrides.to_vec(),
        config,
    })
}

pub fn parse(text: &str, overrides: &[String], seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut value: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    if let Some(s) = seed {
        let seed = i64::try_from(s).map_err(|_| CliError::Config(format!("seed {s} does not fit a signed 64-bit integer")))?;
        apply_value(&mut value, &["task", "seed"], toml::Value::Integer(seed))?;
    }
    let config: RunConfig = toml::Value::Table(value)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    config.task.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(config)
}

/// Applies `a.b.c=value`; the value is read as a TOML literal, falling
/// back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not of the form key=value")))?;
    let key = key.trim();
    let path: Vec<&str> = key.split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key {key:?} is malformed")));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed table has the key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    apply_value(table, &path, value)
}

fn apply_value(table: &mut toml::Table, path: &[&str], value: toml::Value) -> Result<(), CliError> {
    let (last, parents) = path.split_last().expect("non-empty key path");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override path {:?}: {p:?} is not a table", path.join("."))))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// The command's section, or a config error naming it.
pub fn require<'a, T>(name: &str, section: &'a Option<T>) -> Result<&'a T, CliError> {
    section
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("missing [{name}] section")))
}
