//! Run configuration: JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use csl_core::exclusion::GridSpec;
use csl_core::params::{
    default_geometry, CollapseParams, MassConvention, ParamError, PhononGeometry,
};
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// `"default"` or an explicit geometry object.
fn geometry_field<'de, D: Deserializer<'de>>(d: D) -> Result<Option<PhononGeometry>, D::Error> {
    use serde::de::Error;
    let value = serde_json::Value::deserialize(d)?;
    match value {
        serde_json::Value::String(s) if s == "default" => Ok(None),
        serde_json::Value::String(s) => Err(D::Error::custom(format!(
            "unknown geometry preset `{s}` (expected \"default\" or an object)"
        ))),
        other => PhononGeometry::deserialize(other)
            .map(Some)
            .map_err(D::Error::custom),
    }
}

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, deserialize_with = "geometry_field")]
    pub geometry: Option<PhononGeometry>,
    pub collapse: Option<CollapseParams>,
    pub output_path: Option<PathBuf>,
    pub output_format: Option<OutputFormat>,
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    #[serde(default)]
    pub nucleon_mass_convention: bool,
    pub grid: Option<GridSpec>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

/// Values shared by all subcommands after merging file and flags.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub geometry: PhononGeometry,
    pub collapse: CollapseParams,
    pub format: OutputFormat,
    pub seed: u64,
    pub threshold: f64,
    pub convention: MassConvention,
    pub grid: GridSpec,
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub geometry_file: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    pub nucleon_mass_convention: bool,
    pub lambda: Option<f64>,
    pub r_c: Option<f64>,
}

fn usage(e: ParamError) -> CliError {
    CliError::Usage(e.to_string())
}

impl Settings {
    pub fn resolve(file: RunConfig, o: Overrides) -> Result<Settings, CliError> {
        let geometry = match &o.geometry_file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                PhononGeometry::from_json(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            None => file.geometry.unwrap_or_else(default_geometry),
        };
        let base = file.collapse.unwrap_or_else(CollapseParams::csl_standard);
        let collapse =
            CollapseParams::new(o.lambda.unwrap_or(base.lambda), o.r_c.unwrap_or(base.r_c))
                .map_err(usage)?;
        let threshold = o
            .threshold
            .or(file.threshold)
            .unwrap_or(csl_core::exclusion::DEFAULT_THRESHOLD);
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(CliError::Usage(format!(
                "threshold must be positive, got {threshold}"
            )));
        }
        let convention = if o.nucleon_mass_convention || file.nucleon_mass_convention {
            MassConvention::Nucleon
        } else {
            MassConvention::Effective
        };
        Ok(Settings {
            geometry,
            collapse,
            format: o.format.or(file.output_format).unwrap_or_default(),
            seed: o.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            threshold,
            convention,
            grid: file.grid.unwrap_or_default(),
            output: o.output.or(file.output_path),
        })
    }

    /// SHA-256 of the effective settings and command arguments. The output
    /// location is not part of the hash.
    pub fn hash(&self, command: &str, args: &serde_json::Value) -> String {
        let doc = serde_json::json!({
            "command": command,
            "settings": self,
            "args": args,
        });
        let bytes = serde_json::to_vec(&doc).expect("settings serialise");
        hex::encode(Sha256::digest(&bytes))
    }
}
