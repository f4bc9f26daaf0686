//! Declarative run configuration.
//!
//! One TOML file may carry a section per subcommand plus shared `seed`,
//! `threads` and `[tuning]` entries. Command-line flags are applied on top
//! of the file, and the merged result is what gets echoed into output
//! metadata.

use std::path::{Path, PathBuf};

use hvtest_core::estimators::TuningParams;
use hvtest_core::pipeline::{default_min_increment_factor, default_spans, Span, VariantGrid};
use hvtest_core::sim::{JumpSpec, NoiseSpec};
use hvtest_core::{BaseModel, TestVariant};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub tuning: Option<TuningParams>,
    pub simulate: Option<SimulateConfig>,
    pub test: Option<TestConfig>,
    pub mc: Option<McConfig>,
    pub qq: Option<QqConfig>,
    pub clean: Option<CleanConfig>,
    pub report: Option<ReportFileConfig>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_sim_n")]
    pub n: usize,
    #[serde(default = "BaseModel::constant_reference")]
    pub model: BaseModel,
    #[serde(default)]
    pub jumps: Option<JumpSpec>,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_sim_n() -> usize {
    23_400
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            n: default_sim_n(),
            model: BaseModel::constant_reference(),
            jumps: None,
            noise: None,
            out: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default = "default_variant")]
    pub variant: TestVariant,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_json")]
    pub format: Format,
}

fn default_variant() -> TestVariant {
    TestVariant::Plain
}

fn default_alpha() -> f64 {
    0.05
}

fn default_json() -> Format {
    Format::Json
}

fn default_text() -> Format {
    Format::Text
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            input: None,
            variant: default_variant(),
            alpha: default_alpha(),
            format: default_json(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_mc_name")]
    pub name: String,
    #[serde(default = "BaseModel::constant_reference")]
    pub null_model: BaseModel,
    #[serde(default = "BaseModel::heston_reference")]
    pub alt_model: BaseModel,
    /// Run the alternative model as well (power columns).
    #[serde(default = "default_true")]
    pub power: bool,
    #[serde(default)]
    pub variant: Option<TestVariant>,
    #[serde(default = "default_n_values")]
    pub n_values: Vec<usize>,
    /// Jump intensities; `0` means the uncontaminated model.
    #[serde(default)]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_sigma_jump")]
    pub sigma_jump: f64,
    /// Noise standard deviations.
    #[serde(default)]
    pub etas: Vec<f64>,
    #[serde(default = "hvtest_core::mc::default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_text")]
    pub format: Format,
}

fn default_mc_name() -> String {
    "mc".into()
}

fn default_true() -> bool {
    true
}

fn default_n_values() -> Vec<usize> {
    vec![23_400]
}

fn default_sigma_jump() -> f64 {
    0.5
}

fn default_reps() -> usize {
    1000
}

impl Default for McConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QqConfig {
    #[serde(default)]
    pub input: Option<PathBuf>,
    /// Scenario index inside an MC report; required when it holds several.
    #[serde(default)]
    pub scenario: Option<u64>,
    #[serde(default)]
    pub out_prefix: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CleanConfig {
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default = "default_grid")]
    pub grid_seconds: u32,
    #[serde(default = "Span::regular_session")]
    pub session: Span,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_grid() -> u32 {
    5
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self {
            input: None,
            grid_seconds: default_grid(),
            session: Span::regular_session(),
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFileConfig {
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default = "default_variant_grids")]
    pub variants: Vec<VariantGrid>,
    #[serde(default = "hvtest_core::mc::default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_spans")]
    pub spans: Vec<Span>,
    #[serde(default = "Span::regular_session")]
    pub session: Span,
    #[serde(default = "default_min_increment_factor")]
    pub min_increment_factor: f64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_variant_grids() -> Vec<VariantGrid> {
    hvtest_core::pipeline::ReportConfig::reference().variants
}

impl Default for ReportFileConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

/// Parse `plain:300,truncated:300,preaveraged:5`.
pub fn parse_variant_grids(s: &str) -> Result<Vec<VariantGrid>, CliError> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (v, g) = p.split_once(':').ok_or_else(|| {
                CliError::config(format!("variant grid {p:?} must look like plain:300"))
            })?;
            let variant: TestVariant = v
                .trim()
                .parse()
                .map_err(|e: hvtest_core::Error| CliError::config(e.to_string()))?;
            let grid_seconds = g
                .trim()
                .parse()
                .map_err(|_| CliError::config(format!("bad grid seconds in {p:?}")))?;
            Ok(VariantGrid {
                variant,
                grid_seconds,
            })
        })
        .collect()
}

pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| CliError::config(format!("bad {what} {p:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 1").is_err());
        assert!(toml::from_str::<RunConfig>("[mc]\nrep = 3").is_err());
        assert!(toml::from_str::<RunConfig>("[tuning]\ntheta = 1.0\nthetta = 2.0").is_err());
    }

    #[test]
    fn sections_parse() {
        let cfg: RunConfig = toml::from_str(
            r#"
            seed = 7
            [tuning]
            theta = 1.0
            [mc]
            lambdas = [0, 20]
            n_values = [780]
            null_model = { kind = "constant", sigma = 1.0, x0 = 1.0 }
            [report]
            spans = ["09:30-16:00", "10:30-15:00"]
            variants = [{ variant = "plain", grid_seconds = 300 }]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.tuning.unwrap().theta, 1.0);
        assert_eq!(cfg.mc.unwrap().lambdas, vec![0.0, 20.0]);
        assert_eq!(cfg.report.unwrap().spans.len(), 2);
    }

    #[test]
    fn variant_grid_lists() {
        let v = parse_variant_grids("plain:300, preavg:5").unwrap();
        assert_eq!(
            v[1],
            VariantGrid {
                variant: TestVariant::Preaveraged,
                grid_seconds: 5
            }
        );
        assert!(parse_variant_grids("plain").is_err());
    }
}
