//! Flag parsing and the JSON config file. Flags win over the file.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Deserialize;
use telesim::experiment::{Averaging, Rotation, ScenarioConfig, Scheme};
use telesim::optics::{BsConvention, PbsConvention};
use telesim::pdc::PdcParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeArg {
    Modified,
    Innsbruck,
    PnrTrigger,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Modified => Scheme::Modified,
            SchemeArg::Innsbruck => Scheme::Innsbruck,
            SchemeArg::PnrTrigger => Scheme::PnrTrigger,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AveragingArg {
    SixState,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Table,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PbsArg {
    TransmitH,
    TransmitV,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BsArg {
    Hadamard,
    Symmetric,
}

/// Simulate heralded polarization teleportation with a double-pass
/// down-conversion source and report rejection and fidelity figures.
#[derive(Debug, Parser)]
#[command(name = "telesim", version, allow_negative_numbers = true)]
pub struct Cli {
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Pair amplitude of both passes.
    #[arg(long)]
    pub chi: Option<f64>,
    /// Pair amplitude of the second pass, if different.
    #[arg(long)]
    pub chi_second: Option<f64>,
    /// Highest total pair number kept in the source.
    #[arg(long)]
    pub max_pairs: Option<usize>,
    #[arg(long)]
    pub theta1: Option<f64>,
    #[arg(long)]
    pub phi1: Option<f64>,
    #[arg(long)]
    pub theta4: Option<f64>,
    #[arg(long)]
    pub phi4: Option<f64>,
    /// Detector efficiency in (0, 1].
    #[arg(long)]
    pub efficiency: Option<f64>,
    #[arg(long, value_enum)]
    pub averaging: Option<AveragingArg>,
    /// Number of random inputs for monte-carlo averaging.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, value_enum)]
    pub pbs_convention: Option<PbsArg>,
    #[arg(long, value_enum)]
    pub bs_convention: Option<BsArg>,
    /// Cross-check the sparse engine against the dense oracle.
    #[arg(long)]
    pub verify: bool,
    /// JSON file with any of the settings above; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Contents of `--config`. Every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub scheme: Option<SchemeArg>,
    pub chi: Option<f64>,
    pub chi_second: Option<f64>,
    pub max_pairs: Option<usize>,
    pub theta1: Option<f64>,
    pub phi1: Option<f64>,
    pub theta4: Option<f64>,
    pub phi4: Option<f64>,
    pub efficiency: Option<f64>,
    pub averaging: Option<AveragingArg>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub pbs_convention: Option<PbsArg>,
    pub bs_convention: Option<BsArg>,
    pub verify: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| format!("invalid config file {}: {e}", path.display()))
    }
}

/// Fully resolved run settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub format: Format,
    pub verify: bool,
}

const DEFAULT_SAMPLES: usize = 100;

pub fn resolve(cli: &Cli) -> Result<RunConfig, String> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let scheme = cli.scheme.or(file.scheme).map_or(Scheme::Modified, Scheme::from);
    let defaults = PdcParams::default();
    let params = PdcParams {
        chi: cli.chi.or(file.chi).unwrap_or(defaults.chi),
        chi_second: cli.chi_second.or(file.chi_second),
        max_pairs: cli.max_pairs.or(file.max_pairs).unwrap_or(defaults.max_pairs),
    };
    let rot1 = Rotation::new(
        cli.theta1.or(file.theta1).unwrap_or(0.0),
        cli.phi1.or(file.phi1).unwrap_or(0.0),
    );
    let rot4 = Rotation::new(
        cli.theta4.or(file.theta4).unwrap_or(0.0),
        cli.phi4.or(file.phi4).unwrap_or(0.0),
    );
    let samples = cli.samples.or(file.samples);
    let averaging = match cli.averaging.or(file.averaging) {
        None | Some(AveragingArg::SixState) => {
            if samples.is_some() {
                return Err("--samples requires --averaging monte-carlo".into());
            }
            Averaging::SixState
        }
        Some(AveragingArg::MonteCarlo) => Averaging::MonteCarlo {
            samples: samples.unwrap_or(DEFAULT_SAMPLES),
        },
    };
    let pbs_convention = match cli.pbs_convention.or(file.pbs_convention) {
        None | Some(PbsArg::TransmitH) => PbsConvention::TransmitH,
        Some(PbsArg::TransmitV) => PbsConvention::TransmitV,
    };
    let bs_convention = match cli.bs_convention.or(file.bs_convention) {
        None | Some(BsArg::Hadamard) => BsConvention::Hadamard,
        Some(BsArg::Symmetric) => BsConvention::Symmetric,
    };
    let scenario = ScenarioConfig {
        scheme,
        params,
        rot1,
        rot4,
        efficiency: cli.efficiency.or(file.efficiency).unwrap_or(1.0),
        pbs_convention,
        bs_convention,
        averaging,
        seed: cli.seed.or(file.seed).unwrap_or(0),
    };
    scenario.validate().map_err(|e| e.to_string())?;
    Ok(RunConfig {
        scenario,
        format: cli.format.or(file.format).unwrap_or_default(),
        verify: cli.verify || file.verify.unwrap_or(false),
    })
}
