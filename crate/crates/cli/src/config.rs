//! Serializable experiment configurations, one per subcommand.

use serde::{Deserialize, Serialize};
use stdiff_core::differentiation::{Gaps, StdRunConfig};
use stdiff_core::process::RuleDocument;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    DpCheck(DpCheckConfig),
    Weyl(WeylConfig),
    Std(StdRunConfig),
    Kernels(KernelsConfig),
    Meager(MeagerConfig),
    Shift(ShiftConfig),
}

impl ExperimentConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::DpCheck(_) => "dp-check",
            Self::Weyl(_) => "weyl",
            Self::Std(_) => "std",
            Self::Kernels(_) => "kernels",
            Self::Meager(_) => "meager",
            Self::Shift(_) => "shift",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Self::DpCheck(_) => 0,
            Self::Weyl(c) => c.seed,
            Self::Std(c) => c.seed,
            Self::Kernels(c) => c.seed,
            Self::Meager(c) => c.seed,
            Self::Shift(c) => c.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DpMode {
    Check,
    Refute,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpCheckConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finite: Option<String>,
    pub horizon: usize,
    pub mode: DpMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeylConfig {
    pub rule: RuleDocument,
    pub k_max: usize,
    pub points: usize,
    pub box_bound: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub character: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<u32>,
    pub min_pass_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variance_ks: Vec<usize>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelsConfig {
    pub rule: RuleDocument,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<i64>>>,
    pub probes: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeagerMode {
    Mance,
    Oscillation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeagerConfig {
    pub rule: RuleDocument,
    pub mode: MeagerMode,
    pub k_min: usize,
    pub targets: usize,
    pub target_radius: String,
    pub tol: String,
    pub baseline_k: usize,
    pub baseline_seeds: usize,
    pub verify: bool,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftConfig {
    pub rule: RuleDocument,
    pub k: usize,
    pub gaps: Gaps,
    pub box_bound: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub seed: u64,
}
