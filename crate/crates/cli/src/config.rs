//! TOML run configuration. Each module has its own flat section:
//!
//! ```toml
//! [framework]
//! n = 400
//! m = 4
//! sync = "lazy"
//!
//! [workload]
//! tx_per_round = 50
//!
//! [bins]
//! n = [400, 1600]
//! m = [4]
//!
//! [bounds]
//! shard_counts = [1, 4, 700, 10000]
//! ```
//!
//! Missing sections and keys take their defaults. Unknown keys are errors.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use shardsim::framework::{NegativeMode, WorkloadConfig};
use shardsim::RunConfig;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub framework: RunConfig,
    pub workload: Option<WorkloadConfig>,
    pub bins: BinsSection,
    pub bounds: BoundsSection,
}

/// Grid for the static bins Monte Carlo: every `n × m` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinsSection {
    pub n: Vec<u64>,
    pub m: Vec<u32>,
    pub red_fraction: f64,
    pub trials: u64,
    pub seed: u64,
}

impl Default for BinsSection {
    fn default() -> Self {
        BinsSection {
            n: vec![400, 1600, 6000],
            m: vec![1, 4],
            red_fraction: 0.25,
            trials: 100_000,
            seed: 0,
        }
    }
}

/// Bound grid `shard_counts × nodes_per_shard`, then the explicit `[n, m]`
/// rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSection {
    pub shard_counts: Vec<u64>,
    pub nodes_per_shard: Vec<u64>,
    pub rows: Vec<[u64; 2]>,
}

impl Default for BoundsSection {
    fn default() -> Self {
        BoundsSection {
            shard_counts: vec![1, 4, 16, 64, 700, 10_000],
            nodes_per_shard: vec![100, 1_000, 10_000, 15_000],
            rows: vec![[6_000, 4], [6_000, 1], [150_000_000, 10_000], [7_000_000, 700]],
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub rounds: Option<u64>,
    pub negative_mode: Option<NegativeMode>,
}

/// The configuration actually run.
#[derive(Debug, Clone, PartialEq)]
pub struct Effective {
    pub framework: RunConfig,
    pub bins: BinsSection,
    pub bounds: BoundsSection,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn resolve(self, o: &Overrides) -> Effective {
        let mut framework = self.framework;
        if let Some(w) = self.workload {
            framework.workload = w;
        }
        let mut bins = self.bins;
        if let Some(seed) = o.seed {
            framework.seed = seed;
            bins.seed = seed;
        }
        if let Some(rounds) = o.rounds {
            framework.rounds = rounds;
        }
        if let Some(mode) = o.negative_mode {
            framework.negative_mode = mode;
        }
        Effective { framework, bins, bounds: self.bounds }
    }
}

impl Effective {
    /// TOML that loads back to the same configuration.
    pub fn to_toml(&self) -> Result<String> {
        let mut framework = toml::Table::try_from(&self.framework)?;
        let workload = framework.remove("workload").context("workload section")?;
        let mut root = toml::Table::new();
        root.insert("framework".into(), framework.into());
        root.insert("workload".into(), workload);
        root.insert("bins".into(), toml::Table::try_from(&self.bins)?.into());
        root.insert("bounds".into(), toml::Table::try_from(&self.bounds)?.into());
        Ok(toml::to_string(&root)?)
    }
}
