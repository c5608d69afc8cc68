use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use tomocov::pipeline::PipelineConfig;
use tomocov::simulate::{desk, Heterogeneity, SimConfig};

/// Environment variable naming the kernel-block cache directory.
pub const CACHE_ENV: &str = "TOMOCOV_CACHE_DIR";

/// Whole-run configuration file. Every section is optional; unknown keys
/// are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub simulate: SimulateSection,
    pub pipeline: PipelineConfig,
    pub report: ReportSection,
}

/// A preset with overrides, or a fully spelled-out population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub preset: Option<String>,
    pub n: usize,
    pub snr_het: Option<f64>,
    pub seed: u64,
    pub n_pix: Option<usize>,
    pub n_res: Option<usize>,
    pub k_max: Option<usize>,
    pub heterogeneity: Option<Heterogeneity>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            preset: None,
            n: 10_000,
            snr_het: None,
            seed: 0,
            n_pix: None,
            n_res: None,
            k_max: None,
            heterogeneity: None,
        }
    }
}

impl SimulateSection {
    pub fn to_sim_config(&self) -> Result<SimConfig> {
        let mut cfg = match (&self.preset, &self.heterogeneity) {
            (Some(_), Some(_)) => return Err(ConfigError("give either a preset or a heterogeneity table, not both".into()).into()),
            (Some(name), None) => desk::preset(name, self.n, self.snr_het, self.seed)
                .ok_or_else(|| ConfigError(format!("unknown preset `{name}`; known: two-class, three-class, triangle")))?,
            (None, Some(h)) => {
                let mut c = desk::two_class(self.n, self.snr_het, self.seed);
                c.heterogeneity = h.clone();
                c
            }
            (None, None) => return Err(ConfigError("simulation needs a preset or a heterogeneity table".into()).into()),
        };
        if let Some(v) = self.n_pix {
            cfg.n_pix = v;
        }
        if let Some(v) = self.n_res {
            cfg.n_res = v;
        }
        if let Some(v) = self.k_max {
            cfg.k_max = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub fsc_shells: usize,
    pub hist_bins: usize,
    /// Side of the real-space grid for exported volumes; 0 skips the export.
    pub volume_grid: usize,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self {
            fsc_shells: 16,
            hist_bins: 40,
            volume_grid: 33,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let cfg: RunConfig = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).map_err(ConfigError::from).with_context(|| format!("parsing {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        Ok(cfg)
    }

    /// Flag, then environment, then config file.
    pub fn cache_dir(&self, flag: Option<&PathBuf>) -> Option<PathBuf> {
        flag.cloned()
            .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
            .or_else(|| self.pipeline.cache_dir.clone())
    }
}

/// Marks configuration problems for the exit-code mapping.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl From<toml::de::Error> for ConfigError {
    fn from(e: toml::de::Error) -> Self {
        ConfigError(e.to_string())
    }
}
