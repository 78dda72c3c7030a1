//! TOML configuration file. Every key is optional; see `changekit.example.toml`.

use std::path::Path;

use anyhow::{Context, Result};
use changekit_core::annotation::ServiceOptions;
use changekit_core::dataset::{DatasetLayout, JoinOptions, RecordStatus, StatsOptions};
use changekit_core::instruct::{LlmConfig, RetryPolicy};
use changekit_core::mask::{Connectivity, RegionOptions};
use changekit_core::metrics::MetricConfig;
use serde::Deserialize;
use std::time::Duration;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub regions: RegionSection,
    pub dataset: DatasetSection,
    pub metrics: MetricConfig,
    pub llm: LlmConfig,
    pub generation: GenerationSection,
    pub server: ServerSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionSection {
    /// 4 or 8.
    pub connectivity: u32,
    pub min_area: usize,
    /// Mask pixels brighter than this are changed.
    pub threshold: u8,
}

impl Default for RegionSection {
    fn default() -> Self {
        Self {
            connectivity: 8,
            min_area: 0,
            threshold: 0,
        }
    }
}

impl RegionSection {
    pub fn options(&self) -> Result<RegionOptions> {
        Ok(RegionOptions {
            connectivity: Connectivity::from_number(self.connectivity)?,
            min_area: self.min_area,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    /// `levir_cd`, `sysu_cd` or `custom`.
    pub layout: String,
    /// Used when `layout = "custom"`.
    pub custom: Option<DatasetLayout>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            layout: "levir_cd".into(),
            custom: None,
        }
    }
}

impl DatasetSection {
    pub fn layout(&self, name: Option<&str>) -> Result<DatasetLayout> {
        match name.unwrap_or(&self.layout) {
            "levir_cd" => Ok(DatasetLayout::levir_cd()),
            "sysu_cd" => Ok(DatasetLayout::sysu_cd()),
            "custom" => self
                .custom
                .clone()
                .context("layout \"custom\" needs a [dataset.custom] table"),
            other => anyhow::bail!("unknown dataset layout {other:?}; expected levir_cd, sysu_cd or custom"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSection {
    pub parallelism: usize,
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub jitter_ms: u64,
}

impl Default for GenerationSection {
    fn default() -> Self {
        let retry = RetryPolicy::default();
        Self {
            parallelism: 4,
            max_retries: retry.max_retries,
            base_delay_ms: retry.base_delay.as_millis() as u64,
            jitter_ms: retry.jitter.as_millis() as u64,
        }
    }
}

impl GenerationSection {
    pub fn retry(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            base_delay: Duration::from_millis(self.base_delay_ms),
            jitter: Duration::from_millis(self.jitter_ms),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSection {
    pub addr: String,
    pub page_size: usize,
}

impl Default for ServerSection {
    fn default() -> Self {
        Self {
            addr: "127.0.0.1:8080".into(),
            page_size: ServiceOptions::default().page_size,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: Config = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        config.regions.options()?;
        config.metrics.validate()?;
        Ok(config)
    }

    pub fn stats_options(&self) -> Result<StatsOptions> {
        Ok(StatsOptions {
            regions: self.regions.options()?,
            threshold: self.regions.threshold,
            ..Default::default()
        })
    }

    pub fn join_options(&self, root: &Path, annotator: &str) -> Result<JoinOptions> {
        Ok(JoinOptions {
            regions: self.regions.options()?,
            threshold: self.regions.threshold,
            annotator: annotator.to_owned(),
            status: RecordStatus::Verified,
            root: Some(root.to_path_buf()),
        })
    }

    pub fn service_options(&self) -> Result<ServiceOptions> {
        Ok(ServiceOptions {
            regions: self.regions.options()?,
            threshold: self.regions.threshold,
            page_size: self.server.page_size,
        })
    }
}
