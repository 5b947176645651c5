use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use miex_core::au::{ClassSourceCounts, EmotionClass, LabelMap, SourceTag, DEFAULT_SCALE_MAX};
use miex_core::composer::CompositionConfig;
use miex_core::format::config_digest;
use miex_core::mockgen::GeneratorParams;
use miex_core::samplers::{ExpertTable, SamplerConfig};
use miex_core::toy::ToyConfig;

use crate::CliError;

/// Overrides `paths.root`; nothing else is read from the environment.
pub const DATA_ROOT_VAR: &str = "MIEX_DATA_ROOT";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Base for relative paths; defaults to the config file's directory.
    pub root: Option<String>,
    pub mie_au_csv: Vec<String>,
    pub mie_annotations: Option<String>,
    pub mae_au_csv: Vec<String>,
    pub mae_annotations: Option<String>,
    /// `id<TAB>face-ref` list; numbered placeholders when absent.
    pub identities: Option<String>,
    pub label_map: Option<String>,
    pub expert_table: Option<String>,
}

/// Pool size per class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolCounts {
    /// `None` takes every MiE clip of the class.
    pub mie_per_class: Option<usize>,
    pub mae_per_class: usize,
    pub expert_per_class: usize,
}

impl Default for PoolCounts {
    fn default() -> Self {
        Self {
            mie_per_class: None,
            mae_per_class: 1_000,
            expert_per_class: 1_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub k: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { k: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub au_scale_max: f64,
    pub sampler: SamplerConfig,
    pub pool: PoolCounts,
    /// Its `seed` field is ignored; stages use the global seed.
    pub composition: CompositionConfig,
    pub generator: GeneratorParams,
    pub split: SplitConfig,
    pub toy: ToyConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            paths: Paths::default(),
            au_scale_max: DEFAULT_SCALE_MAX,
            sampler: SamplerConfig::default(),
            pool: PoolCounts::default(),
            composition: CompositionConfig::default(),
            generator: GeneratorParams::default(),
            split: SplitConfig::default(),
            toy: ToyConfig::default(),
        }
    }
}

/// A parsed config plus what is needed to resolve its paths.
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub digest: String,
    root: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        config.validate()?;
        let root = match std::env::var_os(DATA_ROOT_VAR) {
            Some(r) => PathBuf::from(r),
            None => match &config.paths.root {
                Some(r) => PathBuf::from(r),
                None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
            },
        };
        Ok(Self {
            digest: config.digest(),
            config,
            root,
        })
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        self.root.join(p)
    }

    pub fn required(&self, p: &Option<String>, what: &str) -> Result<PathBuf, CliError> {
        p.as_deref()
            .map(|p| self.resolve(p))
            .ok_or_else(|| CliError::Validation(format!("config is missing paths.{what}")))
    }

    pub fn label_map(&self) -> Result<LabelMap, CliError> {
        match &self.config.paths.label_map {
            Some(p) => {
                let path = self.resolve(p);
                let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
                Ok(LabelMap::from_json(&text)?)
            }
            None => Ok(LabelMap::default_merge()),
        }
    }

    pub fn expert_table(&self) -> Result<ExpertTable, CliError> {
        match &self.config.paths.expert_table {
            Some(p) => {
                let path = self.resolve(p);
                let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
                Ok(ExpertTable::from_json(&text)?)
            }
            None => Ok(ExpertTable::default_table()),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        miex_core::au::normalize_intensity(0.0, self.au_scale_max)?;
        self.sampler.validate()?;
        self.composition.validate()?;
        self.generator.validate()?;
        self.toy.validate()?;
        if self.split.k < 2 {
            return Err(CliError::Validation("split.k must be at least 2".into()));
        }
        Ok(())
    }

    /// Digest of the config with the machine-specific root blanked.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.paths.root = None;
        config_digest(&c)
    }

    /// Per-bucket pool sizes given the MiE clips available per class.
    pub fn pool_counts(&self, mie_available: [usize; 3]) -> ClassSourceCounts {
        let mut counts = ClassSourceCounts::default();
        for class in EmotionClass::ALL {
            let mie = self.pool.mie_per_class.unwrap_or(mie_available[class.code()]);
            counts.set(class, SourceTag::MiE, mie);
            counts.set(class, SourceTag::MaE, self.pool.mae_per_class);
            counts.set(class, SourceTag::Expert, self.pool.expert_per_class);
        }
        counts
    }
}
