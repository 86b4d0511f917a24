use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{Layout, PreprocessOption, SynthConfig, DEFAULT_MIN_FRAMES};
use crate::error::{Error, Result};
use crate::eval::{Method, ProtocolConfig};
use crate::features::DescriptorPreset;
use crate::optimizer::TrainConfig;

/// A complete experiment description. Every section has defaults and
/// unknown keys anywhere are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    pub features: FeaturesSection,
    pub preprocess: PreprocessSection,
    pub train: TrainConfig,
    pub protocol: ProtocolConfig,
    pub methods: Vec<Method>,
    pub output_dir: PathBuf,
    /// Feature store read by train/benchmark/sweep-alpha and written by
    /// extract/synth. Defaults to `<output_dir>/features.tdlf`.
    pub store: Option<PathBuf>,
    pub synth: SynthConfig,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub root: Option<PathBuf>,
    pub layout: Layout,
    pub min_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    pub preset: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub options: Vec<PreprocessOption>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub alphas: Vec<f64>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            root: None,
            layout: Layout::Prid2011,
            min_frames: DEFAULT_MIN_FRAMES,
        }
    }
}

impl Default for FeaturesSection {
    fn default() -> Self {
        FeaturesSection {
            preset: DescriptorPreset::DEFAULT_NAME.to_string(),
        }
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            alphas: vec![0.0, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0],
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSection::default(),
            features: FeaturesSection::default(),
            preprocess: PreprocessSection::default(),
            train: TrainConfig::default(),
            protocol: ProtocolConfig::default(),
            methods: vec![Method::Tdl, Method::Euclidean, Method::L1norm],
            output_dir: PathBuf::from("tdl-out"),
            store: None,
            synth: SynthConfig::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Overrides every seed: protocol splits, training and synthesis.
    pub fn apply_seed(&mut self, seed: u64) {
        self.protocol.seed = seed;
        self.train.rng_seed = seed;
        self.synth.rng_seed = seed;
    }

    pub fn store_path(&self) -> PathBuf {
        self.store
            .clone()
            .unwrap_or_else(|| self.output_dir.join("features.tdlf"))
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.synth.validate()?;
        DescriptorPreset::by_name(&self.features.preset)?;
        if self.methods.is_empty() {
            return Err(Error::Config("methods must not be empty".into()));
        }
        if self.protocol.num_trials == 0 {
            return Err(Error::Config("protocol.num_trials must be positive".into()));
        }
        if let Some(a) = self.sweep.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::Config(format!("sweep alpha {a} outside [0, 1]")));
        }
        Ok(())
    }
}
