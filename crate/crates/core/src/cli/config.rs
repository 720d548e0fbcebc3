//! Settings shared by every subcommand, loadable from a JSON file.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alignment::TemplateOptions;
use crate::baseline::BaselineConfig;
use crate::codebook::HistogramSpec;
use crate::deeptree::TreeConfig;
use crate::simulator::{ExperimentConfig, PoissonConfig, SimulationConfig};
use crate::strategy::ShotValue;
use crate::trajectory::SyntheticConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub synthetic: SyntheticConfig,
    /// Fraction of matches in the training set.
    pub train_frac: f64,
    pub split_seed: u64,
    pub template: TemplateOptions,
    pub tree: TreeConfig,
    pub baseline: BaselineConfig,
    pub histogram: HistogramSpec,
    pub shot_value: ShotValue,
    pub poisson: PoissonConfig,
    pub simulation: SimulationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            synthetic: SyntheticConfig::default(),
            train_frac: 0.7,
            split_seed: 1,
            template: TemplateOptions::default(),
            tree: TreeConfig::default(),
            baseline: BaselineConfig::default(),
            histogram: HistogramSpec::default(),
            shot_value: ShotValue::Predicted,
            poisson: PoissonConfig::default(),
            simulation: SimulationConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// One seed for data generation, tree training and simulation.
    pub fn set_seed(&mut self, seed: u64) {
        self.synthetic.rng_seed = seed;
        self.tree.rng_seed = seed;
        self.simulation.rng_seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.train_frac) {
            return Err(Error::InvalidConfig(format!(
                "train_frac {} outside [0, 1]",
                self.train_frac
            )));
        }
        self.synthetic.validate()?;
        self.tree.validate()?;
        self.simulation.validate()
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            train_frac: self.train_frac,
            split_seed: self.split_seed,
            template: self.template,
            tree: self.tree.clone(),
            shot_value: self.shot_value,
            poisson: self.poisson,
            simulation: self.simulation,
        }
    }
}
