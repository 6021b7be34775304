//! JSON experiment configuration.
//!
//! One file fully describes an experiment: dataset, architecture, neuron
//! constants, training settings and seeds. Unknown fields are rejected so
//! typos fail loudly. A `quick` block holds the overrides applied by
//! `--preset quick` for desk-scale runs of the same experiment.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{self, Dataset};
use crate::encoding::EncoderSpec;
use crate::error::{Error, Result};
use crate::network::{Architecture, NetworkKind, Readout};
use crate::neuron::SpikingNeuronConfig;
use crate::training::TrainSettings;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// IDX image pair, split by a seeded permutation.
    Mnist {
        images: PathBuf,
        labels: PathBuf,
        n_train: usize,
        /// Cap on test samples, for short runs.
        #[serde(default)]
        n_test: Option<usize>,
        /// Reshape images to flat vectors for dense architectures.
        #[serde(default)]
        flatten: bool,
    },
    /// Tab-separated file with a `target` column.
    Tabular {
        path: PathBuf,
        n_train: usize,
        #[serde(default = "default_true")]
        normalize: bool,
    },
    /// Generated from a closed-form target function.
    Synthetic {
        formula: SyntheticFormula,
        n_samples: usize,
        n_train: usize,
        data_seed: u64,
        #[serde(default = "default_true")]
        normalize: bool,
    },
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyntheticFormula {
    #[serde(rename = "quadratic")]
    Quadratic,
    #[serde(rename = "feynman_i_6_2a")]
    FeynmanI62a,
    #[serde(rename = "feynman_i_9_18")]
    FeynmanI918,
}

impl DatasetSpec {
    /// Loads and splits the dataset. The split permutation depends only
    /// on `split_seed`, never on the trial seed.
    pub fn load(&self, base_dir: &Path, split_seed: u64) -> Result<(Dataset, Dataset)> {
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
        match self {
            DatasetSpec::Mnist {
                images,
                labels,
                n_train,
                n_test,
                flatten,
            } => {
                let mut ds = data::load_idx(&base_dir.join(images), &base_dir.join(labels))?;
                if *flatten {
                    let n = ds.features.shape()[0];
                    let width: usize = ds.features.shape()[1..].iter().product();
                    ds.features = ds.features.reshape(&[n, width])?;
                }
                let (train, mut test) = ds.split(*n_train, &mut rng)?;
                if let Some(cap) = n_test {
                    if *cap < test.len() {
                        let keep: Vec<usize> = (0..*cap).collect();
                        test = test.subset(&keep)?;
                    }
                }
                Ok((train, test))
            }
            DatasetSpec::Tabular {
                path,
                n_train,
                normalize,
            } => {
                let mut ds = data::load_tabular(&base_dir.join(path))?;
                if *normalize {
                    ds.zscore_normalize()?;
                }
                ds.split(*n_train, &mut rng)
            }
            DatasetSpec::Synthetic {
                formula,
                n_samples,
                n_train,
                data_seed,
                normalize,
            } => {
                let mut gen_rng = ChaCha8Rng::seed_from_u64(*data_seed);
                let mut ds = match formula {
                    SyntheticFormula::Quadratic => data::synth_quadratic(*n_samples, &mut gen_rng)?,
                    SyntheticFormula::FeynmanI62a => {
                        data::synth_feynman_i_6_2a(*n_samples, &mut gen_rng)?
                    }
                    SyntheticFormula::FeynmanI918 => {
                        data::synth_feynman_i_9_18(*n_samples, &mut gen_rng)?
                    }
                };
                if *normalize {
                    ds.zscore_normalize()?;
                }
                ds.split(*n_train, &mut rng)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub arch: String,
    pub kind: NetworkKind,
    pub n_sts: usize,
    pub encoder: EncoderSpecField,
    #[serde(default)]
    pub readout: Readout,
}

/// Encoder names are validated eagerly so "TE" fails at config load with
/// the unsupported-feature error, not mid-run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EncoderSpecField(pub String);

impl EncoderSpecField {
    pub fn resolve(&self) -> Result<EncoderSpec> {
        self.0.parse()
    }
}

/// Overrides applied by `--preset quick`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuickOverrides {
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub n_train: Option<usize>,
    #[serde(default)]
    pub n_test: Option<usize>,
    #[serde(default)]
    pub n_samples: Option<usize>,
    #[serde(default)]
    pub n_sts: Option<usize>,
    #[serde(default)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Full,
    Quick,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Preset> {
        match s {
            "full" => Ok(Preset::Full),
            "quick" => Ok(Preset::Quick),
            other => Err(Error::Config(format!(
                "unknown preset '{other}' (expected 'full' or 'quick')"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    NSts,
    Threshold,
    Beta,
    Lr,
    NTrain,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetSpec,
    pub network: NetworkSpec,
    pub neuron: SpikingNeuronConfig,
    pub training: TrainSettings,
    pub seeds: Vec<u64>,
    #[serde(default = "default_split_seed")]
    pub split_seed: u64,
    #[serde(default)]
    pub quick: Option<QuickOverrides>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn default_split_seed() -> u64 {
    42
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.network.arch.parse::<Architecture>()?;
        self.network.encoder.resolve()?;
        if self.network.n_sts == 0 {
            return Err(Error::Config("network.n_sts must be at least 1".into()));
        }
        self.neuron.validate()?;
        self.training.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::Config("sweep.values must not be empty".into()));
            }
            for &v in &sweep.values {
                if !v.is_finite() {
                    return Err(Error::Config("sweep values must be finite".into()));
                }
                let wants_integer = matches!(
                    sweep.parameter,
                    SweepParameter::NSts | SweepParameter::NTrain
                );
                if wants_integer && (v.fract() != 0.0 || v < 1.0) {
                    return Err(Error::Config(format!(
                        "sweep value {v} must be a positive integer for this parameter"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn apply_preset(&mut self, preset: Preset) -> Result<()> {
        if preset == Preset::Full {
            return Ok(());
        }
        let q = self.quick.clone().ok_or_else(|| {
            Error::Config(format!("config '{}' has no quick preset block", self.name))
        })?;
        if let Some(e) = q.epochs {
            self.training.epochs = e;
        }
        if let Some(b) = q.batch_size {
            self.training.batch_size = b;
        }
        if let Some(seeds) = q.seeds {
            self.seeds = seeds;
        }
        if let Some(sts) = q.n_sts {
            self.network.n_sts = sts;
        }
        match &mut self.dataset {
            DatasetSpec::Mnist {
                n_train, n_test, ..
            } => {
                if let Some(v) = q.n_train {
                    *n_train = v;
                }
                if q.n_test.is_some() {
                    *n_test = q.n_test;
                }
            }
            DatasetSpec::Tabular { n_train, .. } => {
                if let Some(v) = q.n_train {
                    *n_train = v;
                }
            }
            DatasetSpec::Synthetic {
                n_train, n_samples, ..
            } => {
                if let Some(v) = q.n_train {
                    *n_train = v;
                }
                if let Some(v) = q.n_samples {
                    *n_samples = v;
                }
            }
        }
        self.validate()
    }

    /// Clone of this config with one swept parameter replaced.
    pub fn with_sweep_value(
        &self,
        parameter: SweepParameter,
        value: f64,
    ) -> Result<ExperimentConfig> {
        let mut cfg = self.clone();
        match parameter {
            SweepParameter::NSts => cfg.network.n_sts = value as usize,
            SweepParameter::Threshold => cfg.neuron.threshold = value,
            SweepParameter::Beta => cfg.neuron.beta = value,
            SweepParameter::Lr => cfg.training.optimizer.lr = value,
            SweepParameter::NTrain => match &mut cfg.dataset {
                DatasetSpec::Mnist { n_train, .. }
                | DatasetSpec::Tabular { n_train, .. }
                | DatasetSpec::Synthetic { n_train, .. } => *n_train = value as usize,
            },
        }
        cfg.sweep = None;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_json() -> String {
        r#"{
            "name": "quadratic-vsnn",
            "dataset": {
                "kind": "synthetic",
                "formula": "quadratic",
                "n_samples": 250,
                "n_train": 200,
                "data_seed": 1
            },
            "network": {
                "arch": "I(1)->DL(100)->A1->DL(200)->A2->DL(200)->A3->DL(100)->A4->DL(1)",
                "kind": "VSNN",
                "n_sts": 2,
                "encoder": "direct"
            },
            "neuron": {
                "beta": 0.9,
                "threshold": 0.15,
                "sigma": "tanh"
            },
            "training": {
                "epochs": 1000,
                "batch_size": 1000,
                "optimizer": { "lr": 0.001 }
            },
            "seeds": [1, 2, 3],
            "quick": { "epochs": 20, "seeds": [1] }
        }"#
        .to_string()
    }

    #[test]
    fn sample_config_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, sample_json()).unwrap();
        let cfg = ExperimentConfig::from_file(&p).unwrap();
        assert_eq!(cfg.training.epochs, 1000);
        assert_eq!(cfg.neuron.surrogate_slope, 25.0);
        assert_eq!(cfg.training.optimizer.weight_decay, 1e-4);
        let (train, test) = cfg.dataset.load(dir.path(), cfg.split_seed).unwrap();
        assert_eq!(train.len(), 200);
        assert_eq!(test.len(), 50);
    }

    #[test]
    fn quick_preset_overrides_apply() {
        let mut cfg: ExperimentConfig = serde_json::from_str(&sample_json()).unwrap();
        cfg.apply_preset(Preset::Quick).unwrap();
        assert_eq!(cfg.training.epochs, 20);
        assert_eq!(cfg.seeds, vec![1]);
        // untouched fields survive
        assert_eq!(cfg.network.n_sts, 2);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = sample_json().replace("\"seeds\"", "\"sneeds\"");
        assert!(serde_json::from_str::<ExperimentConfig>(&bad).is_err());
    }

    #[test]
    fn te_encoder_fails_at_validation() {
        let bad = sample_json().replace("\"direct\"", "\"TE\"");
        let cfg: ExperimentConfig = serde_json::from_str(&bad).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn sweep_values_validated() {
        let mut cfg: ExperimentConfig = serde_json::from_str(&sample_json()).unwrap();
        cfg.sweep = Some(SweepSpec {
            parameter: SweepParameter::NSts,
            values: vec![1.5],
        });
        assert!(cfg.validate().is_err());
        cfg.sweep = Some(SweepSpec {
            parameter: SweepParameter::NSts,
            values: vec![1.0, 2.0, 4.0],
        });
        cfg.validate().unwrap();
        let swept = cfg.with_sweep_value(SweepParameter::NSts, 4.0).unwrap();
        assert_eq!(swept.network.n_sts, 4);
        let swept = cfg
            .with_sweep_value(SweepParameter::Threshold, 0.3)
            .unwrap();
        assert_eq!(swept.neuron.threshold, 0.3);
    }
}
