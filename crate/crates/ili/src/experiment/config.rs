//! TOML experiment configuration.
//!
//! The file mirrors one sweep: a dataset source, a train/val/test split,
//! a noise model with one fraction or a list of them, and the improvement
//! loop setup. Unknown keys are rejected everywhere so typos fail loudly
//! instead of silently running defaults. `resolved()` materializes every
//! optional default, and the result is what `config.echo` records.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::engine::{
    EarlyStopping, IliConfig, SeedMode, Variant, DEFAULT_MAX_ITERATIONS,
};
use crate::error::{Error, Result};
use crate::filter::{FilterSpec, DEFAULT_CONFIDENCE_THRESHOLD};
use crate::learner::{Architecture, Augmentation, LearnerSpec};
use crate::noise::{NoiseKind, NoiseSpec};
use crate::seed::{derive, role};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub base_seed: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    pub output_dir: PathBuf,
    /// Corrupt validation labels with the same noise model as training.
    #[serde(default)]
    pub noisy_validation: bool,
    pub dataset: DatasetConfig,
    pub split: SplitConfig,
    pub noise: NoiseConfig,
    pub ili: IliSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Idx,
    Blobs,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    // blobs
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_class: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separation: Option<f64>,
    // idx
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_images: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_labels: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_images: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_labels: Option<PathBuf>,
    // csv
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    /// Truncate the training pool to this many samples before splitting.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subset_cap: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    /// Shuffle seed for splitting; derived from base_seed when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKindConfig {
    Random,
    Bias,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseKindConfig,
    /// A single corruption fraction; mutually exclusive with `fractions`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fraction: Option<f64>,
    /// A sweep over fractions; mutually exclusive with `fraction`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fractions: Option<Vec<f64>>,
    /// Bias mapping, source class to target class.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub map: BTreeMap<String, usize>,
    /// Fixed noise seed shared by every cell; derived per cell when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantConfig {
    Plain,
    Opili,
    Fpili,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[derive(Default)]
pub enum SeedModeConfig {
    #[default]
    Init,
    Ref,
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IliSection {
    pub variant: VariantConfig,
    /// Number of unlabelled partitions; fpili only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_partitions: Option<usize>,
    #[serde(default)]
    pub seed_mode: SeedModeConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replication_factor: Option<f64>,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_true")]
    pub early_stopping: bool,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default)]
    pub final_training: bool,
    #[serde(default)]
    pub filter: FilterConfig,
    pub learner: LearnerConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMode {
    Unfiltered,
    Confidence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub mode: FilterMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig { mode: FilterMode::Unfiltered, threshold: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchitectureConfig {
    Softmax,
    Mlp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub architecture: ArchitectureConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_units: Option<usize>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<AugmentationConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentationConfig {
    pub max_shift: usize,
    pub image_side: usize,
}

fn default_repetitions() -> usize {
    5
}
fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}
fn default_true() -> bool {
    true
}
fn default_patience() -> usize {
    1
}
fn default_epochs() -> usize {
    10
}
fn default_batch_size() -> usize {
    32
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_momentum() -> f64 {
    0.9
}

fn config_err(field: &str, message: &str) -> Error {
    Error::Config(format!("{field}: {message}"))
}

impl ExperimentConfig {
    /// Parses and validates a TOML config file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(config_err("repetitions", "must be at least 1"));
        }
        self.dataset.validate()?;
        self.split.validate(self.dataset.has_external_test())?;
        self.noise.validate()?;
        self.ili.validate()?;
        // the engine re-validates the assembled config; surface that early
        self.ili_config(0).validate()
    }

    /// The config with every omitted default filled in; this is what gets
    /// echoed next to the run outputs.
    pub fn resolved(&self) -> ExperimentConfig {
        let mut resolved = self.clone();
        if resolved.split.seed.is_none() {
            resolved.split.seed = Some(derive(self.base_seed, &[role::SPLIT]));
        }
        if matches!(resolved.ili.filter.mode, FilterMode::Confidence)
            && resolved.ili.filter.threshold.is_none()
        {
            resolved.ili.filter.threshold = Some(DEFAULT_CONFIDENCE_THRESHOLD);
        }
        resolved
    }

    /// The sweep as a list, whether one fraction or many were configured.
    pub fn fractions(&self) -> Vec<f64> {
        match (&self.noise.fraction, &self.noise.fractions) {
            (Some(f), None) => vec![*f],
            (None, Some(fs)) => fs.clone(),
            _ => Vec::new(), // rejected by validate
        }
    }

    pub fn split_seed(&self) -> u64 {
        self.split.seed.unwrap_or_else(|| derive(self.base_seed, &[role::SPLIT]))
    }

    pub fn learner_spec(&self) -> LearnerSpec {
        let l = &self.ili.learner;
        LearnerSpec {
            architecture: match l.architecture {
                ArchitectureConfig::Softmax => Architecture::Softmax,
                ArchitectureConfig::Mlp => Architecture::Mlp {
                    hidden_units: l.hidden_units.unwrap_or(0),
                },
            },
            epochs: l.epochs,
            batch_size: l.batch_size,
            learning_rate: l.learning_rate,
            momentum: l.momentum,
            weight_init_seed: 0, // replaced by the per-iteration derived seed
            augmentation: match &l.augmentation {
                None => Augmentation::None,
                Some(a) => Augmentation::PixelShift {
                    max_shift: a.max_shift,
                    image_side: a.image_side,
                },
            },
        }
    }

    pub fn filter_spec(&self) -> FilterSpec {
        match self.ili.filter.mode {
            FilterMode::Unfiltered => FilterSpec::Unfiltered,
            FilterMode::Confidence => FilterSpec::Confidence {
                threshold: self
                    .ili
                    .filter
                    .threshold
                    .unwrap_or(DEFAULT_CONFIDENCE_THRESHOLD),
            },
        }
    }

    /// The engine config for one run of the sweep.
    pub fn ili_config(&self, run_seed: u64) -> IliConfig {
        IliConfig {
            variant: match self.ili.variant {
                VariantConfig::Plain => Variant::Plain,
                VariantConfig::Opili => Variant::Oscillating,
                VariantConfig::Fpili => Variant::Fragmentation {
                    n_partitions: self.ili.n_partitions.unwrap_or(0),
                },
            },
            seed_mode: match self.ili.seed_mode {
                SeedModeConfig::Init => SeedMode::Init,
                SeedModeConfig::Ref => SeedMode::Ref {
                    replication_factor: self.ili.replication_factor.unwrap_or(1.0),
                },
            },
            filter: self.filter_spec(),
            max_iterations: self.ili.max_iterations,
            early_stopping: EarlyStopping {
                enabled: self.ili.early_stopping,
                patience: self.ili.patience,
            },
            final_training: self.ili.final_training,
            learner: self.learner_spec(),
            run_seed,
        }
    }

    pub fn bias_map(&self) -> Result<BTreeMap<usize, usize>> {
        let mut map = BTreeMap::new();
        for (key, &target) in &self.noise.map {
            let source: usize = key
                .parse()
                .map_err(|_| config_err("noise.map", &format!("key {key:?} is not a class index")))?;
            map.insert(source, target);
        }
        Ok(map)
    }

    pub fn noise_spec(&self, fraction: f64, seed: u64) -> Result<NoiseSpec> {
        let kind = match self.noise.kind {
            NoiseKindConfig::Random => NoiseKind::Random,
            NoiseKindConfig::Bias => NoiseKind::Bias(self.bias_map()?),
        };
        Ok(NoiseSpec { kind, fraction, seed })
    }

    pub fn variant_name(&self) -> &'static str {
        match self.ili.variant {
            VariantConfig::Plain => "plain",
            VariantConfig::Opili => "opili",
            VariantConfig::Fpili => "fpili",
        }
    }
}

impl DatasetConfig {
    pub fn has_external_test(&self) -> bool {
        match self.kind {
            DatasetKind::Idx => self.test_images.is_some(),
            DatasetKind::Csv => self.test.is_some(),
            DatasetKind::Blobs => false,
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(cap) = self.subset_cap {
            if cap == 0 {
                return Err(config_err("dataset.subset_cap", "must be at least 1"));
            }
        }
        let blob_fields = [
            ("dataset.classes", self.classes.is_some()),
            ("dataset.per_class", self.per_class.is_some()),
            ("dataset.dim", self.dim.is_some()),
            ("dataset.separation", self.separation.is_some()),
        ];
        let idx_fields = [
            ("dataset.train_images", self.train_images.is_some()),
            ("dataset.train_labels", self.train_labels.is_some()),
            ("dataset.test_images", self.test_images.is_some()),
            ("dataset.test_labels", self.test_labels.is_some()),
        ];
        let csv_fields =
            [("dataset.train", self.train.is_some()), ("dataset.test", self.test.is_some())];
        let reject = |fields: &[(&str, bool)], kind: &str| -> Result<()> {
            for (name, set) in fields {
                if *set {
                    return Err(config_err(name, &format!("not a {kind} dataset field")));
                }
            }
            Ok(())
        };
        match self.kind {
            DatasetKind::Blobs => {
                reject(&idx_fields, "blobs")?;
                reject(&csv_fields, "blobs")?;
                let classes = self.classes.ok_or_else(|| config_err("dataset.classes", "required for blobs"))?;
                if classes < 2 {
                    return Err(config_err("dataset.classes", "need at least 2"));
                }
                if self.per_class.ok_or_else(|| config_err("dataset.per_class", "required for blobs"))? == 0 {
                    return Err(config_err("dataset.per_class", "must be at least 1"));
                }
                if self.dim.ok_or_else(|| config_err("dataset.dim", "required for blobs"))? == 0 {
                    return Err(config_err("dataset.dim", "must be at least 1"));
                }
                let sep = self.separation.ok_or_else(|| config_err("dataset.separation", "required for blobs"))?;
                if !(sep > 0.0 && sep.is_finite()) {
                    return Err(config_err("dataset.separation", "must be positive"));
                }
            }
            DatasetKind::Idx => {
                reject(&blob_fields, "idx")?;
                reject(&csv_fields, "idx")?;
                if self.train_images.is_none() {
                    return Err(config_err("dataset.train_images", "required for idx"));
                }
                if self.train_labels.is_none() {
                    return Err(config_err("dataset.train_labels", "required for idx"));
                }
                if self.test_images.is_some() != self.test_labels.is_some() {
                    return Err(config_err(
                        "dataset.test_images",
                        "test_images and test_labels must be given together",
                    ));
                }
            }
            DatasetKind::Csv => {
                reject(&blob_fields, "csv")?;
                reject(&idx_fields, "csv")?;
                if self.train.is_none() {
                    return Err(config_err("dataset.train", "required for csv"));
                }
            }
        }
        Ok(())
    }
}

impl SplitConfig {
    fn validate(&self, external_test: bool) -> Result<()> {
        for (name, v) in [("split.train", self.train), ("split.val", self.val), ("split.test", self.test)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(config_err(name, "must be a non-negative number"));
            }
        }
        if self.train <= 0.0 {
            return Err(config_err("split.train", "must be positive"));
        }
        if self.val <= 0.0 {
            return Err(config_err("split.val", "early stopping needs a validation subset"));
        }
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(config_err("split", &format!("fractions sum to {sum}, expected 1")));
        }
        if external_test && self.test != 0.0 {
            return Err(config_err(
                "split.test",
                "must be 0 when the dataset brings its own test files",
            ));
        }
        if !external_test && self.test <= 0.0 {
            return Err(config_err("split.test", "must be positive without external test files"));
        }
        Ok(())
    }
}

impl NoiseConfig {
    fn validate(&self) -> Result<()> {
        let fractions: &[f64] = match (&self.fraction, &self.fractions) {
            (Some(f), None) => std::slice::from_ref(f),
            (None, Some(fs)) if !fs.is_empty() => fs,
            (None, Some(_)) => return Err(config_err("noise.fractions", "must not be empty")),
            (Some(_), Some(_)) => {
                return Err(config_err("noise.fraction", "give either fraction or fractions, not both"))
            }
            (None, None) => {
                return Err(config_err("noise.fraction", "either fraction or fractions is required"))
            }
        };
        for &f in fractions {
            if !(0.0..=1.0).contains(&f) || !f.is_finite() {
                return Err(config_err("noise.fractions", &format!("fraction {f} outside [0,1]")));
            }
        }
        match self.kind {
            NoiseKindConfig::Random => {
                if !self.map.is_empty() {
                    return Err(config_err("noise.map", "only used with kind = \"bias\""));
                }
            }
            NoiseKindConfig::Bias => {
                if self.map.is_empty() {
                    return Err(config_err("noise.map", "bias noise needs at least one mapping"));
                }
                for (key, &target) in &self.map {
                    let source: usize = key.parse().map_err(|_| {
                        config_err("noise.map", &format!("key {key:?} is not a class index"))
                    })?;
                    if source == target {
                        return Err(config_err(
                            "noise.map",
                            &format!("class {source} mapped to itself"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

impl IliSection {
    fn validate(&self) -> Result<()> {
        match self.variant {
            VariantConfig::Fpili => {
                let n = self
                    .n_partitions
                    .ok_or_else(|| config_err("ili.n_partitions", "required for fpili"))?;
                if n < 2 {
                    return Err(config_err("ili.n_partitions", "need at least 2"));
                }
                if self.max_iterations < n - 1 {
                    return Err(config_err(
                        "ili.max_iterations",
                        &format!("{n} partitions need at least {}", n - 1),
                    ));
                }
            }
            _ => {
                if self.n_partitions.is_some() {
                    return Err(config_err("ili.n_partitions", "only used with variant = \"fpili\""));
                }
            }
        }
        match self.seed_mode {
            SeedModeConfig::Ref => {
                if !matches!(self.variant, VariantConfig::Fpili) {
                    return Err(config_err("ili.seed_mode", "ref mode needs variant = \"fpili\""));
                }
                let r = self
                    .replication_factor
                    .ok_or_else(|| config_err("ili.replication_factor", "required for ref mode"))?;
                if !(r >= 1.0 && r.is_finite()) {
                    return Err(config_err("ili.replication_factor", "must be at least 1"));
                }
            }
            SeedModeConfig::Init => {
                if self.replication_factor.is_some() {
                    return Err(config_err(
                        "ili.replication_factor",
                        "only used with seed_mode = \"ref\"",
                    ));
                }
            }
        }
        match self.filter.mode {
            FilterMode::Unfiltered => {
                if self.filter.threshold.is_some() {
                    return Err(config_err(
                        "ili.filter.threshold",
                        "only used with mode = \"confidence\"",
                    ));
                }
            }
            FilterMode::Confidence => {
                if let Some(t) = self.filter.threshold {
                    if !(0.0..=1.0).contains(&t) || !t.is_finite() {
                        return Err(config_err("ili.filter.threshold", "must be in [0,1]"));
                    }
                }
            }
        }
        match self.learner.architecture {
            ArchitectureConfig::Mlp => {
                if self.learner.hidden_units.is_none_or(|h| h == 0) {
                    return Err(config_err("ili.learner.hidden_units", "required for mlp, at least 1"));
                }
            }
            ArchitectureConfig::Softmax => {
                if self.learner.hidden_units.is_some() {
                    return Err(config_err(
                        "ili.learner.hidden_units",
                        "only used with architecture = \"mlp\"",
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
base_seed = 42
repetitions = 3
output_dir = "runs/demo"

[dataset]
kind = "blobs"
classes = 3
per_class = 200
dim = 2
separation = 6.0

[split]
train = 0.6
val = 0.2
test = 0.2

[noise]
kind = "random"
fractions = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]

[ili]
variant = "plain"

[ili.learner]
architecture = "softmax"
epochs = 5
learning_rate = 0.02
momentum = 0.0
"#;

    #[test]
    fn full_config_parses_with_defaults() {
        let config: ExperimentConfig = toml::from_str(FULL).unwrap();
        config.validate().unwrap();
        assert_eq!(config.repetitions, 3);
        assert_eq!(config.ili.max_iterations, 10);
        assert!(config.ili.early_stopping);
        assert_eq!(config.ili.patience, 1);
        assert!(!config.ili.final_training);
        assert_eq!(config.ili.filter, FilterConfig::default());
        assert_eq!(config.ili.learner.batch_size, 32);
        assert_eq!(config.fractions().len(), 7);
        assert!(!config.noisy_validation);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let text = FULL.replace("[ili]\nvariant = \"plain\"", "[ili]\nvariant = \"plain\"\nbogus_knob = 3");
        let err = toml::from_str::<ExperimentConfig>(&text).unwrap_err();
        assert!(err.to_string().contains("bogus_knob"), "{err}");
        let text = FULL.replace("base_seed = 42", "base_seed = 42\nextra = 1");
        let err = toml::from_str::<ExperimentConfig>(&text).unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
    }

    #[test]
    fn resolved_config_round_trips_through_toml() {
        let config: ExperimentConfig = toml::from_str(FULL).unwrap();
        let resolved = config.resolved();
        assert!(resolved.split.seed.is_some());
        let echoed = toml::to_string(&resolved).unwrap();
        let reparsed: ExperimentConfig = toml::from_str(&echoed).unwrap();
        assert_eq!(reparsed, resolved);
        // resolving is idempotent
        assert_eq!(reparsed.resolved(), resolved);
    }

    #[test]
    fn confidence_threshold_default_is_materialized() {
        let text = FULL.replace(
            "[ili.learner]",
            "[ili.filter]\nmode = \"confidence\"\n\n[ili.learner]",
        );
        let config: ExperimentConfig = toml::from_str(&text).unwrap();
        config.validate().unwrap();
        assert_eq!(config.ili.filter.threshold, None);
        let resolved = config.resolved();
        assert_eq!(resolved.ili.filter.threshold, Some(DEFAULT_CONFIDENCE_THRESHOLD));
        assert_eq!(
            config.filter_spec(),
            FilterSpec::Confidence { threshold: DEFAULT_CONFIDENCE_THRESHOLD }
        );
    }

    #[test]
    fn validation_errors_name_the_field() {
        let cases: &[(&str, &str, &str)] = &[
            ("repetitions = 3", "repetitions = 0", "repetitions"),
            ("fractions = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]", "fractions = [1.5]", "noise.fractions"),
            ("test = 0.2", "test = 0.3", "split"),
            ("variant = \"plain\"", "variant = \"fpili\"", "ili.n_partitions"),
            ("classes = 3", "classes = 1", "dataset.classes"),
            ("momentum = 0.0", "momentum = 1.0", "momentum"),
        ];
        for (from, to, field) in cases {
            let text = FULL.replace(from, to);
            let config: ExperimentConfig = toml::from_str(&text).unwrap();
            let err = config.validate().unwrap_err();
            assert!(err.to_string().contains(field), "{from} -> {to}: {err}");
        }
    }

    #[test]
    fn fraction_and_fractions_are_mutually_exclusive() {
        let text = FULL.replace(
            "fractions = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]",
            "fraction = 0.5\nfractions = [0.3]",
        );
        let config: ExperimentConfig = toml::from_str(&text).unwrap();
        assert!(config.validate().is_err());
        let text = FULL.replace("fractions = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]", "");
        let config: ExperimentConfig = toml::from_str(&text).unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn bias_noise_requires_a_sane_map() {
        let bias = FULL.replace(
            "kind = \"random\"",
            "kind = \"bias\"\nmap = { \"4\" = 7 }",
        );
        let config: ExperimentConfig = toml::from_str(&bias).unwrap();
        config.validate().unwrap();
        assert_eq!(config.bias_map().unwrap(), BTreeMap::from([(4, 7)]));

        let self_map = FULL.replace(
            "kind = \"random\"",
            "kind = \"bias\"\nmap = { \"4\" = 4 }",
        );
        let config: ExperimentConfig = toml::from_str(&self_map).unwrap();
        assert!(config.validate().is_err());

        let no_map = FULL.replace("kind = \"random\"", "kind = \"bias\"");
        let config: ExperimentConfig = toml::from_str(&no_map).unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn foreign_dataset_fields_are_rejected() {
        let text = FULL.replace("separation = 6.0", "separation = 6.0\ntrain = \"x.csv\"");
        let config: ExperimentConfig = toml::from_str(&text).unwrap();
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("dataset.train"), "{err}");
    }

    #[test]
    fn engine_config_assembly_matches_the_sections() {
        let text = FULL
            .replace("variant = \"plain\"", "variant = \"fpili\"\nn_partitions = 3\nseed_mode = \"ref\"\nreplication_factor = 2.0")
            .replace(
                "architecture = \"softmax\"",
                "architecture = \"mlp\"\nhidden_units = 16",
            );
        let config: ExperimentConfig = toml::from_str(&text).unwrap();
        config.validate().unwrap();
        let ili = config.ili_config(99);
        assert_eq!(ili.variant, Variant::Fragmentation { n_partitions: 3 });
        assert_eq!(ili.seed_mode, SeedMode::Ref { replication_factor: 2.0 });
        assert_eq!(ili.run_seed, 99);
        assert_eq!(ili.learner.architecture, Architecture::Mlp { hidden_units: 16 });
        assert_eq!(ili.learner.weight_init_seed, 0);
    }
}
