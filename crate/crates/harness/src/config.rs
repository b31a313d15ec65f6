//! The experiment configuration: one JSON document describing every stage.
//! All seeds are derived from `seed` with `rng::derive_seed(seed, index,
//! stage)`, so the document plus the master seed reproduces a run.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cattr_core::attribution::{LooConfig, ProjectionDistribution, ProjectionSpec};
use cattr_core::datagen::{BaseConfig, FrequencyConfig, TextureKind};
use cattr_core::nn::{BlockSpec, NetworkSpec, TrainConfig};
use cattr_core::probes::{ParamSet, ProbeConfig};
use cattr_core::rng::derive_seed;

use crate::error::{HarnessError, IoContext, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseSection {
    pub n_classes: usize,
    pub per_class_count: usize,
    pub image_size: usize,
}

impl Default for BaseSection {
    fn default() -> Self {
        let b = BaseConfig::default();
        Self {
            n_classes: b.n_classes,
            per_class_count: b.per_class_count,
            image_size: b.image_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub channels: Vec<usize>,
    pub window: usize,
    pub pool: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            channels: vec![12, 24, 24],
            window: 3,
            pool: true,
            epochs: 20,
            batch_size: 32,
            learning_rate: 3e-3,
            weight_decay: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ConceptSpec {
    /// Class-linked: every base example whose texture matches.
    Texture { texture: TextureKind },
    /// High-to-low spatial frequency transitions vs. uniform frequency.
    Highlow,
    /// Highlow positives vs. boundary positives.
    Relative,
}

impl ConceptSpec {
    pub fn name(&self) -> String {
        match self {
            ConceptSpec::Texture { texture } => format!("texture-{}", texture.name()),
            ConceptSpec::Highlow => "highlow".into(),
            ConceptSpec::Relative => "highlow-vs-boundary".into(),
        }
    }

    /// Class-linked concepts train for 20 probe epochs; frequency-based ones
    /// converge more slowly and get 100.
    pub fn default_epochs(&self) -> usize {
        match self {
            ConceptSpec::Texture { .. } => 20,
            _ => 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    /// Overrides the per-concept epoch count when set.
    pub epochs: Option<usize>,
    pub sparsity: Vec<usize>,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            batch_size: 64,
            weight_decay: 1e-5,
            epochs: None,
            sparsity: vec![1, 4, 16, 64],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttributionSection {
    /// Name of the attributed concept (see [`ConceptSpec::name`]).
    pub concept: String,
    /// Taps to attribute; empty means every configured tap.
    pub taps: Vec<String>,
    pub params: ParamSet,
    /// Projection dimension; `None` means `min(512, n_params)`.
    pub projection_dim: Option<usize>,
    pub distribution: ProjectionDistribution,
}

impl Default for AttributionSection {
    fn default() -> Self {
        Self {
            concept: "texture-stripes".into(),
            taps: Vec::new(),
            params: ParamSet::Full,
            projection_dim: None,
            distribution: ProjectionDistribution::Gaussian,
        }
    }
}

/// A removal size: an absolute count or a fraction of the base training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RemovalSize {
    Count(usize),
    Fraction(f64),
}

impl RemovalSize {
    pub fn resolve(self, n_train: usize) -> usize {
        match self {
            RemovalSize::Count(t) => t,
            RemovalSize::Fraction(f) => (f * n_train as f64).round() as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeaveoutSection {
    pub concept: String,
    pub tap: String,
    pub removals: Vec<RemovalSize>,
}

impl Default for LeaveoutSection {
    fn default() -> Self {
        Self {
            concept: "texture-stripes".into(),
            tap: "layer3".into(),
            removals: vec![
                RemovalSize::Fraction(0.01),
                RemovalSize::Fraction(0.05),
                RemovalSize::Fraction(0.1),
            ],
        }
    }
}

/// The leave-one-out agreement check on a small logistic fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub n_train: usize,
    pub n_val: usize,
    pub dim: usize,
    pub separation: f64,
    pub members: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// L2 strength of the retrained logistic models.
    pub l2: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            n_train: 40,
            n_val: 20,
            dim: 3,
            separation: 1.0,
            members: 10,
            epochs: 50,
            learning_rate: 1e-2,
            l2: LooConfig::default().l2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: Option<String>,
    pub base: BaseSection,
    pub network: NetworkSection,
    /// Ensemble size M.
    pub members: usize,
    pub taps: Vec<String>,
    pub concepts: Vec<ConceptSpec>,
    /// Images per frequency concept set (half positives).
    pub frequency_count: usize,
    pub probe: ProbeSection,
    pub attribution: AttributionSection,
    pub leaveout: LeaveoutSection,
    pub oracle: OracleSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: None,
            base: BaseSection::default(),
            network: NetworkSection::default(),
            members: 20,
            taps: vec!["layer1".into(), "layer2".into(), "layer3".into(), "logits".into()],
            concepts: vec![
                ConceptSpec::Texture { texture: TextureKind::Stripes },
                ConceptSpec::Highlow,
                ConceptSpec::Relative,
            ],
            frequency_count: FrequencyConfig::default().count,
            probe: ProbeSection::default(),
            attribution: AttributionSection::default(),
            leaveout: LeaveoutSection::default(),
            oracle: OracleSection::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).at(path)?;
        serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form; `out` is excluded so moving a run
    /// does not change its identity.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        hex::encode(Sha256::digest(serde_json::to_vec(&c).expect("config serializes")))
    }

    pub fn base_config(&self) -> BaseConfig {
        BaseConfig {
            n_classes: self.base.n_classes,
            per_class_count: self.base.per_class_count,
            image_size: self.base.image_size,
            seed: derive_seed(self.seed, 0, "base-data"),
        }
    }

    pub fn frequency_config(&self, which: &str) -> FrequencyConfig {
        FrequencyConfig {
            count: self.frequency_count,
            image_size: self.base.image_size,
            seed: derive_seed(self.seed, 0, &format!("{which}-data")),
        }
    }

    pub fn network_spec(&self) -> NetworkSpec {
        NetworkSpec {
            input: [1, self.base.image_size, self.base.image_size],
            blocks: self
                .network
                .channels
                .iter()
                .map(|&c| BlockSpec {
                    window: self.network.window,
                    out_channels: c,
                    pool: self.network.pool,
                })
                .collect(),
            n_classes: self.base.n_classes,
        }
    }

    /// Training settings for ensemble member `j`.
    pub fn train_config(&self, member: usize) -> TrainConfig {
        TrainConfig {
            epochs: self.network.epochs,
            batch_size: self.network.batch_size,
            learning_rate: self.network.learning_rate,
            weight_decay: self.network.weight_decay,
            ..TrainConfig::default()
        }
        .with_seed(derive_seed(self.seed, member as u64, "train"))
    }

    /// Probe settings for member `j`, concept and tap. Sparse probes of the
    /// same (member, concept, tap) share the dense seed, which is what makes
    /// `k = d` reproduce the dense probe.
    pub fn probe_config(&self, member: usize, concept: &ConceptSpec, tap: &str) -> ProbeConfig {
        ProbeConfig {
            epochs: self.probe.epochs.unwrap_or_else(|| concept.default_epochs()),
            batch_size: self.probe.batch_size,
            learning_rate: self.probe.learning_rate,
            weight_decay: self.probe.weight_decay,
            ..ProbeConfig::default()
        }
        .with_seed(derive_seed(self.seed, member as u64, &format!("probe:{}:{tap}", concept.name())))
    }

    pub fn projection_spec(&self, n_params: usize) -> ProjectionSpec {
        let mut spec = ProjectionSpec::default_for(n_params, derive_seed(self.seed, 0, "projection"));
        if let Some(dim) = self.attribution.projection_dim {
            spec.dim = dim.min(n_params);
        }
        spec.distribution = self.attribution.distribution;
        spec
    }

    pub fn concept(&self, name: &str) -> Result<ConceptSpec> {
        self.concepts
            .iter()
            .copied()
            .find(|c| c.name() == name)
            .ok_or_else(|| {
                let known: Vec<String> = self.concepts.iter().map(|c| c.name()).collect();
                invalid(format!("unknown concept `{name}`; configured: {}", known.join(", ")))
            })
    }

    pub fn attribution_taps(&self) -> Vec<String> {
        if self.attribution.taps.is_empty() {
            self.taps.clone()
        } else {
            self.attribution.taps.clone()
        }
    }

    pub fn n_train(&self) -> usize {
        let b = self.base_config();
        b.n_classes * (b.per_class_count - b.val_per_class())
    }

    /// Removal counts for the leave-out loop, `T = 0` first.
    pub fn removal_counts(&self) -> Vec<usize> {
        let n = self.n_train();
        let mut ts = vec![0];
        for r in &self.leaveout.removals {
            let t = r.resolve(n);
            if !ts.contains(&t) {
                ts.push(t);
            }
        }
        ts
    }

    pub fn validate(&self) -> Result<()> {
        self.base_config().validate()?;
        let spec = self.network_spec();
        spec.validate()?;
        self.train_config(0).validate()?;
        if self.members == 0 {
            return Err(invalid("members must be at least 1"));
        }
        if self.taps.is_empty() {
            return Err(invalid("at least one tap is required"));
        }
        for tap in self.taps.iter().chain(&self.attribution.taps).chain([&self.leaveout.tap]) {
            spec.tap_stage(tap)?;
        }
        if !self.taps.contains(&self.leaveout.tap) {
            return Err(invalid(format!("leave-out tap `{}` is not in the tap list", self.leaveout.tap)));
        }
        if self.concepts.is_empty() {
            return Err(invalid("at least one concept is required"));
        }
        let mut names: Vec<String> = self.concepts.iter().map(|c| c.name()).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("concepts must be distinct"));
        }
        for c in &self.concepts {
            if let ConceptSpec::Texture { texture } = c {
                if self.base_config().classes_with_texture(*texture).is_empty() {
                    return Err(invalid(format!("texture `{}` names no base class", texture.name())));
                }
            }
        }
        self.frequency_config("highlow").validate()?;
        self.concept(&self.attribution.concept)?;
        self.concept(&self.leaveout.concept)?;
        if self.leaveout.concept != self.attribution.concept {
            return Err(invalid(format!(
                "leave-out concept `{}` must be the attributed concept `{}`",
                self.leaveout.concept, self.attribution.concept
            )));
        }
        if !self.attribution_taps().contains(&self.leaveout.tap) {
            return Err(invalid(format!("leave-out tap `{}` is not attributed", self.leaveout.tap)));
        }
        if self.probe.sparsity.contains(&0) {
            return Err(invalid("sparsity values must be at least 1"));
        }
        self.probe_config(0, &self.concepts[0], &self.taps[0]).validate()?;
        if self.attribution.projection_dim == Some(0) {
            return Err(invalid("projection dimension must be at least 1"));
        }
        let o = &self.oracle;
        if o.members == 0 || o.epochs == 0 || o.dim == 0 || !(o.l2 > 0.0) || !(o.learning_rate > 0.0) {
            return Err(invalid("oracle members, epochs, dim, l2 and learning rate must be positive"));
        }
        let n = self.n_train();
        for r in &self.leaveout.removals {
            if let RemovalSize::Fraction(f) = r {
                if !(0.0..1.0).contains(f) {
                    return Err(invalid(format!("removal fraction {f} must be in [0, 1)")));
                }
            }
            let t = r.resolve(n);
            if t >= n {
                return Err(invalid(format!("removal T = {t} must be below n_train = {n}")));
            }
        }
        Ok(())
    }
}
