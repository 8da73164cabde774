use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use travemb_core::data::{FilterRules, SplitSpec};
use travemb_core::embed::EmbeddingNetConfig;
use travemb_core::encoders::EncodingSet;

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Original,
    DummyFull,
    DummyReduced,
    Pca,
    Embeddings,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Original,
        ModelKind::DummyFull,
        ModelKind::DummyReduced,
        ModelKind::Pca,
        ModelKind::Embeddings,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Original => "original",
            Self::DummyFull => "dummy_full",
            Self::DummyReduced => "dummy_reduced",
            Self::Pca => "pca",
            Self::Embeddings => "embeddings",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Cheap survey holds OD, TICKET and the choice.
    Light,
    /// Cheap data holds OD and the choice only.
    Bigdata,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Light => "light",
            Self::Bigdata => "bigdata",
        }
    }

    pub fn variables(self) -> &'static [&'static str] {
        use travemb_core::data::variable::{OD, TICKET};
        match self {
            Self::Light => &[OD, TICKET],
            Self::Bigdata => &[OD],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub fractions: Vec<f64>,
    pub scenarios: Vec<Scenario>,
    /// Embedding repeats per scenario; `None` reuses the experiment setting.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    pub models: Vec<ModelKind>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            fractions: (1..=10).map(|i| f64::from(i) / 10.0).collect(),
            scenarios: vec![Scenario::Light, Scenario::Bigdata],
            repeats: None,
            models: ModelKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    /// Seeds the split and the first embedding repeat.
    pub seed: u64,
    pub ratios: [f64; 3],
    pub filter: FilterRules,
    /// Per-variable K shared by PCA and the embedding network.
    pub encoding: EncodingSet,
    pub embedding: EmbeddingNetConfig,
    pub roster: Vec<ModelKind>,
    pub output_dir: PathBuf,
    /// Project with the diagonal of the covariance only.
    pub independent_projection: bool,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("data/swissmetro.dat"),
            seed: 42,
            ratios: [0.6, 0.2, 0.2],
            filter: FilterRules::default(),
            encoding: EncodingSet::swissmetro(),
            embedding: EmbeddingNetConfig::default(),
            roster: ModelKind::ALL.to_vec(),
            output_dir: PathBuf::from("runs/latest"),
            independent_projection: false,
            sweep: SweepConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Reads TOML or JSON (by extension) and normalises the result.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut config: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|source| Error::Json {
                path: path.into(),
                source,
            })?
        } else {
            toml::from_str(&text).map_err(|source| Error::Toml {
                path: path.into(),
                source,
            })?
        };
        if config.dataset.is_relative() {
            if let Some(dir) = path.parent() {
                let candidate = dir.join(&config.dataset);
                if candidate.exists() {
                    config.dataset = candidate;
                }
            }
        }
        config.normalise();
        config.validate()?;
        Ok(config)
    }

    /// Pushes the shared seed and encoding into the embedding settings.
    pub fn normalise(&mut self) {
        self.embedding.seed = self.seed;
        self.embedding.encoding = self.encoding.clone();
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            ratios: self.ratios,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.roster.is_empty() {
            return Err(Error::Config("roster must name at least one model".into()));
        }
        self.split_spec().validate()?;
        self.embedding.validate()?;
        if self.embedding.encoding != self.encoding || self.embedding.seed != self.seed {
            return Err(Error::Config(
                "embedding settings disagree with the experiment encoding or seed".into(),
            ));
        }
        check_fractions(&self.sweep.fractions)
    }

    pub fn has(&self, model: ModelKind) -> bool {
        self.roster.contains(&model)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serialises");
        let canonical = serde_json::to_string(&value).expect("value serialises");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// Fractions must lie in (0, 1] and increase strictly.
pub fn check_fractions(fractions: &[f64]) -> Result<()> {
    if fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(Error::Config(format!("sweep fractions must lie in (0, 1], got {fractions:?}")));
    }
    if fractions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("sweep fractions must increase strictly, got {fractions:?}")));
    }
    Ok(())
}
