use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::feature;
use crate::encoders::EncodingSet;
use crate::error::{Error, Result};

/// Settings for training the embedding network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingNetConfig {
    pub encoding: EncodingSet,
    pub epochs: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Adam step size. Zero is accepted and leaves the parameters untouched.
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Weight of the squared Frobenius norm of every embedding matrix.
    pub l2: f64,
    /// Weight of each reconstruction head unless overridden per variable.
    pub reconstruction_weight: f64,
    pub reconstruction_overrides: BTreeMap<String, f64>,
    /// Features fed straight into the choice softmax.
    pub covariates: Vec<String>,
}

impl Default for EmbeddingNetConfig {
    fn default() -> Self {
        Self {
            encoding: EncodingSet::swissmetro(),
            epochs: 80,
            repeats: 300,
            seed: 42,
            learning_rate: 1e-3,
            batch_size: 128,
            l2: 1e-4,
            reconstruction_weight: 0.01,
            reconstruction_overrides: BTreeMap::new(),
            covariates: feature::DEFINITIONS.iter().map(|(name, _)| (*name).into()).collect(),
        }
    }
}

impl EmbeddingNetConfig {
    pub fn reconstruction_weight_for(&self, variable: &str) -> f64 {
        self.reconstruction_overrides
            .get(variable)
            .copied()
            .unwrap_or(self.reconstruction_weight)
    }

    /// Reconstruction weights in encoding-set order.
    pub fn reconstruction_weights(&self) -> Vec<f64> {
        self.encoding
            .variables()
            .map(|v| self.reconstruction_weight_for(v))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} is not a finite non-negative number", self.learning_rate));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad(format!("L2 weight {} must be finite and >= 0", self.l2));
        }
        if self.encoding.entries.is_empty() {
            return bad("the encoding set is empty".into());
        }
        for (i, e) in self.encoding.entries.iter().enumerate() {
            if e.k == 0 {
                return bad(format!("`{}` has K = 0", e.variable));
            }
            if self.encoding.entries[..i].iter().any(|o| o.variable == e.variable) {
                return bad(format!("`{}` is listed twice", e.variable));
            }
            let g = self.reconstruction_weight_for(&e.variable);
            if !(g >= 0.0 && g.is_finite()) {
                return bad(format!("reconstruction weight of `{}` must be finite and >= 0", e.variable));
            }
        }
        for name in self.reconstruction_overrides.keys() {
            if !self.encoding.variables().any(|v| v == name) {
                return Err(Error::UnknownVariable(name.clone()));
            }
        }
        Ok(())
    }
}
