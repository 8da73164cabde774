//! Utility specifications as TOML, with alternatives named rather than indexed.
//!
//! ```toml
//! [[term]]
//! label = "ASC Train"
//! kind = "constant"
//! alternatives = ["Train"]
//!
//! [[term]]
//! label = "Travel Time (Train and Swissmetro)"
//! kind = "attribute"
//! features = ["train_tt", "sm_tt"]
//! alternatives = ["Train", "SM"]
//! shared = true
//!
//! [[term]]
//! kind = "encoded"
//! variable = "OD"
//! alternatives = ["Train", "SM"]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use travemb_core::mnl::{Term, TermSource, UtilitySpec};

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Constant,
    Attribute,
    Encoded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub kind: TermKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub features: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable: Option<String>,
    pub alternatives: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub shared: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpecFile {
    #[serde(default, rename = "term")]
    pub terms: Vec<TermEntry>,
}

impl SpecFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        toml::from_str(&text).map_err(|source| Error::Toml {
            path: path.into(),
            source,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serialises")
    }

    /// Resolves alternative names against `alternatives`.
    pub fn resolve(&self, alternatives: &[String]) -> Result<UtilitySpec> {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let alts = t
                    .alternatives
                    .iter()
                    .map(|a| {
                        alternatives
                            .iter()
                            .position(|x| x == a)
                            .ok_or_else(|| Error::Config(format!("unknown alternative `{a}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let source = match t.kind {
                    TermKind::Constant => TermSource::Constant,
                    TermKind::Attribute if t.features.is_empty() => {
                        return Err(Error::Config("attribute term without features".into()))
                    }
                    TermKind::Attribute => TermSource::Attribute {
                        features: t.features.clone(),
                    },
                    TermKind::Encoded => TermSource::Encoded {
                        variable: t
                            .variable
                            .clone()
                            .ok_or_else(|| Error::Config("encoded term without `variable`".into()))?,
                    },
                };
                let label = match (&t.label, &source) {
                    (Some(l), _) => l.clone(),
                    (None, TermSource::Encoded { variable }) => variable.clone(),
                    (None, _) => return Err(Error::Config("term without `label`".into())),
                };
                Ok(Term {
                    label,
                    source,
                    alternatives: alts,
                    shared: t.shared,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = UtilitySpec { terms };
        spec.validate(alternatives.len())?;
        Ok(spec)
    }

    pub fn from_spec(spec: &UtilitySpec, alternatives: &[String]) -> Self {
        let terms = spec
            .terms
            .iter()
            .map(|t| {
                let names = t.alternatives.iter().map(|&a| alternatives[a].clone()).collect();
                let (kind, features, variable) = match &t.source {
                    TermSource::Constant => (TermKind::Constant, vec![], None),
                    TermSource::Attribute { features } => (TermKind::Attribute, features.clone(), None),
                    TermSource::Encoded { variable } => (TermKind::Encoded, vec![], Some(variable.clone())),
                };
                TermEntry {
                    label: Some(t.label.clone()),
                    kind,
                    features,
                    variable,
                    alternatives: names,
                    shared: t.shared,
                }
            })
            .collect();
        Self { terms }
    }
}
