use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::feature;
use crate::error::{Error, Result};

/// Where a utility term takes its values from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TermSource {
    /// Alternative-specific constant (value 1).
    Constant,
    /// Numeric features, one per listed alternative (a single name is reused
    /// for every alternative).
    Attribute { features: Vec<String> },
    /// Encoded categorical variable; expands to `K` columns per alternative.
    Encoded { variable: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub label: String,
    pub source: TermSource,
    pub alternatives: Vec<usize>,
    /// One coefficient shared by all listed alternatives.
    #[serde(default)]
    pub shared: bool,
}

impl Term {
    pub fn constant(label: &str, alternative: usize) -> Self {
        Self {
            label: label.to_owned(),
            source: TermSource::Constant,
            alternatives: vec![alternative],
            shared: false,
        }
    }

    pub fn attribute(label: &str, features: &[&str], alternatives: &[usize], shared: bool) -> Self {
        Self {
            label: label.to_owned(),
            source: TermSource::Attribute {
                features: features.iter().map(|f| (*f).to_owned()).collect(),
            },
            alternatives: alternatives.to_vec(),
            shared,
        }
    }

    pub fn encoded(variable: &str, alternatives: &[usize]) -> Self {
        Self {
            label: variable.to_owned(),
            source: TermSource::Encoded {
                variable: variable.to_owned(),
            },
            alternatives: alternatives.to_vec(),
            shared: false,
        }
    }

    pub(crate) fn feature_for(&self, position: usize) -> Option<&str> {
        match &self.source {
            TermSource::Attribute { features } if features.len() == 1 => Some(&features[0]),
            TermSource::Attribute { features } => features.get(position).map(String::as_str),
            _ => None,
        }
    }
}

/// Ordered list of utility terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilitySpec {
    pub terms: Vec<Term>,
}

const TRAIN: usize = 0;
const SM: usize = 1;
const CAR: usize = 2;

impl UtilitySpec {
    /// The 14-term Swissmetro base specification (car is the ASC base).
    pub fn swissmetro_base() -> Self {
        use feature::*;
        let terms = vec![
            Term::constant("ASC Train", TRAIN),
            Term::constant("ASC Swissmetro", SM),
            Term::attribute(
                "Travel Time, units:hrs (Train and Swissmetro)",
                &[TRAIN_TT, SM_TT],
                &[TRAIN, SM],
                true,
            ),
            Term::attribute("Travel Time, units:hrs (Car)", &[CAR_TT], &[CAR], false),
            Term::attribute(
                "Travel Cost * (Annual Pass == 0), units: 0.01 CHF (Train)",
                &[TRAIN_COST],
                &[TRAIN],
                false,
            ),
            Term::attribute(
                "Travel Cost * (Annual Pass == 0), units: 0.01 CHF (Swissmetro)",
                &[SM_COST],
                &[SM],
                false,
            ),
            Term::attribute("Travel Cost, units: 0.01 CHF (Car)", &[CAR_COST], &[CAR], false),
            Term::attribute("Headway, units:hrs, (Train)", &[TRAIN_HEADWAY], &[TRAIN], false),
            Term::attribute("Headway, units:hrs, (Swissmetro)", &[SM_HEADWAY], &[SM], false),
            Term::attribute(
                "Airline Seat Configuration, base=No (Swissmetro)",
                &[SM_SEATS],
                &[SM],
                false,
            ),
            Term::attribute(
                "Surveyed on a Train, base=No, (Train and Swissmetro)",
                &[TRAIN_SURVEY],
                &[TRAIN, SM],
                true,
            ),
            Term::attribute("First Class == False, (Swissmetro)", &[REGULAR_CLASS], &[SM], false),
            Term::attribute("Number of Luggage Pieces == 1, (Car)", &[LUGGAGE_ONE], &[CAR], false),
            Term::attribute("Number of Luggage Pieces > 1, (Car)", &[LUGGAGE_MANY], &[CAR], false),
        ];
        Self { terms }
    }

    /// Appends one encoded term per variable: TICKET enters the train
    /// utility only, every other variable enters train and Swissmetro.
    pub fn with_swissmetro_encoded<'a>(mut self, variables: impl IntoIterator<Item = &'a str>) -> Self {
        for v in variables {
            let alts: &[usize] = if v == crate::data::variable::TICKET {
                &[TRAIN]
            } else {
                &[TRAIN, SM]
            };
            self.terms.push(Term::encoded(v, alts));
        }
        self
    }

    pub fn encoded_variables(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().filter_map(|t| match &t.source {
            TermSource::Encoded { variable } => Some(variable.as_str()),
            _ => None,
        })
    }

    /// Rejects duplicate (source, alternative) pairs and malformed terms.
    pub fn validate(&self, n_alternatives: usize) -> Result<()> {
        let mut seen: Vec<(String, usize)> = Vec::new();
        for term in &self.terms {
            if term.alternatives.is_empty() {
                return Err(Error::InvalidArgument(format!("term `{}` enters no alternative", term.label)));
            }
            for (pos, &alt) in term.alternatives.iter().enumerate() {
                if alt >= n_alternatives {
                    return Err(Error::InvalidArgument(format!(
                        "term `{}` references alternative {alt}",
                        term.label
                    )));
                }
                let key = match &term.source {
                    TermSource::Constant => "<constant>".to_owned(),
                    TermSource::Encoded { variable } => {
                        if term.shared {
                            return Err(Error::InvalidArgument(format!(
                                "encoded term `{}` cannot be shared",
                                term.label
                            )));
                        }
                        format!("<encoded>{variable}")
                    }
                    TermSource::Attribute { features } => {
                        if features.len() != 1 && features.len() != term.alternatives.len() {
                            return Err(Error::InvalidArgument(format!(
                                "term `{}` lists {} features for {} alternatives",
                                term.label,
                                features.len(),
                                term.alternatives.len()
                            )));
                        }
                        term.feature_for(pos).unwrap_or_default().to_owned()
                    }
                };
                if seen.contains(&(key.clone(), alt)) {
                    return Err(Error::InvalidArgument(format!(
                        "`{key}` enters alternative {alt} twice"
                    )));
                }
                seen.push((key, alt));
            }
        }
        Ok(())
    }
}
