use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::spec::{TermSource, UtilitySpec};
use crate::data::ChoiceDataset;
use crate::encoders::{encode, EncoderModel};
use crate::error::{Error, Result};

/// Provenance of a design column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnOrigin {
    /// Plain term of the specification (constant or attribute).
    Term { term: usize },
    /// Component `component` of an encoded variable in one alternative.
    Encoded {
        variable: String,
        component: usize,
        alternative: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub label: String,
    pub origin: ColumnOrigin,
}

/// Per-alternative design: entry `(n, j, p)` is the value of column `p` in
/// the utility of alternative `j` for observation `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    n_obs: usize,
    n_alts: usize,
    columns: Vec<Column>,
    values: Vec<f64>,
    /// Columns that are nonzero in at least one alternative of each observation.
    nonzero: Vec<Vec<u32>>,
}

impl Design {
    pub fn from_values(n_obs: usize, n_alts: usize, columns: Vec<Column>, values: Vec<f64>) -> Result<Self> {
        let p = columns.len();
        if values.len() != n_obs * n_alts * p {
            return Err(Error::Shape(format!(
                "{} design values for {n_obs} x {n_alts} x {p}",
                values.len()
            )));
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|o| o.label == c.label) {
                return Err(Error::LabelCollision(c.label.clone()));
            }
        }
        let nonzero = (0..n_obs)
            .map(|n| {
                (0..p)
                    .filter(|&k| (0..n_alts).any(|j| values[(n * n_alts + j) * p + k] != 0.0))
                    .map(|k| k as u32)
                    .collect()
            })
            .collect();
        Ok(Self {
            n_obs,
            n_alts,
            columns,
            values,
            nonzero,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_alts(&self) -> usize {
        self.n_alts
    }

    pub fn n_params(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.label.as_str())
    }

    #[inline]
    pub fn value(&self, n: usize, j: usize, p: usize) -> f64 {
        self.values[(n * self.n_alts + j) * self.columns.len() + p]
    }

    #[inline]
    pub(crate) fn row(&self, n: usize, j: usize) -> &[f64] {
        let p = self.columns.len();
        let start = (n * self.n_alts + j) * p;
        &self.values[start..start + p]
    }

    #[inline]
    pub(crate) fn nonzero(&self, n: usize) -> &[u32] {
        &self.nonzero[n]
    }

    /// Copy without the listed columns.
    pub fn drop_columns(&self, drop: &[usize]) -> Design {
        let keep: Vec<usize> = (0..self.columns.len()).filter(|c| !drop.contains(c)).collect();
        let p = self.columns.len();
        let mut values = Vec::with_capacity(self.n_obs * self.n_alts * keep.len());
        for row in self.values.chunks(p) {
            values.extend(keep.iter().map(|&k| row[k]));
        }
        let columns = keep.iter().map(|&k| self.columns[k].clone()).collect();
        Design::from_values(self.n_obs, self.n_alts, columns, values).expect("subset of a valid design")
    }
}

fn alt_label(alternatives: &[String], j: usize) -> &str {
    alternatives.get(j).map_or("?", String::as_str)
}

/// Expands `spec` over `data`, encoding each categorical term with the
/// matching encoder from `encoders`.
pub fn assemble_design(data: &ChoiceDataset, spec: &UtilitySpec, encoders: &[EncoderModel]) -> Result<Design> {
    let c = data.n_alternatives();
    spec.validate(c)?;
    let n = data.len();
    let alts = data.alternatives();

    // (label, origin, per-alternative source values)
    struct Pending {
        column: Column,
        // (alternative, values over observations); None means constant 1
        cells: Vec<(usize, Option<Vec<f64>>)>,
    }
    let mut pending: Vec<Pending> = Vec::new();

    for (t, term) in spec.terms.iter().enumerate() {
        match &term.source {
            TermSource::Constant | TermSource::Attribute { .. } => {
                let mut cells = Vec::new();
                for (pos, &alt) in term.alternatives.iter().enumerate() {
                    let values = match term.feature_for(pos) {
                        Some(f) => Some(data.feature(f)?.to_vec()),
                        None => None,
                    };
                    cells.push((alt, values));
                }
                if term.shared || term.alternatives.len() == 1 {
                    pending.push(Pending {
                        column: Column {
                            label: term.label.clone(),
                            origin: ColumnOrigin::Term { term: t },
                        },
                        cells,
                    });
                } else {
                    for cell in cells {
                        pending.push(Pending {
                            column: Column {
                                label: format!("{} ({})", term.label, alt_label(alts, cell.0)),
                                origin: ColumnOrigin::Term { term: t },
                            },
                            cells: alloc::vec![cell],
                        });
                    }
                }
            }
            TermSource::Encoded { variable } => {
                let encoder = encoders
                    .iter()
                    .find(|e| &e.variable == variable)
                    .ok_or_else(|| Error::MissingEncoder(variable.clone()))?;
                let encoded = encode(encoder, data, variable)?;
                for &alt in &term.alternatives {
                    for k in 0..encoder.k() {
                        pending.push(Pending {
                            column: Column {
                                label: format!("{}_{}", encoder.column_name(k), alt_label(alts, alt)),
                                origin: ColumnOrigin::Encoded {
                                    variable: variable.to_owned(),
                                    component: k,
                                    alternative: alt,
                                },
                            },
                            cells: alloc::vec![(alt, Some(encoded.column(k)))],
                        });
                    }
                }
            }
        }
    }

    let p = pending.len();
    let mut values = alloc::vec![0.0; n * c * p];
    for (k, col) in pending.iter().enumerate() {
        for (alt, cell) in &col.cells {
            for obs in 0..n {
                values[(obs * c + alt) * p + k] = cell.as_ref().map_or(1.0, |v| v[obs]);
            }
        }
    }
    let columns = pending.into_iter().map(|p| p.column).collect();
    Design::from_values(n, c, columns, values)
}

/// A design together with observed choices and availability: everything
/// the likelihood needs for one data split.
#[derive(Debug, Clone)]
pub struct MnlProblem {
    pub design: Design,
    pub choices: Vec<usize>,
    pub availability: Vec<bool>,
}

impl MnlProblem {
    pub fn new(data: &ChoiceDataset, spec: &UtilitySpec, encoders: &[EncoderModel]) -> Result<Self> {
        let design = assemble_design(data, spec, encoders)?;
        Self::from_parts(design, data.choices().to_vec(), data.availability().to_vec())
    }

    pub fn from_parts(design: Design, choices: Vec<usize>, availability: Vec<bool>) -> Result<Self> {
        let (n, c) = (design.n_obs(), design.n_alts());
        if choices.len() != n || availability.len() != n * c {
            return Err(Error::Shape(format!(
                "{} choices and {} availability flags for {n} observations",
                choices.len(),
                availability.len()
            )));
        }
        for i in 0..n {
            let avail = &availability[i * c..(i + 1) * c];
            if !avail.iter().any(|&a| a) {
                return Err(Error::NoAvailableAlternative(i));
            }
            if choices[i] >= c || !avail[choices[i]] {
                return Err(Error::InvalidArgument(format!(
                    "observation {i} chose an unavailable alternative"
                )));
            }
        }
        Ok(Self {
            design,
            choices,
            availability,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.design.n_obs()
    }

    pub fn available(&self, n: usize) -> &[bool] {
        let c = self.design.n_alts();
        &self.availability[n * c..(n + 1) * c]
    }

    pub fn drop_columns(&self, drop: &[usize]) -> Self {
        Self {
            design: self.design.drop_columns(drop),
            choices: self.choices.clone(),
            availability: self.availability.clone(),
        }
    }
}
