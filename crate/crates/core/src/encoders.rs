//! Category-to-vector encoders: dummy, PCA and learned embeddings share one
//! lookup contract, a `D x K` matrix whose row `d` encodes category `d`.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::category::CategoryMap;
use crate::data::{CategoricalColumn, ChoiceDataset};
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, SortedEigen};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Dummy,
    Pca,
    Embedding,
}

impl EncoderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Dummy => "dummy",
            Self::Pca => "pca",
            Self::Embedding => "embedding",
        }
    }
}

/// Principal axes behind a PCA encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaBasis {
    /// Retained eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// `D x K`, column `k` is the `k`-th principal axis.
    pub axes: Matrix,
    /// Training frequencies of each category (the one-hot column means).
    pub means: Vec<f64>,
}

/// Fitted encoder for one categorical variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderModel {
    pub variable: String,
    pub kind: EncoderKind,
    pub categories: Vec<String>,
    /// `D x K`, row `d` is the encoding of `categories[d]`.
    pub matrix: Matrix,
    /// Dummy base category (encoded as the zero vector).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pca: Option<PcaBasis>,
    /// Free-form note on where the matrix came from (e.g. training seed).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

impl EncoderModel {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn k(&self) -> usize {
        self.matrix.cols()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }

    pub fn row(&self, index: usize) -> &[f64] {
        self.matrix.row(index)
    }

    /// One-hot row of category `index` rebuilt from its PCA encoding
    /// (`None` for other encoders). Exact when `K = D`.
    pub fn reconstruct(&self, index: usize) -> Option<Vec<f64>> {
        let basis = self.pca.as_ref()?;
        let code = self.row(index);
        Some(
            (0..self.dim())
                .map(|i| basis.means[i] + (0..self.k()).map(|c| code[c] * basis.axes[(i, c)]).sum::<f64>())
                .collect(),
        )
    }

    /// Name used for the `k`-th column, e.g. `OD0` or `TICKET_Half day`.
    pub fn column_name(&self, k: usize) -> String {
        match (self.kind, &self.base) {
            (EncoderKind::Dummy, Some(base)) => {
                let label = self
                    .categories
                    .iter()
                    .filter(|c| *c != base)
                    .nth(k)
                    .map_or("?", String::as_str);
                format!("{}_{}", self.variable, label)
            }
            _ => format!("{}{}", self.variable, k),
        }
    }
}

/// Dummy (one-hot against a base) encoder: `D - 1` columns, the base
/// category maps to zeros and every other category to its own unit vector.
pub fn fit_dummy(map: &CategoryMap, base: &str) -> Result<EncoderModel> {
    let d = map.len();
    if d < 2 {
        return Err(Error::Degenerate(map.variable().to_owned()));
    }
    let base_index = map.index_of(base).ok_or_else(|| Error::UnknownCategory {
        variable: map.variable().to_owned(),
        label: base.to_owned(),
    })?;
    let mut matrix = Matrix::zeros(d, d - 1);
    let mut col = 0;
    for i in 0..d {
        if i != base_index {
            matrix[(i, col)] = 1.0;
            col += 1;
        }
    }
    Ok(EncoderModel {
        variable: map.variable().to_owned(),
        kind: EncoderKind::Dummy,
        categories: map.categories().to_vec(),
        matrix,
        base: Some(base.to_owned()),
        pca: None,
        provenance: None,
    })
}

/// Most frequent category of a column; ties go to the lowest index.
pub fn most_frequent_category(column: &CategoricalColumn) -> &str {
    let counts = column.counts();
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    column.map.label(best)
}

/// Column means of the one-hot matrix and the eigendecomposition of its
/// (population) covariance.
struct OneHotSpectrum {
    means: Vec<f64>,
    eigen: SortedEigen,
}

fn one_hot_spectrum(data: &ChoiceDataset, variable: &str) -> Result<OneHotSpectrum> {
    let column = data.categorical(variable)?;
    let n = column.codes.len();
    if n == 0 {
        return Err(Error::InvalidArgument("PCA needs a non-empty training split".into()));
    }
    let d = column.map.len();
    let means: Vec<f64> = column.counts().iter().map(|&c| c as f64 / n as f64).collect();
    // Cov = diag(p) - p pᵀ for one-hot rows with frequencies p
    let mut cov = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            cov[(i, j)] = -means[i] * means[j];
        }
        cov[(i, i)] += means[i];
    }
    if cov.as_slice().iter().all(|x| x.abs() < 1e-15) {
        return Err(Error::Degenerate(variable.to_owned()));
    }
    Ok(OneHotSpectrum {
        means,
        eigen: symmetric_eigen(&cov),
    })
}

/// PCA encoder fitted on the one-hot representation of `variable` in the
/// training split.
///
/// The one-hot matrix is centred with the training means; category `d`
/// encodes as the projection of its centred one-hot row onto the `k`
/// leading principal axes.
pub fn fit_pca(train: &ChoiceDataset, variable: &str, k: usize) -> Result<EncoderModel> {
    let column = train.categorical(variable)?;
    let d = column.map.len();
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!(
            "PCA for `{variable}` needs 1 <= K <= {d}, got {k}"
        )));
    }
    let spectrum = one_hot_spectrum(train, variable)?;
    let mut matrix = Matrix::zeros(d, k);
    let mut axes = Matrix::zeros(d, k);
    for i in 0..d {
        for comp in 0..k {
            axes[(i, comp)] = spectrum.eigen.vectors[(i, comp)];
        }
    }
    for cat in 0..d {
        for comp in 0..k {
            let v = &spectrum.eigen.vectors;
            // (e_cat - means) · v_comp
            let mut s = v[(cat, comp)];
            for (i, m) in spectrum.means.iter().enumerate() {
                s -= m * v[(i, comp)];
            }
            matrix[(cat, comp)] = s;
        }
    }
    Ok(EncoderModel {
        variable: variable.to_owned(),
        kind: EncoderKind::Pca,
        categories: column.map.categories().to_vec(),
        matrix,
        base: None,
        pca: Some(PcaBasis {
            eigenvalues: spectrum.eigen.values[..k].to_vec(),
            axes,
            means: spectrum.means,
        }),
        provenance: None,
    })
}

/// Smallest `K` whose leading eigenvalues explain at least `threshold` of the
/// one-hot variance of `variable`.
pub fn select_k_by_variance(train: &ChoiceDataset, variable: &str, threshold: f64) -> Result<usize> {
    let spectrum = one_hot_spectrum(train, variable)?;
    k_for_variance_share(&spectrum.eigen.values, threshold)
}

/// Smallest prefix of `eigenvalues` (descending) whose share reaches
/// `threshold`. Negative round-off eigenvalues count as zero.
pub fn k_for_variance_share(eigenvalues: &[f64], threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "variance threshold must lie in (0, 1], got {threshold}"
        )));
    }
    let clipped: Vec<f64> = eigenvalues.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("eigenvalue spectrum".into()));
    }
    let mut cumulative = 0.0;
    for (i, v) in clipped.iter().enumerate() {
        cumulative += v / total;
        // share of the remaining eigenvalues is pure round-off once we reach rank
        if cumulative >= threshold - 1e-12 {
            return Ok(i + 1);
        }
    }
    Ok(clipped.len())
}

/// `N x K` encoding of `variable` for every observation in `data`.
///
/// Categories unknown to the encoder map to the zero vector with a warning.
pub fn encode(model: &EncoderModel, data: &ChoiceDataset, variable: &str) -> Result<Matrix> {
    let column = data.categorical(variable)?;
    let translation = translate(model, &column.map);
    let k = model.k();
    let mut out = Matrix::zeros(column.codes.len(), k);
    for (n, &code) in column.codes.iter().enumerate() {
        if let Some(row) = translation[code] {
            out.row_mut(n).copy_from_slice(model.row(row));
        }
    }
    Ok(out)
}

/// For each category index of `map`, the matching row of `model`.
pub(crate) fn translate(model: &EncoderModel, map: &CategoryMap) -> Vec<Option<usize>> {
    if model.categories.as_slice() == map.categories() {
        return (0..map.len()).map(Some).collect();
    }
    map.categories()
        .iter()
        .map(|label| {
            let found = model.index_of(label);
            if found.is_none() {
                log::warn!(
                    "category `{label}` of `{}` unseen by the encoder, encoded as zeros",
                    model.variable
                );
            }
            found
        })
        .collect()
}

/// One encoded variable and its target dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingEntry {
    pub variable: String,
    pub k: usize,
}

/// Ordered list of categorical variables to re-encode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingSet {
    pub entries: Vec<EncodingEntry>,
}

impl EncodingSet {
    /// OD 3, TICKET 5, WHO 1, AGE 3, INCOME 3.
    pub fn swissmetro() -> Self {
        use crate::data::variable::*;
        Self {
            entries: [(OD, 3), (TICKET, 5), (WHO, 1), (AGE, 3), (INCOME, 3)]
                .iter()
                .map(|(v, k)| EncodingEntry {
                    variable: (*v).to_owned(),
                    k: *k,
                })
                .collect(),
        }
    }

    /// Checks `1 <= K < D` against the category maps in `data`.
    pub fn validate(&self, data: &ChoiceDataset) -> Result<()> {
        for e in &self.entries {
            let d = data.categorical(&e.variable)?.map.len();
            if e.k == 0 || e.k >= d {
                return Err(Error::InvalidArgument(format!(
                    "`{}` needs 1 <= K < D = {d}, got K = {}",
                    e.variable, e.k
                )));
            }
        }
        Ok(())
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.variable.as_str())
    }
}
