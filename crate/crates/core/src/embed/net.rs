use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::ChoiceDataset;
use crate::error::{Error, Result};
use crate::math::{masked_log_sum_exp, masked_softmax_into, softmax_in_place};
use crate::matrix::Matrix;

/// Observations in the form the network consumes: category codes per
/// encoded variable, a covariate row per observation, choices, availability.
#[derive(Debug, Clone, PartialEq)]
pub struct NetData {
    n_alts: usize,
    dims: Vec<usize>,
    codes: Vec<Vec<usize>>,
    n_covariates: usize,
    covariates: Vec<f64>,
    choices: Vec<usize>,
    availability: Vec<bool>,
}

impl NetData {
    pub fn new(data: &ChoiceDataset, variables: &[&str], covariates: &[&str]) -> Result<Self> {
        let n = data.len();
        let mut dims = Vec::with_capacity(variables.len());
        let mut codes = Vec::with_capacity(variables.len());
        for v in variables {
            let col = data.categorical(v)?;
            dims.push(col.map.len());
            codes.push(col.codes.clone());
        }
        let columns: Vec<&[f64]> = covariates.iter().map(|f| data.feature(f)).collect::<Result<_>>()?;
        let mut z = Vec::with_capacity(n * covariates.len());
        for i in 0..n {
            z.extend(columns.iter().map(|c| c[i]));
        }
        Self::from_parts(
            data.n_alternatives(),
            dims,
            codes,
            covariates.len(),
            z,
            data.choices().to_vec(),
            data.availability().to_vec(),
        )
    }

    pub fn from_parts(
        n_alts: usize,
        dims: Vec<usize>,
        codes: Vec<Vec<usize>>,
        n_covariates: usize,
        covariates: Vec<f64>,
        choices: Vec<usize>,
        availability: Vec<bool>,
    ) -> Result<Self> {
        let n = choices.len();
        if dims.len() != codes.len()
            || codes.iter().any(|c| c.len() != n)
            || covariates.len() != n * n_covariates
            || availability.len() != n * n_alts
        {
            return Err(Error::Shape("network data columns disagree in length".into()));
        }
        for (v, (&d, c)) in dims.iter().zip(&codes).enumerate() {
            if c.iter().any(|&x| x >= d) {
                return Err(Error::InvalidArgument(format!("variable {v} has codes outside 0..{d}")));
            }
        }
        for i in 0..n {
            let avail = &availability[i * n_alts..(i + 1) * n_alts];
            if !avail.iter().any(|&a| a) {
                return Err(Error::NoAvailableAlternative(i));
            }
            if choices[i] >= n_alts || !avail[choices[i]] {
                return Err(Error::InvalidArgument(format!(
                    "observation {i} chose an unavailable alternative"
                )));
            }
        }
        Ok(Self {
            n_alts,
            dims,
            codes,
            n_covariates,
            covariates,
            choices,
            availability,
        })
    }

    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    pub fn n_alts(&self) -> usize {
        self.n_alts
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    pub fn codes(&self, n: usize) -> Vec<usize> {
        self.codes.iter().map(|c| c[n]).collect()
    }

    fn codes_into(&self, n: usize, out: &mut Vec<usize>) {
        out.clear();
        out.extend(self.codes.iter().map(|c| c[n]));
    }

    pub fn covariates(&self, n: usize) -> &[f64] {
        &self.covariates[n * self.n_covariates..(n + 1) * self.n_covariates]
    }

    pub fn available(&self, n: usize) -> &[bool] {
        &self.availability[n * self.n_alts..(n + 1) * self.n_alts]
    }

    pub fn choice(&self, n: usize) -> usize {
        self.choices[n]
    }
}

/// Embedding and reconstruction parameters of one categorical variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableParams {
    pub variable: String,
    pub categories: Vec<String>,
    /// `K x D`; column `d` is the embedding of category `d`.
    pub embedding: Matrix,
    /// `D x K` reconstruction head.
    pub decoder: Matrix,
    pub decoder_bias: Vec<f64>,
}

impl VariableParams {
    pub fn k(&self) -> usize {
        self.embedding.rows()
    }

    pub fn dim(&self) -> usize {
        self.embedding.cols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingNetParams {
    pub variables: Vec<VariableParams>,
    /// `C x K_total` over the concatenated embeddings.
    pub choice: Matrix,
    /// `C x F` over the covariates.
    pub covariate: Matrix,
    pub covariate_names: Vec<String>,
    pub intercepts: Vec<f64>,
}

/// Shape of a variable block: name, category labels, `K`.
pub type VariableShape<'a> = (&'a str, &'a [String], usize);

impl EmbeddingNetParams {
    pub fn zeros(n_alts: usize, variables: &[VariableShape<'_>], covariates: &[String]) -> Self {
        let variables: Vec<VariableParams> = variables
            .iter()
            .map(|&(name, cats, k)| VariableParams {
                variable: name.into(),
                categories: cats.to_vec(),
                embedding: Matrix::zeros(k, cats.len()),
                decoder: Matrix::zeros(cats.len(), k),
                decoder_bias: vec![0.0; cats.len()],
            })
            .collect();
        let k_total = variables.iter().map(VariableParams::k).sum();
        Self {
            variables,
            choice: Matrix::zeros(n_alts, k_total),
            covariate: Matrix::zeros(n_alts, covariates.len()),
            covariate_names: covariates.to_vec(),
            intercepts: vec![0.0; n_alts],
        }
    }

    /// Same shapes, every value zero.
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        for s in out.slices_mut() {
            s.fill(0.0);
        }
        out
    }

    /// Draws every value from `U(-scale, scale)` in [`Self::slices`] order.
    pub fn randomize<R: Rng>(&mut self, rng: &mut R, scale: f64) {
        for s in self.slices_mut() {
            for x in s {
                *x = rng.random_range(-scale..scale);
            }
        }
    }

    pub fn n_alts(&self) -> usize {
        self.intercepts.len()
    }

    pub fn k_total(&self) -> usize {
        self.choice.cols()
    }

    /// Every parameter block, in a fixed order.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(3 * self.variables.len() + 3);
        for v in &self.variables {
            out.push(v.embedding.as_slice());
            out.push(v.decoder.as_slice());
            out.push(v.decoder_bias.as_slice());
        }
        out.push(self.choice.as_slice());
        out.push(self.covariate.as_slice());
        out.push(self.intercepts.as_slice());
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(3 * self.variables.len() + 3);
        for v in &mut self.variables {
            out.push(v.embedding.as_mut_slice());
            out.push(v.decoder.as_mut_slice());
            out.push(v.decoder_bias.as_mut_slice());
        }
        out.push(self.choice.as_mut_slice());
        out.push(self.covariate.as_mut_slice());
        out.push(self.intercepts.as_mut_slice());
        out
    }

    pub fn n_values(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }

    fn check(&self, data: &NetData) -> Result<()> {
        let dims: Vec<usize> = self.variables.iter().map(VariableParams::dim).collect();
        if dims != data.dims()
            || self.n_alts() != data.n_alts()
            || self.covariate.cols() != data.n_covariates()
        {
            return Err(Error::Shape("network parameters do not match the data".into()));
        }
        Ok(())
    }

    /// Concatenated embeddings `W_v x_v` of one observation.
    fn hidden_into(&self, codes: &[usize], out: &mut Vec<f64>) {
        out.clear();
        for (v, &code) in self.variables.iter().zip(codes) {
            out.extend((0..v.k()).map(|a| v.embedding[(a, code)]));
        }
    }

    fn logits_into(&self, hidden: &[f64], z: &[f64], out: &mut [f64]) {
        for (c, l) in out.iter_mut().enumerate() {
            let from_hidden: f64 = self.choice.row(c).iter().zip(hidden).map(|(b, h)| b * h).sum();
            let from_z: f64 = self.covariate.row(c).iter().zip(z).map(|(b, x)| b * x).sum();
            *l = from_hidden + from_z + self.intercepts[c];
        }
    }

    fn l2_penalty(&self) -> f64 {
        self.variables.iter().map(|v| v.embedding.frobenius_sq()).sum()
    }
}

/// Choice probabilities of one observation.
pub fn forward(params: &EmbeddingNetParams, codes: &[usize], covariates: &[f64], available: &[bool]) -> Result<Vec<f64>> {
    let c = params.n_alts();
    if codes.len() != params.variables.len()
        || covariates.len() != params.covariate.cols()
        || available.len() != c
        || codes.iter().zip(&params.variables).any(|(&x, v)| x >= v.dim())
    {
        return Err(Error::Shape("observation does not match the network".into()));
    }
    let mut hidden = Vec::new();
    params.hidden_into(codes, &mut hidden);
    let mut logits = vec![0.0; c];
    params.logits_into(&hidden, covariates, &mut logits);
    let mut out = vec![0.0; c];
    masked_softmax_into(&logits, available, &mut out)?;
    Ok(out)
}

/// Weights of the auxiliary loss terms.
#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights {
    /// Reconstruction weight per variable.
    pub reconstruction: Vec<f64>,
    pub l2: f64,
}

impl LossWeights {
    pub fn choice_only(n_variables: usize) -> Self {
        Self {
            reconstruction: vec![0.0; n_variables],
            l2: 0.0,
        }
    }
}

/// Scratch space reused across observations.
struct Workspace {
    codes: Vec<usize>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
    prob: Vec<f64>,
    recon: Vec<f64>,
    d_hidden: Vec<f64>,
}

impl Workspace {
    fn new(params: &EmbeddingNetParams) -> Self {
        let c = params.n_alts();
        Self {
            codes: Vec::with_capacity(params.variables.len()),
            hidden: Vec::with_capacity(params.k_total()),
            logits: vec![0.0; c],
            prob: vec![0.0; c],
            recon: Vec::new(),
            d_hidden: vec![0.0; params.k_total()],
        }
    }
}

/// Loss of one observation; when `grad` is given, adds `scale` times its
/// gradient.
fn observation_loss(
    params: &EmbeddingNetParams,
    data: &NetData,
    n: usize,
    weights: &LossWeights,
    ws: &mut Workspace,
    grad: Option<(&mut EmbeddingNetParams, f64)>,
) -> Result<f64> {
    data.codes_into(n, &mut ws.codes);
    let codes = &ws.codes;
    let z = data.covariates(n);
    let avail = data.available(n);
    let y = data.choice(n);
    params.hidden_into(codes, &mut ws.hidden);
    params.logits_into(&ws.hidden, z, &mut ws.logits);
    let mut loss = masked_log_sum_exp(&ws.logits, avail) - ws.logits[y];

    let mut grad = grad;
    if let Some((g, scale)) = grad.as_mut() {
        masked_softmax_into(&ws.logits, avail, &mut ws.prob)?;
        ws.prob[y] -= 1.0;
        ws.d_hidden.fill(0.0);
        for (c, &pc) in ws.prob.iter().enumerate() {
            let gc = *scale * pc;
            if gc == 0.0 {
                continue;
            }
            g.intercepts[c] += gc;
            for (dst, &h) in g.choice.row_mut(c).iter_mut().zip(&ws.hidden) {
                *dst += gc * h;
            }
            for (dst, &x) in g.covariate.row_mut(c).iter_mut().zip(z) {
                *dst += gc * x;
            }
            for (dh, &b) in ws.d_hidden.iter_mut().zip(params.choice.row(c)) {
                *dh += gc * b;
            }
        }
    }

    let mut offset = 0;
    for (v, var) in params.variables.iter().enumerate() {
        let k = var.k();
        let gamma = weights.reconstruction[v];
        if gamma != 0.0 {
            let e = &ws.hidden[offset..offset + k];
            ws.recon.clear();
            ws.recon.extend((0..var.dim()).map(|d| {
                var.decoder.row(d).iter().zip(e).map(|(r, x)| r * x).sum::<f64>() + var.decoder_bias[d]
            }));
            let lse = log_sum_exp(&ws.recon);
            loss += gamma * (lse - ws.recon[codes[v]]);
            if let Some((g, scale)) = grad.as_mut() {
                softmax_in_place(&mut ws.recon);
                ws.recon[codes[v]] -= 1.0;
                let gv = &mut g.variables[v];
                for (d, &pd) in ws.recon.iter().enumerate() {
                    let gd = *scale * gamma * pd;
                    gv.decoder_bias[d] += gd;
                    for (dst, &x) in gv.decoder.row_mut(d).iter_mut().zip(e) {
                        *dst += gd * x;
                    }
                    for (dh, &r) in ws.d_hidden[offset..offset + k].iter_mut().zip(var.decoder.row(d)) {
                        *dh += gd * r;
                    }
                }
            }
        }
        if let Some((g, _)) = grad.as_mut() {
            let emb = &mut g.variables[v].embedding;
            for (a, &dh) in ws.d_hidden[offset..offset + k].iter().enumerate() {
                emb[(a, codes[v])] += dh;
            }
        }
        offset += k;
    }
    Ok(loss)
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    max + libm::log(values.iter().map(|v| libm::exp(v - max)).sum())
}

fn check_batch(params: &EmbeddingNetParams, data: &NetData, rows: &[usize], weights: &LossWeights) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("empty minibatch".into()));
    }
    if rows.iter().any(|&r| r >= data.len()) {
        return Err(Error::InvalidArgument("minibatch row out of range".into()));
    }
    if weights.reconstruction.len() != params.variables.len() {
        return Err(Error::Shape("one reconstruction weight per variable expected".into()));
    }
    params.check(data)
}

/// Mean over `rows` of choice cross-entropy plus weighted reconstruction
/// cross-entropies, plus `l2` times the squared norms of the embeddings.
pub fn loss(params: &EmbeddingNetParams, data: &NetData, rows: &[usize], weights: &LossWeights) -> Result<f64> {
    check_batch(params, data, rows, weights)?;
    let mut ws = Workspace::new(params);
    let mut total = 0.0;
    for &n in rows {
        total += observation_loss(params, data, n, weights, &mut ws, None)?;
    }
    Ok(total / rows.len() as f64 + weights.l2 * params.l2_penalty())
}

/// Loss and its exact gradient.
pub fn gradient(
    params: &EmbeddingNetParams,
    data: &NetData,
    rows: &[usize],
    weights: &LossWeights,
) -> Result<(f64, EmbeddingNetParams)> {
    let mut grad = params.zeros_like();
    let value = gradient_into(params, data, rows, weights, &mut grad)?;
    Ok((value, grad))
}

/// As [`gradient`], writing into a preallocated `grad` (overwritten).
pub fn gradient_into(
    params: &EmbeddingNetParams,
    data: &NetData,
    rows: &[usize],
    weights: &LossWeights,
    grad: &mut EmbeddingNetParams,
) -> Result<f64> {
    check_batch(params, data, rows, weights)?;
    for s in grad.slices_mut() {
        s.fill(0.0);
    }
    let scale = 1.0 / rows.len() as f64;
    let mut ws = Workspace::new(params);
    let mut total = 0.0;
    for &n in rows {
        total += observation_loss(params, data, n, weights, &mut ws, Some((grad, scale)))?;
    }
    for (g, p) in grad.variables.iter_mut().zip(&params.variables) {
        for (dst, &w) in g.embedding.as_mut_slice().iter_mut().zip(p.embedding.as_slice()) {
            *dst += 2.0 * weights.l2 * w;
        }
    }
    Ok(total * scale + weights.l2 * params.l2_penalty())
}

/// `sum_n log p(y_n)` of the choice head over every observation in `data`.
pub fn choice_log_likelihood(params: &EmbeddingNetParams, data: &NetData) -> Result<f64> {
    params.check(data)?;
    let weights = LossWeights::choice_only(params.variables.len());
    let mut ws = Workspace::new(params);
    let mut total = 0.0;
    for n in 0..data.len() {
        total -= observation_loss(params, data, n, &weights, &mut ws, None)?;
    }
    Ok(total)
}
