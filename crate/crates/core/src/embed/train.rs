use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::EmbeddingNetConfig;
use super::net::{choice_log_likelihood, gradient_into, loss, EmbeddingNetParams, LossWeights, NetData, VariableShape};
use crate::data::ChoiceDataset;
use crate::encoders::{EncoderKind, EncoderModel};
use crate::error::{Error, Result};

/// Half-width of the uniform initialisation interval.
pub const INIT_SCALE: f64 = 0.05;

/// Adam state over every parameter block.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &EmbeddingNetParams, learning_rate: f64) -> Self {
        let shapes: Vec<Vec<f64>> = params.slices().iter().map(|s| vec![0.0; s.len()]).collect();
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: shapes.clone(),
            v: shapes,
        }
    }

    pub fn update(&mut self, params: &mut EmbeddingNetParams, grad: &EmbeddingNetParams) {
        self.step += 1;
        let c1 = 1.0 - libm::pow(self.beta1, f64::from(self.step));
        let c2 = 1.0 - libm::pow(self.beta2, f64::from(self.step));
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        for (((p, g), m), v) in params
            .slices_mut()
            .into_iter()
            .zip(grad.slices())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / (libm::sqrt(v[i] / c2) + eps);
            }
        }
    }
}

/// Outcome of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub seed: u64,
    pub params: EmbeddingNetParams,
    /// Full-train loss after each epoch.
    pub train_loss: Vec<f64>,
    /// Dev log-likelihood of the choice head after each epoch.
    pub dev_log_likelihood_trace: Vec<f64>,
    /// Dev log-likelihood of the final parameters.
    pub dev_log_likelihood: f64,
}

/// Train and dev observations prepared for a given configuration.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub train: NetData,
    pub dev: NetData,
    shapes: Vec<(String, Vec<String>, usize)>,
    covariates: Vec<String>,
}

impl TrainingSet {
    pub fn new(config: &EmbeddingNetConfig, train: &ChoiceDataset, dev: &ChoiceDataset) -> Result<Self> {
        config.validate()?;
        let variables: Vec<&str> = config.encoding.variables().collect();
        let covariates: Vec<&str> = config.covariates.iter().map(String::as_str).collect();
        let mut shapes = Vec::new();
        for e in &config.encoding.entries {
            let map = &train.categorical(&e.variable)?.map;
            if dev.categorical(&e.variable)?.map != *map {
                return Err(Error::InvalidArgument(format!(
                    "train and dev disagree on the categories of `{}`",
                    e.variable
                )));
            }
            shapes.push((e.variable.clone(), map.categories().to_vec(), e.k));
        }
        if train.alternatives() != dev.alternatives() {
            return Err(Error::InvalidArgument("train and dev disagree on alternatives".into()));
        }
        Ok(Self {
            train: NetData::new(train, &variables, &covariates)?,
            dev: NetData::new(dev, &variables, &covariates)?,
            shapes,
            covariates: config.covariates.clone(),
        })
    }

    /// Zero parameters shaped for this set.
    pub fn zero_params(&self) -> EmbeddingNetParams {
        let shapes: Vec<VariableShape<'_>> = self
            .shapes
            .iter()
            .map(|(v, cats, k)| (v.as_str(), cats.as_slice(), *k))
            .collect();
        EmbeddingNetParams::zeros(self.train.n_alts(), &shapes, &self.covariates)
    }

    pub fn initial_params(&self, seed: u64) -> EmbeddingNetParams {
        let mut params = self.zero_params();
        params.randomize(&mut ChaCha8Rng::seed_from_u64(seed), INIT_SCALE);
        params
    }
}

/// One seeded training run: uniform initialisation, then `epochs` passes of
/// minibatch Adam over a freshly shuffled train set.
pub fn train(config: &EmbeddingNetConfig, set: &TrainingSet, seed: u64) -> Result<TrainRun> {
    config.validate()?;
    let weights = LossWeights {
        reconstruction: config.reconstruction_weights(),
        l2: config.l2,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = set.zero_params();
    params.randomize(&mut rng, INIT_SCALE);
    let mut grad = params.zeros_like();
    let mut adam = Adam::new(&params, config.learning_rate);
    let all: Vec<usize> = (0..set.train.len()).collect();
    let mut order = all.clone();
    let mut train_loss = Vec::with_capacity(config.epochs);
    let mut dev_trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let value = gradient_into(&params, &set.train, batch, &weights, &mut grad)?;
            if !value.is_finite() {
                return Err(Error::Diverged { seed, epoch });
            }
            adam.update(&mut params, &grad);
        }
        let epoch_loss = loss(&params, &set.train, &all, &weights)?;
        if !epoch_loss.is_finite() || !params.is_finite() {
            return Err(Error::Diverged { seed, epoch });
        }
        train_loss.push(epoch_loss);
        dev_trace.push(choice_log_likelihood(&params, &set.dev)?);
        log::debug!("seed {seed} epoch {epoch}: loss {epoch_loss:.6}");
    }
    let dev_log_likelihood = *dev_trace.last().expect("at least one epoch");
    Ok(TrainRun {
        seed,
        params,
        train_loss,
        dev_log_likelihood_trace: dev_trace,
        dev_log_likelihood,
    })
}

/// Seeds used by the repeats of `config`.
pub fn repeat_seeds(config: &EmbeddingNetConfig) -> impl Iterator<Item = u64> {
    let seed = config.seed;
    (0..config.repeats as u64).map(move |r| seed.wrapping_add(r))
}

/// Index of the run with the highest dev log-likelihood (first on ties).
pub fn select_best(runs: &[TrainRun]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in runs.iter().enumerate() {
        if best.is_none_or(|b| r.dev_log_likelihood > runs[b].dev_log_likelihood) {
            best = Some(i);
        }
    }
    best
}

/// Finished runs and the seeds that diverged.
#[derive(Debug, Clone)]
pub struct Repeats {
    pub runs: Vec<TrainRun>,
    pub best: usize,
    pub diverged: Vec<u64>,
}

impl Repeats {
    pub fn best_run(&self) -> &TrainRun {
        &self.runs[self.best]
    }

    /// Collects per-seed outcomes; diverged runs are logged and left out.
    pub fn collect(outcomes: Vec<Result<TrainRun>>) -> Result<Self> {
        let total = outcomes.len();
        let mut runs = Vec::new();
        let mut diverged = Vec::new();
        for outcome in outcomes {
            match outcome {
                Ok(run) => runs.push(run),
                Err(Error::Diverged { seed, epoch }) => {
                    log::warn!("run with seed {seed} diverged at epoch {epoch}; discarded");
                    diverged.push(seed);
                }
                Err(e) => return Err(e),
            }
        }
        let best = select_best(&runs).ok_or(Error::AllRunsDiverged(total))?;
        Ok(Self { runs, best, diverged })
    }
}

/// Runs every repeat sequentially.
pub fn run_repeats(config: &EmbeddingNetConfig, set: &TrainingSet) -> Result<Repeats> {
    Repeats::collect(repeat_seeds(config).map(|s| train(config, set, s)).collect())
}

/// Learned encoders of a run, one per variable, with `M_v = W_vᵀ`.
pub fn export(run: &TrainRun) -> Vec<EncoderModel> {
    run.params
        .variables
        .iter()
        .map(|v| EncoderModel {
            variable: v.variable.clone(),
            kind: EncoderKind::Embedding,
            categories: v.categories.clone(),
            matrix: v.embedding.transpose(),
            base: None,
            pca: None,
            provenance: Some(format!("embedding network, seed {}", run.seed)),
        })
        .collect()
}
