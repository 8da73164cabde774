//! The model comparison and the survey-fraction sweep.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use travemb_core::data::{filter_and_derive, shuffled, split, variable, ChoiceDataset, DataSplit, FilterRules, SplitIndices};
use travemb_core::embed::{export, select_best, train, EmbeddingNetConfig, TrainRun, TrainingSet};
use travemb_core::encoders::{fit_dummy, fit_pca, most_frequent_category, EncoderModel, EncodingEntry, EncodingSet};
use travemb_core::mnl::{estimate, estimate_dropping_dependent, EstimationResult, MnlProblem, NewtonOptions, UtilitySpec};
use travemb_core::mnl::SplitFit;

use crate::config::{ExperimentConfig, ModelKind, Scenario};
use crate::error::Result;
use crate::io::load_raw;

/// Raw survey file to the filtered modelling dataset.
pub fn load_survey(path: &Path, rules: &FilterRules) -> Result<ChoiceDataset> {
    let raw = load_raw(path)?;
    Ok(filter_and_derive(&raw, rules)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub log_likelihood: f64,
    pub rho_squared: f64,
    pub rho_bar_squared: f64,
    pub aic: f64,
}

impl From<&SplitFit> for Metrics {
    fn from(f: &SplitFit) -> Self {
        Self {
            log_likelihood: f.log_likelihood,
            rho_squared: f.rho_squared,
            rho_bar_squared: f.rho_bar_squared,
            aic: f.aic,
        }
    }
}

impl Metrics {
    fn fields(&self) -> [f64; 4] {
        [self.log_likelihood, self.rho_squared, self.rho_bar_squared, self.aic]
    }

    fn from_fields(v: [f64; 4]) -> Self {
        Self {
            log_likelihood: v[0],
            rho_squared: v[1],
            rho_bar_squared: v[2],
            aic: v[3],
        }
    }
}

/// One line of the summary table. Failed models keep their row with `error` set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub n_params: Option<usize>,
    pub train: Option<Metrics>,
    pub test: Option<Metrics>,
    pub error: Option<String>,
}

impl ComparisonRow {
    fn failed(model: &str, error: String) -> Self {
        Self {
            model: model.to_owned(),
            n_params: None,
            train: None,
            test: None,
            error: Some(error),
        }
    }
}

/// An estimated roster model.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub name: String,
    pub spec: UtilitySpec,
    pub encoders: Vec<EncoderModel>,
    pub result: EstimationResult,
    pub train: SplitFit,
    pub test: SplitFit,
    /// Design columns removed as linearly dependent before estimation.
    pub dropped: Vec<String>,
}

impl FittedModel {
    fn row(&self) -> ComparisonRow {
        ComparisonRow {
            model: self.name.clone(),
            n_params: Some(self.result.n_params()),
            train: Some((&self.train).into()),
            test: Some((&self.test).into()),
            error: None,
        }
    }
}

/// One embedding repeat after its choice model was estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub seed: u64,
    pub dev_log_likelihood: f64,
    pub train: Option<Metrics>,
    pub test: Option<Metrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(Self {
            mean,
            std: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingOutcome {
    pub repeats: Vec<RepeatRecord>,
    pub diverged: Vec<u64>,
    pub best_run: TrainRun,
    /// Choice model on the best run's encoders.
    pub best: std::result::Result<FittedModel, String>,
    pub test_log_likelihood: Option<Spread>,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub models: Vec<FittedModel>,
    pub embeddings: Option<EmbeddingOutcome>,
    pub split: SplitIndices,
    pub seconds: Vec<(String, f64)>,
}

impl Comparison {
    pub fn model(&self, name: &str) -> Option<&FittedModel> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn row(&self, name: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.model == name)
    }

    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }
}

/// Fits encoders on `train`, estimates there and evaluates on `test`.
fn fit_model(
    name: &str,
    spec: UtilitySpec,
    encoders: Vec<EncoderModel>,
    train: &ChoiceDataset,
    test: &ChoiceDataset,
    drop_dependent: bool,
) -> travemb_core::Result<FittedModel> {
    let options = NewtonOptions::default();
    let train_problem = MnlProblem::new(train, &spec, &encoders)?;
    let mut test_problem = MnlProblem::new(test, &spec, &encoders)?;
    let (result, dropped) = if drop_dependent {
        let (result, _, dropped) = estimate_dropping_dependent(&train_problem, &options)?;
        let drop: Vec<usize> = test_problem
            .design
            .columns()
            .iter()
            .enumerate()
            .filter(|(_, c)| dropped.contains(&c.label))
            .map(|(i, _)| i)
            .collect();
        test_problem = test_problem.drop_columns(&drop);
        (result, dropped)
    } else {
        (estimate(&train_problem, &options)?, Vec::new())
    };
    Ok(FittedModel {
        name: name.to_owned(),
        train: result.fit,
        test: result.evaluate(&test_problem)?,
        spec,
        encoders,
        result,
        dropped,
    })
}

/// Dummy encoders with the most frequent training category as base.
pub fn dummy_encoders(train: &ChoiceDataset, variables: &[&str]) -> travemb_core::Result<Vec<EncoderModel>> {
    variables
        .iter()
        .map(|v| {
            let column = train.categorical(v)?;
            fit_dummy(&column.map, most_frequent_category(column))
        })
        .collect()
}

pub fn pca_encoders(train: &ChoiceDataset, encoding: &EncodingSet) -> travemb_core::Result<Vec<EncoderModel>> {
    encoding
        .entries
        .iter()
        .map(|e| fit_pca(train, &e.variable, e.k))
        .collect()
}

fn reduced_variables(encoding: &EncodingSet) -> Vec<&str> {
    encoding.variables().filter(|v| *v != variable::OD).collect()
}

fn estimate_fixed(kind: ModelKind, encoding: &EncodingSet, train: &ChoiceDataset, test: &ChoiceDataset) -> travemb_core::Result<FittedModel> {
    let all: Vec<&str> = encoding.variables().collect();
    let base = UtilitySpec::swissmetro_base();
    match kind {
        ModelKind::Original => fit_model(kind.as_str(), base, vec![], train, test, false),
        ModelKind::DummyReduced => {
            let vars = reduced_variables(encoding);
            let enc = dummy_encoders(train, &vars)?;
            fit_model(kind.as_str(), base.with_swissmetro_encoded(vars), enc, train, test, false)
        }
        ModelKind::DummyFull => {
            let enc = dummy_encoders(train, &all)?;
            fit_model(kind.as_str(), base.with_swissmetro_encoded(all), enc, train, test, true)
        }
        ModelKind::Pca => {
            let enc = pca_encoders(train, encoding)?;
            fit_model(kind.as_str(), base.with_swissmetro_encoded(all), enc, train, test, false)
        }
        ModelKind::Embeddings => unreachable!("embeddings are estimated per repeat"),
    }
}

struct RepeatResult {
    run: TrainRun,
    fitted: std::result::Result<FittedModel, String>,
}

/// Trains every repeat in parallel and estimates a choice model on each.
/// `extra` supplies encoders for encoded variables the network does not learn.
fn embedding_repeats(
    net: &EmbeddingNetConfig,
    set: &TrainingSet,
    spec: &UtilitySpec,
    extra: &[EncoderModel],
    estimate_on: &ChoiceDataset,
    test: &ChoiceDataset,
) -> travemb_core::Result<EmbeddingOutcome> {
    let seeds: Vec<u64> = travemb_core::embed::repeat_seeds(net).collect();
    let outcomes: Vec<(u64, travemb_core::Result<RepeatResult>)> = seeds
        .par_iter()
        .map(|&seed| {
            let outcome = train(net, set, seed).map(|run| {
                let mut encoders = export(&run);
                encoders.extend(extra.iter().cloned());
                let fitted = fit_model(ModelKind::Embeddings.as_str(), spec.clone(), encoders, estimate_on, test, false)
                    .map_err(|e| e.to_string());
                RepeatResult { run, fitted }
            });
            (seed, outcome)
        })
        .collect();

    let mut finished = Vec::new();
    let mut diverged = Vec::new();
    for (seed, outcome) in outcomes {
        match outcome {
            Ok(r) => finished.push(r),
            Err(travemb_core::Error::Diverged { epoch, .. }) => {
                log::warn!("embedding run with seed {seed} diverged at epoch {epoch}; discarded");
                diverged.push(seed);
            }
            Err(e) => return Err(e),
        }
    }
    let runs: Vec<TrainRun> = finished.iter().map(|r| r.run.clone()).collect();
    let best = select_best(&runs).ok_or(travemb_core::Error::AllRunsDiverged(seeds.len()))?;
    let repeats: Vec<RepeatRecord> = finished
        .iter()
        .map(|r| RepeatRecord {
            seed: r.run.seed,
            dev_log_likelihood: r.run.dev_log_likelihood,
            train: r.fitted.as_ref().ok().map(|m| (&m.train).into()),
            test: r.fitted.as_ref().ok().map(|m| (&m.test).into()),
            error: r.fitted.as_ref().err().cloned(),
        })
        .collect();
    let test_ll: Vec<f64> = repeats.iter().filter_map(|r| r.test.map(|t| t.log_likelihood)).collect();
    let chosen = finished.swap_remove(best);
    Ok(EmbeddingOutcome {
        test_log_likelihood: Spread::of(&test_ll),
        repeats,
        diverged,
        best_run: chosen.run,
        best: chosen.fitted,
    })
}

fn embedding_rows(outcome: &EmbeddingOutcome) -> Vec<ComparisonRow> {
    let mut rows = Vec::new();
    match &outcome.best {
        Ok(m) => {
            let mut row = m.row();
            row.model = "embeddings (best)".into();
            rows.push(row);
        }
        Err(e) => rows.push(ComparisonRow::failed("embeddings (best)", e.clone())),
    }
    let ok: Vec<&RepeatRecord> = outcome.repeats.iter().filter(|r| r.error.is_none()).collect();
    if ok.is_empty() {
        rows.push(ComparisonRow::failed("embeddings (mean)", "no repeat could be estimated".into()));
        return rows;
    }
    let summarise = |pick: fn(&RepeatRecord) -> Metrics| -> (Metrics, Metrics) {
        let mut mean = [0.0; 4];
        let mut std = [0.0; 4];
        for i in 0..4 {
            let values: Vec<f64> = ok.iter().map(|r| pick(r).fields()[i]).collect();
            let s = Spread::of(&values).expect("non-empty");
            mean[i] = s.mean;
            std[i] = s.std;
        }
        (Metrics::from_fields(mean), Metrics::from_fields(std))
    };
    let (train_mean, train_std) = summarise(|r| r.train.expect("estimated"));
    let (test_mean, test_std) = summarise(|r| r.test.expect("estimated"));
    let n_params = outcome.best.as_ref().ok().map(|m| m.result.n_params());
    rows.push(ComparisonRow {
        model: "embeddings (mean)".into(),
        n_params,
        train: Some(train_mean),
        test: Some(test_mean),
        error: None,
    });
    rows.push(ComparisonRow {
        model: "embeddings (std)".into(),
        n_params,
        train: Some(train_std),
        test: Some(test_std),
        error: None,
    });
    rows
}

/// Splits `data`, estimates the roster on train and evaluates on test.
pub fn run_comparison(config: &ExperimentConfig, data: &ChoiceDataset) -> Result<Comparison> {
    config.encoding.validate(data)?;
    let DataSplit { train: tr, dev, test, indices } = split(data, &config.split_spec())?;
    let mut seconds = Vec::new();

    let fixed: Vec<ModelKind> = ModelKind::ALL
        .into_iter()
        .filter(|k| *k != ModelKind::Embeddings && config.has(*k))
        .collect();
    let started = Instant::now();
    let fitted: Vec<(ModelKind, travemb_core::Result<FittedModel>)> = fixed
        .par_iter()
        .map(|&k| (k, estimate_fixed(k, &config.encoding, &tr, &test)))
        .collect();
    seconds.push(("fixed_models".to_owned(), started.elapsed().as_secs_f64()));

    let mut rows = Vec::new();
    let mut models = Vec::new();
    for (kind, outcome) in fitted {
        match outcome {
            Ok(m) => {
                if !m.dropped.is_empty() {
                    log::warn!("{}: dropped {} dependent columns", m.name, m.dropped.len());
                }
                rows.push(m.row());
                models.push(m);
            }
            Err(e) => {
                log::error!("{} failed: {e}", kind.as_str());
                rows.push(ComparisonRow::failed(kind.as_str(), e.to_string()));
            }
        }
    }

    let mut embeddings = None;
    if config.has(ModelKind::Embeddings) {
        let started = Instant::now();
        let spec = UtilitySpec::swissmetro_base().with_swissmetro_encoded(config.encoding.variables());
        let outcome = TrainingSet::new(&config.embedding, &tr, &dev)
            .and_then(|set| embedding_repeats(&config.embedding, &set, &spec, &[], &tr, &test));
        seconds.push(("embeddings".to_owned(), started.elapsed().as_secs_f64()));
        match outcome {
            Ok(o) => {
                rows.extend(embedding_rows(&o));
                if let Ok(best) = &o.best {
                    let mut best = best.clone();
                    best.name = "embeddings (best)".into();
                    models.push(best);
                }
                embeddings = Some(o);
            }
            Err(e) => {
                log::error!("embeddings failed: {e}");
                rows.push(ComparisonRow::failed("embeddings (best)", e.to_string()));
            }
        }
    }

    Ok(Comparison {
        rows,
        models,
        embeddings,
        split: indices,
        seconds,
    })
}

/// Test pseudo R² of one model at one fraction; `None` when the model could
/// not be estimated or scored below zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub scenario: Scenario,
    pub fraction: f64,
    pub n_detailed: usize,
    pub r2: Vec<(ModelKind, Option<f64>)>,
}

impl SweepPoint {
    pub fn get(&self, model: ModelKind) -> Option<f64> {
        self.r2.iter().find(|(m, _)| *m == model).and_then(|(_, v)| *v)
    }
}

/// Embedding settings for a sweep scenario: only the scenario variables and
/// no covariates.
pub fn scenario_net(config: &ExperimentConfig, scenario: Scenario) -> EmbeddingNetConfig {
    let mut net = config.embedding.clone();
    net.encoding = EncodingSet {
        entries: scenario
            .variables()
            .iter()
            .map(|v| EncodingEntry {
                variable: (*v).to_owned(),
                k: config
                    .encoding
                    .entries
                    .iter()
                    .find(|e| e.variable == *v)
                    .map_or(1, |e| e.k),
            })
            .collect(),
    };
    net.covariates.clear();
    net.reconstruction_overrides.retain(|v, _| scenario.variables().contains(&v.as_str()));
    if let Some(r) = config.sweep.repeats {
        net.repeats = r;
    }
    net
}

fn positive(fit: travemb_core::Result<FittedModel>) -> Option<f64> {
    match fit {
        Ok(m) if m.test.rho_squared >= 0.0 => Some(m.test.rho_squared),
        Ok(_) => None,
        Err(e) => {
            log::debug!("sweep model not estimable: {e}");
            None
        }
    }
}

/// Data-efficiency sweep: embeddings learned once on the cheap survey (all
/// non-test rows), choice models estimated on nested detailed subsets.
pub fn run_sweep(config: &ExperimentConfig, data: &ChoiceDataset, scenario: Scenario) -> Result<Vec<SweepPoint>> {
    crate::config::check_fractions(&config.sweep.fractions)?;
    config.encoding.validate(data)?;
    let DataSplit { train: _, dev, test, indices } = split(data, &config.split_spec())?;
    let mut non_test: Vec<usize> = indices.train.iter().chain(&indices.dev).copied().collect();
    non_test.sort_unstable();
    let light = data.subset(&non_test);

    let net = scenario_net(config, scenario);
    let set = TrainingSet::new(&net, &light, &dev)?;
    let seeds: Vec<u64> = travemb_core::embed::repeat_seeds(&net).collect();
    let runs: Vec<travemb_core::Result<TrainRun>> = seeds.par_iter().map(|&s| train(&net, &set, s)).collect();
    let repeats = travemb_core::embed::Repeats::collect(runs)?;
    let learned = export(repeats.best_run());

    let order = shuffled(light.len(), config.seed);
    let all: Vec<&str> = config.encoding.variables().collect();
    let spec_all = UtilitySpec::swissmetro_base().with_swissmetro_encoded(all.iter().copied());
    let models: Vec<ModelKind> = config.sweep.models.clone();

    config
        .sweep
        .fractions
        .par_iter()
        .map(|&fraction| {
            let n = ((fraction * light.len() as f64).round() as usize).clamp(1, light.len());
            let mut rows = order[..n].to_vec();
            rows.sort_unstable();
            let detailed = light.subset(&rows);
            let r2 = models
                .iter()
                .map(|&kind| {
                    let value = match kind {
                        ModelKind::Embeddings => {
                            let rest = EncodingSet {
                                entries: config
                                    .encoding
                                    .entries
                                    .iter()
                                    .filter(|e| !scenario.variables().contains(&e.variable.as_str()))
                                    .cloned()
                                    .collect(),
                            };
                            positive(pca_encoders(&detailed, &rest).and_then(|mut enc| {
                                enc.extend(learned.iter().cloned());
                                fit_model(kind.as_str(), spec_all.clone(), enc, &detailed, &test, false)
                            }))
                        }
                        ModelKind::DummyFull => positive(
                            dummy_encoders(&detailed, &all)
                                .and_then(|enc| fit_model(kind.as_str(), spec_all.clone(), enc, &detailed, &test, false)),
                        ),
                        other => positive(estimate_fixed(other, &config.encoding, &detailed, &test)),
                    };
                    (kind, value)
                })
                .collect();
            Ok(SweepPoint {
                scenario,
                fraction,
                n_detailed: n,
                r2,
            })
        })
        .collect()
}
