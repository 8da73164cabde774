use std::path::Path;

use travemb::config::{ExperimentConfig, ModelKind, Scenario};
use travemb::harness::{load_survey, run_comparison, run_sweep, scenario_net, Spread};
use travemb_core::data::{split, ChoiceDataset};

fn data() -> ChoiceDataset {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/swissmetro.dat");
    load_survey(&path, &Default::default()).unwrap()
}

fn quick(roster: &[ModelKind]) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        roster: roster.to_vec(),
        ..ExperimentConfig::default()
    };
    c.embedding.repeats = 2;
    c.embedding.epochs = 2;
    c.sweep.repeats = Some(1);
    c.sweep.fractions = vec![0.1, 0.5, 1.0];
    c.normalise();
    c
}

#[test]
fn sweep_uses_nested_fractions_of_the_non_test_rows() {
    let data = data();
    let c = quick(&ModelKind::ALL);
    let points = run_sweep(&c, &data, Scenario::Bigdata).unwrap();
    let s = split(&data, &c.split_spec()).unwrap();
    let non_test = s.train.len() + s.dev.len();
    assert_eq!(points.iter().map(|p| p.fraction).collect::<Vec<_>>(), vec![0.1, 0.5, 1.0]);
    assert_eq!(points[2].n_detailed, non_test);
    assert!(points.windows(2).all(|w| w[0].n_detailed < w[1].n_detailed));
    assert!(points[0].get(ModelKind::Original).is_some());
    for p in &points {
        assert_eq!(p.r2.len(), 5);
        for (_, v) in &p.r2 {
            assert!(v.is_none_or(|r| r >= 0.0));
        }
    }
}

#[test]
fn scenario_networks_drop_covariates() {
    let c = quick(&ModelKind::ALL);
    let light = scenario_net(&c, Scenario::Light);
    assert!(light.covariates.is_empty());
    assert_eq!(light.encoding.variables().collect::<Vec<_>>(), ["OD", "TICKET"]);
    assert_eq!(light.encoding.entries[1].k, 5);
    assert_eq!(light.repeats, 1);
    let big = scenario_net(&c, Scenario::Bigdata);
    assert_eq!(big.encoding.variables().collect::<Vec<_>>(), ["OD"]);
}

#[test]
fn embedding_rows_summarise_every_repeat() {
    let data = data();
    let c = quick(&[ModelKind::Embeddings]);
    let cmp = run_comparison(&c, &data).unwrap();
    let names: Vec<&str> = cmp.rows.iter().map(|r| r.model.as_str()).collect();
    assert_eq!(names, ["embeddings (best)", "embeddings (mean)", "embeddings (std)"]);
    let e = cmp.embeddings.as_ref().unwrap();
    assert_eq!(e.repeats.len() + e.diverged.len(), 2);
    let lls: Vec<f64> = e.repeats.iter().filter_map(|r| r.test.map(|t| t.log_likelihood)).collect();
    let spread = Spread::of(&lls).unwrap();
    let mean_row = cmp.row("embeddings (mean)").unwrap();
    assert!((mean_row.test.unwrap().log_likelihood - spread.mean).abs() < 1e-9);
    let best = e.repeats.iter().max_by(|a, b| a.dev_log_likelihood.total_cmp(&b.dev_log_likelihood)).unwrap();
    assert_eq!(best.seed, e.best_run.seed);
    assert_eq!(cmp.row("embeddings (best)").unwrap().n_params, Some(39));
}

#[test]
fn spread_statistics() {
    let s = Spread::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!((s.mean, s.min, s.max), (2.5, 1.0, 4.0));
    assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert_eq!(Spread::of(&[7.0]).unwrap().std, 0.0);
    assert!(Spread::of(&[]).is_none());
}
