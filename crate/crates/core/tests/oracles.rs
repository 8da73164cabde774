//! Implementation against independently computed reference values.

mod common;

use approx::assert_relative_eq;
use common::{sorted_eigenpairs, synthetic, synthetic_spec};
use travemb_core::data::{split, SplitSpec};
use travemb_core::embed::{self, EmbeddingNetConfig, TrainingSet};
use travemb_core::encoders::{encode, fit_dummy, fit_pca, EncoderKind, EncoderModel, EncodingEntry, EncodingSet};
use travemb_core::mds::{classical_mds, pairwise_distances};
use travemb_core::mnl::{estimate, MnlProblem, NewtonOptions};
use travemb_core::projection::{project_all, projected_probabilities};
use travemb_core::Matrix;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn pca_matches_jacobi_on_explicit_one_hot_covariance() {
    let data = synthetic(900, 6, 11);
    let column = data.categorical("V").unwrap();
    let d = column.map.len();
    let n = data.len() as f64;
    let onehot: Vec<Vec<f64>> = column
        .codes
        .iter()
        .map(|&c| (0..d).map(|j| if j == c { 1.0 } else { 0.0 }).collect())
        .collect();
    let mean: Vec<f64> = (0..d).map(|j| onehot.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in &onehot {
        for a in 0..d {
            for b in 0..d {
                cov[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]) / n;
            }
        }
    }
    let pairs = sorted_eigenpairs(&cov);

    let model = fit_pca(&data, "V", 3).unwrap();
    let eig = &model.pca.as_ref().unwrap().eigenvalues;
    for k in 0..3 {
        assert_relative_eq!(eig[k], pairs[k].0, epsilon = 1e-12);
        let expected: Vec<f64> = (0..d)
            .map(|cat| (0..d).map(|j| ((cat == j) as u8 as f64 - mean[j]) * pairs[k].1[j]).sum())
            .collect();
        let got = model.matrix.column(k);
        let sign = if got.iter().zip(&expected).map(|(a, b)| a * b).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - sign * e).abs() < 1e-9, "component {k}: {g} vs {e}");
        }
    }
    let full = fit_pca(&data, "V", d).unwrap();
    for cat in 0..d {
        let back = full.reconstruct(cat).unwrap();
        for (j, x) in back.iter().enumerate() {
            assert!((x - (cat == j) as u8 as f64).abs() < 1e-8);
        }
    }
}

fn oracle_mds(dist: &Matrix, dims: usize) -> Vec<Vec<f64>> {
    let n = dist.rows();
    let j: Vec<Vec<f64>> = (0..n)
        .map(|a| (0..n).map(|b| if a == b { 1.0 } else { 0.0 } - 1.0 / n as f64).collect())
        .collect();
    let d2: Vec<Vec<f64>> = (0..n).map(|a| (0..n).map(|b| dist[(a, b)].powi(2)).collect()).collect();
    let mul = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        (0..n)
            .map(|a| (0..n).map(|b| (0..n).map(|k| x[a][k] * y[k][b]).sum()).collect())
            .collect()
    };
    let b: Vec<Vec<f64>> = mul(&mul(&j, &d2), &j)
        .into_iter()
        .map(|r| r.into_iter().map(|x| -0.5 * x).collect())
        .collect();
    let pairs = sorted_eigenpairs(&b);
    (0..n)
        .map(|i| (0..dims).map(|k| pairs[k].1[i] * pairs[k].0.max(0.0).sqrt()).collect())
        .collect()
}

#[test]
fn mds_matches_brute_force_eigen_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<Vec<f64>> = (0..7).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let m = Matrix::from_rows(&rows).unwrap();
    let dist = pairwise_distances(&m);
    let layout = classical_mds(&dist, (0..7).map(|i| i.to_string()).collect(), 2).unwrap();
    let oracle = Matrix::from_rows(&oracle_mds(&dist, 2)).unwrap();
    let ours = pairwise_distances(&layout.coordinates);
    assert!(ours.max_abs_diff(&pairwise_distances(&oracle)) < 1e-8);
    for k in 0..2 {
        let mean: f64 = layout.coordinates.column(k).iter().sum::<f64>() / 7.0;
        assert!(mean.abs() < 1e-9);
    }
    assert!(layout.stress > 0.0 && layout.stress < 1.0);
}

#[test]
fn mds_row_permutation_and_dimension() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rows: Vec<Vec<f64>> = (0..9).map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let perm = [3, 0, 8, 1, 7, 2, 6, 4, 5];
    let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
    let labels = |n: usize| (0..n).map(|i| i.to_string()).collect::<Vec<_>>();
    let a = classical_mds(&pairwise_distances(&Matrix::from_rows(&rows).unwrap()), labels(9), 2).unwrap();
    let b = classical_mds(&pairwise_distances(&Matrix::from_rows(&permuted).unwrap()), labels(9), 2).unwrap();
    let da = pairwise_distances(&a.coordinates);
    let db = pairwise_distances(&b.coordinates);
    for (x, &i) in perm.iter().enumerate() {
        for (y, &j) in perm.iter().enumerate() {
            assert!((db[(x, y)] - da[(i, j)]).abs() < 1e-8);
        }
    }
    let one = classical_mds(&pairwise_distances(&Matrix::from_rows(&rows).unwrap()), labels(9), 1).unwrap();
    assert!(a.stress <= one.stress + 1e-12);
}

fn random_encoder(d: usize, k: usize, seed: u64) -> EncoderModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..d).map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    EncoderModel {
        variable: "V".into(),
        kind: EncoderKind::Embedding,
        categories: (0..d).map(|i| format!("cat{i:02}")).collect(),
        matrix: Matrix::from_rows(&rows).unwrap(),
        base: None,
        pca: None,
        provenance: None,
    }
}

#[test]
fn projected_coefficients_reproduce_probabilities() {
    let data = synthetic(1500, 8, 21);
    let encoder = random_encoder(8, 3, 4);
    let problem = MnlProblem::new(&data, &synthetic_spec(true), std::slice::from_ref(&encoder)).unwrap();
    let result = estimate(&problem, &NewtonOptions::default()).unwrap();
    let table = project_all(&result, std::slice::from_ref(&encoder), false).unwrap();
    assert_eq!(table.len(), 2 * 8);

    let direct = problem.probabilities(&result.coefficients);
    let rebuilt = projected_probabilities(&result, &problem, &data, &table).unwrap();
    assert!(direct.max_abs_diff(&rebuilt) < 1e-10);

    // second route: a dummy design whose coefficients are the projected
    // values relative to the base category, with the base absorbed by the ASCs
    let map = &data.categorical("V").unwrap().map;
    let base = map.label(0);
    let dummy = fit_dummy(map, base).unwrap();
    let dummy_problem = MnlProblem::new(&data, &synthetic_spec(true), std::slice::from_ref(&dummy)).unwrap();
    let coef = |alt: usize, cat: &str| {
        table
            .iter()
            .find(|r| r.alternative == alt && r.category == cat)
            .unwrap()
            .coefficient
    };
    let mut beta = Vec::new();
    for col in dummy_problem.design.columns() {
        let label = col.label.as_str();
        let value = match label {
            "ASC_A" => result.coefficient("ASC_A").unwrap() + coef(0, base),
            "ASC_B" => result.coefficient("ASC_B").unwrap() + coef(1, base),
            "x" | "w" => result.coefficient(label).unwrap(),
            _ => {
                let (name, alt) = label.rsplit_once('_').unwrap();
                let cat = name.strip_prefix("V_").unwrap();
                let a = if alt == "A" { 0 } else { 1 };
                coef(a, cat) - coef(a, base)
            }
        };
        beta.push(value);
    }
    let via_dummy = dummy_problem.probabilities(&beta);
    assert!(direct.max_abs_diff(&via_dummy) < 1e-10);
}

#[test]
fn dummy_projection_is_identity_and_projection_is_linear() {
    let data = synthetic(1200, 5, 3);
    let map = &data.categorical("V").unwrap().map;
    let dummy = fit_dummy(map, map.label(2)).unwrap();
    let problem = MnlProblem::new(&data, &synthetic_spec(true), std::slice::from_ref(&dummy)).unwrap();
    let result = estimate(&problem, &NewtonOptions::default()).unwrap();
    let table = project_all(&result, std::slice::from_ref(&dummy), false).unwrap();
    for row in &table {
        let alt = if row.alternative == 0 { "A" } else { "B" };
        match result.columns.iter().position(|c| c.label == format!("V_{}_{alt}", row.category)) {
            Some(i) => {
                assert_eq!(row.coefficient, result.coefficients[i]);
                assert_relative_eq!(row.std_error, result.std_errors[i], epsilon = 1e-14);
            }
            None => assert_eq!((row.coefficient, row.std_error), (0.0, 0.0)),
        }
    }

    // category 2 is a convex combination of categories 0 and 1
    let mut enc = random_encoder(5, 2, 9);
    let mixed: Vec<f64> = (0..2).map(|k| 0.3 * enc.matrix[(0, k)] + 0.7 * enc.matrix[(1, k)]).collect();
    enc.matrix.row_mut(2).copy_from_slice(&mixed);
    let problem = MnlProblem::new(&data, &synthetic_spec(true), std::slice::from_ref(&enc)).unwrap();
    let result = estimate(&problem, &NewtonOptions::default()).unwrap();
    let table = project_all(&result, std::slice::from_ref(&enc), true).unwrap();
    for alt in 0..2 {
        let c: Vec<f64> = (0..3)
            .map(|d| table.iter().find(|r| r.alternative == alt && r.category == enc.categories[d]).unwrap().coefficient)
            .collect();
        assert!(c[2] >= c[0].min(c[1]) - 1e-12 && c[2] <= c[0].max(c[1]) + 1e-12);
    }
}

fn single_variable_config(k: usize, epochs: usize, lr: f64, batch: usize) -> EmbeddingNetConfig {
    EmbeddingNetConfig {
        encoding: EncodingSet {
            entries: vec![EncodingEntry { variable: "V".into(), k }],
        },
        epochs,
        repeats: 1,
        seed: 7,
        learning_rate: lr,
        batch_size: batch,
        l2: 0.0,
        reconstruction_weight: 0.0,
        reconstruction_overrides: Default::default(),
        covariates: vec![],
    }
}

#[test]
fn network_contains_the_dummy_logit() {
    let data = synthetic(600, 4, 17);
    let map = &data.categorical("V").unwrap().map;
    let dummy = fit_dummy(map, map.label(0)).unwrap();
    let spec = travemb_core::mnl::UtilitySpec {
        terms: vec![
            travemb_core::mnl::Term::constant("ASC_A", 0),
            travemb_core::mnl::Term::constant("ASC_B", 1),
            travemb_core::mnl::Term::encoded("V", &[0, 1]),
        ],
    };
    let problem = MnlProblem::new(&data, &spec, std::slice::from_ref(&dummy)).unwrap();
    let mnl_ll = estimate(&problem, &NewtonOptions::default()).unwrap().fit.log_likelihood;

    let config = single_variable_config(4, 3000, 0.02, 600);
    let set = TrainingSet::new(&config, &data, &data).unwrap();
    let run = embed::train(&config, &set, config.seed).unwrap();
    let net_ll = embed::choice_log_likelihood(&run.params, &set.train).unwrap();
    assert!(net_ll >= mnl_ll - 1e-3, "network {net_ll} vs logit {mnl_ll}");
}

#[test]
fn training_is_deterministic_and_exports_columns() {
    let data = synthetic(400, 6, 2);
    let parts = split(&data, &SplitSpec::default()).unwrap();
    let mut config = single_variable_config(2, 3, 1e-2, 32);
    config.reconstruction_weight = 0.5;
    config.l2 = 1e-3;
    config.covariates = vec!["x0".into(), "w".into()];
    let set = TrainingSet::new(&config, &parts.train, &parts.dev).unwrap();
    let a = embed::train(&config, &set, 11).unwrap();
    let b = embed::train(&config, &set, 11).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.train_loss.len(), 3);
    assert_ne!(a, embed::train(&config, &set, 12).unwrap());

    let exported = embed::export(&a);
    let w = &a.params.variables[0].embedding;
    let encoded = encode(&exported[0], &parts.test, "V").unwrap();
    for (n, &code) in parts.test.categorical("V").unwrap().codes.iter().enumerate() {
        assert_eq!(encoded.row(n), w.column(code).as_slice());
    }
    let json = serde_json::to_string(&exported[0]).unwrap();
    let back: EncoderModel = serde_json::from_str(&json).unwrap();
    assert_eq!(back, exported[0]);

    let mut frozen = config.clone();
    frozen.learning_rate = 0.0;
    frozen.epochs = 1;
    let still = embed::train(&frozen, &set, 11).unwrap();
    assert_eq!(still.params, set.initial_params(11));
}
