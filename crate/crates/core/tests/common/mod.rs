#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use travemb_core::category::CategoryMap;
use travemb_core::data::{CategoricalColumn, ChoiceDataset};
use travemb_core::mnl::{Term, UtilitySpec};
use travemb_core::Matrix;

/// Cyclic Jacobi eigensolver for symmetric matrices. Returns eigenvalues
/// (unsorted) and eigenvectors as columns.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// Eigenpairs sorted by descending eigenvalue; vectors as columns of a Vec of columns.
pub fn sorted_eigenpairs(a: &[Vec<f64>]) -> Vec<(f64, Vec<f64>)> {
    let (values, v) = jacobi_eigen(a);
    let n = values.len();
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n).map(|j| (values[j], (0..n).map(|i| v[i][j]).collect())).collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    pairs
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Three alternatives, features `x0, x1, x2` (one per alternative) and `w`,
/// a categorical `V` with `d` categories whose effect on alternatives 0 and 1
/// is `effect(category)`. Alternative 2 is unavailable for every fifth row.
pub fn synthetic(n: usize, d: usize, seed: u64) -> ChoiceDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<String> = (0..d).map(|i| format!("cat{i:02}")).collect();
    let map = CategoryMap::from_labels("V", labels.iter().cloned());
    let mut feats: BTreeMap<String, Vec<f64>> = ["x0", "x1", "x2", "w"].iter().map(|f| (f.to_string(), vec![])).collect();
    let mut codes = Vec::new();
    let mut choices = Vec::new();
    let mut avail = Vec::new();
    for i in 0..n {
        let code = rng.random_range(0..d);
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..2.0)).collect();
        let w: f64 = rng.random_range(-1.0..1.0);
        let effect = (code as f64 / d as f64) * 2.0 - 1.0;
        let u = [
            -x[0] + effect + 0.3 * w,
            -x[1] - 0.5 * effect + 0.2,
            -x[2],
        ];
        let a = [true, true, i % 5 != 0];
        let mut g = [0.0; 3];
        for j in 0..3 {
            let e: f64 = rng.random_range(1e-12..1.0f64);
            g[j] = if a[j] { u[j] - (-(e.ln())).ln() } else { f64::NEG_INFINITY };
        }
        let y = (0..3).max_by(|&p, &q| g[p].partial_cmp(&g[q]).unwrap()).unwrap();
        for (k, name) in ["x0", "x1", "x2"].iter().enumerate() {
            feats.get_mut(*name).unwrap().push(x[k]);
        }
        feats.get_mut("w").unwrap().push(w);
        codes.push(code);
        choices.push(y);
        avail.extend(a);
    }
    let mut categorical = BTreeMap::new();
    categorical.insert("V".to_string(), CategoricalColumn { map, codes });
    ChoiceDataset::new(
        vec!["A".into(), "B".into(), "C".into()],
        feats,
        categorical,
        choices,
        avail,
        (0..n as u64).collect(),
        (0..n as u64).map(|i| i / 9).collect(),
    )
    .unwrap()
}

/// ASCs for A and B, a shared `x` coefficient, `w` on A, and `V` encoded
/// in A and B.
pub fn synthetic_spec(with_encoded: bool) -> UtilitySpec {
    let mut terms = vec![
        Term::constant("ASC_A", 0),
        Term::constant("ASC_B", 1),
        Term::attribute("x", &["x0", "x1", "x2"], &[0, 1, 2], true),
        Term::attribute("w", &["w"], &[0], false),
    ];
    if with_encoded {
        terms.push(Term::encoded("V", &[0, 1]));
    }
    UtilitySpec { terms }
}
