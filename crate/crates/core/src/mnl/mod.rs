//! Multinomial logit: utility specifications, design assembly, the
//! availability-masked likelihood and Newton maximum-likelihood estimation.

mod design;
mod estimate;
mod likelihood;
mod spec;

pub use design::{assemble_design, Column, ColumnOrigin, Design, MnlProblem};
pub use estimate::{
    dependent_design_columns, estimate, estimate_dropping_dependent, fit_metrics, Diagnostics,
    EstimationResult, NewtonOptions, SplitFit,
};
pub use spec::{Term, TermSource, UtilitySpec};

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use alloc::vec::Vec;
    use approx::assert_relative_eq;

    fn col(label: &str) -> Column {
        Column {
            label: label.to_string(),
            origin: ColumnOrigin::Term { term: 0 },
        }
    }

    /// Binary problem; `rows[n] = (x_alt0, x_alt1)` per column.
    fn tight() -> NewtonOptions {
        NewtonOptions {
            gradient_tolerance: 1e-12,
            ..NewtonOptions::default()
        }
    }

    fn binary(columns: &[&str], rows: &[Vec<(f64, f64)>], choices: &[usize]) -> MnlProblem {
        let p = columns.len();
        let mut values = Vec::new();
        for r in rows {
            values.extend(r.iter().map(|x| x.0));
            values.extend(r.iter().map(|x| x.1));
        }
        let design = Design::from_values(rows.len(), 2, columns.iter().map(|c| col(c)).collect(), values).unwrap();
        assert_eq!(design.n_params(), p);
        MnlProblem::from_parts(design, choices.to_vec(), vec![true; 2 * rows.len()]).unwrap()
    }

    #[test]
    fn zero_beta_is_uniform() {
        let design = Design::from_values(4, 3, vec![col("x")], vec![1.0; 12]).unwrap();
        let all = MnlProblem::from_parts(design.clone(), vec![0, 1, 2, 0], vec![true; 12]).unwrap();
        assert_relative_eq!(all.log_likelihood(&[0.0]), -4.0 * libm::log(3.0), epsilon = 1e-12);
        assert_relative_eq!(all.null_log_likelihood(), -4.0 * libm::log(3.0), epsilon = 1e-12);

        let avail: Vec<bool> = (0..4).flat_map(|_| [true, true, false]).collect();
        let two = MnlProblem::from_parts(design, vec![0, 1, 1, 0], avail).unwrap();
        assert_relative_eq!(two.log_likelihood(&[0.7]), -4.0 * libm::log(2.0), epsilon = 1e-12);
        let p = two.probabilities(&[0.0]);
        assert_eq!(p.row(0), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn rejects_unavailable_choice_and_empty_availability() {
        let design = Design::from_values(1, 2, vec![col("x")], vec![0.0, 1.0]).unwrap();
        assert!(MnlProblem::from_parts(design.clone(), vec![1], vec![true, false]).is_err());
        assert!(matches!(
            MnlProblem::from_parts(design, vec![0], vec![false, false]),
            Err(crate::Error::NoAvailableAlternative(0))
        ));
    }

    #[test]
    fn single_constant_matches_log_odds() {
        // 3 of 4 choose alternative 1: beta = ln 3
        let rows = vec![vec![(0.0, 1.0)]; 4];
        let prob = binary(&["asc"], &rows, &[1, 1, 1, 0]);
        let r = estimate(&prob, &tight()).unwrap();
        assert_relative_eq!(r.coefficients[0], libm::log(3.0), epsilon = 1e-9);
        // Var = 1 / (N p (1-p)) = 1 / (4 * 3/16)
        assert_relative_eq!(r.std_errors[0], libm::sqrt(4.0 / 3.0), epsilon = 1e-9);
        assert!(r.diagnostics.converged);
    }

    #[test]
    fn two_group_closed_form() {
        // group A (x=0): 2 of 5 choose alt 1; group B (x=1): 4 of 5 choose alt 1
        let mut rows = Vec::new();
        let mut choices = Vec::new();
        for (x, ones) in [(0.0, 2), (1.0, 4)] {
            for i in 0..5 {
                rows.push(vec![(0.0, 1.0), (0.0, x)]);
                choices.push(usize::from(i < ones));
            }
        }
        let prob = binary(&["asc", "x"], &rows, &choices);
        let r = estimate(&prob, &tight()).unwrap();
        let asc = libm::log(2.0 / 3.0);
        let slope = libm::log(4.0) - asc;
        assert_relative_eq!(r.coefficients[0], asc, epsilon = 1e-9);
        assert_relative_eq!(r.coefficients[1], slope, epsilon = 1e-9);
        assert!(r.diagnostics.gradient_inf_norm < 1e-6);
        // covariance symmetric, se = sqrt(diag)
        assert_relative_eq!(r.covariance[(0, 1)], r.covariance[(1, 0)], epsilon = 1e-12);
        assert_relative_eq!(r.std_errors[1], libm::sqrt(r.covariance[(1, 1)]));
    }

    #[test]
    fn separable_data_is_reported_not_looped() {
        let rows = vec![vec![(0.0, -1.0)], vec![(0.0, -1.0)], vec![(0.0, 1.0)], vec![(0.0, 1.0)]];
        let prob = binary(&["x"], &rows, &[0, 0, 1, 1]);
        let opts = NewtonOptions::default();
        let r = estimate(&prob, &opts).unwrap();
        let d = &r.diagnostics;
        assert!(d.iterations <= opts.max_iterations);
        assert!(d.separation_suspected);
        assert!(r.coefficients[0] > 10.0);
        assert!(d.coefficient_norms.windows(2).all(|w| w[1] > w[0]));
        assert!(r.p_values[0] > 0.05);
    }

    #[test]
    fn rank_deficiency_names_columns() {
        let rows = vec![
            vec![(0.0, 1.0), (0.0, 2.0), (1.0, 1.0)],
            vec![(0.0, 1.0), (0.0, 2.0), (1.0, 1.0)],
            vec![(0.0, 1.0), (0.0, 2.0), (1.0, 1.0)],
        ];
        let prob = binary(&["a", "b", "generic"], &rows, &[0, 1, 1]);
        match estimate(&prob, &NewtonOptions::default()) {
            Err(crate::Error::RankDeficient(labels)) => {
                assert_eq!(labels, vec!["b".to_string(), "generic".to_string()])
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
        let (r, reduced, dropped) =
            estimate_dropping_dependent(&prob, &tight()).unwrap();
        assert_eq!(dropped.len(), 2);
        assert_eq!(reduced.design.n_params(), 1);
        assert_relative_eq!(r.coefficients[0], libm::log(2.0), epsilon = 1e-9);
    }

    #[test]
    fn metrics_identities() {
        let m = fit_metrics(-100.0, -100.0, 0, 10).unwrap();
        assert_eq!(m.rho_squared, 0.0);
        assert_eq!(m.rho_bar_squared, m.rho_squared);
        let m = fit_metrics(-4_695.816, -6_000.0, 14, 10).unwrap();
        assert_relative_eq!(m.aic, 9_419.632, epsilon = 1e-9);
        assert!(fit_metrics(-1.0, 0.0, 1, 1).is_err());
    }

    #[test]
    fn paper_pseudo_r2_back_solve() {
        // LL0 implied by rho² = 0.284 at LL = -4695.816 is about -6559,
        // not the printed -6642.8.
        let ll0 = -4_695.816 / (1.0 - 0.284);
        let m = fit_metrics(-4_695.816, ll0, 14, 6373).unwrap();
        assert_relative_eq!(m.rho_squared, 0.284, epsilon = 1e-12);
        assert!((ll0 - -6_558.4).abs() < 1.0);
    }

    #[test]
    fn evaluate_requires_matching_columns() {
        let rows = vec![vec![(0.0, 1.0)]; 4];
        let prob = binary(&["asc"], &rows, &[1, 1, 1, 0]);
        let r = estimate(&prob, &NewtonOptions::default()).unwrap();
        let other = binary(&["other"], &rows, &[1, 1, 1, 0]);
        assert!(r.evaluate(&other).is_err());
        let fit = r.evaluate(&prob).unwrap();
        assert_relative_eq!(fit.log_likelihood, r.fit.log_likelihood);
    }
}
