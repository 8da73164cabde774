use alloc::vec;
use alloc::vec::Vec;

use super::design::MnlProblem;
use crate::math::{masked_log_sum_exp, masked_softmax_into};
use crate::matrix::Matrix;

impl MnlProblem {
    fn utilities_into(&self, beta: &[f64], n: usize, out: &mut [f64]) {
        let nz = self.design.nonzero(n);
        for (j, u) in out.iter_mut().enumerate() {
            let row = self.design.row(n, j);
            *u = nz.iter().map(|&p| row[p as usize] * beta[p as usize]).sum();
        }
    }

    /// Systematic utilities, `N x C` (unavailable alternatives included).
    pub fn utilities(&self, beta: &[f64]) -> Matrix {
        let c = self.design.n_alts();
        let mut out = Matrix::zeros(self.n_obs(), c);
        for n in 0..self.n_obs() {
            self.utilities_into(beta, n, out.row_mut(n));
        }
        out
    }

    /// Choice probabilities, `N x C`, zero on unavailable alternatives.
    pub fn probabilities(&self, beta: &[f64]) -> Matrix {
        let c = self.design.n_alts();
        let mut out = Matrix::zeros(self.n_obs(), c);
        let mut u = vec![0.0; c];
        for n in 0..self.n_obs() {
            self.utilities_into(beta, n, &mut u);
            masked_softmax_into(&u, self.available(n), out.row_mut(n))
                .expect("problem guarantees an available alternative");
        }
        out
    }

    /// `sum_n log p(choice_n)`.
    pub fn log_likelihood(&self, beta: &[f64]) -> f64 {
        let c = self.design.n_alts();
        let mut u = vec![0.0; c];
        let mut total = 0.0;
        for n in 0..self.n_obs() {
            self.utilities_into(beta, n, &mut u);
            total += u[self.choices[n]] - masked_log_sum_exp(&u, self.available(n));
        }
        total
    }

    /// Log-likelihood of the zero-coefficient model: `-sum_n ln |available_n|`.
    pub fn null_log_likelihood(&self) -> f64 {
        (0..self.n_obs())
            .map(|n| {
                let k = self.available(n).iter().filter(|&&a| a).count();
                -libm::log(k as f64)
            })
            .sum()
    }

    /// Log-likelihood, gradient and Hessian at `beta`.
    pub(crate) fn derivatives(&self, beta: &[f64]) -> (f64, Vec<f64>, Matrix) {
        let c = self.design.n_alts();
        let p = self.design.n_params();
        let mut grad = vec![0.0; p];
        let mut hess = Matrix::zeros(p, p);
        let mut u = vec![0.0; c];
        let mut prob = vec![0.0; c];
        let mut mean = Vec::new();
        let mut centred = Vec::new();
        let mut ll = 0.0;
        for n in 0..self.n_obs() {
            let nz = self.design.nonzero(n);
            let avail = self.available(n);
            self.utilities_into(beta, n, &mut u);
            ll += u[self.choices[n]] - masked_log_sum_exp(&u, avail);
            masked_softmax_into(&u, avail, &mut prob).expect("available alternative");

            mean.clear();
            mean.resize(nz.len(), 0.0);
            for (j, &pj) in prob.iter().enumerate().take(c) {
                if pj == 0.0 {
                    continue;
                }
                let row = self.design.row(n, j);
                for (m, &k) in mean.iter_mut().zip(nz) {
                    *m += pj * row[k as usize];
                }
            }
            let chosen = self.design.row(n, self.choices[n]);
            for (m, &k) in mean.iter().zip(nz) {
                grad[k as usize] += chosen[k as usize] - m;
            }
            for (j, &pj) in prob.iter().enumerate().take(c) {
                if pj == 0.0 {
                    continue;
                }
                let row = self.design.row(n, j);
                centred.clear();
                centred.extend(nz.iter().zip(&mean).map(|(&k, m)| row[k as usize] - m));
                for (a, &ka) in nz.iter().enumerate() {
                    let wa = pj * centred[a];
                    if wa == 0.0 {
                        continue;
                    }
                    let hrow = hess.row_mut(ka as usize);
                    for (b, &kb) in nz.iter().enumerate() {
                        hrow[kb as usize] -= wa * centred[b];
                    }
                }
            }
        }
        (ll, grad, hess)
    }
}
