//! Scalar helpers: availability-masked softmax and normal tail probabilities.

use crate::error::{Error, Result};

/// Log-sum-exp over the entries whose mask is `true`.
///
/// Returns `-inf` when nothing is available.
pub fn masked_log_sum_exp(values: &[f64], available: &[bool]) -> f64 {
    let max = values
        .iter()
        .zip(available)
        .filter(|(_, &a)| a)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = values
        .iter()
        .zip(available)
        .filter(|(_, &a)| a)
        .map(|(&v, _)| libm::exp(v - max))
        .sum();
    max + libm::log(sum)
}

/// Softmax of `logits` restricted to available entries, written into `out`.
///
/// Unavailable entries receive exactly zero. The maximum available logit is
/// subtracted before exponentiation.
pub fn masked_softmax_into(logits: &[f64], available: &[bool], out: &mut [f64]) -> Result<()> {
    if logits.len() != available.len() || out.len() != logits.len() {
        return Err(Error::Shape(alloc::format!(
            "softmax over {} logits with {} availability flags",
            logits.len(),
            available.len()
        )));
    }
    let max = logits
        .iter()
        .zip(available)
        .filter(|(_, &a)| a)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument(
            "no alternative is available".into(),
        ));
    }
    let mut total = 0.0;
    for ((o, &l), &a) in out.iter_mut().zip(logits).zip(available) {
        *o = if a { libm::exp(l - max) } else { 0.0 };
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    Ok(())
}

/// Unmasked softmax, in place.
pub fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in values.iter_mut() {
        *v = libm::exp(*v - max);
        total += *v;
    }
    for v in values.iter_mut() {
        *v /= total;
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Two-sided p-value `2 (1 - Phi(|z|))`, computed through `erfc` so that
/// small tails keep full relative precision.
pub fn two_sided_p_value(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    libm::erfc(libm::fabs(z) / core::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn masked_softmax_zeroes_unavailable() {
        let mut out = [0.0; 3];
        masked_softmax_into(&[0.0, 0.0, 0.0], &[true, true, false], &mut out).unwrap();
        assert_eq!(out, [0.5, 0.5, 0.0]);
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let mut out = [0.0; 2];
        masked_softmax_into(&[1000.0, 999.0], &[true, true], &mut out).unwrap();
        assert_relative_eq!(out[0], 1.0 / (1.0 + libm::exp(-1.0)), epsilon = 1e-15);
    }

    #[test]
    fn all_unavailable_is_an_error() {
        let mut out = [0.0; 2];
        assert!(masked_softmax_into(&[0.0, 0.0], &[false, false], &mut out).is_err());
        assert_eq!(masked_log_sum_exp(&[1.0], &[false]), f64::NEG_INFINITY);
    }

    #[test]
    fn log_sum_exp_matches_direct() {
        let v = [0.3, -1.2, 2.0];
        let direct = libm::log(v.iter().map(|x| libm::exp(*x)).sum::<f64>());
        assert_relative_eq!(masked_log_sum_exp(&v, &[true; 3]), direct, epsilon = 1e-14);
    }

    #[test]
    fn p_values() {
        assert_relative_eq!(two_sided_p_value(1.959_963_984_540_054), 0.05, epsilon = 1e-12);
        assert_eq!(two_sided_p_value(0.0), 1.0);
        assert_relative_eq!(normal_cdf(0.0), 0.5);
        assert!(two_sided_p_value(40.0) >= 0.0);
    }
}
