//! Chi-square inverse CDF for bad-data thresholds.
//!
//! The CDF of a chi-square with k degrees of freedom is the regularized lower
//! incomplete gamma P(k/2, x/2). The inverse is computed by bisection, which
//! is plenty for threshold lookups.

use alloc::format;

use crate::error::{Error, Result};

/// ln Gamma(x) for x > 0, Lanczos approximation (g = 7, n = 9).
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection formula
        let pi = core::f64::consts::PI;
        return libm::log(pi / libm::sin(pi * x)) - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.999_999_999_999_809_93;
    for (i, &c) in COEFFS.iter().enumerate() {
        acc += c / (x + (i + 1) as f64);
    }
    let t = x + 7.5;
    0.5 * libm::log(2.0 * core::f64::consts::PI) + (x + 0.5) * libm::log(t) - t + libm::log(acc)
}

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
/// Series expansion for x < a + 1, continued fraction otherwise.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let ln_pre = a * libm::log(x) - x - ln_gamma(a);
    if x < a + 1.0 {
        // series: P = x^a e^-x / Gamma(a) * sum x^n / (a (a+1) ... (a+n))
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..500 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        sum * libm::exp(ln_pre)
    } else {
        // Lentz continued fraction for Q, then P = 1 - Q
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        1.0 - libm::exp(ln_pre) * h
    }
}

/// Chi-square CDF with `dof` degrees of freedom.
pub fn chi_square_cdf(dof: usize, x: f64) -> f64 {
    gamma_p(dof as f64 / 2.0, x / 2.0)
}

/// Inverse chi-square CDF: the threshold t with P(X <= t) = confidence.
pub fn chi_square_threshold(dof: usize, confidence: f64) -> Result<f64> {
    if dof == 0 {
        return Err(Error::InvalidArgument("dof must be >= 1".into()));
    }
    if !(0.0..1.0).contains(&confidence) || confidence <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    let mut hi = dof as f64 + 10.0;
    while chi_square_cdf(dof, hi) < confidence {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::InvalidArgument(
                "confidence too close to 1".into(),
            ));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi_square_cdf(dof, mid) < confidence {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 * (1.0 + hi) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_quantiles() {
        assert!((chi_square_threshold(3, 0.95).unwrap() - 7.815).abs() < 1e-3);
        assert!((chi_square_threshold(1, 0.95).unwrap() - 3.841).abs() < 1e-3);
    }

    #[test]
    fn out_of_range_confidence_rejected() {
        assert!(chi_square_threshold(3, 1.5).is_err());
        assert!(chi_square_threshold(3, 0.0).is_err());
        assert!(chi_square_threshold(0, 0.5).is_err());
    }

    #[test]
    fn matches_statrs_inverse_cdf() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        for dof in [1usize, 2, 3, 5, 10, 21, 50, 100] {
            for conf in [0.025, 0.5, 0.9, 0.95, 0.975, 0.99] {
                let ours = chi_square_threshold(dof, conf).unwrap();
                let theirs = ChiSquared::new(dof as f64).unwrap().inverse_cdf(conf);
                assert!(
                    (ours - theirs).abs() < 1e-6 * (1.0 + theirs),
                    "dof {dof} conf {conf}: {ours} vs {theirs}"
                );
            }
        }
    }

    #[test]
    fn cdf_roundtrip() {
        for dof in [2usize, 7, 21] {
            let t = chi_square_threshold(dof, 0.9).unwrap();
            assert!((chi_square_cdf(dof, t) - 0.9).abs() < 1e-9);
        }
    }
}
