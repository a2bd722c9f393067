//! Scalar special functions shared by the sampler, the analytics and the
//! risk evaluators. Everything here is evaluated in a way that stays finite
//! for arguments far into the tails.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Standard normal CDF, `Φ(t) = ½·erfc(−t/√2)`.
pub fn normal_cdf(t: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc(-t * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t - LN_SQRT_2PI).exp()
}

/// Scaled complementary error function `e^{x²}·erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        // erfc(−y) = 2 − erfc(y)
        let y = -x;
        if y > 26.0 {
            return f64::INFINITY;
        }
        return 2.0 * (y * y).exp() - erfcx(y);
    }
    if x < 25.0 {
        return (x * x).exp() * erfc(x);
    }
    // Laplace continued fraction, converges fast for large x.
    let mut acc = x;
    for k in (1..=40).rev() {
        acc = x + (k as f64 * 0.5) / acc;
    }
    FRAC_1_SQRT_PI / acc
}

/// `ln Φ(t)`, accurate in both tails.
pub fn ln_normal_cdf(t: f64) -> f64 {
    if t > 5.0 {
        (-0.5 * erfc(t * FRAC_1_SQRT_2)).ln_1p()
    } else if t > -5.0 {
        normal_cdf(t).ln()
    } else {
        (0.5 * erfcx(-t * FRAC_1_SQRT_2)).ln() - 0.5 * t * t
    }
}

/// Logistic function, stable for both signs.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln σ(t)`.
pub fn ln_sigmoid(t: f64) -> f64 {
    -softplus(-t)
}

/// `ln(e^a + e^b)`.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if hi == f64::INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Log-sum-exp over an iterator of log terms.
pub fn ln_sum_exp<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let v: Vec<f64> = terms.into_iter().collect();
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY || hi.is_infinite() {
        return hi;
    }
    hi + v.iter().map(|x| (x - hi).exp()).sum::<f64>().ln()
}

/// `ln(e^x − 1)` for x ≥ 0 (−∞ at 0).
pub fn ln_expm1(x: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// `√(2π)`.
pub fn sqrt_2pi() -> f64 {
    (2.0 * PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normal_cdf_reference_points() {
        assert_eq!(normal_cdf(0.0), 0.5);
        // mpmath, 40 digits
        assert!((normal_cdf(1.959964) - 0.975_000_000_903_557_6).abs() < 1e-14);
        assert!((normal_cdf(-1.281552) - 0.099_999_923_753_823_31).abs() < 1e-14);
        assert!((normal_cdf(40.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn erfcx_is_continuous_across_branch() {
        let below = erfcx(25.0 - 1e-9);
        let above = erfcx(25.0 + 1e-9);
        assert_relative_eq!(below, above, max_relative = 1e-9);
        // e^{1/2}(1−Φ(1))·2 = erfcx(1/√2)
        assert_relative_eq!(
            erfcx(FRAC_1_SQRT_2),
            0.523_156_583_730_246_7,
            max_relative = 1e-14
        );
    }

    #[test]
    fn ln_normal_cdf_tails() {
        assert_relative_eq!(ln_normal_cdf(-1.0), normal_cdf(-1.0).ln(), max_relative = 1e-13);
        // deep left tail: ln Φ(−40) ≈ −t²/2 − ln(−t√(2π))
        let t = -40.0;
        let asym = -0.5 * t * t - (-t * sqrt_2pi()).ln() + (1.0 - 1.0 / (t * t)).ln();
        assert!((ln_normal_cdf(t) - asym).abs() < 1e-5);
        assert!(ln_normal_cdf(10.0) < 0.0);
    }

    #[test]
    fn sigmoid_symmetry() {
        for k in -20..=20 {
            let t = k as f64;
            assert!((sigmoid(t) + sigmoid(-t) - 1.0).abs() < 1e-15);
        }
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn log_helpers() {
        assert_relative_eq!(ln_add_exp(0.0, 0.0), 2f64.ln());
        assert_relative_eq!(ln_sum_exp([1.0, 2.0, 3.0]), (1f64.exp() + 2f64.exp() + 3f64.exp()).ln());
        assert_relative_eq!(ln_expm1(1.0), (1f64.exp() - 1.0).ln());
        assert_eq!(ln_expm1(0.0), f64::NEG_INFINITY);
        assert_relative_eq!(ln_expm1(600.0), 600.0, max_relative = 1e-15);
    }
}
