//! Scalar special functions evaluated in a form that stays finite at the
//! extremes reached by strongly skewed targets.

use statrs::function::erf::erfc;

pub const LN_2: f64 = std::f64::consts::LN_2;
/// `½ log(2π)`
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `log(1 + e^x)` without overflow or loss of precision in the tails.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function `1 / (1 + e^{-x})`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log σ(x) = -softplus(-x)`.
pub fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

/// Standard normal log-density.
pub fn log_normal_pdf(x: f64) -> f64 {
    -0.5 * x * x - HALF_LN_2PI
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    log_normal_pdf(x).exp()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

// Below this point erfc has underflowed far enough that the asymptotic
// series is more accurate than the direct evaluation.
const LOG_NDTR_ASYMPTOTIC: f64 = -20.0;

/// `log Φ(x)`, finite for every finite `x`.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if x > 6.0 {
        // Φ(x) = 1 - Φ(-x), and Φ(-x) is tiny.
        return (-normal_cdf(-x)).ln_1p();
    }
    if x > LOG_NDTR_ASYMPTOTIC {
        return normal_cdf(x).ln();
    }
    // Φ(x) = φ(x)/(-x) · (1 - 1/x² + 3/x⁴ - 15/x⁶ + 105/x⁸ - 945/x¹⁰ ...)
    let x2 = x * x;
    let inv = 1.0 / x2;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=8 {
        term *= -((2 * k - 1) as f64) * inv;
        sum += term;
    }
    log_normal_pdf(x) - (-x).ln() + sum.ln()
}

/// Inverse Mills ratio `φ(x) / Φ(x)`, finite for every finite `x`.
///
/// Behaves like `-x` as `x → -∞` and decays to zero as `x → +∞`.
pub fn inverse_mills(x: f64) -> f64 {
    if x < LOG_NDTR_ASYMPTOTIC {
        // φ/Φ = -x / (1 - 1/x² + 3/x⁴ - ...), same series as log_normal_cdf.
        let x2 = x * x;
        let inv = 1.0 / x2;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=8 {
            term *= -((2 * k - 1) as f64) * inv;
            sum += term;
        }
        return -x / sum;
    }
    (log_normal_pdf(x) - log_normal_cdf(x)).exp()
}

/// Shortest round-trip decimal form of `x`, in scientific notation when
/// the magnitude is tiny or huge.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

/// SplitMix64 finalizer; used to derive independent stream seeds from a
/// base seed and a stream index.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
