//! Standard normal and Poisson special functions.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn std_normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - Φ(z)` without cancellation.
pub fn std_normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Inverse of the standard normal CDF, polished with two Newton steps.
pub fn std_normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let mut z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    for _ in 0..2 {
        let pdf = std_normal_pdf(z);
        if pdf <= 0.0 || !pdf.is_finite() {
            break;
        }
        // work in the tail closest to p for precision
        let err = if p < 0.5 {
            std_normal_cdf(z) - p
        } else {
            (1.0 - p) - std_normal_sf(z)
        };
        z -= err / pdf;
    }
    z
}

/// `P(X <= k)` for `X ~ Poisson(mean)`.
pub fn poisson_cdf(k: i64, mean: f64) -> f64 {
    if k < 0 {
        0.0
    } else {
        gamma_ur(k as f64 + 1.0, mean)
    }
}

/// `P(X >= k)` for `X ~ Poisson(mean)`.
pub fn poisson_sf_inclusive(k: i64, mean: f64) -> f64 {
    if k <= 0 {
        1.0
    } else {
        gamma_lr(k as f64, mean)
    }
}

pub fn poisson_pmf(k: i64, mean: f64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let k = k as f64;
    (k * mean.ln() - mean - ln_gamma(k + 1.0)).exp()
}
