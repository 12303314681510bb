//! Standard normal distribution function and its inverse.
//!
//! `erfc` comes from `libm` (a port of the FreeBSD msun routines, accurate to
//! within an ulp); the quantile starts from `statrs` and is polished with a
//! Newton step against that `cdf`.

use statrs::distribution::{ContinuousCDF, Normal};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `Phi(x)`, evaluated through `erfc` so the lower tail keeps full relative
/// precision.
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - Phi(x)`.
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `Phi^{-1}(p)` for `0 < p < 1`.
pub fn quantile(p: f64) -> f64 {
    // Normal::new(0, 1) cannot fail.
    let x = Normal::new(0.0, 1.0).unwrap().inverse_cdf(p);
    if !x.is_finite() {
        return x;
    }
    // one Newton step, on whichever tail keeps the residual precise
    if p < 0.5 {
        x - (cdf(x) - p) / pdf(x)
    } else {
        x + (sf(x) - (1.0 - p)) / pdf(x)
    }
}
