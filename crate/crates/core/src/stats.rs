//! Standard-normal helpers used throughout the crate.

use statrs::distribution::{ContinuousCDF, Normal};

const INV_SQRT_2PI: f64 = 0.39894228040143267794;

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() * INV_SQRT_2PI
}

/// Standard normal CDF via erfc for stable tails.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal survival function P(Z > x).
#[inline]
pub fn normal_sf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

/// Monte Carlo standard error of a proportion estimated from `m` replicates.
#[inline]
pub fn mc_standard_error(p: f64, m: usize) -> f64 {
    (p * (1.0 - p) / m as f64).sqrt()
}
