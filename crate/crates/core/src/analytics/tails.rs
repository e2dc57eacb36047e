//! Poisson tail probabilities and standard-normal quantiles.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::{gamma_lr, gamma_ur};

/// Exact-tail scores are clamped here where the tail mass underflows.
pub const Z_CLAMP: f64 = 40.0;

/// `P(X <= k)` for `X ~ Poisson(lambda)`, via the regularized upper gamma.
pub fn poisson_cdf(k: u64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    gamma_ur(k as f64 + 1.0, lambda)
}

/// `P(X >= k)` for `X ~ Poisson(lambda)`, via the regularized lower gamma.
pub fn poisson_sf(k: u64, lambda: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if lambda <= 0.0 {
        return 0.0;
    }
    gamma_lr(k as f64, lambda)
}

fn standard_normal() -> Normal {
    Normal::standard()
}

/// Standard normal quantile, `Phi^-1(p)`.
pub fn normal_quantile(p: f64) -> f64 {
    standard_normal().inverse_cdf(p)
}

/// Upper-tail standard normal probability.
pub fn normal_sf(z: f64) -> f64 {
    standard_normal().sf(z)
}

/// Two-sided critical value `z(alpha) = Phi^-1(1 - alpha/2)`.
pub fn two_sided_critical(alpha: f64) -> f64 {
    -normal_quantile(alpha / 2.0)
}

/// Signed score of `observed` under Poisson(`lambda`) from the exact tail.
///
/// The one-sided tail in the direction of the deviation is mapped to the
/// normal scale; a tail mass of one half or more scores zero.
pub fn exact_tail_z(observed: u64, lambda: f64) -> f64 {
    let x = observed as f64;
    if x > lambda {
        let p = poisson_sf(observed, lambda);
        if p >= 0.5 {
            0.0
        } else if p <= 0.0 {
            Z_CLAMP
        } else {
            (-normal_quantile(p)).min(Z_CLAMP)
        }
    } else if x < lambda {
        let p = poisson_cdf(observed, lambda);
        if p >= 0.5 {
            0.0
        } else if p <= 0.0 {
            -Z_CLAMP
        } else {
            normal_quantile(p).max(-Z_CLAMP)
        }
    } else {
        0.0
    }
}

/// Normal-approximation score with a 0.5 continuity correction.
pub fn continuity_z(observed: u64, lambda: f64) -> f64 {
    let d = observed as f64 - lambda;
    let shrunk = (d.abs() - 0.5).max(0.0);
    d.signum() * shrunk / lambda.sqrt()
}
