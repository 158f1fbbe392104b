//! Rayleigh fading, path loss, SINR and per-slot rate.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};

/// Fading power gain `|h|²` of a unit-variance complex Gaussian channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingDraw {
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub s: f64,
    pub j: f64,
    pub sigma_v2: f64,
}

/// `|h|²` is exponential with unit mean, so it is drawn directly.
pub fn sample_fading<R: Rng + ?Sized>(rng: &mut R) -> FadingDraw {
    loop {
        let w: f64 = Exp1.sample(rng);
        if w > 0.0 {
            return FadingDraw { w };
        }
    }
}

/// `r^-α` from a squared distance, with fast paths for the common exponents.
#[inline]
pub fn path_gain_sq(dist_sq: f64, alpha: f64) -> f64 {
    if alpha == 4.0 {
        1.0 / (dist_sq * dist_sq)
    } else if alpha == 3.0 {
        1.0 / (dist_sq * dist_sq.sqrt())
    } else {
        dist_sq.powf(-0.5 * alpha)
    }
}

/// `ρ r^-α w`.
pub fn signal_power(rho: f64, r: f64, alpha: f64, w: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::ZeroDistance(r));
    }
    Ok(rho * r.powf(-alpha) * w)
}

/// `ρ Σ r^-α w` over the given interferers.
pub fn aggregate_interference(interferers: &[(f64, f64)], rho: f64, alpha: f64) -> Result<f64> {
    let mut sum = 0.0;
    for &(r, w) in interferers {
        if !(r > 0.0) {
            return Err(Error::ZeroDistance(r));
        }
        sum += r.powf(-alpha) * w;
    }
    Ok(rho * sum)
}

pub fn sinr(budget: LinkBudget) -> Result<f64> {
    let den = budget.j + budget.sigma_v2;
    if !(den > 0.0) {
        return Err(Error::ZeroDenominator);
    }
    Ok(budget.s / den)
}

/// Ergodic rate `B log₂(1 + SINR)`.
pub fn rate(bandwidth: f64, sinr_value: f64) -> Result<f64> {
    if !(sinr_value >= 0.0) {
        return Err(Error::NegativeSinr(sinr_value));
    }
    Ok(bandwidth * sinr_value.ln_1p() / std::f64::consts::LN_2)
}

/// `log₂(1 + s / (j + σ²))` without the error plumbing, for inner loops.
/// A zero denominator with positive signal gives `+∞`.
#[inline]
pub fn log2_1p_ratio(s: f64, den: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        (s / den).ln_1p() * std::f64::consts::LOG2_E
    }
}
