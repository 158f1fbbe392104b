//! Special functions used by the closed-form interference kernels.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{invalid, Result};
use crate::quadrature::{integrate, Tolerance};

const ELLIPTIC_TOL: Tolerance = Tolerance {
    abs: 1e-14,
    rel: 1e-14,
    max_panels: 2_000,
};

fn e_quarter(phi: f64, m: f64) -> Result<f64> {
    debug_assert!((0.0..=FRAC_PI_2 + 1e-15).contains(&phi));
    Ok(integrate(
        |t: f64| {
            let s = t.sin();
            (1.0 - m * s * s).max(0.0).sqrt()
        },
        0.0,
        phi,
        ELLIPTIC_TOL,
    )?
    .value)
}

/// Incomplete elliptic integral of the second kind,
/// `E(φ|m) = ∫₀^φ √(1 − m sin²θ) dθ`, in the parameter convention `m = k²`.
///
/// Defined for any real `φ` through `E(φ + π|m) = E(φ|m) + 2E(m)` and oddness.
pub fn elliptic_e_incomplete(phi: f64, m: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&m) {
        return Err(invalid("m", format!("elliptic parameter must lie in [0, 1], got {m}")));
    }
    if !phi.is_finite() {
        return Err(invalid("phi", format!("must be finite, got {phi}")));
    }
    if m == 0.0 {
        return Ok(phi);
    }
    let sign = phi.signum();
    let phi = phi.abs();
    let periods = (phi / PI).round();
    let rest = phi - periods * PI;
    let complete = if periods != 0.0 { e_quarter(FRAC_PI_2, m)? } else { 0.0 };
    let partial = if rest >= 0.0 {
        e_quarter(rest, m)?
    } else {
        -e_quarter(-rest, m)?
    };
    Ok(sign * (2.0 * periods * complete + partial))
}

/// `Γ(x)` for positive arguments (Lanczos approximation).
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}
