//! The interference field of unknown nodes beyond the routing zone.
//!
//! Unknown transmitters are drawn explicitly out to `explicit_radius`. Beyond
//! that radius the field is replaced by its exact expectation at the receiver
//! position (when `mean_tail` is set) or dropped (pure truncation).

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::bounds::{exterior_angular_integral, CandidateGeometry};
use crate::channel::path_gain_sq;
use crate::error::{invalid, Result};
use crate::geometry::{sample_ppp_annulus_into, truncation_radius, NetworkParams, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExteriorField {
    pub explicit_radius: f64,
    pub mean_tail: bool,
}

impl ExteriorField {
    /// Explicit nodes out to `r_a + max(r_a, 4/√λ)`, exact mean beyond.
    pub fn standard(params: &NetworkParams) -> Self {
        let reach = params.r_a.max(4.0 / params.lambda.sqrt());
        Self {
            explicit_radius: params.r_a + reach,
            mean_tail: true,
        }
    }

    /// Pure truncation at the radius meeting the relative `budget`.
    pub fn truncated(params: &NetworkParams, budget: f64) -> Result<Self> {
        Ok(Self {
            explicit_radius: truncation_radius(params, budget)?.max(params.r_a),
            mean_tail: false,
        })
    }

    pub fn validate(&self, params: &NetworkParams) -> Result<()> {
        if !(self.explicit_radius >= params.r_a && self.explicit_radius.is_finite()) {
            return Err(invalid(
                "explicit_radius",
                format!("must be finite and >= r_a = {}, got {}", params.r_a, self.explicit_radius),
            ));
        }
        Ok(())
    }

    /// Expected interference at distance `d` from the origin from transmitters
    /// (density `λ p_tx`) outside the disk of radius `explicit_radius`.
    pub fn tail_mean(&self, d: f64, params: &NetworkParams) -> Result<f64> {
        if !self.mean_tail {
            return Ok(0.0);
        }
        let big_r = self.explicit_radius;
        let scale = params.rho * params.lambda * params.p_tx / (params.alpha - 2.0);
        if params.alpha == 4.0 {
            let gap = big_r * big_r - d * d;
            return Ok(scale * 2.0 * PI * big_r * big_r / (gap * gap));
        }
        if d == 0.0 {
            return Ok(scale * 2.0 * PI * big_r.powf(2.0 - params.alpha));
        }
        // any r_z small enough to keep the geometry interior
        let geom = CandidateGeometry {
            d,
            r_a: big_r,
            r_z: (big_r - d).max(0.0) * 0.5,
        };
        Ok(scale * exterior_angular_integral(&geom, 0.0, params.alpha)?)
    }
}

/// One draw of the transmitting unknown nodes in `(r_a, explicit_radius]`.
#[derive(Debug, Clone, Default)]
pub struct ExteriorDraw {
    pub transmitters: Vec<Point2>,
}

impl ExteriorDraw {
    pub fn resample<R: Rng + ?Sized>(&mut self, field: &ExteriorField, params: &NetworkParams, rng: &mut R) {
        self.transmitters.clear();
        sample_ppp_annulus_into(
            params.lambda * params.p_tx,
            params.r_a,
            field.explicit_radius,
            rng,
            &mut self.transmitters,
        );
    }

    /// Faded interference at `at`, fresh fading per transmitter.
    pub fn interference_at<R: Rng + ?Sized>(&self, at: &Point2, params: &NetworkParams, rng: &mut R) -> f64 {
        let mut sum = 0.0;
        for t in &self.transmitters {
            let w: f64 = Exp1.sample(rng);
            sum += w * path_gain_sq(t.dist_sq(at), params.alpha);
        }
        params.rho * sum
    }
}
