//! Poisson point processes, network parameters and the probe-centred window.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist_sq(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(&self, other: &Point2) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn sub(&self, other: &Point2) -> Point2 {
        Point2::new(self.x - other.x, self.y - other.y)
    }

    pub fn dot(&self, other: &Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }
}

/// Physical and MAC constants of the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkParams {
    /// Node density (nodes per unit area).
    pub lambda: f64,
    /// ALOHA transmit probability.
    pub p_tx: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Transmit power.
    pub rho: f64,
    /// Noise power.
    pub sigma_v2: f64,
    pub bandwidth: f64,
    /// Routing-zone radius.
    pub r_a: f64,
}

impl Default for NetworkParams {
    /// Interference-limited operating point: unit density, 30 nodes in the zone.
    fn default() -> Self {
        Self {
            lambda: 1.0,
            p_tx: 0.2,
            alpha: 4.0,
            rho: 1.0,
            sigma_v2: 0.0,
            bandwidth: 1.0,
            r_a: (30.0 / PI).sqrt(),
        }
    }
}

impl NetworkParams {
    pub fn validate(&self) -> Result<()> {
        fn finite(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite, got {v}")))
            }
        }
        finite("lambda", self.lambda)?;
        finite("p_tx", self.p_tx)?;
        finite("alpha", self.alpha)?;
        finite("rho", self.rho)?;
        finite("sigma_v2", self.sigma_v2)?;
        finite("bandwidth", self.bandwidth)?;
        finite("r_a", self.r_a)?;
        if self.lambda <= 0.0 {
            return Err(invalid("lambda", format!("must be > 0, got {}", self.lambda)));
        }
        if !(self.p_tx > 0.0 && self.p_tx < 1.0) {
            return Err(invalid("p_tx", format!("must lie in (0, 1), got {}", self.p_tx)));
        }
        if self.alpha <= 2.0 {
            return Err(invalid("alpha", format!("must be > 2, got {}", self.alpha)));
        }
        if self.rho <= 0.0 {
            return Err(invalid("rho", format!("must be > 0, got {}", self.rho)));
        }
        if self.sigma_v2 < 0.0 {
            return Err(invalid("sigma_v2", format!("must be >= 0, got {}", self.sigma_v2)));
        }
        if self.bandwidth <= 0.0 {
            return Err(invalid("bandwidth", format!("must be > 0, got {}", self.bandwidth)));
        }
        if self.r_a <= 0.0 {
            return Err(invalid("r_a", format!("must be > 0, got {}", self.r_a)));
        }
        Ok(())
    }

    /// Routing-zone radius giving `n_bar` expected nodes in the zone.
    pub fn radius_for_mean_nodes(lambda: f64, n_bar: f64) -> f64 {
        (n_bar / (lambda * PI)).sqrt()
    }

    pub fn with_mean_zone_nodes(mut self, n_bar: f64) -> Self {
        self.r_a = Self::radius_for_mean_nodes(self.lambda, n_bar);
        self
    }

    /// Stable textual identity, used to tie lookup tables to the parameters they
    /// were built for.
    pub fn fingerprint(&self) -> String {
        format!(
            "lambda={};p_tx={};alpha={};rho={};sigma_v2={};bandwidth={};r_a={}",
            self.lambda, self.p_tx, self.alpha, self.rho, self.sigma_v2, self.bandwidth, self.r_a
        )
    }
}

/// Expected number of nodes inside the routing zone, `λπr_a²`.
pub fn mean_nodes_in_zone(params: &NetworkParams) -> f64 {
    params.lambda * PI * params.r_a * params.r_a
}

/// Radius beyond which the expected interference of an ALOHA-thinned PPP is at
/// most `budget` times the expected interference from outside the threshold zone.
///
/// The ratio of the two is `(R / r_z)^(2-α)`, so `R = r_z · budget^(-1/(α-2))`.
pub fn truncation_radius(params: &NetworkParams, budget: f64) -> Result<f64> {
    if !(budget > 0.0 && budget < 1.0) {
        return Err(invalid("truncation_budget", format!("must lie in (0, 1), got {budget}")));
    }
    let r_z = crate::bounds::threshold_radius(params)?;
    Ok(r_z * budget.powf(-1.0 / (params.alpha - 2.0)))
}

/// Draws a homogeneous PPP of the given density restricted to the annulus
/// `r_inner < |x| <= r_outer` (a disk when `r_inner == 0`).
pub fn sample_ppp_annulus<R: Rng + ?Sized>(
    density: f64,
    r_inner: f64,
    r_outer: f64,
    rng: &mut R,
) -> Vec<Point2> {
    let mut out = Vec::new();
    sample_ppp_annulus_into(density, r_inner, r_outer, rng, &mut out);
    out
}

/// Like [`sample_ppp_annulus`] but appends to `out`, reusing its allocation.
pub fn sample_ppp_annulus_into<R: Rng + ?Sized>(
    density: f64,
    r_inner: f64,
    r_outer: f64,
    rng: &mut R,
    out: &mut Vec<Point2>,
) {
    debug_assert!(r_inner >= 0.0 && r_inner <= r_outer);
    let area = PI * (r_outer * r_outer - r_inner * r_inner);
    let mean = density * area;
    if !(mean > 0.0) {
        return;
    }
    let count = Poisson::new(mean).expect("positive finite mean").sample(rng) as usize;
    out.reserve(count);
    let (a2, b2) = (r_inner * r_inner, r_outer * r_outer);
    for _ in 0..count {
        // inverse CDF of the radius on the annulus
        let u: f64 = rng.random();
        let r = (a2 + u * (b2 - a2)).sqrt();
        let phi = 2.0 * PI * rng.random::<f64>();
        let (s, c) = phi.sin_cos();
        out.push(Point2::new(r * c, r * s));
    }
}

/// A node as seen from the probe: position and fading power gain of its link
/// to the probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub pos: Point2,
    pub fading: f64,
}

/// One realization of the network around a probe transmitter at the origin.
#[derive(Debug, Clone, Default)]
pub struct ProbeRealization {
    /// Nodes inside the routing zone: the probe's local knowledge.
    pub neighbors: Vec<Node>,
    /// Nodes in `(r_a, r_trunc]`, unknown to the probe.
    pub background: Vec<Node>,
    pub r_trunc: f64,
}

pub fn sample_probe_realization<R: Rng + ?Sized>(
    params: &NetworkParams,
    r_trunc: f64,
    rng: &mut R,
) -> Result<ProbeRealization> {
    if !(r_trunc >= params.r_a) {
        return Err(invalid(
            "r_trunc",
            format!("must be >= r_a = {}, got {r_trunc}", params.r_a),
        ));
    }
    let with_fading = |pts: Vec<Point2>, rng: &mut R| -> Vec<Node> {
        pts.into_iter()
            .map(|pos| Node {
                pos,
                fading: Exp1.sample(rng),
            })
            .collect()
    };
    let inner = sample_ppp_annulus(params.lambda, 0.0, params.r_a, rng);
    let neighbors = with_fading(inner, rng);
    let outer = sample_ppp_annulus(params.lambda, params.r_a, r_trunc, rng);
    let background = with_fading(outer, rng);
    Ok(ProbeRealization {
        neighbors,
        background,
        r_trunc,
    })
}
