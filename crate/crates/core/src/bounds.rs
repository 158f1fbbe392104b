//! Closed-form kernel of the bound-optimal metric: threshold radius, the
//! zone-free probability, known-neighbor and exterior interference
//! expectations, and the narrow-knowledge constant `γ`.
//!
//! Geometry conventions: the probe sits at the origin, the candidate relay at
//! distance `d`, the routing zone has radius `r_a` around the probe and the
//! threshold zone radius `r_z` around the candidate. Exterior angles are
//! measured at the candidate, with `θ = 0` pointing away from the probe.

use std::f64::consts::PI;

use crate::channel::{log2_1p_ratio, path_gain_sq};
use crate::error::{invalid, Error, Result};
use crate::geometry::NetworkParams;
use crate::knowledge::LocalKnowledge;
use crate::quadrature::{integrate_pieces, Tolerance};
use crate::special::{elliptic_e_incomplete, gamma};

const ACOS_SLACK: f64 = 1e-9;

/// Below this fraction of `r_a²` for `r_a² − d²`, the integer-α closed forms
/// lose too many digits to cancellation and quadrature is used instead.
const CLOSED_FORM_MIN_GAP: f64 = 1e-3;

pub const QUADRATURE_TOL: Tolerance = Tolerance {
    abs: 1e-10,
    rel: 1e-10,
    max_panels: 10_000,
};

/// `r_z = √((α − 2) / (α π λ p_tx))`.
pub fn threshold_radius(params: &NetworkParams) -> Result<f64> {
    if !(params.alpha > 2.0) {
        return Err(invalid("alpha", format!("must be > 2, got {}", params.alpha)));
    }
    let density = params.lambda * params.p_tx;
    if !(density > 0.0) {
        return Err(invalid("p_tx", "transmitter density λ·p_tx must be positive"));
    }
    Ok(((params.alpha - 2.0) / (params.alpha * PI * density)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateGeometry {
    /// Probe-to-candidate distance.
    pub d: f64,
    pub r_a: f64,
    pub r_z: f64,
}

impl CandidateGeometry {
    pub fn new(d: f64, r_a: f64, r_z: f64) -> Result<Self> {
        if !(r_a > 0.0 && r_z > 0.0) {
            return Err(Error::Geometry(format!("radii must be positive (r_a={r_a}, r_z={r_z})")));
        }
        if !(d >= 0.0 && d <= r_a * (1.0 + 1e-12)) {
            return Err(Error::Geometry(format!("candidate distance {d} outside [0, r_a={r_a}]")));
        }
        Ok(Self { d: d.min(r_a), r_a, r_z })
    }

    pub fn for_params(d: f64, params: &NetworkParams) -> Result<Self> {
        Self::new(d, params.r_a, threshold_radius(params)?)
    }

    /// Threshold zone entirely inside the routing zone.
    pub fn is_interior(&self) -> bool {
        self.r_z + self.d <= self.r_a
    }

    /// Threshold zone containing the entire routing zone.
    pub fn contains_zone(&self) -> bool {
        self.r_z >= self.r_a + self.d
    }
}

/// Half-angle, seen from the candidate, of the exterior cone hidden behind the
/// threshold zone. Zero when the threshold zone lies inside the routing zone;
/// `π` when it swallows the routing zone.
pub fn theta_s(geom: &CandidateGeometry) -> Result<f64> {
    if geom.is_interior() {
        return Ok(0.0);
    }
    if geom.contains_zone() {
        return Ok(PI);
    }
    let c = (geom.r_a * geom.r_a - geom.r_z * geom.r_z - geom.d * geom.d) / (2.0 * geom.r_z * geom.d);
    if !(c >= -1.0 - ACOS_SLACK && c <= 1.0 + ACOS_SLACK) {
        return Err(Error::Geometry(format!(
            "intersection cosine {c} out of range for {geom:?}"
        )));
    }
    Ok(c.clamp(-1.0, 1.0).acos())
}

/// Area of the threshold zone lying outside the routing zone, `|A_Z \ A_R|`.
/// Only meaningful when the threshold zone crosses the routing-zone boundary.
pub fn b_t_area(geom: &CandidateGeometry) -> Result<f64> {
    if geom.is_interior() {
        return Err(Error::Geometry(
            "outside-area requested for a threshold zone inside the routing zone".into(),
        ));
    }
    let CandidateGeometry { d, r_a, r_z } = *geom;
    let lens = if geom.contains_zone() {
        PI * r_a * r_a
    } else {
        let ca = ((d * d + r_a * r_a - r_z * r_z) / (2.0 * d * r_a)).clamp(-1.0, 1.0);
        let cz = ((d * d + r_z * r_z - r_a * r_a) / (2.0 * d * r_z)).clamp(-1.0, 1.0);
        let k = ((-d + r_a + r_z) * (d + r_a - r_z) * (d - r_a + r_z) * (d + r_a + r_z)).max(0.0);
        r_a * r_a * ca.acos() + r_z * r_z * cz.acos() - 0.5 * k.sqrt()
    };
    Ok((PI * r_z * r_z - lens).max(0.0))
}

/// The chord-integral expression for the outside area exactly as it is usually
/// printed (`x` read as `x₀`). It evaluates to `π(r_z² − r_a²)/2 − |A_Z \ A_R|`;
/// kept only to cross-check [`b_t_area`].
pub fn b_t_area_printed(geom: &CandidateGeometry) -> f64 {
    let CandidateGeometry { d, r_a, r_z } = *geom;
    let x0 = (r_a * r_a + d * d - r_z * r_z) / (2.0 * d);
    let hz = (r_z * r_z - (d - x0) * (d - x0)).max(0.0).sqrt();
    let ha = (r_a * r_a - x0 * x0).max(0.0).sqrt();
    r_z * r_z * (x0 - d).atan2(hz) + (x0 - d) * hz - r_a * r_a * x0.atan2(ha) - x0 * ha
}

/// Known neighbors (other than the candidate) within `r_z` of the candidate.
pub fn zone_count(candidate: usize, knowledge: &LocalKnowledge, r_z: f64) -> usize {
    let r_z2 = r_z * r_z;
    (0..knowledge.len())
        .filter(|&l| l != candidate && knowledge.pair_dist_sq(candidate, l) <= r_z2)
        .count()
}

/// Probability that no transmitter lies inside the candidate's threshold zone,
/// given the known neighbor positions.
pub fn p_zone_free(candidate: usize, knowledge: &LocalKnowledge, params: &NetworkParams) -> Result<f64> {
    knowledge.check(candidate)?;
    let r_z = threshold_radius(params)?;
    let geom = CandidateGeometry::new(knowledge.distance(candidate), params.r_a, r_z)?;
    let n_z = zone_count(candidate, knowledge, r_z);
    let known = (1.0 - params.p_tx).powi(n_z as i32);
    if geom.is_interior() {
        Ok(known)
    } else {
        Ok((-params.lambda * params.p_tx * b_t_area(&geom)?).exp() * known)
    }
}

/// Expected interference at the candidate from known neighbors outside its
/// threshold zone.
pub fn jbar1(candidate: usize, knowledge: &LocalKnowledge, params: &NetworkParams) -> Result<f64> {
    knowledge.check(candidate)?;
    let r_z2 = threshold_radius(params)?.powi(2);
    let sum: f64 = (0..knowledge.len())
        .filter(|&l| l != candidate)
        .map(|l| knowledge.pair_dist_sq(candidate, l))
        .filter(|&d2| d2 > r_z2)
        .map(|d2| path_gain_sq(d2, params.alpha))
        .sum();
    Ok(params.p_tx * params.rho * sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Jbar2Method {
    /// Closed form for α ∈ {3, 4} away from the boundary singularity,
    /// quadrature otherwise.
    #[default]
    Auto,
    Quadrature,
    ClosedForm,
}

/// Distance from the candidate to the routing-zone boundary along `θ`.
#[inline]
fn boundary_distance(theta: f64, d: f64, r_a: f64) -> f64 {
    let s = theta.sin();
    -d * theta.cos() + (r_a * r_a - d * d * s * s).max(0.0).sqrt()
}

/// `∫_{θ_s}^{2π−θ_s} r₀(θ)^{2−α} dθ` by adaptive quadrature.
pub fn exterior_angular_integral(geom: &CandidateGeometry, theta_s: f64, alpha: f64) -> Result<f64> {
    if theta_s >= PI {
        return Ok(0.0);
    }
    let (d, r_a) = (geom.d, geom.r_a);
    let expo = 2.0 - alpha;
    // symmetric about θ = π
    let half = integrate_pieces(
        |t| boundary_distance(t, d, r_a).powf(expo),
        &[theta_s, 0.5 * (theta_s + PI), PI],
        QUADRATURE_TOL,
    )?;
    Ok(2.0 * half.value)
}

/// Exterior cone term: interference from beyond the threshold zone inside the
/// hidden cone `|θ| < θ_s`.
pub fn jbar21(geom: &CandidateGeometry, theta_s: f64, params: &NetworkParams) -> f64 {
    let a = params.alpha;
    2.0 * theta_s * params.rho * params.lambda * params.p_tx * geom.r_z.powf(2.0 - a) / (a - 2.0)
}

/// Exterior term beyond the routing-zone boundary, by quadrature.
pub fn jbar22_quadrature(geom: &CandidateGeometry, theta_s: f64, params: &NetworkParams) -> Result<f64> {
    let scale = params.rho * params.lambda * params.p_tx / (params.alpha - 2.0);
    Ok(scale * exterior_angular_integral(geom, theta_s, params.alpha)?)
}

/// Closed form of the boundary term for `α = 3` (incomplete elliptic integrals,
/// parameter `m = d²/r_a²`).
pub fn jbar22_alpha3(geom: &CandidateGeometry, theta_s: f64, params: &NetworkParams) -> Result<f64> {
    let CandidateGeometry { d, r_a, .. } = *geom;
    let (d2, a2) = (d * d, r_a * r_a);
    let m = d2 / a2;
    let c2 = (2.0 * theta_s).cos();
    let e_diff = elliptic_e_incomplete(2.0 * PI - theta_s, m)? - elliptic_e_incomplete(theta_s, m)?;
    let gap = a2 - d2;
    let root_ratio = (d2 * c2 / a2 - m + 2.0).sqrt() / (2.0 * a2 + d2 * c2 - d2).sqrt();
    let bracket = -2.0 * d * theta_s.sin() / gap + e_diff * a2 * root_ratio / gap;
    Ok(params.rho * params.lambda * params.p_tx * bracket)
}

/// Closed form of the boundary term for `α = 4`.
///
/// The arctangent coefficient is `4r_a²`; this is what the direct
/// antiderivative of `r₀(θ)^{-2}` gives and what quadrature confirms.
pub fn jbar22_alpha4(geom: &CandidateGeometry, theta_s: f64, params: &NetworkParams) -> f64 {
    let CandidateGeometry { d, r_a, .. } = *geom;
    let (d2, a2) = (d * d, r_a * r_a);
    let (s, c2) = (theta_s.sin(), (2.0 * theta_s).cos());
    let inner = 2.0 * a2 + d2 * c2 - d2;
    let bracket = -2.0 * d * s * (4.0 * a2 + 2.0 * d2 * c2 - 2.0 * d2).max(0.0).sqrt()
        - 4.0 * a2 * (2f64.sqrt() * d * s).atan2(inner.max(0.0).sqrt())
        + 4.0 * a2 * (PI - theta_s)
        - 2.0 * d2 * (2.0 * theta_s).sin();
    params.rho * params.lambda * params.p_tx * bracket / (4.0 * (a2 - d2).powi(2))
}

/// Expected interference at the candidate from unknown nodes outside both the
/// threshold zone and the routing zone.
pub fn jbar2(geom: &CandidateGeometry, params: &NetworkParams, method: Jbar2Method) -> Result<f64> {
    if !(params.alpha > 2.0) {
        return Err(invalid("alpha", format!("must be > 2, got {}", params.alpha)));
    }
    let ts = theta_s(geom)?;
    let j21 = jbar21(geom, ts, params);
    let integer_alpha = params.alpha == 3.0 || params.alpha == 4.0;
    let well_separated = geom.r_a * geom.r_a - geom.d * geom.d > CLOSED_FORM_MIN_GAP * geom.r_a * geom.r_a;
    let use_closed = match method {
        Jbar2Method::Quadrature => false,
        Jbar2Method::Auto => integer_alpha && well_separated,
        Jbar2Method::ClosedForm => {
            if !integer_alpha {
                return Err(invalid("alpha", "closed form available only for α = 3 and α = 4"));
            }
            true
        }
    };
    let j22 = if use_closed && ts >= PI {
        0.0
    } else if use_closed && params.alpha == 3.0 {
        jbar22_alpha3(geom, ts, params)?
    } else if use_closed {
        jbar22_alpha4(geom, ts, params)
    } else {
        jbar22_quadrature(geom, ts, params)?
    };
    Ok(j21 + j22)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerms {
    pub p_z: f64,
    pub j1: f64,
    pub j2: f64,
    pub theta_s: f64,
}

pub fn bound_terms(candidate: usize, knowledge: &LocalKnowledge, params: &NetworkParams) -> Result<BoundTerms> {
    knowledge.check(candidate)?;
    let geom = CandidateGeometry::for_params(knowledge.distance(candidate), params)?;
    Ok(BoundTerms {
        p_z: p_zone_free(candidate, knowledge, params)?,
        j1: jbar1(candidate, knowledge, params)?,
        j2: jbar2(&geom, params, Jbar2Method::Auto)?,
        theta_s: theta_s(&geom)?,
    })
}

/// `p_Z · r · log₂(1 + S / (J̄₁ + J̄₂ + σ²))` from precomputed terms.
pub fn bound_value(terms: &BoundTerms, r: f64, s: f64, sigma_v2: f64) -> f64 {
    terms.p_z * r * log2_1p_ratio(s, terms.j1 + terms.j2 + sigma_v2)
}

/// Lower bound on `r · G(i, M₀)` using only local knowledge; this is the
/// bound-optimal routing metric.
pub fn bound_g(candidate: usize, knowledge: &LocalKnowledge, params: &NetworkParams) -> Result<f64> {
    let terms = bound_terms(candidate, knowledge, params)?;
    Ok(bound_value(
        &terms,
        knowledge.distance(candidate),
        knowledge.signal(candidate),
        params.sigma_v2,
    ))
}

/// `γ = ρ (2/α) (α π λ p_tx Γ(1 + 2/α) / (α − 2))^{α/2}`.
pub fn gamma_const(params: &NetworkParams) -> Result<f64> {
    let a = params.alpha;
    if !(a > 2.0) {
        return Err(invalid("alpha", format!("must be > 2, got {a}")));
    }
    let base = a * PI * params.lambda * params.p_tx * gamma(1.0 + 2.0 / a) / (a - 2.0);
    Ok(params.rho * (2.0 / a) * base.powf(0.5 * a))
}
