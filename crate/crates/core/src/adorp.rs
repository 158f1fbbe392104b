//! Single-slot rate-progress density estimation and parameter sweeps.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{log2_1p_ratio, path_gain_sq};
use crate::error::{invalid, Error, Result};
use crate::field::{ExteriorDraw, ExteriorField};
use crate::geometry::{sample_ppp_annulus, NetworkParams, Node};
use crate::knowledge::LocalKnowledge;
use crate::qtable::{build_q_table, QGridConfig, QTable};
use crate::rng::{derive_key, substream, tag};
use crate::schemes::{select_relay, evaluate, SchemeContext, SchemeId, SoConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub realizations: usize,
    pub so_samples: usize,
    /// Early elimination of clearly beaten candidates in the SO inner loop.
    pub so_race: bool,
    /// `None` uses the explicit field plus its exact mean tail; `Some(b)`
    /// truncates the field at the radius where the dropped mean is `b`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_budget: Option<f64>,
    pub qtable_samples: usize,
    pub qtable_points: usize,
    /// Realizations spent tuning the threshold scheme at each point.
    pub tune_realizations: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            realizations: 20_000,
            so_samples: 500,
            so_race: true,
            truncation_budget: None,
            qtable_samples: 100_000,
            qtable_points: 256,
            tune_realizations: 5_000,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(invalid("realizations", "must be >= 1"));
        }
        if self.so_samples == 0 {
            return Err(invalid("so_samples", "must be >= 1"));
        }
        if let Some(b) = self.truncation_budget {
            if !(b > 0.0 && b < 1.0) {
                return Err(invalid("truncation_budget", format!("must lie in (0, 1), got {b}")));
            }
        }
        if self.qtable_samples < 2 || self.qtable_points < 2 {
            return Err(invalid("qtable", "need at least 2 samples and 2 points"));
        }
        Ok(())
    }

    pub fn field(&self, params: &NetworkParams) -> Result<ExteriorField> {
        match self.truncation_budget {
            None => Ok(ExteriorField::standard(params)),
            Some(b) => ExteriorField::truncated(params, b),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdorpEstimate {
    pub scheme: SchemeId,
    pub params: NetworkParams,
    /// Normalized density `ADORP / B`.
    pub value: f64,
    pub stderr: f64,
    pub realizations: usize,
    pub seed: u64,
    /// Threshold used by the threshold scheme.
    pub threshold: Option<f64>,
}

/// Per-scheme extras: the q-table for NSO and the power threshold.
#[derive(Debug, Clone, Default)]
pub struct SchemeInputs {
    pub qtable: Option<QTable>,
    pub threshold: f64,
}

struct Realization {
    knowledge: LocalKnowledge,
    active: Vec<bool>,
    exterior: ExteriorDraw,
}

fn draw_realization(params: &NetworkParams, field: &ExteriorField, seed: u64, k: u64) -> Result<Realization> {
    let mut rng = substream(seed, &[tag::REALIZATION, k]);
    let pts = sample_ppp_annulus(params.lambda, 0.0, params.r_a, &mut rng);
    let nodes: Vec<Node> = pts
        .into_iter()
        .map(|pos| Node { pos, fading: Exp1.sample(&mut rng) })
        .collect();
    let knowledge = LocalKnowledge::new(&nodes, params)?;
    let mut truth = substream(seed, &[tag::TRUTH, k]);
    let active = (0..knowledge.len()).map(|_| truth.random::<f64>() < params.p_tx).collect();
    let mut exterior = ExteriorDraw::default();
    exterior.resample(field, params, &mut truth);
    Ok(Realization { knowledge, active, exterior })
}

/// Realized `r · log₂(1 + SINR)` at relay `i`; fading comes from a stream
/// keyed by the relay so every scheme picking `i` sees the same channel.
fn realized_progress(
    real: &Realization,
    i: usize,
    params: &NetworkParams,
    field: &ExteriorField,
    seed: u64,
    k: u64,
) -> Result<f64> {
    let kn = &real.knowledge;
    let mut rng = substream(seed, &[tag::FADING, k, i as u64]);
    let mut known = 0.0;
    for (l, &on) in real.active.iter().enumerate() {
        let w: f64 = Exp1.sample(&mut rng);
        if on && l != i {
            known += w * path_gain_sq(kn.pair_dist_sq(i, l), params.alpha);
        }
    }
    let pos = kn.node(i).pos;
    let j = params.rho * known + real.exterior.interference_at(&pos, params, &mut rng) + field.tail_mean(kn.distance(i), params)?;
    Ok(kn.distance(i) * log2_1p_ratio(kn.signal(i), j + params.sigma_v2))
}

fn summarize(samples: &[f64], params: &NetworkParams) -> (f64, f64) {
    let n = samples.len() as f64;
    let mut sum = 0.0;
    for v in samples {
        sum += v;
    }
    let mean = sum / n;
    let mut ss = 0.0;
    for v in samples {
        ss += (v - mean) * (v - mean);
    }
    let se = if samples.len() > 1 { (ss / (n - 1.0) / n).sqrt() } else { 0.0 };
    let scale = params.lambda * params.p_tx * (1.0 - params.p_tx);
    (scale * mean, scale * se)
}

/// Per-realization progress for several routing rules sharing every random
/// draw. Each rule maps a knowledge set (and an SO stream) to a relay.
fn progress_matrix<F>(
    rules: usize,
    params: &NetworkParams,
    field: &ExteriorField,
    realizations: usize,
    seed: u64,
    choose: F,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&LocalKnowledge, u64) -> Result<Vec<Option<usize>>> + Sync,
{
    let rows: Vec<Result<Vec<f64>>> = (0..realizations as u64)
        .into_par_iter()
        .map(|k| {
            let real = draw_realization(params, field, seed, k)?;
            if real.knowledge.is_empty() {
                return Ok(vec![0.0; rules]);
            }
            let picks = choose(&real.knowledge, k)?;
            let mut cache: Vec<Option<f64>> = vec![None; real.knowledge.len()];
            picks
                .into_iter()
                .map(|pick| match pick {
                    None => Ok(0.0),
                    Some(i) => {
                        if let Some(v) = cache[i] {
                            return Ok(v);
                        }
                        let v = realized_progress(&real, i, params, field, seed, k)?;
                        cache[i] = Some(v);
                        Ok(v)
                    }
                })
                .collect()
        })
        .collect();
    let mut columns = vec![Vec::with_capacity(realizations); rules];
    for row in rows {
        for (c, v) in columns.iter_mut().zip(row?) {
            c.push(v);
        }
    }
    Ok(columns)
}

fn trivial_prefactor(params: &NetworkParams) -> bool {
    params.p_tx <= 0.0 || params.p_tx >= 1.0 || params.lambda <= 0.0
}

/// Estimates several schemes on common random numbers.
pub fn estimate_schemes(
    schemes: &[SchemeId],
    params: &NetworkParams,
    inputs: &SchemeInputs,
    mc: &McConfig,
    seed: u64,
) -> Result<Vec<AdorpEstimate>> {
    mc.validate()?;
    let estimate = |scheme: SchemeId, value: f64, stderr: f64| AdorpEstimate {
        scheme,
        params: *params,
        value,
        stderr,
        realizations: mc.realizations,
        seed,
        threshold: (scheme == SchemeId::Threshold).then_some(inputs.threshold),
    };
    if trivial_prefactor(params) {
        return Ok(schemes.iter().map(|&s| estimate(s, 0.0, 0.0)).collect());
    }
    params.validate()?;
    let field = mc.field(params)?;
    let ctx = SchemeContext {
        params: *params,
        so: SoConfig {
            samples: mc.so_samples,
            field,
            race: mc.so_race,
        },
        qtable: inputs.qtable.as_ref(),
        threshold: inputs.threshold,
    };
    if schemes.contains(&SchemeId::Nso) {
        let table = ctx.qtable.ok_or_else(|| invalid("qtable", "NSO needs a q-table"))?;
        table.check_params(params)?;
    }
    let columns = progress_matrix(schemes.len(), params, &field, mc.realizations, seed, |kn, k| {
        let mut rng = substream(seed, &[tag::SO_INNER, k]);
        schemes
            .iter()
            .map(|&s| Ok(select_relay(&evaluate(s, kn, &ctx, &mut rng)?)))
            .collect()
    })?;
    Ok(schemes
        .iter()
        .zip(&columns)
        .map(|(&s, col)| {
            let (v, se) = summarize(col, params);
            estimate(s, v, se)
        })
        .collect())
}

pub fn estimate_adorp(
    scheme: SchemeId,
    params: &NetworkParams,
    inputs: &SchemeInputs,
    mc: &McConfig,
    seed: u64,
) -> Result<AdorpEstimate> {
    Ok(estimate_schemes(&[scheme], params, inputs, mc, seed)?.remove(0))
}

/// Threshold scheme at every grid threshold, on common random numbers.
pub fn threshold_grid_estimates(
    params: &NetworkParams,
    grid: &[f64],
    mc: &McConfig,
    seed: u64,
) -> Result<Vec<AdorpEstimate>> {
    mc.validate()?;
    if grid.is_empty() {
        return Err(invalid("grid", "threshold grid is empty"));
    }
    if let Some(t) = grid.iter().find(|t| !(**t >= 0.0)) {
        return Err(invalid("grid", format!("thresholds must be >= 0, got {t}")));
    }
    let make = |t: f64, value: f64, stderr: f64| AdorpEstimate {
        scheme: SchemeId::Threshold,
        params: *params,
        value,
        stderr,
        realizations: mc.realizations,
        seed,
        threshold: Some(t),
    };
    if trivial_prefactor(params) {
        return Ok(grid.iter().map(|&t| make(t, 0.0, 0.0)).collect());
    }
    params.validate()?;
    let field = mc.field(params)?;
    let columns = progress_matrix(grid.len(), params, &field, mc.realizations, seed, |kn, _| {
        Ok(grid
            .iter()
            .map(|&t| {
                let best = (0..kn.len())
                    .filter(|&i| kn.signal(i) >= t)
                    .max_by(|&a, &b| kn.distance(a).total_cmp(&kn.distance(b)).then(b.cmp(&a)));
                best
            })
            .collect())
    })?;
    Ok(grid
        .iter()
        .zip(&columns)
        .map(|(&t, col)| {
            let (v, se) = summarize(col, params);
            make(t, v, se)
        })
        .collect())
}

/// The grid threshold maximizing the threshold scheme's estimate.
pub fn tune_threshold(params: &NetworkParams, grid: &[f64], mc: &McConfig, seed: u64) -> Result<(f64, Vec<AdorpEstimate>)> {
    let all = threshold_grid_estimates(params, grid, mc, seed)?;
    let best = all
        .iter()
        .fold(None::<&AdorpEstimate>, |acc, e| match acc {
            Some(b) if b.value >= e.value => Some(b),
            _ => Some(e),
        })
        .and_then(|e| e.threshold)
        .unwrap_or(grid[0]);
    Ok((best, all))
}

/// Log-spaced thresholds around the signal power at the zone edge.
pub fn default_threshold_grid(params: &NetworkParams) -> Vec<f64> {
    let reference = params.rho * params.r_a.powf(-params.alpha);
    (0..=24).map(|k| reference * 10f64.powf(-2.0 + k as f64 * 0.25)).collect()
}

/// `max · (1 − e^{−N̄_A})` at every grid point.
pub fn upper_bound_curve(max_so_adorp: f64, n_bar_a_grid: &[f64]) -> Vec<f64> {
    n_bar_a_grid.iter().map(|n| max_so_adorp * -(-n).exp_m1()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    PTx,
    NBarA,
    /// Receiver SNR at unit distance, `ρ/σ²`, in dB.
    Snr,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::PTx => "p_tx",
            SweepAxis::NBarA => "n_bar_a",
            SweepAxis::Snr => "snr",
        }
    }

    pub fn apply(self, template: &NetworkParams, x: f64) -> NetworkParams {
        match self {
            SweepAxis::PTx => NetworkParams { p_tx: x, ..*template },
            SweepAxis::NBarA => template.with_mean_zone_nodes(x),
            SweepAxis::Snr => NetworkParams {
                sigma_v2: template.rho * 10f64.powf(-x / 10.0),
                ..*template
            },
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [SweepAxis::PTx, SweepAxis::NBarA, SweepAxis::Snr]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| invalid("axis", format!("unknown sweep axis {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub abscissa: f64,
    pub estimates: Vec<AdorpEstimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn estimate(&self, point: usize, scheme: SchemeId) -> Option<&AdorpEstimate> {
        self.points.get(point)?.estimates.iter().find(|e| e.scheme == scheme)
    }

    pub fn series(&self, scheme: SchemeId) -> Vec<&AdorpEstimate> {
        self.points
            .iter()
            .filter_map(|p| p.estimates.iter().find(|e| e.scheme == scheme))
            .collect()
    }
}

/// Builds whatever a scheme set needs at one parameter point: a q-table for
/// NSO and a tuned threshold for the threshold scheme.
pub fn prepare_inputs(schemes: &[SchemeId], params: &NetworkParams, mc: &McConfig, seed: u64) -> Result<SchemeInputs> {
    let mut inputs = SchemeInputs::default();
    if trivial_prefactor(params) {
        return Ok(inputs);
    }
    if schemes.contains(&SchemeId::Nso) {
        let grid = QGridConfig {
            points: mc.qtable_points,
            ..QGridConfig::standard(params)
        };
        let mut rng = substream(seed, &[tag::QTABLE]);
        inputs.qtable = Some(build_q_table(params, &grid, mc.qtable_samples, &mc.field(params)?, &mut rng)?);
    }
    if schemes.contains(&SchemeId::Threshold) {
        let tune = McConfig {
            realizations: mc.tune_realizations.max(1),
            ..*mc
        };
        let grid = default_threshold_grid(params);
        inputs.threshold = tune_threshold(params, &grid, &tune, derive_key(seed, &[tag::TUNE]))?.0;
    }
    Ok(inputs)
}

pub fn sweep(
    axis: SweepAxis,
    grid: &[f64],
    schemes: &[SchemeId],
    template: &NetworkParams,
    mc: &McConfig,
    seed: u64,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(invalid("grid", "sweep grid is empty"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("grid", "sweep abscissae must be strictly increasing"));
    }
    let mut points = Vec::with_capacity(grid.len());
    for (k, &x) in grid.iter().enumerate() {
        let params = axis.apply(template, x);
        let point_seed = derive_key(seed, &[k as u64]);
        let inputs = prepare_inputs(schemes, &params, mc, point_seed)?;
        let estimates = estimate_schemes(schemes, &params, &inputs, mc, point_seed)?;
        points.push(SweepPoint { abscissa: x, estimates });
    }
    Ok(SweepResult { axis, points })
}
