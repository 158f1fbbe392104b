//! Relay-selection schemes as routing metrics, and the shared argmax selector.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::bounds::{bound_g, gamma_const};
use crate::channel::{log2_1p_ratio, path_gain_sq};
use crate::error::{invalid, Error, Result};
use crate::field::{ExteriorDraw, ExteriorField};
use crate::geometry::NetworkParams;
use crate::knowledge::LocalKnowledge;
use crate::qtable::QTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SchemeId {
    So,
    Bo,
    Nso,
    Nbo,
    Nn,
    Threshold,
}

impl SchemeId {
    pub const ALL: [SchemeId; 6] = [
        SchemeId::So,
        SchemeId::Bo,
        SchemeId::Nso,
        SchemeId::Nbo,
        SchemeId::Threshold,
        SchemeId::Nn,
    ];
    pub const PROPOSED: [SchemeId; 4] = [SchemeId::So, SchemeId::Bo, SchemeId::Nso, SchemeId::Nbo];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::So => "SO",
            SchemeId::Bo => "BO",
            SchemeId::Nso => "NSO",
            SchemeId::Nbo => "NBO",
            SchemeId::Nn => "NN",
            SchemeId::Threshold => "THRESHOLD",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid("scheme", format!("unknown scheme {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateEvaluation {
    pub index: usize,
    /// Probe-to-candidate distance, used for tie-breaking.
    pub distance: f64,
    /// `f64::NEG_INFINITY` marks an ineligible candidate.
    pub metric: f64,
    pub stderr: Option<f64>,
    pub out_of_range: bool,
}

impl CandidateEvaluation {
    fn exact(index: usize, distance: f64, metric: f64) -> Self {
        Self {
            index,
            distance,
            metric,
            stderr: None,
            out_of_range: false,
        }
    }

    pub fn is_eligible(&self) -> bool {
        self.metric > f64::NEG_INFINITY
    }
}

/// Inner Monte Carlo settings for the statistically optimal metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoConfig {
    pub samples: usize,
    pub field: ExteriorField,
    /// Drop candidates that are clearly beaten after each batch of samples.
    pub race: bool,
}

impl SoConfig {
    pub fn new(params: &NetworkParams, samples: usize) -> Self {
        Self {
            samples,
            field: ExteriorField::standard(params),
            race: false,
        }
    }
}

const RACE_BATCH: usize = 50;
const RACE_Z: f64 = 4.0;

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let mean = self.mean();
        (((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) / n).sqrt()
    }
}

/// Statistically optimal metrics for `candidates`, all sharing each sample's
/// activity pattern and exterior field. Fading is independent per link.
pub fn so_metrics<R: Rng + ?Sized>(
    candidates: &[usize],
    knowledge: &LocalKnowledge,
    params: &NetworkParams,
    cfg: &SoConfig,
    rng: &mut R,
) -> Result<Vec<CandidateEvaluation>> {
    if cfg.samples == 0 {
        return Err(invalid("samples", "SO needs at least one inner sample"));
    }
    cfg.field.validate(params)?;
    for &i in candidates {
        knowledge.check(i)?;
    }
    let n = knowledge.len();
    let m = candidates.len();
    let gains: Vec<f64> = candidates
        .iter()
        .flat_map(|&i| (0..n).map(move |l| (i, l)))
        .map(|(i, l)| {
            if i == l {
                0.0
            } else {
                path_gain_sq(knowledge.pair_dist_sq(i, l), params.alpha)
            }
        })
        .collect();
    let tails: Vec<f64> = candidates
        .iter()
        .map(|&i| cfg.field.tail_mean(knowledge.distance(i), params))
        .collect::<Result<_>>()?;

    let mut stats = vec![Moments::default(); m];
    let mut live: Vec<usize> = (0..m).collect();
    let mut active = Vec::with_capacity(n);
    let mut draw = ExteriorDraw::default();
    for t in 0..cfg.samples {
        active.clear();
        active.extend((0..n).filter(|_| rng.random::<f64>() < params.p_tx));
        draw.resample(&cfg.field, params, rng);
        for &c in &live {
            let i = candidates[c];
            let row = &gains[c * n..(c + 1) * n];
            let mut known = 0.0;
            for &l in &active {
                if l != i {
                    let w: f64 = Exp1.sample(rng);
                    known += w * row[l];
                }
            }
            let pos = knowledge.node(i).pos;
            let j = params.rho * known + draw.interference_at(&pos, params, rng) + tails[c];
            let rate = log2_1p_ratio(knowledge.signal(i), j + params.sigma_v2);
            stats[c].push(knowledge.distance(i) * rate);
        }
        if cfg.race && live.len() > 1 && (t + 1) % RACE_BATCH == 0 && t + 1 >= 2 * RACE_BATCH {
            let floor = live
                .iter()
                .map(|&c| stats[c].mean() - RACE_Z * stats[c].stderr())
                .fold(f64::NEG_INFINITY, f64::max);
            live.retain(|&c| stats[c].mean() + RACE_Z * stats[c].stderr() >= floor);
        }
    }
    Ok(candidates
        .iter()
        .zip(&stats)
        .map(|(&i, s)| CandidateEvaluation {
            index: i,
            distance: knowledge.distance(i),
            metric: s.mean(),
            stderr: Some(s.stderr()),
            out_of_range: false,
        })
        .collect())
}

pub fn metric_so<R: Rng + ?Sized>(
    candidate: usize,
    knowledge: &LocalKnowledge,
    params: &NetworkParams,
    cfg: &SoConfig,
    rng: &mut R,
) -> Result<CandidateEvaluation> {
    let cfg = SoConfig { race: false, ..*cfg };
    Ok(so_metrics(&[candidate], knowledge, params, &cfg, rng)?[0])
}

pub fn metric_bo(candidate: usize, knowledge: &LocalKnowledge, params: &NetworkParams) -> Result<CandidateEvaluation> {
    let value = bound_g(candidate, knowledge, params)?;
    Ok(CandidateEvaluation::exact(candidate, knowledge.distance(candidate), value))
}

pub fn metric_nso(
    candidate: usize,
    knowledge: &LocalKnowledge,
    params: &NetworkParams,
    table: &QTable,
) -> Result<CandidateEvaluation> {
    knowledge.check(candidate)?;
    table.check_params(params)?;
    let r = knowledge.distance(candidate);
    let q = table.lookup(knowledge.signal(candidate));
    Ok(CandidateEvaluation {
        out_of_range: q.out_of_range,
        ..CandidateEvaluation::exact(candidate, r, r * q.value)
    })
}

/// `r · log₂(1 + S / (σ² + γ))`, with `gamma` from [`gamma_const`].
pub fn nbo_value(r: f64, s: f64, sigma_v2: f64, gamma: f64) -> f64 {
    r * log2_1p_ratio(s, sigma_v2 + gamma)
}

pub fn metric_nbo(candidate: usize, knowledge: &LocalKnowledge, params: &NetworkParams) -> Result<CandidateEvaluation> {
    knowledge.check(candidate)?;
    let gamma = gamma_const(params)?;
    let r = knowledge.distance(candidate);
    Ok(CandidateEvaluation::exact(
        candidate,
        r,
        nbo_value(r, knowledge.signal(candidate), params.sigma_v2, gamma),
    ))
}

pub fn metric_nn(candidate: usize, knowledge: &LocalKnowledge) -> Result<CandidateEvaluation> {
    knowledge.check(candidate)?;
    let r = knowledge.distance(candidate);
    Ok(CandidateEvaluation::exact(candidate, r, -r))
}

pub fn metric_threshold(candidate: usize, knowledge: &LocalKnowledge, threshold: f64) -> Result<CandidateEvaluation> {
    knowledge.check(candidate)?;
    if !(threshold >= 0.0) {
        return Err(invalid("threshold", format!("must be >= 0, got {threshold}")));
    }
    let r = knowledge.distance(candidate);
    let metric = if knowledge.signal(candidate) >= threshold { r } else { f64::NEG_INFINITY };
    Ok(CandidateEvaluation::exact(candidate, r, metric))
}

/// Argmax of the metric over eligible candidates; ties go to the smaller
/// distance, then the smaller index.
pub fn select_relay(evaluations: &[CandidateEvaluation]) -> Option<usize> {
    evaluations
        .iter()
        .filter(|e| e.is_eligible() && !e.metric.is_nan())
        .min_by(|a, b| {
            b.metric
                .total_cmp(&a.metric)
                .then(a.distance.total_cmp(&b.distance))
                .then(a.index.cmp(&b.index))
        })
        .map(|e| e.index)
}

/// Everything a scheme may need besides the knowledge itself.
#[derive(Debug, Clone, Copy)]
pub struct SchemeContext<'a> {
    pub params: NetworkParams,
    pub so: SoConfig,
    pub qtable: Option<&'a QTable>,
    pub threshold: f64,
}

impl<'a> SchemeContext<'a> {
    pub fn new(params: NetworkParams) -> Self {
        Self {
            so: SoConfig::new(&params, 500),
            params,
            qtable: None,
            threshold: 0.0,
        }
    }
}

/// Evaluates `scheme` on every neighbor.
pub fn evaluate<R: Rng + ?Sized>(
    scheme: SchemeId,
    knowledge: &LocalKnowledge,
    ctx: &SchemeContext<'_>,
    rng: &mut R,
) -> Result<Vec<CandidateEvaluation>> {
    let all = 0..knowledge.len();
    let p = &ctx.params;
    match scheme {
        SchemeId::So => so_metrics(&all.collect::<Vec<_>>(), knowledge, p, &ctx.so, rng),
        SchemeId::Bo => all.map(|i| metric_bo(i, knowledge, p)).collect(),
        SchemeId::Nso => {
            let table = ctx
                .qtable
                .ok_or_else(|| invalid("qtable", "NSO needs a q-table"))?;
            all.map(|i| metric_nso(i, knowledge, p, table)).collect()
        }
        SchemeId::Nbo => {
            let gamma = gamma_const(p)?;
            Ok(all
                .map(|i| {
                    let r = knowledge.distance(i);
                    CandidateEvaluation::exact(i, r, nbo_value(r, knowledge.signal(i), p.sigma_v2, gamma))
                })
                .collect())
        }
        SchemeId::Nn => all.map(|i| metric_nn(i, knowledge)).collect(),
        SchemeId::Threshold => all.map(|i| metric_threshold(i, knowledge, ctx.threshold)).collect(),
    }
}

pub fn select<R: Rng + ?Sized>(
    scheme: SchemeId,
    knowledge: &LocalKnowledge,
    ctx: &SchemeContext<'_>,
    rng: &mut R,
) -> Result<Option<usize>> {
    if knowledge.is_empty() {
        return Ok(None);
    }
    Ok(select_relay(&evaluate(scheme, knowledge, ctx, rng)?))
}
