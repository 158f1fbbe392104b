//! Multi-hop network simulation on a torus: mobile nodes with message
//! buffers, slotted ALOHA, opportunistic relaying and mutual-information
//! accumulation.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::{log2_1p_ratio, path_gain_sq};
use crate::error::{invalid, Result};
use crate::field::ExteriorField;
use crate::geometry::{NetworkParams, Node, Point2};
use crate::knowledge::LocalKnowledge;
use crate::qtable::{build_q_table, QGridConfig, QTable};
use crate::rng::{substream, tag, Stream};
use crate::schemes::{select, SchemeContext, SchemeId, SoConfig};

const INIT: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Side of the square torus.
    pub area_side: f64,
    pub n_nodes: usize,
    /// Per-axis standard deviation of the displacement around home.
    pub mobility_sigma: f64,
    pub slots: u64,
    /// Per-slot, per-node message generation probability.
    pub gen_prob: f64,
    /// A node stops generating while its buffer holds this many messages.
    /// Relayed messages are always accepted.
    pub gen_backlog_cap: Option<usize>,
    pub scheme: SchemeId,
    pub params: NetworkParams,
    pub k_bits: f64,
    pub so_samples: usize,
    pub threshold: f64,
    pub qtable_samples: usize,
    /// Rayleigh fading on every link; off gives unit gains.
    pub fading: bool,
    pub seed: u64,
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::standard(SchemeId::Nbo, 0.2)
    }
}

impl SimConfig {
    /// 100 nodes on 1000 m², α = 3, interference limited, 30 nodes per zone.
    pub fn standard(scheme: SchemeId, p_tx: f64) -> Self {
        let area: f64 = 1000.0;
        let n_nodes = 100;
        let lambda = n_nodes as f64 / area;
        let params = NetworkParams {
            lambda,
            p_tx,
            alpha: 3.0,
            rho: 1.0,
            sigma_v2: 0.0,
            bandwidth: 1.0,
            r_a: NetworkParams::radius_for_mean_nodes(lambda, 30.0),
        };
        Self {
            area_side: area.sqrt(),
            n_nodes,
            mobility_sigma: 2.84f64.sqrt(),
            slots: 100_000,
            gen_prob: 0.1,
            gen_backlog_cap: Some(16),
            scheme,
            params,
            k_bits: 20.0,
            so_samples: 100,
            threshold: 0.0,
            qtable_samples: 100_000,
            fading: true,
            seed: 0,
            trace: false,
        }
    }

    /// Slot count of a full-length run.
    pub fn paper_slots(p_tx: f64) -> u64 {
        (1e5 / p_tx + 8e5).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        // a silent or saturated MAC is a legal, if degenerate, network
        if !(0.0..=1.0).contains(&self.params.p_tx) {
            return Err(invalid("p_tx", format!("must lie in [0, 1], got {}", self.params.p_tx)));
        }
        NetworkParams { p_tx: 0.5, ..self.params }.validate()?;
        if !(self.area_side > 0.0 && self.area_side.is_finite()) {
            return Err(invalid("area_side", format!("must be positive, got {}", self.area_side)));
        }
        if !(self.mobility_sigma >= 0.0) {
            return Err(invalid("mobility_sigma", format!("must be >= 0, got {}", self.mobility_sigma)));
        }
        if !(0.0..=1.0).contains(&self.gen_prob) {
            return Err(invalid("gen_prob", format!("must lie in [0, 1], got {}", self.gen_prob)));
        }
        if !(self.k_bits > 0.0) {
            return Err(invalid("k_bits", format!("must be positive, got {}", self.k_bits)));
        }
        if 2.0 * self.params.r_a >= self.area_side {
            return Err(invalid("r_a", "routing zone must fit inside the torus"));
        }
        if self.so_samples == 0 {
            return Err(invalid("so_samples", "must be >= 1"));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.area_side * self.area_side
    }

    pub fn fingerprint(&self) -> String {
        format!(
            "{};side={};n={};sigma={};slots={};g={};cap={:?};scheme={};k={};fading={};seed={}",
            self.params.fingerprint(),
            self.area_side,
            self.n_nodes,
            self.mobility_sigma,
            self.slots,
            self.gen_prob,
            self.gen_backlog_cap,
            self.scheme,
            self.k_bits,
            self.fading,
            self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub id: usize,
    pub home: Point2,
    pub position: Point2,
    /// Message ids, oldest first.
    pub buffer: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub id: u64,
    pub source: usize,
    pub destination: usize,
    pub size_k: f64,
    pub origin_distance: f64,
    pub holder: usize,
    /// Mutual information gathered toward the current hop.
    pub accumulated_mi: f64,
    pub hops: u32,
    pub delivered: bool,
}

#[derive(Debug, Clone)]
pub struct NetState {
    pub nodes: Vec<NodeState>,
    pub messages: BTreeMap<u64, Message>,
    pub next_id: u64,
    pub slot: u64,
    pub generated: u64,
    pub delivered: u64,
    /// Σ origin distance × K over delivered messages.
    pub delivered_progress: f64,
    /// Σ hop length × mutual information over all receptions.
    pub rate_progress: f64,
    pub tx_counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EerRun {
    pub fingerprint: String,
    pub scheme: SchemeId,
    pub p_tx: f64,
    pub slots: u64,
    pub eer: f64,
    /// Density of hop-length × rate, the per-link counterpart of `eer`.
    pub link_density: f64,
    pub delivered: u64,
    pub generated: u64,
    pub in_flight: u64,
    pub seed: u64,
    pub tx_counts: Vec<u64>,
    /// Delivered `L·K` per slot, when tracing.
    pub trace: Option<Vec<f64>>,
}

/// Shortest displacement from `a` to `b` on the torus.
pub fn torus_delta(a: &Point2, b: &Point2, side: f64) -> Point2 {
    let wrap = |d: f64| d - side * (d / side).round();
    Point2::new(wrap(b.x - a.x), wrap(b.y - a.y))
}

pub fn torus_dist(a: &Point2, b: &Point2, side: f64) -> f64 {
    torus_delta(a, b, side).norm()
}

/// Redraws every position around its home with an isotropic normal
/// displacement.
pub fn step_mobility<R: Rng + ?Sized>(nodes: &mut [NodeState], sigma: f64, side: f64, rng: &mut R) {
    for n in nodes {
        let (dx, dy) = if sigma > 0.0 {
            let dx: f64 = StandardNormal.sample(rng);
            let dy: f64 = StandardNormal.sample(rng);
            (sigma * dx, sigma * dy)
        } else {
            (0.0, 0.0)
        };
        n.position = Point2::new((n.home.x + dx).rem_euclid(side), (n.home.y + dy).rem_euclid(side));
    }
}

impl NetState {
    pub fn new(cfg: &SimConfig) -> Self {
        let mut rng = substream(cfg.seed, &[tag::NETSIM, INIT]);
        let side = cfg.area_side;
        let mut nodes: Vec<NodeState> = (0..cfg.n_nodes)
            .map(|id| {
                let home = Point2::new(side * rng.random::<f64>(), side * rng.random::<f64>());
                NodeState { id, home, position: home, buffer: Vec::new() }
            })
            .collect();
        step_mobility(&mut nodes, cfg.mobility_sigma, side, &mut rng);
        Self::with_nodes(nodes)
    }

    pub fn with_nodes(nodes: Vec<NodeState>) -> Self {
        let n = nodes.len();
        Self {
            nodes,
            messages: BTreeMap::new(),
            next_id: 0,
            slot: 0,
            generated: 0,
            delivered: 0,
            delivered_progress: 0.0,
            rate_progress: 0.0,
            tx_counts: vec![0; n],
        }
    }

    pub fn inject_message(&mut self, source: usize, destination: usize, cfg: &SimConfig) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        let origin_distance = torus_dist(&self.nodes[source].position, &self.nodes[destination].position, cfg.area_side);
        self.messages.insert(
            id,
            Message {
                id,
                source,
                destination,
                size_k: cfg.k_bits,
                origin_distance,
                holder: source,
                accumulated_mi: 0.0,
                hops: 0,
                delivered: false,
            },
        );
        self.nodes[source].buffer.push(id);
        self.generated += 1;
        id
    }

    pub fn in_flight(&self) -> u64 {
        self.messages.len() as u64
    }

    /// Conservation and per-hop accumulation bounds.
    pub fn check_invariants(&self) -> Result<()> {
        if self.generated != self.delivered + self.in_flight() {
            return Err(invalid(
                "state",
                format!(
                    "generated {} != delivered {} + in flight {}",
                    self.generated,
                    self.delivered,
                    self.in_flight()
                ),
            ));
        }
        let buffered: usize = self.nodes.iter().map(|n| n.buffer.len()).sum();
        if buffered as u64 != self.in_flight() {
            return Err(invalid("state", "buffers and message table disagree"));
        }
        for m in self.messages.values() {
            if m.delivered || !self.nodes[m.holder].buffer.contains(&m.id) {
                return Err(invalid("state", format!("message {} misplaced", m.id)));
            }
            if !(m.accumulated_mi >= 0.0 && m.accumulated_mi < m.size_k) {
                return Err(invalid("state", format!("message {} holds completed MI", m.id)));
            }
        }
        Ok(())
    }
}

/// What the caller needs beyond the config: the q-table for NSO.
#[derive(Debug, Clone, Default)]
pub struct SimResources {
    pub qtable: Option<QTable>,
}

impl SimResources {
    pub fn for_config(cfg: &SimConfig) -> Result<Self> {
        if cfg.scheme != SchemeId::Nso {
            return Ok(Self::default());
        }
        let mut rng = substream(cfg.seed, &[tag::QTABLE]);
        let table = build_q_table(
            &cfg.params,
            &QGridConfig::standard(&cfg.params),
            cfg.qtable_samples,
            &ExteriorField::standard(&cfg.params),
            &mut rng,
        )?;
        Ok(Self { qtable: Some(table) })
    }
}

fn fading<R: Rng + ?Sized>(on: bool, rng: &mut R) -> f64 {
    if on {
        Exp1.sample(rng)
    } else {
        1.0
    }
}

struct Attempt {
    tx: usize,
    relay: usize,
    message: Option<u64>,
    signal: f64,
    distance: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SlotReport {
    pub transmitters: usize,
    pub hops: usize,
    pub delivered: usize,
    pub delivered_progress: f64,
    /// Σ hop length × mutual information over this slot's receptions.
    pub rate_progress: f64,
    pub mutual_information: f64,
}

/// Buffered message with the largest positive reduction of distance to its
/// destination's home when moved from `tx` to `relay`; oldest wins ties.
fn choose_message(state: &NetState, tx: usize, relay: usize, side: f64) -> Option<u64> {
    let from = state.nodes[tx].position;
    let to = state.nodes[relay].position;
    let mut best: Option<(f64, u64)> = None;
    for &id in &state.nodes[tx].buffer {
        let m = &state.messages[&id];
        let dest = state.nodes[m.destination].home;
        let gain = if relay == m.destination {
            torus_dist(&from, &dest, side)
        } else {
            torus_dist(&from, &dest, side) - torus_dist(&to, &dest, side)
        };
        if gain > 0.0 && best.is_none_or(|(g, _)| gain > g) {
            best = Some((gain, id));
        }
    }
    best.map(|(_, id)| id)
}

pub fn run_slot(state: &mut NetState, cfg: &SimConfig, res: &SimResources, rng: &mut Stream) -> Result<SlotReport> {
    let side = cfg.area_side;
    let p = &cfg.params;
    let n = state.nodes.len();
    let mut report = SlotReport::default();

    let transmitting: Vec<bool> = state
        .nodes
        .iter()
        .map(|node| rng.random::<f64>() < p.p_tx && !node.buffer.is_empty())
        .collect();

    let ctx = SchemeContext {
        params: *p,
        so: SoConfig::new(p, cfg.so_samples),
        qtable: res.qtable.as_ref(),
        threshold: cfg.threshold,
    };
    let mut attempts = Vec::new();
    for tx in (0..n).filter(|&t| transmitting[t]) {
        state.tx_counts[tx] += 1;
        report.transmitters += 1;
        let origin = state.nodes[tx].position;
        let mut ids = Vec::new();
        let mut nodes = Vec::new();
        for (v, node) in state.nodes.iter().enumerate() {
            if v == tx {
                continue;
            }
            let pos = torus_delta(&origin, &node.position, side);
            if pos.norm_sq() <= p.r_a * p.r_a && pos.norm_sq() > 0.0 {
                ids.push(v);
                nodes.push(Node { pos, fading: fading(cfg.fading, rng) });
            }
        }
        if nodes.is_empty() {
            continue;
        }
        let knowledge = LocalKnowledge::new(&nodes, p)?;
        if let Some(k) = select(cfg.scheme, &knowledge, &ctx, rng)? {
            let relay = ids[k];
            attempts.push(Attempt {
                tx,
                relay,
                message: choose_message(state, tx, relay, side),
                signal: knowledge.signal(k),
                distance: knowledge.distance(k),
            });
        }
    }

    let tx_positions: Vec<(usize, Point2)> = (0..n)
        .filter(|&t| transmitting[t])
        .map(|t| (t, state.nodes[t].position))
        .collect();
    let beyond = ExteriorField {
        explicit_radius: side / std::f64::consts::PI.sqrt(),
        mean_tail: true,
    }
    .tail_mean(0.0, p)?;
    let mut gains = Vec::with_capacity(attempts.len());
    for a in &attempts {
        if transmitting[a.relay] {
            gains.push(0.0);
            continue;
        }
        let at = state.nodes[a.relay].position;
        let mut j = 0.0;
        for &(u, pos) in &tx_positions {
            if u != a.tx {
                let d = torus_delta(&at, &pos, side);
                j += fading(cfg.fading, rng) * path_gain_sq(d.norm_sq(), p.alpha);
            }
        }
        gains.push(p.bandwidth * log2_1p_ratio(a.signal, p.rho * j + beyond + p.sigma_v2));
    }

    for (a, mi) in attempts.iter().zip(gains) {
        report.rate_progress += a.distance * mi;
        report.mutual_information += mi;
        let Some(id) = a.message else { continue };
        if mi <= 0.0 {
            continue;
        }
        let m = state.messages.get_mut(&id).expect("buffered message exists");
        m.accumulated_mi += mi;
        if m.accumulated_mi < m.size_k {
            continue;
        }
        m.accumulated_mi = 0.0;
        m.hops += 1;
        state.nodes[a.tx].buffer.retain(|&x| x != id);
        report.hops += 1;
        if a.relay == m.destination {
            let progress = m.origin_distance * m.size_k;
            state.messages.remove(&id);
            state.delivered += 1;
            state.delivered_progress += progress;
            report.delivered += 1;
            report.delivered_progress += progress;
        } else {
            m.holder = a.relay;
            state.nodes[a.relay].buffer.push(id);
        }
    }

    step_mobility(&mut state.nodes, cfg.mobility_sigma, side, rng);

    if cfg.gen_prob > 0.0 && n > 1 {
        for src in 0..n {
            if rng.random::<f64>() >= cfg.gen_prob {
                continue;
            }
            if cfg.gen_backlog_cap.is_some_and(|cap| state.nodes[src].buffer.len() >= cap) {
                continue;
            }
            let mut dest = rng.random_range(0..n - 1);
            if dest >= src {
                dest += 1;
            }
            state.inject_message(src, dest, cfg);
        }
    }
    state.slot += 1;
    Ok(report)
}

/// Runs `cfg.slots` slots from `state`.
pub fn run_from(state: &mut NetState, cfg: &SimConfig, res: &SimResources) -> Result<EerRun> {
    cfg.validate()?;
    let mut trace = cfg.trace.then(Vec::new);
    for _ in 0..cfg.slots {
        let mut rng = substream(cfg.seed, &[tag::NETSIM, state.slot]);
        let report = run_slot(state, cfg, res, &mut rng)?;
        state.rate_progress += report.rate_progress;
        if let Some(t) = trace.as_mut() {
            t.push(report.delivered_progress);
        }
    }
    let tt = cfg.slots as f64;
    let norm = tt * cfg.area() * cfg.params.bandwidth;
    let (eer, link_density) = if cfg.slots == 0 {
        (0.0, 0.0)
    } else {
        (state.delivered_progress / norm, state.rate_progress / norm)
    };
    Ok(EerRun {
        fingerprint: cfg.fingerprint(),
        scheme: cfg.scheme,
        p_tx: cfg.params.p_tx,
        slots: cfg.slots,
        eer,
        link_density,
        delivered: state.delivered,
        generated: state.generated,
        in_flight: state.in_flight(),
        seed: cfg.seed,
        tx_counts: state.tx_counts.clone(),
        trace,
    })
}

pub fn run_sim(cfg: &SimConfig) -> Result<EerRun> {
    cfg.validate()?;
    let res = SimResources::for_config(cfg)?;
    let mut state = NetState::new(cfg);
    run_from(&mut state, cfg, &res)
}
