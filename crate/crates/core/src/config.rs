//! Experiment configuration files (TOML).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::adorp::{McConfig, SweepAxis};
use crate::geometry::NetworkParams;
use crate::netsim::SimConfig;
use crate::schemes::SchemeId;
use crate::validation::ValidationConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    AdorpSweep,
    Netsim,
    BuildQtable,
    ValidateBounds,
    TuneThreshold,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::AdorpSweep => "adorp-sweep",
            ExperimentKind::Netsim => "netsim",
            ExperimentKind::BuildQtable => "build-qtable",
            ExperimentKind::ValidateBounds => "validate-bounds",
            ExperimentKind::TuneThreshold => "tune-threshold",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Network constants; the zone is given either by `r_a` or by `n_bar_a`
/// (30 expected nodes when neither is set).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkBlock {
    pub lambda: f64,
    pub p_tx: f64,
    pub alpha: f64,
    pub rho: f64,
    pub sigma_v2: f64,
    pub bandwidth: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_bar_a: Option<f64>,
}

impl Default for NetworkBlock {
    fn default() -> Self {
        let p = NetworkParams::default();
        Self {
            lambda: p.lambda,
            p_tx: p.p_tx,
            alpha: p.alpha,
            rho: p.rho,
            sigma_v2: p.sigma_v2,
            bandwidth: p.bandwidth,
            r_a: None,
            n_bar_a: None,
        }
    }
}

impl NetworkBlock {
    pub fn params(&self) -> NetworkParams {
        let r_a = self
            .r_a
            .unwrap_or_else(|| NetworkParams::radius_for_mean_nodes(self.lambda, self.n_bar_a.unwrap_or(30.0)));
        NetworkParams {
            lambda: self.lambda,
            p_tx: self.p_tx,
            alpha: self.alpha,
            rho: self.rho,
            sigma_v2: self.sigma_v2,
            bandwidth: self.bandwidth,
            r_a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    #[serde(default = "all_schemes")]
    pub schemes: Vec<SchemeId>,
}

fn all_schemes() -> Vec<SchemeId> {
    SchemeId::ALL.to_vec()
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            axis: SweepAxis::PTx,
            grid: vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5],
            schemes: all_schemes(),
        }
    }
}

/// Multi-hop simulation settings. Density and zone radius follow from
/// `n_nodes / area_side²` and `n_bar_a`; the remaining channel constants come
/// from the network block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetsimBlock {
    pub schemes: Vec<SchemeId>,
    pub p_tx: Vec<f64>,
    pub n_bar_a: f64,
    pub area_side: f64,
    pub n_nodes: usize,
    pub mobility_sigma: f64,
    pub slots: u64,
    pub gen_prob: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gen_backlog_cap: Option<usize>,
    pub k_bits: f64,
    pub so_samples: usize,
    /// Fixed threshold; tuned on the single-slot model when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub qtable_samples: usize,
    pub fading: bool,
}

impl Default for NetsimBlock {
    fn default() -> Self {
        let s = SimConfig::default();
        Self {
            schemes: vec![SchemeId::Nbo, SchemeId::Nn],
            p_tx: vec![0.1, 0.2, 0.3],
            n_bar_a: 30.0,
            area_side: s.area_side,
            n_nodes: s.n_nodes,
            mobility_sigma: s.mobility_sigma,
            slots: s.slots,
            gen_prob: s.gen_prob,
            gen_backlog_cap: s.gen_backlog_cap,
            k_bits: s.k_bits,
            so_samples: s.so_samples,
            threshold: None,
            qtable_samples: s.qtable_samples,
            fading: s.fading,
        }
    }
}

impl NetsimBlock {
    pub fn sim_config(&self, network: &NetworkBlock, scheme: SchemeId, p_tx: f64, seed: u64) -> SimConfig {
        let lambda = self.n_nodes as f64 / (self.area_side * self.area_side);
        let params = NetworkParams {
            lambda,
            p_tx,
            alpha: network.alpha,
            rho: network.rho,
            sigma_v2: network.sigma_v2,
            bandwidth: network.bandwidth,
            r_a: NetworkParams::radius_for_mean_nodes(lambda, self.n_bar_a),
        };
        SimConfig {
            area_side: self.area_side,
            n_nodes: self.n_nodes,
            mobility_sigma: self.mobility_sigma,
            slots: self.slots,
            gen_prob: self.gen_prob,
            gen_backlog_cap: self.gen_backlog_cap,
            scheme,
            params,
            k_bits: self.k_bits,
            so_samples: self.so_samples,
            threshold: self.threshold.unwrap_or(0.0),
            qtable_samples: self.qtable_samples,
            fading: self.fading,
            seed,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QTableBlock {
    pub points: usize,
    pub samples: usize,
    /// Grid range; defaults to `[1e-4, 1e6] × ρ r_a^{-α}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
}

impl Default for QTableBlock {
    fn default() -> Self {
        Self {
            points: 256,
            samples: 100_000,
            x_min: None,
            x_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct TuneBlock {
    /// Candidate thresholds; a log grid around the zone-edge power if absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub network: NetworkBlock,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub netsim: Option<NetsimBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qtable: Option<QTableBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune: Option<TuneBlock>,
}

impl ExperimentConfig {
    /// A complete configuration for `kind` with every block at its default.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let mut cfg = Self {
            experiment: kind,
            seed: 0,
            output: None,
            network: NetworkBlock::default(),
            mc: McConfig::default(),
            sweep: None,
            netsim: None,
            qtable: None,
            validate: None,
            tune: None,
        };
        if kind == ExperimentKind::Netsim {
            cfg.network.alpha = 3.0;
        }
        cfg.fill_defaults();
        cfg
    }

    fn fill_defaults(&mut self) {
        match self.experiment {
            ExperimentKind::AdorpSweep => {
                self.sweep.get_or_insert_with(SweepBlock::default);
            }
            ExperimentKind::Netsim => {
                self.netsim.get_or_insert_with(NetsimBlock::default);
            }
            ExperimentKind::BuildQtable => {
                self.qtable.get_or_insert_with(QTableBlock::default);
            }
            ExperimentKind::ValidateBounds => {
                self.validate.get_or_insert_with(ValidationConfig::default);
            }
            ExperimentKind::TuneThreshold => {
                self.tune.get_or_insert_with(TuneBlock::default);
            }
        }
    }

    /// Preset matching a published figure, at desk-scale sample counts.
    pub fn paper_figure(figure: u32) -> Option<Self> {
        let mut cfg = match figure {
            3 => Self::default_for(ExperimentKind::AdorpSweep),
            4 => {
                let mut c = Self::default_for(ExperimentKind::AdorpSweep);
                c.network.p_tx = 0.15;
                c.sweep = Some(SweepBlock {
                    axis: SweepAxis::NBarA,
                    grid: vec![1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0, 30.0, 40.0, 50.0],
                    schemes: all_schemes(),
                });
                c.mc.realizations = 5_000;
                c
            }
            5 => Self::default_for(ExperimentKind::Netsim),
            6 => {
                let mut c = Self::default_for(ExperimentKind::AdorpSweep);
                c.network.p_tx = 0.15;
                c.network.alpha = 3.0;
                c.sweep = Some(SweepBlock {
                    axis: SweepAxis::Snr,
                    grid: (-6..=2).map(|k| 10.0 * k as f64).collect(),
                    schemes: all_schemes(),
                });
                c.mc.realizations = 5_000;
                c
            }
            _ => return None,
        };
        cfg.output = Some(format!("figure{figure}.csv"));
        Some(cfg)
    }
}

/// One configuration problem, located where possible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub reason: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.key, self.reason),
            None => write!(f, "{}: {}", self.key, self.reason),
        }
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]` (top level when `section` is empty).
fn line_of_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(n + 1);
                }
            }
        }
    }
    None
}

/// Syntax error messages name the offending key in backticks, when known.
fn quoted_key(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

fn check(errors: &mut Vec<ConfigError>, text: &str, section: &str, key: &str, ok: bool, reason: String) {
    if !ok {
        let name = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        errors.push(ConfigError {
            line: line_of_key(text, section, key),
            key: name,
            reason,
        });
    }
}

fn validate(cfg: &ExperimentConfig, text: &str) -> Vec<ConfigError> {
    let mut e = Vec::new();
    let n = &cfg.network;
    check(&mut e, text, "network", "lambda", n.lambda > 0.0 && n.lambda.is_finite(), format!("must be > 0, got {}", n.lambda));
    check(&mut e, text, "network", "p_tx", n.p_tx > 0.0 && n.p_tx < 1.0, format!("must lie in (0, 1), got {}", n.p_tx));
    check(&mut e, text, "network", "alpha", n.alpha > 2.0 && n.alpha.is_finite(), format!("must be > 2, got {}", n.alpha));
    check(&mut e, text, "network", "rho", n.rho > 0.0 && n.rho.is_finite(), format!("must be > 0, got {}", n.rho));
    check(&mut e, text, "network", "sigma_v2", n.sigma_v2 >= 0.0 && n.sigma_v2.is_finite(), format!("must be >= 0, got {}", n.sigma_v2));
    check(&mut e, text, "network", "bandwidth", n.bandwidth > 0.0 && n.bandwidth.is_finite(), format!("must be > 0, got {}", n.bandwidth));
    check(&mut e, text, "network", "r_a", n.r_a.is_none_or(|r| r > 0.0 && r.is_finite()), format!("must be > 0, got {:?}", n.r_a));
    check(&mut e, text, "network", "n_bar_a", n.n_bar_a.is_none_or(|v| v > 0.0 && v.is_finite()), format!("must be > 0, got {:?}", n.n_bar_a));
    check(&mut e, text, "network", "n_bar_a", !(n.r_a.is_some() && n.n_bar_a.is_some()), "give either r_a or n_bar_a, not both".into());

    let mc = &cfg.mc;
    check(&mut e, text, "mc", "realizations", mc.realizations >= 1, "must be >= 1".into());
    check(&mut e, text, "mc", "so_samples", mc.so_samples >= 1, "must be >= 1".into());
    check(&mut e, text, "mc", "qtable_samples", mc.qtable_samples >= 2, "must be >= 2".into());
    check(&mut e, text, "mc", "qtable_points", mc.qtable_points >= 2, "must be >= 2".into());
    check(
        &mut e,
        text,
        "mc",
        "truncation_budget",
        mc.truncation_budget.is_none_or(|b| b > 0.0 && b < 1.0),
        format!("must lie in (0, 1), got {:?}", mc.truncation_budget),
    );

    let missing = |e: &mut Vec<ConfigError>, block: &str| {
        e.push(ConfigError {
            line: None,
            key: block.to_string(),
            reason: format!("[{block}] block is required for experiment {}", cfg.experiment),
        })
    };
    match cfg.experiment {
        ExperimentKind::AdorpSweep if cfg.sweep.is_none() => missing(&mut e, "sweep"),
        ExperimentKind::Netsim if cfg.netsim.is_none() => missing(&mut e, "netsim"),
        _ => {}
    }
    if let Some(s) = &cfg.sweep {
        check(&mut e, text, "sweep", "grid", !s.grid.is_empty(), "must not be empty".into());
        check(
            &mut e,
            text,
            "sweep",
            "grid",
            s.grid.windows(2).all(|w| w[1] > w[0]),
            "must be strictly increasing".into(),
        );
        let in_range = match s.axis {
            SweepAxis::PTx => s.grid.iter().all(|&x| (0.0..=1.0).contains(&x)),
            SweepAxis::NBarA => s.grid.iter().all(|&x| x > 0.0 && x.is_finite()),
            SweepAxis::Snr => s.grid.iter().all(|x| x.is_finite()),
        };
        check(&mut e, text, "sweep", "grid", in_range, format!("value out of range for axis {}", s.axis));
        check(&mut e, text, "sweep", "schemes", !s.schemes.is_empty(), "must not be empty".into());
    }
    if let Some(s) = &cfg.netsim {
        check(&mut e, text, "netsim", "p_tx", s.p_tx.iter().all(|&p| (0.0..=1.0).contains(&p)) && !s.p_tx.is_empty(), "values must lie in [0, 1]".into());
        check(&mut e, text, "netsim", "schemes", !s.schemes.is_empty(), "must not be empty".into());
        check(&mut e, text, "netsim", "n_nodes", s.n_nodes >= 2, "must be >= 2".into());
        check(&mut e, text, "netsim", "area_side", s.area_side > 0.0 && s.area_side.is_finite(), "must be > 0".into());
        check(&mut e, text, "netsim", "mobility_sigma", s.mobility_sigma >= 0.0, "must be >= 0".into());
        check(&mut e, text, "netsim", "slots", s.slots >= 1, "must be >= 1".into());
        check(&mut e, text, "netsim", "gen_prob", (0.0..=1.0).contains(&s.gen_prob), "must lie in [0, 1]".into());
        check(&mut e, text, "netsim", "k_bits", s.k_bits > 0.0, "must be > 0".into());
        check(&mut e, text, "netsim", "so_samples", s.so_samples >= 1, "must be >= 1".into());
        check(&mut e, text, "netsim", "n_bar_a", s.n_bar_a > 0.0, "must be > 0".into());
        let lambda = s.n_nodes as f64 / (s.area_side * s.area_side);
        let r_a = NetworkParams::radius_for_mean_nodes(lambda, s.n_bar_a);
        check(&mut e, text, "netsim", "n_bar_a", 2.0 * r_a < s.area_side, "routing zone does not fit in the area".into());
    }
    if let Some(q) = &cfg.qtable {
        check(&mut e, text, "qtable", "points", q.points >= 2, "must be >= 2".into());
        check(&mut e, text, "qtable", "samples", q.samples >= 2, "must be >= 2".into());
        check(&mut e, text, "qtable", "x_min", q.x_min.is_none_or(|x| x > 0.0), "must be > 0".into());
        let ordered = match (q.x_min, q.x_max) {
            (Some(a), Some(b)) => b > a,
            _ => true,
        };
        check(&mut e, text, "qtable", "x_max", ordered, "must exceed x_min".into());
    }
    if let Some(v) = &cfg.validate {
        check(&mut e, text, "validate", "geometries", v.geometries >= 1, "must be >= 1".into());
        check(&mut e, text, "validate", "alphas", !v.alphas.is_empty() && v.alphas.iter().all(|a| *a == 3.0 || *a == 4.0), "values must be 3 or 4".into());
        check(&mut e, text, "validate", "tolerance", v.tolerance > 0.0, "must be > 0".into());
    }
    if let Some(t) = &cfg.tune {
        if let Some(g) = &t.grid {
            check(&mut e, text, "tune", "grid", !g.is_empty() && g.iter().all(|x| *x >= 0.0), "must be nonempty with values >= 0".into());
        }
    }
    e
}

/// Parses and validates a configuration, filling defaults for optional
/// blocks. Unknown and duplicate keys are errors.
pub fn parse_config(text: &str) -> std::result::Result<ExperimentConfig, Vec<ConfigError>> {
    let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|err| {
        let line = err.span().map(|s| line_of_offset(text, s.start));
        let message = err.message().trim().to_string();
        vec![ConfigError {
            line,
            key: quoted_key(&message).unwrap_or_else(|| "<document>".into()),
            reason: message,
        }]
    })?;
    let errors = validate(&cfg, text);
    if !errors.is_empty() {
        return Err(errors);
    }
    cfg.fill_defaults();
    Ok(cfg)
}

pub fn render(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("configuration is always representable")
}
