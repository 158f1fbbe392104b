#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use relaynet::bounds::{jbar2, jbar21, p_zone_free, theta_s, threshold_radius, CandidateGeometry, Jbar2Method};
use relaynet::channel::{aggregate_interference, rate, sample_fading, signal_power, sinr, LinkBudget};
use relaynet::cli::{run_config, NETSIM_HEADER, SWEEP_HEADER};
use relaynet::config::{parse_config, render, ExperimentConfig, ExperimentKind};
use relaynet::field::ExteriorField;
use relaynet::geometry::{sample_ppp_annulus, NetworkParams, Node, Point2};
use relaynet::knowledge::LocalKnowledge;
use relaynet::netsim::{run_from, run_slot, NetState, NodeState, SimConfig, SimResources};
use relaynet::qtable::{build_q_table, QGridConfig};
use relaynet::rng::{substream, tag};
use relaynet::schemes::{
    evaluate, metric_nbo, metric_nso, select, select_relay, CandidateEvaluation, SchemeContext, SchemeId, SoConfig,
};

pub type Check = std::result::Result<(), String>;

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config { cases, failure_persistence: None, ..Config::default() },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn prop(r: std::result::Result<(), proptest::test_runner::TestError<impl std::fmt::Debug>>) -> Check {
    r.map_err(|e| e.to_string())
}

/// `∫_{|x|>R} |x − c|^{-α} dA` for `|c| = d < R`, by trapezoid in angle and
/// Simpson in `t = R/r`.
pub fn planar_exterior(d: f64, big_r: f64, alpha: f64) -> f64 {
    let (nt, nphi) = (2000usize, 256usize);
    let h = 1.0 / nt as f64;
    let f = |t: f64| -> f64 {
        if t == 0.0 {
            return if alpha == 3.0 { 2.0 * PI * big_r.powf(2.0 - alpha) } else { 0.0 };
        }
        let r = big_r / t;
        let mut s = 0.0;
        for k in 0..nphi {
            let phi = 2.0 * PI * k as f64 / nphi as f64;
            s += (r * r + d * d - 2.0 * r * d * phi.cos()).powf(-0.5 * alpha);
        }
        s * 2.0 * PI / nphi as f64 * r * big_r / (t * t)
    };
    let mut acc = f(0.0) + f(1.0);
    for i in 1..nt {
        acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

pub fn zone_params(lambda: f64, n_bar: f64, p_tx: f64, alpha: f64) -> NetworkParams {
    NetworkParams { lambda, p_tx, alpha, ..NetworkParams::default() }.with_mean_zone_nodes(n_bar)
}

/// A knowledge set from one probe realization, or `None` if the zone is empty.
pub fn random_knowledge<R: Rng>(params: &NetworkParams, rng: &mut R) -> Option<(Vec<Node>, LocalKnowledge)> {
    let pts = sample_ppp_annulus(params.lambda, 0.0, params.r_a, rng);
    if pts.is_empty() {
        return None;
    }
    let nodes: Vec<Node> = pts.into_iter().map(|pos| Node { pos, fading: Exp1.sample(rng) }).collect();
    let k = LocalKnowledge::new(&nodes, params).ok()?;
    Some((nodes, k))
}

// ---------------------------------------------------------------- geometry

pub fn poisson_counts() -> Check {
    let (lambda, a, b) = (3.0, 0.5, 2.0);
    let mu = lambda * PI * (b * b - a * a);
    let mut rng = substream(101, &[]);
    let n = 20_000;
    let counts: Vec<f64> = (0..n).map(|_| sample_ppp_annulus(lambda, a, b, &mut rng).len() as f64).collect();
    let (m, se) = mean_se(&counts);
    ensure((m - mu).abs() < 4.0 * se, || format!("count mean {m} vs {mu} (se {se})"))?;
    let var = counts.iter().map(|c| (c - m) * (c - m)).sum::<f64>() / (n as f64 - 1.0);
    let var_se = ((mu + 2.0 * mu * mu) / n as f64).sqrt();
    ensure((var - mu).abs() < 4.0 * var_se, || format!("count variance {var} vs {mu} (se {var_se})"))
}

pub fn radial_uniformity() -> Check {
    let big_r = 2.5;
    let mut rng = substream(102, &[]);
    let mut u: Vec<f64> = Vec::new();
    while u.len() < 10_000 {
        u.extend(sample_ppp_annulus(50.0, 0.0, big_r, &mut rng).iter().map(|p| p.norm_sq() / (big_r * big_r)));
    }
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let d = u
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max);
    ensure(d < 1.628 / n.sqrt(), || format!("KS statistic {d} over {n} points"))
}

// ---------------------------------------------------------------- channel

pub fn fading_moments() -> Check {
    let mut rng = substream(103, &[]);
    let w: Vec<f64> = (0..100_000).map(|_| sample_fading(&mut rng).w).collect();
    let (m, se) = mean_se(&w);
    ensure((m - 1.0).abs() < 4.0 * se, || format!("fading mean {m}"))?;
    let sq: Vec<f64> = w.iter().map(|x| x * x).collect();
    let (m2, se2) = mean_se(&sq);
    ensure((m2 - 2.0).abs() < 4.0 * se2, || format!("fading second moment {m2}"))
}

pub fn channel_properties() -> Check {
    prop(runner(256).run(&(0.0f64..1e3, 1e-6f64..1e3, 0.1f64..10.0), |(x, dx, b)| {
        prop_assert!(rate(b, x + dx).unwrap() > rate(b, x).unwrap());
        Ok(())
    }))?;
    prop(runner(256).run(&(1e-6f64..1e3, 0.0f64..1e3, 1e-6f64..1e3, 0.0f64..1.0), |(s, j, dj, n)| {
        let lo = sinr(LinkBudget { s, j, sigma_v2: n + 1e-9 }).unwrap();
        let hi = sinr(LinkBudget { s, j: j + dj, sigma_v2: n + 1e-9 }).unwrap();
        prop_assert!(hi < lo);
        Ok(())
    }))?;
    let link = (0.01f64..50.0, 0.0f64..10.0);
    prop(runner(256).run(
        &(prop::collection::vec(link.clone(), 0..20), prop::collection::vec(link, 0..20), 0.1f64..10.0, 2.1f64..6.0),
        |(a, b, rho, alpha)| {
            let ab: Vec<_> = a.iter().chain(&b).copied().collect();
            let sum = aggregate_interference(&a, rho, alpha).unwrap() + aggregate_interference(&b, rho, alpha).unwrap();
            let whole = aggregate_interference(&ab, rho, alpha).unwrap();
            prop_assert!((whole - sum).abs() <= 1e-12 * whole.abs().max(1e-300));
            Ok(())
        },
    ))?;
    prop(runner(256).run(&(1e-3f64..1e3, 1e-2f64..1e2, 2.1f64..6.0, 1e-3f64..20.0), |(rho, r, alpha, w)| {
        let s = signal_power(rho, r, alpha, w).unwrap();
        prop_assert!((s * r.powf(alpha) / w - rho).abs() <= 1e-12 * rho);
        Ok(())
    }))
}

// ---------------------------------------------------------------- bounds

/// Candidate alone at distance `d`, so only the unknown-region branch of the
/// zone-free probability is exercised.
fn lone_candidate(d: f64, params: &NetworkParams) -> LocalKnowledge {
    LocalKnowledge::new(&[Node { pos: Point2::new(d, 0.0), fading: 1.0 }], params).unwrap()
}

pub fn boundary_continuity() -> Check {
    for &alpha in &[3.0, 4.0] {
        let params = zone_params(1.0, 30.0, 0.2, alpha);
        let r_z = threshold_radius(&params).unwrap();
        let edge = params.r_a - r_z;
        let inside = p_zone_free(0, &lone_candidate(edge * (1.0 - 1e-12), &params), &params).unwrap();
        let mut prev = f64::INFINITY;
        for k in 3..=12 {
            let eps = 10f64.powi(-k) * params.r_a;
            let d = edge + eps;
            let outside = p_zone_free(0, &lone_candidate(d, &params), &params).unwrap();
            let ts = theta_s(&CandidateGeometry::new(d, params.r_a, r_z).unwrap()).unwrap();
            ensure(ts < prev, || format!("theta_s not shrinking toward the boundary: {ts} after {prev}"))?;
            prev = ts;
            if k == 12 {
                ensure((outside - inside).abs() < 1e-6, || format!("p_Z jump {inside} -> {outside}"))?;
                ensure(ts < 1e-4, || format!("theta_s {ts} at the boundary"))?;
            }
        }
    }
    Ok(())
}

pub fn interior_jbar2_is_plain_exterior() -> Check {
    for &alpha in &[3.0, 4.0] {
        let params = zone_params(1.0, 30.0, 0.2, alpha);
        for &frac in &[0.0, 0.2, 0.45] {
            let geom = CandidateGeometry::for_params(frac * params.r_a, &params).unwrap();
            ensure(geom.is_interior(), || "geometry not interior".into())?;
            let ts = theta_s(&geom).unwrap();
            ensure(ts == 0.0 && jbar21(&geom, ts, &params) == 0.0, || "cone term nonzero".into())?;
            let got = jbar2(&geom, &params, Jbar2Method::Auto).unwrap();
            let want = params.rho * params.lambda * params.p_tx * planar_exterior(geom.d, params.r_a, alpha);
            ensure(((got - want) / want).abs() < 1e-6, || format!("alpha {alpha} d {}: {got} vs {want}", geom.d))?;
        }
    }
    Ok(())
}

pub fn bound_terms_in_range() -> Check {
    prop(runner(64).run(
        &(0.3f64..3.0, 2.0f64..60.0, 0.02f64..0.6, prop::bool::ANY, any::<u64>()),
        |(lambda, n_bar, p_tx, a3, seed)| {
            let params = zone_params(lambda, n_bar, p_tx, if a3 { 3.0 } else { 4.0 });
            let mut rng = substream(seed, &[]);
            if let Some((_, k)) = random_knowledge(&params, &mut rng) {
                for i in 0..k.len() {
                    let t = relaynet::bounds::bound_terms(i, &k, &params).unwrap();
                    prop_assert!((0.0..=1.0).contains(&t.p_z));
                    prop_assert!(t.j1 >= 0.0 && t.j2 >= 0.0);
                    prop_assert!(relaynet::bounds::bound_g(i, &k, &params).unwrap() >= 0.0);
                }
            }
            Ok(())
        },
    ))
}

// ---------------------------------------------------------------- schemes

pub fn argmax_scale_invariance() -> Check {
    prop(runner(512).run(
        &(prop::collection::vec((0.01f64..10.0, -5.0f64..5.0, prop::bool::weighted(0.9)), 1..30), 1e-3f64..1e3),
        |(cands, c)| {
            let evals = |scale: f64| -> Vec<CandidateEvaluation> {
                cands
                    .iter()
                    .enumerate()
                    .map(|(i, &(r, m, ok))| CandidateEvaluation {
                        index: i,
                        distance: r,
                        metric: if ok { m * scale } else { f64::NEG_INFINITY },
                        stderr: None,
                        out_of_range: false,
                    })
                    .collect()
            };
            prop_assert_eq!(select_relay(&evals(1.0)), select_relay(&evals(c)));
            Ok(())
        },
    ))
}

pub fn narrow_knowledge_permutation() -> Check {
    let params = zone_params(1.0, 30.0, 0.2, 4.0);
    let mut rng = substream(104, &[]);
    let table = build_q_table(&params, &QGridConfig { points: 64, ..QGridConfig::standard(&params) }, 2000, &ExteriorField::standard(&params), &mut rng)
        .map_err(|e| e.to_string())?;
    prop(runner(64).run(&(any::<u64>(), any::<u64>()), |(s1, s2)| {
        let mut rng = substream(s1, &[]);
        let Some((nodes, k)) = random_knowledge(&params, &mut rng) else { return Ok(()) };
        let mut others = nodes[1..].to_vec();
        let mut shuffle = substream(s2, &[]);
        for i in (1..others.len()).rev() {
            others.swap(i, shuffle.random_range(0..=i));
        }
        for o in others.iter_mut() {
            o.fading = Exp1.sample(&mut shuffle);
        }
        let mut moved = others;
        moved.push(nodes[0]);
        let last = moved.len() - 1;
        let k2 = LocalKnowledge::new(&moved, &params).unwrap();
        let a = metric_nbo(0, &k, &params).unwrap().metric;
        let b = metric_nbo(last, &k2, &params).unwrap().metric;
        prop_assert_eq!(a.to_bits(), b.to_bits());
        let a = metric_nso(0, &k, &params, &table).unwrap().metric;
        let b = metric_nso(last, &k2, &params, &table).unwrap().metric;
        prop_assert_eq!(a.to_bits(), b.to_bits());
        Ok(())
    }))
}

/// Scaling every power by 4 (exact in binary) must not move any argmax when
/// the network is interference limited.
pub fn power_scaling_argmax() -> Check {
    let base = zone_params(1.0, 20.0, 0.2, 4.0);
    let scaled = NetworkParams { rho: 4.0 * base.rho, ..base };
    let tables: Vec<_> = [base, scaled]
        .iter()
        .map(|p| {
            let mut rng = substream(105, &[]);
            build_q_table(p, &QGridConfig { points: 64, ..QGridConfig::standard(p) }, 2000, &ExteriorField::standard(p), &mut rng).unwrap()
        })
        .collect();
    for trial in 0..40u64 {
        let mut rng = substream(106, &[trial]);
        let Some((nodes, _)) = random_knowledge(&base, &mut rng) else { continue };
        let mut picks = Vec::new();
        for (p, table) in [base, scaled].iter().zip(&tables) {
            let k = LocalKnowledge::new(&nodes, p).unwrap();
            let ctx = SchemeContext { so: SoConfig::new(p, 200), qtable: Some(table), ..SchemeContext::new(*p) };
            let mut row = Vec::new();
            for s in [SchemeId::So, SchemeId::Bo, SchemeId::Nso, SchemeId::Nbo] {
                let mut inner = substream(107, &[trial]);
                row.push(select(s, &k, &ctx, &mut inner).unwrap());
            }
            picks.push(row);
        }
        ensure(picks[0] == picks[1], || format!("trial {trial}: {:?} vs {:?}", picks[0], picks[1]))?;
    }
    Ok(())
}

pub fn qtable_monotone() -> Check {
    for (i, &(lambda, p_tx, alpha)) in [(1.0, 0.2, 4.0), (0.1, 0.3, 3.0), (5.0, 0.05, 3.5)].iter().enumerate() {
        let params = zone_params(lambda, 30.0, p_tx, alpha);
        let mut rng = substream(108, &[i as u64]);
        let t = build_q_table(&params, &QGridConfig { points: 96, ..QGridConfig::standard(&params) }, 3000, &ExteriorField::standard(&params), &mut rng)
            .map_err(|e| e.to_string())?;
        ensure(t.values.windows(2).all(|w| w[0] <= w[1]), || format!("q not monotone for {params:?}"))?;
    }
    Ok(())
}

pub fn evaluations_cover_zone() -> Check {
    let params = zone_params(1.0, 15.0, 0.2, 4.0);
    let mut rng = substream(109, &[]);
    let ctx = SchemeContext { so: SoConfig::new(&params, 100), ..SchemeContext::new(params) };
    for _ in 0..20 {
        let Some((_, k)) = random_knowledge(&params, &mut rng) else { continue };
        for s in [SchemeId::So, SchemeId::Bo, SchemeId::Nbo, SchemeId::Nn, SchemeId::Threshold] {
            let e = evaluate(s, &k, &ctx, &mut rng).map_err(|e| e.to_string())?;
            ensure(e.len() == k.len(), || format!("{s}: {} evaluations for {} neighbors", e.len(), k.len()))?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- netsim

pub fn small_sim(scheme: SchemeId, slots: u64) -> SimConfig {
    SimConfig { slots, ..SimConfig::standard(scheme, 0.2) }
}

/// Conservation and per-hop accumulation, checked after every slot.
pub fn netsim_conservation() -> Check {
    for scheme in [SchemeId::Nbo, SchemeId::Nn] {
        let cfg = small_sim(scheme, 3000);
        let res = SimResources::default();
        let mut state = NetState::new(&cfg);
        for s in 0..cfg.slots {
            let before: BTreeMap<u64, (usize, u32, f64)> =
                state.messages.values().map(|m| (m.id, (m.holder, m.hops, m.accumulated_mi))).collect();
            let mut rng = substream(cfg.seed, &[tag::NETSIM, s]);
            run_slot(&mut state, &cfg, &res, &mut rng).map_err(|e| e.to_string())?;
            state.check_invariants().map_err(|e| format!("slot {s}: {e}"))?;
            for m in state.messages.values() {
                if let Some(&(holder, hops, mi)) = before.get(&m.id) {
                    if holder == m.holder && hops == m.hops {
                        ensure(m.accumulated_mi >= mi, || format!("slot {s}: MI of message {} fell", m.id))?;
                    }
                }
            }
        }
        ensure(state.delivered > 0, || format!("{scheme}: nothing delivered"))?;
    }
    Ok(())
}

/// Deterministic scenario: two static chains with narrowing gaps, no fading,
/// every backlogged node transmits, one message per chain.
fn relabel_scenario(perm: &[usize]) -> f64 {
    let mut homes = Vec::new();
    for y in [10.0, 30.0] {
        let mut x = 2.0;
        for k in 0..8 {
            homes.push((x, y));
            x += 3.4 - 0.2 * k as f64;
        }
    }
    let cfg = SimConfig {
        area_side: 40.0,
        n_nodes: homes.len(),
        mobility_sigma: 0.0,
        slots: 400,
        gen_prob: 0.0,
        fading: false,
        params: NetworkParams { lambda: 0.01, p_tx: 1.0, alpha: 3.0, sigma_v2: 1e-3, r_a: 3.5, ..NetworkParams::default() },
        ..SimConfig::standard(SchemeId::Nbo, 1.0)
    };
    let mut nodes = vec![None; homes.len()];
    for (orig, &(x, y)) in homes.iter().enumerate() {
        let id = perm[orig];
        let home = Point2::new(x, y);
        nodes[id] = Some(NodeState { id, home, position: home, buffer: Vec::new() });
    }
    let mut state = NetState::with_nodes(nodes.into_iter().map(Option::unwrap).collect());
    for &(s, d) in &[(0usize, 7usize), (8, 15)] {
        state.inject_message(perm[s], perm[d], &cfg);
    }
    let run = run_from(&mut state, &cfg, &SimResources::default()).unwrap();
    assert_eq!(run.delivered, 2);
    run.eer
}

pub fn netsim_relabel_invariance() -> Check {
    let id: Vec<usize> = (0..16).collect();
    let base = relabel_scenario(&id);
    let mut rng = substream(111, &[]);
    for _ in 0..5 {
        let mut perm = id.clone();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let e = relabel_scenario(&perm);
        ensure(((e - base) / base).abs() < 1e-9, || format!("eer {e} under {perm:?} vs {base}"))?;
    }
    Ok(())
}

pub fn netsim_homogeneity() -> Check {
    let cfg = small_sim(SchemeId::Nn, 20_000);
    let run = relaynet::netsim::run_sim(&cfg).map_err(|e| e.to_string())?;
    let c: Vec<f64> = run.tx_counts.iter().map(|&x| x as f64).collect();
    let n = c.len() as f64;
    let m = c.iter().sum::<f64>() / n;
    let sd = (c.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt();
    let (lo, hi) = c.iter().fold((f64::MAX, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    ensure(m > 0.0 && sd / m < 0.15 && lo > 0.5 * m && hi < 1.5 * m, || {
        format!("transmit counts mean {m}, sd {sd}, range [{lo}, {hi}]")
    })
}

pub fn mobility_moments() -> Check {
    let sigma = 2.84f64.sqrt();
    let side = 1000.0;
    let home = Point2::new(500.0, 500.0);
    let mut nodes: Vec<NodeState> =
        (0..1000).map(|id| NodeState { id, home, position: home, buffer: Vec::new() }).collect();
    let mut rng = substream(110, &[]);
    let mut dx = Vec::new();
    for _ in 0..50 {
        relaynet::netsim::step_mobility(&mut nodes, sigma, side, &mut rng);
        dx.extend(nodes.iter().flat_map(|n| [n.position.x - home.x, n.position.y - home.y]));
    }
    let (m, se) = mean_se(&dx);
    ensure(m.abs() < 4.0 * se, || format!("mean displacement {m}"))?;
    let sq: Vec<f64> = dx.iter().map(|x| x * x).collect();
    let (v, vse) = mean_se(&sq);
    ensure((v - sigma * sigma).abs() < 4.0 * vse, || format!("displacement variance {v} vs {}", sigma * sigma))
}

// ---------------------------------------------------------------- cli

fn tiny_sweep() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::AdorpSweep);
    cfg.seed = 5;
    cfg.mc.realizations = 40;
    cfg.mc.so_samples = 60;
    cfg.mc.qtable_samples = 1000;
    cfg.mc.qtable_points = 48;
    cfg.mc.tune_realizations = 40;
    cfg.sweep.as_mut().unwrap().grid = vec![0.1, 0.2];
    cfg
}

fn tiny_netsim() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::Netsim);
    cfg.seed = 5;
    let n = cfg.netsim.as_mut().unwrap();
    n.slots = 300;
    n.p_tx = vec![0.2];
    cfg
}

fn check_numbers(line: &str, numeric: &[usize]) -> Check {
    let fields: Vec<&str> = line.split(',').collect();
    for &i in numeric {
        let f = fields[i];
        let v: f64 = f.parse().map_err(|_| format!("field {i} of {line:?} is not numeric"))?;
        ensure(format!("{v}") == f, || format!("{f} is not the shortest round-trip form"))?;
    }
    Ok(())
}

pub fn csv_schema_and_format() -> Check {
    let sweep = run_config(&tiny_sweep(), 0.0).map_err(|e| e.to_string())?;
    let mut lines = sweep.csv.lines();
    ensure(lines.next() == Some(SWEEP_HEADER), || "sweep header".into())?;
    ensure(SWEEP_HEADER == "experiment,scheme,axis,abscissa,value,stderr,realizations,seed", || "sweep columns".into())?;
    let rows: Vec<&str> = lines.collect();
    ensure(rows.len() == 2 * SchemeId::ALL.len(), || format!("{} sweep rows", rows.len()))?;
    for r in &rows {
        check_numbers(r, &[3, 4, 5, 6, 7])?;
    }
    let net = run_config(&tiny_netsim(), 0.0).map_err(|e| e.to_string())?;
    let mut lines = net.csv.lines();
    ensure(lines.next() == Some(NETSIM_HEADER), || "netsim header".into())?;
    ensure(NETSIM_HEADER == "scheme,p_tx,slots,generated,delivered,eer,seed", || "netsim columns".into())?;
    let rows: Vec<&str> = lines.collect();
    ensure(rows.len() == 2, || format!("{} netsim rows", rows.len()))?;
    for r in &rows {
        check_numbers(r, &[1, 2, 3, 4, 5, 6])?;
    }
    Ok(())
}

pub fn config_round_trip() -> Check {
    prop(runner(128).run(
        &(0.01f64..10.0, 0.001f64..1.0, 2.1f64..6.0, any::<u64>(), 1usize..100_000, prop::collection::vec(0.01f64..0.9, 1..8), prop::option::of(0.1f64..10.0)),
        |(lambda, p_tx, alpha, seed, realizations, grid, r_a)| {
            let mut cfg = ExperimentConfig::default_for(ExperimentKind::AdorpSweep);
            cfg.network.lambda = lambda;
            cfg.network.p_tx = p_tx;
            cfg.network.alpha = alpha;
            cfg.network.r_a = r_a;
            cfg.seed = seed;
            cfg.mc.realizations = realizations;
            let mut grid = grid;
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            cfg.sweep.as_mut().unwrap().grid = grid;
            let back = parse_config(&render(&cfg)).map_err(|e| TestCaseError::fail(format!("{e:?}")))?;
            prop_assert_eq!(back, cfg);
            Ok(())
        },
    ))?;
    for kind in [
        ExperimentKind::AdorpSweep,
        ExperimentKind::Netsim,
        ExperimentKind::BuildQtable,
        ExperimentKind::ValidateBounds,
        ExperimentKind::TuneThreshold,
    ] {
        let cfg = ExperimentConfig::default_for(kind);
        ensure(parse_config(&render(&cfg)).ok() == Some(cfg), || format!("{kind} does not round-trip"))?;
    }
    Ok(())
}

/// Every property check, in a stable order.
pub fn all_properties() -> Vec<(&'static str, fn() -> Check)> {
    vec![
        ("poisson counts", poisson_counts as fn() -> Check),
        ("radial uniformity", radial_uniformity),
        ("fading moments", fading_moments),
        ("channel monotonicity and identities", channel_properties),
        ("case-boundary continuity", boundary_continuity),
        ("interior exterior term", interior_jbar2_is_plain_exterior),
        ("bound terms in range", bound_terms_in_range),
        ("argmax scale invariance", argmax_scale_invariance),
        ("narrow-knowledge permutation", narrow_knowledge_permutation),
        ("power scaling argmax", power_scaling_argmax),
        ("q-table monotonicity", qtable_monotone),
        ("evaluations cover zone", evaluations_cover_zone),
        ("netsim conservation", netsim_conservation),
        ("netsim relabeling", netsim_relabel_invariance),
        ("netsim homogeneity", netsim_homogeneity),
        ("mobility moments", mobility_moments),
        ("csv schema and format", csv_schema_and_format),
        ("config round trip", config_round_trip),
    ]
}

// ---------------------------------------------------------------- oracles

pub type Outcome = std::result::Result<String, String>;

/// Known neighbors outside the candidate's threshold zone transmit with
/// probability `p_tx`; unknown transmitters are drawn outside the routing zone
/// and dropped when inside the threshold zone; the far field beyond `R` enters
/// through its exact mean.
pub fn interference_oracle(sets: usize, draws: usize, seed: u64) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut s = 0u64;
    let mut done = 0;
    while done < sets {
        s += 1;
        let mut rng = substream(seed, &[tag::ORACLE, s]);
        let alpha = if done % 2 == 0 { 3.0 } else { 4.0 };
        let params = zone_params(1.0, rng.random_range(10.0..40.0), rng.random_range(0.05..0.4), alpha);
        let Some((nodes, k)) = random_knowledge(&params, &mut rng) else { continue };
        let i = rng.random_range(0..k.len());
        let c = nodes[i].pos;
        let r_z = threshold_radius(&params).unwrap();
        let big_r = params.r_a + 2.0 * r_z + 3.0;
        let lp = params.lambda * params.p_tx;
        let tail = params.rho * lp * planar_exterior(c.norm(), big_r, alpha);
        let analytic = relaynet::bounds::jbar1(i, &k, &params).unwrap()
            + jbar2(&CandidateGeometry::for_params(c.norm(), &params).unwrap(), &params, Jbar2Method::Auto).unwrap();
        let far_known: Vec<Point2> = nodes
            .iter()
            .enumerate()
            .filter(|&(l, n)| l != i && n.pos.dist(&c) > r_z)
            .map(|(_, n)| n.pos)
            .collect();
        let mut acc = Vec::with_capacity(draws);
        for _ in 0..draws {
            let mut j = 0.0;
            for p in &far_known {
                if rng.random::<f64>() < params.p_tx {
                    j += Distribution::<f64>::sample(&Exp1, &mut rng) * p.dist_sq(&c).powf(-0.5 * alpha);
                }
            }
            for p in sample_ppp_annulus(lp, params.r_a, big_r, &mut rng) {
                let d2 = p.dist_sq(&c);
                if d2 > r_z * r_z {
                    let w: f64 = Exp1.sample(&mut rng);
                    j += w * d2.powf(-0.5 * alpha);
                }
            }
            acc.push(params.rho * j + tail);
        }
        let (m, se) = mean_se(&acc);
        let z = (m - analytic) / se;
        worst = worst.max(z.abs());
        if z.abs() >= 4.0 {
            return Err(format!("set {s} (alpha {alpha}, d {}): MC {m} +- {se} vs {analytic}", c.norm()));
        }
        done += 1;
    }
    Ok(format!("{sets} knowledge sets x {draws} draws, max |z| = {worst:.2}"))
}

/// Zone-free event frequency against `p_Z`, for candidates with the
/// threshold zone inside the routing zone and crossing its boundary.
pub fn zone_free_oracle(per_case: usize, draws: usize, seed: u64) -> Outcome {
    let mut counts = [0usize; 2];
    let mut worst: f64 = 0.0;
    let mut s = 0u64;
    while counts.iter().any(|&c| c < per_case) {
        s += 1;
        let mut rng = substream(seed, &[tag::ORACLE, 1 << 32, s]);
        let alpha = if s % 2 == 0 { 3.0 } else { 4.0 };
        let params = zone_params(1.0, 30.0, rng.random_range(0.05..0.4), alpha);
        let Some((nodes, k)) = random_knowledge(&params, &mut rng) else { continue };
        let r_z = threshold_radius(&params).unwrap();
        let i = rng.random_range(0..k.len());
        let c = nodes[i].pos;
        let case = usize::from(c.norm() + r_z > params.r_a);
        if counts[case] >= per_case {
            continue;
        }
        counts[case] += 1;
        let in_zone = nodes.iter().enumerate().filter(|&(l, n)| l != i && n.pos.dist(&c) <= r_z).count();
        let pz = p_zone_free(i, &k, &params).unwrap();
        let mut free = 0usize;
        for _ in 0..draws {
            let mut silent = (0..in_zone).all(|_| rng.random::<f64>() >= params.p_tx);
            if silent {
                let lp = params.lambda * params.p_tx;
                silent = sample_ppp_annulus(lp, 0.0, r_z, &mut rng)
                    .iter()
                    .all(|p| Point2::new(p.x + c.x, p.y + c.y).norm() <= params.r_a);
            }
            free += usize::from(silent);
        }
        let f = free as f64 / draws as f64;
        let se = (pz * (1.0 - pz) / draws as f64).sqrt().max(1.0 / draws as f64);
        let z = (f - pz) / se;
        worst = worst.max(z.abs());
        if z.abs() >= 4.0 {
            return Err(format!("case {case} set {s}: frequency {f} vs p_Z {pz} (se {se})"));
        }
    }
    Ok(format!("{per_case} interior + {per_case} crossing geometries x {draws} draws, max |z| = {worst:.2}"))
}

/// The bound-optimal metric never beats the Monte Carlo statistically optimal
/// metric by more than 3 standard errors.
pub fn bound_below_so(candidates: usize, samples: usize, seed: u64) -> Outcome {
    let params = NetworkParams { p_tx: 0.15, sigma_v2: 0.0, ..zone_params(1.0, 30.0, 0.15, 4.0) };
    let so = SoConfig::new(&params, samples);
    let mut worst = f64::NEG_INFINITY;
    let mut done = 0;
    let mut s = 0u64;
    while done < candidates {
        s += 1;
        let mut rng = substream(seed, &[tag::ORACLE, 2 << 32, s]);
        let Some((_, k)) = random_knowledge(&params, &mut rng) else { continue };
        let i = rng.random_range(0..k.len());
        let bo = relaynet::schemes::metric_bo(i, &k, &params).unwrap().metric;
        let est = relaynet::schemes::metric_so(i, &k, &params, &so, &mut rng).unwrap();
        let se = est.stderr.unwrap_or(0.0);
        let z = if se > 0.0 { (bo - est.metric) / se } else { 0.0 };
        worst = worst.max(z);
        if bo > est.metric + 3.0 * se {
            return Err(format!("candidate {s}: BO {bo} > SO {} + 3 x {se}", est.metric));
        }
        done += 1;
    }
    Ok(format!("{done}/{candidates} candidates, largest (BO - SO)/SE = {worst:.2}"))
}

/// One link, no fading, no competing traffic: delivery takes exactly
/// `⌈K / log₂(1 + SNR)⌉` slots, where the noise includes the mean interference
/// from the plane beyond the torus.
pub fn single_link_oracle() -> Check {
    for (alpha, dist) in [(3.0, 3.0), (4.0, 2.0), (3.0, 4.5)] {
        let side = 40.0;
        let lambda = 2.0 / (side * side);
        let cfg = SimConfig {
            area_side: side,
            n_nodes: 2,
            mobility_sigma: 0.0,
            slots: 200,
            gen_prob: 0.0,
            fading: false,
            trace: true,
            params: NetworkParams { lambda, p_tx: 1.0, alpha, sigma_v2: 1e-3, r_a: 5.0, ..NetworkParams::default() },
            ..SimConfig::standard(SchemeId::Nn, 1.0)
        };
        let homes = [Point2::new(10.0, 10.0), Point2::new(10.0 + dist, 10.0)];
        let nodes = homes.iter().enumerate().map(|(id, &home)| NodeState { id, home, position: home, buffer: Vec::new() }).collect();
        let mut state = NetState::with_nodes(nodes);
        state.inject_message(0, 1, &cfg);
        let run = run_from(&mut state, &cfg, &SimResources::default()).map_err(|e| e.to_string())?;
        let big_r = side / PI.sqrt();
        let floor = lambda * 2.0 * PI * big_r.powf(2.0 - alpha) / (alpha - 2.0);
        let per_slot = (1.0 + dist.powf(-alpha) / (floor + 1e-3)).log2();
        let expected = (cfg.k_bits / per_slot).ceil() as usize;
        let trace = run.trace.unwrap();
        let at = trace.iter().position(|&x| x > 0.0).map(|i| i + 1);
        ensure(at == Some(expected), || format!("alpha {alpha}: delivered at {at:?}, expected slot {expected}"))?;
        ensure(run.delivered == 1 && (trace[expected - 1] - dist * cfg.k_bits).abs() < 1e-9, || "delivered progress".into())?;
    }
    Ok(())
}
