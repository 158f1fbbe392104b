//! Lookup table for the narrow-knowledge metric,
//! `q(x) = E{log₂(1 + x / (J + σ²))}` with `J` the interference at a typical
//! point of the plane.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::log2_1p_ratio;
use crate::error::{invalid, Error, Result};
use crate::field::{ExteriorDraw, ExteriorField};
use crate::geometry::{NetworkParams, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QGridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
}

impl QGridConfig {
    /// 256 log-spaced knots over `[1e-4, 1e6] × ρ r_a^{-α}`.
    pub fn standard(params: &NetworkParams) -> Self {
        let reference = params.rho * params.r_a.powf(-params.alpha);
        Self {
            x_min: 1e-4 * reference,
            x_max: 1e6 * reference,
            points: 256,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min > 0.0 && self.x_max > self.x_min && self.x_max.is_finite()) {
            return Err(invalid("grid", format!("need 0 < x_min < x_max, got [{}, {}]", self.x_min, self.x_max)));
        }
        if self.points < 2 {
            return Err(invalid("points", format!("need at least 2 grid points, got {}", self.points)));
        }
        Ok(())
    }

    pub fn knots(&self) -> Vec<f64> {
        let (lo, hi) = (self.x_min.ln(), self.x_max.ln());
        let n = self.points - 1;
        (0..=n)
            .map(|k| if k == n { self.x_max } else { (lo + (hi - lo) * k as f64 / n as f64).exp() })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub params_fingerprint: String,
    pub mc_samples: usize,
    /// Set when the raw estimates needed an isotonic repair.
    pub repaired: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QLookup {
    pub value: f64,
    pub out_of_range: bool,
}

/// Identity of the parameters `q` depends on. The routing-zone radius and the
/// bandwidth do not enter the interference law at a typical point.
pub fn interference_fingerprint(params: &NetworkParams) -> String {
    format!(
        "lambda={};p_tx={};alpha={};rho={};sigma_v2={}",
        params.lambda, params.p_tx, params.alpha, params.rho, params.sigma_v2
    )
}

/// Draws of the interference at the origin from an ALOHA-thinned PPP, with no
/// exclusion zone.
pub fn sample_typical_interference<R: Rng + ?Sized>(
    params: &NetworkParams,
    field: &ExteriorField,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let around_point = NetworkParams { r_a: 0.0, ..*params };
    let tail = field.tail_mean(0.0, params)?;
    let mut draw = ExteriorDraw::default();
    let origin = Point2::ORIGIN;
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        draw.resample(field, &around_point, rng);
        let j = draw.interference_at(&origin, params, rng) + tail;
        out.push(j);
    }
    Ok(out)
}

/// Pool-adjacent-violators repair to a nondecreasing sequence.
fn isotonic(values: &mut [f64]) {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values.iter() {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a <= b {
                break;
            }
            blocks.pop();
            let n = na + nb;
            *blocks.last_mut().unwrap() = ((a * na as f64 + b * nb as f64) / n as f64, n);
        }
    }
    let mut k = 0;
    for (v, n) in blocks {
        for slot in &mut values[k..k + n] {
            *slot = v;
        }
        k += n;
    }
}

/// Builds the table from one shared set of interference draws, so every knot
/// sees the same `J` samples and the estimates are monotone in `x`.
pub fn build_q_table<R: Rng + ?Sized>(
    params: &NetworkParams,
    grid_cfg: &QGridConfig,
    samples: usize,
    field: &ExteriorField,
    rng: &mut R,
) -> Result<QTable> {
    grid_cfg.validate()?;
    if samples < 2 {
        return Err(invalid("samples", "need at least 2 Monte Carlo samples"));
    }
    let grid = grid_cfg.knots();
    let draws = sample_typical_interference(params, field, samples, rng)?;
    let dens: Vec<f64> = draws.iter().map(|j| j + params.sigma_v2).collect();
    let mut values = Vec::with_capacity(grid.len());
    let mut stderr = Vec::with_capacity(grid.len());
    let n = samples as f64;
    for &x in &grid {
        let (mut s, mut s2) = (0.0, 0.0);
        for &den in &dens {
            let v = log2_1p_ratio(x, den);
            s += v;
            s2 += v * v;
        }
        let mean = s / n;
        let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
        values.push(mean);
        stderr.push((var / n).sqrt());
    }
    let repaired = values.windows(2).any(|w| w[1] < w[0]);
    if repaired {
        isotonic(&mut values);
    }
    Ok(QTable {
        grid,
        values,
        stderr,
        params_fingerprint: interference_fingerprint(params),
        mc_samples: samples,
        repaired,
    })
}

impl QTable {
    pub fn check_params(&self, params: &NetworkParams) -> Result<()> {
        let requested = interference_fingerprint(params);
        if requested != self.params_fingerprint {
            return Err(Error::FingerprintMismatch {
                table: self.params_fingerprint.clone(),
                requested,
            });
        }
        Ok(())
    }

    /// Piecewise-linear interpolation in `ln x`, clamped at the grid ends.
    pub fn lookup(&self, x: f64) -> QLookup {
        if x == 0.0 {
            return QLookup { value: 0.0, out_of_range: false };
        }
        let first = self.grid[0];
        let last = *self.grid.last().unwrap();
        if x < first {
            return QLookup { value: self.values[0], out_of_range: true };
        }
        if x > last {
            return QLookup { value: *self.values.last().unwrap(), out_of_range: true };
        }
        let k = self.grid.partition_point(|&g| g <= x);
        if k == 0 {
            return QLookup { value: self.values[0], out_of_range: false };
        }
        if k >= self.grid.len() {
            return QLookup { value: *self.values.last().unwrap(), out_of_range: false };
        }
        let (x0, x1) = (self.grid[k - 1], self.grid[k]);
        if x == x0 {
            return QLookup { value: self.values[k - 1], out_of_range: false };
        }
        let t = (x.ln() - x0.ln()) / (x1.ln() - x0.ln());
        let value = self.values[k - 1] + t * (self.values[k] - self.values[k - 1]);
        QLookup { value, out_of_range: false }
    }

    /// CSV with a fingerprint comment line, then `x,q,stderr` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# params: {}; mc_samples={}; repaired={}",
            self.params_fingerprint, self.mc_samples, self.repaired
        );
        out.push_str("x,q,stderr\n");
        for ((x, q), se) in self.grid.iter().zip(&self.values).zip(&self.stderr) {
            let _ = writeln!(out, "{x},{q},{se}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |reason: String| invalid("qtable", reason);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let meta = header
            .strip_prefix("# params: ")
            .ok_or_else(|| bad("missing fingerprint comment line".into()))?;
        let mut parts = meta.rsplitn(3, "; ");
        let repaired = parts
            .next()
            .and_then(|s| s.strip_prefix("repaired="))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("missing repaired flag".into()))?;
        let mc_samples = parts
            .next()
            .and_then(|s| s.strip_prefix("mc_samples="))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("missing mc_samples".into()))?;
        let params_fingerprint = parts.next().ok_or_else(|| bad("missing fingerprint".into()))?.to_string();
        if lines.next() != Some("x,q,stderr") {
            return Err(bad("missing column header".into()));
        }
        let (mut grid, mut values, mut stderr) = (Vec::new(), Vec::new(), Vec::new());
        for (n, line) in lines.enumerate() {
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("row {}: {e}", n + 1)))?;
            if cols.len() != 3 {
                return Err(bad(format!("row {}: expected 3 columns", n + 1)));
            }
            grid.push(cols[0]);
            values.push(cols[1]);
            stderr.push(cols[2]);
        }
        if grid.len() < 2 {
            return Err(bad("need at least 2 rows".into()));
        }
        Ok(Self {
            grid,
            values,
            stderr,
            params_fingerprint,
            mc_samples,
            repaired,
        })
    }
}
