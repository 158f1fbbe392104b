//! The probe's local knowledge: positions and channel gains inside the
//! routing zone, with the derived quantities every routing metric needs.

use crate::channel::path_gain_sq;
use crate::error::{Error, Result};
use crate::geometry::{NetworkParams, Node};

#[derive(Debug, Clone)]
pub struct LocalKnowledge {
    nodes: Vec<Node>,
    dist: Vec<f64>,
    signal: Vec<f64>,
    /// Row-major `n × n` squared inter-neighbor distances.
    pair_dist_sq: Vec<f64>,
}

impl LocalKnowledge {
    pub fn new(nodes: &[Node], params: &NetworkParams) -> Result<Self> {
        let n = nodes.len();
        let mut dist = Vec::with_capacity(n);
        let mut signal = Vec::with_capacity(n);
        for node in nodes {
            let r = node.pos.norm();
            if !(r > 0.0) {
                return Err(Error::ZeroDistance(r));
            }
            dist.push(r);
            signal.push(params.rho * path_gain_sq(r * r, params.alpha) * node.fading);
        }
        let mut pair_dist_sq = vec![0.0; n * n];
        for i in 0..n {
            for l in (i + 1)..n {
                let d2 = nodes[i].pos.dist_sq(&nodes[l].pos);
                if !(d2 > 0.0) {
                    return Err(Error::ZeroDistance(0.0));
                }
                pair_dist_sq[i * n + l] = d2;
                pair_dist_sq[l * n + i] = d2;
            }
        }
        Ok(Self {
            nodes: nodes.to_vec(),
            dist,
            signal,
            pair_dist_sq,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    /// Distance from the probe to neighbor `i`.
    pub fn distance(&self, i: usize) -> f64 {
        self.dist[i]
    }

    /// Desired signal power `S_{i,0}` at neighbor `i`.
    pub fn signal(&self, i: usize) -> f64 {
        self.signal[i]
    }

    pub fn pair_dist_sq(&self, i: usize, l: usize) -> f64 {
        self.pair_dist_sq[i * self.nodes.len() + l]
    }

    pub fn check(&self, i: usize) -> Result<()> {
        if i < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::CandidateOutOfRange {
                index: i,
                len: self.nodes.len(),
            })
        }
    }
}
