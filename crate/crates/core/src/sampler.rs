//! Graph down-sampling: random node (RN), random edge (RE) and random walk with restarts (RW).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{degree_distribution, DegreeHistogram, Graph, VertexId};

/// Walk length cap, as a multiple of the vertex count.
pub const RW_STEP_CAP_FACTOR: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum SampleError {
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("target fraction {0} outside (0, 1]")]
    Fraction(f64),
    #[error("degree histogram is empty")]
    EmptyHistogram,
    #[error("unknown sampling scheme `{0}` (expected rn, re or rw)")]
    UnknownScheme(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Rn,
    Re,
    Rw,
}

impl FromStr for Scheme {
    type Err = SampleError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rn" => Ok(Scheme::Rn),
            "re" => Ok(Scheme::Re),
            "rw" => Ok(Scheme::Rw),
            _ => Err(SampleError::UnknownScheme(s.to_string())),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Rn => "rn",
            Scheme::Re => "re",
            Scheme::Rw => "rw",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub scheme: Scheme,
    /// Inclusion probability (RN, RE) or restart probability (RW).
    pub p: f64,
    /// Fraction of vertices the walk must visit (RW only).
    #[serde(default = "default_fraction")]
    pub target_fraction: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_fraction() -> f64 {
    1.0
}

impl SampleSpec {
    pub fn validate(&self) -> Result<(), SampleError> {
        check_p(self.p)?;
        if !(self.target_fraction > 0.0 && self.target_fraction <= 1.0) {
            return Err(SampleError::Fraction(self.target_fraction));
        }
        Ok(())
    }

    pub fn apply(&self, g: &Graph) -> Result<Sample, SampleError> {
        self.validate()?;
        match self.scheme {
            Scheme::Rn => sample_rn(g, self.p, self.rng_seed),
            Scheme::Re => sample_re(g, self.p, self.rng_seed),
            Scheme::Rw => sample_rw(g, self.p, self.target_fraction, self.rng_seed),
        }
    }
}

fn check_p(p: f64) -> Result<(), SampleError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SampleError::Probability(p))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct WalkReport {
    pub steps: usize,
    pub jumps: usize,
    /// Jumps taken because the walker sat on a vertex with no neighbours.
    pub forced_jumps: usize,
    pub step_cap_hit: bool,
    pub visited_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct Sample {
    pub graph: Graph,
    /// `origin[i]` is the source-graph vertex that became sample vertex `i`.
    pub origin: Vec<VertexId>,
    pub walk: Option<WalkReport>,
}

impl Sample {
    fn induced(g: &Graph, keep: Vec<VertexId>, walk: Option<WalkReport>) -> Self {
        Sample {
            graph: g.induced_subgraph(&keep),
            origin: keep,
            walk,
        }
    }

    /// True when the walk stopped at the step cap before reaching its target.
    pub fn is_partial(&self) -> bool {
        self.walk.as_ref().is_some_and(|w| w.step_cap_hit)
    }
}

/// Keeps every vertex independently with probability `p`; returns the induced subgraph.
pub fn sample_rn(g: &Graph, p: f64, seed: u64) -> Result<Sample, SampleError> {
    check_p(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = g.vertices().filter(|_| rng.random_bool(p)).collect();
    Ok(Sample::induced(g, keep, None))
}

/// Keeps every edge independently with probability `p`; vertices are the endpoints of kept
/// edges, so the result has no isolated vertices.
pub fn sample_re(g: &Graph, p: f64, seed: u64) -> Result<Sample, SampleError> {
    check_p(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kept: Vec<_> = g.edges().iter().copied().filter(|_| rng.random_bool(p)).collect();
    let graph = g.edge_subgraph(&kept);
    let origin = graph
        .vertices()
        .map(|v| g.lookup(graph.id(v)).expect("edge subgraph ids come from source"))
        .collect();
    Ok(Sample {
        graph,
        origin,
        walk: None,
    })
}

/// Random walk with restart probability `p`, stopping once `target_fraction` of the
/// vertices have been visited or after `100·N` steps. Dead ends force a jump.
pub fn sample_rw(g: &Graph, p: f64, target_fraction: f64, seed: u64) -> Result<Sample, SampleError> {
    check_p(p)?;
    if !(target_fraction > 0.0 && target_fraction <= 1.0) {
        return Err(SampleError::Fraction(target_fraction));
    }
    let n = g.vertex_count();
    if n == 0 {
        return Ok(Sample::induced(g, Vec::new(), Some(WalkReport::default())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = ((target_fraction * n as f64).ceil() as usize).clamp(1, n);
    let cap = RW_STEP_CAP_FACTOR * n;

    let mut visited = vec![false; n];
    let mut order = BTreeSet::new();
    let mut cur = VertexId::from(rng.random_range(0..n));
    visited[cur.index()] = true;
    order.insert(cur);
    let mut report = WalkReport::default();

    while order.len() < target {
        if report.steps >= cap {
            report.step_cap_hit = true;
            break;
        }
        report.steps += 1;
        let nbrs = g.neighbors(cur);
        cur = if nbrs.is_empty() {
            report.forced_jumps += 1;
            report.jumps += 1;
            VertexId::from(rng.random_range(0..n))
        } else if rng.random_bool(p) {
            report.jumps += 1;
            VertexId::from(rng.random_range(0..n))
        } else {
            nbrs[rng.random_range(0..nbrs.len())]
        };
        if !visited[cur.index()] {
            visited[cur.index()] = true;
            order.insert(cur);
        }
    }
    report.visited_fraction = order.len() as f64 / n as f64;
    Ok(Sample::induced(g, order.into_iter().collect(), Some(report)))
}

/// Kolmogorov–Smirnov statistic between two degree distributions.
pub fn ks_distance(h1: &DegreeHistogram, h2: &DegreeHistogram) -> Result<f64, SampleError> {
    if h1.is_empty() || h2.is_empty() {
        return Err(SampleError::EmptyHistogram);
    }
    let degrees: BTreeSet<usize> = h1.counts.keys().chain(h2.counts.keys()).copied().collect();
    let (mut c1, mut c2) = (0usize, 0usize);
    let mut best = 0.0f64;
    for d in degrees {
        c1 += h1.counts.get(&d).copied().unwrap_or(0);
        c2 += h2.counts.get(&d).copied().unwrap_or(0);
        let gap = (c1 as f64 / h1.n as f64 - c2 as f64 / h2.n as f64).abs();
        best = best.max(gap);
    }
    Ok(best)
}

/// Expected vertex count of an RE sample: `Σ_v 1 − (1 − p)^deg(v)`.
pub fn expected_re_vertices(g: &Graph, p: f64) -> f64 {
    g.vertices()
        .map(|v| 1.0 - (1.0 - p).powi(g.degree(v) as i32))
        .sum()
}

/// Edge probability at which an RE sample has `expected` vertices on average.
/// Saturates at 1 when the target exceeds the non-isolated vertex count.
pub fn matched_re_probability(g: &Graph, expected: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if expected_re_vertices(g, hi) <= expected {
        return 1.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if expected_re_vertices(g, mid) < expected {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// KS distance between the degree distributions of two graphs.
pub fn degree_ks(a: &Graph, b: &Graph) -> Result<f64, SampleError> {
    ks_distance(&degree_distribution(a), &degree_distribution(b))
}
