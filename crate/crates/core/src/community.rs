//! Modularity and greedy modularity-maximizing community detection.
//!
//! All modularity differences are kept as exact integers scaled by `2m²`, which makes
//! tie-breaking independent of floating-point rounding:
//!
//! * merging communities `i`, `j`: `2m·e_ij − d_i·d_j`
//! * moving vertex `v` from `A` to `B`: `2m·(k_vB − k_vA) − d_v·(D_B − D_A + d_v)`
//!
//! where `e_ij` counts edges between communities, `d` are degree sums and `k_vX` counts
//! edges from `v` into `X` (excluding `v` itself).

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Graph, VertexId};

#[derive(Debug, Error, PartialEq)]
pub enum CommunityError {
    #[error("modularity is undefined for a graph without edges")]
    NoEdges,
    #[error("partition covers {got} vertices, graph has {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("community indices are not dense: index {0} unused")]
    NotDense(u32),
}

/// Assignment of every vertex to a community index in `0..count`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<u32>,
    count: usize,
}

impl Partition {
    /// Validates that indices form the dense range `0..c`.
    pub fn from_assignment(assignment: Vec<u32>) -> Result<Self, CommunityError> {
        let count = assignment.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
        let mut used = vec![false; count];
        for &c in &assignment {
            used[c as usize] = true;
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(CommunityError::NotDense(i as u32));
        }
        Ok(Partition { assignment, count })
    }

    /// Relabels arbitrary labels densely in order of first appearance.
    pub fn from_labels<L: Ord + Clone>(labels: &[L]) -> Self {
        let mut map = BTreeMap::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let next = map.len() as u32;
                *map.entry(l.clone()).or_insert(next)
            })
            .collect();
        Partition {
            assignment,
            count: map.len(),
        }
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            assignment: (0..n as u32).collect(),
            count: n,
        }
    }

    pub fn whole(n: usize) -> Self {
        Partition {
            assignment: vec![0; n],
            count: usize::from(n > 0),
        }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn community_of(&self, v: VertexId) -> u32 {
        self.assignment[v.index()]
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn members(&self) -> Vec<Vec<VertexId>> {
        let mut out = vec![Vec::new(); self.count];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c as usize].push(VertexId::from(i));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct ModularityScore(pub f64);

impl ModularityScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Newman–Girvan modularity `Q = Σ_c (e_c/m − (d_c/2m)²)`.
pub fn modularity(g: &Graph, part: &Partition) -> Result<ModularityScore, CommunityError> {
    if part.len() != g.vertex_count() {
        return Err(CommunityError::SizeMismatch {
            expected: g.vertex_count(),
            got: part.len(),
        });
    }
    let m = g.edge_count();
    if m == 0 {
        return Err(CommunityError::NoEdges);
    }
    let mut intra = vec![0u64; part.count()];
    let mut degree = vec![0u64; part.count()];
    for &(a, b) in g.edges() {
        let (ca, cb) = (part.community_of(a), part.community_of(b));
        if ca == cb {
            intra[ca as usize] += 1;
        }
        degree[ca as usize] += 1;
        degree[cb as usize] += 1;
    }
    let m = m as f64;
    let q = intra
        .iter()
        .zip(&degree)
        .map(|(&e, &d)| e as f64 / m - (d as f64 / (2.0 * m)).powi(2))
        .sum();
    Ok(ModularityScore(q))
}

/// Exact modularity gain of merging two communities, `e_ij/m − 2(d_i/2m)(d_j/2m)`.
pub fn merge_gain(m: usize, e_ij: usize, d_i: usize, d_j: usize) -> f64 {
    let m = m as f64;
    e_ij as f64 / m - 2.0 * (d_i as f64 / (2.0 * m)) * (d_j as f64 / (2.0 * m))
}

/// Independent seeded restarts tried in addition to the deterministic greedy path.
pub const RESTARTS: usize = 8;

/// Greedy modularity maximization.
///
/// Starting from singletons, repeatedly merges the community pair with the largest
/// modularity gain (ties: smallest index pair) until no merge is positive. Each round is
/// followed by single-vertex moves that strictly raise modularity, and rounds repeat until
/// neither step changes anything.
///
/// The agglomerative path alone can stall in a poor local optimum, so [`RESTARTS`] further
/// runs begin with vertex moves in a seeded random order before agglomerating. The partition
/// with the highest modularity wins; ties keep the earliest run, so the result is never worse
/// than plain greedy agglomeration and is fully determined by `seed`.
///
/// Edgeless graphs yield singletons.
pub fn detect_communities(g: &Graph, seed: u64) -> Partition {
    let n = g.vertex_count();
    if g.edge_count() == 0 {
        return Partition::singletons(n);
    }
    let natural: Vec<VertexId> = g.vertices().collect();
    let mut best = refine_from(g, (0..n as u32).collect(), &natural, false);
    let mut best_q = scaled_modularity(g, &best);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RESTARTS {
        let mut order = natural.clone();
        order.shuffle(&mut rng);
        let p = refine_from(g, (0..n as u32).collect(), &order, true);
        let q = scaled_modularity(g, &p);
        if q > best_q {
            best = p;
            best_q = q;
        }
    }
    best
}

fn refine_from(g: &Graph, mut labels: Vec<u32>, order: &[VertexId], moves_first: bool) -> Partition {
    if moves_first {
        local_moves(g, &mut labels, order);
    }
    loop {
        let merged = agglomerate(g, &mut labels);
        let moved = local_moves(g, &mut labels, order);
        if !merged && !moved {
            break;
        }
    }
    canonical(&labels)
}

/// Modularity times `4m²`, exact.
fn scaled_modularity(g: &Graph, p: &Partition) -> i128 {
    let m = g.edge_count() as i128;
    let mut intra = vec![0i128; p.count()];
    let mut deg = vec![0i128; p.count()];
    for &(a, b) in g.edges() {
        let (ca, cb) = (p.community_of(a) as usize, p.community_of(b) as usize);
        if ca == cb {
            intra[ca] += 1;
        }
        deg[ca] += 1;
        deg[cb] += 1;
    }
    intra.iter().zip(&deg).map(|(e, d)| 4 * m * e - d * d).sum()
}

/// Dense relabeling ordered by each community's smallest vertex.
fn canonical(labels: &[u32]) -> Partition {
    Partition::from_labels(labels)
}

/// Agglomerates the communities in `labels` in place. Returns whether any merge happened.
fn agglomerate(g: &Graph, labels: &mut [u32]) -> bool {
    let dense = canonical(labels);
    let c = dense.count();
    let two_m = 2 * g.edge_count() as i64;

    let mut deg = vec![0i64; c];
    let mut links: Vec<BTreeMap<u32, i64>> = vec![BTreeMap::new(); c];
    for &(a, b) in g.edges() {
        let (ca, cb) = (dense.community_of(a), dense.community_of(b));
        deg[ca as usize] += 1;
        deg[cb as usize] += 1;
        if ca != cb {
            *links[ca as usize].entry(cb).or_insert(0) += 1;
            *links[cb as usize].entry(ca).or_insert(0) += 1;
        }
    }
    let key = |e: i64, di: i64, dj: i64| two_m * e - di * dj;

    let mut heap: BTreeSet<(Reverse<i64>, u32, u32)> = BTreeSet::new();
    for i in 0..c {
        for (&j, &e) in &links[i] {
            if (i as u32) < j {
                heap.insert((Reverse(key(e, deg[i], deg[j as usize])), i as u32, j));
            }
        }
    }

    let mut parent: Vec<u32> = (0..c as u32).collect();
    let mut merged_any = false;
    while let Some(&(Reverse(k), i, j)) = heap.first() {
        if k <= 0 {
            break;
        }
        merged_any = true;
        heap.pop_first();
        // j is absorbed into i.
        let (iu, ju) = (i as usize, j as usize);
        let jlinks = std::mem::take(&mut links[ju]);
        let ilinks = std::mem::take(&mut links[iu]);
        for (&x, &e) in &ilinks {
            if x != j {
                let (a, b) = (i.min(x), i.max(x));
                heap.remove(&(Reverse(key(e, deg[a as usize], deg[b as usize])), a, b));
            }
        }
        for (&x, &e) in &jlinks {
            if x != i {
                let (a, b) = (j.min(x), j.max(x));
                heap.remove(&(Reverse(key(e, deg[a as usize], deg[b as usize])), a, b));
            }
        }
        let mut combined = ilinks;
        combined.remove(&j);
        for (x, e) in jlinks {
            if x != i {
                *combined.entry(x).or_insert(0) += e;
            }
        }
        deg[iu] += deg[ju];
        deg[ju] = 0;
        for (&x, &e) in &combined {
            let xl = &mut links[x as usize];
            xl.remove(&j);
            xl.insert(i, e);
            let (a, b) = (i.min(x), i.max(x));
            heap.insert((Reverse(key(e, deg[a as usize], deg[b as usize])), a, b));
        }
        links[iu] = combined;
        parent[ju] = i;
    }

    if merged_any {
        let find = |mut x: u32| {
            while parent[x as usize] != x {
                x = parent[x as usize];
            }
            x
        };
        for (v, l) in labels.iter_mut().enumerate() {
            *l = find(dense.community_of(VertexId::from(v)));
        }
    }
    merged_any
}

/// Moves single vertices to the neighbouring (or a fresh) community with the largest
/// positive gain until none exists. Returns whether anything moved.
fn local_moves(g: &Graph, labels: &mut [u32], order: &[VertexId]) -> bool {
    let n = g.vertex_count();
    let two_m = 2 * g.edge_count() as i64;
    let mut total = vec![0i64; n + 1];
    for v in g.vertices() {
        total[labels[v.index()] as usize] += g.degree(v) as i64;
    }
    let mut moved_any = false;
    loop {
        let mut moved = false;
        for &v in order {
            let cur = labels[v.index()];
            let dv = g.degree(v) as i64;
            let mut k: BTreeMap<u32, i64> = BTreeMap::new();
            for &u in g.neighbors(v) {
                *k.entry(labels[u.index()]).or_insert(0) += 1;
            }
            let k_cur = k.get(&cur).copied().unwrap_or(0);
            let d_cur = total[cur as usize];
            let gain = |k_to: i64, d_to: i64| two_m * (k_to - k_cur) - dv * (d_to - d_cur + dv);

            let mut best: Option<(i64, u32)> = None;
            for (&c, &kc) in &k {
                if c == cur {
                    continue;
                }
                let gn = gain(kc, total[c as usize]);
                if gn > 0 && best.is_none_or(|(bg, _)| gn > bg) {
                    best = Some((gn, c));
                }
            }
            // A fresh singleton community.
            let isolated = gain(0, 0);
            if isolated > 0 && best.is_none_or(|(bg, _)| isolated > bg) {
                if let Some(free) = total.iter().position(|&t| t == 0) {
                    best = Some((isolated, free as u32));
                }
            }
            if let Some((_, to)) = best {
                total[cur as usize] -= dv;
                total[to as usize] += dv;
                labels[v.index()] = to;
                moved = true;
            }
        }
        if !moved {
            break;
        }
        moved_any = true;
    }
    moved_any
}
