//! Random-walk corpora: uniform (DeepWalk) and second-order biased
//! (Node2Vec) walks, plus skip-gram context pairs.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};
use crate::seed::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WalkStrategy {
    Uniform,
    /// `p` is the return parameter, `q` the in-out parameter.
    Biased {
        p: f64,
        q: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<VertexId>>,
    pub walk_length: usize,
    pub walks_per_vertex: usize,
    pub strategy: WalkStrategy,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextPairs {
    pub pairs: Vec<(VertexId, VertexId)>,
    pub window: usize,
}

/// Uniform random walk of at most `length` vertices starting at `start`.
/// Stops early only at a vertex without neighbors.
pub fn uniform_walk(g: &Graph, start: VertexId, length: usize, rng: &mut Rng) -> Vec<VertexId> {
    let mut walk = Vec::with_capacity(length);
    walk.push(start);
    let mut cur = start;
    while walk.len() < length {
        let nbrs = g.adj(cur);
        if nbrs.is_empty() {
            break;
        }
        cur = nbrs[rng.random_range(0..nbrs.len())];
        walk.push(cur);
    }
    walk
}

/// Unnormalized Node2Vec weight of stepping from `cur` to `next` after
/// arriving from `prev`.
#[inline]
pub fn transition_weight(g: &Graph, prev: VertexId, next: VertexId, p: f64, q: f64) -> f64 {
    if next == prev {
        1.0 / p
    } else if g.has_edge(prev, next) {
        1.0
    } else {
        1.0 / q
    }
}

/// Normalized next-step distribution over `cur`'s neighbors, in adjacency
/// order.
pub fn transition_probabilities(
    g: &Graph,
    prev: VertexId,
    cur: VertexId,
    p: f64,
    q: f64,
) -> Vec<f64> {
    let w: Vec<f64> = g
        .adj(cur)
        .iter()
        .map(|&x| transition_weight(g, prev, x, p, q))
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Second-order biased walk. The first step is uniform; afterwards each
/// step weighs neighbors by `1/p` (return), `1` (neighbor of the previous
/// vertex) or `1/q` (moving outward).
pub fn biased_walk(
    g: &Graph,
    start: VertexId,
    length: usize,
    p: f64,
    q: f64,
    rng: &mut Rng,
) -> Vec<VertexId> {
    let mut walk = Vec::with_capacity(length);
    walk.push(start);
    if length < 2 || g.degree(start) == 0 {
        return walk;
    }
    let first = g.adj(start);
    walk.push(first[rng.random_range(0..first.len())]);
    let mut weights = Vec::new();
    while walk.len() < length {
        let prev = walk[walk.len() - 2];
        let cur = walk[walk.len() - 1];
        walk.push(sample_step(g, prev, cur, p, q, rng, &mut weights));
    }
    walk
}

/// One second-order step from `cur` having arrived from `prev`.
/// `cur` must have at least one neighbor (it does whenever `prev` exists).
pub fn biased_step(
    g: &Graph,
    prev: VertexId,
    cur: VertexId,
    p: f64,
    q: f64,
    rng: &mut Rng,
) -> VertexId {
    sample_step(g, prev, cur, p, q, rng, &mut Vec::new())
}

fn sample_step(
    g: &Graph,
    prev: VertexId,
    cur: VertexId,
    p: f64,
    q: f64,
    rng: &mut Rng,
    weights: &mut Vec<f64>,
) -> VertexId {
    let nbrs = g.adj(cur);
    weights.clear();
    weights.extend(nbrs.iter().map(|&x| transition_weight(g, prev, x, p, q)));
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (&x, &w) in nbrs.iter().zip(weights.iter()) {
        if target < w {
            return x;
        }
        target -= w;
    }
    nbrs[nbrs.len() - 1]
}

/// Generates `walks_per_vertex` passes of walks rooted at every vertex.
///
/// Each pass visits the roots in an order shuffled by `(seed, pass)`; each
/// walk draws from its own stream seeded by `(seed, pass, root)`, so the
/// corpus does not depend on how work is scheduled.
pub fn generate_corpus(
    g: &Graph,
    walks_per_vertex: usize,
    length: usize,
    strategy: WalkStrategy,
    seed: u64,
) -> Result<WalkCorpus> {
    if walks_per_vertex == 0 || length == 0 {
        return Err(Error::InvalidParameter(
            "walks_per_vertex and walk length must be positive".into(),
        ));
    }
    if let WalkStrategy::Biased { p, q } = strategy {
        if !(p > 0.0 && q > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "p and q must be positive, got p={p} q={q}"
            )));
        }
    }
    let n = g.vertex_count();
    let mut walks = Vec::with_capacity(n * walks_per_vertex);
    for pass in 0..walks_per_vertex {
        let mut order: Vec<VertexId> = (0..n).collect();
        order.shuffle(&mut seed::rng(seed, &[seed::tag("order"), pass as u64]));
        let batch: Vec<Vec<VertexId>> = order
            .par_iter()
            .map(|&root| {
                let mut rng = seed::rng(seed, &[seed::tag("walk"), pass as u64, root as u64]);
                match strategy {
                    WalkStrategy::Uniform => uniform_walk(g, root, length, &mut rng),
                    WalkStrategy::Biased { p, q } => biased_walk(g, root, length, p, q, &mut rng),
                }
            })
            .collect();
        walks.extend(batch);
    }
    Ok(WalkCorpus {
        walks,
        walk_length: length,
        walks_per_vertex,
        strategy,
        seed,
    })
}

/// Calls `f(center, context)` for every pair within `window` positions.
#[inline]
pub fn for_each_pair(walk: &[VertexId], window: usize, mut f: impl FnMut(VertexId, VertexId)) {
    for (i, &center) in walk.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(walk.len() - 1);
        for j in lo..=hi {
            if j != i {
                f(center, walk[j]);
            }
        }
    }
}

pub fn context_pairs(corpus: &WalkCorpus, window: usize) -> Result<ContextPairs> {
    if window == 0 {
        return Err(Error::InvalidParameter("window must be at least 1".into()));
    }
    let mut pairs = Vec::new();
    for walk in &corpus.walks {
        for_each_pair(walk, window, |c, x| pairs.push((c, x)));
    }
    Ok(ContextPairs { pairs, window })
}

impl WalkCorpus {
    /// Occurrence count of every vertex across all walks.
    pub fn frequencies(&self, vertex_count: usize) -> Vec<u64> {
        let mut freq = vec![0u64; vertex_count];
        for walk in &self.walks {
            for &v in walk {
                freq[v] += 1;
            }
        }
        freq
    }

    /// One walk per line, space-separated original labels.
    pub fn write<W: Write>(&self, g: &Graph, mut out: W) -> std::io::Result<()> {
        for walk in &self.walks {
            let line: Vec<&str> = walk.iter().map(|&v| g.label(v)).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{complete, karate_club, path};

    #[test]
    fn forced_walk_on_single_edge() {
        let g = path(2);
        let mut rng = seed::rng(0, &[]);
        assert_eq!(uniform_walk(&g, 0, 4, &mut rng), vec![0, 1, 0, 1]);
        assert_eq!(biased_walk(&g, 0, 4, 0.5, 2.0, &mut rng), vec![0, 1, 0, 1]);
    }

    #[test]
    fn isolated_vertex_halts() {
        let g = Graph::from_edges(3, &[(0, 1)]).unwrap();
        let mut rng = seed::rng(0, &[]);
        assert_eq!(uniform_walk(&g, 2, 5, &mut rng), vec![2]);
        assert_eq!(biased_walk(&g, 2, 5, 1.0, 1.0, &mut rng), vec![2]);
        let corpus = generate_corpus(&g, 2, 5, WalkStrategy::Uniform, 1).unwrap();
        assert_eq!(corpus.walks.len(), 6);
        assert_eq!(corpus.walks.iter().filter(|w| w.len() == 1).count(), 2);
    }

    #[test]
    fn uniform_step_distribution() {
        let g = complete(3);
        let mut rng = seed::rng(42, &[]);
        let walk = uniform_walk(&g, 0, 100_001, &mut rng);
        let mut counts = [[0usize; 3]; 3];
        for w in walk.windows(2) {
            counts[w[0]][w[1]] += 1;
        }
        for (from, row) in counts.iter().enumerate() {
            let total: usize = row.iter().sum();
            for (to, &c) in row.iter().enumerate() {
                if to != from {
                    assert!((c as f64 / total as f64 - 0.5).abs() < 0.01);
                }
            }
        }
    }

    #[test]
    fn p3_return_probability() {
        // at b coming from a: weights 1/0.5 = 2 (return) vs 1/2 (outward)
        let g = path(3);
        let probs = transition_probabilities(&g, 0, 1, 0.5, 2.0);
        assert!((probs[0] - 0.8).abs() < 1e-12);
        assert!((probs[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn triangle_with_pendant_weights() {
        // triangle 0-1-2 with pendant 3 on vertex 1; at 1 coming from 0:
        // 0 -> 1/p, 2 (adjacent to 0) -> 1, 3 -> 1/q
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (0, 2), (1, 3)]).unwrap();
        let (p, q) = (0.5, 2.0);
        let probs = transition_probabilities(&g, 0, 1, p, q);
        let total = 2.0 + 1.0 + 0.5;
        let expect = [2.0 / total, 1.0 / total, 0.5 / total];
        for (a, b) in probs.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn corpus_shape_and_determinism() {
        let g = karate_club();
        let a = generate_corpus(&g, 10, 80, WalkStrategy::Biased { p: 0.5, q: 2.0 }, 9).unwrap();
        assert_eq!(a.walks.len(), 340);
        for w in &a.walks {
            assert_eq!(w.len(), 80);
            assert!(w.windows(2).all(|s| g.has_edge(s[0], s[1])));
        }
        let b = generate_corpus(&g, 10, 80, WalkStrategy::Biased { p: 0.5, q: 2.0 }, 9).unwrap();
        assert_eq!(a, b);
        let single = generate_corpus(&g, 1, 1, WalkStrategy::Uniform, 0).unwrap();
        assert!(single.walks.iter().all(|w| w.len() == 1));
        let mut roots: Vec<_> = single.walks.iter().map(|w| w[0]).collect();
        roots.sort_unstable();
        assert_eq!(roots, (0..34).collect::<Vec<_>>());
    }

    #[test]
    fn corpus_rejects_bad_parameters() {
        let g = path(3);
        assert!(generate_corpus(&g, 0, 5, WalkStrategy::Uniform, 0).is_err());
        assert!(generate_corpus(&g, 1, 5, WalkStrategy::Biased { p: 0.0, q: 1.0 }, 0).is_err());
    }

    fn corpus_of(walks: Vec<Vec<VertexId>>) -> WalkCorpus {
        WalkCorpus {
            walks,
            walk_length: 0,
            walks_per_vertex: 1,
            strategy: WalkStrategy::Uniform,
            seed: 0,
        }
    }

    #[test]
    fn context_pair_enumeration() {
        let pairs = context_pairs(&corpus_of(vec![vec![0, 1, 2]]), 1).unwrap();
        assert_eq!(pairs.pairs, vec![(0, 1), (1, 0), (1, 2), (2, 1)]);
        assert!(context_pairs(&corpus_of(vec![vec![7]]), 3)
            .unwrap()
            .pairs
            .is_empty());
        assert!(context_pairs(&corpus_of(vec![vec![0, 1]]), 0).is_err());
    }

    #[test]
    fn context_pair_count_closed_form() {
        for len in 1..12usize {
            let walk: Vec<_> = (0..len).collect();
            let got = context_pairs(&corpus_of(vec![walk]), 2)
                .unwrap()
                .pairs
                .len();
            let expect: usize = (0..len).map(|i| i.min(2) + (len - 1 - i).min(2)).sum();
            assert_eq!(got, expect);
            if len >= 5 {
                assert_eq!(expect, 4 * len - 6);
            }
        }
    }

    #[test]
    fn corpus_dump_uses_labels() {
        let g = crate::graph::load_edge_list("x y\n".as_bytes())
            .unwrap()
            .graph;
        let corpus = corpus_of(vec![vec![0, 1, 0]]);
        let mut out = Vec::new();
        corpus.write(&g, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "x y x\n");
    }
}
