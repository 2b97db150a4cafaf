//! Independent reference implementations shared by the integration tests.
//! Each one follows a textbook definition rather than the library's
//! algorithm.

#![allow(dead_code)]

use std::collections::VecDeque;

use graphprobe::seed;
use graphprobe::Graph;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;

pub fn adjacency(g: &Graph) -> DMatrix<f64> {
    let n = g.vertex_count();
    let mut a = DMatrix::zeros(n, n);
    for (u, v) in g.edges() {
        a[(u, v)] = 1.0;
        a[(v, u)] = 1.0;
    }
    a
}

/// Projection of the uniform vector onto the eigenspace of the largest
/// adjacency eigenvalue, unit L2 norm. For a connected graph this is the
/// Perron vector; on ties between components it is the limit power
/// iteration from the uniform start reaches.
pub fn dense_eigenvector_centrality(g: &Graph) -> Vec<f64> {
    let n = g.vertex_count();
    let eig = SymmetricEigen::new(adjacency(g));
    let top = eig.eigenvalues.max();
    let ones = DVector::from_element(n, 1.0);
    let mut x = DVector::zeros(n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if (lambda - top).abs() < 1e-9 {
            let v = eig.eigenvectors.column(k);
            x += v * v.dot(&ones);
        }
    }
    let norm = x.norm();
    x.iter().map(|a| a / norm).collect()
}

/// PageRank as the solution of `(I − d·M) x = (1−d)/n · 1`, where column
/// `u` of `M` spreads `u`'s mass over its neighbours, or uniformly over all
/// vertices when `u` has no neighbours.
pub fn dense_pagerank(g: &Graph, damping: f64) -> Vec<f64> {
    let n = g.vertex_count();
    let mut m = DMatrix::zeros(n, n);
    for u in 0..n {
        let d = g.degree(u);
        if d == 0 {
            for v in 0..n {
                m[(v, u)] = 1.0 / n as f64;
            }
        } else {
            for &v in g.adj(u) {
                m[(v, u)] = 1.0 / d as f64;
            }
        }
    }
    let lhs = DMatrix::identity(n, n) - m * damping;
    let rhs = DVector::from_element(n, (1.0 - damping) / n as f64);
    lhs.lu()
        .solve(&rhs)
        .expect("I − dM is nonsingular")
        .iter()
        .copied()
        .collect()
}

/// Hop distances and shortest-path counts from `s`.
fn bfs_counts(g: &Graph, s: usize) -> (Vec<Option<usize>>, Vec<f64>) {
    let n = g.vertex_count();
    let mut dist = vec![None; n];
    let mut sigma = vec![0.0; n];
    dist[s] = Some(0);
    sigma[s] = 1.0;
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for &v in g.adj(u) {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
            if dist[v] == Some(du + 1) {
                sigma[v] += sigma[u];
            }
        }
    }
    (dist, sigma)
}

/// Betweenness from the pair-sum definition
/// `BC(v) = Σ_{s<t, s,t≠v} σ_st(v) / σ_st`.
pub fn brute_betweenness(g: &Graph) -> Vec<f64> {
    let n = g.vertex_count();
    let all: Vec<_> = (0..n).map(|s| bfs_counts(g, s)).collect();
    let mut bc = vec![0.0; n];
    for s in 0..n {
        for t in (s + 1)..n {
            let Some(dst) = all[s].0[t] else { continue };
            for v in 0..n {
                if v == s || v == t {
                    continue;
                }
                if let (Some(dsv), Some(dvt)) = (all[s].0[v], all[v].0[t]) {
                    if dsv + dvt == dst {
                        bc[v] += all[s].1[v] * all[v].1[t] / all[s].1[t];
                    }
                }
            }
        }
    }
    bc
}

pub fn brute_triangles(g: &Graph) -> Vec<usize> {
    let n = g.vertex_count();
    let mut t = vec![0; n];
    for u in 0..n {
        for v in (u + 1)..n {
            for w in (v + 1)..n {
                if g.has_edge(u, v) && g.has_edge(v, w) && g.has_edge(u, w) {
                    t[u] += 1;
                    t[v] += 1;
                    t[w] += 1;
                }
            }
        }
    }
    t
}

/// Lloyd's k-means with k-means++ seeding, best of `restarts` by inertia.
pub fn kmeans(points: &[Vec<f64>], k: usize, restarts: usize, seed_value: u64) -> Vec<usize> {
    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let mut best = (f64::INFINITY, vec![0; points.len()]);
    for r in 0..restarts {
        let mut rng = seed::rng(seed_value, &[r as u64]);
        let mut centres = vec![points[rng.random_range(0..points.len())].clone()];
        while centres.len() < k {
            let d: Vec<f64> = points
                .iter()
                .map(|p| {
                    centres
                        .iter()
                        .map(|c| dist2(p, c))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            let total: f64 = d.iter().sum();
            let mut pick = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, di) in d.iter().enumerate() {
                if pick < *di {
                    chosen = i;
                    break;
                }
                pick -= di;
            }
            centres.push(points[chosen].clone());
        }
        let mut assign = vec![0; points.len()];
        for _ in 0..100 {
            for (i, p) in points.iter().enumerate() {
                assign[i] = (0..k)
                    .min_by(|&a, &b| dist2(p, &centres[a]).total_cmp(&dist2(p, &centres[b])))
                    .unwrap();
            }
            let dim = points[0].len();
            let mut sums = vec![vec![0.0; dim]; k];
            let mut counts = vec![0usize; k];
            for (p, &c) in points.iter().zip(&assign) {
                counts[c] += 1;
                sums[c].iter_mut().zip(p).for_each(|(s, x)| *s += x);
            }
            for c in 0..k {
                if counts[c] > 0 {
                    centres[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
                }
            }
        }
        let inertia: f64 = points
            .iter()
            .zip(&assign)
            .map(|(p, &c)| dist2(p, &centres[c]))
            .sum();
        if inertia < best.0 {
            best = (inertia, assign);
        }
    }
    best.1
}

/// Best agreement between two partitions over all label permutations
/// (k ≤ 4).
pub fn partition_agreement(a: &[usize], b: &[usize], k: usize) -> f64 {
    fn perms(k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in perms(k - 1) {
            for i in 0..=p.len() {
                let mut q = p.clone();
                q.insert(i, k - 1);
                out.push(q);
            }
        }
        out
    }
    perms(k)
        .iter()
        .map(|p| a.iter().zip(b).filter(|(x, y)| p[**x] == **y).count())
        .max()
        .unwrap() as f64
        / a.len() as f64
}

/// Relative error used by the finite-difference checks.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}
