//! The seven vertex-level topological features.
//!
//! | tag   | meaning                                      |
//! |-------|----------------------------------------------|
//! | `DG`  | degree                                       |
//! | `DC`  | degree centrality, `DG / |V|`                |
//! | `TC`  | triangles containing the vertex              |
//! | `CLU` | local clustering coefficient (0 if `DG < 2`) |
//! | `EC`  | eigenvector centrality, unit L2 norm         |
//! | `PR`  | PageRank, damping 0.85, sums to 1            |
//! | `BC`  | betweenness, unordered pairs, unnormalized   |

use std::collections::VecDeque;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Feature {
    DG,
    DC,
    TC,
    CLU,
    EC,
    PR,
    BC,
}

impl Feature {
    pub const ALL: [Feature; 7] = [
        Feature::DG,
        Feature::DC,
        Feature::TC,
        Feature::CLU,
        Feature::EC,
        Feature::PR,
        Feature::BC,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Feature::DG => "DG",
            Feature::DC => "DC",
            Feature::TC => "TC",
            Feature::CLU => "CLU",
            Feature::EC => "EC",
            Feature::PR => "PR",
            Feature::BC => "BC",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownTag {
                kind: "feature",
                tag: s.to_owned(),
            })
    }
}

/// Stopping rule for the two power iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for Iteration {
    fn default() -> Self {
        Iteration {
            tol: 1e-8,
            max_iter: 1000,
        }
    }
}

pub const DEFAULT_DAMPING: f64 = 0.85;

pub fn degree(g: &Graph) -> Vec<usize> {
    (0..g.vertex_count()).map(|v| g.degree(v)).collect()
}

pub fn degree_centrality(g: &Graph) -> Vec<f64> {
    let n = g.vertex_count() as f64;
    (0..g.vertex_count())
        .map(|v| g.degree(v) as f64 / n)
        .collect()
}

fn sorted_intersection_len(a: &[VertexId], b: &[VertexId]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Number of edges among the neighbors of each vertex.
pub fn triangle_count(g: &Graph) -> Vec<usize> {
    (0..g.vertex_count())
        .into_par_iter()
        .map(|v| {
            let nv = g.adj(v);
            let twice: usize = nv
                .iter()
                .map(|&u| sorted_intersection_len(nv, g.adj(u)))
                .sum();
            twice / 2
        })
        .collect()
}

pub fn local_clustering(g: &Graph) -> Vec<f64> {
    clustering_from(g, &triangle_count(g))
}

fn clustering_from(g: &Graph, triangles: &[usize]) -> Vec<f64> {
    (0..g.vertex_count())
        .map(|v| {
            let d = g.degree(v);
            if d < 2 {
                0.0
            } else {
                2.0 * triangles[v] as f64 / (d * (d - 1)) as f64
            }
        })
        .collect()
}

fn l2_normalize(x: &mut [f64]) {
    let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|a| *a /= norm);
    }
}

/// Principal eigenvector of the adjacency matrix by power iteration.
///
/// Iterates `x <- (A + I) x`, which has the same eigenvectors as `A` but
/// breaks the `±λ` tie that makes plain iteration oscillate on bipartite
/// graphs.
pub fn eigenvector_centrality(g: &Graph, it: Iteration) -> Result<Vec<f64>> {
    if g.edge_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    let n = g.vertex_count();
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut next = vec![0.0; n];
    let mut change = f64::INFINITY;
    for _ in 0..it.max_iter {
        for v in 0..n {
            next[v] = x[v] + g.adj(v).iter().map(|&u| x[u]).sum::<f64>();
        }
        l2_normalize(&mut next);
        change = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut x, &mut next);
        if change < it.tol {
            orient(&mut x);
            return Ok(x);
        }
    }
    Err(Error::NonConvergence {
        what: "eigenvector centrality",
        iterations: it.max_iter,
        last_change: change,
        last: x,
    })
}

/// Flips the sign so the largest-magnitude entry is positive.
fn orient(x: &mut [f64]) {
    let pivot = x
        .iter()
        .copied()
        .fold(0.0f64, |m, a| if a.abs() > m.abs() { a } else { m });
    if pivot < 0.0 {
        x.iter_mut().for_each(|a| *a = -*a);
    }
    // round-off can leave -0.0 or tiny negatives on zero-centrality vertices
    x.iter_mut().for_each(|a| {
        if *a <= 0.0 {
            *a = 0.0;
        }
    });
}

/// PageRank by fixed-point iteration. Mass sitting on degree-0 vertices is
/// spread uniformly.
pub fn pagerank(g: &Graph, damping: f64, it: Iteration) -> Result<Vec<f64>> {
    let n = g.vertex_count();
    if n == 0 {
        return Err(Error::EmptyInput("graph has no vertices"));
    }
    if !(0.0..=1.0).contains(&damping) {
        return Err(Error::InvalidParameter(format!(
            "damping must lie in [0, 1], got {damping}"
        )));
    }
    let nf = n as f64;
    let mut pr = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut change = f64::INFINITY;
    for _ in 0..it.max_iter {
        let dangling: f64 = (0..n).filter(|&v| g.degree(v) == 0).map(|v| pr[v]).sum();
        let base = (1.0 - damping) / nf + damping * dangling / nf;
        for v in 0..n {
            let inflow: f64 = g.adj(v).iter().map(|&u| pr[u] / g.degree(u) as f64).sum();
            next[v] = base + damping * inflow;
        }
        change = pr.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pr, &mut next);
        if change < it.tol {
            let total: f64 = pr.iter().sum();
            pr.iter_mut().for_each(|p| *p /= total);
            return Ok(pr);
        }
    }
    Err(Error::NonConvergence {
        what: "pagerank",
        iterations: it.max_iter,
        last_change: change,
        last: pr,
    })
}

/// Dependencies of every vertex on source `s` (Brandes accumulation).
fn source_dependencies(g: &Graph, s: VertexId, acc: &mut [f64], scratch: &mut BrandesScratch) {
    let BrandesScratch {
        dist,
        sigma,
        delta,
        order,
        queue,
    } = scratch;
    dist.fill(-1);
    sigma.fill(0.0);
    delta.fill(0.0);
    order.clear();
    queue.clear();

    dist[s] = 0;
    sigma[s] = 1.0;
    queue.push_back(s);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &w in g.adj(v) {
            if dist[w] < 0 {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
            if dist[w] == dist[v] + 1 {
                sigma[w] += sigma[v];
            }
        }
    }
    // predecessors are recovered from distances instead of stored lists
    for &w in order.iter().rev() {
        for &v in g.adj(w) {
            if dist[v] == dist[w] - 1 {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
        }
        if w != s {
            acc[w] += delta[w];
        }
    }
}

struct BrandesScratch {
    dist: Vec<i64>,
    sigma: Vec<f64>,
    delta: Vec<f64>,
    order: Vec<VertexId>,
    queue: VecDeque<VertexId>,
}

impl BrandesScratch {
    fn new(n: usize) -> Self {
        BrandesScratch {
            dist: vec![-1; n],
            sigma: vec![0.0; n],
            delta: vec![0.0; n],
            order: Vec::with_capacity(n),
            queue: VecDeque::with_capacity(n),
        }
    }
}

const BRANDES_CHUNK: usize = 64;

/// Exact betweenness over unordered pairs, unnormalized.
///
/// Sources are processed in fixed chunks of 64 and the chunk sums are
/// added in source order, so the result does not depend on thread count.
pub fn betweenness(g: &Graph) -> Vec<f64> {
    let n = g.vertex_count();
    let sources: Vec<VertexId> = (0..n).collect();
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(BRANDES_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; n];
            let mut scratch = BrandesScratch::new(n);
            for &s in chunk {
                source_dependencies(g, s, &mut acc, &mut scratch);
            }
            acc
        })
        .collect();
    let mut bc = vec![0.0; n];
    for part in &partials {
        for (b, p) in bc.iter_mut().zip(part) {
            *b += p;
        }
    }
    // every unordered pair was visited from both ends
    bc.iter_mut().for_each(|b| *b /= 2.0);
    bc
}

/// All seven features for every vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub labels: Vec<String>,
    pub dg: Vec<usize>,
    pub dc: Vec<f64>,
    pub tc: Vec<usize>,
    pub clu: Vec<f64>,
    pub ec: Vec<f64>,
    pub pr: Vec<f64>,
    pub bc: Vec<f64>,
}

pub const CSV_HEADER: &str = "vertex,DG,DC,TC,CLU,EC,PR,BC";

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// One column as reals.
    pub fn column(&self, f: Feature) -> Vec<f64> {
        match f {
            Feature::DG => self.dg.iter().map(|&d| d as f64).collect(),
            Feature::DC => self.dc.clone(),
            Feature::TC => self.tc.iter().map(|&t| t as f64).collect(),
            Feature::CLU => self.clu.clone(),
            Feature::EC => self.ec.clone(),
            Feature::PR => self.pr.clone(),
            Feature::BC => self.bc.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.labels[i],
                self.dg[i],
                self.dc[i],
                self.tc[i],
                self.clu[i],
                self.ec[i],
                self.pr[i],
                self.bc[i]
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(source: R) -> Result<Self> {
        let mut lines = source.lines().enumerate();
        match lines.next() {
            Some((_, Ok(h))) if h.trim() == CSV_HEADER => {}
            Some((_, Ok(h))) => return Err(Error::parse(1, format!("bad header {h:?}"))),
            Some((_, Err(e))) => return Err(Error::parse(1, e.to_string())),
            None => return Err(Error::EmptyInput("feature file")),
        }
        let mut t = FeatureTable {
            labels: vec![],
            dg: vec![],
            dc: vec![],
            tc: vec![],
            clu: vec![],
            ec: vec![],
            pr: vec![],
            bc: vec![],
        };
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 8 {
                return Err(Error::parse(
                    lineno,
                    format!("expected 8 columns, got {}", cols.len()),
                ));
            }
            let int = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| Error::parse(lineno, format!("{s:?}: {e}")))
            };
            let real = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::parse(lineno, format!("{s:?}: {e}")))
            };
            t.labels.push(cols[0].to_owned());
            t.dg.push(int(cols[1])?);
            t.dc.push(real(cols[2])?);
            t.tc.push(int(cols[3])?);
            t.clu.push(real(cols[4])?);
            t.ec.push(real(cols[5])?);
            t.pr.push(real(cols[6])?);
            t.bc.push(real(cols[7])?);
        }
        Ok(t)
    }

    /// Per-column `(min, max, zero count)`.
    pub fn summary(&self) -> Vec<(Feature, f64, f64, usize)> {
        Feature::ALL
            .iter()
            .map(|&f| {
                let col = self.column(f);
                let min = col.iter().copied().fold(f64::INFINITY, f64::min);
                let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let zeros = col.iter().filter(|&&x| x == 0.0).count();
                (f, min, max, zeros)
            })
            .collect()
    }
}

/// Computes every feature with the default iteration settings.
pub fn compute_all(g: &Graph) -> Result<FeatureTable> {
    compute_all_with(g, Iteration::default())
}

pub fn compute_all_with(g: &Graph, it: Iteration) -> Result<FeatureTable> {
    let tc = triangle_count(g);
    Ok(FeatureTable {
        labels: g.labels().to_vec(),
        dg: degree(g),
        dc: degree_centrality(g),
        clu: clustering_from(g, &tc),
        tc,
        ec: eigenvector_centrality(g, it)?,
        pr: pagerank(g, DEFAULT_DAMPING, it)?,
        bc: betweenness(g),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{complete, cycle, path, star};

    const TIGHT: Iteration = Iteration {
        tol: 1e-13,
        max_iter: 10_000,
    };

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn degrees() {
        assert_eq!(degree(&complete(3)), vec![2, 2, 2]);
        assert_eq!(degree(&star(4)), vec![4, 1, 1, 1, 1]);
        assert!(close(
            &degree_centrality(&complete(3)),
            &[2.0 / 3.0; 3],
            0.0
        ));
        assert_eq!(degree_centrality(&path(3))[1], 2.0 / 3.0);
    }

    #[test]
    fn triangles_and_clustering() {
        assert_eq!(triangle_count(&complete(4)), vec![3; 4]);
        assert_eq!(triangle_count(&cycle(5)), vec![0; 5]);
        assert_eq!(local_clustering(&complete(4)), vec![1.0; 4]);
        let s = local_clustering(&star(5));
        assert_eq!(s[0], 0.0);
        assert_eq!(s[1], 0.0);
    }

    #[test]
    fn eigenvector_hand_values() {
        let k3 = eigenvector_centrality(&complete(3), TIGHT).unwrap();
        assert!(close(&k3, &[1.0 / 3f64.sqrt(); 3], 1e-9));
        let s4 = eigenvector_centrality(&star(4), TIGHT).unwrap();
        assert!((s4[0] - 2.0 / 8f64.sqrt()).abs() < 1e-9);
        for &leaf in &s4[1..] {
            assert!((leaf - 1.0 / 8f64.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn eigenvector_non_convergence_carries_iterate() {
        let it = Iteration {
            tol: 1e-30,
            max_iter: 3,
        };
        match eigenvector_centrality(&path(5), it) {
            Err(Error::NonConvergence {
                iterations, last, ..
            }) => {
                assert_eq!(iterations, 3);
                assert_eq!(last.len(), 5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn eigenvector_needs_edges() {
        let g = Graph::from_edges(3, &[]).unwrap();
        assert!(matches!(
            eigenvector_centrality(&g, Iteration::default()),
            Err(Error::EmptyGraph)
        ));
        assert!(matches!(compute_all(&g), Err(Error::EmptyGraph)));
    }

    #[test]
    fn pagerank_hand_values() {
        let k3 = pagerank(&complete(3), 0.85, TIGHT).unwrap();
        assert!(close(&k3, &[1.0 / 3.0; 3], 1e-9));
        let p3 = pagerank(&path(3), 0.85, TIGHT).unwrap();
        // a = 0.07125 / 0.2775, b = 0.05 + 1.7 a
        let a = 0.07125 / 0.2775;
        assert!(close(&p3, &[a, 0.05 + 1.7 * a, a], 1e-9));
        assert!((p3[0] - 0.25676).abs() < 1e-5 && (p3[1] - 0.48649).abs() < 1e-5);
    }

    #[test]
    fn pagerank_dangling_mass_is_conserved() {
        let g = Graph::from_edges(4, &[(0, 1), (1, 2)]).unwrap();
        let pr = pagerank(&g, 0.85, Iteration::default()).unwrap();
        assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(pr[3] > 0.0);
    }

    #[test]
    fn betweenness_hand_values() {
        assert_eq!(betweenness(&path(3)), vec![0.0, 1.0, 0.0]);
        assert_eq!(betweenness(&complete(4)), vec![0.0; 4]);
        // center of S4 sits on all C(4,2) leaf pairs
        assert_eq!(betweenness(&star(4))[0], 6.0);
        // disconnected pairs contribute nothing
        let g = Graph::from_edges(6, &[(0, 1), (1, 2), (3, 4), (4, 5)]).unwrap();
        assert_eq!(betweenness(&g), vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn k3_table_and_csv() {
        let t = compute_all(&complete(3)).unwrap();
        assert_eq!(t.dg, vec![2; 3]);
        assert_eq!(t.tc, vec![1; 3]);
        assert_eq!(t.clu, vec![1.0; 3]);
        assert_eq!(t.bc, vec![0.0; 3]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("vertex,DG,DC,TC,CLU,EC,PR,BC\n0,2,"));
        assert_eq!(FeatureTable::read_csv(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn feature_tags_parse() {
        for f in Feature::ALL {
            assert_eq!(f.as_str().parse::<Feature>().unwrap(), f);
        }
        assert!("XX".parse::<Feature>().is_err());
    }
}
