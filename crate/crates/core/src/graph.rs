//! Undirected simple graphs loaded from SNAP-style edge lists.
//!
//! Input format: one edge per line as two whitespace-separated labels, `#`
//! starts a comment line. Directed input is symmetrized, self-loops and
//! repeated edges are dropped and counted. Labels are arbitrary strings and
//! receive dense internal ids in order of first appearance.
//!
//! The one extension to the SNAP format is a vertex directive,
//! `#% vertex <label>`, which declares a vertex that may have no edges.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};

pub type VertexId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    labels: Vec<String>,
    index: HashMap<String, VertexId>,
    adjacency: Vec<Vec<VertexId>>,
    edge_count: usize,
}

/// Counts of what the loader cleaned up.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub lines: usize,
    pub comment_lines: usize,
    pub self_loops: usize,
    pub duplicate_edges: usize,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub graph: Graph,
    pub report: LoadReport,
}

const VERTEX_DIRECTIVE: &str = "#% vertex";

/// Parses an edge list.
pub fn load_edge_list<R: BufRead>(source: R) -> Result<Loaded> {
    let mut builder = Builder::default();
    let mut report = LoadReport::default();

    for (i, line) in source.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        report.lines += 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix(VERTEX_DIRECTIVE) {
            let toks: Vec<&str> = rest.split_whitespace().collect();
            if toks.len() != 1 {
                return Err(Error::parse(lineno, "vertex directive takes one label"));
            }
            builder.intern(toks[0]);
            report.comment_lines += 1;
            continue;
        }
        if trimmed.starts_with('#') {
            report.comment_lines += 1;
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(Error::parse(
                lineno,
                format!("expected two vertex labels, found {} tokens", toks.len()),
            ));
        }
        let u = builder.intern(toks[0]);
        let v = builder.intern(toks[1]);
        if u == v {
            report.self_loops += 1;
        } else if !builder.add_edge(u, v) {
            report.duplicate_edges += 1;
        }
    }

    let graph = builder.finish();
    if graph.edge_count == 0 {
        return Err(Error::EmptyGraph);
    }
    Ok(Loaded { graph, report })
}

#[derive(Default)]
struct Builder {
    labels: Vec<String>,
    index: HashMap<String, VertexId>,
    edges: HashSet<(VertexId, VertexId)>,
}

impl Builder {
    fn intern(&mut self, label: &str) -> VertexId {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.labels.len();
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), id);
        id
    }

    fn add_edge(&mut self, u: VertexId, v: VertexId) -> bool {
        self.edges.insert((u.min(v), u.max(v)))
    }

    fn finish(self) -> Graph {
        let n = self.labels.len();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &self.edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Graph {
            labels: self.labels,
            index: self.index,
            adjacency,
            edge_count: self.edges.len(),
        }
    }
}

impl Graph {
    /// Builds a graph on vertices `0..n` labelled by their decimal ids.
    /// Self-loops and duplicates are dropped; out-of-range endpoints error.
    pub fn from_edges(n: usize, edges: &[(VertexId, VertexId)]) -> Result<Self> {
        let mut builder = Builder::default();
        for v in 0..n {
            builder.intern(&v.to_string());
        }
        for &(u, v) in edges {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::VertexOutOfRange {
                        vertex: x,
                        count: n,
                    });
                }
            }
            if u != v {
                builder.add_edge(u, v);
            }
        }
        Ok(builder.finish())
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn label(&self, v: VertexId) -> &str {
        &self.labels[v]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn id_of(&self, label: &str) -> Option<VertexId> {
        self.index.get(label).copied()
    }

    fn check(&self, v: VertexId) -> Result<()> {
        if v < self.vertex_count() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange {
                vertex: v,
                count: self.vertex_count(),
            })
        }
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: VertexId) -> Result<&[VertexId]> {
        self.check(v)?;
        Ok(&self.adjacency[v])
    }

    /// Unchecked neighbor access for hot loops; panics on a bad id.
    #[inline]
    pub fn adj(&self, v: VertexId) -> &[VertexId] {
        &self.adjacency[v]
    }

    #[inline]
    pub fn degree(&self, v: VertexId) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        u < self.vertex_count() && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Row `v` of the adjacency matrix as 0/1 entries.
    pub fn adjacency_row(&self, v: VertexId) -> Result<Vec<u8>> {
        self.check(v)?;
        let mut row = vec![0u8; self.vertex_count()];
        for &u in &self.adjacency[v] {
            row[u] = 1;
        }
        Ok(row)
    }

    /// Edges as `(u, v)` with `u < v`, ordered by `u` then `v`.
    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, nbrs)| {
            nbrs.iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    /// Writes the graph back as an edge list using original labels.
    /// Vertices without edges are emitted as vertex directives.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for v in 0..self.vertex_count() {
            if self.degree(v) == 0 {
                writeln!(out, "{VERTEX_DIRECTIVE} {}", self.labels[v])?;
            }
        }
        for (u, v) in self.edges() {
            writeln!(out, "{} {}", self.labels[u], self.labels[v])?;
        }
        Ok(())
    }

    /// Returns the same graph with internal ids permuted: old id `v`
    /// becomes `perm[v]`. Labels travel with their vertices.
    pub fn permuted(&self, perm: &[VertexId]) -> Graph {
        let n = self.vertex_count();
        assert_eq!(perm.len(), n);
        let mut labels = vec![String::new(); n];
        let mut adjacency = vec![Vec::new(); n];
        for v in 0..n {
            labels[perm[v]] = self.labels[v].clone();
            let mut nbrs: Vec<_> = self.adjacency[v].iter().map(|&u| perm[u]).collect();
            nbrs.sort_unstable();
            adjacency[perm[v]] = nbrs;
        }
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        Graph {
            labels,
            index,
            adjacency,
            edge_count: self.edge_count,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<Loaded> {
        load_edge_list(text.as_bytes())
    }

    #[test]
    fn triangle() {
        let g = load("0 1\n1 2\n2 0\n").unwrap().graph;
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edge_count(), 3);
        assert!((0..3).all(|v| g.degree(v) == 2));
        assert_eq!(g.neighbors(0).unwrap(), &[1, 2]);
        assert_eq!(g.adjacency_row(0).unwrap(), vec![0, 1, 1]);
    }

    #[test]
    fn dedupe_and_self_loops() {
        let loaded = load("# c\na b\nb a\na a\n").unwrap();
        assert_eq!(loaded.graph.vertex_count(), 2);
        assert_eq!(loaded.graph.edge_count(), 1);
        assert_eq!(loaded.report.self_loops, 1);
        assert_eq!(loaded.report.duplicate_edges, 1);
        assert_eq!(loaded.report.comment_lines, 1);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        match load("0 1\n1 2 3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(load("0\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn no_edges_is_an_error() {
        assert!(matches!(load("# nothing\n"), Err(Error::EmptyGraph)));
        assert!(matches!(load("a a\n"), Err(Error::EmptyGraph)));
    }

    #[test]
    fn path_and_star_neighbors() {
        let g = load("a b\nb c\n").unwrap().graph;
        let b = g.id_of("b").unwrap();
        let got: Vec<&str> = g
            .neighbors(b)
            .unwrap()
            .iter()
            .map(|&v| g.label(v))
            .collect();
        assert_eq!(got, ["a", "c"]);

        let star = Graph::from_edges(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]).unwrap();
        assert_eq!(star.neighbors(0).unwrap(), &[1, 2, 3, 4, 5]);
    }

    #[test]
    fn out_of_range() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        assert!(matches!(
            g.neighbors(2),
            Err(Error::VertexOutOfRange {
                vertex: 2,
                count: 2
            })
        ));
        assert!(g.adjacency_row(5).is_err());
    }

    #[test]
    fn isolated_vertex_via_directive() {
        let loaded = load("#% vertex z\na b\n").unwrap();
        let g = loaded.graph;
        assert_eq!(g.vertex_count(), 3);
        let z = g.id_of("z").unwrap();
        assert_eq!(g.adjacency_row(z).unwrap(), vec![0, 0, 0]);

        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let again = load_edge_list(buf.as_slice()).unwrap().graph;
        assert_eq!(again.vertex_count(), 3);
        assert_eq!(again.degree(again.id_of("z").unwrap()), 0);
    }
}
