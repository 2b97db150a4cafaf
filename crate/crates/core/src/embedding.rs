//! Vertex embedding matrices and their text file format.
//!
//! ```text
//! <|V|> <d> <geometry>
//! <label> <x_1> ... <x_d>
//! ...
//! ```
//!
//! Reals are written with Rust's shortest round-trip formatting, so a file
//! reloads to the identical matrix.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Euclidean,
    /// Two columns per vertex: radius `r` in `[0, 1)` and angle `θ` in `[0, 2π)`.
    PoincarePolar,
}

impl Geometry {
    pub fn as_str(self) -> &'static str {
        match self {
            Geometry::Euclidean => "euclidean",
            Geometry::PoincarePolar => "poincare_polar",
        }
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Geometry::Euclidean),
            "poincare_polar" => Ok(Geometry::PoincarePolar),
            _ => Err(Error::UnknownTag {
                kind: "geometry",
                tag: s.to_owned(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodTag {
    Deepwalk,
    Node2vecH,
    Node2vecS,
    Poincare,
    Sdne,
}

impl MethodTag {
    pub const ALL: [MethodTag; 5] = [
        MethodTag::Deepwalk,
        MethodTag::Node2vecH,
        MethodTag::Node2vecS,
        MethodTag::Poincare,
        MethodTag::Sdne,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodTag::Deepwalk => "deepwalk",
            MethodTag::Node2vecH => "node2vec_h",
            MethodTag::Node2vecS => "node2vec_s",
            MethodTag::Poincare => "poincare",
            MethodTag::Sdne => "sdne",
        }
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodTag::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownTag {
                kind: "method",
                tag: s.to_owned(),
            })
    }
}

/// A `|V| × d` row-major matrix, one row per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub labels: Vec<String>,
    pub dim: usize,
    pub data: Vec<f64>,
    pub geometry: Geometry,
    /// Absent for embeddings read from a file or built by hand.
    pub method: Option<MethodTag>,
}

impl Embedding {
    pub fn new(
        labels: Vec<String>,
        dim: usize,
        data: Vec<f64>,
        geometry: Geometry,
        method: Option<MethodTag>,
    ) -> Result<Self> {
        if data.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * dim,
                actual: data.len(),
            });
        }
        if geometry == Geometry::PoincarePolar && dim != 2 {
            return Err(Error::InvalidParameter(format!(
                "poincare_polar embeddings have d = 2, got {dim}"
            )));
        }
        Ok(Embedding {
            labels,
            dim,
            data,
            geometry,
            method,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.data[v * self.dim..(v + 1) * self.dim]
    }

    /// Rows as points in Euclidean space. Poincaré rows `(r, θ)` map to
    /// `(r cos θ, r sin θ)`.
    pub fn cartesian(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|v| {
                let row = self.row(v);
                match self.geometry {
                    Geometry::Euclidean => row.to_vec(),
                    Geometry::PoincarePolar => vec![row[0] * row[1].cos(), row[0] * row[1].sin()],
                }
            })
            .collect()
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {} {}", self.len(), self.dim, self.geometry)?;
        for v in 0..self.len() {
            write!(out, "{}", self.labels[v])?;
            for x in self.row(v) {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(source: R) -> Result<Self> {
        let mut lines = source.lines().enumerate();
        let header = match lines.next() {
            Some((_, Ok(h))) => h,
            Some((_, Err(e))) => return Err(Error::parse(1, e.to_string())),
            None => return Err(Error::EmptyInput("embedding file")),
        };
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::parse(1, "header must be `<|V|> <d> <geometry>`"));
        }
        let count: usize = toks[0]
            .parse()
            .map_err(|_| Error::parse(1, format!("bad vertex count {:?}", toks[0])))?;
        let dim: usize = toks[1]
            .parse()
            .map_err(|_| Error::parse(1, format!("bad dimension {:?}", toks[1])))?;
        let geometry: Geometry = toks[2].parse()?;

        let mut labels = Vec::with_capacity(count);
        let mut data = Vec::with_capacity(count * dim);
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut toks = line.split_whitespace();
            let label = toks.next().expect("non-empty line");
            labels.push(label.to_owned());
            let before = data.len();
            for t in toks {
                data.push(
                    t.parse::<f64>()
                        .map_err(|_| Error::parse(lineno, format!("bad real {t:?}")))?,
                );
            }
            if data.len() - before != dim {
                return Err(Error::parse(
                    lineno,
                    format!("expected {dim} values, got {}", data.len() - before),
                ));
            }
        }
        if labels.len() != count {
            return Err(Error::DimensionMismatch {
                expected: count,
                actual: labels.len(),
            });
        }
        Embedding::new(labels, dim, data, geometry, None)
    }
}
