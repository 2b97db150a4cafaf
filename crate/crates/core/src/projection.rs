//! Exact t-SNE to two dimensions, silhouette scores and plot-ready export.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{Embedding, MethodTag};
use crate::error::{Error, Result};
use crate::probe::LabelVector;
use crate::seed;

pub const MAX_POINTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub exaggeration: f64,
    /// Iterations run with exaggerated `P` and the initial momentum.
    pub early_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub init_sigma: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            exaggeration: 12.0,
            early_iterations: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            init_sigma: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub labels: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    pub method: Option<MethodTag>,
    pub perplexity: f64,
    pub seed: u64,
    pub kl: f64,
    /// `(iteration, KL)` sampled every 10 iterations, against unexaggerated P.
    pub kl_trace: Vec<(usize, f64)>,
}

/// Row-major `n × n` squared Euclidean distances.
pub fn squared_distances(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len();
    let mut d = vec![0.0; n * n];
    d.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
        for (j, out) in row.iter_mut().enumerate() {
            *out = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
        }
    });
    d
}

/// Conditional `p_{j|i}` for row `i` at precision `beta`, with its entropy
/// in nats.
fn row_distribution(dist: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let min = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, (&d, p)) in dist.iter().zip(out.iter_mut()).enumerate() {
        *p = if j == i {
            0.0
        } else {
            (-(d - min) * beta).exp()
        };
        sum += *p;
    }
    let mut weighted = 0.0;
    for (&d, p) in dist.iter().zip(out.iter_mut()) {
        *p /= sum;
        weighted += *p * (d - min);
    }
    // H = log Σ exp(−β(d−min)) + β E[d−min]
    sum.ln() + beta * weighted
}

/// Per-row conditional distributions and the perplexity each achieved.
///
/// Each row's precision is bisected until its perplexity is within `1e-4`
/// of the target or 50 steps have run.
pub fn conditional_p(dist: &[f64], n: usize, perplexity: f64) -> (Vec<f64>, Vec<f64>) {
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    let achieved: Vec<f64> = p
        .par_chunks_mut(n)
        .enumerate()
        .map(|(i, row)| {
            let d = &dist[i * n..(i + 1) * n];
            let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
            let mut h = row_distribution(d, i, beta, row);
            for _ in 0..50 {
                if (h.exp() - perplexity).abs() < 1e-4 {
                    break;
                }
                if h > target {
                    lo = beta;
                    beta = if hi.is_finite() {
                        (beta + hi) / 2.0
                    } else {
                        beta * 2.0
                    };
                } else {
                    hi = beta;
                    beta = (beta + lo) / 2.0;
                }
                h = row_distribution(d, i, beta, row);
            }
            h.exp()
        })
        .collect();
    (p, achieved)
}

/// Symmetrized joint `P = (P_cond + P_condᵀ) / 2n`.
pub fn joint_p(points: &[Vec<f64>], perplexity: f64) -> (Vec<f64>, Vec<f64>) {
    let n = points.len();
    let d = squared_distances(points);
    let (c, achieved) = conditional_p(&d, n, perplexity);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (c[i * n + j] + c[j * n + i]) / (2.0 * n as f64);
        }
    }
    (p, achieved)
}

fn check_size(n: usize, perplexity: f64) -> Result<()> {
    if !(perplexity > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "perplexity must be positive, got {perplexity}"
        )));
    }
    if (n as f64) < 3.0 * perplexity {
        return Err(Error::InvalidParameter(format!(
            "{n} points is fewer than 3 × perplexity ({perplexity})"
        )));
    }
    if n > MAX_POINTS {
        return Err(Error::InvalidParameter(format!(
            "{n} points exceeds the exact t-SNE limit of {MAX_POINTS}; subsample first"
        )));
    }
    Ok(())
}

/// Student-t affinities: per-row numerators `1/(1+‖y_i−y_j‖²)` and their
/// total, summed row by row in index order.
fn q_numerators(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let row_sums: Vec<f64> = num
        .par_chunks_mut(n)
        .enumerate()
        .map(|(i, row)| {
            let mut s = 0.0;
            for (j, q) in row.iter_mut().enumerate() {
                if j != i {
                    let dx = y[i][0] - y[j][0];
                    let dy = y[i][1] - y[j][1];
                    *q = 1.0 / (1.0 + dx * dx + dy * dy);
                    s += *q;
                }
            }
            s
        })
        .collect();
    (num, row_sums.iter().sum())
}

fn kl_divergence(p: &[f64], num: &[f64], z: f64) -> f64 {
    p.par_chunks(1024)
        .zip(num.par_chunks(1024))
        .map(|(pc, qc)| {
            pc.iter()
                .zip(qc)
                .filter(|(&pv, _)| pv > 0.0)
                .map(|(&pv, &qv)| pv * (pv / (qv / z).max(1e-300)).ln())
                .sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// Exact t-SNE of `points` into the plane.
///
/// Gradient descent uses momentum and per-coordinate adaptive gains
/// (`+0.2` when the step direction flips, `×0.8` otherwise, floor 0.01).
pub fn tsne(
    points: &[Vec<f64>],
    cfg: &TsneConfig,
) -> Result<(Vec<[f64; 2]>, f64, Vec<(usize, f64)>)> {
    let n = points.len();
    check_size(n, cfg.perplexity)?;
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "t-SNE inputs must be finite".into(),
        ));
    }
    let (p, _) = joint_p(points, cfg.perplexity);

    let mut rng = seed::rng(cfg.seed, &[seed::tag("tsne-init")]);
    let normal = Normal::new(0.0, cfg.init_sigma)
        .map_err(|e| Error::InvalidParameter(format!("init sigma: {e}")))?;
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
        .collect();
    let mut velocity = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut trace = Vec::new();
    let mut kl = f64::NAN;

    for it in 0..cfg.iterations {
        let early = it < cfg.early_iterations;
        let exaggeration = if early { cfg.exaggeration } else { 1.0 };
        let momentum = if early {
            cfg.initial_momentum
        } else {
            cfg.final_momentum
        };
        let (num, z) = q_numerators(&y);

        let grad: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [0.0; 2];
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let q = num[i * n + j];
                    let m = (exaggeration * p[i * n + j] - q / z) * q;
                    g[0] += m * (y[i][0] - y[j][0]);
                    g[1] += m * (y[i][1] - y[j][1]);
                }
                [4.0 * g[0], 4.0 * g[1]]
            })
            .collect();

        for i in 0..n {
            for k in 0..2 {
                gains[i][k] = if (grad[i][k] > 0.0) != (velocity[i][k] > 0.0) {
                    gains[i][k] + 0.2
                } else {
                    (gains[i][k] * 0.8).max(0.01)
                };
                velocity[i][k] =
                    momentum * velocity[i][k] - cfg.learning_rate * gains[i][k] * grad[i][k];
                y[i][k] += velocity[i][k];
            }
        }
        let mean = y
            .iter()
            .fold([0.0; 2], |a, v| [a[0] + v[0], a[1] + v[1]])
            .map(|s| s / n as f64);
        for v in &mut y {
            v[0] -= mean[0];
            v[1] -= mean[1];
        }

        if (it + 1) % 10 == 0 || it + 1 == cfg.iterations {
            let (num, z) = q_numerators(&y);
            kl = kl_divergence(&p, &num, z);
            if !kl.is_finite() {
                return Err(Error::NonFiniteLoss {
                    center: it,
                    context: n,
                });
            }
            trace.push((it + 1, kl));
        }
    }
    if !kl.is_finite() {
        let (num, z) = q_numerators(&y);
        kl = kl_divergence(&p, &num, z);
    }
    Ok((y, kl, trace))
}

/// t-SNE of an embedding; Poincaré rows are mapped to disk coordinates first.
pub fn tsne_embedding(embedding: &Embedding, cfg: &TsneConfig) -> Result<Projection2D> {
    let (coords, kl, kl_trace) = tsne(&embedding.cartesian(), cfg)?;
    Ok(Projection2D {
        labels: embedding.labels.clone(),
        coords,
        method: embedding.method,
        perplexity: cfg.perplexity,
        seed: cfg.seed,
        kl,
        kl_trace,
    })
}

/// At most `max` indices, drawing from each class in proportion to its size
/// (at least one per class). Returned sorted.
pub fn stratified_subsample(labels: &[usize], max: usize, seed: u64) -> Vec<usize> {
    if labels.len() <= max {
        return (0..labels.len()).collect();
    }
    let mut by: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by.entry(l).or_default().push(i);
    }
    let mut classes: Vec<usize> = by.keys().copied().collect();
    classes.sort_unstable();
    let ratio = max as f64 / labels.len() as f64;
    let mut picked = Vec::with_capacity(max);
    for c in classes {
        let members = by.get_mut(&c).unwrap();
        members.shuffle(&mut seed::rng(seed, &[seed::tag("subsample"), c as u64]));
        let take = ((members.len() as f64 * ratio).floor() as usize).max(1);
        picked.extend_from_slice(&members[..take.min(members.len())]);
    }
    picked.sort_unstable();
    picked.truncate(max);
    picked
}

/// Mean silhouette coefficient. Points alone in their class score 0.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            actual: labels.len(),
        });
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InvalidParameter(
            "silhouette needs at least two classes".into(),
        ));
    }
    let slot: HashMap<usize, usize> = classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut sizes = vec![0usize; classes.len()];
    for l in labels {
        sizes[slot[l]] += 1;
    }
    let scores: Vec<f64> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let own = slot[&labels[i]];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; classes.len()];
            for j in 0..points.len() {
                if j != i {
                    let d: f64 = points[i]
                        .iter()
                        .zip(&points[j])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    sums[slot[&labels[j]]] += d;
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..classes.len())
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m == 0.0 {
                0.0
            } else {
                (b - a) / m
            }
        })
        .collect();
    Ok(scores.iter().sum::<f64>() / points.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRow {
    pub vertex: String,
    pub x: f64,
    pub y: f64,
    pub label: usize,
}

pub const CSV_HEADER: &str = "vertex,x,y,label";

/// Joins projected coordinates with class labels given in the same vertex
/// order.
pub fn export_projection(
    projection: &Projection2D,
    labels: &LabelVector,
) -> Result<Vec<ProjectionRow>> {
    if projection.coords.len() != labels.labels.len() {
        return Err(Error::DimensionMismatch {
            expected: projection.coords.len(),
            actual: labels.labels.len(),
        });
    }
    Ok(projection
        .labels
        .iter()
        .zip(&projection.coords)
        .zip(&labels.labels)
        .map(|((v, c), &l)| ProjectionRow {
            vertex: v.clone(),
            x: c[0],
            y: c[1],
            label: l,
        })
        .collect())
}

pub fn write_projection_csv<W: Write>(rows: &[ProjectionRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.vertex, r.x, r.y, r.label)?;
    }
    Ok(())
}

pub fn read_projection_csv<R: BufRead>(source: R) -> Result<Vec<ProjectionRow>> {
    let mut lines = source.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == CSV_HEADER => {}
        Some(Err(e)) => {
            return Err(Error::Parse {
                line: 1,
                message: e.to_string(),
            })
        }
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header {CSV_HEADER}"),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| Error::Parse {
            line: line_no,
            message: m,
        };
        let fields: Vec<&str> = line.rsplitn(4, ',').collect();
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 fields in {line:?}")));
        }
        rows.push(ProjectionRow {
            vertex: fields[3].to_owned(),
            x: fields[2].parse().map_err(|e| bad(format!("x: {e}")))?,
            y: fields[1].parse().map_err(|e| bad(format!("y: {e}")))?,
            label: fields[0].parse().map_err(|e| bad(format!("label: {e}")))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| vec![i as f64, (i * i % 7) as f64]).collect()
    }

    #[test]
    fn p_is_a_symmetric_distribution() {
        let pts = line(40);
        let (p, achieved) = joint_p(&pts, 10.0);
        let n = pts.len();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for i in 0..n {
            assert_eq!(p[i * n + i], 0.0);
            for j in 0..n {
                assert_eq!(p[i * n + j], p[j * n + i]);
            }
        }
        assert!(achieved.iter().all(|a| (a - 10.0).abs() < 1e-3));
    }

    #[test]
    fn size_limits() {
        let cfg = TsneConfig::default();
        assert!(tsne(&line(89), &cfg).is_err());
        assert!(check_size(10_001, 30.0).is_err());
        assert!(check_size(90, 30.0).is_ok());
    }

    #[test]
    fn silhouette_of_separated_pairs() {
        let pts = vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]];
        let s = silhouette(&pts, &[0, 0, 1, 1]).unwrap();
        // outer points: a = 1, b = 10.5; inner points: a = 1, b = 9.5
        let by_hand = (9.5 / 10.5 + 8.5 / 9.5) / 2.0;
        assert!((s - by_hand).abs() < 1e-12, "{s}");
        assert!(silhouette(&pts, &[0, 0, 0, 0]).is_err());
    }

    #[test]
    fn subsample_keeps_every_class() {
        let labels: Vec<usize> = (0..1000).map(|i| usize::from(i % 100 == 0)).collect();
        let s = stratified_subsample(&labels, 100, 3);
        assert!(s.len() <= 100);
        assert!(s.iter().any(|&i| labels[i] == 1));
        assert_eq!(s, stratified_subsample(&labels, 100, 3));
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            ProjectionRow {
                vertex: "a,b".into(),
                x: 0.1,
                y: -2.5e-7,
                label: 3,
            },
            ProjectionRow {
                vertex: "7".into(),
                x: 1.0 / 3.0,
                y: 4.0,
                label: 0,
            },
        ];
        let mut buf = Vec::new();
        write_projection_csv(&rows, &mut buf).unwrap();
        assert_eq!(read_projection_csv(&buf[..]).unwrap(), rows);
    }
}
