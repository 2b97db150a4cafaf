//! Skip-gram training over random-walk context pairs, shared by DeepWalk,
//! both Node2Vec settings and the Poincaré-disk embedding.
//!
//! The two geometries differ only in the pairwise similarity:
//!
//! * Euclidean: `s(u, v) = W_u · W'_v`
//! * Poincaré polar: `s(u, v) = 4 atanh(r_u) atanh(r_v) cos(θ_u − θ_v)`
//!
//! Training minimizes either the exact softmax cross-entropy over all
//! vertices or the negative-sampling surrogate
//! `−log σ(s⁺) − Σ_k log σ(−s_k)`.

use std::f64::consts::TAU;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::weighted::WeightedAliasIndex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{Embedding, Geometry, MethodTag};
use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};
use crate::seed::{self, Rng};
use crate::walks::{self, WalkCorpus, WalkStrategy};

/// Radius bounds enforced after every Poincaré update.
pub const R_MIN: f64 = 1e-5;
pub const R_MAX: f64 = 1.0 - 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramModel {
    pub vertex_count: usize,
    pub dim: usize,
    pub geometry: Geometry,
    /// Input (hidden-layer) weights `W`, row-major.
    pub input: Vec<f64>,
    /// Output-layer weights `W'`, row-major.
    pub output: Vec<f64>,
}

pub fn init_model(
    vertex_count: usize,
    dim: usize,
    geometry: Geometry,
    seed: u64,
) -> Result<SkipGramModel> {
    if dim == 0 {
        return Err(Error::InvalidParameter(
            "dimension must be at least 1".into(),
        ));
    }
    if geometry == Geometry::PoincarePolar && dim != 2 {
        return Err(Error::InvalidParameter(format!(
            "poincare geometry requires d = 2, got {dim}"
        )));
    }
    let mut rng = seed::rng(seed, &[seed::tag("skipgram-init")]);
    let len = vertex_count * dim;
    let draw = |rng: &mut Rng| -> Vec<f64> {
        match geometry {
            Geometry::Euclidean => {
                let half = 0.5 / dim as f64;
                (0..len).map(|_| rng.random_range(-half..half)).collect()
            }
            Geometry::PoincarePolar => (0..vertex_count)
                .flat_map(|_| [rng.random_range(0.01..=0.1), rng.random_range(0.0..TAU)])
                .collect::<Vec<_>>(),
        }
    };
    let input = draw(&mut rng);
    let output = draw(&mut rng);
    Ok(SkipGramModel {
        vertex_count,
        dim,
        geometry,
        input,
        output,
    })
}

#[inline]
/// Four interleaved partial sums; the summation order is fixed, so results
/// are reproducible.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let (ac, bc) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ac
        .remainder()
        .iter()
        .zip(bc.remainder())
        .map(|(x, y)| x * y)
        .sum();
    let mut acc = [0.0; 4];
    for (x, y) in ac.zip(bc) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Similarity of two parameter rows.
#[inline]
pub fn row_similarity(geometry: Geometry, a: &[f64], b: &[f64]) -> f64 {
    match geometry {
        Geometry::Euclidean => dot(a, b),
        Geometry::PoincarePolar => 4.0 * a[0].atanh() * b[0].atanh() * (a[1] - b[1]).cos(),
    }
}

/// Adds `scale · ∂s/∂a` to `ga` and `scale · ∂s/∂b` to `gb`.
#[inline]
fn accumulate_similarity_grad(
    geometry: Geometry,
    a: &[f64],
    b: &[f64],
    scale: f64,
    ga: &mut [f64],
    gb: &mut [f64],
) {
    match geometry {
        Geometry::Euclidean => {
            for ((ga, gb), (a, b)) in ga.iter_mut().zip(gb.iter_mut()).zip(a.iter().zip(b)) {
                *ga += scale * b;
                *gb += scale * a;
            }
        }
        Geometry::PoincarePolar => {
            let (ta, tb) = (a[0].atanh(), b[0].atanh());
            let (sin, cos) = (a[1] - b[1]).sin_cos();
            ga[0] += scale * 4.0 / (1.0 - a[0] * a[0]) * tb * cos;
            gb[0] += scale * 4.0 * ta / (1.0 - b[0] * b[0]) * cos;
            ga[1] -= scale * 4.0 * ta * tb * sin;
            gb[1] += scale * 4.0 * ta * tb * sin;
        }
    }
}

fn check_radius(model: &SkipGramModel, row: &[f64]) -> Result<()> {
    if model.geometry == Geometry::PoincarePolar && !(0.0..1.0).contains(&row[0]) {
        return Err(Error::Domain(format!("radius {} outside [0, 1)", row[0])));
    }
    Ok(())
}

impl SkipGramModel {
    pub fn input_row(&self, v: VertexId) -> &[f64] {
        &self.input[v * self.dim..(v + 1) * self.dim]
    }

    pub fn output_row(&self, v: VertexId) -> &[f64] {
        &self.output[v * self.dim..(v + 1) * self.dim]
    }

    fn check_vertex(&self, v: VertexId) -> Result<()> {
        if v < self.vertex_count {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange {
                vertex: v,
                count: self.vertex_count,
            })
        }
    }

    /// `s(W_u, W'_v)` when `use_output_side`, else `s(W_u, W_v)`.
    pub fn similarity(&self, u: VertexId, v: VertexId, use_output_side: bool) -> Result<f64> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        let a = self.input_row(u);
        let b = if use_output_side {
            self.output_row(v)
        } else {
            self.input_row(v)
        };
        check_radius(self, a)?;
        check_radius(self, b)?;
        Ok(row_similarity(self.geometry, a, b))
    }

    /// Converts the input side into an [`Embedding`].
    pub fn into_embedding(
        self,
        labels: Vec<String>,
        method: Option<MethodTag>,
    ) -> Result<Embedding> {
        Embedding::new(labels, self.dim, self.input, self.geometry, method)
    }
}

/// Gradients for the rows a single example touches. Output rows may repeat;
/// their contributions add.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradients {
    pub center: (VertexId, Vec<f64>),
    pub outputs: Vec<(VertexId, Vec<f64>)>,
}

/// `log σ(x)`, stable for large `|x|`.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    -((-x).max(0.0) + (-x.abs()).exp().ln_1p())
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `(σ(x), log σ(x), log σ(−x))` from one exponential; bit-identical to
/// [`sigmoid`] and [`log_sigmoid`].
#[inline]
fn sigmoid_terms(x: f64) -> (f64, f64, f64) {
    let e = (-x.abs()).exp();
    let l = e.ln_1p();
    let s = if x >= 0.0 {
        1.0 / (1.0 + e)
    } else {
        e / (1.0 + e)
    };
    (s, -((-x).max(0.0) + l), -(x.max(0.0) + l))
}

/// Negative-sampling loss and gradients for one `(center, context)` pair.
pub fn pair_loss_and_grads(
    model: &SkipGramModel,
    center: VertexId,
    context: VertexId,
    negatives: &[VertexId],
) -> Result<(f64, PairGradients)> {
    model.check_vertex(center)?;
    model.check_vertex(context)?;
    for &n in negatives {
        model.check_vertex(n)?;
        if n == context {
            return Err(Error::InvalidParameter(format!(
                "negative sample {n} equals the context vertex"
            )));
        }
    }
    let geom = model.geometry;
    let c = model.input_row(center);
    check_radius(model, c)?;
    let mut gc = vec![0.0; model.dim];
    let mut outputs = Vec::with_capacity(negatives.len() + 1);
    let mut loss = 0.0;
    let targets = std::iter::once((context, true)).chain(negatives.iter().map(|&n| (n, false)));
    for (o, positive) in targets {
        let w = model.output_row(o);
        check_radius(model, w)?;
        let s = row_similarity(geom, c, w);
        // d loss / d s
        let ds = if positive {
            loss -= log_sigmoid(s);
            sigmoid(s) - 1.0
        } else {
            loss -= log_sigmoid(-s);
            sigmoid(s)
        };
        let mut go = vec![0.0; model.dim];
        accumulate_similarity_grad(geom, c, w, ds, &mut gc, &mut go);
        outputs.push((o, go));
    }
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { center, context });
    }
    Ok((
        loss,
        PairGradients {
            center: (center, gc),
            outputs,
        },
    ))
}

fn softmax_over_outputs(model: &SkipGramModel, center: VertexId) -> Vec<f64> {
    let c = model.input_row(center);
    let sims: Vec<f64> = (0..model.vertex_count)
        .map(|v| row_similarity(model.geometry, c, model.output_row(v)))
        .collect();
    let max = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = sims.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// `P(target | center)` under the full softmax over all vertices.
pub fn full_softmax_prob(model: &SkipGramModel, center: VertexId, target: VertexId) -> Result<f64> {
    model.check_vertex(center)?;
    model.check_vertex(target)?;
    Ok(softmax_over_outputs(model, center)[target])
}

/// Exact softmax cross-entropy `−log P(context | center)` and gradients.
/// Every output row is touched.
pub fn softmax_loss_and_grads(
    model: &SkipGramModel,
    center: VertexId,
    context: VertexId,
) -> Result<(f64, PairGradients)> {
    model.check_vertex(center)?;
    model.check_vertex(context)?;
    let probs = softmax_over_outputs(model, center);
    let loss = -probs[context].ln();
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { center, context });
    }
    let c = model.input_row(center);
    let mut gc = vec![0.0; model.dim];
    let outputs = (0..model.vertex_count)
        .map(|v| {
            let ds = probs[v] - if v == context { 1.0 } else { 0.0 };
            let mut go = vec![0.0; model.dim];
            accumulate_similarity_grad(
                model.geometry,
                c,
                model.output_row(v),
                ds,
                &mut gc,
                &mut go,
            );
            (v, go)
        })
        .collect();
    Ok((
        loss,
        PairGradients {
            center: (center, gc),
            outputs,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    ExactSoftmax,
    NegativeSampling,
}

/// Largest vocabulary accepted by [`TrainingMode::ExactSoftmax`].
pub const EXACT_SOFTMAX_MAX_VERTICES: usize = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub lr: f64,
    pub epochs: usize,
    pub negatives: usize,
    pub window: usize,
    pub geometry: Geometry,
    pub seed: u64,
    pub mode: TrainingMode,
    /// 1 = deterministic single-threaded SGD; more shards pairs across
    /// workers with unsynchronized row updates.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 128,
            lr: 0.1,
            epochs: 15,
            negatives: 5,
            window: 10,
            geometry: Geometry::Euclidean,
            seed: 0,
            mode: TrainingMode::NegativeSampling,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: SkipGramModel,
    /// Mean loss over each epoch's pairs, measured before each step.
    pub epoch_losses: Vec<f64>,
    /// Objective on a fixed evaluation sample after every epoch; see
    /// [`EVAL_PAIRS`].
    pub sample_losses: Vec<f64>,
}

/// Size of the seeded `(center, context, negatives)` sample on which the
/// per-epoch objective is measured. Fixed negatives keep the values
/// comparable across epochs.
pub const EVAL_PAIRS: usize = 5000;

/// Row storage the SGD step reads from and writes to.
trait Rows {
    fn load(&self, row: usize, dim: usize, buf: &mut [f64]);
    fn store(&mut self, row: usize, dim: usize, buf: &[f64]);
}

impl Rows for Vec<f64> {
    #[inline]
    fn load(&self, row: usize, dim: usize, buf: &mut [f64]) {
        buf.copy_from_slice(&self[row * dim..(row + 1) * dim]);
    }

    #[inline]
    fn store(&mut self, row: usize, dim: usize, buf: &[f64]) {
        self[row * dim..(row + 1) * dim].copy_from_slice(buf);
    }
}

/// Lock-free shared rows for the parallel mode. Concurrent updates to the
/// same row may interleave; each element is read and written atomically.
struct SharedRows<'a>(&'a [AtomicU64]);

impl Rows for SharedRows<'_> {
    #[inline]
    fn load(&self, row: usize, dim: usize, buf: &mut [f64]) {
        for (b, a) in buf.iter_mut().zip(&self.0[row * dim..(row + 1) * dim]) {
            *b = f64::from_bits(a.load(Ordering::Relaxed));
        }
    }

    #[inline]
    fn store(&mut self, row: usize, dim: usize, buf: &[f64]) {
        for (b, a) in buf.iter().zip(&self.0[row * dim..(row + 1) * dim]) {
            a.store(b.to_bits(), Ordering::Relaxed);
        }
    }
}

struct Scratch {
    center: Vec<f64>,
    center_grad: Vec<f64>,
    out: Vec<f64>,
    out_grad: Vec<f64>,
    probs: Vec<f64>,
}

impl Scratch {
    fn new(dim: usize, vertex_count: usize, mode: TrainingMode) -> Self {
        Scratch {
            center: vec![0.0; dim],
            center_grad: vec![0.0; dim],
            out: vec![0.0; dim],
            out_grad: vec![0.0; dim],
            probs: match mode {
                TrainingMode::ExactSoftmax => vec![0.0; vertex_count],
                TrainingMode::NegativeSampling => Vec::new(),
            },
        }
    }
}

#[inline]
fn project(geometry: Geometry, row: &mut [f64]) {
    if geometry == Geometry::PoincarePolar {
        row[0] = row[0].clamp(R_MIN, R_MAX);
        row[1] = row[1].rem_euclid(TAU);
        if row[1] >= TAU {
            row[1] = 0.0;
        }
    }
}

/// Updates one output row against the (fixed) center row and accumulates
/// the center gradient.
#[inline]
fn update_output<R: Rows>(
    output: &mut R,
    o: VertexId,
    ds: f64,
    lr: f64,
    geometry: Geometry,
    s: &mut Scratch,
) {
    let dim = s.center.len();
    match geometry {
        Geometry::Euclidean => {
            let step = lr * ds;
            for ((g, w), c) in s
                .center_grad
                .iter_mut()
                .zip(s.out.iter_mut())
                .zip(&s.center)
            {
                *g += ds * *w;
                *w -= step * c;
            }
        }
        Geometry::PoincarePolar => {
            s.out_grad.fill(0.0);
            accumulate_similarity_grad(
                geometry,
                &s.center,
                &s.out,
                ds,
                &mut s.center_grad,
                &mut s.out_grad,
            );
            for (w, g) in s.out.iter_mut().zip(&s.out_grad) {
                *w -= lr * g;
            }
            project(geometry, &mut s.out);
        }
    }
    output.store(o, dim, &s.out);
}

/// [`sgd_step`] for Euclidean rows under negative sampling, updating rows in
/// place. Same operations in the same order, so results are identical.
#[allow(clippy::too_many_arguments)]
fn sgd_step_euclidean(
    input: &mut [f64],
    output: &mut [f64],
    center: VertexId,
    context: VertexId,
    lr: f64,
    cfg: &TrainConfig,
    noise: &WeightedAliasIndex<f64>,
    rng: &mut Rng,
    s: &mut Scratch,
) -> f64 {
    let d = cfg.dim;
    s.center
        .copy_from_slice(&input[center * d..(center + 1) * d]);
    s.center_grad.fill(0.0);
    let mut visit = |o: VertexId, positive: bool| {
        let w = &mut output[o * d..(o + 1) * d];
        let (sig, log_pos, log_neg) = sigmoid_terms(dot(&s.center, w));
        let (ds, loss) = if positive {
            (sig - 1.0, log_pos)
        } else {
            (sig, log_neg)
        };
        let step = lr * ds;
        for ((g, w), c) in s.center_grad.iter_mut().zip(w.iter_mut()).zip(&s.center) {
            *g += ds * *w;
            *w -= step * c;
        }
        -loss
    };
    let mut loss = visit(context, true);
    let mut drawn = 0;
    let mut attempts = 0;
    while drawn < cfg.negatives && attempts < 16 * cfg.negatives {
        attempts += 1;
        let neg = noise.sample(rng);
        if neg == context {
            continue;
        }
        drawn += 1;
        loss += visit(neg, false);
    }
    let row = &mut input[center * d..(center + 1) * d];
    for ((w, c), g) in row.iter_mut().zip(&s.center).zip(&s.center_grad) {
        *w = c - lr * g;
    }
    loss
}

/// One SGD step for a pair; returns the pair loss. Output rows are updated
/// sequentially, the center row once at the end.
#[allow(clippy::too_many_arguments)]
fn sgd_step<I: Rows, O: Rows>(
    input: &mut I,
    output: &mut O,
    center: VertexId,
    context: VertexId,
    lr: f64,
    cfg: &TrainConfig,
    vertex_count: usize,
    noise: Option<&WeightedAliasIndex<f64>>,
    rng: &mut Rng,
    s: &mut Scratch,
) -> f64 {
    let dim = cfg.dim;
    let geom = cfg.geometry;
    input.load(center, dim, &mut s.center);
    s.center_grad.fill(0.0);
    let mut loss = 0.0;
    match cfg.mode {
        TrainingMode::NegativeSampling => {
            let noise = noise.expect("noise table for negative sampling");
            output.load(context, dim, &mut s.out);
            let (sig, log_pos, _) = sigmoid_terms(row_similarity(geom, &s.center, &s.out));
            loss -= log_pos;
            update_output(output, context, sig - 1.0, lr, geom, s);
            let mut drawn = 0;
            let mut attempts = 0;
            while drawn < cfg.negatives && attempts < 16 * cfg.negatives {
                attempts += 1;
                let neg = noise.sample(rng);
                if neg == context {
                    continue;
                }
                drawn += 1;
                output.load(neg, dim, &mut s.out);
                let (sig, _, log_neg) = sigmoid_terms(row_similarity(geom, &s.center, &s.out));
                loss -= log_neg;
                update_output(output, neg, sig, lr, geom, s);
            }
        }
        TrainingMode::ExactSoftmax => {
            let mut max = f64::NEG_INFINITY;
            for v in 0..vertex_count {
                output.load(v, dim, &mut s.out);
                s.probs[v] = row_similarity(geom, &s.center, &s.out);
                max = max.max(s.probs[v]);
            }
            let mut z = 0.0;
            for p in s.probs.iter_mut() {
                *p = (*p - max).exp();
                z += *p;
            }
            loss -= (s.probs[context] / z).ln();
            for v in 0..vertex_count {
                let ds = s.probs[v] / z - if v == context { 1.0 } else { 0.0 };
                output.load(v, dim, &mut s.out);
                update_output(output, v, ds, lr, geom, s);
            }
        }
    }
    for (w, g) in s.center.iter_mut().zip(&s.center_grad) {
        *w -= lr * g;
    }
    project(geom, &mut s.center);
    input.store(center, dim, &s.center);
    loss
}

fn pairs_in_walk(len: usize, window: usize) -> usize {
    (0..len)
        .map(|i| i.min(window) + (len - 1 - i).min(window))
        .sum()
}

/// `(center, context, negatives)` triples drawn from the corpus pair stream.
/// Negatives are empty in exact-softmax mode.
fn evaluation_sample(
    corpus: &WalkCorpus,
    cfg: &TrainConfig,
    noise: Option<&WeightedAliasIndex<f64>>,
) -> Vec<(VertexId, VertexId, Vec<VertexId>)> {
    let mut rng = seed::rng(cfg.seed, &[seed::tag("eval-sample")]);
    let usable: Vec<&Vec<VertexId>> = corpus.walks.iter().filter(|w| w.len() > 1).collect();
    (0..EVAL_PAIRS)
        .map(|_| {
            let walk = usable[rng.random_range(0..usable.len())];
            let i = rng.random_range(0..walk.len());
            let lo = i.saturating_sub(cfg.window);
            let hi = (i + cfg.window).min(walk.len() - 1);
            // a context offset in [lo, hi] other than i
            let mut j = rng.random_range(lo..hi);
            if j >= i {
                j += 1;
            }
            let (center, context) = (walk[i], walk[j]);
            let negatives = noise
                .map(|noise| {
                    let mut negs = Vec::with_capacity(cfg.negatives);
                    let mut attempts = 0;
                    while negs.len() < cfg.negatives && attempts < 16 * cfg.negatives {
                        attempts += 1;
                        let n = noise.sample(&mut rng);
                        if n != context {
                            negs.push(n);
                        }
                    }
                    negs
                })
                .unwrap_or_default();
            (center, context, negatives)
        })
        .collect()
}

/// Mean objective over the evaluation sample under the training mode.
fn sample_objective(
    model: &SkipGramModel,
    sample: &[(VertexId, VertexId, Vec<VertexId>)],
    mode: TrainingMode,
) -> f64 {
    // collected before summing so the order is independent of scheduling
    let losses: Vec<f64> = sample
        .par_iter()
        .map(|(c, x, negs)| {
            let center = model.input_row(*c);
            match mode {
                TrainingMode::NegativeSampling => {
                    let sim =
                        |o: VertexId| row_similarity(model.geometry, center, model.output_row(o));
                    -log_sigmoid(sim(*x)) - negs.iter().map(|&n| log_sigmoid(-sim(n))).sum::<f64>()
                }
                TrainingMode::ExactSoftmax => -softmax_over_outputs(model, *c)[*x].ln(),
            }
        })
        .collect();
    losses.iter().sum::<f64>() / sample.len() as f64
}

/// Trains a skip-gram model on the corpus.
///
/// Each epoch visits the walks in an order shuffled by `(seed, epoch)`,
/// gathers their context pairs into blocks and shuffles each block before
/// the SGD steps. The learning rate decays linearly from
/// `lr` to `lr / 100` over all pairs of all epochs. After each epoch the
/// objective is measured on a fixed sample of pairs.
pub fn train(g: &Graph, corpus: &WalkCorpus, cfg: &TrainConfig) -> Result<Trained> {
    let n = g.vertex_count();
    if corpus.walks.is_empty() {
        return Err(Error::EmptyInput("walk corpus"));
    }
    if cfg.window == 0 || cfg.epochs == 0 {
        return Err(Error::InvalidParameter(
            "window and epochs must be positive".into(),
        ));
    }
    if cfg.mode == TrainingMode::ExactSoftmax && n > EXACT_SOFTMAX_MAX_VERTICES {
        return Err(Error::InvalidParameter(format!(
            "exact softmax is limited to {EXACT_SOFTMAX_MAX_VERTICES} vertices, graph has {n}"
        )));
    }
    let mut model = init_model(n, cfg.dim, cfg.geometry, cfg.seed)?;

    let noise = match cfg.mode {
        TrainingMode::NegativeSampling => {
            let weights: Vec<f64> = corpus
                .frequencies(n)
                .iter()
                .map(|&f| (f as f64).powf(0.75))
                .collect();
            Some(WeightedAliasIndex::new(weights).map_err(|e| {
                Error::InvalidParameter(format!("cannot build noise distribution: {e}"))
            })?)
        }
        TrainingMode::ExactSoftmax => None,
    };

    let per_epoch: usize = corpus
        .walks
        .iter()
        .map(|w| pairs_in_walk(w.len(), cfg.window))
        .sum();
    if per_epoch == 0 {
        return Err(Error::EmptyInput("corpus yields no context pairs"));
    }
    let total = (per_epoch * cfg.epochs) as f64;
    let lr_at = |done: usize| cfg.lr * (1.0 - 0.99 * (done as f64 / total).min(1.0));

    let sample = evaluation_sample(corpus, cfg, noise.as_ref());
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut sample_losses = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..corpus.walks.len()).collect();
    let mut block = Vec::with_capacity(per_epoch.min(SHUFFLE_BLOCK));
    let mut done = 0usize;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut seed::rng(
            cfg.seed,
            &[seed::tag("epoch"), epoch as u64],
        ));
        let mut block_rng = seed::rng(cfg.seed, &[seed::tag("pair-shuffle"), epoch as u64]);
        let mut epoch_rows = EpochRows::new(&model, cfg, epoch);
        let mut walks_left = order.iter();
        let mut loss_sum = 0.0;
        loop {
            block.clear();
            for &w in walks_left.by_ref() {
                walks::for_each_pair(&corpus.walks[w], cfg.window, |c, x| block.push((c, x)));
                if block.len() >= SHUFFLE_BLOCK {
                    break;
                }
            }
            if block.is_empty() {
                break;
            }
            block.shuffle(&mut block_rng);
            loss_sum += epoch_rows.run_block(&mut model, &block, done, &lr_at, noise.as_ref());
            done += block.len();
        }
        epoch_rows.finish(&mut model);
        let mean = loss_sum / per_epoch as f64;
        let held = sample_objective(&model, &sample, cfg.mode);
        if !mean.is_finite() || !held.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        epoch_losses.push(mean);
        sample_losses.push(held);
    }
    Ok(Trained {
        model,
        epoch_losses,
        sample_losses,
    })
}

/// Pairs are shuffled in blocks of this many before the SGD steps, which
/// breaks up the neighbourhood runs of individual walks.
const SHUFFLE_BLOCK: usize = 1 << 20;

/// Per-epoch SGD state: direct row access for one worker, atomic shared
/// rows for several.
enum EpochRows<'a> {
    Serial {
        cfg: &'a TrainConfig,
        rng: Rng,
        scratch: Scratch,
    },
    Shared {
        cfg: &'a TrainConfig,
        epoch: usize,
        blocks: u64,
        input: Vec<AtomicU64>,
        output: Vec<AtomicU64>,
    },
}

impl<'a> EpochRows<'a> {
    fn new(model: &SkipGramModel, cfg: &'a TrainConfig, epoch: usize) -> Self {
        if cfg.workers <= 1 {
            EpochRows::Serial {
                cfg,
                rng: seed::rng(cfg.seed, &[seed::tag("negatives"), epoch as u64]),
                scratch: Scratch::new(cfg.dim, model.vertex_count, cfg.mode),
            }
        } else {
            let to_atomic = |v: &[f64]| v.iter().map(|x| AtomicU64::new(x.to_bits())).collect();
            EpochRows::Shared {
                cfg,
                epoch,
                blocks: 0,
                input: to_atomic(&model.input),
                output: to_atomic(&model.output),
            }
        }
    }

    fn run_block(
        &mut self,
        model: &mut SkipGramModel,
        block: &[(VertexId, VertexId)],
        done_before: usize,
        lr_at: &(dyn Fn(usize) -> f64 + Sync),
        noise: Option<&WeightedAliasIndex<f64>>,
    ) -> f64 {
        let n = model.vertex_count;
        match self {
            EpochRows::Serial { cfg, rng, scratch } => {
                let fast = match (cfg.geometry, noise) {
                    (Geometry::Euclidean, Some(noise)) => Some(noise),
                    _ => None,
                };
                let mut sum = 0.0;
                for (k, &(c, x)) in block.iter().enumerate() {
                    let lr = lr_at(done_before + k);
                    if let Some(noise) = fast {
                        sum += sgd_step_euclidean(
                            &mut model.input,
                            &mut model.output,
                            c,
                            x,
                            lr,
                            cfg,
                            noise,
                            rng,
                            scratch,
                        );
                        continue;
                    }
                    sum += sgd_step(
                        &mut model.input,
                        &mut model.output,
                        c,
                        x,
                        lr,
                        cfg,
                        n,
                        noise,
                        rng,
                        scratch,
                    );
                }
                sum
            }
            EpochRows::Shared {
                cfg,
                epoch,
                blocks,
                input,
                output,
            } => {
                let (cfg, epoch, block_id) = (&**cfg, *epoch, *blocks);
                *blocks += 1;
                let shard = block.len().div_ceil(cfg.workers).max(1);
                let (input, output) = (&*input, &*output);
                let sums: Vec<f64> = block
                    .par_chunks(shard)
                    .enumerate()
                    .map(|(worker, chunk)| {
                        let mut rng = seed::rng(
                            cfg.seed,
                            &[
                                seed::tag("negatives"),
                                epoch as u64,
                                block_id,
                                worker as u64,
                            ],
                        );
                        let mut scratch = Scratch::new(cfg.dim, n, cfg.mode);
                        let mut inp = SharedRows(input);
                        let mut out = SharedRows(output);
                        let start = done_before + worker * shard;
                        let mut sum = 0.0;
                        for (k, &(c, x)) in chunk.iter().enumerate() {
                            let lr = lr_at(start + k);
                            sum += sgd_step(
                                &mut inp,
                                &mut out,
                                c,
                                x,
                                lr,
                                cfg,
                                n,
                                noise,
                                &mut rng,
                                &mut scratch,
                            );
                        }
                        sum
                    })
                    .collect();
                sums.iter().sum()
            }
        }
    }

    fn finish(self, model: &mut SkipGramModel) {
        if let EpochRows::Shared { input, output, .. } = self {
            let from_atomic = |v: Vec<AtomicU64>| {
                v.into_iter()
                    .map(|a| f64::from_bits(a.into_inner()))
                    .collect()
            };
            model.input = from_atomic(input);
            model.output = from_atomic(output);
        }
    }
}

/// Walk and training settings for one random-walk method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkMethodConfig {
    pub walks_per_vertex: usize,
    pub walk_length: usize,
    pub strategy: WalkStrategy,
    pub train: TrainConfig,
}

impl WalkMethodConfig {
    /// Default hyper-parameters per method: SGD, learning rate 0.1,
    /// 15 epochs; Node2Vec-H `p=1, q=0.5`; Node2Vec-S and Poincaré
    /// `p=0.5, q=2`. Walk counts, length, window and `d` follow DeepWalk's
    /// defaults.
    pub fn for_method(method: MethodTag) -> Result<Self> {
        let (strategy, geometry, dim) = match method {
            MethodTag::Deepwalk => (WalkStrategy::Uniform, Geometry::Euclidean, 128),
            MethodTag::Node2vecH => (
                WalkStrategy::Biased { p: 1.0, q: 0.5 },
                Geometry::Euclidean,
                128,
            ),
            MethodTag::Node2vecS => (
                WalkStrategy::Biased { p: 0.5, q: 2.0 },
                Geometry::Euclidean,
                128,
            ),
            MethodTag::Poincare => (
                WalkStrategy::Biased { p: 0.5, q: 2.0 },
                Geometry::PoincarePolar,
                2,
            ),
            MethodTag::Sdne => {
                return Err(Error::InvalidParameter(
                    "sdne is not a random-walk method".into(),
                ))
            }
        };
        Ok(WalkMethodConfig {
            walks_per_vertex: 10,
            walk_length: 80,
            strategy,
            train: TrainConfig {
                dim,
                geometry,
                ..TrainConfig::default()
            },
        })
    }
}

/// Walks plus training for a random-walk method with explicit settings.
pub fn make_method_with(
    method: MethodTag,
    g: &Graph,
    cfg: &WalkMethodConfig,
) -> Result<(Embedding, Vec<f64>)> {
    let corpus = walks::generate_corpus(
        g,
        cfg.walks_per_vertex,
        cfg.walk_length,
        cfg.strategy,
        seed::derive(cfg.train.seed, &[seed::tag("corpus")]),
    )?;
    let trained = train(g, &corpus, &cfg.train)?;
    let emb = trained
        .model
        .into_embedding(g.labels().to_vec(), Some(method))?;
    Ok((emb, trained.epoch_losses))
}

/// Embeds `g` with one of the four random-walk methods at default settings.
pub fn make_method(method: MethodTag, g: &Graph, seed: u64) -> Result<Embedding> {
    let mut cfg = WalkMethodConfig::for_method(method)?;
    cfg.train.seed = seed;
    make_method_with(method, g, &cfg).map(|(e, _)| e)
}
