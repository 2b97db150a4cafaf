//! Structural deep network embedding: a sigmoid autoencoder over adjacency
//! rows, `|V| → h → d → h → |V|`, trained on
//!
//! ```text
//! L = Σ_i ‖(q'_i − q_i) ⊙ β_i‖² + α Σ_(u,v) a_uv ‖y_u − y_v‖²
//! ```
//!
//! where `β_ij = b` on observed edges and 1 elsewhere, and `y` is the
//! `d`-dimensional code. Adjacency rows are sparse, so the first encoder
//! layer sums weight rows instead of multiplying a dense input.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::embedding::{Embedding, Geometry, MethodTag};
use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `fan_in × fan_out`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    fn glorot(fan_in: usize, fan_out: usize, rng: &mut seed::Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Dense {
            w: Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..limit)),
            b: Array1::zeros(fan_out),
        }
    }

    fn zeros_like(&self) -> Self {
        Dense {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }
}

/// Encoder layers `[|V|→h, h→d]` followed by decoder layers `[d→h, h→|V|]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdneModel {
    pub layers: [Dense; 4],
}

fn sigmoid_in_place(a: &mut Array2<f64>) {
    a.mapv_inplace(crate::skipgram::sigmoid);
}

impl SdneModel {
    pub fn new(vertex_count: usize, hidden: usize, dim: usize, seed: u64) -> Result<Self> {
        if hidden == 0 || dim == 0 || vertex_count == 0 {
            return Err(Error::InvalidParameter(
                "vertex count, hidden width and code dimension must be positive".into(),
            ));
        }
        let mut rng = seed::rng(seed, &[seed::tag("sdne-init")]);
        Ok(SdneModel {
            layers: [
                Dense::glorot(vertex_count, hidden, &mut rng),
                Dense::glorot(hidden, dim, &mut rng),
                Dense::glorot(dim, hidden, &mut rng),
                Dense::glorot(hidden, vertex_count, &mut rng),
            ],
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn dim(&self) -> usize {
        self.layers[1].w.ncols()
    }

    /// Code and reconstruction for one dense input row.
    pub fn forward(&self, row: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if row.len() != self.vertex_count() {
            return Err(Error::DimensionMismatch {
                expected: self.vertex_count(),
                actual: row.len(),
            });
        }
        let x = ArrayView1::from(row).insert_axis(Axis(0)).to_owned();
        let mut a = x;
        let mut code = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.w) + &layer.b;
            sigmoid_in_place(&mut z);
            a = z;
            if i == 1 {
                code = a.row(0).to_vec();
            }
        }
        Ok((code, a.row(0).to_vec()))
    }

    /// Encoder activations for the adjacency rows of `vertices`.
    fn encode(&self, g: &Graph, vertices: &[VertexId]) -> (Array2<f64>, Array2<f64>) {
        let enc = &self.layers[0];
        let mut h = Array2::zeros((vertices.len(), enc.w.ncols()));
        for (i, &v) in vertices.iter().enumerate() {
            let mut row = h.row_mut(i);
            row.assign(&enc.b);
            for &j in g.adj(v) {
                row += &enc.w.row(j);
            }
        }
        sigmoid_in_place(&mut h);
        let mut y = h.dot(&self.layers[1].w) + &self.layers[1].b;
        sigmoid_in_place(&mut y);
        (h, y)
    }

    /// Codes for every vertex.
    pub fn codes(&self, g: &Graph) -> Array2<f64> {
        let all: Vec<VertexId> = (0..g.vertex_count()).collect();
        self.encode(g, &all).1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    /// `Σ_i ‖(q'_i − q_i) ⊙ β_i‖²` over the batch.
    pub reconstruction: f64,
    /// `Σ_(u,v) ‖y_u − y_v‖²` over the edge subset, before weighting by α.
    pub first_order: f64,
    /// `reconstruction + α · first_order`
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
}

/// Loss over `batch` reconstructions and the `edges` proximity term, with
/// gradients for every layer.
pub fn loss_and_grads(
    model: &SdneModel,
    g: &Graph,
    batch: &[VertexId],
    edges: &[(VertexId, VertexId)],
    weights: LossWeights,
) -> Result<(LossParts, [Dense; 4])> {
    let n = g.vertex_count();
    if batch.is_empty() {
        return Err(Error::EmptyInput("sdne batch"));
    }
    if model.vertex_count() != n {
        return Err(Error::DimensionMismatch {
            expected: model.vertex_count(),
            actual: n,
        });
    }
    for &v in batch.iter().chain(edges.iter().flat_map(|(u, v)| [u, v])) {
        if v >= n {
            return Err(Error::VertexOutOfRange {
                vertex: v,
                count: n,
            });
        }
    }

    // encode batch vertices first, then any extra edge endpoints
    let mut slot = vec![usize::MAX; n];
    let mut verts = Vec::with_capacity(batch.len());
    for &v in batch.iter().chain(edges.iter().flat_map(|(u, v)| [u, v])) {
        if slot[v] == usize::MAX {
            slot[v] = verts.len();
            verts.push(v);
        }
    }
    let nb = batch.len();
    let batch_slots: Vec<usize> = batch.iter().map(|&v| slot[v]).collect();

    let (h1, y) = model.encode(g, &verts);
    let yb = y.select(Axis(0), &batch_slots);
    let mut h3 = yb.dot(&model.layers[2].w) + &model.layers[2].b;
    sigmoid_in_place(&mut h3);
    let mut xr = h3.dot(&model.layers[3].w) + &model.layers[3].b;
    sigmoid_in_place(&mut xr);

    // reconstruction term and d/dz4
    let mut dz4 = Array2::zeros((nb, n));
    let mut reconstruction = 0.0;
    let beta2 = weights.beta * weights.beta;
    for (i, &v) in batch.iter().enumerate() {
        let xr_row = xr.row(i);
        let mut d_row = dz4.row_mut(i);
        let nbrs = g.adj(v);
        let mut k = 0;
        for j in 0..n {
            let observed = k < nbrs.len() && nbrs[k] == j;
            if observed {
                k += 1;
            }
            let (target, w2) = if observed { (1.0, beta2) } else { (0.0, 1.0) };
            let q = xr_row[j];
            let diff = q - target;
            reconstruction += w2 * diff * diff;
            d_row[j] = 2.0 * w2 * diff * q * (1.0 - q);
        }
    }

    let mut grads = [
        model.layers[0].zeros_like(),
        model.layers[1].zeros_like(),
        model.layers[2].zeros_like(),
        model.layers[3].zeros_like(),
    ];
    grads[3].w = h3.t().dot(&dz4);
    grads[3].b = dz4.sum_axis(Axis(0));
    let da3 = dz4.dot(&model.layers[3].w.t());
    let dz3 = da3 * &h3.mapv(|a| a * (1.0 - a));
    grads[2].w = yb.t().dot(&dz3);
    grads[2].b = dz3.sum_axis(Axis(0));
    let dyb = dz3.dot(&model.layers[2].w.t());

    let mut dy = Array2::zeros(y.raw_dim());
    for (i, &s) in batch_slots.iter().enumerate() {
        let mut row = dy.row_mut(s);
        row += &dyb.row(i);
    }
    let mut first_order = 0.0;
    for &(u, v) in edges {
        let (su, sv) = (slot[u], slot[v]);
        for k in 0..y.ncols() {
            let diff = y[[su, k]] - y[[sv, k]];
            first_order += diff * diff;
            dy[[su, k]] += 2.0 * weights.alpha * diff;
            dy[[sv, k]] -= 2.0 * weights.alpha * diff;
        }
    }

    let dz2 = dy * &y.mapv(|a| a * (1.0 - a));
    grads[1].w = h1.t().dot(&dz2);
    grads[1].b = dz2.sum_axis(Axis(0));
    let da1 = dz2.dot(&model.layers[1].w.t());
    let dz1 = da1 * &h1.mapv(|a| a * (1.0 - a));
    grads[0].b = dz1.sum_axis(Axis(0));
    for (i, &v) in verts.iter().enumerate() {
        let d = dz1.row(i);
        for &j in g.adj(v) {
            let mut row = grads[0].w.row_mut(j);
            row += &d;
        }
    }

    let parts = LossParts {
        reconstruction,
        first_order,
        total: reconstruction + weights.alpha * first_order,
    };
    Ok((parts, grads))
}

/// Loss only.
pub fn loss(
    model: &SdneModel,
    g: &Graph,
    batch: &[VertexId],
    edges: &[(VertexId, VertexId)],
    weights: LossWeights,
) -> Result<LossParts> {
    loss_and_grads(model, g, batch, edges, weights).map(|(l, _)| l)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdneConfig {
    pub hidden: usize,
    pub dim: usize,
    pub alpha: f64,
    pub beta: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for SdneConfig {
    fn default() -> Self {
        SdneConfig {
            hidden: 256,
            dim: 128,
            alpha: 500.0,
            beta: 10.0,
            lr: 0.01,
            epochs: 500,
            batch: 64,
            seed: 0,
        }
    }
}

const RMS_DECAY: f64 = 0.9;
const RMS_EPS: f64 = 1e-8;

struct RmsProp {
    cache: [Dense; 4],
}

impl RmsProp {
    fn new(model: &SdneModel) -> Self {
        RmsProp {
            cache: [
                model.layers[0].zeros_like(),
                model.layers[1].zeros_like(),
                model.layers[2].zeros_like(),
                model.layers[3].zeros_like(),
            ],
        }
    }

    fn step(&mut self, model: &mut SdneModel, grads: &[Dense; 4], lr: f64) {
        for ((layer, grad), cache) in model.layers.iter_mut().zip(grads).zip(&mut self.cache) {
            ndarray::Zip::from(&mut layer.w)
                .and(&grad.w)
                .and(&mut cache.w)
                .for_each(|w, &g, c| {
                    *c = RMS_DECAY * *c + (1.0 - RMS_DECAY) * g * g;
                    *w -= lr * g / (c.sqrt() + RMS_EPS);
                });
            ndarray::Zip::from(&mut layer.b)
                .and(&grad.b)
                .and(&mut cache.b)
                .for_each(|b, &g, c| {
                    *c = RMS_DECAY * *c + (1.0 - RMS_DECAY) * g * g;
                    *b -= lr * g / (c.sqrt() + RMS_EPS);
                });
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdneTrained {
    pub model: SdneModel,
    pub embedding: Embedding,
    /// Summed loss components of every epoch.
    pub epoch_losses: Vec<LossParts>,
}

/// Edges with at least one endpoint in `batch`, each listed once.
fn incident_edges(
    g: &Graph,
    batch: &[VertexId],
    in_batch: &mut [bool],
) -> Vec<(VertexId, VertexId)> {
    for &v in batch {
        in_batch[v] = true;
    }
    let mut edges = Vec::new();
    for &u in batch {
        for &v in g.adj(u) {
            // an edge inside the batch is emitted from its smaller endpoint
            if !in_batch[v] || u < v {
                edges.push((u, v));
            }
        }
    }
    for &v in batch {
        in_batch[v] = false;
    }
    edges
}

/// Trains with RMSProp over shuffled minibatches of vertices.
pub fn train(g: &Graph, cfg: &SdneConfig) -> Result<SdneTrained> {
    let n = g.vertex_count();
    if cfg.batch == 0 || cfg.epochs == 0 {
        return Err(Error::InvalidParameter(
            "batch size and epochs must be positive".into(),
        ));
    }
    let mut model = SdneModel::new(n, cfg.hidden, cfg.dim, cfg.seed)?;
    let mut opt = RmsProp::new(&model);
    let weights = LossWeights {
        alpha: cfg.alpha,
        beta: cfg.beta,
    };
    let mut order: Vec<VertexId> = (0..n).collect();
    let mut in_batch = vec![false; n];
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut seed::rng(
            cfg.seed,
            &[seed::tag("sdne-epoch"), epoch as u64],
        ));
        let mut sum = LossParts::default();
        for batch in order.chunks(cfg.batch) {
            let edges = incident_edges(g, batch, &mut in_batch);
            let (parts, grads) = loss_and_grads(&model, g, batch, &edges, weights)?;
            if !parts.total.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            sum.reconstruction += parts.reconstruction;
            sum.first_order += parts.first_order;
            sum.total += parts.total;
            opt.step(&mut model, &grads, cfg.lr);
        }
        epoch_losses.push(sum);
    }
    let codes = model.codes(g);
    if codes.iter().any(|x| !x.is_finite()) {
        return Err(Error::Divergence {
            epoch: cfg.epochs - 1,
        });
    }
    let embedding = Embedding::new(
        g.labels().to_vec(),
        cfg.dim,
        codes.iter().copied().collect(),
        Geometry::Euclidean,
        Some(MethodTag::Sdne),
    )?;
    Ok(SdneTrained {
        model,
        embedding,
        epoch_losses,
    })
}
