//! Probe classifiers: multinomial logistic regression, one-vs-rest linear
//! SVM and ReLU networks with one or two hidden layers, all trained with
//! minibatch Adam on standardized inputs.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Logreg,
    LinearSvm,
    Mlp1,
    Mlp2,
}

impl ProbeKind {
    pub const ALL: [ProbeKind; 4] = [
        ProbeKind::Logreg,
        ProbeKind::LinearSvm,
        ProbeKind::Mlp1,
        ProbeKind::Mlp2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProbeKind::Logreg => "logreg",
            ProbeKind::LinearSvm => "linear_svm",
            ProbeKind::Mlp1 => "mlp1",
            ProbeKind::Mlp2 => "mlp2",
        }
    }

    pub fn hidden_widths(self) -> &'static [usize] {
        match self {
            ProbeKind::Logreg | ProbeKind::LinearSvm => &[],
            ProbeKind::Mlp1 => &[100],
            ProbeKind::Mlp2 => &[256, 256],
        }
    }
}

impl fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProbeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProbeKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownTag {
                kind: "probe",
                tag: s.to_owned(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// L2 penalty on weight matrices (not biases).
    pub l2: f64,
    /// Early stop once the epoch loss fails to improve by `tol` for
    /// `patience` consecutive epochs.
    pub tol: f64,
    pub patience: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            seed: 0,
            epochs: 200,
            lr: 1e-3,
            batch_size: 32,
            l2: 1e-4,
            tol: 1e-4,
            patience: 10,
        }
    }
}

/// `n / (present · count_c)` for classes seen in `labels`, 0 for the rest.
pub fn class_weights(labels: &[usize], classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; classes.max(labels.iter().map(|&l| l + 1).max().unwrap_or(0))];
    for &l in labels {
        counts[l] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    counts
        .iter()
        .map(|&c| {
            if c == 0 {
                0.0
            } else {
                labels.len() as f64 / (present * c) as f64
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean: Vec<f64> = x.sum_axis(Axis(0)).iter().map(|s| s / n).collect();
        let scale = x
            .axis_iter(Axis(1))
            .zip(&mean)
            .map(|(col, m)| {
                let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
                if var.sqrt() > 1e-12 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `fan_in × fan_out`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Layer {
    fn zeros_like(&self) -> Self {
        Layer {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    pub kind: ProbeKind,
    pub classes: usize,
    pub input_dim: usize,
    pub standardizer: Standardizer,
    /// Hidden layers use ReLU; the last layer emits one score per class.
    pub layers: Vec<Layer>,
    pub class_weights: Vec<f64>,
    /// Set when training saw a single class; every prediction is this class.
    pub constant: Option<usize>,
    pub warning: Option<String>,
    pub epochs_run: usize,
}

impl ProbeModel {
    pub fn init(kind: ProbeKind, input_dim: usize, classes: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed, &[seed::tag("probe-init"), seed::tag(kind.as_str())]);
        let mut widths = vec![input_dim];
        widths.extend_from_slice(kind.hidden_widths());
        widths.push(classes);
        let layers = widths
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                Layer {
                    w: Array2::from_shape_fn((w[0], w[1]), |_| rng.random_range(-limit..limit)),
                    b: Array1::zeros(w[1]),
                }
            })
            .collect();
        ProbeModel {
            kind,
            classes,
            input_dim,
            standardizer: Standardizer {
                mean: vec![0.0; input_dim],
                scale: vec![1.0; input_dim],
            },
            layers,
            class_weights: vec![1.0; classes],
            constant: None,
            warning: None,
            epochs_run: 0,
        }
    }

    /// Pre-activations of every layer; the last entry holds the class scores.
    fn forward(&self, x: &Array2<f64>) -> Vec<Array2<f64>> {
        let mut zs = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = h.dot(&layer.w) + &layer.b;
            if i + 1 < self.layers.len() {
                h = z.mapv(|v| v.max(0.0));
            }
            zs.push(z);
        }
        zs
    }

    /// Objective on already standardized rows and its gradient per layer.
    ///
    /// The data term is `(1/n) Σ_i s_i ℓ_i` where `s_i` is the sample weight
    /// and `ℓ_i` is softmax cross-entropy, or for `linear_svm` the summed
    /// one-vs-rest hinge `Σ_c max(0, 1 − t_ic z_ic)` with `t_ic = ±1`.
    /// `l2/2 · Σ‖W‖²` is added over weight matrices.
    pub fn loss_and_grads(
        &self,
        x: &Array2<f64>,
        y: &[usize],
        sample_weights: &[f64],
        l2: f64,
    ) -> (f64, Vec<Layer>) {
        let n = x.nrows() as f64;
        let zs = self.forward(x);
        let scores = zs.last().unwrap();
        let mut dz = Array2::<f64>::zeros(scores.raw_dim());
        let mut loss = 0.0;

        for (i, row) in scores.rows().into_iter().enumerate() {
            let s = sample_weights[i] / n;
            if self.kind == ProbeKind::LinearSvm {
                for (c, &z) in row.iter().enumerate() {
                    let t = if c == y[i] { 1.0 } else { -1.0 };
                    let margin = 1.0 - t * z;
                    if margin > 0.0 {
                        loss += s * margin;
                        dz[[i, c]] = -s * t;
                    }
                }
            } else {
                let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let sum: f64 = row.iter().map(|z| (z - max).exp()).sum();
                let log_norm = max + sum.ln();
                loss += s * (log_norm - row[y[i]]);
                for (c, &z) in row.iter().enumerate() {
                    let p = (z - log_norm).exp();
                    dz[[i, c]] = s * (p - f64::from(u8::from(c == y[i])));
                }
            }
        }

        let mut grads: Vec<Layer> = self.layers.iter().map(Layer::zeros_like).collect();
        for l in (0..self.layers.len()).rev() {
            let input = if l == 0 {
                x.clone()
            } else {
                zs[l - 1].mapv(|v| v.max(0.0))
            };
            grads[l].w = input.t().dot(&dz) + &(&self.layers[l].w * l2);
            grads[l].b = dz.sum_axis(Axis(0));
            if l > 0 {
                let mut dh = dz.dot(&self.layers[l].w.t());
                dh.zip_mut_with(&zs[l - 1], |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
                dz = dh;
            }
        }
        let penalty: f64 = self
            .layers
            .iter()
            .map(|layer| layer.w.iter().map(|w| w * w).sum::<f64>())
            .sum();
        (loss + 0.5 * l2 * penalty, grads)
    }

    /// Class scores for raw (unstandardized) rows.
    pub fn scores(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: x.ncols(),
            });
        }
        let z = self.standardizer.apply(x);
        Ok(self.forward(&z).pop().unwrap())
    }
}

struct Adam {
    m: Vec<Layer>,
    v: Vec<Layer>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(layers: &[Layer]) -> Self {
        Adam {
            m: layers.iter().map(Layer::zeros_like).collect(),
            v: layers.iter().map(Layer::zeros_like).collect(),
            t: 0,
        }
    }

    fn step(&mut self, layers: &mut [Layer], grads: &[Layer], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = Self::B1 * *m + (1.0 - Self::B1) * g;
            *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        };
        for (((layer, g), m), v) in layers
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            ndarray::Zip::from(&mut layer.w)
                .and(&g.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.b)
                .and(&g.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

/// Fits a probe on rows `x` with labels `y ∈ 0..classes`.
///
/// `class_weights`, when given, scales each sample's loss by the weight of
/// its class. Standardization statistics come from `x` alone.
pub fn train_probe(
    kind: ProbeKind,
    x: ArrayView2<f64>,
    y: &[usize],
    classes: usize,
    class_weights: Option<&[f64]>,
    cfg: &ProbeConfig,
) -> Result<ProbeModel> {
    if x.nrows() == 0 {
        return Err(Error::EmptyInput("probe training rows"));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidParameter(format!(
            "label {bad} outside 0..{classes}"
        )));
    }
    if let Some(w) = class_weights {
        if w.len() < classes {
            return Err(Error::DimensionMismatch {
                expected: classes,
                actual: w.len(),
            });
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "probe inputs must be finite".into(),
        ));
    }
    if cfg.batch_size == 0 || !(cfg.lr > 0.0) {
        return Err(Error::InvalidParameter(
            "batch size and learning rate must be positive".into(),
        ));
    }

    let mut model = ProbeModel::init(kind, x.ncols(), classes, cfg.seed);
    model.standardizer = Standardizer::fit(x);
    if let Some(w) = class_weights {
        model.class_weights = w[..classes].to_vec();
    }

    if y.iter().all(|&l| l == y[0]) {
        model.constant = Some(y[0]);
        model.warning = Some(format!("training set holds only class {}", y[0]));
        return Ok(model);
    }

    let xs = model.standardizer.apply(x);
    let sample_w: Vec<f64> = y.iter().map(|&l| model.class_weights[l]).collect();
    let mut order: Vec<usize> = (0..y.len()).collect();
    let mut rng = seed::rng(cfg.seed, &[seed::tag("probe-batches")]);
    let mut adam = Adam::new(&model.layers);
    let mut best = f64::INFINITY;
    let mut stale = 0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = xs.select(Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
            let wb: Vec<f64> = chunk.iter().map(|&i| sample_w[i]).collect();
            let (loss, grads) = model.loss_and_grads(&xb, &yb, &wb, cfg.l2);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            epoch_loss += loss * chunk.len() as f64;
            adam.step(&mut model.layers, &grads, cfg.lr);
        }
        epoch_loss /= y.len() as f64;
        model.epochs_run = epoch + 1;
        if epoch_loss > best - cfg.tol {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        } else {
            stale = 0;
        }
        best = best.min(epoch_loss);
    }
    Ok(model)
}

/// Arg-max class per row; ties go to the lower class index.
pub fn predict(model: &ProbeModel, x: ArrayView2<f64>) -> Result<Vec<usize>> {
    if x.ncols() != model.input_dim {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim,
            actual: x.ncols(),
        });
    }
    if let Some(c) = model.constant {
        return Ok(vec![c; x.nrows()]);
    }
    let scores = model.scores(x)?;
    Ok(scores
        .rows()
        .into_iter()
        .map(|r| argmax(r.iter().copied()))
        .collect())
}

pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(n: usize, minority_every: usize, sep: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = seed::rng(seed, &[]);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let y: Vec<usize> = (0..n)
            .map(|i| usize::from(i % minority_every == 0))
            .collect();
        let x = Array2::from_shape_fn((n, 2), |(i, j)| {
            let centre = if j == 0 { sep * y[i] as f64 } else { 0.0 };
            centre + normal.sample(&mut rng)
        });
        (x, y)
    }

    #[test]
    fn class_weight_formula() {
        assert_eq!(class_weights(&[0, 1], 2), vec![1.0, 1.0]);
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i >= 90)).collect();
        let w = class_weights(&labels, 2);
        assert!((w[0] - 100.0 / 180.0).abs() < 1e-15 && (w[1] - 5.0).abs() < 1e-15);
        assert_eq!(class_weights(&[0, 0, 0], 1), vec![1.0]);
        assert_eq!(class_weights(&[0, 2], 4), vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn separable_blobs_every_kind() {
        let (x, y) = blobs(200, 2, 10.0, 4);
        for kind in ProbeKind::ALL {
            let m = train_probe(kind, x.view(), &y, 2, None, &ProbeConfig::default()).unwrap();
            assert_eq!(predict(&m, x.view()).unwrap(), y, "{kind}");
        }
    }

    #[test]
    fn single_class_is_constant_with_warning() {
        let x = Array2::from_elem((5, 3), 1.0);
        let m = train_probe(
            ProbeKind::Mlp1,
            x.view(),
            &[2; 5],
            4,
            None,
            &ProbeConfig::default(),
        )
        .unwrap();
        assert!(m.warning.is_some());
        assert_eq!(
            predict(&m, Array2::zeros((3, 3)).view()).unwrap(),
            vec![2; 3]
        );
    }

    #[test]
    fn ties_and_dims() {
        assert_eq!(argmax([1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax([0.0, 0.0]), 0);
        let mut m = ProbeModel::init(ProbeKind::Logreg, 2, 3, 0);
        for l in &mut m.layers {
            l.w.fill(0.0);
        }
        assert_eq!(
            predict(&m, Array2::ones((2, 2)).view()).unwrap(),
            vec![0, 0]
        );
        assert!(predict(&m, Array2::ones((2, 5)).view()).is_err());
    }

    #[test]
    fn weighting_lifts_minority_recall() {
        // overlapping 9:1 blobs; the unweighted fit favours the majority
        let (x, y) = blobs(1000, 10, 1.5, 8);
        let w = class_weights(&y, 2);
        let cfg = ProbeConfig::default();
        let recall = |m: &ProbeModel| {
            let p = predict(m, x.view()).unwrap();
            let hits = (0..y.len()).filter(|&i| y[i] == 1 && p[i] == 1).count();
            hits as f64 / y.iter().filter(|&&l| l == 1).count() as f64
        };
        let plain = train_probe(ProbeKind::Logreg, x.view(), &y, 2, None, &cfg).unwrap();
        let weighted = train_probe(ProbeKind::Logreg, x.view(), &y, 2, Some(&w), &cfg).unwrap();
        assert!(recall(&weighted) > recall(&plain));
    }

    #[test]
    fn standardizer_uses_training_rows_only() {
        let (x, y) = blobs(50, 2, 3.0, 1);
        let m = train_probe(
            ProbeKind::Logreg,
            x.view(),
            &y,
            2,
            None,
            &ProbeConfig::default(),
        )
        .unwrap();
        let expected = Standardizer::fit(x.view());
        assert_eq!(m.standardizer, expected);
        // an extreme unseen row is scored but leaves the statistics alone
        let canary = ndarray::array![[1e9, -1e9]];
        predict(&m, canary.view()).unwrap();
        assert_eq!(m.standardizer, expected);
    }
}
