//! The factorial probe experiment: features × split schemes × folds × seeds.

use std::collections::HashMap;
use std::io::Write;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baseline::{baseline_predict, BaselineKind};
use super::classifier::{class_weights, predict, train_probe, ProbeConfig, ProbeKind};
use super::labels::{log_bin_labels, LabelVector, DEFAULT_BINS};
use super::metrics::{confusion_matrix, macro_f1, micro_f1};
use super::split::{kfold_splits, split_labelled_fraction};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::features::{Feature, FeatureTable};
use crate::seed;

pub const CSV_HEADER: &str = "method,feature,fraction,fold,seed,micro_f1,macro_f1,\
base_uniform,base_strat,base_freq,lift_uniform,lift_strat,lift_freq";

pub fn default_fractions() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeExperimentConfig {
    pub features: Vec<Feature>,
    pub bins: usize,
    /// Fold count for cross-validation, and the number of repeated
    /// stratified splits at each labelled fraction.
    pub k: usize,
    pub kfold: bool,
    pub fractions: Vec<f64>,
    pub kind: ProbeKind,
    pub seeds: Vec<u64>,
    /// Scale each sample's loss by its inverse class frequency.
    pub weighted: bool,
    pub probe: ProbeConfig,
}

impl Default for ProbeExperimentConfig {
    fn default() -> Self {
        ProbeExperimentConfig {
            features: Feature::ALL.to_vec(),
            bins: DEFAULT_BINS,
            k: 5,
            kfold: true,
            fractions: default_fractions(),
            kind: ProbeKind::Mlp1,
            seeds: (0..5).collect(),
            weighted: false,
            probe: ProbeConfig::default(),
        }
    }
}

impl ProbeExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::InvalidParameter("no features selected".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("no seeds given".into()));
        }
        if !self.kfold && self.fractions.is_empty() {
            return Err(Error::InvalidParameter(
                "neither k-fold nor any labelled fraction selected".into(),
            ));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "fraction {f} outside (0, 1)"
            )));
        }
        if self.k < 2 {
            return Err(Error::InvalidParameter(format!(
                "k must be at least 2, got {}",
                self.k
            )));
        }
        if self.bins == 0 {
            return Err(Error::InvalidParameter("bin count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum SplitScheme {
    KFold { k: usize },
    Fraction { fraction: f64 },
}

impl SplitScheme {
    /// Share of vertices labelled at training time.
    pub fn fraction(self) -> f64 {
        match self {
            SplitScheme::KFold { k } => (k - 1) as f64 / k as f64,
            SplitScheme::Fraction { fraction } => fraction,
        }
    }

    /// CSV rendering: cross-validation rows read `kfold` so they never
    /// collide with a sweep fraction of the same value.
    pub fn csv_fraction(self) -> String {
        match self {
            SplitScheme::KFold { .. } => "kfold".into(),
            SplitScheme::Fraction { fraction } => fraction.to_string(),
        }
    }

    fn seed_tag(self) -> u64 {
        match self {
            SplitScheme::KFold { k } => seed::derive(seed::tag("kfold"), &[k as u64]),
            SplitScheme::Fraction { fraction } => {
                seed::derive(seed::tag("fraction"), &[fraction.to_bits()])
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub micro_f1: f64,
    pub macro_f1: f64,
}

/// `(score − baseline) / baseline` in percent; NaN when the baseline is 0.
pub fn lift(score: f64, baseline: f64) -> f64 {
    if baseline == 0.0 {
        f64::NAN
    } else {
        (score - baseline) / baseline * 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub method: String,
    pub feature: Feature,
    #[serde(flatten)]
    pub scheme: SplitScheme,
    pub fold: usize,
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub base_uniform: Scores,
    pub base_strat: Scores,
    pub base_freq: Scores,
    pub lift_uniform: f64,
    pub lift_strat: f64,
    pub lift_freq: f64,
    pub confusion: Vec<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population standard deviation; NaN entries are skipped.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return MeanStd {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: String,
    pub feature: Feature,
    #[serde(flatten)]
    pub scheme: SplitScheme,
    pub runs: usize,
    pub micro_f1: MeanStd,
    pub macro_f1: MeanStd,
    pub base_uniform_micro: MeanStd,
    pub base_strat_micro: MeanStd,
    pub base_freq_micro: MeanStd,
    pub base_uniform_macro: MeanStd,
    pub base_strat_macro: MeanStd,
    pub base_freq_macro: MeanStd,
    pub lift_uniform: MeanStd,
    pub lift_strat: MeanStd,
    pub lift_freq: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub method: String,
    pub config: ProbeExperimentConfig,
    pub labels: Vec<LabelVector>,
    pub rows: Vec<ProbeRow>,
    pub summary: Vec<CellSummary>,
    pub metadata: serde_json::Value,
}

impl ProbeReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.method,
                r.feature,
                r.scheme.csv_fraction(),
                r.fold,
                r.seed,
                r.micro_f1,
                r.macro_f1,
                r.base_uniform.micro_f1,
                r.base_strat.micro_f1,
                r.base_freq.micro_f1,
                r.lift_uniform,
                r.lift_strat,
                r.lift_freq,
            )?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn summary_for(&self, feature: Feature, scheme: SplitScheme) -> Option<&CellSummary> {
        self.summary
            .iter()
            .find(|s| s.feature == feature && s.scheme == scheme)
    }
}

/// Embedding rows reordered to follow `table.labels`.
pub fn align(embedding: &Embedding, table: &FeatureTable) -> Result<Array2<f64>> {
    let index: HashMap<&str, usize> = embedding
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let in_table: std::collections::HashSet<&str> =
        table.labels.iter().map(String::as_str).collect();
    let mut missing: Vec<String> = table
        .labels
        .iter()
        .filter(|l| !index.contains_key(l.as_str()))
        .cloned()
        .collect();
    missing.extend(
        embedding
            .labels
            .iter()
            .filter(|l| !in_table.contains(l.as_str()))
            .cloned(),
    );
    if !missing.is_empty() {
        return Err(Error::VertexMismatch { missing });
    }
    let points = embedding.cartesian();
    let dim = points.first().map_or(0, Vec::len);
    let mut x = Array2::zeros((table.len(), dim));
    for (row, label) in x.axis_iter_mut(Axis(0)).zip(&table.labels) {
        let src = &points[index[label.as_str()]];
        row.into_iter().zip(src).for_each(|(d, s)| *d = *s);
    }
    Ok(x)
}

struct Cell {
    feature_idx: usize,
    scheme: SplitScheme,
    fold: usize,
    seed: u64,
    train: Vec<usize>,
    test: Vec<usize>,
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    method: &str,
    cell: &Cell,
    labels: &LabelVector,
    feature: Feature,
    x: &Array2<f64>,
    cfg: &ProbeExperimentConfig,
) -> Result<ProbeRow> {
    let classes = cfg.bins;
    let y = &labels.labels;
    let x_train = x.select(Axis(0), &cell.train);
    let x_test = x.select(Axis(0), &cell.test);
    let y_train: Vec<usize> = cell.train.iter().map(|&i| y[i]).collect();
    let y_test: Vec<usize> = cell.test.iter().map(|&i| y[i]).collect();
    let cell_seed = seed::derive(
        cell.seed,
        &[
            seed::tag(feature.as_str()),
            cell.scheme.seed_tag(),
            cell.fold as u64,
        ],
    );

    let weights = cfg.weighted.then(|| class_weights(&y_train, classes));
    let probe_cfg = ProbeConfig {
        seed: seed::derive(cell_seed, &[seed::tag("probe")]),
        ..cfg.probe.clone()
    };
    let model = train_probe(
        cfg.kind,
        x_train.view(),
        &y_train,
        classes,
        weights.as_deref(),
        &probe_cfg,
    )?;
    let pred = predict(&model, x_test.view())?;

    let label_set: Vec<usize> = (0..classes).collect();
    let score = |p: &[usize]| -> Result<Scores> {
        Ok(Scores {
            micro_f1: micro_f1(&y_test, p, &label_set)?,
            macro_f1: macro_f1(&y_test, p, &label_set)?,
        })
    };
    let own = score(&pred)?;
    let base = |kind: BaselineKind| -> Result<Scores> {
        let p = baseline_predict(
            kind,
            &y_train,
            y_test.len(),
            seed::derive(cell_seed, &[seed::tag("baseline")]),
        )?;
        score(&p)
    };
    let [uniform, strat, freq] = BaselineKind::ALL.map(base);
    let (uniform, strat, freq) = (uniform?, strat?, freq?);

    Ok(ProbeRow {
        method: method.to_owned(),
        feature,
        scheme: cell.scheme,
        fold: cell.fold,
        seed: cell.seed,
        train_size: cell.train.len(),
        test_size: cell.test.len(),
        micro_f1: own.micro_f1,
        macro_f1: own.macro_f1,
        lift_uniform: lift(own.micro_f1, uniform.micro_f1),
        lift_strat: lift(own.micro_f1, strat.micro_f1),
        lift_freq: lift(own.micro_f1, freq.micro_f1),
        base_uniform: uniform,
        base_strat: strat,
        base_freq: freq,
        confusion: confusion_matrix(&y_test, &pred, classes)?,
        warning: model.warning,
    })
}

fn summarize(rows: &[ProbeRow]) -> Vec<CellSummary> {
    let mut groups: Vec<(Feature, SplitScheme, Vec<&ProbeRow>)> = Vec::new();
    for r in rows {
        match groups
            .iter_mut()
            .find(|(f, s, _)| *f == r.feature && *s == r.scheme)
        {
            Some(g) => g.2.push(r),
            None => groups.push((r.feature, r.scheme, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(feature, scheme, rs)| {
            let stat = |f: &dyn Fn(&ProbeRow) -> f64| MeanStd::of(rs.iter().map(|r| f(r)));
            CellSummary {
                method: rs[0].method.clone(),
                feature,
                scheme,
                runs: rs.len(),
                micro_f1: stat(&|r| r.micro_f1),
                macro_f1: stat(&|r| r.macro_f1),
                base_uniform_micro: stat(&|r| r.base_uniform.micro_f1),
                base_strat_micro: stat(&|r| r.base_strat.micro_f1),
                base_freq_micro: stat(&|r| r.base_freq.micro_f1),
                base_uniform_macro: stat(&|r| r.base_uniform.macro_f1),
                base_strat_macro: stat(&|r| r.base_strat.macro_f1),
                base_freq_macro: stat(&|r| r.base_freq.macro_f1),
                lift_uniform: stat(&|r| r.lift_uniform),
                lift_strat: stat(&|r| r.lift_strat),
                lift_freq: stat(&|r| r.lift_freq),
            }
        })
        .collect()
}

/// Runs every configured cell. `metadata` is merged into the report's
/// metadata object, next to the seeds and probe settings.
pub fn run_probe_experiment(
    method: &str,
    embedding: &Embedding,
    table: &FeatureTable,
    cfg: &ProbeExperimentConfig,
    metadata: serde_json::Value,
) -> Result<ProbeReport> {
    cfg.validate()?;
    let x = align(embedding, table)?;
    let labels: Vec<LabelVector> = cfg
        .features
        .iter()
        .map(|&f| log_bin_labels(&table.column(f), cfg.bins, f.as_str()))
        .collect::<Result<_>>()?;

    let mut schemes = Vec::new();
    if cfg.kfold {
        schemes.push(SplitScheme::KFold { k: cfg.k });
    }
    schemes.extend(
        cfg.fractions
            .iter()
            .map(|&fraction| SplitScheme::Fraction { fraction }),
    );

    let mut cells = Vec::new();
    for (fi, lv) in labels.iter().enumerate() {
        for &scheme in &schemes {
            for &s in &cfg.seeds {
                let split_seed = seed::derive(s, &[seed::tag("split"), scheme.seed_tag()]);
                let splits = match scheme {
                    SplitScheme::KFold { k } => kfold_splits(&lv.labels, k, split_seed)?,
                    SplitScheme::Fraction { fraction } => (0..cfg.k)
                        .map(|rep| {
                            split_labelled_fraction(
                                &lv.labels,
                                fraction,
                                seed::derive(split_seed, &[rep as u64]),
                            )
                        })
                        .collect::<Result<_>>()?,
                };
                for (fold, (train, test)) in splits.into_iter().enumerate() {
                    cells.push(Cell {
                        feature_idx: fi,
                        scheme,
                        fold,
                        seed: s,
                        train,
                        test,
                    });
                }
            }
        }
    }

    let rows: Vec<ProbeRow> = cells
        .par_iter()
        .map(|c| {
            let f = cfg.features[c.feature_idx];
            run_cell(method, c, &labels[c.feature_idx], f, &x, cfg)
        })
        .collect::<Result<_>>()?;

    let mut meta = serde_json::json!({
        "seeds": cfg.seeds,
        "probe_kind": cfg.kind,
        "probe": cfg.probe,
        "weighted": cfg.weighted,
        "bins": cfg.bins,
        "k": cfg.k,
        "vertices": table.len(),
        "embedding_dim": x.ncols(),
        "embedding_geometry": embedding.geometry.to_string(),
        "warnings": rows.iter().filter(|r| r.warning.is_some()).count(),
    });
    if let (Some(m), serde_json::Value::Object(extra)) = (meta.as_object_mut(), metadata) {
        m.extend(extra);
    }

    Ok(ProbeReport {
        method: method.to_owned(),
        config: cfg.clone(),
        summary: summarize(&rows),
        labels,
        rows,
        metadata: meta,
    })
}
