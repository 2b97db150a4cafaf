//! The single-step subcommands: features, embed, probe, project.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use graphprobe::features::{self, FeatureTable};
use graphprobe::graph::{load_edge_list, Loaded};
use graphprobe::probe::{log_bin_labels, run_probe_experiment, ProbeExperimentConfig, ProbeReport};
use graphprobe::projection::{
    export_projection, silhouette, stratified_subsample, tsne_embedding, write_projection_csv,
    Projection2D, TsneConfig, MAX_POINTS,
};
use graphprobe::{sdne, skipgram, Embedding, Error, Feature, Graph, MethodTag, Result};
use serde::Serialize;
use serde_json::json;

use crate::config::{EmbedSettings, MethodOverrides};
use crate::stamp::{file_sha256, Stamp};

pub fn load_graph(path: &Path) -> Result<Loaded> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    load_edge_list(BufReader::new(f)).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes through `f` and flushes, mapping I/O failures to `path`.
pub fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)
        .and_then(|()| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_embedding(path: &Path) -> Result<Embedding> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Embedding::read(BufReader::new(f))
}

pub fn read_features(path: &Path) -> Result<FeatureTable> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    FeatureTable::read_csv(BufReader::new(f))
}

pub fn compute_features(graph_path: &Path, out: &Path) -> Result<FeatureTable> {
    let loaded = load_graph(graph_path)?;
    let table = features::compute_all(&loaded.graph)?;
    write_file(out, |w| table.write_csv(w))?;
    let it = features::Iteration::default();
    Stamp::new(
        "features",
        json!({
            "dataset": graph_path,
            "dataset_sha256": file_sha256(graph_path)?,
            "damping": features::DEFAULT_DAMPING,
            "tol": it.tol,
            "max_iter": it.max_iter,
        }),
    )
    .with_extra(json!({ "load_report": loaded.report }))
    .write_for(out)?;
    Ok(table)
}

pub fn format_summary(table: &FeatureTable) -> String {
    let mut s = format!("{:<4} {:>14} {:>14} {:>7}\n", "", "min", "max", "zeros");
    for (f, lo, hi, zeros) in table.summary() {
        s.push_str(&format!(
            "{:<4} {lo:>14.6e} {hi:>14.6e} {zeros:>7}\n",
            f.as_str()
        ));
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct Embedded {
    #[serde(skip)]
    pub embedding: Embedding,
    pub settings: EmbedSettings,
    pub epoch_losses: serde_json::Value,
}

pub fn embed(graph: &Graph, method: MethodTag, settings: EmbedSettings) -> Result<Embedded> {
    let (embedding, epoch_losses) = match &settings {
        EmbedSettings::Walk(c) => {
            let (e, losses) = skipgram::make_method_with(method, graph, c)?;
            (e, json!(losses))
        }
        EmbedSettings::Sdne(c) => {
            let t = sdne::train(graph, c)?;
            (t.embedding, serde_json::to_value(&t.epoch_losses)?)
        }
    };
    Ok(Embedded {
        embedding,
        settings,
        epoch_losses,
    })
}

pub fn embed_config(
    method: MethodTag,
    graph_path: &Path,
    settings: &EmbedSettings,
) -> Result<serde_json::Value> {
    Ok(json!({
        "method": method,
        "dataset": graph_path,
        "dataset_sha256": file_sha256(graph_path)?,
        "settings": settings,
    }))
}

pub fn compute_embedding(
    graph_path: &Path,
    method: MethodTag,
    overrides: &MethodOverrides,
    seed: u64,
    out: &Path,
) -> Result<Embedded> {
    let settings = EmbedSettings::resolve(method, seed, overrides)?;
    let config = embed_config(method, graph_path, &settings)?;
    let loaded = load_graph(graph_path)?;
    let done = embed(&loaded.graph, method, settings)?;
    write_file(out, |w| done.embedding.write(w))?;
    Stamp::new("embedding", config)
        .with_extra(json!({ "epoch_losses": done.epoch_losses }))
        .write_for(out)?;
    Ok(done)
}

/// Method tag recorded in an embedding's sidecar, if any.
pub fn method_of(embedding_path: &Path) -> Option<String> {
    let stamp = Stamp::read_for(embedding_path)?;
    stamp.config.get("method")?.as_str().map(str::to_owned)
}

pub fn write_report(report: &ProbeReport, prefix: &Path) -> Result<()> {
    let csv = prefix.with_extension("csv");
    let json_path = prefix.with_extension("json");
    write_file(&csv, |w| report.write_csv(w))?;
    let mut w = create(&json_path)?;
    report.write_json(&mut w)?;
    writeln!(w)
        .and_then(|()| w.flush())
        .map_err(|e| Error::io(&json_path, e))
}

pub fn probe(
    embedding_path: &Path,
    features_path: &Path,
    method: Option<String>,
    cfg: &ProbeExperimentConfig,
    out_prefix: &Path,
) -> Result<ProbeReport> {
    let embedding = read_embedding(embedding_path)?;
    let table = read_features(features_path)?;
    let method = method
        .or_else(|| method_of(embedding_path))
        .or_else(|| embedding.method.map(|m| m.to_string()))
        .unwrap_or_else(|| "unknown".into());
    let stamp_cfg = json!({
        "embedding": embedding_path,
        "embedding_sha256": file_sha256(embedding_path)?,
        "features": features_path,
        "features_sha256": file_sha256(features_path)?,
        "probe": cfg,
    });
    let stamp = Stamp::new("probe_report", stamp_cfg);
    let report = run_probe_experiment(
        &method,
        &embedding,
        &table,
        cfg,
        json!({
            "code_version": stamp.code_version,
            "config_hash": stamp.config_hash,
            "deviations": deviations(),
        }),
    )?;
    write_report(&report, out_prefix)?;
    stamp.write_for(&out_prefix.with_extension("csv"))?;
    Ok(report)
}

/// Protocol choices not fixed by the method definitions, stamped into
/// every probe report.
pub fn deviations() -> Vec<&'static str> {
    vec![
        "labels: log10 bins over each feature's positive range; zeros take label 0",
        "splits and folds are stratified by label",
        "poincare_polar rows are probed as disk coordinates (r cos t, r sin t)",
        "probe optimizer: minibatch Adam with early stopping on training loss",
        "lift denominators are baseline micro-F1 on the same test split",
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionSummary {
    pub kl: f64,
    pub silhouette: f64,
    pub points: usize,
    pub label_feature: Feature,
}

/// Vertices kept for projection: all of them, or a label-stratified sample
/// of `MAX_POINTS` when the embedding is larger.
pub fn projection_subset(
    embedding: &Embedding,
    labels: &[usize],
    seed: u64,
) -> (Embedding, Vec<usize>) {
    let keep = stratified_subsample(labels, MAX_POINTS, seed);
    if keep.len() == embedding.len() {
        return (embedding.clone(), labels.to_vec());
    }
    let mut data = Vec::with_capacity(keep.len() * embedding.dim);
    for &v in &keep {
        data.extend_from_slice(embedding.row(v));
    }
    let sub = Embedding {
        labels: keep.iter().map(|&v| embedding.labels[v].clone()).collect(),
        dim: embedding.dim,
        data,
        geometry: embedding.geometry,
        method: embedding.method,
    };
    (sub, keep.iter().map(|&v| labels[v]).collect())
}

pub fn project_embedding(
    embedding: &Embedding,
    table: &FeatureTable,
    feature: Feature,
    bins: usize,
    cfg: &TsneConfig,
    out: &Path,
    stamp_config: serde_json::Value,
) -> Result<(Projection2D, ProjectionSummary)> {
    let x_order = graphprobe::probe::experiment::align(embedding, table)?;
    debug_assert_eq!(x_order.nrows(), table.len());
    // reorder embedding rows to the feature table's vertex order
    let aligned = Embedding {
        labels: table.labels.clone(),
        dim: x_order.ncols(),
        data: x_order.iter().copied().collect(),
        geometry: graphprobe::Geometry::Euclidean,
        method: embedding.method,
    };
    let lv = log_bin_labels(&table.column(feature), bins, feature.as_str())?;
    let (sub, sub_labels) = projection_subset(&aligned, &lv.labels, cfg.seed);
    let proj = tsne_embedding(&sub, cfg)?;
    let sub_lv = graphprobe::probe::LabelVector {
        labels: sub_labels,
        ..lv
    };
    let rows = export_projection(&proj, &sub_lv)?;
    let points: Vec<Vec<f64>> = proj.coords.iter().map(|c| c.to_vec()).collect();
    let sil = silhouette(&points, &sub_lv.labels).unwrap_or(f64::NAN);
    write_file(out, |w| write_projection_csv(&rows, w))?;
    let summary = ProjectionSummary {
        kl: proj.kl,
        silhouette: sil,
        points: rows.len(),
        label_feature: feature,
    };
    Stamp::new("projection", stamp_config)
        .with_extra(json!({ "summary": summary, "kl_trace": proj.kl_trace, "edges": sub_lv.edges }))
        .write_for(out)?;
    Ok((proj, summary))
}

pub fn project(
    embedding_path: &Path,
    features_path: &Path,
    feature: Feature,
    bins: usize,
    cfg: &TsneConfig,
    out: &Path,
) -> Result<ProjectionSummary> {
    let embedding = read_embedding(embedding_path)?;
    let table = read_features(features_path)?;
    let stamp_config = json!({
        "embedding": embedding_path,
        "embedding_sha256": file_sha256(embedding_path)?,
        "features": features_path,
        "label_feature": feature,
        "bins": bins,
        "tsne": cfg,
    });
    project_embedding(&embedding, &table, feature, bins, cfg, out, stamp_config).map(|(_, s)| s)
}
