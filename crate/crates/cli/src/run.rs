//! The resumable factorial pipeline behind `graphprobe run`.
//!
//! Output tree under the configured directory:
//!
//! ```text
//! features.csv                     + .meta.json
//! embeddings/<method>.emb          + .meta.json
//! reports/<method>_<feature>.csv   + .meta.json, and .json
//! projections/<method>.csv         + .meta.json   (when project = true)
//! manifest.json
//! ```
//!
//! A cell is skipped when its report exists and the sidecar's hash equals
//! the hash of the cell's effective configuration.

use std::path::{Path, PathBuf};

use graphprobe::features::FeatureTable;
use graphprobe::probe::{run_probe_experiment, ProbeExperimentConfig};
use graphprobe::projection::TsneConfig;
use graphprobe::{Embedding, Error, Feature, MethodTag, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::commands::{
    compute_features, deviations, embed, embed_config, load_graph, project_embedding,
    read_embedding, read_features, write_file, write_report,
};
use crate::config::{EmbedSettings, ExperimentConfig};
use crate::stamp::{config_hash, file_sha256, Stamp, CODE_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub method: MethodTag,
    pub feature: Feature,
    pub hash: String,
    pub status: CellStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub report_csv: PathBuf,
    pub report_json: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRecord {
    pub method: MethodTag,
    pub status: CellStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub csv: PathBuf,
    pub silhouette: Option<f64>,
    pub kl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub dataset_sha256: String,
    pub features: PathBuf,
    pub embeddings: Vec<PathBuf>,
    pub cells: Vec<CellRecord>,
    pub projections: Vec<ProjectionRecord>,
}

impl Manifest {
    pub fn failures(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| c.status == CellStatus::Failed)
            .count()
            + self
                .projections
                .iter()
                .filter(|p| p.status == CellStatus::Failed)
                .count()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunCounts {
    pub executed: usize,
    pub skipped: usize,
    pub failed: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
    pub counts: RunCounts,
}

/// Reuses `artifact` when its sidecar hash equals `hash`.
fn is_current(artifact: &Path, hash: &str) -> bool {
    Stamp::read_for(artifact).is_some_and(|s| s.config_hash == hash)
}

struct MethodCells<'a> {
    method: MethodTag,
    embed_path: PathBuf,
    embed_cfg: serde_json::Value,
    cells: Vec<(Feature, String, ProbeExperimentConfig)>,
    cfg: &'a ExperimentConfig,
}

fn probe_config_for(cfg: &ExperimentConfig, feature: Feature) -> ProbeExperimentConfig {
    ProbeExperimentConfig {
        features: vec![feature],
        ..cfg.probe_config()
    }
}

pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let workers = cfg.experiment.workers;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(cfg))
}

fn run_inner(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let e = &cfg.experiment;
    let out = &e.output;
    std::fs::create_dir_all(out).map_err(|err| Error::io(out, err))?;
    let dataset_sha256 = file_sha256(&e.dataset)?;
    let mut counts = RunCounts::default();

    // features are shared by every cell
    let features_rel = PathBuf::from("features.csv");
    let features_path = out.join(&features_rel);
    let it = graphprobe::features::Iteration::default();
    let features_cfg = json!({
        "dataset": e.dataset,
        "dataset_sha256": dataset_sha256,
        "damping": graphprobe::features::DEFAULT_DAMPING,
        "tol": it.tol,
        "max_iter": it.max_iter,
    });
    let table: std::result::Result<FeatureTable, String> =
        if is_current(&features_path, &config_hash(&features_cfg)) {
            read_features(&features_path).map_err(|err| err.to_string())
        } else {
            compute_features(&e.dataset, &features_path).map_err(|err| match err {
                Error::Io { .. } | Error::Parse { .. } => err.to_string(),
                other => format!("feature computation failed: {other}"),
            })
        };
    let loaded = load_graph(&e.dataset)?;

    let mut cells = Vec::new();
    let mut projections = Vec::new();
    let mut embeddings = Vec::new();
    for &method in &e.methods {
        let settings =
            EmbedSettings::resolve(method, cfg.embed_seed(method), &cfg.overrides_for(method))?;
        let embed_cfg = embed_config(method, &e.dataset, &settings)?;
        let embed_rel = PathBuf::from("embeddings").join(format!("{method}.emb"));
        embeddings.push(embed_rel.clone());
        let group = MethodCells {
            method,
            embed_path: out.join(&embed_rel),
            cells: e
                .features
                .iter()
                .map(|&f| {
                    let pc = probe_config_for(cfg, f);
                    let hash = config_hash(&json!({ "embedding": embed_cfg, "probe": pc }));
                    (f, hash, pc)
                })
                .collect(),
            embed_cfg,
            cfg,
        };

        let mut embedding: Option<std::result::Result<Embedding, String>> = None;
        let mut get_embedding = |group: &MethodCells| -> std::result::Result<Embedding, String> {
            embedding
                .get_or_insert_with(|| load_or_train(group, &loaded.graph, settings.clone()))
                .clone()
        };

        for (feature, hash, pc) in &group.cells {
            let stem = PathBuf::from("reports").join(format!("{method}_{feature}"));
            let csv_rel = stem.with_extension("csv");
            let json_rel = stem.with_extension("json");
            let mut record = CellRecord {
                method,
                feature: *feature,
                hash: hash.clone(),
                status: CellStatus::Ok,
                error: None,
                report_csv: csv_rel.clone(),
                report_json: json_rel.clone(),
            };
            if is_current(&out.join(&csv_rel), hash) && out.join(&json_rel).exists() {
                counts.skipped += 1;
                cells.push(record);
                continue;
            }
            let result = table.as_ref().map_err(Clone::clone).and_then(|t| {
                let emb = get_embedding(&group)?;
                run_cell(&group, &emb, t, pc, hash, &out.join(&stem)).map_err(|err| err.to_string())
            });
            match result {
                Ok(()) => counts.executed += 1,
                Err(msg) => {
                    counts.failed += 1;
                    record.status = CellStatus::Failed;
                    record.error = Some(msg);
                }
            }
            cells.push(record);
        }

        if e.project {
            let csv_rel = PathBuf::from("projections").join(format!("{method}.csv"));
            let tsne = TsneConfig {
                seed: cfg.embed_seed(method),
                ..TsneConfig::default()
            };
            let stamp_cfg = json!({
                "embedding": group.embed_cfg,
                "label_feature": e.project_feature,
                "bins": e.bins,
                "tsne": tsne,
            });
            let path = out.join(&csv_rel);
            let mut record = ProjectionRecord {
                method,
                status: CellStatus::Ok,
                error: None,
                csv: csv_rel,
                silhouette: None,
                kl: None,
            };
            let cached =
                Stamp::read_for(&path).filter(|s| s.config_hash == config_hash(&stamp_cfg));
            let was_cached = cached.is_some();
            let result = match cached {
                Some(stamp) => {
                    counts.skipped += 1;
                    Ok((
                        stamp.extra["summary"]["silhouette"].as_f64(),
                        stamp.extra["summary"]["kl"].as_f64(),
                    ))
                }
                None => table.as_ref().map_err(Clone::clone).and_then(|t| {
                    let emb = get_embedding(&group)?;
                    project_embedding(&emb, t, e.project_feature, e.bins, &tsne, &path, stamp_cfg)
                        .map(|(_, s)| (Some(s.silhouette), Some(s.kl)))
                        .map_err(|err| err.to_string())
                }),
            };
            match result {
                Ok((sil, kl)) => {
                    counts.executed += usize::from(!was_cached);
                    record.silhouette = sil;
                    record.kl = kl;
                }
                Err(msg) => {
                    counts.failed += 1;
                    record.status = CellStatus::Failed;
                    record.error = Some(msg);
                }
            }
            projections.push(record);
        }
    }

    let manifest = Manifest {
        code_version: CODE_VERSION.to_owned(),
        config_hash: config_hash(&serde_json::to_value(cfg)?),
        config: cfg.clone(),
        dataset_sha256,
        features: features_rel,
        embeddings,
        cells,
        projections,
    };
    let manifest_path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    write_file(&manifest_path, |w| {
        std::io::Write::write_all(w, text.as_bytes())
    })?;
    Ok(RunOutcome {
        manifest,
        manifest_path,
        counts,
    })
}

fn load_or_train(
    group: &MethodCells,
    graph: &graphprobe::Graph,
    settings: EmbedSettings,
) -> std::result::Result<Embedding, String> {
    let hash = config_hash(&group.embed_cfg);
    if is_current(&group.embed_path, &hash) {
        if let Ok(e) = read_embedding(&group.embed_path) {
            return Ok(e);
        }
    }
    let done =
        embed(graph, group.method, settings).map_err(|e| format!("embedding failed: {e}"))?;
    write_file(&group.embed_path, |w| done.embedding.write(w)).map_err(|e| e.to_string())?;
    Stamp::new("embedding", group.embed_cfg.clone())
        .with_extra(json!({ "epoch_losses": done.epoch_losses }))
        .write_for(&group.embed_path)
        .map_err(|e| e.to_string())?;
    Ok(done.embedding)
}

fn run_cell(
    group: &MethodCells,
    embedding: &Embedding,
    table: &FeatureTable,
    pc: &ProbeExperimentConfig,
    hash: &str,
    stem: &Path,
) -> Result<()> {
    let report = run_probe_experiment(
        group.method.as_str(),
        embedding,
        table,
        pc,
        json!({
            "code_version": CODE_VERSION,
            "cell_hash": hash,
            "run_config_hash": config_hash(&serde_json::to_value(group.cfg)?),
            "embedding": group.embed_cfg,
            "deviations": deviations(),
        }),
    )?;
    write_report(&report, stem)?;
    let stamp_cfg = json!({ "embedding": group.embed_cfg, "probe": pc });
    let stamp = Stamp::new("probe_report", stamp_cfg);
    debug_assert_eq!(stamp.config_hash, hash);
    stamp.write_for(&stem.with_extension("csv"))
}
