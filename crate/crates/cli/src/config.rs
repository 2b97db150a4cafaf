//! Experiment configuration files and per-method hyper-parameter overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use graphprobe::probe::experiment::default_fractions;
use graphprobe::probe::{ProbeConfig, ProbeExperimentConfig, ProbeKind};
use graphprobe::sdne::SdneConfig;
use graphprobe::skipgram::{TrainingMode, WalkMethodConfig};
use graphprobe::walks::WalkStrategy;
use graphprobe::{seed, Error, Feature, MethodTag, Result};
use serde::{Deserialize, Serialize};

/// Everything `run` needs; read from TOML with unknown keys rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Keyed by method tag.
    #[serde(default)]
    pub overrides: BTreeMap<String, MethodOverrides>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub dataset: PathBuf,
    pub output: PathBuf,
    pub methods: Vec<MethodTag>,
    pub features: Vec<Feature>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_true")]
    pub kfold: bool,
    #[serde(default = "default_probe")]
    pub probe: ProbeKind,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub weighted: bool,
    /// Root of every embedding seed.
    #[serde(default)]
    pub root_seed: u64,
    /// Worker threads; 0 lets the pool pick.
    #[serde(default)]
    pub workers: usize,
    /// Also write a t-SNE projection per method.
    #[serde(default)]
    pub project: bool,
    /// Feature whose bins label the projected points.
    #[serde(default = "default_project_feature")]
    pub project_feature: Feature,
}

fn default_bins() -> usize {
    6
}
fn default_k() -> usize {
    5
}
fn default_true() -> bool {
    true
}
fn default_probe() -> ProbeKind {
    ProbeKind::Mlp1
}
fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}
fn default_project_feature() -> Feature {
    Feature::EC
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        // relative paths resolve against the config file's directory
        if let Some(dir) = path.parent() {
            if cfg.experiment.dataset.is_relative() {
                cfg.experiment.dataset = dir.join(&cfg.experiment.dataset);
            }
            if cfg.experiment.output.is_relative() {
                cfg.experiment.output = dir.join(&cfg.experiment.output);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.methods.is_empty() {
            return Err(Error::Config("methods is empty".into()));
        }
        if e.features.is_empty() {
            return Err(Error::Config("features is empty".into()));
        }
        if e.seeds.is_empty() {
            return Err(Error::Config("seeds is empty".into()));
        }
        self.probe_config()
            .validate()
            .map_err(|err| Error::Config(err.to_string()))?;
        for (tag, ov) in &self.overrides {
            let method: MethodTag = tag.parse()?;
            EmbedSettings::resolve(method, 0, ov)?;
        }
        Ok(())
    }

    pub fn overrides_for(&self, method: MethodTag) -> MethodOverrides {
        self.overrides
            .get(method.as_str())
            .cloned()
            .unwrap_or_default()
    }

    pub fn embed_seed(&self, method: MethodTag) -> u64 {
        seed::derive(
            self.experiment.root_seed,
            &[seed::tag("embed"), seed::tag(method.as_str())],
        )
    }

    pub fn probe_config(&self) -> ProbeExperimentConfig {
        let e = &self.experiment;
        ProbeExperimentConfig {
            features: e.features.clone(),
            bins: e.bins,
            k: e.k,
            kfold: e.kfold,
            fractions: e.fractions.clone(),
            kind: e.probe,
            seeds: e.seeds.clone(),
            weighted: e.weighted,
            probe: ProbeConfig::default(),
        }
    }
}

/// Optional replacements for a method's default hyper-parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodOverrides {
    pub dim: Option<usize>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    // random-walk methods
    pub negatives: Option<usize>,
    pub window: Option<usize>,
    pub walks_per_vertex: Option<usize>,
    pub walk_length: Option<usize>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub mode: Option<TrainingMode>,
    pub workers: Option<usize>,
    // sdne
    pub hidden: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub batch: Option<usize>,
}

impl MethodOverrides {
    /// Parses `key=value` pairs; values use TOML syntax.
    pub fn from_pairs<S: AsRef<str>>(pairs: &[S]) -> Result<Self> {
        let mut doc = String::new();
        for pair in pairs {
            let pair = pair.as_ref();
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {pair:?} is not key=value")))?;
            let v = v.trim();
            let value = if v.parse::<f64>().is_ok() || v == "true" || v == "false" {
                v.to_owned()
            } else {
                format!("{v:?}")
            };
            doc.push_str(&format!("{} = {value}\n", k.trim()));
        }
        toml::from_str(&doc).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Fully resolved embedding hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum EmbedSettings {
    Walk(WalkMethodConfig),
    Sdne(SdneConfig),
}

impl EmbedSettings {
    pub fn resolve(method: MethodTag, seed: u64, ov: &MethodOverrides) -> Result<Self> {
        let reject = |keys: &[(&str, bool)]| -> Result<()> {
            match keys.iter().find(|(_, set)| *set) {
                Some((k, _)) => Err(Error::Config(format!("{k} does not apply to {method}"))),
                None => Ok(()),
            }
        };
        if method == MethodTag::Sdne {
            reject(&[
                ("negatives", ov.negatives.is_some()),
                ("window", ov.window.is_some()),
                ("walks_per_vertex", ov.walks_per_vertex.is_some()),
                ("walk_length", ov.walk_length.is_some()),
                ("p", ov.p.is_some()),
                ("q", ov.q.is_some()),
                ("mode", ov.mode.is_some()),
                ("workers", ov.workers.is_some()),
            ])?;
            let d = SdneConfig::default();
            return Ok(EmbedSettings::Sdne(SdneConfig {
                hidden: ov.hidden.unwrap_or(d.hidden),
                dim: ov.dim.unwrap_or(d.dim),
                alpha: ov.alpha.unwrap_or(d.alpha),
                beta: ov.beta.unwrap_or(d.beta),
                lr: ov.lr.unwrap_or(d.lr),
                epochs: ov.epochs.unwrap_or(d.epochs),
                batch: ov.batch.unwrap_or(d.batch),
                seed,
            }));
        }

        reject(&[
            ("hidden", ov.hidden.is_some()),
            ("alpha", ov.alpha.is_some()),
            ("beta", ov.beta.is_some()),
            ("batch", ov.batch.is_some()),
        ])?;
        let mut c = WalkMethodConfig::for_method(method)?;
        match (&mut c.strategy, ov.p, ov.q) {
            (WalkStrategy::Uniform, None, None) => {}
            (WalkStrategy::Uniform, ..) => {
                return Err(Error::Config(format!("p and q do not apply to {method}")))
            }
            (WalkStrategy::Biased { p, q }, op, oq) => {
                *p = op.unwrap_or(*p);
                *q = oq.unwrap_or(*q);
            }
        }
        if method == MethodTag::Poincare && ov.dim.is_some_and(|d| d != 2) {
            return Err(Error::Config(
                "poincare embeddings are 2-dimensional".into(),
            ));
        }
        c.walks_per_vertex = ov.walks_per_vertex.unwrap_or(c.walks_per_vertex);
        c.walk_length = ov.walk_length.unwrap_or(c.walk_length);
        let t = &mut c.train;
        t.dim = ov.dim.unwrap_or(t.dim);
        t.lr = ov.lr.unwrap_or(t.lr);
        t.epochs = ov.epochs.unwrap_or(t.epochs);
        t.negatives = ov.negatives.unwrap_or(t.negatives);
        t.window = ov.window.unwrap_or(t.window);
        t.mode = ov.mode.unwrap_or(t.mode);
        t.workers = ov.workers.unwrap_or(t.workers);
        t.seed = seed;
        Ok(EmbedSettings::Walk(c))
    }
}
