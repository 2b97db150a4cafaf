//! Probe classifiers that try to recover binned vertex features from
//! embedding coordinates, scored against rule-based baselines.

pub mod baseline;
pub mod classifier;
pub mod experiment;
pub mod labels;
pub mod metrics;
pub mod split;

pub use baseline::{baseline_predict, BaselineKind};
pub use classifier::{class_weights, predict, train_probe, ProbeConfig, ProbeKind, ProbeModel};
pub use experiment::{
    lift, run_probe_experiment, ProbeExperimentConfig, ProbeReport, ProbeRow, SplitScheme,
};
pub use labels::{log_bin_labels, LabelVector};
pub use metrics::{accuracy, confusion_matrix, macro_f1, micro_f1, micro_f1_from_confusion};
pub use split::{kfold_splits, split_labelled_fraction};
