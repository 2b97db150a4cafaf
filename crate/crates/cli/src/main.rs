use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use graphprobe::probe::experiment::default_fractions;
use graphprobe::probe::{ProbeConfig, ProbeExperimentConfig, ProbeKind};
use graphprobe::projection::TsneConfig;
use graphprobe::{Error, Feature, MethodTag};
use graphprobe_cli::config::{ExperimentConfig, MethodOverrides};
use graphprobe_cli::{commands, exit_code, run};

#[derive(Parser)]
#[command(
    name = "graphprobe",
    version,
    about = "Probe vertex embeddings for topological features"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the seven vertex features of an edge list.
    Features {
        graph: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Train an embedding.
    Embed {
        graph: PathBuf,
        #[arg(short, long)]
        method: MethodTag,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Hyper-parameter override, `key=value`; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Train probe classifiers on an embedding and score them.
    Probe {
        embedding: PathBuf,
        #[arg(value_name = "FEATURES_CSV")]
        table: PathBuf,
        /// Report prefix; `.csv` and `.json` are appended.
        #[arg(short, long)]
        out: PathBuf,
        /// Method name for the report; defaults to the embedding's sidecar.
        #[arg(long)]
        method: Option<String>,
        #[command(flatten)]
        probe: ProbeArgs,
    },
    /// t-SNE projection labelled by a binned feature.
    Project {
        embedding: PathBuf,
        #[arg(value_name = "FEATURES_CSV")]
        table: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value = "EC")]
        feature: Feature,
        #[arg(long, default_value_t = 6)]
        bins: usize,
        #[arg(long, default_value_t = 30.0)]
        perplexity: f64,
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a full experiment described by a TOML config.
    Run { config: PathBuf },
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long, value_delimiter = ',', default_value = "DG,DC,TC,CLU,EC,PR,BC")]
    features: Vec<Feature>,
    #[arg(long, default_value_t = 6)]
    bins: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Skip k-fold cross-validation.
    #[arg(long)]
    no_kfold: bool,
    /// Labelled fractions to sweep; pass `none` to skip the sweep.
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<String>>,
    #[arg(long, default_value = "mlp1")]
    probe: ProbeKind,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    /// Weight samples by inverse class frequency.
    #[arg(long)]
    weighted: bool,
}

impl ProbeArgs {
    fn config(self) -> Result<ProbeExperimentConfig, Error> {
        let fractions = match self.fractions {
            None => default_fractions(),
            Some(v) if v.iter().any(|s| s == "none") => Vec::new(),
            Some(v) => v
                .iter()
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::Config(format!("fraction {s:?} is not a number")))
                })
                .collect::<Result<_, _>>()?,
        };
        Ok(ProbeExperimentConfig {
            features: self.features,
            bins: self.bins,
            k: self.k,
            kfold: !self.no_kfold,
            fractions,
            kind: self.probe,
            seeds: self.seeds,
            weighted: self.weighted,
            probe: ProbeConfig::default(),
        })
    }
}

fn execute(cmd: Command) -> Result<ExitCode, Error> {
    match cmd {
        Command::Features { graph, out } => {
            let table = commands::compute_features(&graph, &out)?;
            print!("{}", commands::format_summary(&table));
        }
        Command::Embed {
            graph,
            method,
            out,
            seed,
            overrides,
        } => {
            let ov = MethodOverrides::from_pairs(&overrides)?;
            let done = commands::compute_embedding(&graph, method, &ov, seed, &out)?;
            println!(
                "{method}: {} vertices, d = {} -> {}",
                done.embedding.len(),
                done.embedding.dim,
                out.display()
            );
        }
        Command::Probe {
            embedding,
            table,
            out,
            method,
            probe,
        } => {
            let report = commands::probe(&embedding, &table, method, &probe.config()?, &out)?;
            for s in &report.summary {
                println!(
                    "{} {} {:<10} micro {:.3}±{:.3} macro {:.3}±{:.3} lift(freq) {:+.1}%",
                    s.method,
                    s.feature,
                    s.scheme.csv_fraction(),
                    s.micro_f1.mean,
                    s.micro_f1.std,
                    s.macro_f1.mean,
                    s.macro_f1.std,
                    s.lift_freq.mean
                );
            }
        }
        Command::Project {
            embedding,
            table,
            out,
            feature,
            bins,
            perplexity,
            iterations,
            seed,
        } => {
            let cfg = TsneConfig {
                perplexity,
                iterations,
                seed,
                ..TsneConfig::default()
            };
            let s = commands::project(&embedding, &table, feature, bins, &cfg, &out)?;
            println!(
                "{} points, KL {:.4}, silhouette by {} label {:.4}",
                s.points, s.kl, s.label_feature, s.silhouette
            );
        }
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let outcome = run::cmd_run(&cfg)?;
            let c = &outcome.counts;
            println!(
                "{} executed, {} skipped, {} failed; manifest {}",
                c.executed,
                c.skipped,
                c.failed,
                outcome.manifest_path.display()
            );
            for cell in outcome.manifest.cells.iter().filter(|c| c.error.is_some()) {
                eprintln!(
                    "failed {} {}: {}",
                    cell.method,
                    cell.feature,
                    cell.error.as_deref().unwrap_or("")
                );
            }
            if outcome.manifest.failures() > 0 {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        super::Cli::command().debug_assert();
    }
}
