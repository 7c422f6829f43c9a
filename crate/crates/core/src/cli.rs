//! Command-line interface. [`run`] parses arguments, executes a subcommand
//! and returns the files it wrote.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::data::{generate_synthetic, write_periodized_csv, SyntheticConfig};
use crate::error::{Error, Result};
use crate::learners::{default_hyperparams, search_spaces_document, LearnerKind};
use crate::pipeline::{
    emit_reports, generate_model_pool, load_dataset, run_rq1, run_rq2, run_rq3, ExperimentConfig, Manifest,
    ReportBundle, Table,
};
use crate::training::{train_model, ScaledModel, SeedPolicy};

#[derive(Debug, Parser)]
#[command(
    name = "interp-consistency",
    version,
    about = "Consistency of permutation-importance interpretations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Internal consistency under controlled randomness.
    Rq1(Common),
    /// External consistency across performance clusters.
    Rq2(Common),
    /// Time consistency of model-update strategies.
    Rq3(Common),
    /// Within-cluster sum of squares for k = 1..elbow_max_k per period.
    Elbow(Common),
    /// Fit one model on one period and score it on the next.
    Train(TrainArgs),
    /// Permutation importance of a saved model on one period.
    Interpret(InterpretArgs),
    /// Write the hyperparameter defaults and search spaces.
    Spaces(Common),
    /// Write a synthetic periodized dataset as CSV.
    Synth(SynthArgs),
}

/// Flags shared by every runner. Flags override config-file values.
#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub master_seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Comma-separated learner names.
    #[arg(long, value_delimiter = ',')]
    pub learners: Option<Vec<LearnerKind>>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub k_clusters: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub learner: LearnerKind,
    /// Training period; the model is scored on the next one.
    #[arg(long)]
    pub period: usize,
    /// Use randomized search instead of default hyperparameters.
    #[arg(long)]
    pub search: bool,
}

#[derive(Debug, Clone, Args)]
pub struct InterpretArgs {
    #[command(flatten)]
    pub common: Common,
    /// A `model.json` written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub period: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    pub periods: usize,
    #[arg(long, default_value_t = 2000)]
    pub rows: usize,
    #[arg(long, default_value_t = 10)]
    pub features: usize,
    #[arg(long, default_value_t = 4)]
    pub informative: usize,
    #[arg(long, default_value_t = 0.09)]
    pub positive_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    pub drift: f64,
    #[arg(long, default_value_t = 0.0)]
    pub nonlinearity: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl Common {
    pub fn resolve_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                if !path.exists() {
                    return Err(Error::Config(format!("config file not found: {}", path.display())));
                }
                ExperimentConfig::from_file(path)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.master_seed {
            cfg.master_seed = s;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(l) = &self.learners {
            cfg.learners = l.clone();
        }
        if let Some(i) = self.iterations {
            cfg.iterations = i;
        }
        if let Some(k) = self.k_clusters {
            cfg.k_clusters = k;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = self.jobs {
            if j == 0 {
                return Err(Error::InvalidArgument("--jobs must be >= 1".into()));
            }
            b = b.num_threads(j);
        }
        b.build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))
    }
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I) -> Result<Vec<PathBuf>>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    execute(cli)
}

pub fn execute(cli: Cli) -> Result<Vec<PathBuf>> {
    let written = match cli.command {
        Command::Rq1(c) => runner(&c, "rq1", |cfg| {
            let ds = load_dataset(cfg)?;
            Ok(run_rq1(cfg, &ds)?.to_bundle(cfg))
        })?,
        Command::Rq2(c) => runner(&c, "rq2", |cfg| {
            let ds = load_dataset(cfg)?;
            Ok(run_rq2(cfg, &ds)?.to_bundle(cfg))
        })?,
        Command::Rq3(c) => runner(&c, "rq3", |cfg| {
            let ds = load_dataset(cfg)?;
            Ok(run_rq3(cfg, &ds)?.to_bundle())
        })?,
        Command::Elbow(c) => runner(&c, "elbow", |cfg| {
            let ds = load_dataset(cfg)?;
            let pools = generate_model_pool(cfg, &ds)?;
            let mut t = Table::new("elbow.csv", &["train_period", "k", "wss"]);
            for p in &pools {
                let aucs = p.aucs();
                for (k, w) in crate::breaks::elbow_scan(&aucs, cfg.elbow_max_k.min(aucs.len()))? {
                    t.push(vec![p.train_period.to_string(), k.to_string(), format!("{w}")]);
                }
            }
            Ok(ReportBundle {
                tables: vec![t],
                documents: Vec::new(),
            })
        })?,
        Command::Spaces(c) => runner(&c, "spaces", |_| {
            let defaults: serde_json::Map<String, serde_json::Value> = LearnerKind::ALL
                .iter()
                .map(|&k| {
                    (
                        k.name().to_string(),
                        serde_json::to_value(default_hyperparams(k)).unwrap_or_default(),
                    )
                })
                .collect();
            let doc = serde_json::json!({
                "defaults_version": crate::learners::DEFAULTS_VERSION,
                "defaults": defaults,
                "search": search_spaces_document(),
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
            Ok(ReportBundle {
                tables: Vec::new(),
                documents: vec![("search_spaces.json".into(), doc)],
            })
        })?,
        Command::Train(a) => train(&a)?,
        Command::Interpret(a) => interpret(&a)?,
        Command::Synth(a) => synth(&a)?,
    };
    ensure_non_empty(&written)?;
    Ok(written)
}

fn runner<F>(common: &Common, name: &str, body: F) -> Result<Vec<PathBuf>>
where
    F: FnOnce(&ExperimentConfig) -> Result<ReportBundle> + Send,
{
    let cfg = common.resolve_config()?;
    let bundle = common.pool()?.install(|| body(&cfg))?;
    emit_reports(&bundle, Manifest::new(name, &cfg), &cfg.output_dir)
}

fn train(args: &TrainArgs) -> Result<Vec<PathBuf>> {
    let cfg = args.common.resolve_config()?;
    let ds = load_dataset(&cfg)?;
    let next = args.period + 1;
    if next >= ds.n_periods() {
        return Err(Error::InvalidArgument(format!(
            "--period must leave a following period; dataset has {}",
            ds.n_periods()
        )));
    }
    let policy = if args.search {
        SeedPolicy::controlled_experiment(2, crate::seed!(cfg.master_seed, "train", "learner"))
            .expect("known experiment")
    } else {
        SeedPolicy::controlled_experiment(4, crate::seed!(cfg.master_seed, "train", "learner"))
            .expect("known experiment")
    };
    let seeds = policy.resolve(crate::seed!(cfg.master_seed, "train", args.period));
    let (model, eval) = args.common.pool()?.install(|| -> Result<_> {
        let model = train_model(
            args.learner,
            &ds.periods[args.period],
            &seeds,
            cfg.downsample_seed(args.period),
            &cfg.train_options(),
        )?;
        let eval = crate::pipeline::evaluate(|x| model.predict_proba(x), &ds.periods[next], &cfg)?;
        Ok((model, eval))
    })?;
    let mut t = Table::new("train_summary.csv", &["learner", "train_period", "test_period", "auc"]);
    t.push(vec![
        args.learner.name().to_string(),
        args.period.to_string(),
        next.to_string(),
        format!("{}", eval.auc),
    ]);
    let bundle = ReportBundle {
        tables: vec![t, importance_table(&ds.feature_names, &eval)],
        documents: vec![("model.json".into(), serde_json::to_value(&model)?)],
    };
    emit_reports(&bundle, Manifest::new("train", &cfg), &cfg.output_dir)
}

fn importance_table(names: &[String], eval: &crate::pipeline::Evaluation) -> Table {
    let mut t = Table::new("importance.csv", &["feature", "importance", "rank"]);
    for (j, name) in names.iter().enumerate() {
        t.push(vec![
            name.clone(),
            format!("{}", eval.scores.values[j]),
            format!("{}", eval.ranking.0[j]),
        ]);
    }
    t
}

fn interpret(args: &InterpretArgs) -> Result<Vec<PathBuf>> {
    let cfg = args.common.resolve_config()?;
    let ds = load_dataset(&cfg)?;
    let text = fs::read_to_string(&args.model).map_err(|e| Error::io(&args.model, e))?;
    let model: ScaledModel = serde_json::from_str(&text)?;
    let period = ds.period(args.period)?;
    let eval = args
        .common
        .pool()?
        .install(|| crate::pipeline::evaluate(|x| model.predict_proba(x), period, &cfg))?;
    let mut t = Table::new("interpret_summary.csv", &["learner", "period", "auc"]);
    t.push(vec![
        model.kind().name().to_string(),
        args.period.to_string(),
        format!("{}", eval.auc),
    ]);
    let bundle = ReportBundle {
        tables: vec![t, importance_table(&ds.feature_names, &eval)],
        documents: Vec::new(),
    };
    emit_reports(&bundle, Manifest::new("interpret", &cfg), &cfg.output_dir)
}

fn synth(args: &SynthArgs) -> Result<Vec<PathBuf>> {
    let config = SyntheticConfig {
        periods: args.periods,
        rows: args.rows,
        features: args.features,
        informative: args.informative,
        positive_rate: args.positive_rate,
        drift: args.drift,
        nonlinearity: args.nonlinearity,
        coefficients: None,
    };
    let ds = generate_synthetic(&config, args.seed)?;
    let dir = args.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join("synthetic.csv");
    write_periodized_csv(&ds, &path, "label", "period")?;
    Ok(vec![path])
}

fn ensure_non_empty(paths: &[PathBuf]) -> Result<()> {
    for p in paths {
        let len = fs::metadata(p).map_err(|e| Error::io(p, e))?.len();
        if len == 0 {
            return Err(Error::io(
                p,
                std::io::Error::new(std::io::ErrorKind::InvalidData, "report file is empty"),
            ));
        }
    }
    Ok(())
}
