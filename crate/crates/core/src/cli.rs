//! Command-line front end.
//!
//! Every subcommand reads the same run configuration and works inside one
//! output directory:
//!
//! ```text
//! <out>/config.resolved.toml   resolved configuration
//! <out>/run_manifest.toml      command, seeds, input checksums, config echo
//! <out>/split/                 prepare
//! <out>/model/                 train
//! <out>/eval/                  evaluate
//! <out>/recommendations.csv    recommend
//! <out>/predictions.csv        predict
//! <out>/ablate_anchors.csv     ablate-anchors
//! <out>/sweep_<param>.csv      sweep
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use crate::anchors::AnchorStrategy;
use crate::config::{parse_config, RunConfig};
use crate::dataset::{leave_k_out_split, load_interactions, preprocess, SplitDataset};
use crate::ensemble::{local_seed, train_loca, LocaConfig, LocaModel};
use crate::error::{LocaError, Result};
use crate::eval::{breakdown_by_activity, evaluate_model, top_n, EvalReport};
use crate::synthetic::PlantedBlocks;

#[derive(Debug, Parser)]
#[command(
    name = "loca",
    version,
    about = "Local collaborative autoencoders for top-N recommendation"
)]
pub struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set kernel.h_W=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Preprocess the interaction log and write the leave-k-out split.
    Prepare,
    /// Train a LOCA model on the split (preparing it first if needed).
    Train,
    /// Evaluate a trained model on the held-out items.
    Evaluate {
        /// Model directory; defaults to `<out>/model`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Write top-N lists for the listed users.
    Recommend {
        /// Comma-separated user tokens.
        #[arg(long, value_delimiter = ',', required = true)]
        users: Vec<String>,
        #[arg(short, long, default_value_t = 10)]
        n: usize,
        /// Keep items the user already interacted with.
        #[arg(long)]
        include_train: bool,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Write the full score vector of the listed users.
    Predict {
        #[arg(long, value_delimiter = ',', required = true)]
        users: Vec<String>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Compare anchor selection strategies at one or more model counts.
    AblateAnchors {
        #[arg(long, value_delimiter = ',', default_value = "coverage,random,farthest,kmeans")]
        strategies: Vec<AnchorStrategy>,
        /// Model counts; defaults to `loca.q`.
        #[arg(long, value_delimiter = ',')]
        q: Vec<usize>,
    },
    /// Retrain from scratch for each value of one parameter.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    #[value(name = "q")]
    Q,
    #[value(name = "h_T")]
    HTrain,
    #[value(name = "h_W")]
    HInfer,
}

impl SweepParam {
    fn key(self) -> &'static str {
        match self {
            SweepParam::Q => "q",
            SweepParam::HTrain => "h_T",
            SweepParam::HInfer => "h_W",
        }
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit status.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    fs::create_dir_all(&cfg.out).map_err(|e| LocaError::io(&cfg.out, e))?;
    let resolved = cfg.out.join("config.resolved.toml");
    fs::write(&resolved, cfg.to_toml()).map_err(|e| LocaError::io(&resolved, e))?;

    let mut manifest = Manifest::new(&cli.command, &cfg);
    match &cli.command {
        Command::Prepare => {
            prepare(&cfg, &mut manifest)?;
        }
        Command::Train => {
            let split = load_or_prepare(&cfg, &mut manifest)?;
            let config = cfg.loca_config()?;
            let model = train_loca(&split, &config)?;
            let dir = cfg.out.join("model");
            model.save(&dir)?;
            let reloaded = LocaModel::load(&dir)?;
            if reloaded.to_bytes() != model.to_bytes() {
                return Err(LocaError::artifact(&dir, "model does not reload identically"));
            }
            manifest.local_seeds = (0..model.anchors().len()).map(|j| local_seed(config.seed, j)).collect();
            manifest.add_checksum(&dir.join("manifest.toml"))?;
            log::info!(
                "trained {} local models, coverage {:.4}",
                model.anchors().len(),
                model.coverage()
            );
        }
        Command::Evaluate { model } => {
            let split = load_split(&cfg, &mut manifest)?;
            let model = load_model(&cfg, model.as_deref(), &mut manifest)?;
            let report = evaluate_model(&model, &split, &cfg.eval.n_values)?;
            let dir = cfg.out.join("eval");
            report.save(&dir)?;
            let path = dir.join("activity.csv");
            write_file(&path, &activity_table(&report, &split, &cfg)?)?;
            for name in ["metrics.csv", "summary.csv", "activity.csv"] {
                manifest.add_checksum(&dir.join(name))?;
            }
            print!("{}", report.summary_table());
        }
        Command::Recommend {
            users,
            n,
            include_train,
            model,
        } => {
            let split = load_split(&cfg, &mut manifest)?;
            let model = load_model(&cfg, model.as_deref(), &mut manifest)?;
            let mut out = String::from("user,rank,item,score\n");
            for token in users {
                let u = user_index(&split, token)?;
                let row = split.train.row(u);
                let scores = model.predict_user(u, row)?;
                let exclude: &[usize] = if *include_train { &[] } else { row };
                for (rank, i) in top_n(&scores, *n, exclude).into_iter().enumerate() {
                    let item = split.train.item_index.token(i).unwrap_or_default();
                    let _ = writeln!(out, "{token},{},{item},{}", rank + 1, scores[i]);
                }
            }
            let path = cfg.out.join("recommendations.csv");
            write_file(&path, &out)?;
            manifest.add_checksum(&path)?;
        }
        Command::Predict { users, model } => {
            let split = load_split(&cfg, &mut manifest)?;
            let model = load_model(&cfg, model.as_deref(), &mut manifest)?;
            let mut out = String::from("user,item,score\n");
            for token in users {
                let u = user_index(&split, token)?;
                let scores = model.predict_user(u, split.train.row(u))?;
                for (i, s) in scores.iter().enumerate() {
                    let item = split.train.item_index.token(i).unwrap_or_default();
                    let _ = writeln!(out, "{token},{item},{s}");
                }
            }
            let path = cfg.out.join("predictions.csv");
            write_file(&path, &out)?;
            manifest.add_checksum(&path)?;
        }
        Command::AblateAnchors { strategies, q } => {
            let split = load_or_prepare(&cfg, &mut manifest)?;
            let qs = if q.is_empty() { vec![cfg.loca.q] } else { q.clone() };
            let base = cfg.loca_config()?;
            let mut out = String::from("strategy,q,coverage");
            push_metric_header(&mut out, &cfg.eval.n_values);
            for &q in &qs {
                for &strategy in strategies {
                    let config = LocaConfig {
                        q,
                        anchor_strategy: strategy,
                        ..base.clone()
                    };
                    let model = train_loca(&split, &config)?;
                    let report = evaluate_model(&model, &split, &cfg.eval.n_values)?;
                    let _ = write!(out, "{strategy},{q},{:.6}", model.coverage());
                    push_metric_row(&mut out, &report);
                    log::info!("ablation {strategy} q={q} done");
                }
            }
            let path = cfg.out.join("ablate_anchors.csv");
            write_file(&path, &out)?;
            manifest.add_checksum(&path)?;
            print!("{out}");
        }
        Command::Sweep { param, values } => {
            let split = load_or_prepare(&cfg, &mut manifest)?;
            let mut out = format!("{},coverage", param.key());
            push_metric_header(&mut out, &cfg.eval.n_values);
            for &v in values {
                let config = sweep_point(&cfg, *param, v)?;
                let model = train_loca(&split, &config)?;
                let report = evaluate_model(&model, &split, &cfg.eval.n_values)?;
                let _ = write!(out, "{v},{:.6}", model.coverage());
                push_metric_row(&mut out, &report);
                log::info!("sweep {}={v} done", param.key());
            }
            let path = cfg.out.join(format!("sweep_{}.csv", param.key()));
            write_file(&path, &out)?;
            manifest.add_checksum(&path)?;
            print!("{out}");
        }
    }
    manifest.write(&cfg.out)
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = parse_config(cli.config.as_deref(), &cli.set)?;
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sweep_point(cfg: &RunConfig, param: SweepParam, v: f64) -> Result<LocaConfig> {
    let mut point = cfg.clone();
    match param {
        SweepParam::Q => {
            if v < 0.0 || v.fract() != 0.0 {
                return Err(LocaError::Config(format!(
                    "sweep value for loca.q must be a whole number, got {v}"
                )));
            }
            point.loca.q = v as usize;
        }
        SweepParam::HTrain => point.kernel.h_train = v,
        SweepParam::HInfer => point.kernel.h_infer = v,
    }
    point.validate()?;
    point.loca_config()
}

fn push_metric_header(out: &mut String, n_values: &[usize]) {
    for n in n_values {
        let _ = write!(out, ",recall@{n},ndcg@{n}");
    }
    out.push('\n');
}

fn push_metric_row(out: &mut String, report: &EvalReport) {
    for (r, g) in report.mean_recall.iter().zip(&report.mean_ndcg) {
        let _ = write!(out, ",{r:.6},{g:.6}");
    }
    out.push('\n');
}

fn activity_table(report: &EvalReport, split: &SplitDataset, cfg: &RunConfig) -> Result<String> {
    let buckets = breakdown_by_activity(report, &split.train, &cfg.eval.activity_edges)?;
    let mut out = String::from("lower,upper,users");
    push_metric_header(&mut out, &report.n_values);
    for b in buckets {
        let upper = b.upper.map(|u| u.to_string()).unwrap_or_default();
        let _ = write!(out, "{},{upper},{}", b.lower, b.n_users);
        for (r, g) in b.mean_recall.iter().zip(&b.mean_ndcg) {
            let _ = write!(out, ",{r:.6},{g:.6}");
        }
        out.push('\n');
    }
    Ok(out)
}

fn user_index(split: &SplitDataset, token: &str) -> Result<usize> {
    split
        .train
        .user_index
        .get(token)
        .ok_or_else(|| LocaError::Domain(format!("unknown user `{token}`")))
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| LocaError::io(path, e))
}

fn prepare(cfg: &RunConfig, manifest: &mut Manifest) -> Result<SplitDataset> {
    let log = if cfg.data.synthetic {
        manifest
            .inputs
            .push(("synthetic".into(), format!("planted-blocks seed={}", cfg.seed)));
        PlantedBlocks::default().generate(cfg.seed)
    } else {
        if cfg.data.path.is_empty() {
            return Err(LocaError::Config(
                "data.path is not set (or set data.synthetic = true)".into(),
            ));
        }
        let path = Path::new(&cfg.data.path);
        manifest.add_checksum(path)?;
        load_interactions(path, &cfg.schema()?)?
    };
    let matrix = preprocess(&log, cfg.data.min_user_interactions, cfg.positive_threshold()?)?;
    let split = leave_k_out_split(&log, &matrix, cfg.split.k)?;
    let dir = cfg.out.join("split");
    split.save(&dir)?;
    if SplitDataset::load(&dir)? != split {
        return Err(LocaError::artifact(&dir, "split does not reload identically"));
    }
    log::info!(
        "prepared {} users x {} items, {} train interactions",
        split.n_users(),
        split.n_items(),
        split.train.nnz()
    );
    Ok(split)
}

fn load_split(cfg: &RunConfig, manifest: &mut Manifest) -> Result<SplitDataset> {
    let dir = cfg.out.join("split");
    if !dir.join("train.csv").exists() {
        return Err(LocaError::artifact(
            &dir,
            "missing split (run `prepare` or `train` first)",
        ));
    }
    for name in ["train.csv", "heldout.csv", "index_map.csv"] {
        manifest.add_checksum(&dir.join(name))?;
    }
    SplitDataset::load(&dir)
}

fn load_or_prepare(cfg: &RunConfig, manifest: &mut Manifest) -> Result<SplitDataset> {
    if cfg.out.join("split").join("train.csv").exists() {
        load_split(cfg, manifest)
    } else {
        prepare(cfg, manifest)
    }
}

fn load_model(cfg: &RunConfig, dir: Option<&Path>, manifest: &mut Manifest) -> Result<LocaModel> {
    let dir = dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.out.join("model"));
    if !dir.join("manifest.toml").exists() {
        return Err(LocaError::artifact(&dir, "missing model (run `train` first)"));
    }
    manifest.add_checksum(&dir.join("manifest.toml"))?;
    let mut model = LocaModel::load(&dir)?;
    model.config.jobs = cfg.jobs;
    Ok(model)
}

/// `run_manifest.toml`: enough to repeat the run.
struct Manifest {
    command: String,
    seed: u64,
    jobs: usize,
    local_seeds: Vec<u64>,
    inputs: Vec<(String, String)>,
    config: String,
}

impl Manifest {
    fn new(command: &Command, cfg: &RunConfig) -> Self {
        Manifest {
            command: format!("{command:?}"),
            seed: cfg.seed,
            jobs: cfg.jobs,
            local_seeds: Vec::new(),
            inputs: Vec::new(),
            config: cfg.to_toml(),
        }
    }

    fn add_checksum(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| LocaError::io(path, e))?;
        let digest = Sha256::digest(&bytes);
        let hex = digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        });
        self.inputs.push((path.display().to_string(), format!("sha256:{hex}")));
        Ok(())
    }

    fn write(&self, out: &Path) -> Result<()> {
        let mut doc = toml::Table::new();
        doc.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        doc.insert("command".into(), self.command.clone().into());
        doc.insert("seed".into(), toml::Value::Integer(self.seed as i64));
        doc.insert("jobs".into(), toml::Value::Integer(self.jobs as i64));
        // u64 seeds can exceed TOML's integer range, so they are stored as text.
        let seeds = self
            .local_seeds
            .iter()
            .map(|s| toml::Value::String(s.to_string()))
            .collect();
        doc.insert("local_seeds".into(), toml::Value::Array(seeds));
        let mut inputs = toml::Table::new();
        for (k, v) in &self.inputs {
            inputs.insert(k.clone(), v.clone().into());
        }
        doc.insert("checksums".into(), toml::Value::Table(inputs));
        let config: toml::Table = toml::from_str(&self.config).map_err(|e| LocaError::Config(e.to_string()))?;
        doc.insert("config".into(), toml::Value::Table(config));
        let path = out.join("run_manifest.toml");
        let body = toml::to_string(&doc).map_err(|e| LocaError::artifact(&path, e.to_string()))?;
        write_file(&path, &body)
    }
}
