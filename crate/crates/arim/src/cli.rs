//! The `arim` command line.
//!
//! `--config FILE` reads a JSON object whose keys are the long flag names of
//! the chosen subcommand (`out-model` or `out_model`) plus the global
//! `threads`, `verbose` and `quiet`. An optional `"command"` key must name
//! the subcommand. Flags given on the command line win over the file.
//! `--save-config FILE` writes the effective settings in the same schema.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use arim_core::dataset::SplitKind;
use arim_core::eval::{DetectionConfig, Identity, MitigationMethod};
use arim_core::fcn::{train, ArchKind, FcnMitigation, FcnModel, RecordPairs, TrainConfig};
use arim_core::mitigation::{default_grid, search_threshold, Oracle, Zeroing};
use arim_core::Profile;
use clap::error::ErrorKind;
use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::modelio::{load_model, save_model};
use crate::plot::{profile_rows, write_plot_csv, write_plot_svg};
use crate::report::{evaluate_stream, write_history_csv, write_report, write_samples_csv, ReportFile};
use crate::runner::{init_threads, RayonRunner};
use crate::store::{generate, Dataset, GenerateOptions, PAPER_COUNT};

#[derive(Parser, Debug, Clone, PartialEq)]
#[command(name = "arim", version, about = "FMCW radar interference mitigation pipeline")]
pub struct Cli {
    /// JSON file with flag values (command-line flags take precedence).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Write the effective flags of this run as a JSON config.
    #[arg(long, global = true, value_name = "FILE")]
    pub save_config: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "ARIM_THREADS", value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    /// Less log output (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub quiet: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Command {
    /// Simulate a dataset into sharded files plus a manifest.
    Generate(GenerateArgs),
    /// Train an FCN on a dataset's training split.
    Train(TrainArgs),
    /// Score a mitigation method on a dataset split.
    Evaluate(EvaluateArgs),
    /// Export the range profiles of one sample as CSV or SVG.
    Plot(PlotArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::Plot(_) => "plot",
        }
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct GenerateArgs {
    /// Number of samples (required unless --paper-scale).
    #[arg(long, required_unless_present = "paper_scale")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,

    /// Full-size corpus: 48,000 samples unless --count is given.
    #[arg(long, conflicts_with = "desk_scale")]
    pub paper_scale: bool,

    /// Reduced configuration (256-sample chirps, 512-bin profiles).
    #[arg(long)]
    pub desk_scale: bool,

    /// Samples per shard file.
    #[arg(long, default_value_t = crate::store::SHARD_SIZE, value_parser = clap::value_parser!(u64).range(1..))]
    pub shard_size: u64,
}

impl GenerateArgs {
    pub fn profile(&self) -> Profile {
        if self.desk_scale {
            Profile::Desk
        } else {
            Profile::Paper
        }
    }

    pub fn sample_count(&self) -> u64 {
        self.count.unwrap_or(PAPER_COUNT)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Shallow,
    Deep,
}

impl From<Arch> for ArchKind {
    fn from(a: Arch) -> Self {
        match a {
            Arch::Shallow => ArchKind::Shallow,
            Arch::Deep => ArchKind::Deep,
        }
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub arch: Arch,

    /// Dataset directory or manifest.
    #[arg(long)]
    pub data: PathBuf,

    #[arg(long, default_value_t = 100)]
    pub epochs: usize,

    #[arg(long, default_value_t = 1e-5)]
    pub lr: f64,

    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch: u64,

    /// L2 weight decay.
    #[arg(long, default_value_t = 1e-5)]
    pub wd: f64,

    /// Seeds weight init and shuffling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long)]
    pub out_model: PathBuf,

    /// Training history CSV (default: <out-model>.history.csv).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Identity,
    Zeroing,
    Oracle,
    Fcn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl From<Split> for SplitKind {
    fn from(s: Split) -> Self {
        match s {
            Split::Train => SplitKind::Train,
            Split::Validation => SplitKind::Validation,
            Split::Test => SplitKind::Test,
        }
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct MethodArgs {
    #[arg(long, value_enum)]
    pub method: Method,

    /// Trained model file (required for --method fcn).
    #[arg(long, required_if_eq("method", "fcn"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,

    /// Zeroing factor k; tuned on the validation split when omitted.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvaluateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub method: MethodArgs,

    #[arg(long)]
    pub data: PathBuf,

    #[arg(long, value_enum, default_value_t = Split::Test)]
    pub split: Split,

    /// JSON report with means and per-sample metrics.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,

    /// Per-sample metrics as CSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples_csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlotFormat {
    Csv,
    Svg,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct PlotArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub method: MethodArgs,

    #[arg(long)]
    pub data: PathBuf,

    #[arg(long)]
    pub sample_id: u64,

    #[arg(long, value_enum, default_value_t = PlotFormat::Csv)]
    pub format: PlotFormat,

    #[arg(long)]
    pub out: PathBuf,
}

const GLOBAL_KEYS: [&str; 3] = ["threads", "verbose", "quiet"];

fn usage(msg: impl std::fmt::Display) -> clap::Error {
    Cli::command().error(ErrorKind::ValueValidation, msg)
}

/// Value of `--config` and the subcommand name, found without a full parse
/// so that required flags may come from the file.
fn prescan(argv: &[OsString]) -> (Option<PathBuf>, Option<String>) {
    let mut config = None;
    let mut sub = None;
    let mut it = argv.iter().skip(1);
    while let Some(tok) = it.next() {
        let s = tok.to_string_lossy();
        if let Some(v) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(v));
        } else if s == "--config" {
            config = it.next().map(PathBuf::from);
        } else if s == "--save-config" || s == "--threads" {
            it.next();
        } else if sub.is_none() && !s.starts_with('-') {
            sub = Some(s.into_owned());
        } else if s == "--" {
            break;
        }
    }
    (config, sub)
}

fn given_on_command_line(argv: &[OsString], long: &str, short: Option<char>) -> bool {
    argv.iter().skip(1).any(|tok| {
        let s = tok.to_string_lossy();
        let flag = format!("--{long}");
        s == flag
            || s.starts_with(&format!("{flag}="))
            || short.is_some_and(|c| s.len() > 1 && s.starts_with('-') && !s.starts_with("--") && s[1..].contains(c))
    })
}

fn config_tokens(argv: &[OsString], path: &Path, sub: &str) -> Result<Vec<OsString>, clap::Error> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    let Some(map) = value.as_object() else {
        return Err(usage(format!("config {}: expected a JSON object", path.display())));
    };
    let root = Cli::command();
    let Some(cmd) = root.find_subcommand(sub) else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for (key, v) in map {
        let long = key.replace('_', "-");
        if long == "command" {
            if v.as_str() != Some(sub) {
                return Err(usage(format!("config {} is for command {v}, not `{sub}`", path.display())));
            }
            continue;
        }
        let arg = if GLOBAL_KEYS.contains(&long.as_str()) {
            root.get_arguments().find(|a| a.get_long() == Some(long.as_str()))
        } else {
            cmd.get_arguments()
                .find(|a| a.get_long() == Some(long.as_str()) && !matches!(long.as_str(), "help" | "config" | "save-config"))
        }
        .ok_or_else(|| usage(format!("config {}: unknown key `{key}` for `{sub}`", path.display())))?;
        if given_on_command_line(argv, &long, arg.get_short()) {
            continue;
        }
        let flag = OsString::from(format!("--{long}"));
        match (arg.get_action(), v) {
            (ArgAction::SetTrue, serde_json::Value::Bool(b)) => {
                if *b {
                    out.push(flag);
                }
            }
            (ArgAction::Count, serde_json::Value::Number(n)) => {
                let n = n.as_u64().ok_or_else(|| usage(format!("config key `{key}` must be a count")))?;
                out.extend((0..n).map(|_| flag.clone()));
            }
            (ArgAction::SetTrue | ArgAction::Count, _) => {
                return Err(usage(format!("config key `{key}` has the wrong type")));
            }
            (_, serde_json::Value::Null) => {}
            (_, serde_json::Value::String(s)) => out.extend([flag, s.into()]),
            (_, serde_json::Value::Number(n)) => out.extend([flag, n.to_string().into()]),
            (_, serde_json::Value::Bool(b)) => out.extend([flag, b.to_string().into()]),
            _ => return Err(usage(format!("config key `{key}` must be a scalar"))),
        }
    }
    Ok(out)
}

/// Parses `argv` (program name first), merging `--config` if present.
pub fn parse_args<I, T>(argv: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    if let (Some(config), Some(sub)) = prescan(&argv) {
        let extra = config_tokens(&argv, &config, &sub)?;
        let at = argv.iter().position(|t| t == "--").unwrap_or(argv.len());
        argv.splice(at..at, extra);
    }
    Cli::try_parse_from(argv)
}

/// The effective settings of `cli` in the `--config` schema.
pub fn config_json(cli: &Cli) -> serde_json::Value {
    let mut value = serde_json::to_value(&cli.command).expect("arguments serialize");
    let map = value.as_object_mut().expect("arguments are a struct");
    map.insert("command".into(), cli.command.name().into());
    if let Some(t) = cli.threads {
        map.insert("threads".into(), t.into());
    }
    value
}

fn log_level(cli: &Cli) -> log::LevelFilter {
    match 2 + cli.verbose as i32 - cli.quiet as i32 {
        i32::MIN..=0 => log::LevelFilter::Error,
        1 => log::LevelFilter::Warn,
        2 => log::LevelFilter::Info,
        3 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    }
}

/// Entry point of the binary: 0 on success, 2 on usage errors, 1 otherwise.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match parse_args(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(log_level(&cli))
        .format_timestamp(None)
        .format_target(false)
        .try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(path) = &cli.save_config {
        let json = serde_json::to_vec_pretty(&config_json(cli))?;
        crate::write_atomic(path, &json)?;
        log::info!("saved config to {}", path.display());
    }
    if let Err(e) = init_threads(cli.threads.map(|t| t as usize)) {
        log::debug!("thread pool already initialized: {e}");
    }
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Plot(a) => cmd_plot(a),
    }
}

fn cmd_generate(a: &GenerateArgs) -> anyhow::Result<()> {
    let (profile, count) = (a.profile(), a.sample_count());
    let mut opts = GenerateOptions::new(count, a.seed, profile);
    opts.shard_size = a.shard_size;
    log::info!("generating {count} {profile} samples (seed {}) into {}", a.seed, a.out.display());
    let manifest = generate(&a.out, &opts)?;
    println!("manifest {}", a.out.join(crate::store::MANIFEST_FILE).display());
    println!(
        "samples {} train {} test {}",
        manifest.total_samples, manifest.split.train_count, manifest.split.test_count
    );
    for s in &manifest.shards {
        println!("{} {}", s.sha256, s.file);
    }
    Ok(())
}

fn history_path(a: &TrainArgs) -> PathBuf {
    a.history.clone().unwrap_or_else(|| {
        let mut name = a.out_model.file_name().unwrap_or_default().to_os_string();
        name.push(".history.csv");
        a.out_model.with_file_name(name)
    })
}

fn cmd_train(a: &TrainArgs) -> anyhow::Result<()> {
    let ds = Dataset::open(&a.data)?;
    let profile = ds.manifest().profile;
    let kind = ArchKind::from(a.arch);
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch as usize,
        learning_rate: a.lr,
        weight_decay: a.wd,
        rng_seed: a.seed,
        ..TrainConfig::default()
    };
    cfg.validate().context("invalid training settings")?;
    println!(
        "training {kind} ({profile}) lr={} wd={} batch={} epochs={} seed={}",
        cfg.learning_rate, cfg.weight_decay, cfg.batch_size, cfg.epochs, a.seed
    );
    let train_set = ds.load(SplitKind::Train)?;
    let val_set = ds.load(SplitKind::Validation)?;
    ensure!(!train_set.is_empty(), "{}: training split is empty", a.data.display());
    log::info!("{} training / {} validation samples", train_set.len(), val_set.len());

    let model = FcnModel::new(kind, profile, a.seed)?;
    let train_pairs = RecordPairs::new(&train_set, model.stft)?;
    let val_pairs = RecordPairs::new(&val_set, model.stft)?;
    let validation: Option<&dyn arim_core::fcn::PairSource> = (!val_set.is_empty()).then_some(&val_pairs);
    let start = std::time::Instant::now();
    let outcome = train(model, &train_pairs, validation, &cfg, &RayonRunner, |r| match r.val_loss {
        Some(v) => log::info!("epoch {} train_loss {:.6} val_loss {v:.6} ({:.0}s)", r.epoch, r.train_loss, start.elapsed().as_secs_f64()),
        None => log::info!("epoch {} train_loss {:.6} ({:.0}s)", r.epoch, r.train_loss, start.elapsed().as_secs_f64()),
    })?;
    save_model(&a.out_model, &outcome.model)?;
    let history = history_path(a);
    write_history_csv(&history, &outcome.history)?;
    println!(
        "model {} (best epoch {}) history {}",
        a.out_model.display(),
        outcome.model.meta.best_epoch,
        history.display()
    );
    Ok(())
}

/// The selected method, tuning zeroing on the validation split when needed.
fn build_method(m: &MethodArgs, ds: &Dataset) -> anyhow::Result<(Box<dyn MitigationMethod + Sync>, Option<f64>)> {
    Ok(match m.method {
        Method::Identity => (Box::new(Identity), None),
        Method::Oracle => (Box::new(Oracle), None),
        Method::Zeroing => {
            let k = match m.threshold {
                Some(k) => {
                    ensure!(k.is_finite() && k > 0.0, "--threshold must be positive");
                    k
                }
                None => {
                    let search = search_threshold(
                        ds.split(SplitKind::Validation).map(|r| r.map_err(|e| arim_core::Error::Corrupt {
                            what: "validation split",
                            reason: e.to_string(),
                        })),
                        &default_grid(),
                        &DetectionConfig::default(),
                    )
                    .context("tuning the zeroing threshold on the validation split")?;
                    let k = search.best();
                    log::info!("zeroing threshold k={k} (validation AUC {:.4}, {} samples)", search.mean_auc[search.grid.iter().position(|&g| g == k).unwrap()], search.samples);
                    k
                }
            };
            (Box::new(Zeroing { threshold_factor: k }), Some(k))
        }
        Method::Fcn => {
            let path = m.model.as_ref().context("--method fcn needs --model")?;
            let model = load_model(path)?;
            let (profile, n) = (ds.manifest().profile, ds.params().num_samples);
            ensure!(
                model.profile == profile && model.stft.signal_len == n,
                "{}: model is for the {} profile, dataset is {profile}",
                path.display(),
                model.profile
            );
            (Box::new(FcnMitigation::new(model)?), None)
        }
    })
}

fn cmd_evaluate(a: &EvaluateArgs) -> anyhow::Result<()> {
    let ds = Dataset::open(&a.data)?;
    let (method, threshold) = build_method(&a.method, &ds)?;
    let split = SplitKind::from(a.split);
    let report = evaluate_stream(method.as_ref(), ds.split(split), split.name(), &DetectionConfig::default())?;
    println!(
        "{} on {} ({} samples): auc {:.4} mae_db {:.3} delta_snr_db {:.3}",
        report.method, report.split, report.count, report.mean_auc, report.mae_db, report.mean_delta_snr_db
    );
    if let Some(path) = &a.samples_csv {
        write_samples_csv(path, &report.samples)?;
    }
    if let Some(path) = &a.report {
        let file = ReportFile {
            report,
            zeroing_threshold: threshold,
            data: a.data.display().to_string(),
            model: a.method.model.as_ref().map(|p| p.display().to_string()),
        };
        write_report(path, &file)?;
        println!("report {}", path.display());
    }
    Ok(())
}

fn cmd_plot(a: &PlotArgs) -> anyhow::Result<()> {
    let ds = Dataset::open(&a.data)?;
    let record = ds.get(a.sample_id)?;
    let (method, _) = build_method(&a.method, &ds)?;
    let rows = profile_rows(&record, method.as_ref(), ds.params())?;
    if rows.is_empty() {
        bail!("empty profile");
    }
    match a.format {
        PlotFormat::Csv => write_plot_csv(&a.out, &rows)?,
        PlotFormat::Svg => {
            let title = format!("sample {}: {}", a.sample_id, method.name());
            write_plot_svg(&a.out, &rows, &title)?
        }
    }
    println!("{}", a.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<Cli, clap::Error> {
        parse_args(std::iter::once("arim").chain(args.iter().copied()))
    }

    #[test]
    fn train_defaults() {
        let cli = parse(&["train", "--arch", "deep", "--data", "d", "--out-model", "m"]).unwrap();
        let Command::Train(t) = cli.command else { panic!() };
        assert_eq!((t.lr, t.wd, t.batch, t.epochs), (1e-5, 1e-5, 10, 100));
    }

    #[test]
    fn paper_scale_is_the_full_corpus() {
        let cli = parse(&["generate", "--paper-scale", "--out", "o"]).unwrap();
        let Command::Generate(g) = cli.command else { panic!() };
        assert_eq!((g.sample_count(), g.profile()), (48_000, Profile::Paper));
        let split = arim_core::dataset::split_counts(g.sample_count());
        assert_eq!((split.train, split.test), (40_000, 8_000));
        let cli = parse(&["generate", "--desk-scale", "--count", "5", "--out", "o"]).unwrap();
        let Command::Generate(g) = cli.command else { panic!() };
        assert_eq!((g.sample_count(), g.profile()), (5, Profile::Desk));
    }

    #[test]
    fn usage_errors() {
        let err = parse(&["train", "--arch", "medium", "--data", "d", "--out-model", "m"]).unwrap_err();
        assert_eq!(err.kind(), ErrorKind::InvalidValue);
        let text = err.to_string();
        assert!(text.contains("shallow") && text.contains("deep"), "{text}");
        assert!(parse(&["generate", "--count", "3"]).is_err());
        let err = parse(&["evaluate", "--method", "fcn", "--data", "d"]).unwrap_err();
        assert_eq!(err.kind(), ErrorKind::MissingRequiredArgument);
        assert!(parse(&["generate", "--paper-scale", "--desk-scale", "--out", "o"]).is_err());
    }

    #[test]
    fn config_roundtrip_and_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        let direct = parse(&["--threads", "2", "train", "--arch", "shallow", "--data", "d", "--epochs", "7", "--lr", "0.001", "--out-model", "m"]).unwrap();
        std::fs::write(&cfg, serde_json::to_vec(&config_json(&direct)).unwrap()).unwrap();
        let via = parse(&["train", "--config", cfg.to_str().unwrap()]).unwrap();
        assert_eq!(via.command, direct.command);
        assert_eq!(via.threads, Some(2));
        let over = parse(&["train", "--config", cfg.to_str().unwrap(), "--epochs", "9"]).unwrap();
        let Command::Train(t) = over.command else { panic!() };
        assert_eq!((t.epochs, t.lr), (9, 0.001));
    }

    #[test]
    fn config_rejects_unknown_keys_and_wrong_command() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"out": "x", "colour": "red"}"#).unwrap();
        let err = parse(&["generate", "--count", "1", "--config", cfg.to_str().unwrap()]).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
        std::fs::write(&cfg, r#"{"command": "train", "out": "x"}"#).unwrap();
        assert!(parse(&["generate", "--count", "1", "--config", cfg.to_str().unwrap()]).is_err());
        std::fs::write(&cfg, r#"{"config": "x"}"#).unwrap();
        assert!(parse(&["generate", "--count", "1", "--out", "o", "--config", cfg.to_str().unwrap()]).is_err());
    }

    #[test]
    fn config_flags_and_snake_case() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"out": "o", "paper_scale": true, "verbose": 2}"#).unwrap();
        let cli = parse(&["generate", "--config", cfg.to_str().unwrap()]).unwrap();
        let Command::Generate(g) = &cli.command else { panic!() };
        assert!(g.paper_scale && g.count.is_none());
        assert_eq!(cli.verbose, 2);
    }
}
