//! Command-line surface.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use survnet_core::gradcheck::{self, Family, GradCheckOptions};
use survnet_core::nn::Preset;
use survnet_core::train::{LossKind, Subgroup};

use crate::checkpoint;
use crate::config::{self, DataPreset, GenSettings, Precision, TrainSettings};
use crate::dataset;
use crate::error::{Error, Result};
use crate::experiment::{reproduce, status_line, summary_table, ReproduceOptions, Sim};
use crate::generate::generate;
use crate::history;
use crate::manifest::Manifest;
use crate::run::{self, RunRequest};

#[derive(Debug, Parser)]
#[command(name = "survnet", version, about = "Deep survival analysis with Cox-model losses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a simulated survival dataset.
    GenData(GenDataArgs),
    /// Train a network on a dataset directory.
    Train(TrainArgs),
    /// Evaluate a trained run on a dataset's test split.
    Eval(EvalArgs),
    /// Regenerate data and rerun one of the simulation studies.
    Reproduce(ReproduceArgs),
    /// Finite-difference audit of every loss and layer gradient.
    GradCheck(GradCheckArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// sim-a, sim-b or nodule-cifar.
    #[arg(long)]
    pub preset: Option<DataPreset>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Multiplies the training-set size.
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub train: Option<usize>,
    #[arg(long)]
    pub test: Option<usize>,
    /// Directory with the uncompressed MNIST IDX files.
    #[arg(long)]
    pub mnist_dir: Option<PathBuf>,
    /// Directory with the CIFAR-10 binary batches.
    #[arg(long)]
    pub cifar_dir: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Network preset: table1 or simc.
    #[arg(long)]
    pub preset: Option<Preset>,
    /// oracle, full-batched, mini-batched, two-task-full or two-task (mini-batched).
    #[arg(long)]
    pub loss: Option<LossKind>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// events or diseased.
    #[arg(long)]
    pub subgroup: Option<Subgroup>,
    /// f32 or f64.
    #[arg(long)]
    pub precision: Option<Precision>,
    /// Run directory for manifest, metrics and checkpoint.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Record per-epoch wall-clock seconds.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// a, b or c.
    pub sim: Sim,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Multiplies the training-set size.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub mnist_dir: Option<PathBuf>,
    #[arg(long)]
    pub cifar_dir: Option<PathBuf>,
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, hide = true)]
    pub inject_sign_bug: bool,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Reproduce(a) => reproduce_cmd(a),
        Command::GradCheck(a) => grad_check(a),
    }
}

fn stdout_line(s: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{s}")
        .and_then(|_| out.flush())
        .map_err(Error::io(Path::new("<stdout>")))
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    let pairs = match &a.config {
        Some(p) => config::load(p)?,
        None => Vec::new(),
    };
    let mut s = GenSettings::from_pairs(a.preset, &pairs)?;
    if let Some(v) = a.seed {
        s.seed = v;
    }
    if let Some(v) = a.scale {
        s.scale = v;
    }
    if let Some(v) = a.train {
        s.train = v;
    }
    if let Some(v) = a.test {
        s.test = v;
    }
    if a.mnist_dir.is_some() {
        s.mnist_dir = a.mnist_dir;
    }
    if a.cifar_dir.is_some() {
        s.cifar_dir = a.cifar_dir;
    }
    let g = generate(&s)?;
    eprintln!("images from {}", g.source);
    dataset::save(&a.out, &g.train, &g.test)?;
    stdout_line("split\tlabel\tcount\tmean_time\tcensored_rate\tprevalence")?;
    for (name, d) in [("train", &g.train), ("test", &g.test)] {
        let prevalence = d.records.iter().filter(|r| r.label).count() as f64 / d.len() as f64;
        for st in dataset::group_stats(&d.records) {
            stdout_line(&format!(
                "{name}\t{}\t{}\t{:.4}\t{:.4}\t{prevalence:.4}",
                st.label as u8, st.count, st.mean_time, st.censored_rate
            ))?;
        }
    }
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let pairs = match &a.config {
        Some(p) => config::load(p)?,
        None => Vec::new(),
    };
    let mut s = TrainSettings::from_pairs(&pairs)?;
    let subgroup_set = pairs.iter().any(|(k, _)| k == "subgroup") || a.subgroup.is_some();
    if let Some(v) = a.preset {
        s.preset = v;
    }
    if let Some(v) = a.loss {
        s.train.loss = v;
    }
    if let Some(v) = a.epochs {
        s.train.epochs = v;
    }
    if let Some(v) = a.batch_size {
        s.train.batch_size = v;
    }
    if let Some(v) = a.lr {
        s.train.lr = v;
    }
    if let Some(v) = a.seed {
        s.train.seed = v;
    }
    if let Some(v) = a.subgroup {
        s.train.subgroup = v;
    }
    if let Some(v) = a.precision {
        s.precision = v;
    }
    if !subgroup_set {
        s.train.subgroup = TrainSettings::default_subgroup(s.train.loss);
    }
    let (train_data, test_data) = dataset::load(&a.data)?;
    let command = std::env::args().collect::<Vec<_>>().join(" ");
    let req = RunRequest {
        command: &command,
        settings: &s,
        train: &train_data,
        test: &test_data,
        data_path: Some(&a.data),
        out: a.out.as_deref(),
        timing: a.timing,
    };
    stdout_line(history::CSV_HEADER)?;
    let mut io_err = None;
    run::train(&req, &mut |m| {
        eprintln!("{}", status_line(m));
        if let Err(e) = stdout_line(&history::csv_row(m)) {
            io_err.get_or_insert(e);
        }
    })?;
    io_err.map_or(Ok(()), Err)
}

fn eval(a: EvalArgs) -> Result<()> {
    let manifest = Manifest::load(&a.run.join("manifest.json"))?;
    let settings = manifest.train_settings()?;
    let tensors = checkpoint::load(&a.run.join("model.ckpt"))?;
    let test = dataset::load_split(&a.data.join("test"))?;
    let (loss, r) = run::evaluate(&settings, &tensors, &test)?;
    let f = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    stdout_line("test_loss,auc,c1,c2")?;
    stdout_line(&format!("{loss},{},{},{}", f(r.auc), f(r.c1), f(r.c2)))
}

fn reproduce_cmd(a: ReproduceArgs) -> Result<()> {
    let opts = ReproduceOptions {
        sim: a.sim,
        seed: a.seed,
        scale: a.scale,
        epochs: a.epochs,
        out: a.out,
        mnist_dir: a.mnist_dir,
        cifar_dir: a.cifar_dir,
        timing: a.timing,
    };
    let r = reproduce(&opts, &mut |line| eprintln!("{line}"))?;
    let table = summary_table(&r);
    if let Some(out) = &opts.out {
        let p = out.join("summary.tsv");
        std::fs::write(&p, &table).map_err(Error::io(&p))?;
    }
    eprintln!("source: {}", r.source);
    print!("{table}");
    Ok(())
}

fn grad_check(a: GradCheckArgs) -> Result<()> {
    let report = gradcheck::run(GradCheckOptions {
        trials: a.trials,
        seed: a.seed,
        inject_sign_bug: a.inject_sign_bug,
    })?;
    for e in &report.entries {
        stdout_line(&format!(
            "{}\t{}\ttrials={}\tmax_rel_err={:.3e}\ttol={:.0e}\t{}",
            if e.passed() { "ok" } else { "FAIL" },
            e.name,
            e.trials,
            e.max_rel_err,
            e.tolerance,
            if e.skipped > 0 {
                format!("skipped={}", e.skipped)
            } else {
                String::new()
            }
        ))?;
    }
    let losses = report.count(Family::Loss);
    let layers = gradcheck::LAYER_KINDS.len();
    if report.passed() {
        stdout_line(&format!(
            "PASS {losses} losses, {layers} layer kinds (+{} heads), max rel err {:.3e} <= 1e-4",
            report.count(Family::Layer) - layers,
            report.max_rel_err()
        ))
    } else {
        let w = report.worst().expect("failed report has entries");
        Err(Error::Check(format!(
            "{} max relative error {:.3e} exceeds {:.0e}",
            w.name, w.max_rel_err, w.tolerance
        )))
    }
}
