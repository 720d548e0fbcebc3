//! Batch command-line front end. Each subcommand runs one pipeline stage,
//! writes its artifacts into `--out` and records them in
//! `run_manifest.json`. Failures print one JSON line on stderr.

mod commands;
mod config;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::strategy::ShotValue;
use crate::trajectory::SyntheticConfig;
use crate::{Error, Result};

pub use commands::{
    ALIGNED_JSONL, ALIGNMENT_CSV, EVALUATION_CSV, EVALUATION_PREDICTIONS_CSV, PLAYS_CSV,
    PLAYS_JSONL, SPLIT_CSV, TEMPLATE_JSON, TRAINING_CSV, TREE_JSON,
};
pub use config::PipelineConfig;
pub use manifest::{sha256_file, ArtifactChecksum, RunManifest, MANIFEST_JSON};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MISSING_FILE: i32 = 3;
pub const EXIT_INVALID_DATA: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "playbook",
    version,
    about = "Deep decision trees over multi-agent trajectories"
)]
pub struct Cli {
    /// Seed for data generation, tree training and simulation
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON settings file; flags override it
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset
    Generate(GenerateArgs),
    /// Learn a formation template and align every play to it
    Align(InputArgs),
    /// Train a tree on the training matches
    Train(TrainArgs),
    /// Held-out log-loss of a tree and of the handcrafted baseline
    Evaluate(EvaluateArgs),
    /// Codebook mean trajectories and expected-goal histograms
    Codebook(CodebookArgs),
    /// Team strategy distributions
    Strategy(StrategyArgs),
    /// Season prediction with the Poisson model and both simulators
    Simulate(SimulateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Align(_) => "align",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::Codebook(_) => "codebook",
            Command::Strategy(_) => "strategy",
            Command::Simulate(_) => "simulate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 5000 plays of 100 frames
    Default,
    /// A full 380-match season of one-second plays
    Season,
    /// Four teams, twelve matches
    Small,
}

impl Preset {
    fn config(self) -> SyntheticConfig {
        match self {
            Preset::Default => SyntheticConfig::default(),
            Preset::Season => SyntheticConfig::season(),
            Preset::Small => SyntheticConfig::small(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShotValueArg {
    Predicted,
    Outcome,
}

impl From<ShotValueArg> for ShotValue {
    fn from(v: ShotValueArg) -> Self {
        match v {
            ShotValueArg::Predicted => ShotValue::Predicted,
            ShotValueArg::Outcome => ShotValue::Outcome,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Starting generator settings; replaces those from --config
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub teams: Option<usize>,
    #[arg(long)]
    pub matches: Option<usize>,
    /// Stop after this many plays
    #[arg(long, conflicts_with = "all_plays")]
    pub max_plays: Option<usize>,
    /// Keep every play of every match
    #[arg(long)]
    pub all_plays: bool,
    /// Frames per play
    #[arg(long)]
    pub tau: Option<usize>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Dataset file (JSON lines)
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Seed of the match-level train/test split
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Fraction of matches used for training
    #[arg(long)]
    pub train_frac: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TreeArgs {
    /// Total tree depth
    #[arg(long)]
    pub layers: Option<usize>,
    /// Children per decision node
    #[arg(long)]
    pub branching: Option<usize>,
    /// Expected number of leaves
    #[arg(long)]
    pub codebook_size: Option<usize>,
    /// Fixed routing temperature
    #[arg(long)]
    pub beta: Option<f64>,
    /// Temperature scale over the median pairwise distortion
    #[arg(long)]
    pub beta_scale: Option<f64>,
    #[arg(long)]
    pub eta_alpha: Option<f64>,
    #[arg(long)]
    pub eta_pi: Option<f64>,
    /// Epochs per layer
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Penalty on leaf classifier slopes
    #[arg(long)]
    pub l2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub tree: TreeArgs,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Trained tree (JSON)
    #[arg(long)]
    pub tree: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Args)]
pub struct CodebookArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub tree: PathBuf,
    /// Histogram bin width; must divide [0, 1]
    #[arg(long)]
    pub bin_width: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StrategyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub tree: PathBuf,
    /// What each shot contributes
    #[arg(long, value_enum)]
    pub shot_value: Option<ShotValueArg>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Unaligned season dataset
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub tree: TreeArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Monte-Carlo runs per match
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long, value_enum)]
    pub shot_value: Option<ShotValueArg>,
}

impl SplitArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(s) = self.split_seed {
            cfg.split_seed = s;
        }
        if let Some(f) = self.train_frac {
            cfg.train_frac = f;
        }
    }
}

impl TreeArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        let t = &mut cfg.tree;
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { t.$field = v; })*
            };
        }
        set!(layers => n_layers, branching => branching_factor, codebook_size => target_codebook_size,
            beta_scale => beta_scale, eta_alpha => eta_alpha, eta_pi => eta_pi, epochs => epochs,
            batch_size => batch_size, l2 => l2);
        if self.beta.is_some() {
            t.beta = self.beta;
        }
    }
}

/// Settings for this run: the config file, then the subcommand's flags,
/// then `--seed`.
pub fn resolve_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    match &cli.command {
        Command::Generate(a) => {
            if let Some(p) = a.preset {
                cfg.synthetic = p.config();
            }
            let s = &mut cfg.synthetic;
            if let Some(v) = a.teams {
                s.n_teams = v;
            }
            if let Some(v) = a.matches {
                s.n_matches = v;
            }
            if a.all_plays {
                s.max_plays = None;
            } else if a.max_plays.is_some() {
                s.max_plays = a.max_plays;
            }
            if let Some(v) = a.tau {
                s.tau = v;
            }
        }
        Command::Align(_) => {}
        Command::Train(a) => {
            a.tree.apply(&mut cfg);
            a.split.apply(&mut cfg);
        }
        Command::Evaluate(a) => a.split.apply(&mut cfg),
        Command::Codebook(a) => {
            if let Some(h) = a.bin_width {
                cfg.histogram = crate::codebook::HistogramSpec::new(h)?;
            }
        }
        Command::Strategy(a) => {
            if let Some(v) = a.shot_value {
                cfg.shot_value = v.into();
            }
        }
        Command::Simulate(a) => {
            a.tree.apply(&mut cfg);
            a.split.apply(&mut cfg);
            if let Some(n) = a.runs {
                cfg.simulation.n_runs = n;
            }
            if let Some(v) = a.shot_value {
                cfg.shot_value = v.into();
            }
        }
    }
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a parsed command line and writes its manifest.
pub fn execute(cli: &Cli, args: Vec<String>) -> Result<RunManifest> {
    let start = Instant::now();
    let cfg = resolve_config(cli)?;
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    let (inputs, outputs) = commands::run(&cli.command, &cfg, &cli.out)?;
    let manifest = RunManifest {
        subcommand: cli.command.name().to_string(),
        args,
        config: cfg,
        seed: cli.seed,
        inputs: inputs
            .iter()
            .map(ArtifactChecksum::of)
            .collect::<Result<_>>()?,
        outputs: outputs
            .iter()
            .map(ArtifactChecksum::of)
            .collect::<Result<_>>()?,
        wall_clock_s: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    manifest.save(cli.out.join(MANIFEST_JSON))?;
    Ok(manifest)
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::MissingFile(_) => EXIT_MISSING_FILE,
        Error::Parse { .. }
        | Error::Dimension { .. }
        | Error::InvalidConfig(_)
        | Error::Csv(_)
        | Error::Json(_) => EXIT_INVALID_DATA,
        _ => EXIT_FAILURE,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Io { .. } => "io",
        Error::MissingFile(_) => "missing_file",
        Error::Parse { .. } => "parse",
        Error::Dimension { .. } => "dimension",
        Error::InvalidConfig(_) => "invalid_config",
        Error::InvalidInput(_) => "invalid_input",
        Error::EmptyDataset => "empty_dataset",
        Error::UnknownTeam(_) => "unknown_team",
        Error::DisconnectedSchedule(_) => "disconnected_schedule",
        Error::Csv(_) => "csv",
        Error::Json(_) => "json",
    }
}

fn report(kind: &str, message: &str, code: i32) {
    let line = serde_json::json!({ "error": kind, "message": message, "exit_code": code });
    eprintln!("{line}");
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let text = e.to_string();
            let message = text
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ");
            report("usage", message, EXIT_USAGE);
            return EXIT_USAGE;
        }
    };
    let recorded = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match execute(&cli, recorded) {
        Ok(_) => 0,
        Err(e) => {
            let code = exit_code(&e);
            report(error_kind(&e), &e.to_string(), code);
            code
        }
    }
}
