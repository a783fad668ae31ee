use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use tubeid_core::clarabel_backend::ClarabelSolver;

use crate::config::Config;
use crate::error::{Failure, Stage};
use crate::pipeline::{self, Artifacts, Mode};
use crate::report;

#[derive(Debug, Parser)]
#[command(name = "tubeid", version, about = "Identify an uncertain model and synthesize tube MPC ingredients from data")]
pub struct Cli {
    /// TOML configuration; missing keys take their defaults.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Artifact directory.
    #[arg(long, short, global = true, default_value = "artifacts")]
    pub out: PathBuf,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `theta`.
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Overrides `max_iters`.
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate training and held-out data.
    GenData,
    /// Model LP, LQR gain, tube, terminal set and multipliers.
    Init,
    /// Sequential convex programming from the initialization.
    Synthesize {
        /// Keep (A, B, d) at the initial model.
        #[arg(long)]
        fix_model: bool,
    },
    /// Membership, held-out data, nonlinear and set-inclusion checks.
    Validate,
    /// Closed-loop tube MPC from random states in the terminal set.
    MpcSim,
    /// Comparison table, problem sizes and vertex CSVs.
    Report,
    /// Every stage in order.
    Run {
        /// Run only this stage.
        #[arg(long, value_enum)]
        stage: Option<Stage>,
    },
}

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.theta {
        cfg.theta = t;
    }
    if let Some(m) = cli.max_iters {
        cfg.max_iters = m;
    }
    cfg.check()?;
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let art = Artifacts::new(&cli.out);
    let solver = ClarabelSolver::default();
    match &cli.command {
        Command::GenData => pipeline::gen_data(&cfg, &art).map(drop),
        Command::Init => pipeline::init(&cfg, &art, &solver).map(drop),
        Command::Synthesize { fix_model } => {
            let mode = if *fix_model { Mode::Fixed } else { Mode::Adaptive };
            pipeline::synthesize(&cfg, &art, &[mode], &solver).map(drop)
        }
        Command::Validate => pipeline::validate(&cfg, &art, &solver).map(drop),
        Command::MpcSim => pipeline::mpc_sim(&cfg, &art, &solver).map(drop),
        Command::Report => report::emit_report(&art).map(drop),
        Command::Run { stage } => {
            if *stage == Some(Stage::Config) {
                return Err(Failure::bad_input(Stage::Config, "`config` is not a runnable stage"));
            }
            pipeline::run(&cfg, &art, *stage, &solver)
        }
    }
}

/// Parse, run, print errors to stderr and return the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 4 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
