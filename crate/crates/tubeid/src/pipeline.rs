//! Stages operating on an artifact directory. Every stage reads its inputs
//! from files written by earlier stages, so each can be rerun on its own.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tubeid_core::cone::{ConeSolver, ProblemSize};
use tubeid_core::inclusion::{check_inclusions, InclusionReport};
use tubeid_core::init::{initialize, InitReport};
use tubeid_core::linalg::Vector;
use tubeid_core::lmi::{check_nlmi, NlmiReport, SynthIterate};
use tubeid_core::model_set::{check_membership, MembershipReport, MEMBERSHIP_TOL};
use tubeid_core::plant::{build_transitions, simulate_msd, MsdParams, MsdPlant, TransitionSet};
use tubeid_core::scp::{run_algorithm1, symbolic_size, ScpReport, SizeDims, Termination};
use tubeid_core::setup::FixedShapes;
use tubeid_core::tube_mpc::{simulate_closed_loop, TubeMpcProblem};

use crate::config::Config;
use crate::error::{classify_init, Failure, Stage};
use crate::io;

pub const CONFIG: &str = "config.toml";
pub const DATA: &str = "data.csv";
pub const VALIDATION_DATA: &str = "validation.csv";
pub const DATA_META: &str = "data_meta.json";
pub const INIT: &str = "init.json";
pub const VALIDATE: &str = "validate.json";
pub const MPC_SUMMARY: &str = "mpc_summary.json";
pub const THETA_SWEEP: &str = "theta_sweep.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Adaptive,
    Fixed,
}

impl Mode {
    pub fn tag(self) -> &'static str {
        match self {
            Mode::Adaptive => "adaptive",
            Mode::Fixed => "fixed",
        }
    }

    pub fn synth_file(self) -> String {
        format!("synth_{}.json", self.tag())
    }

    pub fn iterations_file(self) -> String {
        format!("iterations_{}.csv", self.tag())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataMeta {
    pub seed: u64,
    pub validation_seed: u64,
    pub samples: usize,
    pub validation_samples: usize,
    pub excitation: f64,
    pub plant: MsdParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitArtifact {
    pub seed: u64,
    pub theta: f64,
    pub shapes: FixedShapes,
    pub iterate: SynthIterate,
    pub report: InitReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthArtifact {
    pub seed: u64,
    pub theta: f64,
    pub mode: Mode,
    /// Initialization was redone in memory because θ̂ differed from `init.json`.
    pub reinitialized: bool,
    pub shapes: FixedShapes,
    pub report: ScpReport,
    pub size_formula: ProblemSize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunValidation {
    pub mode: Mode,
    pub training: MembershipReport,
    pub held_out: MembershipReport,
    pub nlmi: NlmiReport,
    pub inclusions: InclusionReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidateArtifact {
    pub seed: u64,
    pub validation_seed: u64,
    pub theta: f64,
    pub runs: Vec<RunValidation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpcRun {
    pub index: usize,
    pub plant_seed: u64,
    pub x0: [f64; 2],
    pub steps: usize,
    pub first_infeasible: Option<usize>,
    pub constraint_violations: usize,
    pub disturbance_flags: usize,
    pub tube_exits: usize,
    /// Tube exits on steps whose disturbance was inside `W`.
    pub unexplained_exits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpcSummary {
    pub seed: u64,
    pub mode: Mode,
    pub horizon: usize,
    pub dare_residual: f64,
    pub runs: Vec<MpcRun>,
    pub feasible_fraction: f64,
}

/// Artifact paths below one output directory.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub dir: PathBuf,
}

impl Artifacts {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn ensure(&self, stage: Stage) -> Result<(), Failure> {
        std::fs::create_dir_all(&self.dir)
            .map_err(|e| Failure::bad_input(stage, format!("{}: {e}", self.dir.display())))
    }

    fn record_config(&self, stage: Stage, cfg: &Config) -> Result<(), Failure> {
        self.ensure(stage)?;
        io::write_text(stage, &self.path(CONFIG), &cfg.to_toml())
    }
}

fn transitions(stage: Stage, d: &tubeid_core::plant::Dataset) -> Result<TransitionSet, Failure> {
    build_transitions(d).map_err(|e| Failure::bad_input(stage, e.to_string()))
}

pub fn gen_data(cfg: &Config, art: &Artifacts) -> Result<DataMeta, Failure> {
    let stage = Stage::GenData;
    art.record_config(stage, cfg)?;
    let sim = |seed: u64, n: usize| {
        simulate_msd(&cfg.plant(seed), n, &cfg.excitation_policy(), cfg.x0, cfg.u_max)
            .map_err(|e| Failure::bad_input(stage, e.to_string()))
    };
    let train = sim(cfg.seed, cfg.samples)?;
    let held = sim(cfg.validation_seed(), cfg.validation_samples)?;
    io::write_dataset(stage, &art.path(DATA), &train)?;
    io::write_dataset(stage, &art.path(VALIDATION_DATA), &held)?;
    let meta = DataMeta {
        seed: cfg.seed,
        validation_seed: cfg.validation_seed(),
        samples: cfg.samples,
        validation_samples: cfg.validation_samples,
        excitation: cfg.excitation,
        plant: cfg.plant(cfg.seed),
    };
    io::write_json(stage, &art.path(DATA_META), &meta)?;
    Ok(meta)
}

fn load_training(stage: Stage, cfg: &Config, art: &Artifacts) -> Result<TransitionSet, Failure> {
    let meta: DataMeta = io::read_json(stage, &art.path(DATA_META))?;
    if meta.seed != cfg.seed {
        return Err(Failure::bad_input(
            stage,
            format!("dataset was generated with seed {}, config has {}", meta.seed, cfg.seed),
        ));
    }
    transitions(stage, &io::read_dataset(stage, &art.path(DATA), meta.seed)?)
}

/// Initialization at `cfg.theta` without touching the artifact directory.
pub fn initialize_at(
    stage: Stage,
    cfg: &Config,
    j: &TransitionSet,
    solver: &dyn ConeSolver,
) -> Result<InitArtifact, Failure> {
    let out = initialize(j, &cfg.shapes(), &cfg.init_config(), solver)
        .map_err(|e| Failure::new(stage, classify_init(&e), e.to_string()))?;
    Ok(InitArtifact {
        seed: cfg.seed,
        theta: cfg.theta,
        shapes: out.shapes,
        iterate: out.iterate,
        report: out.report,
    })
}

pub fn init(cfg: &Config, art: &Artifacts, solver: &dyn ConeSolver) -> Result<InitArtifact, Failure> {
    let stage = Stage::Init;
    let j = load_training(stage, cfg, art)?;
    art.record_config(stage, cfg)?;
    let a = initialize_at(stage, cfg, &j, solver)?;
    io::write_json(stage, &art.path(INIT), &a)?;
    Ok(a)
}

/// SCP from an initialization, without touching the artifact directory.
pub fn synthesize_from(
    cfg: &Config,
    init: &InitArtifact,
    j: &TransitionSet,
    mode: Mode,
    solver: &dyn ConeSolver,
) -> Result<SynthArtifact, Failure> {
    let stage = Stage::Synthesize;
    let scfg = cfg.scp_config(mode == Mode::Fixed);
    let report = run_algorithm1(&init.iterate, &init.shapes, j, &scfg, solver)
        .map_err(|e| Failure::solver(stage, e.to_string()))?;
    Ok(SynthArtifact {
        seed: cfg.seed,
        theta: cfg.theta,
        mode,
        reinitialized: false,
        size_formula: symbolic_size(&SizeDims::of(&init.shapes, j.len()), mode == Mode::Fixed),
        shapes: init.shapes.clone(),
        report,
    })
}

fn load_init_for(cfg: &Config, art: &Artifacts, j: &TransitionSet, solver: &dyn ConeSolver) -> Result<(InitArtifact, bool), Failure> {
    let stage = Stage::Synthesize;
    let a: InitArtifact = io::read_json(stage, &art.path(INIT))?;
    if a.seed != cfg.seed {
        return Err(Failure::bad_input(stage, format!("init artifact has seed {}, config has {}", a.seed, cfg.seed)));
    }
    if a.theta == cfg.theta {
        Ok((a, false))
    } else {
        Ok((initialize_at(stage, cfg, j, solver)?, true))
    }
}

fn write_synth(art: &Artifacts, s: &SynthArtifact) -> Result<(), Failure> {
    let stage = Stage::Synthesize;
    io::write_json(stage, &art.path(&s.mode.synth_file()), s)?;
    io::write_iterations(stage, &art.path(&s.mode.iterations_file()), &s.report.records)
}

/// Runs the requested modes concurrently and writes one artifact per mode.
pub fn synthesize(
    cfg: &Config,
    art: &Artifacts,
    modes: &[Mode],
    solver: &dyn ConeSolver,
) -> Result<Vec<SynthArtifact>, Failure> {
    let stage = Stage::Synthesize;
    let j = load_training(stage, cfg, art)?;
    let (init, reinit) = load_init_for(cfg, art, &j, solver)?;
    art.record_config(stage, cfg)?;
    let out: Vec<SynthArtifact> = modes
        .par_iter()
        .map(|&m| synthesize_from(cfg, &init, &j, m, solver).map(|s| SynthArtifact { reinitialized: reinit, ..s }))
        .collect::<Result<_, _>>()?;
    for s in &out {
        write_synth(art, s)?;
    }
    Ok(out)
}

fn present_synths(stage: Stage, art: &Artifacts) -> Result<Vec<SynthArtifact>, Failure> {
    let mut out = Vec::new();
    for m in [Mode::Adaptive, Mode::Fixed] {
        if art.path(&m.synth_file()).exists() {
            out.push(io::read_json(stage, &art.path(&m.synth_file()))?);
        }
    }
    if out.is_empty() {
        return Err(Failure::bad_input(stage, "missing input: no synth_*.json artifacts"));
    }
    Ok(out)
}

pub fn validate(cfg: &Config, art: &Artifacts, solver: &dyn ConeSolver) -> Result<ValidateArtifact, Failure> {
    let stage = Stage::Validate;
    let meta: DataMeta = io::read_json(stage, &art.path(DATA_META))?;
    let j = load_training(stage, cfg, art)?;
    let held = transitions(stage, &io::read_dataset(stage, &art.path(VALIDATION_DATA), meta.validation_seed)?)?;
    let synths = present_synths(stage, art)?;
    art.record_config(stage, cfg)?;
    let mut runs = Vec::new();
    for s in &synths {
        let it = &s.report.final_iterate;
        let inclusions = check_inclusions(it, &s.shapes, solver).map_err(|e| Failure::solver(stage, e.to_string()))?;
        runs.push(RunValidation {
            mode: s.mode,
            training: check_membership(&it.model, &j, &s.shapes.F, s.theta, MEMBERSHIP_TOL),
            held_out: check_membership(&it.model, &held, &s.shapes.F, s.theta, MEMBERSHIP_TOL),
            nlmi: check_nlmi(it, &s.shapes),
            inclusions,
        });
    }
    let a = ValidateArtifact {
        seed: cfg.seed,
        validation_seed: meta.validation_seed,
        theta: cfg.theta,
        runs,
    };
    io::write_json(stage, &art.path(VALIDATE), &a)?;
    if let Some(r) = a
        .runs
        .iter()
        .find(|r| !r.training.feasible() || !r.nlmi.feasible() || !r.inclusions.holds(1e-7))
    {
        return Err(Failure::infeasible(stage, format!("{} result fails its certificates", r.mode.tag())));
    }
    Ok(a)
}

/// Closed-loop runs from states sampled uniformly in `X_t`.
pub fn mpc_runs(
    cfg: &Config,
    s: &SynthArtifact,
    solver: &dyn ConeSolver,
) -> Result<(MpcSummary, Vec<tubeid_core::tube_mpc::Trajectory>), Failure> {
    let stage = Stage::MpcSim;
    let prob = TubeMpcProblem::new(&s.report.final_iterate, &s.shapes, cfg.horizon, solver)
        .map_err(|e| Failure::infeasible(stage, e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x0s = prob
        .terminal
        .sample_uniform(solver, &mut rng, cfg.mpc_runs)
        .map_err(|e| Failure::solver(stage, e.to_string()))?;
    let results: Vec<_> = x0s
        .par_iter()
        .enumerate()
        .map(|(k, x0)| {
            let plant_seed = cfg.seed.wrapping_mul(10_000).wrapping_add(k as u64);
            let mut plant = MsdPlant::new(cfg.plant(plant_seed));
            let mut step = |x: &Vector, u: &Vector| Vector::from_row_slice(&plant.step([x[0], x[1]], u[0]));
            simulate_closed_loop(&prob, x0, cfg.mpc_steps, &mut step, solver)
                .map(|tr| (k, plant_seed, tr))
                .map_err(|e| Failure::solver(stage, e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let runs: Vec<MpcRun> = results
        .iter()
        .map(|(k, seed, tr)| MpcRun {
            index: *k,
            plant_seed: *seed,
            x0: [x0s[*k][0], x0s[*k][1]],
            steps: tr.rows.len(),
            first_infeasible: tr.first_infeasible(),
            constraint_violations: tr.constraint_violations(),
            disturbance_flags: tr.disturbance_flags(),
            tube_exits: tr.rows.iter().filter(|r| r.feasible && !r.contained).count(),
            unexplained_exits: tr.unexplained_exits(),
        })
        .collect();
    let feasible = runs.iter().filter(|r| r.first_infeasible.is_none()).count();
    let summary = MpcSummary {
        seed: cfg.seed,
        mode: s.mode,
        horizon: cfg.horizon,
        dare_residual: prob.dare_residual().map_err(|e| Failure::solver(stage, e.to_string()))?,
        feasible_fraction: feasible as f64 / runs.len().max(1) as f64,
        runs,
    };
    Ok((summary, results.into_iter().map(|(_, _, tr)| tr).collect()))
}

pub fn mpc_sim(cfg: &Config, art: &Artifacts, solver: &dyn ConeSolver) -> Result<MpcSummary, Failure> {
    let stage = Stage::MpcSim;
    let synths = present_synths(stage, art)?;
    let s = &synths[0];
    art.record_config(stage, cfg)?;
    let (summary, trajs) = mpc_runs(cfg, s, solver)?;
    for (k, tr) in trajs.iter().enumerate() {
        io::write_trajectory(stage, &art.path(&format!("traj_{k:02}.csv")), tr)?;
    }
    io::write_json(stage, &art.path(MPC_SUMMARY), &summary)?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta: f64,
    pub init_objective: f64,
    pub objective: f64,
    pub iterations: usize,
    pub termination: String,
}

/// Initialization plus adaptive SCP at each θ̂; failures become NaN rows.
pub fn theta_sweep(cfg: &Config, j: &TransitionSet, thetas: &[f64], solver: &dyn ConeSolver) -> Vec<SweepRow> {
    thetas
        .par_iter()
        .map(|&theta| {
            let c = Config { theta, ..cfg.clone() };
            let res = initialize_at(Stage::Synthesize, &c, j, solver)
                .and_then(|i| synthesize_from(&c, &i, j, Mode::Adaptive, solver).map(|s| (i, s)));
            match res {
                Ok((i, s)) => SweepRow {
                    theta,
                    init_objective: i.report.objective,
                    objective: s.report.final_objective(),
                    iterations: s.report.records.len() - 1,
                    termination: format!("{:?}", s.report.termination),
                },
                Err(e) => SweepRow {
                    theta,
                    init_objective: f64::NAN,
                    objective: f64::NAN,
                    iterations: 0,
                    termination: format!("failed: {}", e.msg),
                },
            }
        })
        .collect()
}

pub fn sweep(cfg: &Config, art: &Artifacts, solver: &dyn ConeSolver) -> Result<Vec<SweepRow>, Failure> {
    let stage = Stage::Synthesize;
    let j = load_training(stage, cfg, art)?;
    let rows = theta_sweep(cfg, &j, &cfg.theta_sweep, solver);
    let mut w = csv::Writer::from_path(art.path(THETA_SWEEP))
        .map_err(|e| Failure::bad_input(stage, e.to_string()))?;
    for r in &rows {
        w.serialize(r).map_err(|e| Failure::bad_input(stage, e.to_string()))?;
    }
    w.flush().map_err(|e| Failure::bad_input(stage, e.to_string()))?;
    Ok(rows)
}

/// All stages in order. `only` restricts to a single stage.
pub fn run(cfg: &Config, art: &Artifacts, only: Option<Stage>, solver: &dyn ConeSolver) -> Result<(), Failure> {
    let wants = |s: Stage| only.is_none_or(|o| o == s);
    if wants(Stage::GenData) {
        gen_data(cfg, art)?;
    }
    if wants(Stage::Init) {
        init(cfg, art, solver)?;
    }
    if wants(Stage::Synthesize) {
        let modes: &[Mode] = if cfg.compare_fixed { &[Mode::Adaptive, Mode::Fixed] } else { &[Mode::Adaptive] };
        synthesize(cfg, art, modes, solver)?;
        if only.is_none() && !cfg.theta_sweep.is_empty() {
            sweep(cfg, art, solver)?;
        }
    }
    if wants(Stage::Validate) {
        validate(cfg, art, solver)?;
    }
    if wants(Stage::MpcSim) {
        mpc_sim(cfg, art, solver)?;
    }
    if wants(Stage::Report) {
        crate::report::emit_report(art)?;
    }
    Ok(())
}

pub(crate) fn termination_label(t: Termination) -> &'static str {
    match t {
        Termination::Converged => "converged",
        Termination::MaxIters => "iteration budget",
        Termination::SolverFailure => "solver failure",
        Termination::RecoveryInfeasible => "recovered point infeasible",
        Termination::CostIncrease => "cost increase",
    }
}

