use std::fmt;

use thiserror::Error;
use tubeid_core::cone::SolveStatus;
use tubeid_core::init::InitError;
use tubeid_core::model_set::ModelSetError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Stage {
    Config,
    GenData,
    Init,
    Synthesize,
    Validate,
    MpcSim,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::GenData => "gen-data",
            Stage::Init => "init",
            Stage::Synthesize => "synthesize",
            Stage::Validate => "validate",
            Stage::MpcSim => "mpc-sim",
            Stage::Report => "report",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Infeasible,
    Solver,
    BadInput,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Infeasible => 2,
            Kind::Solver => 3,
            Kind::BadInput => 4,
        }
    }
}

#[derive(Debug, Error)]
#[error("{stage}: {msg}")]
pub struct Failure {
    pub stage: Stage,
    pub kind: Kind,
    pub msg: String,
}

impl Failure {
    pub fn new(stage: Stage, kind: Kind, msg: impl Into<String>) -> Self {
        Self {
            stage,
            kind,
            msg: msg.into(),
        }
    }

    pub fn bad_input(stage: Stage, msg: impl Into<String>) -> Self {
        Self::new(stage, Kind::BadInput, msg)
    }

    pub fn infeasible(stage: Stage, msg: impl Into<String>) -> Self {
        Self::new(stage, Kind::Infeasible, msg)
    }

    pub fn solver(stage: Stage, msg: impl Into<String>) -> Self {
        Self::new(stage, Kind::Solver, msg)
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

fn status_kind(s: SolveStatus) -> Kind {
    match s {
        SolveStatus::Infeasible | SolveStatus::Unbounded => Kind::Infeasible,
        _ => Kind::Solver,
    }
}

pub fn classify_init(e: &InitError) -> Kind {
    match e {
        InitError::ModelSet(ModelSetError::Infeasible { .. })
        | InitError::Unstable(_)
        | InitError::ConstraintViolation(_)
        | InitError::EmptyTightening
        | InitError::NonFiniteDetermination(_)
        | InitError::TerminalNotInvariant => Kind::Infeasible,
        InitError::Step5 { status, .. } => status_kind(*status),
        _ => Kind::Solver,
    }
}
