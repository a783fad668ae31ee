#![allow(dead_code)]

use std::sync::OnceLock;

use tubeid_core::clarabel_backend::ClarabelSolver;
use tubeid_core::init::{initialize, InitConfig, InitOutput};
use tubeid_core::plant::{build_transitions, simulate_msd, InputPolicy, MsdParams, TransitionSet};
use tubeid_core::setup::FixedShapes;

pub fn solver() -> ClarabelSolver {
    ClarabelSolver::default()
}

pub fn msd_data(seed: u64, samples: usize) -> TransitionSet {
    let p = MsdParams { rng_seed: seed, ..MsdParams::default() };
    let d = simulate_msd(&p, samples, &InputPolicy::Uniform { bound: 2.0 }, [0.0, 0.0], 2.5).unwrap();
    build_transitions(&d).unwrap()
}

/// Initialization on 300 samples of the example plant, shared per test binary.
pub fn small_init() -> &'static (TransitionSet, InitOutput) {
    static CELL: OnceLock<(TransitionSet, InitOutput)> = OnceLock::new();
    CELL.get_or_init(|| {
        let j = msd_data(11, 300);
        let out = initialize(&j, &FixedShapes::paper_default(), &InitConfig::default(), &solver()).unwrap();
        (j, out)
    })
}
