use tempfile::TempDir;
use tubeid::pipeline::{self, Artifacts, SweepRow, THETA_SWEEP};
use tubeid::{Config, Kind, Stage};
use tubeid_core::clarabel_backend::ClarabelSolver;

fn small() -> Config {
    Config {
        samples: 300,
        validation_samples: 300,
        max_iters: 1,
        compare_fixed: false,
        mpc_runs: 2,
        mpc_steps: 5,
        ..Config::default()
    }
}

#[test]
fn theta_sweep_writes_one_row_per_value() {
    let tmp = TempDir::new().unwrap();
    let cfg = Config { theta_sweep: vec![1e-3, 1.3e-3, 1e3], ..small() };
    let art = Artifacts::new(tmp.path());
    pipeline::run(&cfg, &art, None, &ClarabelSolver::default()).unwrap();

    let mut r = csv::Reader::from_path(art.path(THETA_SWEEP)).unwrap();
    let rows: Vec<SweepRow> = r.deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.iter().map(|r| r.theta).collect::<Vec<_>>(), cfg.theta_sweep);
    for row in &rows[..2] {
        assert!(row.objective.is_finite() && row.objective <= row.init_objective + 1e-6, "{row:?}");
    }
    // A huge θ̂ leaves no room for the tube; the failure is recorded, not fatal.
    assert!(rows[2].objective.is_nan() && rows[2].termination.starts_with("failed"));
}

#[test]
fn synthesis_at_a_new_theta_reinitializes_in_memory() {
    let tmp = TempDir::new().unwrap();
    let art = Artifacts::new(tmp.path());
    let s = ClarabelSolver::default();
    let cfg = small();
    pipeline::gen_data(&cfg, &art).unwrap();
    let init = pipeline::init(&cfg, &art, &s).unwrap();
    let moved = Config { theta: 1.2e-3, ..cfg.clone() };
    let out = pipeline::synthesize(&moved, &art, &[pipeline::Mode::Adaptive], &s).unwrap();
    assert!(out[0].reinitialized && out[0].theta == 1.2e-3);
    assert_eq!(init.theta, 1e-3);
    let same = pipeline::synthesize(&cfg, &art, &[pipeline::Mode::Adaptive], &s).unwrap();
    assert!(!same[0].reinitialized);
}

#[test]
fn validate_without_synthesis_names_the_stage() {
    let tmp = TempDir::new().unwrap();
    let art = Artifacts::new(tmp.path());
    let cfg = small();
    pipeline::gen_data(&cfg, &art).unwrap();
    let e = pipeline::validate(&cfg, &art, &ClarabelSolver::default()).unwrap_err();
    assert_eq!((e.stage, e.kind), (Stage::Validate, Kind::BadInput));
}
