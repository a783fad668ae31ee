mod common;

use tubeid_core::cone::SolveStatus;
use tubeid_core::inclusion::check_inclusions;
use tubeid_core::lmi::{build_scp_lmis, check_nlmi, encode_point};
use tubeid_core::model_set::check_membership;
use tubeid_core::scp::{build_sdp, run_algorithm1, symbolic_size, ScpConfig, SizeDims, Termination};
use tubeid_core::EPS_PSD;

use common::{small_init, solver};

#[test]
fn init_point_passes_every_certificate() {
    let (j, out) = small_init();
    let it = &out.iterate;
    assert!(check_nlmi(it, &out.shapes).feasible());
    assert!(check_membership(&it.model, j, &out.shapes.F, 1e-3, 1e-12).feasible());
    let inc = check_inclusions(it, &out.shapes, &solver()).unwrap();
    assert!(inc.holds(1e-7), "worst inclusion slack {}", inc.worst());
    assert!((out.report.objective - it.objective(&out.shapes.weights)).abs() < 1e-12);
}

#[test]
fn lifted_lmis_are_satisfied_at_their_linearization_point() {
    // exact at the current point, so the lifted blocks reproduce the NLMI values
    let (_, out) = small_init();
    let (p, v) = build_scp_lmis(&out.iterate, &out.shapes, 0.0).unwrap();
    let x = encode_point(&p, &v, &out.iterate);
    let worst = p.psd_min_eigs(&x).into_iter().map(|(_, e)| e).fold(f64::INFINITY, f64::min);
    assert!(worst >= -1e-9, "lifted min eigenvalue {worst}");
}

#[test]
fn short_run_is_monotone_and_feasible() {
    let (j, out) = small_init();
    for fix_model in [false, true] {
        let cfg = ScpConfig { max_iters: 3, fix_model, ..ScpConfig::default() };
        let rep = run_algorithm1(&out.iterate, &out.shapes, j, &cfg, &solver()).unwrap();
        assert!(rep.monotone(1e-6));
        assert!(rep.records.len() >= 2, "no step accepted: {:?}", rep.termination);
        for (rec, it) in rep.records.iter().zip(&rep.iterates) {
            let nl = check_nlmi(it, &out.shapes);
            assert!(nl.worst() >= EPS_PSD - 1e-9, "iter {} worst {}", rec.iter, nl.worst());
            let obj = it.objective(&out.shapes.weights);
            assert!((obj - rec.objective).abs() <= 1e-8 * obj.abs());
            let mem = check_membership(&it.model, j, &out.shapes.F, cfg.theta, 1e-12);
            assert!(mem.feasible(), "fix {fix_model} iter {} {mem:?}", rec.iter);
        }
        assert_eq!(rep.final_iterate, *rep.iterates.last().unwrap());
        if fix_model {
            assert_eq!(rep.final_iterate.model, out.iterate.model);
        }
    }
}

#[test]
fn zero_iteration_budget_reports_only_the_start() {
    let (j, out) = small_init();
    let cfg = ScpConfig { max_iters: 0, ..ScpConfig::default() };
    let rep = run_algorithm1(&out.iterate, &out.shapes, j, &cfg, &solver()).unwrap();
    assert_eq!(rep.records.len(), 1);
    assert_eq!(rep.final_iterate, out.iterate);
    assert_eq!(rep.termination, Termination::MaxIters);
    assert_eq!(rep.records[0].status, SolveStatus::Optimal);
}

#[test]
fn size_formula_matches_the_assembled_program() {
    let (j, out) = small_init();
    for fix_model in [false, true] {
        let cfg = ScpConfig { fix_model, ..ScpConfig::default() };
        let (p, _) = build_sdp(&out.iterate, &out.shapes, j, &cfg, EPS_PSD).unwrap();
        let dims = SizeDims::of(&out.shapes, j.len());
        assert_eq!(p.problem_size(), symbolic_size(&dims, fix_model));
    }
}

#[test]
fn size_formula_at_example_dimensions() {
    let dims = SizeDims {
        nx: 2,
        nu: 1,
        mw: 10,
        m_tube: 10,
        m_term: 15,
        m_eps: 10,
        mx: 2,
        mu: 1,
        n_vertices: 4,
        n_triples: 999,
    };
    let s = symbolic_size(&dims, false);
    assert_eq!(s.equalities, 8);
    assert_eq!(s.lmi_rows, 663);
    assert_eq!(s.inequalities, 20300);
    assert_eq!(s.scalar_variables, 639);
}
