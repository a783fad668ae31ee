mod common;

use tubeid_core::inclusion::{check_inclusions, sum_membership_slack};
use tubeid_core::linalg::Vector;
use tubeid_core::polytope::SymPolytope;

use common::{small_init, solver};

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

#[test]
fn perturbing_one_set_breaks_the_matching_certificate() {
    let (_, out) = small_init();
    let s = solver();
    let base = &out.iterate;

    // A tube half as large cannot absorb the disturbance.
    let mut it = base.clone();
    it.b_tube *= 0.5;
    assert!(min(&check_inclusions(&it, &out.shapes, &s).unwrap().rpi) < 0.0);

    // Inflating the terminal set pushes ΔX ⊕ X_t out of X.
    let mut it = base.clone();
    it.b_term *= 10.0;
    let rep = check_inclusions(&it, &out.shapes, &s).unwrap();
    assert!(min(&rep.state) < 0.0);
    assert!(min(&rep.rpi) >= -1e-7);

    // The cover certificate is active at the start, so any shrink breaks it.
    let mut it = base.clone();
    it.eps_cover *= 0.9;
    assert!(min(&check_inclusions(&it, &out.shapes, &s).unwrap().cover) < 0.0);
}

#[test]
fn membership_slack_matches_a_box_oracle() {
    // [−1,1]² ⊕ [−0.5,0.5]² = [−1.5,1.5]². Both offsets move by t, so per
    // coordinate |x_c| ≤ 1.5 + 2t with t ≥ −0.5 keeping the small box nonempty.
    let s = solver();
    let a = SymPolytope::hypercube(2, 1.0);
    let b = SymPolytope::hypercube(2, 0.5);
    for (x, y) in [(0.0, 0.0), (1.4, -0.2), (1.5, 1.5), (2.0, 0.3), (-3.5, 1.0)] {
        let p = Vector::from_row_slice(&[x, y]);
        let want = ((1.5 - p.amax()) / 2.0).min(0.5);
        let got = sum_membership_slack(&p, &a, &b, &s).unwrap();
        assert!((got - want).abs() < 1e-7, "{x},{y}: {got} vs {want}");
    }
}
