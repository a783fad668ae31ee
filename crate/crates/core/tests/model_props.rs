mod common;

use proptest::prelude::*;
use tubeid_core::linalg::{min_eig_sym, Mat};
use tubeid_core::lmi::{n_form, underestimate_L_value};
use tubeid_core::model_set::{certify_offsets, check_membership, ModelTriple};
use tubeid_core::plant::TransitionSet;
use tubeid_core::polytope::uniform_normals;

fn mat(rows: usize, cols: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-2.0..2.0f64, rows * cols).prop_map(move |v| Mat::from_row_slice(rows, cols, &v))
}

/// `GGᵀ + cI`, comfortably positive definite.
fn pd(n: usize) -> impl Strategy<Value = Mat> {
    (mat(n, n), 0.2..3.0f64).prop_map(move |(g, c)| &g * g.transpose() + Mat::identity(n, n) * c)
}

fn training() -> &'static TransitionSet {
    &common::small_init().0
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    // LᵀD⁻¹L is jointly convex in (L, D), so its tangent at any point is a
    // global lower bound, tight at the point itself.
    #[test]
    fn tangent_never_exceeds_the_quadratic_form(
        l0 in mat(3, 2), d0 in pd(3), l in mat(3, 2), d in pd(3)
    ) {
        let exact = n_form(&l, &d).unwrap();
        let tangent = underestimate_L_value(&l0, &d0, &l, &d).unwrap();
        let gap = &exact - &tangent;
        let gap = (&gap + gap.transpose()) * 0.5;
        prop_assert!(min_eig_sym(&gap) >= -1e-8 * (1.0 + exact.norm()), "{}", min_eig_sym(&gap));

        let at = underestimate_L_value(&l0, &d0, &l0, &d0).unwrap();
        prop_assert!((at - n_form(&l0, &d0).unwrap()).amax() <= 1e-9 * (1.0 + at_scale(&l0, &d0)));
    }

    #[test]
    fn certified_offsets_explain_every_triple(
        a in mat(2, 2), b in mat(2, 1), scale in 0.0..0.05f64, theta in 0.0..5e-3f64
    ) {
        let j = training();
        let f = uniform_normals(10);
        let (_, base) = common::small_init();
        let m = ModelTriple {
            A: &base.iterate.model.A + a * scale,
            B: &base.iterate.model.B + b * scale,
            d: base.iterate.model.d.clone() * 0.5,
        };
        let d = certify_offsets(&m, j, &f, theta);
        prop_assert!(d.iter().zip(m.d.iter()).all(|(new, old)| new >= old));
        let cert = ModelTriple { d, ..m };
        let rep = check_membership(&cert, j, &f, theta, 1e-12);
        prop_assert!(rep.violating_triples.is_empty(), "worst slack {}", rep.worst_slack);
        // Minimality: each offset is attained by some triple or kept from the input.
        let kappa = rep.kappa;
        for i in 0..f.nrows() {
            let best = (0..j.len())
                .map(|t| kappa + (f.row(i) * cert.residual(j, t))[0].abs())
                .fold(0.0, f64::max);
            prop_assert!(cert.d[i] == best.max(base.iterate.model.d[i] * 0.5));
        }
    }
}

fn at_scale(l: &Mat, d: &Mat) -> f64 {
    n_form(l, d).unwrap().amax()
}
