mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tubeid_core::linalg::{Mat, Vector};
use tubeid_core::polytope::{uniform_normals, SymPolytope};

use common::solver;

/// Planar symmetric polytope: the two axes plus `extra` random normals, so it
/// is always bounded.
fn planar() -> impl Strategy<Value = SymPolytope> {
    (
        prop::collection::vec(0.0..std::f64::consts::PI, 0..5),
        prop::collection::vec(0.1..2.0f64, 7),
    )
        .prop_map(|(angles, offs)| {
            let m = 2 + angles.len();
            let normals = Mat::from_fn(m, 2, |i, j| match i {
                0 => [1.0, 0.0][j],
                1 => [0.0, 1.0][j],
                _ => {
                    let a = angles[i - 2];
                    if j == 0 { a.cos() } else { a.sin() }
                }
            });
            SymPolytope::new(normals, Vector::from_iterator(m, offs.into_iter().take(m))).unwrap()
        })
}

fn direction() -> impl Strategy<Value = Vector> {
    (0.0..std::f64::consts::TAU).prop_map(|a| Vector::from_row_slice(&[a.cos(), a.sin()]))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn vertices_are_inside_and_attain_the_support(p in planar(), d in direction()) {
        let s = solver();
        let verts = p.vertices_2d().unwrap();
        prop_assert!(verts.len() >= 4 && verts.len() % 2 == 0);
        for v in &verts {
            prop_assert!(p.contains(&Vector::from_row_slice(v), 1e-9));
        }
        let by_lp = p.support(&s, &d).unwrap();
        let by_vertex = verts.iter().map(|v| d[0] * v[0] + d[1] * v[1]).fold(f64::MIN, f64::max);
        prop_assert!((by_lp - by_vertex).abs() <= 1e-6 * (1.0 + by_vertex.abs()), "{by_lp} vs {by_vertex}");
    }

    #[test]
    fn support_is_positively_homogeneous(p in planar(), d in direction(), c in 0.1..5.0f64) {
        let s = solver();
        let h = p.support(&s, &d).unwrap();
        prop_assert!((p.scaled(c).unwrap().support(&s, &d).unwrap() - c * h).abs() <= 1e-6 * (1.0 + c * h));
        prop_assert!((p.support(&s, &(&d * c)).unwrap() - c * h).abs() <= 1e-6 * (1.0 + c * h));
    }

    #[test]
    fn sum_support_is_additive_on_template_normals(p in planar(), q in planar()) {
        let s = solver();
        let t = uniform_normals(12);
        let sum = p.minkowski_sum(&s, &q, Some(&t)).unwrap();
        let hp = p.support_rows(&s, &t).unwrap();
        let hq = q.support_rows(&s, &t).unwrap();
        let hs = sum.support_rows(&s, &t).unwrap();
        for i in 0..t.nrows() {
            prop_assert!((hs[i] - hp[i] - hq[i]).abs() <= 1e-6 * (1.0 + hs[i]));
        }
        // Every p + q with p, q vertices lies in the outer approximation.
        for a in p.vertices_2d().unwrap() {
            for b in q.vertices_2d().unwrap() {
                let x = Vector::from_row_slice(&[a[0] + b[0], a[1] + b[1]]);
                prop_assert!(sum.contains(&x, 1e-7));
            }
        }
    }

    #[test]
    fn difference_plus_subtrahend_stays_inside(p in planar(), q in planar(), shrink in 0.05..0.4f64) {
        let s = solver();
        let q = q.scaled(shrink).unwrap();
        if let Ok(diff) = p.minkowski_diff(&s, &q) {
            for a in diff.vertices_2d().unwrap() {
                for b in q.vertices_2d().unwrap() {
                    let x = Vector::from_row_slice(&[a[0] + b[0], a[1] + b[1]]);
                    prop_assert!(p.contains(&x, 1e-6), "violation {}", p.violation(&x));
                }
            }
        }
    }

    #[test]
    fn auto_support_agrees_with_lp(p in planar()) {
        let s = solver();
        let t = uniform_normals(9);
        let a = p.support_rows(&s, &t).unwrap();
        let b = p.support_rows_auto(&s, &t).unwrap();
        prop_assert!((a - b).amax() <= 1e-6);
    }

    #[test]
    fn uniform_samples_lie_inside(p in planar(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in p.sample_uniform(&solver(), &mut rng, 50).unwrap() {
            prop_assert!(p.contains(&x, 0.0));
        }
    }
}

#[test]
fn uniform_samples_cover_the_box_evenly() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pts = SymPolytope::hypercube(2, 1.0).sample_uniform(&solver(), &mut rng, 4000).unwrap();
    let right = pts.iter().filter(|x| x[0] > 0.0).count() as f64 / pts.len() as f64;
    let top_right = pts.iter().filter(|x| x[0] > 0.5 && x[1] > 0.5).count() as f64 / pts.len() as f64;
    assert!((right - 0.5).abs() < 0.03, "{right}");
    assert!((top_right - 0.0625).abs() < 0.015, "{top_right}");
}
