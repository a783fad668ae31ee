//! Interior-point backend built on Clarabel.

use std::panic::{catch_unwind, AssertUnwindSafe};

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, PSDTriangleConeT,
    SolverStatus, SupportedConeT, ZeroConeT,
};
use serde::{Deserialize, Serialize};

use crate::cone::{AssembledProgram, ConeSolver, ConeSpec, SolveResult, SolveStatus};


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClarabelSolver {
    pub tol_feas: f64,
    pub tol_gap_abs: f64,
    pub tol_gap_rel: f64,
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for ClarabelSolver {
    fn default() -> Self {
        Self {
            tol_feas: 1e-10,
            tol_gap_abs: 1e-10,
            tol_gap_rel: 1e-10,
            max_iter: 400,
            verbose: false,
        }
    }
}

fn csc(m: usize, n: usize, t: &[(usize, usize, f64)]) -> CscMatrix<f64> {
    if t.is_empty() {
        return CscMatrix::zeros((m, n));
    }
    let (i, j, v) = t.iter().fold(
        (Vec::with_capacity(t.len()), Vec::with_capacity(t.len()), Vec::with_capacity(t.len())),
        |(mut i, mut j, mut v), &(r, c, x)| {
            i.push(r);
            j.push(c);
            v.push(x);
            (i, j, v)
        },
    );
    CscMatrix::new_from_triplets(m, n, i, j, v)
}

impl ConeSolver for ClarabelSolver {
    fn solve_assembled(&self, p: &AssembledProgram) -> SolveResult {
        let P = csc(p.n, p.n, &p.p_triplets);
        let A = csc(p.m, p.n, &p.a_triplets);
        let cones: Vec<SupportedConeT<f64>> = p
            .cones
            .iter()
            .map(|c| match *c {
                ConeSpec::Zero(k) => ZeroConeT(k),
                ConeSpec::Nonnegative(k) => NonnegativeConeT(k),
                ConeSpec::Psd(d) => PSDTriangleConeT(d),
            })
            .collect();
        let settings = match DefaultSettingsBuilder::default()
            .verbose(self.verbose)
            .tol_feas(self.tol_feas)
            .tol_gap_abs(self.tol_gap_abs)
            .tol_gap_rel(self.tol_gap_rel)
            .max_iter(self.max_iter)
            .build()
        {
            Ok(s) => s,
            Err(_) => return SolveResult::failed(SolveStatus::NumericalTrouble),
        };

        let run = catch_unwind(AssertUnwindSafe(|| {
            let mut solver = DefaultSolver::new(&P, &p.q, &A, &p.b, &cones, settings).ok()?;
            solver.solve();
            Some(solver.solution)
        }));
        let Ok(Some(sol)) = run else {
            return SolveResult::failed(SolveStatus::NumericalTrouble);
        };

        let (status, reduced) = match sol.status {
            SolverStatus::Solved => (SolveStatus::Optimal, false),
            SolverStatus::AlmostSolved => (SolveStatus::Optimal, true),
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                (SolveStatus::Infeasible, false)
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                (SolveStatus::Unbounded, false)
            }
            _ => (SolveStatus::NumericalTrouble, false),
        };
        let optimal = status == SolveStatus::Optimal && sol.x.iter().all(|v| v.is_finite());
        SolveResult {
            status: if status == SolveStatus::Optimal && !optimal {
                SolveStatus::NumericalTrouble
            } else {
                status
            },
            objective: if optimal {
                sol.obj_val + p.objective_constant
            } else {
                f64::NAN
            },
            x: optimal.then_some(sol.x),
            iterations: sol.iterations,
            solve_time: sol.solve_time,
            reduced_accuracy: reduced,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::{Affine, ConeProgram, VarKind};
    use crate::linalg::Mat;

    #[test]
    fn min_trace_with_identity_lower_bound() {
        for n in 1..=4 {
            let mut p = ConeProgram::new(0.0);
            let x = p.add_block("X", n, n, VarKind::Symmetric);
            let mut tr = Affine::default();
            for i in 0..n {
                tr = tr.plus(&p.entry(x, i, i));
            }
            p.set_objective(tr);
            p.add_psd("X-I", p.expr(x).add_const(&(-Mat::identity(n, n))));
            let r = ClarabelSolver::default().solve(&p).unwrap();
            assert_eq!(r.status, SolveStatus::Optimal);
            assert!((r.objective - n as f64).abs() < 1e-7, "n={n}: {}", r.objective);
        }
    }

    #[test]
    fn infeasible_lp() {
        let mut p = ConeProgram::default();
        let x = p.add_block("x", 1, 1, VarKind::Free);
        let e = p.entry(x, 0, 0);
        p.add_le(&Affine::constant(1.0), &e);
        p.add_le(&e, &Affine::constant(0.0));
        let r = ClarabelSolver::default().solve(&p).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.x.is_none());
    }

    #[test]
    fn unbounded_lp() {
        let mut p = ConeProgram::default();
        let x = p.add_block("x", 1, 1, VarKind::Nonnegative);
        p.set_objective(p.entry(x, 0, 0).scaled(-1.0));
        let r = ClarabelSolver::default().solve(&p).unwrap();
        assert_eq!(r.status, SolveStatus::Unbounded);
    }

    #[test]
    fn quadratic_objective_minimizer() {
        // min ½·2·(x−1)² ⇒ x = 1
        let mut p = ConeProgram::default();
        let x = p.add_block("x", 1, 1, VarKind::Free);
        let i = p.index(x, 0, 0).unwrap();
        p.add_quadratic(i, i, 2.0);
        p.set_objective(Affine {
            terms: vec![(i, -2.0)],
            constant: 1.0,
        });
        let r = ClarabelSolver::default().solve(&p).unwrap();
        assert!((r.x.unwrap()[0] - 1.0).abs() < 1e-7);
        assert!(r.objective.abs() < 1e-7);
    }

    #[test]
    fn psd_margin_is_enforced() {
        let mut p = ConeProgram::new(1e-3);
        let x = p.add_block("X", 2, 2, VarKind::Symmetric);
        p.set_objective(p.entry(x, 0, 0).plus(&p.entry(x, 1, 1)));
        p.add_psd("X", p.expr(x));
        let r = ClarabelSolver::default().solve(&p).unwrap();
        assert!((r.objective - 2e-3).abs() < 1e-8);
        let eig = p.psd_min_eigs(r.primal().unwrap());
        assert!(eig[0].1 >= 1e-3 - 1e-8);
    }
}
