//! The data-consistent model set Σ̂_T as linear rows over `(A, B, d, Z, λ)`.
//!
//! For every triple `z = (x, u, x₊)` and facet `i`:
//! `−d_i + λθ̂ ≤ F_i(x₊ − Ax − Bu) ≤ d_i − λθ̂`, with `−Z ≤ F[−A −B I] ≤ Z`,
//! `Σ_j Z_ij ≤ λ` and `d ≥ λθ̂·1 + ε_pos`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cone::{Affine, BlockId, ConeError, ConeProgram, ConeSolver, SolveStatus, VarKind};
use crate::linalg::{hstack, inf_norm, Mat, Vector};
use crate::plant::TransitionSet;
use crate::EPS_POS;

/// Default tolerance for membership checks of LP-computed models.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelSetError {
    #[error("Σ̂_T is empty for θ̂ = {theta} (LP status {status:?})")]
    Infeasible { theta: f64, status: SolveStatus },
    #[error("model LP failed with status {0:?}")]
    Solver(SolveStatus),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
    #[error(transparent)]
    Cone(#[from] ConeError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelTriple {
    #[serde(with = "crate::linalg::serde_mat")]
    pub A: Mat,
    #[serde(with = "crate::linalg::serde_mat")]
    pub B: Mat,
    #[serde(with = "crate::linalg::serde_vec")]
    pub d: Vector,
}

impl ModelTriple {
    pub fn nx(&self) -> usize {
        self.A.nrows()
    }

    pub fn nu(&self) -> usize {
        self.B.ncols()
    }

    /// `ζ(A, B, z) = x₊ − Ax − Bu` for triple `t`.
    pub fn residual(&self, j: &TransitionSet, t: usize) -> Vector {
        let x = Vector::from_row_slice(j.x(t));
        let u = Vector::from_row_slice(j.u(t));
        let xp = Vector::from_row_slice(j.x_next(t));
        xp - &self.A * x - &self.B * u
    }

    /// `κ_T / θ̂ = ‖F[−A −B I]‖∞`.
    pub fn lifted_norm(&self, F: &Mat) -> f64 {
        let nx = self.nx();
        let m = hstack(&[&(-&self.A), &(-&self.B), &Mat::identity(nx, nx)]);
        inf_norm(&(F * m))
    }
}

/// Decision-variable blocks for `(A, B, d)`.
#[derive(Clone, Copy, Debug)]
pub struct ModelVars {
    pub A: BlockId,
    pub B: BlockId,
    pub d: BlockId,
}

/// Slack blocks introduced by the Σ̂_T encoding.
#[derive(Clone, Copy, Debug)]
pub struct SigmaVars {
    pub Z: BlockId,
    pub lambda: BlockId,
}

pub fn add_model_vars(p: &mut ConeProgram, nx: usize, nu: usize, mw: usize) -> ModelVars {
    ModelVars {
        A: p.add_block("A", nx, nx, VarKind::Free),
        B: p.add_block("B", nx, nu, VarKind::Free),
        d: p.add_block("d", mw, 1, VarKind::Free),
    }
}

/// Pin `(A, B, d)` to fixed values with equality rows.
pub fn pin_model(p: &mut ConeProgram, v: &ModelVars, m: &ModelTriple) {
    for (id, val) in [(v.A, &m.A), (v.B, &m.B)] {
        for r in 0..val.nrows() {
            for c in 0..val.ncols() {
                p.add_eq(p.entry(id, r, c).minus(&Affine::constant(val[(r, c)])));
            }
        }
    }
    for i in 0..m.d.len() {
        p.add_eq(p.entry(v.d, i, 0).minus(&Affine::constant(m.d[i])));
    }
}

/// `F_i (x₊ − A x − B u)` as an affine expression in `(A, B)`.
fn facet_residual(p: &ConeProgram, v: &ModelVars, F: &Mat, i: usize, j: &TransitionSet, t: usize) -> Affine {
    let (x, u, xp) = (j.x(t), j.u(t), j.x_next(t));
    let nx = x.len();
    let mut e = Affine::constant((0..nx).map(|r| F[(i, r)] * xp[r]).sum());
    for r in 0..nx {
        let f = F[(i, r)];
        if f == 0.0 {
            continue;
        }
        for c in 0..nx {
            e.add_term(p.index(v.A, r, c).unwrap(), -f * x[c]);
        }
        for c in 0..u.len() {
            e.add_term(p.index(v.B, r, c).unwrap(), -f * u[c]);
        }
    }
    e
}

/// Entry `(i, col)` of `F[−A −B I]`.
fn lifted_entry(p: &ConeProgram, v: &ModelVars, F: &Mat, nx: usize, nu: usize, i: usize, col: usize) -> Affine {
    let mut e = Affine::default();
    if col < nx {
        for r in 0..nx {
            e.add_term(p.index(v.A, r, col).unwrap(), -F[(i, r)]);
        }
    } else if col < nx + nu {
        for r in 0..nx {
            e.add_term(p.index(v.B, r, col - nx).unwrap(), -F[(i, r)]);
        }
    } else {
        e.constant = F[(i, col - nx - nu)];
    }
    e
}

/// Append the Σ̂_T rows to `p`, returning the slack blocks.
pub fn add_sigma_hat_rows(
    p: &mut ConeProgram,
    v: &ModelVars,
    j: &TransitionSet,
    F: &Mat,
    theta: f64,
) -> SigmaVars {
    let (nx, nu, mw) = (j.nx, j.nu, F.nrows());
    let ncol = 2 * nx + nu;
    let Z = p.add_block("Z", mw, ncol, VarKind::Nonnegative);
    let lambda = p.add_block("lambda", 1, 1, VarKind::Free);
    let lam_theta = p.entry(lambda, 0, 0).scaled(theta);

    for t in 0..j.len() {
        for i in 0..mw {
            let r = facet_residual(p, v, F, i, j, t);
            let di = p.entry(v.d, i, 0);
            // d_i − λθ̂ − F_iζ ≥ 0 and F_iζ + d_i − λθ̂ ≥ 0
            let margin = di.minus(&lam_theta);
            p.add_ge0(margin.clone().minus(&r));
            p.add_ge0(margin.plus(&r));
        }
    }
    for i in 0..mw {
        for c in 0..ncol {
            let m = lifted_entry(p, v, F, nx, nu, i, c);
            let z = p.entry(Z, i, c);
            p.add_ge0(z.clone().minus(&m));
            p.add_ge0(z.plus(&m));
        }
    }
    for i in 0..mw {
        let mut e = p.entry(lambda, 0, 0);
        for c in 0..ncol {
            e.add_term(p.index(Z, i, c).unwrap(), -1.0);
        }
        p.add_ge0(e);
    }
    for i in 0..mw {
        let mut e = p.entry(v.d, i, 0).minus(&lam_theta);
        e.constant -= EPS_POS;
        p.add_ge0(e);
    }
    SigmaVars { Z, lambda }
}

/// Number of rows `add_sigma_hat_rows` emits.
pub fn sigma_hat_row_count(n_triples: usize, nx: usize, nu: usize, mw: usize) -> usize {
    2 * mw * n_triples + 2 * mw * (2 * nx + nu) + mw + mw
}

/// A standalone Σ̂_T system with its variable map.
#[derive(Clone, Debug)]
pub struct SigmaHatRows {
    pub program: ConeProgram,
    pub model: ModelVars,
    pub slack: SigmaVars,
}

pub fn sigma_hat_rows(j: &TransitionSet, F: &Mat, theta: f64) -> SigmaHatRows {
    let mut program = ConeProgram::default();
    let model = add_model_vars(&mut program, j.nx, j.nu, F.nrows());
    let slack = add_sigma_hat_rows(&mut program, &model, j, F, theta);
    SigmaHatRows {
        program,
        model,
        slack,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub model: ModelTriple,
    #[serde(with = "crate::linalg::serde_mat")]
    pub Z: Mat,
    pub lambda: f64,
    pub objective: f64,
}

/// `argmin ‖d‖₁ s.t. (A, B, d) ∈ Σ̂_T`.
pub fn initial_model_lp(rows: &SigmaHatRows, solver: &dyn ConeSolver, theta: f64) -> Result<ModelFit, ModelSetError> {
    let mut p = rows.program.clone();
    p.set_objective(p.sum(rows.model.d));
    let res = solver.solve(&p)?;
    match (res.status, res.primal()) {
        (SolveStatus::Optimal, Some(x)) => Ok(ModelFit {
            model: ModelTriple {
                A: p.value(rows.model.A, x),
                B: p.value(rows.model.B, x),
                d: p.value(rows.model.d, x).column(0).into_owned(),
            },
            Z: p.value(rows.slack.Z, x),
            lambda: x[p.index(rows.slack.lambda, 0, 0).unwrap()],
            objective: res.objective,
        }),
        (s @ (SolveStatus::Infeasible | SolveStatus::Unbounded), _) => {
            Err(ModelSetError::Infeasible { theta, status: s })
        }
        (s, _) => Err(ModelSetError::Solver(s)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub kappa: f64,
    /// `min_{t,i} (d_i − κ) − |F_i ζ_t|`; `+∞` for an empty set.
    pub worst_slack: f64,
    pub worst_triple: Option<usize>,
    /// `min_i d_i − κ`.
    pub d_margin: f64,
    pub violating_triples: Vec<usize>,
}

impl MembershipReport {
    pub fn feasible(&self) -> bool {
        self.violating_triples.is_empty() && self.d_margin > 0.0
    }
}

/// Definition-level check with `κ_T = ‖F[−A −B I]‖∞ θ̂`.
pub fn check_membership(m: &ModelTriple, j: &TransitionSet, F: &Mat, theta: f64, tol: f64) -> MembershipReport {
    let kappa = m.lifted_norm(F) * theta;
    let mut worst_slack = f64::INFINITY;
    let mut worst_triple = None;
    let mut violating = Vec::new();
    for t in 0..j.len() {
        let fz = F * m.residual(j, t);
        let slack = (0..F.nrows())
            .map(|i| m.d[i] - kappa - fz[i].abs())
            .fold(f64::INFINITY, f64::min);
        if slack < worst_slack {
            worst_slack = slack;
            worst_triple = Some(t);
        }
        if slack < -tol {
            violating.push(t);
        }
    }
    MembershipReport {
        kappa,
        worst_slack,
        worst_triple,
        d_margin: m.d.iter().fold(f64::INFINITY, |a, &b| a.min(b)) - kappa,
        violating_triples: violating,
    }
}

/// Smallest offsets `≥ m.d` for which every triple satisfies the membership
/// rows exactly: `d_i ← max(d_i, κ_T + max_t |F_i ζ_t|)`. Removes solver
/// round-off from LP/SDP solutions whose rows are active.
pub fn certify_offsets(m: &ModelTriple, j: &TransitionSet, F: &Mat, theta: f64) -> Vector {
    let kappa = m.lifted_norm(F) * theta;
    let mut d = m.d.clone();
    for t in 0..j.len() {
        let fz = F * m.residual(j, t);
        for i in 0..F.nrows() {
            d[i] = d[i].max(kappa + fz[i].abs());
        }
    }
    d
}

/// True iff the held-out transitions are explained by the model.
pub fn validate_theta(m: &ModelTriple, validation: &TransitionSet, F: &Mat, theta: f64) -> bool {
    check_membership(m, validation, F, theta, MEMBERSHIP_TOL)
        .violating_triples
        .is_empty()
}

#[cfg(all(test, feature = "clarabel"))]
mod tests {
    use super::*;
    use crate::clarabel_backend::ClarabelSolver;
    use crate::polytope::uniform_normals;
    use alloc::vec;

    fn lti_transitions(A: &Mat, B: &Mat, n: usize) -> TransitionSet {
        let mut triples = Vec::new();
        let mut x = Vector::from_row_slice(&[0.3, -0.2]);
        for k in 0..n {
            let u = Vector::from_row_slice(&[((k * 7919) % 13) as f64 / 6.0 - 1.0]);
            let xp = A * &x + B * &u;
            let mut z: Vec<f64> = x.iter().copied().collect();
            z.extend(u.iter());
            z.extend(xp.iter());
            triples.push(z);
            x = xp;
        }
        TransitionSet::new(2, 1, triples).unwrap()
    }

    #[test]
    fn row_count_formula() {
        let A = Mat::from_row_slice(2, 2, &[0.9, 0.1, 0.0, 0.8]);
        let B = Mat::from_row_slice(2, 1, &[0.0, 0.1]);
        let j = lti_transitions(&A, &B, 7);
        let rows = sigma_hat_rows(&j, &uniform_normals(4), 1e-3);
        assert_eq!(
            rows.program.problem_size().inequalities,
            sigma_hat_row_count(7, 2, 1, 4)
        );
        assert_eq!(sigma_hat_row_count(999, 2, 1, 10), 19_980 + 100 + 20);
    }

    #[test]
    fn noise_free_data_recovers_model() {
        let A = Mat::from_row_slice(2, 2, &[0.9, 0.1, -0.05, 0.8]);
        let B = Mat::from_row_slice(2, 1, &[0.02, 0.1]);
        let j = lti_transitions(&A, &B, 40);
        let F = uniform_normals(4);
        let rows = sigma_hat_rows(&j, &F, 0.0);
        let fit = initial_model_lp(&rows, &ClarabelSolver::default(), 0.0).unwrap();
        assert!((&fit.model.A - &A).amax() < 1e-6);
        assert!((&fit.model.B - &B).amax() < 1e-6);
        assert!(fit.model.d.sum() < 1e-6);
        assert!(check_membership(&fit.model, &j, &F, 0.0, MEMBERSHIP_TOL).feasible());
    }

    #[test]
    fn perturbed_d_is_reported() {
        let A = Mat::from_row_slice(2, 2, &[0.9, 0.1, -0.05, 0.8]);
        let B = Mat::from_row_slice(2, 1, &[0.02, 0.1]);
        let j = lti_transitions(&A, &B, 10);
        let F = uniform_normals(2);
        let m = ModelTriple {
            A,
            B,
            d: Vector::from_element(2, 0.05),
        };
        assert!(check_membership(&m, &j, &F, 0.0, 0.0).feasible());
        let bad = ModelTriple {
            d: Vector::from_element(2, -0.05),
            ..m
        };
        let rep = check_membership(&bad, &j, &F, 0.0, 0.0);
        assert_eq!(rep.violating_triples.len(), 10);
    }

    #[test]
    fn empty_validation_is_vacuous() {
        let m = ModelTriple {
            A: Mat::identity(2, 2),
            B: Mat::zeros(2, 1),
            d: Vector::from_element(2, 1.0),
        };
        let empty = TransitionSet::new(2, 1, vec![]).unwrap();
        assert!(validate_theta(&m, &empty, &uniform_normals(2), 1e-3));
    }
}
