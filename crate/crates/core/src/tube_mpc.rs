//! Tube-based robust MPC on top of a synthesized tube and terminal set.
//!
//! The nominal trajectory `(x̂, û)` obeys `x̂⁺ = Ax̂ + Bû` with tightened
//! constraints; the applied input is `u = û₀ + K(x − x̂₀)` with the initial
//! nominal state free as long as `x − x̂₀ ∈ ΔX`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cone::{Affine, ConeError, ConeProgram, ConeSolver, SolveStatus, VarKind};
use crate::control::{dare_residual, solve_dare, ControlError, StateSpace, DARE_TOL};
use crate::linalg::{Mat, Vector};
use crate::lmi::SynthIterate;
use crate::model_set::ModelTriple;
use crate::polytope::{PolytopeError, SymPolytope};
use crate::setup::FixedShapes;

pub const DEFAULT_HORIZON: usize = 10;
/// Slack on set membership tests along simulated trajectories.
pub const CONTAINMENT_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MpcError {
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error("cost weight is not positive definite")]
    NotPositiveDefinite,
    #[error("tightened {0} set is empty")]
    EmptyTightening(&'static str),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeMpcProblem {
    pub model: ModelTriple,
    #[serde(with = "crate::linalg::serde_mat")]
    pub K: Mat,
    pub tube: SymPolytope,
    /// `W = {w : −d ≤ Fw ≤ d}`.
    pub disturbance: SymPolytope,
    pub terminal: SymPolytope,
    pub state_set: SymPolytope,
    pub input_set: SymPolytope,
    #[serde(with = "crate::linalg::serde_mat")]
    pub Q: Mat,
    #[serde(with = "crate::linalg::serde_mat")]
    pub R: Mat,
    /// Terminal weight: stabilizing DARE solution for `(A, B, Q, R)`.
    #[serde(with = "crate::linalg::serde_mat")]
    pub P: Mat,
    pub horizon: usize,
    /// `vx − h_ΔX(Vx)`.
    #[serde(with = "crate::linalg::serde_vec")]
    pub state_margin: Vector,
    /// `vu − h_ΔX(VuK)`.
    #[serde(with = "crate::linalg::serde_vec")]
    pub input_margin: Vector,
}

impl TubeMpcProblem {
    pub fn new(
        it: &SynthIterate,
        shapes: &FixedShapes,
        horizon: usize,
        solver: &dyn ConeSolver,
    ) -> Result<Self, MpcError> {
        let sys = StateSpace::new(it.model.A.clone(), it.model.B.clone())?;
        let P = solve_dare(&sys, &shapes.Q_perf, &shapes.R_perf, DARE_TOL)?;
        let tube = it.tube(shapes)?;
        let state_set = shapes.state_set();
        let input_set = shapes.input_set();
        let state_margin = state_set.offsets() - tube.support_rows_auto(solver, state_set.normals())?;
        let input_margin =
            input_set.offsets() - tube.support_rows_auto(solver, &(input_set.normals() * &it.K))?;
        if state_margin.min() <= 0.0 {
            return Err(MpcError::EmptyTightening("state"));
        }
        if input_margin.min() <= 0.0 {
            return Err(MpcError::EmptyTightening("input"));
        }
        Ok(Self {
            model: it.model.clone(),
            K: it.K.clone(),
            tube,
            disturbance: it.disturbance(shapes)?,
            terminal: it.terminal(shapes)?,
            state_set,
            input_set,
            Q: shapes.Q_perf.clone(),
            R: shapes.R_perf.clone(),
            P,
            horizon,
            state_margin,
            input_margin,
        })
    }

    pub fn nx(&self) -> usize {
        self.model.A.nrows()
    }

    pub fn nu(&self) -> usize {
        self.model.B.ncols()
    }

    /// `‖Riccati(P) − P‖∞` for the stored terminal weight.
    pub fn dare_residual(&self) -> Result<f64, MpcError> {
        let sys = StateSpace::new(self.model.A.clone(), self.model.B.clone())?;
        Ok(dare_residual(&sys, &self.Q, &self.R, &self.P)?)
    }

    /// The finite-horizon program for measured state `x`.
    pub fn program(&self, x: &Vector) -> Result<(ConeProgram, MpcVars), MpcError> {
        let (nx, nu, n) = (self.nx(), self.nu(), self.horizon);
        let mut p = ConeProgram::new(0.0);
        let xh = p.add_block("xhat", nx, n + 1, VarKind::Free);
        let uh = p.add_block("uhat", nu, n.max(1), VarKind::Free);
        let col = |p: &ConeProgram, b, k: usize, dim: usize| -> Vec<Affine> {
            (0..dim).map(|i| p.entry(b, i, k)).collect()
        };
        let (A, B) = (&self.model.A, &self.model.B);
        let lin = |m: &Mat, v: &[Affine], r: usize| {
            let mut e = Affine::default();
            for (c, vc) in v.iter().enumerate() {
                e.add_scaled(vc, m[(r, c)]);
            }
            e
        };

        // x − x̂₀ ∈ ΔX
        let x0 = col(&p, xh, 0, nx);
        let pn = self.tube.normals();
        for r in 0..pn.nrows() {
            let px = (0..nx).map(|c| pn[(r, c)] * x[c]).sum::<f64>();
            let pe = lin(pn, &x0, r);
            let b = self.tube.offsets()[r];
            p.add_ge0(Affine::constant(b - px).plus(&pe));
            p.add_ge0(Affine::constant(b + px).minus(&pe));
        }

        let sym_rows = |p: &mut ConeProgram, m: &Mat, v: &[Affine], off: &Vector| {
            for r in 0..m.nrows() {
                let e = lin(m, v, r);
                p.add_ge0(Affine::constant(off[r]).minus(&e));
                p.add_ge0(Affine::constant(off[r]).plus(&e));
            }
        };

        let mut chol_terms: Vec<(Mat, Vec<Affine>)> = Vec::new();
        let lq = cholesky_t(&self.Q)?;
        let lr = cholesky_t(&self.R)?;
        for k in 0..n {
            let xk = col(&p, xh, k, nx);
            let uk = col(&p, uh, k, nu);
            let xn = col(&p, xh, k + 1, nx);
            for r in 0..nx {
                let mut e = lin(A, &xk, r).plus(&lin(B, &uk, r));
                e.add_scaled(&xn[r], -1.0);
                p.add_eq(e);
            }
            sym_rows(&mut p, self.state_set.normals(), &xk, &self.state_margin);
            sym_rows(&mut p, self.input_set.normals(), &uk, &self.input_margin);
            chol_terms.push((lq.clone(), xk));
            chol_terms.push((lr.clone(), uk));
        }
        let xn = col(&p, xh, n, nx);
        sym_rows(&mut p, self.terminal.normals(), &xn, self.terminal.offsets());
        chol_terms.push((cholesky_t(&self.P)?, xn));

        // ‖Lᵀv‖² through auxiliary z = Lᵀv with a diagonal quadratic.
        let nz: usize = chol_terms.iter().map(|(l, _)| l.nrows()).sum();
        let z = p.add_block("z", nz, 1, VarKind::Free);
        let mut zi = 0;
        for (lt, v) in &chol_terms {
            for r in 0..lt.nrows() {
                let zvar = p.entry(z, zi, 0);
                p.add_eq(lin(lt, v, r).minus(&zvar));
                let idx = p.index(z, zi, 0).unwrap();
                p.add_quadratic(idx, idx, 2.0);
                zi += 1;
            }
        }
        Ok((p, MpcVars { xhat: xh, uhat: uh }))
    }

    pub fn mpc_step(&self, x: &Vector, solver: &dyn ConeSolver) -> Result<MpcStep, MpcError> {
        let (p, v) = self.program(x)?;
        let res = solver.solve(&p)?;
        let Some(sol) = res.primal().filter(|_| res.status == SolveStatus::Optimal) else {
            return Ok(MpcStep {
                status: res.status,
                u: Vector::zeros(self.nu()),
                xhat: Vec::new(),
                uhat: Vec::new(),
                cost: f64::NAN,
            });
        };
        let xm = p.value(v.xhat, sol);
        let um = p.value(v.uhat, sol);
        let xhat: Vec<Vector> = xm.column_iter().map(|c| c.into_owned()).collect();
        let uhat: Vec<Vector> = um.column_iter().take(self.horizon).map(|c| c.into_owned()).collect();
        let u = &uhat[0] + &self.K * (x - &xhat[0]);
        Ok(MpcStep {
            status: res.status,
            u,
            xhat,
            uhat,
            cost: res.objective,
        })
    }
}

/// `Lᵀ` for `M = LLᵀ`.
fn cholesky_t(m: &Mat) -> Result<Mat, MpcError> {
    let sym = (m + m.transpose()) * 0.5;
    Ok(sym
        .cholesky()
        .ok_or(MpcError::NotPositiveDefinite)?
        .l()
        .transpose())
}

pub struct MpcVars {
    pub xhat: crate::cone::BlockId,
    pub uhat: crate::cone::BlockId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpcStep {
    pub status: SolveStatus,
    #[serde(with = "crate::linalg::serde_vec")]
    pub u: Vector,
    /// Nominal states `x̂₀..x̂_N`; empty when infeasible.
    #[serde(with = "crate::linalg::serde_vecs")]
    pub xhat: Vec<Vector>,
    #[serde(with = "crate::linalg::serde_vecs")]
    pub uhat: Vec<Vector>,
    pub cost: f64,
}

impl MpcStep {
    pub fn feasible(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajRow {
    pub t: usize,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    /// `x̂₀*`; NaN on the (final) infeasible step.
    pub xhat: Vec<f64>,
    pub feasible: bool,
    /// The realized disturbance `x⁺ − Ax − Bu` lies in `W`.
    pub w_in_W: bool,
    /// `x⁺ − x̂₁* ∈ ΔX`.
    pub contained: bool,
    pub x_in_X: bool,
    pub u_in_U: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub rows: Vec<TrajRow>,
}

impl Trajectory {
    pub fn first_infeasible(&self) -> Option<usize> {
        self.rows.iter().find(|r| !r.feasible).map(|r| r.t)
    }

    pub fn all_feasible(&self) -> bool {
        self.rows.iter().all(|r| r.feasible)
    }

    pub fn constraint_violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.x_in_X || !r.u_in_U).count()
    }

    /// Steps where the error left the tube although the disturbance was in `W`.
    pub fn unexplained_exits(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.feasible && !r.contained && r.w_in_W)
            .count()
    }

    pub fn disturbance_flags(&self) -> usize {
        self.rows.iter().filter(|r| !r.w_in_W).count()
    }
}

/// Run up to `steps` closed-loop steps from `x0`; stops after recording the
/// first infeasible step. `plant(x, u)` returns the next true state.
pub fn simulate_closed_loop(
    prob: &TubeMpcProblem,
    x0: &Vector,
    steps: usize,
    plant: &mut dyn FnMut(&Vector, &Vector) -> Vector,
    solver: &dyn ConeSolver,
) -> Result<Trajectory, MpcError> {
    let mut x = x0.clone();
    let mut rows = Vec::with_capacity(steps);
    for t in 0..steps {
        let step = prob.mpc_step(&x, solver)?;
        if !step.feasible() {
            rows.push(TrajRow {
                t,
                x: x.as_slice().to_vec(),
                u: alloc::vec![f64::NAN; prob.nu()],
                xhat: alloc::vec![f64::NAN; prob.nx()],
                feasible: false,
                w_in_W: true,
                contained: false,
                x_in_X: prob.state_set.contains(&x, CONTAINMENT_TOL),
                u_in_U: true,
            });
            break;
        }
        let xn = plant(&x, &step.u);
        let w = &xn - &prob.model.A * &x - &prob.model.B * &step.u;
        let xh1 = &prob.model.A * &step.xhat[0] + &prob.model.B * &step.uhat[0];
        rows.push(TrajRow {
            t,
            x: x.as_slice().to_vec(),
            u: step.u.as_slice().to_vec(),
            xhat: step.xhat[0].as_slice().to_vec(),
            feasible: true,
            w_in_W: prob.disturbance.contains(&w, CONTAINMENT_TOL),
            contained: prob.tube.contains(&(&xn - xh1), CONTAINMENT_TOL),
            x_in_X: prob.state_set.contains(&x, CONTAINMENT_TOL),
            u_in_U: prob.input_set.contains(&step.u, CONTAINMENT_TOL),
        });
        x = xn;
    }
    Ok(Trajectory { rows })
}
