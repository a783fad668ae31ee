//! Set-inclusion certificates for a synthesized point, computed from
//! support functions alone (no matrix inequalities involved):
//!
//! - `ΦΔX ⊕ W ⊆ ΔX`
//! - `ΦX_t ⊆ X_t`
//! - `ΔX ⊕ X_t ⊆ X`
//! - `KΔX ⊕ KX_t ⊆ U`
//! - every vertex of `X` lies in `X_t ⊕ P(Ē, ε̄)`.
//!
//! Each entry is a slack `offset − support`; negative means violated.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cone::{Affine, ConeProgram, ConeSolver, SolveStatus, VarKind};
use crate::linalg::{Mat, Vector};
use crate::lmi::SynthIterate;
use crate::polytope::{PolytopeError, SymPolytope};
use crate::setup::FixedShapes;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub rpi: Vec<f64>,
    pub invariance: Vec<f64>,
    pub state: Vec<f64>,
    pub input: Vec<f64>,
    pub cover: Vec<f64>,
}

impl InclusionReport {
    pub fn worst(&self) -> f64 {
        [&self.rpi, &self.invariance, &self.state, &self.input, &self.cover]
            .iter()
            .flat_map(|v| v.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.worst() >= -tol
    }
}

fn slack(offsets: &Vector, support: &Vector) -> Vec<f64> {
    (offsets - support).iter().copied().collect()
}

/// `P̲ΦΔX ⊕ W ⊆ ΔX`, `ΦX_t ⊆ X_t`, `ΔX ⊕ X_t ⊆ X`, `KΔX ⊕ KX_t ⊆ U` and the
/// vertex cover, all evaluated with LP supports.
pub fn check_inclusions(
    it: &SynthIterate,
    s: &FixedShapes,
    solver: &dyn ConeSolver,
) -> Result<InclusionReport, PolytopeError> {
    let phi = it.closed_loop();
    let tube = it.tube(s)?;
    let term = it.terminal(s)?;
    let w = it.disturbance(s)?;

    let pt = &s.P_tube;
    let rpi_sup = tube.support_rows(solver, &(pt * &phi))? + w.support_rows(solver, pt)?;
    let inv_sup = term.support_rows(solver, &(&s.P_term * &phi))?;
    let st_sup = tube.support_rows(solver, &s.Vx)? + term.support_rows(solver, &s.Vx)?;
    let vk = &s.Vu * &it.K;
    let in_sup = tube.support_rows(solver, &vk)? + term.support_rows(solver, &vk)?;

    let cover_set = SymPolytope::new(s.E_cover.clone(), it.eps_cover.clone())?;
    let cover = s
        .X_vertices
        .iter()
        .map(|x| sum_membership_slack(x, &term, &cover_set, solver))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(InclusionReport {
        rpi: slack(&it.b_tube, &rpi_sup),
        invariance: slack(&it.b_term, &inv_sup),
        state: slack(&s.vx, &st_sup),
        input: slack(&s.vu, &in_sup),
        cover,
    })
}

/// `max −t` over splits `x = y + e` with `|P₁y| ≤ b₁ + t`, `|P₂e| ≤ b₂ + t`;
/// nonnegative iff `x ∈ P₁ ⊕ P₂`.
pub fn sum_membership_slack(
    x: &Vector,
    p1: &SymPolytope,
    p2: &SymPolytope,
    solver: &dyn ConeSolver,
) -> Result<f64, PolytopeError> {
    let n = x.len();
    let mut p = ConeProgram::new(0.0);
    let y = p.add_block("y", n, 1, VarKind::Free);
    let t = p.add_block("t", 1, 1, VarKind::Free);
    let tv = p.entry(t, 0, 0);
    let rows = |p: &mut ConeProgram, poly: &SymPolytope, v: &dyn Fn(&ConeProgram, usize) -> Affine| {
        let (m, b): (&Mat, &Vector) = (poly.normals(), poly.offsets());
        for r in 0..m.nrows() {
            let mut e = Affine::default();
            for c in 0..n {
                e.add_scaled(&v(p, c), m[(r, c)]);
            }
            let bound = Affine::constant(b[r]).plus(&tv);
            p.add_ge0(bound.clone().minus(&e));
            p.add_ge0(bound.plus(&e));
        }
    };
    rows(&mut p, p1, &|p, c| p.entry(y, c, 0));
    // e = x − y
    rows(&mut p, p2, &|p, c| Affine::constant(x[c]).minus(&p.entry(y, c, 0)));
    p.set_objective(tv.clone());
    let res = solver.solve(&p)?;
    match (res.status, res.primal()) {
        (SolveStatus::Optimal, Some(sol)) => Ok(-tv.eval(sol)),
        (st, _) => Err(PolytopeError::Solver(st)),
    }
}
