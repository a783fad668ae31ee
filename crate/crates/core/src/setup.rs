//! Quantities fixed before synthesis: facet normals, constraint sets,
//! objective weights and performance matrices.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::{Mat, Vector};
use crate::polytope::{uniform_normals, PolytopeError, SymPolytope};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedShapes {
    /// Tube normals `P̲` (m̲ × n_x).
    #[serde(with = "crate::linalg::serde_mat")]
    pub P_tube: Mat,
    /// Terminal-set normals `P̄` (m̄ × n_x).
    #[serde(with = "crate::linalg::serde_mat")]
    pub P_term: Mat,
    /// Disturbance normals `F` (m_w × n_x).
    #[serde(with = "crate::linalg::serde_mat")]
    pub F: Mat,
    /// Cover normals `Ē` (m_ε × n_x).
    #[serde(with = "crate::linalg::serde_mat")]
    pub E_cover: Mat,
    #[serde(with = "crate::linalg::serde_mat")]
    pub Vx: Mat,
    #[serde(with = "crate::linalg::serde_vec")]
    pub vx: Vector,
    #[serde(with = "crate::linalg::serde_mat")]
    pub Vu: Mat,
    #[serde(with = "crate::linalg::serde_vec")]
    pub vu: Vector,
    #[serde(with = "crate::linalg::serde_vecs")]
    pub X_vertices: Vec<Vector>,
    pub weights: Weights,
    #[serde(with = "crate::linalg::serde_mat")]
    pub Q_perf: Mat,
    #[serde(with = "crate::linalg::serde_mat")]
    pub R_perf: Mat,
}

impl FixedShapes {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        P_tube: Mat,
        P_term: Mat,
        F: Mat,
        E_cover: Mat,
        X: &SymPolytope,
        U: &SymPolytope,
        weights: Weights,
        Q_perf: Mat,
        R_perf: Mat,
    ) -> Result<Self, PolytopeError> {
        let X_vertices = X
            .vertices_2d()?
            .into_iter()
            .map(|v| Vector::from_row_slice(&v))
            .collect();
        Ok(Self {
            P_tube,
            P_term,
            F,
            E_cover,
            Vx: X.normals().clone(),
            vx: X.offsets().clone(),
            Vu: U.normals().clone(),
            vu: U.offsets().clone(),
            X_vertices,
            weights,
            Q_perf,
            R_perf,
        })
    }

    /// The mass-spring-damper example: `‖x‖∞ ≤ 0.8`, `|u| ≤ 2.5`, uniform
    /// normals with (m_w, m̲, m̄, m_ε) = (10, 10, 15, 10), Q̃ = diag(1, 15), R̃ = 1.
    pub fn paper_default() -> Self {
        Self::with_counts(10, 10, 15, 10, 0.8, 2.5)
    }

    pub fn with_counts(mw: usize, m_tube: usize, m_term: usize, m_eps: usize, x_max: f64, u_max: f64) -> Self {
        Self::new(
            uniform_normals(m_tube),
            uniform_normals(m_term),
            uniform_normals(mw),
            uniform_normals(m_eps),
            &SymPolytope::hypercube(2, x_max),
            &SymPolytope::hypercube(1, u_max),
            Weights::default(),
            Mat::from_diagonal(&Vector::from_row_slice(&[1.0, 15.0])),
            Mat::identity(1, 1),
        )
        .expect("box constraint sets are well formed")
    }

    pub fn nx(&self) -> usize {
        self.F.ncols()
    }

    pub fn nu(&self) -> usize {
        self.Vu.ncols()
    }

    pub fn mw(&self) -> usize {
        self.F.nrows()
    }

    pub fn m_tube(&self) -> usize {
        self.P_tube.nrows()
    }

    pub fn m_term(&self) -> usize {
        self.P_term.nrows()
    }

    pub fn m_eps(&self) -> usize {
        self.E_cover.nrows()
    }

    pub fn mx(&self) -> usize {
        self.Vx.nrows()
    }

    pub fn mu(&self) -> usize {
        self.Vu.nrows()
    }

    pub fn state_set(&self) -> SymPolytope {
        SymPolytope::new(self.Vx.clone(), self.vx.clone()).expect("validated at construction")
    }

    pub fn input_set(&self) -> SymPolytope {
        SymPolytope::new(self.Vu.clone(), self.vu.clone()).expect("validated at construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_dimensions() {
        let s = FixedShapes::paper_default();
        assert_eq!(
            (s.nx(), s.nu(), s.mw(), s.m_tube(), s.m_term(), s.m_eps(), s.mx(), s.mu()),
            (2, 1, 10, 10, 15, 10, 2, 1)
        );
        assert_eq!(s.X_vertices.len(), 4);
    }
}
