//! Discrete-time LQR via fixed-point Riccati iteration. Gains follow the
//! `u = Kx` convention, so `A + BK` is the closed loop.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{inf_norm, Mat};

pub const DARE_TOL: f64 = 1e-10;
pub const DARE_MAX_ITERS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("Riccati iteration did not converge in {iters} steps (residual {residual:e})")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("R + BᵀPB is singular")]
    Singular,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    #[serde(with = "crate::linalg::serde_mat")]
    pub A: Mat,
    #[serde(with = "crate::linalg::serde_mat")]
    pub B: Mat,
}

impl StateSpace {
    pub fn new(A: Mat, B: Mat) -> Result<Self, ControlError> {
        if A.nrows() != A.ncols() || B.nrows() != A.nrows() {
            return Err(ControlError::DimensionMismatch("A must be square and share rows with B"));
        }
        Ok(Self { A, B })
    }

    pub fn nx(&self) -> usize {
        self.A.nrows()
    }

    pub fn nu(&self) -> usize {
        self.B.ncols()
    }

    pub fn closed_loop(&self, K: &Mat) -> Mat {
        &self.A + &self.B * K
    }
}

fn riccati_map(sys: &StateSpace, Q: &Mat, R: &Mat, P: &Mat) -> Result<Mat, ControlError> {
    let (A, B) = (&sys.A, &sys.B);
    let btp = B.transpose() * P;
    let s = R + &btp * B;
    let s_inv = s.try_inverse().ok_or(ControlError::Singular)?;
    let atp = A.transpose() * P;
    let next = &atp * A - &atp * B * s_inv * btp * A + Q;
    Ok((&next + next.transpose()) * 0.5)
}

/// `‖AᵀPA − P − AᵀPB(R+BᵀPB)⁻¹BᵀPA + Q‖∞`.
pub fn dare_residual(sys: &StateSpace, Q: &Mat, R: &Mat, P: &Mat) -> Result<f64, ControlError> {
    Ok(inf_norm(&(riccati_map(sys, Q, R, P)? - P)))
}

/// Stabilizing DARE solution by iterating the Riccati map from `P₀ = Q`.
pub fn solve_dare(sys: &StateSpace, Q: &Mat, R: &Mat, tol: f64) -> Result<Mat, ControlError> {
    let (nx, nu) = (sys.nx(), sys.nu());
    if Q.shape() != (nx, nx) || R.shape() != (nu, nu) {
        return Err(ControlError::DimensionMismatch("Q or R"));
    }
    let mut P = Q.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..DARE_MAX_ITERS {
        let next = riccati_map(sys, Q, R, &P)?;
        residual = inf_norm(&(&next - &P));
        if !residual.is_finite() {
            break;
        }
        if residual <= tol {
            return Ok(P);
        }
        P = next;
    }
    Err(ControlError::NoConvergence {
        iters: DARE_MAX_ITERS,
        residual,
    })
}

/// `K = −(R + BᵀPB)⁻¹BᵀPA` for the stabilizing DARE solution `P`.
pub fn lqr_gain(sys: &StateSpace, Q: &Mat, R: &Mat) -> Result<Mat, ControlError> {
    let P = solve_dare(sys, Q, R, DARE_TOL)?;
    gain_from_p(sys, R, &P)
}

pub fn gain_from_p(sys: &StateSpace, R: &Mat, P: &Mat) -> Result<Mat, ControlError> {
    let btp = sys.B.transpose() * P;
    let s = R + &btp * &sys.B;
    let s_inv = s.try_inverse().ok_or(ControlError::Singular)?;
    Ok(-(s_inv * btp * &sys.A))
}

/// `P = Σ_k (Φᵀ)ᵏ Q Φᵏ`, the solution of `ΦᵀPΦ − P + Q = 0`, by Smith doubling.
pub fn solve_lyapunov(phi: &Mat, Q: &Mat, tol: f64) -> Result<Mat, ControlError> {
    if phi.nrows() != phi.ncols() || Q.shape() != phi.shape() {
        return Err(ControlError::DimensionMismatch("Φ and Q"));
    }
    let mut P = Q.clone();
    let mut a = phi.clone();
    for _ in 0..64 {
        let inc = a.transpose() * &P * &a;
        let step = inf_norm(&inc);
        if !step.is_finite() {
            break;
        }
        P += inc;
        if step <= tol * (1.0 + inf_norm(&P)) {
            return Ok((&P + P.transpose()) * 0.5);
        }
        a = &a * &a;
    }
    Err(ControlError::NoConvergence {
        iters: 64,
        residual: f64::INFINITY,
    })
}

pub fn spectral_radius(M: &Mat) -> f64 {
    assert_eq!(M.nrows(), M.ncols(), "spectral radius of a non-square matrix");
    if M.nrows() == 0 {
        return 0.0;
    }
    M.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| libm::hypot(z.re, z.im))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(r: usize, c: usize, v: &[f64]) -> Mat {
        Mat::from_row_slice(r, c, v)
    }

    #[test]
    fn scalar_dare_matches_quadratic_root() {
        // p = a²p − a²p²/(r+p) + q with a = .5, q = r = 1  ⇒  p² − .25p − 1 = 0
        let sys = StateSpace::new(m(1, 1, &[0.5]), m(1, 1, &[1.0])).unwrap();
        let q = m(1, 1, &[1.0]);
        let p = solve_dare(&sys, &q, &q, 1e-12).unwrap()[(0, 0)];
        let root = (0.25 + (0.0625f64 + 4.0).sqrt()) / 2.0;
        assert!((p - root).abs() < 1e-10);
        let k = lqr_gain(&sys, &q, &q).unwrap()[(0, 0)];
        assert!((k + 0.5 * root / (1.0 + root)).abs() < 1e-9);
    }

    #[test]
    fn zero_dynamics_gives_q_and_zero_gain() {
        let sys = StateSpace::new(Mat::zeros(2, 2), m(2, 1, &[1.0, 2.0])).unwrap();
        let q = Mat::identity(2, 2);
        let r = Mat::identity(1, 1);
        assert!((solve_dare(&sys, &q, &r, 1e-12).unwrap() - &q).amax() < 1e-14);
        assert!(lqr_gain(&sys, &q, &r).unwrap().amax() < 1e-14);
    }

    #[test]
    fn spectral_radius_examples() {
        assert!((spectral_radius(&Mat::identity(3, 3)) - 1.0).abs() < 1e-14);
        assert_eq!(spectral_radius(&Mat::zeros(2, 2)), 0.0);
        let t: f64 = 0.7;
        let rot = m(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]) * 0.9;
        assert!((spectral_radius(&rot) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_scalar_and_residual() {
        // p = q / (1 − a²)
        let p = solve_lyapunov(&m(1, 1, &[0.5]), &m(1, 1, &[3.0]), 1e-14).unwrap();
        assert!((p[(0, 0)] - 4.0).abs() < 1e-12);
        let phi = m(2, 2, &[0.9, 0.3, -0.2, 0.7]);
        let q = m(2, 2, &[1.0, 0.2, 0.2, 2.0]);
        let p = solve_lyapunov(&phi, &q, 1e-15).unwrap();
        assert!((phi.transpose() * &p * &phi - &p + &q).amax() < 1e-10);
        assert!(solve_lyapunov(&m(1, 1, &[1.5]), &m(1, 1, &[1.0]), 1e-12).is_err());
    }

    #[test]
    fn unstabilizable_system_does_not_converge() {
        let sys = StateSpace::new(m(1, 1, &[2.0]), m(1, 1, &[0.0])).unwrap();
        let q = m(1, 1, &[1.0]);
        assert!(matches!(
            solve_dare(&sys, &q, &q, 1e-10),
            Err(ControlError::NoConvergence { .. })
        ));
    }
}
