//! Synthesis conditions: numeric checks of the nonlinear matrix
//! inequalities, the convex underestimate `L`, and the affine LMI blocks
//! used by each convexified subproblem.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cone::{block_sym_affine, AffMat, Affine, BlockId, ConeProgram, VarKind};
use crate::linalg::{block_sym, diag, min_eig_sym, recip_clamped, row, Mat, Vector};
use crate::model_set::{add_model_vars, ModelTriple, ModelVars, SigmaVars};
use crate::polytope::{PolytopeError, SymPolytope};
use crate::setup::{FixedShapes, Weights};
use crate::{EPS_POS, EPS_PSD};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmiError {
    #[error("linearization matrix is singular in {0}")]
    Singular(String),
}

/// Every variable of the nonlinear synthesis problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthIterate {
    pub model: ModelTriple,
    #[serde(with = "crate::linalg::serde_mat")]
    pub Zslack: Mat,
    pub lambda: f64,
    #[serde(with = "crate::linalg::serde_mat")]
    pub K: Mat,
    #[serde(with = "crate::linalg::serde_vec")]
    pub b_tube: Vector,
    #[serde(with = "crate::linalg::serde_vec")]
    pub b_term: Vector,
    #[serde(with = "crate::linalg::serde_mat")]
    pub Theta: Mat,
    pub r_perf: f64,
    #[serde(with = "crate::linalg::serde_vec")]
    pub M_perf: Vector,
    #[serde(with = "crate::linalg::serde_vec")]
    pub eps_cover: Vector,
    #[serde(with = "crate::linalg::serde_vecs")]
    pub D_tube: Vec<Vector>,
    #[serde(with = "crate::linalg::serde_vecs")]
    pub W: Vec<Vector>,
    #[serde(with = "crate::linalg::serde_vecs")]
    pub D_term: Vec<Vector>,
    #[serde(with = "crate::linalg::serde_vecs")]
    pub S_tube: Vec<Vector>,
    #[serde(with = "crate::linalg::serde_vecs")]
    pub S_term: Vec<Vector>,
    #[serde(with = "crate::linalg::serde_vecs")]
    pub R_tube: Vec<Vector>,
    #[serde(with = "crate::linalg::serde_vecs")]
    pub R_term: Vec<Vector>,
}

impl SynthIterate {
    pub fn objective(&self, w: &Weights) -> f64 {
        objective_value(&self.b_tube, &self.eps_cover, self.r_perf, w)
    }

    pub fn closed_loop(&self) -> Mat {
        &self.model.A + &self.model.B * &self.K
    }

    pub fn tube(&self, s: &FixedShapes) -> Result<SymPolytope, PolytopeError> {
        SymPolytope::new(s.P_tube.clone(), self.b_tube.clone())
    }

    pub fn terminal(&self, s: &FixedShapes) -> Result<SymPolytope, PolytopeError> {
        SymPolytope::new(s.P_term.clone(), self.b_term.clone())
    }

    pub fn disturbance(&self, s: &FixedShapes) -> Result<SymPolytope, PolytopeError> {
        SymPolytope::new(s.F.clone(), self.model.d.clone())
    }
}

/// `α‖b̲‖₁ + β‖ε̄‖₁ + γ r̃` (all entries are positive, so 1-norms are sums).
pub fn objective_value(b_tube: &Vector, eps: &Vector, r: f64, w: &Weights) -> f64 {
    w.alpha * b_tube.sum() + w.beta * eps.sum() + w.gamma * r
}

/// `Lᵀ D⁻¹ L`.
pub fn n_form(L: &Mat, D: &Mat) -> Option<Mat> {
    D.clone().try_inverse().map(|di| L.transpose() * di * L)
}

/// `𝐋ᵀD⁻¹L + LᵀD⁻¹𝐋 − LᵀD⁻¹𝐃D⁻¹L`, affine in the variables `(𝐋, 𝐃)` and
/// linearized at the point `(L, D)`.
pub fn underestimate_L(Lcur: &Mat, Dcur: &Mat, Lvar: &AffMat, Dvar: &AffMat) -> Result<AffMat, LmiError> {
    let dinv = Dcur
        .clone()
        .try_inverse()
        .ok_or_else(|| LmiError::Singular(String::from("underestimate_L")))?;
    let g = dinv * Lcur;
    let cross = Lvar.transpose().rmul(&g);
    let quad = Dvar.lmul(&g.transpose()).rmul(&g);
    Ok(cross.add(&cross.transpose()).sub(&quad))
}

/// Numeric value of the same expression.
pub fn underestimate_L_value(Lcur: &Mat, Dcur: &Mat, Lvar: &Mat, Dvar: &Mat) -> Option<Mat> {
    let g = Dcur.clone().try_inverse()? * Lcur;
    let cross = Lvar.transpose() * &g;
    Some(&cross + cross.transpose() - g.transpose() * Dvar * &g)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// Tube invariance under `A + BK` and `W`.
    Rpi,
    /// Terminal-set invariance.
    Pi,
    /// `ΔX ⊕ X_t ⊆ X`, one block per state-constraint row.
    State,
    /// `KΔX ⊕ KX_t ⊆ U`, one block per input-constraint row.
    Input,
    Dissipativity,
    /// `P̄ᵀM̃P̄ − Θ̃ ≻ 0`.
    PerfEllipse,
    /// `r̃ − b̄ᵀM̃b̄ > 0`.
    PerfRadius,
    /// Smallest entry among quantities that must be strictly positive.
    Positivity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NlmiEntry {
    pub family: Family,
    pub index: usize,
    pub min_eig: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NlmiReport {
    pub entries: Vec<NlmiEntry>,
    pub threshold: f64,
}

impl NlmiReport {
    pub fn feasible(&self) -> bool {
        self.entries.iter().all(|e| self.entry_ok(e))
    }

    fn entry_ok(&self, e: &NlmiEntry) -> bool {
        match e.family {
            Family::Positivity => e.min_eig > 0.0,
            _ => e.min_eig >= self.threshold,
        }
    }

    pub fn violations(&self) -> Vec<&NlmiEntry> {
        self.entries.iter().filter(|e| !self.entry_ok(e)).collect()
    }

    /// Smallest matrix-inequality eigenvalue (positivity entries excluded).
    pub fn worst(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.family != Family::Positivity)
            .map(|e| e.min_eig)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn family_min(&self, f: Family) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.family == f)
            .map(|e| e.min_eig)
            .fold(f64::INFINITY, f64::min)
    }
}

fn scalar(v: f64) -> Mat {
    Mat::from_element(1, 1, v)
}

fn quad(b: &Vector, d: &Vector) -> f64 {
    b.iter().zip(d.iter()).map(|(x, w)| w * x * x).sum()
}

/// The nonlinear blocks evaluated numerically, without linearization.
pub fn nlmi_blocks(it: &SynthIterate, s: &FixedShapes) -> Vec<(Family, usize, Mat)> {
    let (nx, nu) = (s.nx(), s.nu());
    let phi = it.closed_loop();
    let mut out = Vec::new();

    for i in 0..s.m_tube() {
        let pi = row(&s.P_tube, i);
        let (D, W) = (&it.D_tube[i], &it.W[i]);
        let head = 2.0 * it.b_tube[i] - quad(&it.b_tube, D) - quad(&it.model.d, W);
        let m = block_sym(
            &[1, nx, nx],
            &[
                (0, 0, scalar(head)),
                (0, 1, pi.clone()),
                (0, 2, &pi * &phi),
                (1, 1, s.F.transpose() * diag(W) * &s.F),
                (2, 2, s.P_tube.transpose() * diag(D) * &s.P_tube),
            ],
        );
        out.push((Family::Rpi, i, m));
    }
    for i in 0..s.m_term() {
        let pi = row(&s.P_term, i);
        let D = &it.D_term[i];
        let m = block_sym(
            &[1, nx],
            &[
                (0, 0, scalar(2.0 * it.b_term[i] - quad(&it.b_term, D))),
                (0, 1, &pi * &phi),
                (1, 1, s.P_term.transpose() * diag(D) * &s.P_term),
            ],
        );
        out.push((Family::Pi, i, m));
    }
    let mut inclusion = |fam, i: usize, v: f64, row_gain: Mat, Sl: &Vector, Su: &Vector| {
        let m = block_sym(
            &[1, nx, nx],
            &[
                (0, 0, scalar(2.0 * v - quad(&it.b_tube, Sl) - quad(&it.b_term, Su))),
                (0, 1, row_gain.clone()),
                (0, 2, row_gain),
                (1, 1, s.P_tube.transpose() * diag(Sl) * &s.P_tube),
                (2, 2, s.P_term.transpose() * diag(Su) * &s.P_term),
            ],
        );
        out.push((fam, i, m));
    };
    for i in 0..s.mx() {
        inclusion(Family::State, i, s.vx[i], row(&s.Vx, i), &it.S_tube[i], &it.S_term[i]);
    }
    for i in 0..s.mu() {
        inclusion(Family::Input, i, s.vu[i], row(&s.Vu, i) * &it.K, &it.R_tube[i], &it.R_term[i]);
    }
    let _ = nu;
    let diss = &it.Theta
        - &s.Q_perf
        - it.K.transpose() * &s.R_perf * &it.K
        - phi.transpose() * &it.Theta * &phi;
    out.push((Family::Dissipativity, 0, diss));
    let ell = s.P_term.transpose() * diag(&it.M_perf) * &s.P_term - &it.Theta;
    out.push((Family::PerfEllipse, 0, ell));
    out.push((
        Family::PerfRadius,
        0,
        scalar(it.r_perf - quad(&it.b_term, &it.M_perf)),
    ));
    out
}

/// Minimum eigenvalue of every nonlinear block plus a positivity check;
/// feasible iff every block is `≥ EPS_PSD − 1e−9`.
pub fn check_nlmi(it: &SynthIterate, s: &FixedShapes) -> NlmiReport {
    check_nlmi_with(it, s, EPS_PSD - 1e-9)
}

pub fn check_nlmi_with(it: &SynthIterate, s: &FixedShapes, threshold: f64) -> NlmiReport {
    let mut entries: Vec<NlmiEntry> = nlmi_blocks(it, s)
        .into_iter()
        .map(|(family, index, m)| NlmiEntry {
            family,
            index,
            min_eig: if crate::linalg::is_finite(&m) {
                min_eig_sym(&m)
            } else {
                f64::NEG_INFINITY
            },
        })
        .collect();
    let vmin = |v: &Vector| v.iter().copied().fold(f64::INFINITY, f64::min);
    let vsmin = |vs: &[Vector]| vs.iter().map(vmin).fold(f64::INFINITY, f64::min);
    let pos = [
        vmin(&it.b_tube),
        vmin(&it.b_term),
        vmin(&it.model.d),
        vmin(&it.eps_cover),
        vmin(&it.M_perf),
        vsmin(&it.D_tube),
        vsmin(&it.W),
        vsmin(&it.D_term),
        vsmin(&it.S_tube),
        vsmin(&it.S_term),
        vsmin(&it.R_tube),
        vsmin(&it.R_term),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    entries.push(NlmiEntry {
        family: Family::Positivity,
        index: 0,
        min_eig: pos,
    });
    NlmiReport { entries, threshold }
}

/// Decision-variable blocks of a convexified subproblem.
#[derive(Clone, Debug)]
pub struct SynthVars {
    pub model: ModelVars,
    pub sigma: Option<SigmaVars>,
    pub K: BlockId,
    pub b_tube: BlockId,
    pub b_term: BlockId,
    pub Theta: BlockId,
    pub r: BlockId,
    pub M_hat: BlockId,
    pub eps: BlockId,
    pub D_tube: Vec<BlockId>,
    pub W: Vec<BlockId>,
    pub D_term: Vec<BlockId>,
    pub S_tube: Vec<BlockId>,
    pub S_term: Vec<BlockId>,
    pub R_tube: Vec<BlockId>,
    pub R_term: Vec<BlockId>,
    pub sbar: Option<SbarVars>,
}

#[derive(Clone, Debug)]
pub struct SbarVars {
    pub y: Vec<BlockId>,
    pub e: Vec<BlockId>,
}

pub fn add_synth_vars(p: &mut ConeProgram, s: &FixedShapes) -> SynthVars {
    let (nx, nu) = (s.nx(), s.nu());
    let (ml, mb) = (s.m_tube(), s.m_term());
    let model = add_model_vars(p, nx, nu, s.mw());
    let diag_blocks = |p: &mut ConeProgram, name: &str, count: usize, size: usize| -> Vec<BlockId> {
        (0..count)
            .map(|i| p.add_block(&format!("{name}[{i}]"), size, size, VarKind::Diagonal))
            .collect()
    };
    let K = p.add_block("K", nu, nx, VarKind::Free);
    let b_tube = p.add_block("b_tube", ml, 1, VarKind::Free);
    let b_term = p.add_block("b_term", mb, 1, VarKind::Free);
    let Theta = p.add_block("Theta", nx, nx, VarKind::Symmetric);
    let r = p.add_block("r", 1, 1, VarKind::Free);
    let M_hat = p.add_block("M_hat", mb, mb, VarKind::Diagonal);
    let eps = p.add_block("eps", s.m_eps(), 1, VarKind::Nonnegative);
    let D_tube = diag_blocks(p, "D_tube_hat", ml, ml);
    let W = diag_blocks(p, "W_hat", ml, s.mw());
    let D_term = diag_blocks(p, "D_term_hat", mb, mb);
    let S_tube = diag_blocks(p, "S_tube_hat", s.mx(), ml);
    let S_term = diag_blocks(p, "S_term_hat", s.mx(), mb);
    let R_tube = diag_blocks(p, "R_tube_hat", s.mu(), ml);
    let R_term = diag_blocks(p, "R_term_hat", s.mu(), mb);
    SynthVars {
        model,
        sigma: None,
        K,
        b_tube,
        b_term,
        Theta,
        r,
        M_hat,
        eps,
        D_tube,
        W,
        D_term,
        S_tube,
        S_term,
        R_tube,
        R_term,
        sbar: None,
    }
}

fn inv_diag(v: &Vector) -> Mat {
    diag(&v.map(|x| 1.0 / x))
}

/// Add the affine blocks of every LMI family, linearized at `it`.
pub fn add_scp_lmis(p: &mut ConeProgram, v: &SynthVars, it: &SynthIterate, s: &FixedShapes) -> Result<(), LmiError> {
    let (nx, nu) = (s.nx(), s.nu());
    let (ml, mb, mw) = (s.m_tube(), s.m_term(), s.mw());
    let eye_u = Mat::identity(nu, nu);
    let eye_x = Mat::identity(nx, nx);
    let A = p.expr(v.model.A);
    let B = p.expr(v.model.B);
    let d = p.expr(v.model.d);
    let K = p.expr(v.K);
    let bl = p.expr(v.b_tube);
    let bb = p.expr(v.b_term);
    let Th = p.expr(v.Theta);
    let c = |m: &Mat| AffMat::from_const(m);
    let lk = underestimate_L(&it.K, &eye_u, &K, &c(&eye_u))?;
    let scal = |a: Affine| AffMat::scalar(a);

    for i in 0..ml {
        let pi = row(&s.P_tube, i);
        let bt_pi = B.lmul(&pi).transpose();
        let bt_pi_cur = (&pi * &it.model.B).transpose();
        let l44 = underestimate_L(&bt_pi_cur, &eye_u, &bt_pi, &c(&eye_u))?;
        let head = scal(p.entry(v.b_tube, i, 0).scaled(2.0)).add(&l44);
        let Dh = p.expr(v.D_tube[i]);
        let Wh = p.expr(v.W[i]);
        let l55 = underestimate_L(&s.F, &inv_diag(&it.W[i]), &c(&s.F), &Wh)?;
        let l66 = underestimate_L(&s.P_tube, &inv_diag(&it.D_tube[i]), &c(&s.P_tube), &Dh)?.add(&lk);
        let m = block_sym_affine(
            &[nu, ml, mw, 1, nx, nx],
            alloc::vec![
                (0, 0, c(&eye_u)),
                (0, 3, bt_pi.scale(-1.0)),
                (0, 5, K.clone()),
                (1, 1, Dh),
                (1, 3, bl.clone()),
                (2, 2, Wh),
                (2, 3, d.clone()),
                (3, 3, head),
                (3, 4, c(&pi)),
                (3, 5, A.lmul(&pi)),
                (4, 4, l55),
                (5, 5, l66),
            ],
        );
        p.add_psd(format!("rpi[{i}]"), m);
    }

    for i in 0..mb {
        let pi = row(&s.P_term, i);
        let bt_pi = B.lmul(&pi).transpose();
        let bt_pi_cur = (&pi * &it.model.B).transpose();
        let l33 = underestimate_L(&bt_pi_cur, &eye_u, &bt_pi, &c(&eye_u))?;
        let head = scal(p.entry(v.b_term, i, 0).scaled(2.0)).add(&l33);
        let Dh = p.expr(v.D_term[i]);
        let l44 = underestimate_L(&s.P_term, &inv_diag(&it.D_term[i]), &c(&s.P_term), &Dh)?.add(&lk);
        let m = block_sym_affine(
            &[nu, mb, 1, nx],
            alloc::vec![
                (0, 0, c(&eye_u)),
                (0, 2, bt_pi.scale(-1.0)),
                (0, 3, K.clone()),
                (1, 1, Dh),
                (1, 2, bb.clone()),
                (2, 2, head),
                (2, 3, A.lmul(&pi)),
                (3, 3, l44),
            ],
        );
        p.add_psd(format!("pi[{i}]"), m);
    }

    let inclusion = |p: &mut ConeProgram,
                     label: String,
                     v_i: f64,
                     gain: AffMat,
                     Sl_id: BlockId,
                     Su_id: BlockId,
                     Sl: &Vector,
                     Su: &Vector|
     -> Result<(), LmiError> {
        let Slh = p.expr(Sl_id);
        let Suh = p.expr(Su_id);
        let l44 = underestimate_L(&s.P_tube, &inv_diag(Sl), &c(&s.P_tube), &Slh)?;
        let l55 = underestimate_L(&s.P_term, &inv_diag(Su), &c(&s.P_term), &Suh)?;
        let m = block_sym_affine(
            &[ml, mb, 1, nx, nx],
            alloc::vec![
                (0, 0, Slh),
                (0, 2, bl.clone()),
                (1, 1, Suh),
                (1, 2, bb.clone()),
                (2, 2, c(&scalar(2.0 * v_i))),
                (2, 3, gain.clone()),
                (2, 4, gain),
                (3, 3, l44),
                (4, 4, l55),
            ],
        );
        p.add_psd(label, m);
        Ok(())
    };
    for i in 0..s.mx() {
        inclusion(
            p,
            format!("state[{i}]"),
            s.vx[i],
            c(&row(&s.Vx, i)),
            v.S_tube[i],
            v.S_term[i],
            &it.S_tube[i],
            &it.S_term[i],
        )?;
    }
    for i in 0..s.mu() {
        inclusion(
            p,
            format!("input[{i}]"),
            s.vu[i],
            K.lmul(&row(&s.Vu, i)),
            v.R_tube[i],
            v.R_term[i],
            &it.R_tube[i],
            &it.R_term[i],
        )?;
    }

    let q_inv = s
        .Q_perf
        .clone()
        .try_inverse()
        .ok_or_else(|| LmiError::Singular(String::from("Q_perf")))?;
    let r_inv = s
        .R_perf
        .clone()
        .try_inverse()
        .ok_or_else(|| LmiError::Singular(String::from("R_perf")))?;
    let Bt = B.transpose();
    let l_theta = underestimate_L(&eye_x, &it.Theta, &c(&eye_x), &Th)?;
    let l_bt = underestimate_L(&it.model.B.transpose(), &eye_u, &Bt, &c(&eye_u))?;
    let diss = block_sym_affine(
        &[nu, nx, nu, nx, nx],
        alloc::vec![
            (0, 0, c(&eye_u)),
            (0, 3, Bt.scale(-1.0)),
            (0, 4, K.clone()),
            (1, 1, c(&q_inv)),
            (1, 4, c(&eye_x)),
            (2, 2, c(&r_inv)),
            (2, 4, K.clone()),
            (3, 3, l_theta.add(&l_bt)),
            (3, 4, A.clone()),
            (4, 4, Th.add(&lk)),
        ],
    );
    p.add_psd("dissipativity", diss);

    let Mh = p.expr(v.M_hat);
    let ell = underestimate_L(&s.P_term, &inv_diag(&it.M_perf), &c(&s.P_term), &Mh)?.sub(&Th);
    p.add_psd("perf_ellipse", ell);
    let radius = block_sym_affine(
        &[mb, 1],
        alloc::vec![(0, 0, Mh), (0, 1, bb.clone()), (1, 1, scal(p.entry(v.r, 0, 0)))],
    );
    p.add_psd("perf_radius", radius);
    p.add_psd("theta_pd", Th);
    Ok(())
}

/// Fresh program holding every synthesis variable and the LMI blocks.
pub fn build_scp_lmis(it: &SynthIterate, s: &FixedShapes, psd_margin: f64) -> Result<(ConeProgram, SynthVars), LmiError> {
    let mut p = ConeProgram::new(psd_margin);
    let v = add_synth_vars(&mut p, s);
    add_scp_lmis(&mut p, &v, it, s)?;
    Ok((p, v))
}

/// Rows encoding `X ⊆ P(P̄, b̄) ⊕ P(Ē, ε̄)` on the vertices of X: each vertex
/// splits as `x = y + e` with `y ∈ P(P̄, b̄)` and `e ∈ P(Ē, ε̄)`.
pub fn add_sbar_rows(p: &mut ConeProgram, b_term: BlockId, eps: BlockId, s: &FixedShapes) -> SbarVars {
    let nx = s.nx();
    let mut ys = Vec::new();
    let mut es = Vec::new();
    for (k, x) in s.X_vertices.iter().enumerate() {
        let y = p.add_block(&format!("y[{k}]"), nx, 1, VarKind::Free);
        let e = p.add_block(&format!("e[{k}]"), nx, 1, VarKind::Free);
        for j in 0..nx {
            p.add_eq(p.entry(y, j, 0).plus(&p.entry(e, j, 0)).minus(&Affine::constant(x[j])));
        }
        let py = p.expr(y).lmul(&s.P_term);
        for i in 0..s.m_term() {
            let bi = p.entry(b_term, i, 0);
            p.add_le(py.get(i, 0), &bi);
            p.add_le(&py.get(i, 0).scaled(-1.0), &bi);
        }
        let ee = p.expr(e).lmul(&s.E_cover);
        for i in 0..s.m_eps() {
            let ei = p.entry(eps, i, 0);
            p.add_le(ee.get(i, 0), &ei);
            p.add_le(&ee.get(i, 0).scaled(-1.0), &ei);
        }
        ys.push(y);
        es.push(e);
    }
    SbarVars { y: ys, e: es }
}

/// Primal vector placing `it` into the variables of `v`, hatted multipliers
/// set to the inverses of the stored ones.
pub fn encode_point(p: &ConeProgram, v: &SynthVars, it: &SynthIterate) -> Vec<f64> {
    let mut x = alloc::vec![0.0; p.num_scalar()];
    let col = |v: &Vector| Mat::from_column_slice(v.len(), 1, v.as_slice());
    p.write_value(v.model.A, &it.model.A, &mut x);
    p.write_value(v.model.B, &it.model.B, &mut x);
    p.write_value(v.model.d, &col(&it.model.d), &mut x);
    if let Some(sv) = &v.sigma {
        p.write_value(sv.Z, &it.Zslack, &mut x);
        p.write_value(sv.lambda, &scalar(it.lambda), &mut x);
    }
    p.write_value(v.K, &it.K, &mut x);
    p.write_value(v.b_tube, &col(&it.b_tube), &mut x);
    p.write_value(v.b_term, &col(&it.b_term), &mut x);
    p.write_value(v.Theta, &it.Theta, &mut x);
    p.write_value(v.r, &scalar(it.r_perf), &mut x);
    p.write_value(v.M_hat, &inv_diag(&it.M_perf), &mut x);
    p.write_value(v.eps, &col(&it.eps_cover), &mut x);
    let groups: [(&[BlockId], &[Vector]); 7] = [
        (&v.D_tube, &it.D_tube),
        (&v.W, &it.W),
        (&v.D_term, &it.D_term),
        (&v.S_tube, &it.S_tube),
        (&v.S_term, &it.S_term),
        (&v.R_tube, &it.R_tube),
        (&v.R_term, &it.R_term),
    ];
    for (ids, vals) in groups {
        for (id, val) in ids.iter().zip(vals) {
            p.write_value(*id, &inv_diag(val), &mut x);
        }
    }
    x
}

/// Read an iterate back from a primal point, inverting hatted diagonals
/// entrywise with an `EPS_POS` floor.
pub fn recover(p: &ConeProgram, v: &SynthVars, x: &[f64], prev: &SynthIterate) -> SynthIterate {
    let vec_of = |id: BlockId| p.value(id, x).column(0).into_owned();
    let inv_of = |id: BlockId| recip_clamped(&p.value(id, x).diagonal(), EPS_POS);
    let (Zslack, lambda) = match &v.sigma {
        Some(sv) => (p.value(sv.Z, x), x[p.index(sv.lambda, 0, 0).unwrap()]),
        None => (prev.Zslack.clone(), prev.lambda),
    };
    let Theta = p.value(v.Theta, x);
    SynthIterate {
        model: ModelTriple {
            A: p.value(v.model.A, x),
            B: p.value(v.model.B, x),
            d: vec_of(v.model.d),
        },
        Zslack,
        lambda,
        K: p.value(v.K, x),
        b_tube: vec_of(v.b_tube),
        b_term: vec_of(v.b_term),
        Theta: (&Theta + Theta.transpose()) * 0.5,
        r_perf: x[p.index(v.r, 0, 0).unwrap()],
        M_perf: inv_of(v.M_hat),
        eps_cover: vec_of(v.eps).map(|e| e.max(EPS_POS)),
        D_tube: v.D_tube.iter().map(|&id| inv_of(id)).collect(),
        W: v.W.iter().map(|&id| inv_of(id)).collect(),
        D_term: v.D_term.iter().map(|&id| inv_of(id)).collect(),
        S_tube: v.S_tube.iter().map(|&id| inv_of(id)).collect(),
        S_term: v.S_term.iter().map(|&id| inv_of(id)).collect(),
        R_tube: v.R_tube.iter().map(|&id| inv_of(id)).collect(),
        R_term: v.R_term.iter().map(|&id| inv_of(id)).collect(),
    }
}

/// Objective `α Σb̲ + β Σε̄ + γ r̃` over the program variables.
pub fn objective_expr(p: &ConeProgram, v: &SynthVars, w: &Weights) -> Affine {
    p.sum(v.b_tube)
        .scaled(w.alpha)
        .plus(&p.sum(v.eps).scaled(w.beta))
        .plus(&p.entry(v.r, 0, 0).scaled(w.gamma))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn underestimate_at_identity_point() {
        // L = I, D = I  ⇒  𝐋 + 𝐋ᵀ − 𝐃
        let mut p = ConeProgram::default();
        let l = p.add_block("L", 2, 2, VarKind::Free);
        let d = p.add_block("D", 2, 2, VarKind::Symmetric);
        let e = underestimate_L(&Mat::identity(2, 2), &Mat::identity(2, 2), &p.expr(l), &p.expr(d)).unwrap();
        let x = [1.0, 2.0, 3.0, 4.0, 0.5, 0.25, 2.0];
        let lv = p.value(l, &x);
        let dv = p.value(d, &x);
        let want = &lv + lv.transpose() - dv;
        assert!((e.eval(&x) - want).amax() < 1e-14);
    }

    #[test]
    fn singular_linearization_is_an_error() {
        let z = Mat::zeros(2, 2);
        let e = AffMat::from_const(&z);
        assert!(underestimate_L(&z, &z, &e, &e).is_err());
    }

    #[test]
    fn objective_examples() {
        let w = Weights::default();
        let v = |x: &[f64]| Vector::from_row_slice(x);
        assert_eq!(
            objective_value(&v(&[1.0; 10]), &v(&[0.6847; 10]), 6.0, &Weights { alpha: 0.0, beta: 0.0, gamma: 0.0 }),
            0.0
        );
        let init = objective_value(&v(&[1.0; 10]), &v(&[0.6847; 10]), 6.0, &w);
        assert!((init - 17.447).abs() < 1e-9);
        let adapt = objective_value(&v(&[0.5564; 10]), &v(&[0.4005; 10]), 20.613, &w);
        assert!((adapt - 11.6303).abs() < 1e-9);
    }
}
