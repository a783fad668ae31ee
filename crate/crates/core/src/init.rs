//! A first feasible point for the synthesis problem: model LP, LQR gain,
//! tube by support recursion, terminal set by constraint backpropagation,
//! then an SDP for the remaining multipliers and performance bound.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cone::{block_sym_affine, AffMat, Affine, BlockId, ConeError, ConeProgram, ConeSolver, SolveStatus, VarKind};
use crate::control::{lqr_gain, solve_lyapunov, spectral_radius, ControlError, StateSpace};
use crate::linalg::{row, vstack, Mat, Vector};
use crate::lmi::{add_sbar_rows, check_nlmi, NlmiReport, SynthIterate};
use crate::model_set::{certify_offsets, initial_model_lp, sigma_hat_rows, ModelSetError, ModelTriple};
use crate::plant::TransitionSet;
use crate::polytope::{PolytopeError, SymPolytope};
use crate::setup::FixedShapes;
use crate::EPS_POS;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InitError {
    #[error("model LP: {0}")]
    ModelSet(#[from] ModelSetError),
    #[error("gain: {0}")]
    Control(#[from] ControlError),
    #[error("set computation: {0}")]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error("closed loop is not contractive (spectral radius {0})")]
    Unstable(f64),
    #[error("tube recursion did not settle after {iters} steps (last change {change:e})")]
    NoContraction { iters: usize, change: f64 },
    #[error("tube violates {0}")]
    ConstraintViolation(String),
    #[error("tightened constraint set is empty")]
    EmptyTightening,
    #[error("constraint backpropagation not finitely determined in {0} steps")]
    NonFiniteDetermination(usize),
    #[error("no terminal template on the fixed normals is invariant")]
    TerminalNotInvariant,
    #[error("multiplier SDP failed ({status:?}) after {attempts} attempts")]
    Step5 { status: SolveStatus, attempts: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitConfig {
    pub theta: f64,
    /// Relative inflation of the tube (and shrink of the terminal set) that
    /// turns set inclusions into strict matrix inequalities.
    pub delta_rpi: f64,
    /// Rescale tube normals so the initial tube offsets are all one.
    pub normalize_tube: bool,
    /// PSD margin of the multiplier SDP (larger than the SCP margin so the
    /// first convexified problem has room).
    pub step5_margin: f64,
    /// Box on the diagonal multipliers of the multiplier SDP.
    pub multiplier_bounds: (f64, f64),
    /// Scales applied in turn to the input weight of the LQR gain when the
    /// resulting tube does not fit inside the constraints.
    pub gain_r_scales: Vec<f64>,
    pub max_terminal_steps: usize,
    pub max_retries: usize,
    pub rpi_tol: f64,
    pub rpi_max_iters: usize,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            theta: 1e-3,
            delta_rpi: 1e-3,
            normalize_tube: true,
            step5_margin: 1e-5,
            multiplier_bounds: (1e-6, 1e6),
            gain_r_scales: alloc::vec![1.0, 0.25, 0.0625],
            max_terminal_steps: 500,
            max_retries: 5,
            rpi_tol: 1e-9,
            rpi_max_iters: 200_000,
        }
    }
}

/// Offsets of the tube on `P_tube`: the least fixed point of
/// `b ↦ h_W(P̲_i) + h_{P(P̲,b)}(ΦᵀP̲_iᵀ)` from `b = h_W(P̲)`, inflated by `1 + δ`.
pub fn init_rpi(
    phi: &Mat,
    W: &SymPolytope,
    P_tube: &Mat,
    delta: f64,
    tol: f64,
    max_iters: usize,
    solver: &dyn ConeSolver,
) -> Result<Vector, InitError> {
    let rho = spectral_radius(phi);
    if rho >= 1.0 {
        return Err(InitError::Unstable(rho));
    }
    let hw = W.support_rows_auto(solver, P_tube)?;
    let dirs = P_tube * phi;
    let floor = EPS_POS.max(tol);
    let mut b = hw.map(|v| v.max(floor));
    let mut change = f64::INFINITY;
    for _ in 0..max_iters {
        let tube = SymPolytope::new(P_tube.clone(), b.clone())?;
        let next = (&hw + tube.support_rows_auto(solver, &dirs)?).map(|v| v.max(floor));
        change = (&next - &b).amax();
        if !change.is_finite() || next.amax() > 1e12 {
            break;
        }
        b = next;
        if change < tol {
            return Ok(b * (1.0 + delta));
        }
    }
    Err(InitError::NoContraction {
        iters: max_iters,
        change,
    })
}

/// `ΔX ⊂ X` and `KΔX ⊂ U` by support functions.
pub fn check_tube_admissible(
    tube: &SymPolytope,
    K: &Mat,
    X: &SymPolytope,
    U: &SymPolytope,
    solver: &dyn ConeSolver,
) -> Result<(), InitError> {
    let hx = tube.support_rows_auto(solver, X.normals())?;
    if let Some(i) = (0..hx.len()).find(|&i| hx[i] >= X.offsets()[i]) {
        return Err(InitError::ConstraintViolation(format!(
            "state row {i}: support {:.6} ≥ {:.6}",
            hx[i],
            X.offsets()[i]
        )));
    }
    let hu = tube.support_rows_auto(solver, &(U.normals() * K))?;
    if let Some(i) = (0..hu.len()).find(|&i| hu[i] >= U.offsets()[i]) {
        return Err(InitError::ConstraintViolation(format!(
            "input row {i}: support {:.6} ≥ {:.6}",
            hu[i],
            U.offsets()[i]
        )));
    }
    Ok(())
}

/// `O₀ = {x : x ∈ X ⊖ ΔX, Kx ∈ U ⊖ KΔX}` as one symmetric polytope.
pub fn tightened_set(
    tube: &SymPolytope,
    K: &Mat,
    X: &SymPolytope,
    U: &SymPolytope,
    solver: &dyn ConeSolver,
) -> Result<SymPolytope, InitError> {
    let ku = U.normals() * K;
    let rows = vstack(&[X.normals(), &ku]);
    let h = tube.support_rows_auto(solver, &rows)?;
    let off = Vector::from_iterator(
        rows.nrows(),
        X.offsets().iter().chain(U.offsets().iter()).copied(),
    ) - h;
    if off.iter().any(|v| *v <= 0.0) {
        return Err(InitError::EmptyTightening);
    }
    Ok(SymPolytope::new(rows, off)?)
}

/// Maximal admissible invariant set of `x⁺ = Φx` inside `O₀`, as a
/// polytope with the redundant backpropagated rows dropped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleSet {
    pub set: SymPolytope,
    /// `k*` such that `O_{k*} = O_{k*+1}`.
    pub steps: usize,
}

pub fn max_admissible_set(
    phi: &Mat,
    o0: &SymPolytope,
    max_steps: usize,
    solver: &dyn ConeSolver,
) -> Result<AdmissibleSet, InitError> {
    let base = o0.normals().clone();
    let base_off = o0.offsets().clone();
    let mut rows: Vec<Vec<f64>> = base.row_iter().map(|r| r.iter().copied().collect()).collect();
    let mut offs: Vec<f64> = base_off.iter().copied().collect();
    let mut power = phi.clone();
    let n = phi.nrows();
    for k in 1..=max_steps {
        let cur = SymPolytope::new(
            Mat::from_fn(rows.len(), n, |i, j| rows[i][j]),
            Vector::from_vec(offs.clone()),
        )?;
        let cand = &base * &power;
        let h = cur.support_rows_auto(solver, &cand)?;
        let mut added = false;
        for i in 0..cand.nrows() {
            if h[i] > base_off[i] * (1.0 + 1e-9) + 1e-12 {
                rows.push(cand.row(i).iter().copied().collect());
                offs.push(base_off[i]);
                added = true;
            }
        }
        if !added {
            return Ok(AdmissibleSet { set: cur, steps: k - 1 });
        }
        power = &power * phi;
    }
    Err(InitError::NonFiniteDetermination(max_steps))
}

/// `max_i h_S(ΦᵀP_iᵀ) − b_i`; nonpositive iff `ΦS ⊆ S`.
pub fn invariance_gap(phi: &Mat, s: &SymPolytope, solver: &dyn ConeSolver) -> Result<f64, InitError> {
    let h = s.support_rows_auto(solver, &(s.normals() * phi))?;
    Ok((h - s.offsets()).max())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminalFit {
    #[serde(with = "crate::linalg::serde_vec")]
    pub b_term: Vector,
    pub admissible: AdmissibleSet,
    /// Scale applied to the template before the `1 − δ` shrink.
    pub scale: f64,
    pub template: TerminalTemplate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminalTemplate {
    /// Tangent polygon of a Lyapunov level set of `Φ`.
    Lyapunov,
    /// Outer hull of the admissible set on the fixed normals.
    AdmissibleHull,
}

/// Terminal offsets on `P_term`: a template polygon scaled as large as
/// possible inside the maximal admissible set, then shrunk by `1 − δ`.
#[allow(clippy::too_many_arguments)]
pub fn init_terminal(
    phi: &Mat,
    K: &Mat,
    tube: &SymPolytope,
    shapes: &FixedShapes,
    lyap_weight: &Mat,
    delta: f64,
    max_steps: usize,
    solver: &dyn ConeSolver,
) -> Result<TerminalFit, InitError> {
    let o0 = tightened_set(tube, K, &shapes.state_set(), &shapes.input_set(), solver)?;
    let adm = max_admissible_set(phi, &o0, max_steps, solver)?;
    let P_term = &shapes.P_term;

    let mut templates: Vec<(TerminalTemplate, Vector)> = Vec::new();
    if let Ok(P) = solve_lyapunov(phi, lyap_weight, 1e-13) {
        if let Some(pinv) = P.try_inverse() {
            let b0 = Vector::from_fn(P_term.nrows(), |i, _| {
                let p = row(P_term, i);
                libm::sqrt((&p * &pinv * p.transpose())[(0, 0)])
            });
            templates.push((TerminalTemplate::Lyapunov, b0));
        }
    }
    templates.push((
        TerminalTemplate::AdmissibleHull,
        adm.set.support_rows(solver, P_term)?,
    ));

    for (kind, b0) in templates {
        let shape = SymPolytope::new(P_term.clone(), b0.clone())?;
        if invariance_gap(phi, &shape, solver)? > 0.0 {
            continue;
        }
        let h = shape.support_rows_auto(solver, adm.set.normals())?;
        let scale = adm
            .set
            .offsets()
            .iter()
            .zip(h.iter())
            .filter(|(_, hv)| **hv > 0.0)
            .map(|(o, hv)| o / hv)
            .fold(f64::INFINITY, f64::min);
        if !scale.is_finite() || scale <= 0.0 {
            continue;
        }
        return Ok(TerminalFit {
            b_term: b0 * (scale * (1.0 - delta)),
            admissible: adm,
            scale,
            template: kind,
        });
    }
    Err(InitError::TerminalNotInvariant)
}

/// Diagonal multiplier blocks of the multiplier SDP, stored uninverted.
struct Step5Vars {
    D_tube: Vec<BlockId>,
    W: Vec<BlockId>,
    D_term: Vec<BlockId>,
    S_tube: Vec<BlockId>,
    S_term: Vec<BlockId>,
    R_tube: Vec<BlockId>,
    R_term: Vec<BlockId>,
    Theta: BlockId,
    r: BlockId,
    M: BlockId,
}

/// `Σ_j D_j b_j²` for a diagonal block `D`.
fn weighted_sq(p: &ConeProgram, D: BlockId, b: &Vector) -> Affine {
    let mut e = Affine::default();
    for (j, bj) in b.iter().enumerate() {
        e.add_term(p.index(D, j, j).unwrap(), bj * bj);
    }
    e
}

/// `Mᵀ D M` for a diagonal block `D`.
fn gram(p: &ConeProgram, D: BlockId, M: &Mat) -> AffMat {
    p.expr(D).lmul(&M.transpose()).rmul(M)
}

/// With `(A, B, d, K, b̲, b̄)` fixed, the multiplier conditions are LMIs in
/// the multipliers and `(Θ̃, r̃, M̃)`. Minimizes `r̃`.
#[allow(clippy::too_many_arguments)]
pub fn init_step5(
    model: &ModelTriple,
    K: &Mat,
    b_tube: &Vector,
    b_term: &Vector,
    shapes: &FixedShapes,
    margin: f64,
    bounds: (f64, f64),
    solver: &dyn ConeSolver,
) -> Result<SynthIterate, InitError> {
    let s = shapes;
    let (nx, ml, mb, mw) = (s.nx(), s.m_tube(), s.m_term(), s.mw());
    let phi = &model.A + &model.B * K;
    let mut p = ConeProgram::new(margin);
    let diag_blocks = |p: &mut ConeProgram, name: &str, count: usize, size: usize| -> Vec<BlockId> {
        (0..count)
            .map(|i| p.add_block(&format!("{name}[{i}]"), size, size, VarKind::Diagonal))
            .collect()
    };
    let v = Step5Vars {
        D_tube: diag_blocks(&mut p, "D_tube", ml, ml),
        W: diag_blocks(&mut p, "W", ml, mw),
        D_term: diag_blocks(&mut p, "D_term", mb, mb),
        S_tube: diag_blocks(&mut p, "S_tube", s.mx(), ml),
        S_term: diag_blocks(&mut p, "S_term", s.mx(), mb),
        R_tube: diag_blocks(&mut p, "R_tube", s.mu(), ml),
        R_term: diag_blocks(&mut p, "R_term", s.mu(), mb),
        Theta: p.add_block("Theta", nx, nx, VarKind::Symmetric),
        r: p.add_block("r", 1, 1, VarKind::Free),
        M: p.add_block("M", mb, mb, VarKind::Diagonal),
    };
    let all_diag: Vec<BlockId> = [
        &v.D_tube, &v.W, &v.D_term, &v.S_tube, &v.S_term, &v.R_tube, &v.R_term,
    ]
    .into_iter()
    .flatten()
    .copied()
    .chain(core::iter::once(v.M))
    .collect();
    for &id in &all_diag {
        let n = p.block(id).rows;
        for j in 0..n {
            let e = p.entry(id, j, j);
            p.add_ge0(e.clone().minus(&Affine::constant(bounds.0)));
            p.add_le(&e, &Affine::constant(bounds.1));
        }
    }
    let c = |m: &Mat| AffMat::from_const(m);
    let scalar = |a: Affine| AffMat::scalar(a);

    for i in 0..ml {
        let pi = row(&s.P_tube, i);
        let head = Affine::constant(2.0 * b_tube[i])
            .minus(&weighted_sq(&p, v.D_tube[i], b_tube))
            .minus(&weighted_sq(&p, v.W[i], &model.d));
        let m = block_sym_affine(
            &[1, nx, nx],
            alloc::vec![
                (0, 0, scalar(head)),
                (0, 1, c(&pi)),
                (0, 2, c(&(&pi * &phi))),
                (1, 1, gram(&p, v.W[i], &s.F)),
                (2, 2, gram(&p, v.D_tube[i], &s.P_tube)),
            ],
        );
        p.add_psd(format!("rpi[{i}]"), m);
    }
    for i in 0..mb {
        let pi = row(&s.P_term, i);
        let head = Affine::constant(2.0 * b_term[i]).minus(&weighted_sq(&p, v.D_term[i], b_term));
        let m = block_sym_affine(
            &[1, nx],
            alloc::vec![
                (0, 0, scalar(head)),
                (0, 1, c(&(&pi * &phi))),
                (1, 1, gram(&p, v.D_term[i], &s.P_term)),
            ],
        );
        p.add_psd(format!("pi[{i}]"), m);
    }
    let mut inclusion = |label: String, vi: f64, gain: Mat, Sl: BlockId, Su: BlockId| {
        let head = Affine::constant(2.0 * vi)
            .minus(&weighted_sq(&p, Sl, b_tube))
            .minus(&weighted_sq(&p, Su, b_term));
        let m = block_sym_affine(
            &[1, nx, nx],
            alloc::vec![
                (0, 0, scalar(head)),
                (0, 1, c(&gain)),
                (0, 2, c(&gain)),
                (1, 1, gram(&p, Sl, &s.P_tube)),
                (2, 2, gram(&p, Su, &s.P_term)),
            ],
        );
        p.add_psd(label, m);
    };
    for i in 0..s.mx() {
        inclusion(format!("state[{i}]"), s.vx[i], row(&s.Vx, i), v.S_tube[i], v.S_term[i]);
    }
    for i in 0..s.mu() {
        inclusion(format!("input[{i}]"), s.vu[i], row(&s.Vu, i) * K, v.R_tube[i], v.R_term[i]);
    }
    let Th = p.expr(v.Theta);
    let diss = Th
        .sub(&Th.lmul(&phi.transpose()).rmul(&phi))
        .add_const(&(-(&s.Q_perf + K.transpose() * &s.R_perf * K)));
    p.add_psd("dissipativity", diss);
    p.add_psd("perf_ellipse", gram(&p, v.M, &s.P_term).sub(&Th));
    let radius = p.entry(v.r, 0, 0).minus(&weighted_sq(&p, v.M, b_term));
    p.add_psd("perf_radius", scalar(radius));
    p.set_objective(p.entry(v.r, 0, 0));

    let res = solver.solve(&p)?;
    let x = match (res.status, res.primal()) {
        (SolveStatus::Optimal, Some(x)) => x,
        (status, _) => return Err(InitError::Step5 { status, attempts: 1 }),
    };
    let dv = |id: BlockId| p.value(id, x).diagonal().map(|e| e.max(EPS_POS));
    let dvs = |ids: &[BlockId]| ids.iter().map(|&id| dv(id)).collect::<Vec<_>>();
    let Theta = p.value(v.Theta, x);
    Ok(SynthIterate {
        model: model.clone(),
        Zslack: Mat::zeros(mw, 2 * nx + s.nu()),
        lambda: 0.0,
        K: K.clone(),
        b_tube: b_tube.clone(),
        b_term: b_term.clone(),
        Theta: (&Theta + Theta.transpose()) * 0.5,
        r_perf: x[p.index(v.r, 0, 0).unwrap()],
        M_perf: dv(v.M),
        eps_cover: Vector::from_element(s.m_eps(), EPS_POS),
        D_tube: dvs(&v.D_tube),
        W: dvs(&v.W),
        D_term: dvs(&v.D_term),
        S_tube: dvs(&v.S_tube),
        S_term: dvs(&v.S_term),
        R_tube: dvs(&v.R_tube),
        R_term: dvs(&v.R_term),
    })
}

/// Smallest `‖ε̄‖₁` with every vertex of X in `P(P̄, b̄) ⊕ P(Ē, ε̄)`.
pub fn init_cover(b_term: &Vector, shapes: &FixedShapes, solver: &dyn ConeSolver) -> Result<Vector, InitError> {
    let mut p = ConeProgram::new(0.0);
    let bt = p.add_block("b_term", shapes.m_term(), 1, VarKind::Free);
    let eps = p.add_block("eps", shapes.m_eps(), 1, VarKind::Nonnegative);
    for i in 0..shapes.m_term() {
        p.add_eq(p.entry(bt, i, 0).minus(&Affine::constant(b_term[i])));
    }
    add_sbar_rows(&mut p, bt, eps, shapes);
    p.set_objective(p.sum(eps));
    let res = solver.solve(&p)?;
    match (res.status, res.primal()) {
        (SolveStatus::Optimal, Some(x)) => Ok(p.value(eps, x).column(0).map(|e| e.max(EPS_POS))),
        (status, _) => Err(InitError::Step5 { status, attempts: 1 }),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitReport {
    pub theta: f64,
    pub delta_rpi: f64,
    pub attempts: usize,
    /// Input-weight scale used for the LQR gain.
    pub gain_r_scale: f64,
    pub model_lp_objective: f64,
    pub spectral_radius: f64,
    pub terminal_steps: usize,
    pub terminal_template: TerminalTemplate,
    pub objective: f64,
    pub b_tube_norm1: f64,
    pub eps_norm1: f64,
    pub r_perf: f64,
    pub nlmi: NlmiReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitOutput {
    /// Shapes actually used (tube normals are rescaled when normalizing).
    pub shapes: FixedShapes,
    pub iterate: SynthIterate,
    pub report: InitReport,
}

/// Steps (i)–(v): model LP at `θ̂`, LQR gain, tube, terminal set, multipliers.
pub fn initialize(
    j: &TransitionSet,
    shapes: &FixedShapes,
    cfg: &InitConfig,
    solver: &dyn ConeSolver,
) -> Result<InitOutput, InitError> {
    let rows = sigma_hat_rows(j, &shapes.F, cfg.theta);
    let fit = initial_model_lp(&rows, solver, cfg.theta)?;
    let mut model = fit.model.clone();
    model.d = certify_offsets(&model, j, &shapes.F, cfg.theta);
    let sys = StateSpace::new(model.A.clone(), model.B.clone())?;
    let mut last = None;
    for &scale in &cfg.gain_r_scales {
        let K = lqr_gain(&sys, &shapes.Q_perf, &(&shapes.R_perf * scale))?;
        match initialize_with(&model, &K, fit.Z.clone(), fit.lambda, fit.objective, shapes, cfg, solver) {
            Ok(mut out) => {
                out.report.gain_r_scale = scale;
                return Ok(out);
            }
            Err(e @ InitError::ConstraintViolation(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or(InitError::ConstraintViolation("no gain scales configured".into())))
}

/// Steps (iii)–(v) for a given model and gain.
#[allow(clippy::too_many_arguments)]
pub fn initialize_with(
    model: &ModelTriple,
    K: &Mat,
    Zslack: Mat,
    lambda: f64,
    model_lp_objective: f64,
    shapes: &FixedShapes,
    cfg: &InitConfig,
    solver: &dyn ConeSolver,
) -> Result<InitOutput, InitError> {
    let phi = &model.A + &model.B * K;
    let W = SymPolytope::new(shapes.F.clone(), model.d.clone())?;
    let lyap_weight = &shapes.Q_perf + K.transpose() * &shapes.R_perf * K;
    let mut last_status = SolveStatus::NumericalTrouble;
    for attempt in 0..=cfg.max_retries {
        let delta = cfg.delta_rpi * libm::pow(2.0, attempt as f64);
        let mut s = shapes.clone();
        let mut b_tube = init_rpi(&phi, &W, &s.P_tube, delta, cfg.rpi_tol, cfg.rpi_max_iters, solver)?;
        if cfg.normalize_tube {
            for i in 0..b_tube.len() {
                let scale = b_tube[i];
                s.P_tube.row_mut(i).unscale_mut(scale);
                b_tube[i] = 1.0;
            }
        }
        let tube = SymPolytope::new(s.P_tube.clone(), b_tube.clone())?;
        check_tube_admissible(&tube, K, &s.state_set(), &s.input_set(), solver)?;
        let term = init_terminal(&phi, K, &tube, &s, &lyap_weight, delta, cfg.max_terminal_steps, solver)?;
        let mut it = match init_step5(
            model,
            K,
            &b_tube,
            &term.b_term,
            &s,
            cfg.step5_margin,
            cfg.multiplier_bounds,
            solver,
        ) {
            Ok(it) => it,
            Err(InitError::Step5 { status, .. }) => {
                last_status = status;
                continue;
            }
            Err(e) => return Err(e),
        };
        it.Zslack = Zslack.clone();
        it.lambda = lambda;
        it.eps_cover = init_cover(&term.b_term, &s, solver)?;
        let nlmi = check_nlmi(&it, &s);
        if !nlmi.feasible() {
            last_status = SolveStatus::NumericalTrouble;
            continue;
        }
        let report = InitReport {
            theta: cfg.theta,
            delta_rpi: delta,
            attempts: attempt + 1,
            gain_r_scale: 1.0,
            model_lp_objective,
            spectral_radius: spectral_radius(&phi),
            terminal_steps: term.admissible.steps,
            terminal_template: term.template,
            objective: it.objective(&s.weights),
            b_tube_norm1: it.b_tube.sum(),
            eps_norm1: it.eps_cover.sum(),
            r_perf: it.r_perf,
            nlmi,
        };
        return Ok(InitOutput {
            shapes: s,
            iterate: it,
            report,
        });
    }
    Err(InitError::Step5 {
        status: last_status,
        attempts: cfg.max_retries + 1,
    })
}
