//! The sequential convex programming loop: linearize at the current
//! feasible point, solve one SDP, recover, keep the step only if the
//! cost does not increase.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cone::{ConeError, ConeProgram, ConeSolver, ProblemSize, SolveStatus};
use crate::lmi::{add_sbar_rows, add_scp_lmis, add_synth_vars, check_nlmi, objective_expr, recover, LmiError, SynthIterate, SynthVars};
use crate::model_set::{add_sigma_hat_rows, certify_offsets, pin_model};
use crate::plant::TransitionSet;
use crate::setup::FixedShapes;
use crate::EPS_PSD;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScpError {
    #[error(transparent)]
    Lmi(#[from] LmiError),
    #[error(transparent)]
    Cone(#[from] ConeError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScpConfig {
    pub max_iters: usize,
    pub rel_decrease_tol: f64,
    /// Pin `(A, B, d)` to the initial model (sequential comparison mode).
    pub fix_model: bool,
    pub eps_psd: f64,
    pub theta: f64,
    /// Factor applied to `eps_psd` for the single retry after a solver failure.
    pub retry_relax: f64,
    pub monotone_slack: f64,
}

impl Default for ScpConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            rel_decrease_tol: 1e-4,
            fix_model: false,
            eps_psd: EPS_PSD,
            theta: 1e-3,
            retry_relax: 0.1,
            monotone_slack: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub objective: f64,
    pub b_tube_norm1: f64,
    pub eps_norm1: f64,
    pub r_perf: f64,
    pub status: SolveStatus,
    pub reduced_accuracy: bool,
    pub nlmi_worst: f64,
    pub solver_iterations: u32,
    /// Seconds spent inside the cone solver (0 for the initial record).
    pub solve_time: f64,
}

impl IterRecord {
    fn of(iter: usize, it: &SynthIterate, s: &FixedShapes, status: SolveStatus) -> Self {
        Self {
            iter,
            objective: it.objective(&s.weights),
            b_tube_norm1: it.b_tube.sum(),
            eps_norm1: it.eps_cover.sum(),
            r_perf: it.r_perf,
            status,
            reduced_accuracy: false,
            nlmi_worst: check_nlmi(it, s).worst(),
            solver_iterations: 0,
            solve_time: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// Relative decrease fell below the tolerance.
    Converged,
    MaxIters,
    /// The SDP failed twice; the last feasible iterate is kept.
    SolverFailure,
    /// The recovered point failed the nonlinear check; it was discarded.
    RecoveryInfeasible,
    /// The recovered point had a larger cost; it was discarded.
    CostIncrease,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScpReport {
    /// Entry 0 is the starting point.
    pub records: Vec<IterRecord>,
    pub iterates: Vec<SynthIterate>,
    pub final_iterate: SynthIterate,
    pub termination: Termination,
    pub problem_size: Option<ProblemSize>,
    pub fix_model: bool,
}

impl ScpReport {
    pub fn final_objective(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.objective)
    }

    /// True iff objectives never increase by more than `slack`.
    pub fn monotone(&self, slack: f64) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].objective <= w[0].objective + slack)
    }
}

/// The convexified problem at `it`: model-set rows (or pinned model),
/// vertex-cover rows and all LMI families.
pub fn build_sdp(
    it: &SynthIterate,
    shapes: &FixedShapes,
    j: &TransitionSet,
    cfg: &ScpConfig,
    psd_margin: f64,
) -> Result<(ConeProgram, SynthVars), ScpError> {
    let mut p = ConeProgram::new(psd_margin);
    let mut v = add_synth_vars(&mut p, shapes);
    if cfg.fix_model {
        pin_model(&mut p, &v.model, &it.model);
    } else {
        v.sigma = Some(add_sigma_hat_rows(&mut p, &v.model, j, &shapes.F, cfg.theta));
    }
    v.sbar = Some(add_sbar_rows(&mut p, v.b_term, v.eps, shapes));
    add_scp_lmis(&mut p, &v, it, shapes)?;
    p.set_objective(objective_expr(&p, &v, &shapes.weights));
    Ok((p, v))
}

pub enum StepOutcome {
    Accepted { iterate: SynthIterate, record: IterRecord },
    Rejected { termination: Termination, record: IterRecord },
}

/// One convexified solve from `it`, with a single relaxed retry.
pub fn scp_step(
    it: &SynthIterate,
    shapes: &FixedShapes,
    j: &TransitionSet,
    cfg: &ScpConfig,
    iter: usize,
    solver: &dyn ConeSolver,
) -> Result<StepOutcome, ScpError> {
    let prev_obj = it.objective(&shapes.weights);
    let mut last = IterRecord::of(iter, it, shapes, SolveStatus::NumericalTrouble);
    let mut termination = Termination::SolverFailure;
    for margin in [cfg.eps_psd, cfg.eps_psd * cfg.retry_relax] {
        let (p, v) = build_sdp(it, shapes, j, cfg, margin)?;
        let res = solver.solve(&p)?;
        last.status = res.status;
        last.solve_time += res.solve_time;
        last.solver_iterations += res.iterations;
        last.reduced_accuracy = res.reduced_accuracy;
        let x = match (res.status, res.primal()) {
            (SolveStatus::Optimal, Some(x)) => x,
            _ => continue,
        };
        let mut next = recover(&p, &v, x, it);
        if cfg.fix_model {
            next.model = it.model.clone();
        } else {
            next.model.d = certify_offsets(&next.model, j, &shapes.F, cfg.theta);
        }
        let report = check_nlmi(&next, shapes);
        let obj = next.objective(&shapes.weights);
        let record = IterRecord {
            nlmi_worst: report.worst(),
            ..IterRecord::of(iter, &next, shapes, res.status)
        };
        let record = IterRecord {
            solve_time: last.solve_time,
            solver_iterations: last.solver_iterations,
            reduced_accuracy: last.reduced_accuracy,
            ..record
        };
        if !report.feasible() {
            termination = Termination::RecoveryInfeasible;
            last = record;
            continue;
        }
        if obj > prev_obj + cfg.monotone_slack {
            return Ok(StepOutcome::Rejected {
                termination: Termination::CostIncrease,
                record,
            });
        }
        return Ok(StepOutcome::Accepted { iterate: next, record });
    }
    Ok(StepOutcome::Rejected {
        termination,
        record: last,
    })
}

/// Iterate from a feasible starting point until the relative cost
/// decrease drops below tolerance or the budget is spent. Always returns
/// a report whose final iterate is the last accepted one.
pub fn run_algorithm1(
    init: &SynthIterate,
    shapes: &FixedShapes,
    j: &TransitionSet,
    cfg: &ScpConfig,
    solver: &dyn ConeSolver,
) -> Result<ScpReport, ScpError> {
    let mut records = alloc::vec![IterRecord::of(0, init, shapes, SolveStatus::Optimal)];
    let mut iterates = alloc::vec![init.clone()];
    let mut cur = init.clone();
    let mut termination = Termination::MaxIters;
    let problem_size = if cfg.max_iters > 0 {
        Some(build_sdp(init, shapes, j, cfg, cfg.eps_psd)?.0.problem_size())
    } else {
        None
    };
    for k in 1..=cfg.max_iters {
        match scp_step(&cur, shapes, j, cfg, k, solver)? {
            StepOutcome::Accepted { iterate, record } => {
                let prev = records.last().unwrap().objective;
                let obj = record.objective;
                records.push(record);
                iterates.push(iterate.clone());
                cur = iterate;
                if prev - obj <= cfg.rel_decrease_tol * libm::fabs(prev) {
                    termination = Termination::Converged;
                    break;
                }
            }
            StepOutcome::Rejected { termination: t, .. } => {
                termination = t;
                break;
            }
        }
    }
    Ok(ScpReport {
        records,
        iterates,
        final_iterate: cur,
        termination,
        problem_size,
        fix_model: cfg.fix_model,
    })
}

/// Dimensions entering the size formulas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeDims {
    pub nx: usize,
    pub nu: usize,
    pub mw: usize,
    pub m_tube: usize,
    pub m_term: usize,
    pub m_eps: usize,
    /// Facet pairs of `X` and `U`.
    pub mx: usize,
    pub mu: usize,
    pub n_vertices: usize,
    pub n_triples: usize,
}

impl SizeDims {
    pub fn of(s: &FixedShapes, n_triples: usize) -> Self {
        Self {
            nx: s.nx(),
            nu: s.nu(),
            mw: s.mw(),
            m_tube: s.m_tube(),
            m_term: s.m_term(),
            m_eps: s.m_eps(),
            mx: s.mx(),
            mu: s.mu(),
            n_vertices: s.X_vertices.len(),
            n_triples,
        }
    }
}

/// Closed-form counts for the convexified problem, independent of any
/// assembled program.
pub fn symbolic_size(d: &SizeDims, fix_model: bool) -> ProblemSize {
    let SizeDims { nx, nu, mw, m_tube: ml, m_term: mb, m_eps: me, mx, mu, n_vertices: nv, n_triples: t } = *d;
    let lmi_rows = ml * (nu + ml + mw + 1 + 2 * nx)
        + mb * (nu + mb + 1 + nx)
        + (mx + mu) * (ml + mb + 1 + 2 * nx)
        + (2 * nu + 3 * nx)
        + nx
        + (mb + 1)
        + nx;
    let psd_blocks = ml + mb + mx + mu + 4;
    let model = nx * nx + nx * nu + mw;
    let envelope = mw * (2 * nx + nu);
    let multipliers = ml * ml + ml * mw + mb * mb + (mx + mu) * (ml + mb);
    let core_vars =
        model + nu * nx + ml + mb + nx * (nx + 1) / 2 + 1 + mb + me + multipliers + 2 * nx * nv;
    let cover_rows = nv * 2 * (mb + me);
    if fix_model {
        ProblemSize {
            lmi_rows,
            psd_blocks,
            equalities: nx * nv + model,
            inequalities: cover_rows,
            bounds: me,
            scalar_variables: core_vars,
        }
    } else {
        ProblemSize {
            lmi_rows,
            psd_blocks,
            equalities: nx * nv,
            inequalities: crate::model_set::sigma_hat_row_count(t, nx, nu, mw) + cover_rows,
            bounds: envelope + me,
            scalar_variables: core_vars + envelope + 1,
        }
    }
}
