//! Cone-program assembly: linear objective (optionally quadratic), linear
//! equalities and inequalities, and PSD blocks whose entries are affine in the
//! registered scalar variables.
//!
//! Conventions:
//! - equalities are `e(x) = 0`, inequalities are `g(x) ≥ 0`;
//! - every PSD block `M(x)` is enforced as `M(x) ⪰ psd_margin·I`;
//! - symmetric blocks are vectorized column-major over the upper triangle with
//!   off-diagonal entries scaled by `√2`, so `⟨svec(X), svec(Y)⟩ = tr(XY)`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Mat;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConeError {
    #[error("dimension mismatch in {context}: {detail}")]
    DimensionMismatch { context: String, detail: String },
    #[error("expression references unregistered variable {index} (program has {count})")]
    UnknownVariable { index: usize, count: usize },
    #[error("PSD block `{0}` is not symmetric")]
    NotSymmetric(String),
    #[error("conic text export does not support quadratic objectives")]
    QuadraticExport,
}

/// Affine scalar expression `Σ coef·x[idx] + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(idx: usize) -> Self {
        Self::term(idx, 1.0)
    }

    pub fn term(idx: usize, coef: f64) -> Self {
        Self {
            terms: vec![(idx, coef)],
            constant: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.terms.iter().all(|(_, c)| *c == 0.0)
    }

    pub fn add_scaled(&mut self, other: &Affine, s: f64) {
        if s == 0.0 {
            return;
        }
        self.constant += s * other.constant;
        self.terms
            .extend(other.terms.iter().map(|&(i, c)| (i, c * s)));
    }

    pub fn add_term(&mut self, idx: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((idx, coef));
        }
    }

    pub fn scaled(&self, s: f64) -> Affine {
        let mut out = Affine::default();
        out.add_scaled(self, s);
        out
    }

    pub fn plus(mut self, other: &Affine) -> Affine {
        self.add_scaled(other, 1.0);
        self
    }

    pub fn minus(mut self, other: &Affine) -> Affine {
        self.add_scaled(other, -1.0);
        self
    }

    /// Merge duplicate variable indices and drop exact zeros.
    pub fn compress(&mut self) {
        if self.terms.len() < 2 {
            self.terms.retain(|(_, c)| *c != 0.0);
            return;
        }
        self.terms.sort_unstable_by_key(|(i, _)| *i);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(i, c) in &self.terms {
            match merged.last_mut() {
                Some((j, acc)) if *j == i => *acc += c,
                _ => merged.push((i, c)),
            }
        }
        merged.retain(|(_, c)| *c != 0.0);
        self.terms = merged;
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }

    fn max_index(&self) -> Option<usize> {
        self.terms.iter().map(|(i, _)| *i).max()
    }
}

/// Dense matrix of affine expressions (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct AffMat {
    rows: usize,
    cols: usize,
    data: Vec<Affine>,
}

impl AffMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Affine::default(); rows * cols],
        }
    }

    pub fn from_const(m: &Mat) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                out.data[r * m.ncols() + c].constant = m[(r, c)];
            }
        }
        out
    }

    pub fn scalar(a: Affine) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![a],
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> &Affine {
        &self.data[r * self.cols + c]
    }

    pub fn get_mut(&mut self, r: usize, c: usize) -> &mut Affine {
        &mut self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, a: Affine) {
        self.data[r * self.cols + c] = a;
    }

    pub fn transpose(&self) -> AffMat {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.get(r, c).clone();
            }
        }
        out
    }

    fn zip_with(&self, other: &AffMat, s: f64, ctx: &str) -> AffMat {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in {ctx}");
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            a.add_scaled(b, s);
        }
        out
    }

    pub fn add(&self, other: &AffMat) -> AffMat {
        self.zip_with(other, 1.0, "add")
    }

    pub fn sub(&self, other: &AffMat) -> AffMat {
        self.zip_with(other, -1.0, "sub")
    }

    pub fn add_const(&self, m: &Mat) -> AffMat {
        self.add(&AffMat::from_const(m))
    }

    pub fn scale(&self, s: f64) -> AffMat {
        AffMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a.scaled(s)).collect(),
        }
    }

    /// `m · self` for a constant matrix `m`.
    pub fn lmul(&self, m: &Mat) -> AffMat {
        assert_eq!(m.ncols(), self.rows, "shape mismatch in lmul");
        let mut out = Self::zeros(m.nrows(), self.cols);
        for i in 0..m.nrows() {
            for k in 0..self.rows {
                let s = m[(i, k)];
                if s == 0.0 {
                    continue;
                }
                for j in 0..self.cols {
                    let src = &self.data[k * self.cols + j];
                    out.data[i * self.cols + j].add_scaled(src, s);
                }
            }
        }
        out.compress();
        out
    }

    /// `self · m` for a constant matrix `m`.
    pub fn rmul(&self, m: &Mat) -> AffMat {
        self.transpose().lmul(&m.transpose()).transpose()
    }

    pub fn compress(&mut self) {
        for a in &mut self.data {
            a.compress();
        }
    }

    pub fn eval(&self, x: &[f64]) -> Mat {
        Mat::from_fn(self.rows, self.cols, |r, c| self.get(r, c).eval(x))
    }

    pub fn entries(&self) -> impl Iterator<Item = &Affine> {
        self.data.iter()
    }

    fn is_symmetric(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for r in 0..self.rows {
            for c in (r + 1)..self.cols {
                let mut a = self.get(r, c).clone();
                a.add_scaled(self.get(c, r), -1.0);
                a.compress();
                if a.constant.abs() > 1e-12 * (1.0 + self.get(r, c).constant.abs())
                    || a.terms.iter().any(|(_, v)| v.abs() > 1e-12)
                {
                    return false;
                }
            }
        }
        true
    }
}

/// Assemble a symmetric affine matrix from a grid of upper-triangular blocks.
pub fn block_sym_affine(sizes: &[usize], upper: Vec<(usize, usize, AffMat)>) -> AffMat {
    let mut offsets = Vec::with_capacity(sizes.len());
    let mut n = 0;
    for s in sizes {
        offsets.push(n);
        n += s;
    }
    let mut out = AffMat::zeros(n, n);
    for (bi, bj, blk) in upper {
        assert!(bi <= bj, "block indices must be upper triangular");
        assert_eq!(
            blk.shape(),
            (sizes[bi], sizes[bj]),
            "block ({bi},{bj}) has wrong shape"
        );
        for r in 0..blk.rows {
            for c in 0..blk.cols {
                let e = blk.get(r, c).clone();
                if bi != bj {
                    out.set(offsets[bj] + c, offsets[bi] + r, e.clone());
                }
                out.set(offsets[bi] + r, offsets[bj] + c, e);
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Free,
    Nonnegative,
    /// Diagonal matrix; only the diagonal is stored. Positivity comes from
    /// the PSD blocks it appears in.
    Diagonal,
    Symmetric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub kind: VarKind,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(usize);

#[derive(Clone, Debug, PartialEq)]
pub struct PsdConstraint {
    pub label: String,
    pub mat: AffMat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeProgram {
    blocks: Vec<VarBlock>,
    n_scalar: usize,
    objective: Affine,
    quadratic: Vec<(usize, usize, f64)>,
    equalities: Vec<Affine>,
    inequalities: Vec<Affine>,
    psd: Vec<PsdConstraint>,
    pub psd_margin: f64,
}

impl Default for ConeProgram {
    fn default() -> Self {
        Self::new(crate::EPS_PSD)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeSpec {
    Zero(usize),
    Nonnegative(usize),
    Psd(usize),
}

/// Solver-ready data for `min ½xᵀPx + qᵀx  s.t.  Ax + s = b, s ∈ K`.
#[derive(Clone, Debug, PartialEq)]
pub struct AssembledProgram {
    pub n: usize,
    pub m: usize,
    /// Upper-triangular entries of `P`.
    pub p_triplets: Vec<(usize, usize, f64)>,
    pub q: Vec<f64>,
    pub objective_constant: f64,
    pub a_triplets: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub cones: Vec<ConeSpec>,
    /// Variables that no constraint or objective term references.
    pub unreferenced: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalTrouble,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Primal point; present iff `status == Optimal`.
    pub x: Option<Vec<f64>>,
    pub objective: f64,
    pub iterations: u32,
    pub solve_time: f64,
    /// Set when the backend only reached its reduced-accuracy tolerances.
    pub reduced_accuracy: bool,
}

impl SolveResult {
    pub fn failed(status: SolveStatus) -> Self {
        Self {
            status,
            x: None,
            objective: f64::NAN,
            iterations: 0,
            solve_time: 0.0,
            reduced_accuracy: false,
        }
    }

    pub fn primal(&self) -> Option<&[f64]> {
        self.x.as_deref()
    }
}

/// Backend seam: anything that can solve an [`AssembledProgram`].
pub trait ConeSolver: Send + Sync {
    fn solve_assembled(&self, program: &AssembledProgram) -> SolveResult;

    fn solve(&self, program: &ConeProgram) -> Result<SolveResult, ConeError> {
        let assembled = program.assemble()?;
        Ok(self.solve_assembled(&assembled))
    }
}

impl<S: ConeSolver + ?Sized> ConeSolver for &S {
    fn solve_assembled(&self, program: &AssembledProgram) -> SolveResult {
        (**self).solve_assembled(program)
    }
}

/// Row/variable counts using the same accounting as the published size
/// formulas: LMI rows are the summed PSD block dimensions; variable-sign
/// bounds are reported separately from inequality rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSize {
    pub lmi_rows: usize,
    pub psd_blocks: usize,
    pub equalities: usize,
    pub inequalities: usize,
    pub bounds: usize,
    pub scalar_variables: usize,
}

impl ConeProgram {
    pub fn new(psd_margin: f64) -> Self {
        Self {
            blocks: Vec::new(),
            n_scalar: 0,
            objective: Affine::default(),
            quadratic: Vec::new(),
            equalities: Vec::new(),
            inequalities: Vec::new(),
            psd: Vec::new(),
            psd_margin,
        }
    }

    pub fn add_block(&mut self, name: &str, rows: usize, cols: usize, kind: VarKind) -> BlockId {
        let len = match kind {
            VarKind::Free | VarKind::Nonnegative => rows * cols,
            VarKind::Diagonal => {
                assert_eq!(rows, cols, "diagonal block must be square");
                rows
            }
            VarKind::Symmetric => {
                assert_eq!(rows, cols, "symmetric block must be square");
                rows * (rows + 1) / 2
            }
        };
        let id = BlockId(self.blocks.len());
        self.blocks.push(VarBlock {
            name: name.to_string(),
            rows,
            cols,
            kind,
            offset: self.n_scalar,
            len,
        });
        self.n_scalar += len;
        id
    }

    pub fn block(&self, id: BlockId) -> &VarBlock {
        &self.blocks[id.0]
    }

    pub fn blocks(&self) -> &[VarBlock] {
        &self.blocks
    }

    pub fn num_scalar(&self) -> usize {
        self.n_scalar
    }

    /// Scalar index of entry `(r, c)` of a registered block.
    pub fn index(&self, id: BlockId, r: usize, c: usize) -> Option<usize> {
        let b = &self.blocks[id.0];
        match b.kind {
            VarKind::Free | VarKind::Nonnegative => Some(b.offset + c * b.rows + r),
            VarKind::Diagonal => (r == c).then_some(b.offset + r),
            VarKind::Symmetric => {
                let (i, j) = if r <= c { (r, c) } else { (c, r) };
                Some(b.offset + j * (j + 1) / 2 + i)
            }
        }
    }

    /// The block as a matrix of affine expressions.
    pub fn expr(&self, id: BlockId) -> AffMat {
        let b = &self.blocks[id.0];
        let mut out = AffMat::zeros(b.rows, b.cols);
        for r in 0..b.rows {
            for c in 0..b.cols {
                if let Some(i) = self.index(id, r, c) {
                    out.set(r, c, Affine::var(i));
                }
            }
        }
        out
    }

    /// Scalar variable `(r, c)` of a block as an expression.
    pub fn entry(&self, id: BlockId, r: usize, c: usize) -> Affine {
        self.index(id, r, c).map_or_else(Affine::default, Affine::var)
    }

    /// Recover a block's value from a primal point.
    pub fn value(&self, id: BlockId, x: &[f64]) -> Mat {
        self.expr(id).eval(x)
    }

    /// Write `value` into the scalar slots of block `id` within `x`. Entries a
    /// structured block does not store (off-diagonals of a diagonal block,
    /// the lower triangle of a symmetric one) are ignored.
    pub fn write_value(&self, id: BlockId, value: &Mat, x: &mut [f64]) {
        let b = &self.blocks[id.0];
        assert_eq!(value.shape(), (b.rows, b.cols), "value shape for block `{}`", b.name);
        for c in 0..b.cols {
            for r in 0..b.rows {
                let stored = match b.kind {
                    VarKind::Free | VarKind::Nonnegative => true,
                    VarKind::Diagonal => r == c,
                    VarKind::Symmetric => r <= c,
                };
                if stored {
                    x[self.index(id, r, c).unwrap()] = value[(r, c)];
                }
            }
        }
    }

    /// Sum of all scalar entries of a (vector) block as an expression.
    pub fn sum(&self, id: BlockId) -> Affine {
        let b = &self.blocks[id.0];
        Affine {
            terms: (b.offset..b.offset + b.len).map(|i| (i, 1.0)).collect(),
            constant: 0.0,
        }
    }

    pub fn set_objective(&mut self, obj: Affine) {
        self.objective = obj;
        self.objective.compress();
    }

    pub fn objective(&self) -> &Affine {
        &self.objective
    }

    /// Add `½·v·x[i]·x[j]` (`i == j`) or `v·x[i]·x[j]` (`i ≠ j`) to the objective.
    pub fn add_quadratic(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.quadratic.push((i, j, v));
    }

    pub fn add_eq(&mut self, mut e: Affine) {
        e.compress();
        self.equalities.push(e);
    }

    /// `g ≥ 0`.
    pub fn add_ge0(&mut self, mut g: Affine) {
        g.compress();
        self.inequalities.push(g);
    }

    /// `lhs ≤ rhs`.
    pub fn add_le(&mut self, lhs: &Affine, rhs: &Affine) {
        self.add_ge0(rhs.clone().minus(lhs));
    }

    pub fn add_psd(&mut self, label: impl Into<String>, mut mat: AffMat) {
        mat.compress();
        self.psd.push(PsdConstraint {
            label: label.into(),
            mat,
        });
    }

    pub fn equalities(&self) -> &[Affine] {
        &self.equalities
    }

    pub fn inequalities(&self) -> &[Affine] {
        &self.inequalities
    }

    pub fn psd_constraints(&self) -> &[PsdConstraint] {
        &self.psd
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let mut v = self.objective.eval(x);
        for &(i, j, p) in &self.quadratic {
            v += if i == j { 0.5 * p * x[i] * x[i] } else { p * x[i] * x[j] };
        }
        v
    }

    pub fn problem_size(&self) -> ProblemSize {
        let bounds = self
            .blocks
            .iter()
            .filter(|b| b.kind == VarKind::Nonnegative)
            .map(|b| b.len)
            .sum();
        ProblemSize {
            lmi_rows: self.psd.iter().map(|p| p.mat.nrows()).sum(),
            psd_blocks: self.psd.len(),
            equalities: self.equalities.len(),
            inequalities: self.inequalities.len(),
            bounds,
            scalar_variables: self.n_scalar,
        }
    }

    fn check_expr(&self, e: &Affine) -> Result<(), ConeError> {
        match e.max_index() {
            Some(i) if i >= self.n_scalar => Err(ConeError::UnknownVariable {
                index: i,
                count: self.n_scalar,
            }),
            _ => Ok(()),
        }
    }

    /// Lower into solver-ready form. 1×1 blocks and blocks without coupling
    /// off-diagonal entries become scalar rows of the nonnegative cone.
    pub fn assemble(&self) -> Result<AssembledProgram, ConeError> {
        let mut referenced = vec![false; self.n_scalar];
        let mark = |e: &Affine, referenced: &mut Vec<bool>| {
            for (i, _) in &e.terms {
                if *i < referenced.len() {
                    referenced[*i] = true;
                }
            }
        };

        self.check_expr(&self.objective)?;
        mark(&self.objective, &mut referenced);
        let mut q = vec![0.0; self.n_scalar];
        for &(i, c) in &self.objective.terms {
            q[i] += c;
        }
        let mut p_triplets = Vec::with_capacity(self.quadratic.len());
        for &(i, j, v) in &self.quadratic {
            if j >= self.n_scalar {
                return Err(ConeError::UnknownVariable {
                    index: j,
                    count: self.n_scalar,
                });
            }
            referenced[i] = true;
            referenced[j] = true;
            p_triplets.push((i, j, v));
        }

        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut cones = Vec::new();
        let mut row = 0usize;

        // s = b - A x = 0
        for e in &self.equalities {
            self.check_expr(e)?;
            mark(e, &mut referenced);
            for &(i, c) in &e.terms {
                a.push((row, i, c));
            }
            b.push(-e.constant);
            row += 1;
        }
        if !self.equalities.is_empty() {
            cones.push(ConeSpec::Zero(self.equalities.len()));
        }

        // s = b - A x ≥ 0 with g(x) = const + terms ≥ 0  ⇒  A = -terms, b = const
        let nonneg_start = row;
        let push_ge = |g: &Affine, row: &mut usize, a: &mut Vec<_>, b: &mut Vec<f64>| {
            for &(i, c) in &g.terms {
                a.push((*row, i, -c));
            }
            b.push(g.constant);
            *row += 1;
        };
        for g in &self.inequalities {
            self.check_expr(g)?;
            mark(g, &mut referenced);
            push_ge(g, &mut row, &mut a, &mut b);
        }
        for blk in self.blocks.iter().filter(|b| b.kind == VarKind::Nonnegative) {
            for i in blk.offset..blk.offset + blk.len {
                push_ge(&Affine::var(i), &mut row, &mut a, &mut b);
            }
        }
        let mut full_psd = Vec::new();
        for p in &self.psd {
            let (r, c) = p.mat.shape();
            if r != c {
                return Err(ConeError::DimensionMismatch {
                    context: p.label.clone(),
                    detail: format!("PSD block is {r}×{c}"),
                });
            }
            if !p.mat.is_symmetric() {
                return Err(ConeError::NotSymmetric(p.label.clone()));
            }
            for e in p.mat.entries() {
                self.check_expr(e)?;
                mark(e, &mut referenced);
            }
            let decoupled = (0..r).all(|i| ((i + 1)..r).all(|j| p.mat.get(i, j).is_zero()));
            if decoupled {
                for i in 0..r {
                    let mut g = p.mat.get(i, i).clone();
                    g.constant -= self.psd_margin;
                    push_ge(&g, &mut row, &mut a, &mut b);
                }
            } else {
                full_psd.push(p);
            }
        }
        if row > nonneg_start {
            cones.push(ConeSpec::Nonnegative(row - nonneg_start));
        }

        let sqrt2 = core::f64::consts::SQRT_2;
        for p in full_psd {
            let n = p.mat.nrows();
            for j in 0..n {
                for i in 0..=j {
                    let e = p.mat.get(i, j);
                    let s = if i == j { 1.0 } else { sqrt2 };
                    let margin = if i == j { self.psd_margin } else { 0.0 };
                    for &(k, c) in &e.terms {
                        a.push((row, k, -s * c));
                    }
                    b.push(s * (e.constant - margin));
                    row += 1;
                }
            }
            cones.push(ConeSpec::Psd(n));
        }

        let unreferenced = referenced
            .iter()
            .enumerate()
            .filter(|(_, r)| !**r)
            .map(|(i, _)| i)
            .collect();

        Ok(AssembledProgram {
            n: self.n_scalar,
            m: row,
            p_triplets,
            q,
            objective_constant: self.objective.constant,
            a_triplets: a,
            b,
            cones,
            unreferenced,
        })
    }

    /// Smallest eigenvalue of every PSD block at `x`, keyed by label.
    pub fn psd_min_eigs(&self, x: &[f64]) -> Vec<(String, f64)> {
        self.psd
            .iter()
            .map(|p| (p.label.clone(), crate::linalg::min_eig_sym(&p.mat.eval(x))))
            .collect()
    }
}

impl AssembledProgram {
    /// Export in the Conic Benchmark Format (CBF, version 3). Row `k` of
    /// `b - Ax ∈ K` becomes `-A_k x + b_k` in the matching CBF cone; PSD
    /// cones are written as scalar-vectorized `SVEC` rows.
    pub fn to_cbf(&self) -> Result<String, ConeError> {
        if !self.p_triplets.is_empty() {
            return Err(ConeError::QuadraticExport);
        }
        let mut out = String::new();
        let _ = writeln!(out, "VER\n3\n\nOBJSENSE\nMIN\n");
        let _ = writeln!(out, "VAR\n{} 1\nF {}\n", self.n, self.n);
        let _ = writeln!(out, "CON\n{} {}", self.m, self.cones.len());
        for c in &self.cones {
            let _ = match c {
                ConeSpec::Zero(k) => writeln!(out, "L= {k}"),
                ConeSpec::Nonnegative(k) => writeln!(out, "L+ {k}"),
                ConeSpec::Psd(d) => writeln!(out, "SVEC {}", d * (d + 1) / 2),
            };
        }
        out.push('\n');
        let q_nz: Vec<_> = self
            .q
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .collect();
        let _ = writeln!(out, "OBJACOORD\n{}", q_nz.len());
        for (i, v) in q_nz {
            let _ = writeln!(out, "{i} {v:e}");
        }
        if self.objective_constant != 0.0 {
            let _ = writeln!(out, "\nOBJBCOORD\n{:e}", self.objective_constant);
        }
        let mut acoord: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(r, c, v) in &self.a_triplets {
            *acoord.entry((r, c)).or_insert(0.0) -= v;
        }
        acoord.retain(|_, v| *v != 0.0);
        let _ = writeln!(out, "\nACOORD\n{}", acoord.len());
        for ((r, c), v) in acoord {
            let _ = writeln!(out, "{r} {c} {v:e}");
        }
        let b_nz: Vec<_> = self
            .b
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .collect();
        let _ = writeln!(out, "\nBCOORD\n{}", b_nz.len());
        for (r, v) in b_nz {
            let _ = writeln!(out, "{r} {v:e}");
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_compress_merges_duplicates() {
        let mut a = Affine {
            terms: vec![(2, 1.0), (0, 3.0), (2, -1.0), (0, 1.0)],
            constant: 1.5,
        };
        a.compress();
        assert_eq!(a.terms, vec![(0, 4.0)]);
    }

    #[test]
    fn symmetric_block_indices_share_storage() {
        let mut p = ConeProgram::default();
        let s = p.add_block("S", 3, 3, VarKind::Symmetric);
        assert_eq!(p.num_scalar(), 6);
        assert_eq!(p.index(s, 0, 2), p.index(s, 2, 0));
        let d = p.add_block("D", 4, 4, VarKind::Diagonal);
        assert_eq!(p.index(d, 1, 2), None);
        assert_eq!(p.num_scalar(), 10);
    }

    #[test]
    fn lmul_rmul_match_dense_product() {
        let mut p = ConeProgram::default();
        let x = p.add_block("X", 2, 2, VarKind::Free);
        let m = Mat::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]);
        let n = Mat::from_row_slice(2, 3, &[0.0, 1.0, 2.0, 3.0, -1.0, 1.0]);
        let xv = [0.3, -0.7, 1.1, 2.0];
        let xm = p.value(x, &xv);
        let e = p.expr(x).lmul(&m).rmul(&n);
        let got = e.eval(&xv);
        let want = &m * &xm * &n;
        assert!((got - want).norm() < 1e-12);
    }

    #[test]
    fn one_by_one_psd_lowers_to_scalar_bound() {
        let mut p = ConeProgram::new(1e-7);
        let x = p.add_block("x", 1, 1, VarKind::Free);
        p.add_psd("x>=eps", AffMat::scalar(p.entry(x, 0, 0)));
        let a = p.assemble().unwrap();
        assert_eq!(a.cones, vec![ConeSpec::Nonnegative(1)]);
        assert_eq!(a.b, vec![-1e-7]);
    }

    #[test]
    fn diagonal_psd_splits_into_scalar_rows() {
        let mut p = ConeProgram::new(0.0);
        let d = p.add_block("D", 2, 2, VarKind::Diagonal);
        p.add_psd("D", p.expr(d));
        let a = p.assemble().unwrap();
        assert_eq!(a.cones, vec![ConeSpec::Nonnegative(2)]);
    }

    #[test]
    fn coupled_psd_uses_scaled_svec() {
        let mut p = ConeProgram::new(0.0);
        let s = p.add_block("S", 2, 2, VarKind::Symmetric);
        p.add_psd("S", p.expr(s));
        let a = p.assemble().unwrap();
        assert_eq!(a.cones, vec![ConeSpec::Psd(2)]);
        let off = a.a_triplets.iter().find(|t| t.0 == 1).unwrap();
        assert!((off.2 + core::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn unknown_variable_is_rejected() {
        let mut p = ConeProgram::default();
        p.add_block("x", 1, 1, VarKind::Free);
        p.add_ge0(Affine::var(5));
        assert!(matches!(
            p.assemble(),
            Err(ConeError::UnknownVariable { index: 5, .. })
        ));
    }

    #[test]
    fn asymmetric_psd_is_rejected() {
        let mut p = ConeProgram::default();
        let x = p.add_block("X", 2, 2, VarKind::Free);
        p.add_psd("X", p.expr(x));
        assert!(matches!(p.assemble(), Err(ConeError::NotSymmetric(_))));
    }

    #[test]
    fn unreferenced_variables_are_reported() {
        let mut p = ConeProgram::default();
        let x = p.add_block("x", 2, 1, VarKind::Free);
        p.add_ge0(p.entry(x, 0, 0));
        assert_eq!(p.assemble().unwrap().unreferenced, vec![1]);
    }

    #[test]
    fn empty_program_has_zero_size() {
        assert_eq!(ConeProgram::default().problem_size(), ProblemSize::default());
    }
}
