//! Symmetric polytopes `P(A, b) = {x : −b ≤ Ax ≤ b}` and ellipsoids
//! `E(Q, r) = {x : xᵀQx ≤ r}`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cone::{Affine, ConeError, ConeProgram, ConeSolver, SolveStatus, VarKind};
use crate::linalg::{Mat, Vector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolytopeError {
    #[error("offset {index} is not strictly positive ({value})")]
    NonPositiveOffset { index: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
    #[error("Minkowski difference is empty (facet {facet}, offset {offset})")]
    EmptyDifference { facet: usize, offset: f64 },
    #[error("vertex enumeration only supports n = 2 (got {0})")]
    UnsupportedDimension(usize),
    #[error("support LP ended with status {0:?}")]
    Solver(SolveStatus),
    #[error(transparent)]
    Cone(#[from] ConeError),
}

/// Above this facet count planar supports fall back to LPs.
pub const VERTEX_SUPPORT_MAX_FACETS: usize = 64;

/// Facet normals as rows, offsets strictly positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "PolytopeJson", try_from = "PolytopeJson")]
pub struct SymPolytope {
    normals: Mat,
    offsets: Vector,
}

#[derive(Serialize, Deserialize)]
struct PolytopeJson {
    normals: Vec<Vec<f64>>,
    offsets: Vec<f64>,
}

impl From<SymPolytope> for PolytopeJson {
    fn from(p: SymPolytope) -> Self {
        Self {
            normals: p
                .normals
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            offsets: p.offsets.iter().copied().collect(),
        }
    }
}

impl TryFrom<PolytopeJson> for SymPolytope {
    type Error = PolytopeError;

    fn try_from(j: PolytopeJson) -> Result<Self, Self::Error> {
        let m = j.normals.len();
        let n = j.normals.first().map_or(0, Vec::len);
        if j.normals.iter().any(|r| r.len() != n) {
            return Err(PolytopeError::DimensionMismatch("ragged normals"));
        }
        let flat: Vec<f64> = j.normals.into_iter().flatten().collect();
        SymPolytope::new(Mat::from_row_slice(m, n, &flat), Vector::from_vec(j.offsets))
    }
}

impl SymPolytope {
    pub fn new(normals: Mat, offsets: Vector) -> Result<Self, PolytopeError> {
        if normals.nrows() != offsets.len() {
            return Err(PolytopeError::DimensionMismatch("normals rows vs offsets"));
        }
        if let Some((index, &value)) = offsets.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(PolytopeError::NonPositiveOffset { index, value });
        }
        Ok(Self { normals, offsets })
    }

    /// `{x : ‖x‖∞ ≤ r}` in `n` dimensions.
    pub fn hypercube(n: usize, r: f64) -> Self {
        Self::new(Mat::identity(n, n), Vector::from_element(n, r)).expect("r must be positive")
    }

    pub fn normals(&self) -> &Mat {
        &self.normals
    }

    pub fn offsets(&self) -> &Vector {
        &self.offsets
    }

    pub fn dim(&self) -> usize {
        self.normals.ncols()
    }

    pub fn num_facets(&self) -> usize {
        self.normals.nrows()
    }

    pub fn scaled(&self, c: f64) -> Result<Self, PolytopeError> {
        Self::new(self.normals.clone(), &self.offsets * c)
    }

    pub fn with_offsets(&self, offsets: Vector) -> Result<Self, PolytopeError> {
        Self::new(self.normals.clone(), offsets)
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        let ax = &self.normals * x;
        ax.iter()
            .zip(self.offsets.iter())
            .all(|(v, b)| v.abs() <= b + tol)
    }

    /// Largest `max_i |A_i x| − b_i`; nonpositive iff `x` is inside.
    pub fn violation(&self, x: &Vector) -> f64 {
        let ax = &self.normals * x;
        ax.iter()
            .zip(self.offsets.iter())
            .map(|(v, b)| v.abs() - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_{x∈P} dirᵀx` by linear programming.
    pub fn support(&self, solver: &dyn ConeSolver, dir: &Vector) -> Result<f64, PolytopeError> {
        let n = self.dim();
        if dir.len() != n {
            return Err(PolytopeError::DimensionMismatch("support direction"));
        }
        if dir.iter().all(|v| *v == 0.0) {
            return Ok(0.0);
        }
        let mut lp = ConeProgram::new(0.0);
        let x = lp.add_block("x", n, 1, VarKind::Free);
        let mut obj = Affine::default();
        for j in 0..n {
            obj.add_term(lp.index(x, j, 0).unwrap(), -dir[j]);
        }
        lp.set_objective(obj);
        for i in 0..self.num_facets() {
            let mut ax = Affine::default();
            for j in 0..n {
                ax.add_term(lp.index(x, j, 0).unwrap(), self.normals[(i, j)]);
            }
            let b = Affine::constant(self.offsets[i]);
            lp.add_le(&ax, &b);
            lp.add_le(&ax.scaled(-1.0), &b);
        }
        let res = solver.solve(&lp)?;
        match (res.status, res.primal()) {
            (SolveStatus::Optimal, Some(xs)) => {
                Ok(dir.iter().zip(xs).map(|(d, v)| d * v).sum::<f64>())
            }
            (s, _) => Err(PolytopeError::Solver(s)),
        }
    }

    /// Support values on every row of `dirs`.
    pub fn support_rows(&self, solver: &dyn ConeSolver, dirs: &Mat) -> Result<Vector, PolytopeError> {
        let mut out = Vector::zeros(dirs.nrows());
        for i in 0..dirs.nrows() {
            out[i] = self.support(solver, &dirs.row(i).transpose())?;
        }
        Ok(out)
    }

    /// Same values as [`Self::support_rows`]. Planar polytopes with few facets
    /// go through their vertex list instead of one LP per direction.
    pub fn support_rows_auto(&self, solver: &dyn ConeSolver, dirs: &Mat) -> Result<Vector, PolytopeError> {
        if self.dim() != 2 || self.num_facets() > VERTEX_SUPPORT_MAX_FACETS {
            return self.support_rows(solver, dirs);
        }
        if dirs.ncols() != 2 {
            return Err(PolytopeError::DimensionMismatch("support direction"));
        }
        let verts = self.vertices_2d()?;
        Ok(Vector::from_fn(dirs.nrows(), |i, _| {
            verts
                .iter()
                .map(|v| dirs[(i, 0)] * v[0] + dirs[(i, 1)] * v[1])
                .fold(0.0, f64::max)
        }))
    }

    /// `n` points drawn uniformly by rejection from the bounding box.
    pub fn sample_uniform<R: rand::Rng + ?Sized>(
        &self,
        solver: &dyn ConeSolver,
        rng: &mut R,
        n: usize,
    ) -> Result<Vec<Vector>, PolytopeError> {
        let dim = self.dim();
        let half = self.support_rows_auto(solver, &Mat::identity(dim, dim))?;
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let x = Vector::from_fn(dim, |i, _| half[i] * rng.random_range(-1.0..=1.0));
            if self.contains(&x, 0.0) {
                out.push(x);
            }
        }
        Ok(out)
    }

    /// Outer H-approximation of `P ⊕ Q` on `template` normals (default:
    /// the deduplicated union of both normal sets). Exact whenever the
    /// template contains every facet normal of the true sum.
    pub fn minkowski_sum(
        &self,
        solver: &dyn ConeSolver,
        q: &SymPolytope,
        template: Option<&Mat>,
    ) -> Result<SymPolytope, PolytopeError> {
        if self.dim() != q.dim() {
            return Err(PolytopeError::DimensionMismatch("Minkowski sum"));
        }
        let owned;
        let t = match template {
            Some(t) => t,
            None => {
                owned = dedup_normals(&crate::linalg::vstack(&[&self.normals, &q.normals]));
                &owned
            }
        };
        let hp = self.support_rows(solver, t)?;
        let hq = q.support_rows(solver, t)?;
        SymPolytope::new(t.clone(), hp + hq)
    }

    /// `P ⊖ Q` on P's own normals.
    pub fn minkowski_diff(
        &self,
        solver: &dyn ConeSolver,
        q: &SymPolytope,
    ) -> Result<SymPolytope, PolytopeError> {
        if self.dim() != q.dim() {
            return Err(PolytopeError::DimensionMismatch("Minkowski difference"));
        }
        let hq = q.support_rows(solver, &self.normals)?;
        let off = &self.offsets - hq;
        if let Some((facet, &offset)) = off.iter().enumerate().find(|(_, v)| **v <= 0.0) {
            return Err(PolytopeError::EmptyDifference { facet, offset });
        }
        SymPolytope::new(self.normals.clone(), off)
    }

    /// Vertices in counter-clockwise order (n = 2 only).
    pub fn vertices_2d(&self) -> Result<Vec<[f64; 2]>, PolytopeError> {
        if self.dim() != 2 {
            return Err(PolytopeError::UnsupportedDimension(self.dim()));
        }
        let m = self.num_facets();
        let mut pts: Vec<[f64; 2]> = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                let (a, b) = (self.normals[(i, 0)], self.normals[(i, 1)]);
                let (c, d) = (self.normals[(j, 0)], self.normals[(j, 1)]);
                let det = a * d - b * c;
                if det.abs() < 1e-14 {
                    continue;
                }
                for si in [-1.0, 1.0] {
                    for sj in [-1.0, 1.0] {
                        let (p, q) = (si * self.offsets[i], sj * self.offsets[j]);
                        let v = [(p * d - b * q) / det, (a * q - c * p) / det];
                        let scale = 1.0 + v[0].abs().max(v[1].abs());
                        if self.contains(&Vector::from_row_slice(&v), 1e-9 * scale)
                            && !pts.iter().any(|w| {
                                (w[0] - v[0]).abs() <= 1e-9 * scale
                                    && (w[1] - v[1]).abs() <= 1e-9 * scale
                            })
                        {
                            pts.push(v);
                        }
                    }
                }
            }
        }
        pts.sort_by(|u, v| {
            libm::atan2(u[1], u[0])
                .partial_cmp(&libm::atan2(v[1], v[0]))
                .unwrap_or(core::cmp::Ordering::Equal)
        });
        Ok(pts)
    }
}

/// `m` unit normals in the plane at angles `kπ/m`.
pub fn uniform_normals(m: usize) -> Mat {
    assert!(m >= 2, "need at least two normals in the plane");
    Mat::from_fn(m, 2, |k, j| {
        let a = core::f64::consts::PI * k as f64 / m as f64;
        if j == 0 {
            libm::cos(a)
        } else {
            libm::sin(a)
        }
    })
}

/// Drop rows that repeat an earlier row up to sign and positive scaling.
pub fn dedup_normals(rows: &Mat) -> Mat {
    let mut keep: Vec<usize> = Vec::new();
    for i in 0..rows.nrows() {
        let ri = rows.row(i);
        let ni = ri.norm();
        if ni == 0.0 {
            continue;
        }
        let dup = keep.iter().any(|&k| {
            let rk = rows.row(k);
            let cos = ri.dot(&rk) / (ni * rk.norm());
            (cos.abs() - 1.0).abs() < 1e-12
        });
        if !dup {
            keep.push(i);
        }
    }
    rows.select_rows(keep.iter())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    #[serde(with = "crate::linalg::serde_mat")]
    pub shape: Mat,
    pub radius: f64,
}

impl Ellipsoid {
    pub fn new(shape: Mat, radius: f64) -> Option<Self> {
        let pd = shape.nrows() == shape.ncols()
            && crate::linalg::min_eig_sym(&shape) > 0.0
            && radius > 0.0;
        pd.then_some(Self { shape, radius })
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        x.dot(&(&self.shape * x)) <= self.radius + tol
    }

    /// `max_{x∈E} dirᵀx = sqrt(r · dirᵀQ⁻¹dir)`.
    pub fn support(&self, dir: &Vector) -> f64 {
        let qinv = self
            .shape
            .clone()
            .cholesky()
            .expect("shape is positive definite")
            .inverse();
        libm::sqrt(self.radius * dir.dot(&(qinv * dir)))
    }
}

#[cfg(all(test, feature = "clarabel"))]
mod tests {
    use super::*;
    use crate::clarabel_backend::ClarabelSolver;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    #[test]
    fn box_support_is_l1_of_direction() {
        let s = ClarabelSolver::default();
        let p = SymPolytope::hypercube(2, 1.0);
        assert!((p.support(&s, &v(&[1.0, 1.0])).unwrap() - 2.0).abs() < 1e-8);
        assert_eq!(p.support(&s, &v(&[0.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn box_minkowski_sum_and_difference() {
        let s = ClarabelSolver::default();
        let a = SymPolytope::hypercube(2, 0.5);
        let b = SymPolytope::hypercube(2, 0.3);
        let sum = a.minkowski_sum(&s, &b, None).unwrap();
        assert_eq!(sum.num_facets(), 2);
        assert!((sum.offsets() - v(&[0.8, 0.8])).amax() < 1e-8);
        let big = SymPolytope::hypercube(2, 0.8);
        let diff = big.minkowski_diff(&s, &b).unwrap();
        assert!((diff.offsets() - v(&[0.5, 0.5])).amax() < 1e-8);
        let over = SymPolytope::hypercube(2, 0.6);
        assert!(matches!(
            a.minkowski_diff(&s, &over),
            Err(PolytopeError::EmptyDifference { .. })
        ));
    }

    #[test]
    fn nonpositive_offset_rejected() {
        assert!(SymPolytope::new(Mat::identity(2, 2), v(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn uniform_normals_angles() {
        let n2 = uniform_normals(2);
        assert!((n2 - Mat::identity(2, 2)).amax() < 1e-15);
        let n4 = uniform_normals(4);
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert!((n4.row(1)[0] - h).abs() < 1e-15 && (n4.row(3)[0] + h).abs() < 1e-15);
        let n10 = uniform_normals(10);
        for k in 0..10 {
            assert!((n10.row(k).norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn box_vertices_ccw() {
        let p = SymPolytope::hypercube(2, 0.8);
        let vs = p.vertices_2d().unwrap();
        assert_eq!(vs.len(), 4);
        for w in &vs {
            assert!((w[0].abs() - 0.8).abs() < 1e-12 && (w[1].abs() - 0.8).abs() < 1e-12);
        }
        let area2: f64 = (0..4)
            .map(|i| {
                let (a, b) = (vs[i], vs[(i + 1) % 4]);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum();
        assert!(area2 > 0.0);
    }

    #[test]
    fn three_dimensional_vertices_unsupported() {
        let p = SymPolytope::hypercube(3, 1.0);
        assert!(matches!(
            p.vertices_2d(),
            Err(PolytopeError::UnsupportedDimension(3))
        ));
    }

    #[test]
    fn json_round_trip() {
        let p = SymPolytope::new(uniform_normals(3), v(&[1.0, 2.0, 3.0])).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.starts_with("{\"normals\":[["));
        let q: SymPolytope = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn ellipsoid_support_matches_sampling() {
        let e = Ellipsoid::new(Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]), 1.0).unwrap();
        // x = (cos t/√2, √2 sin t) on the boundary
        let dir = v(&[1.0, 1.0]);
        let best = (0..20000)
            .map(|k| {
                let t = k as f64 * core::f64::consts::TAU / 20000.0;
                libm::cos(t) / 2f64.sqrt() + 2f64.sqrt() * libm::sin(t)
            })
            .fold(f64::MIN, f64::max);
        assert!((e.support(&dir) - best).abs() < 1e-6);
    }
}
