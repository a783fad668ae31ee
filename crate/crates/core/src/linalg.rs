//! Small dense linear-algebra helpers shared by the set and LMI code.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Matrices as row-major nested arrays. nalgebra only serializes dynamic
/// storage with its std feature, and nested rows read better in JSON anyway.
pub mod serde_mat {
    use super::Mat;
    use alloc::vec::Vec;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Mat> {
        let nc = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != nc) {
            return None;
        }
        Some(Mat::from_fn(rows.len(), nc, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).ok_or_else(|| D::Error::custom("ragged matrix rows"))
    }
}

pub mod serde_vec {
    use super::Vector;
    use alloc::vec::Vec;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        Ok(Vector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

pub mod serde_vecs {
    use super::Vector;
    use alloc::vec::Vec;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vector], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<&[f64]> = v.iter().map(|x| x.as_slice()).collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vector>, D::Error> {
        Ok(Vec::<Vec<f64>>::deserialize(d)?
            .into_iter()
            .map(Vector::from_vec)
            .collect())
    }
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eig_sym(m: &Mat) -> f64 {
    assert_eq!(m.nrows(), m.ncols(), "min_eig_sym on non-square matrix");
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

/// Induced ∞-norm: the largest absolute row sum.
pub fn inf_norm(m: &Mat) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn diag(v: &Vector) -> Mat {
    Mat::from_diagonal(v)
}

/// Entrywise reciprocal of a positive vector, clamped at `floor`.
pub fn recip_clamped(v: &Vector, floor: f64) -> Vector {
    v.map(|x| 1.0 / x.max(floor))
}

pub fn row(m: &Mat, i: usize) -> Mat {
    m.rows(i, 1).into_owned()
}

/// Row vector (1 × n) from a slice.
pub fn row_from(v: &[f64]) -> Mat {
    Mat::from_row_slice(1, v.len(), v)
}

pub fn col_from(v: &[f64]) -> Vector {
    Vector::from_column_slice(v)
}

/// Stack rows of several matrices with equal column count.
pub fn vstack(parts: &[&Mat]) -> Mat {
    let cols = parts.first().map_or(0, |p| p.ncols());
    let rows: usize = parts.iter().map(|p| p.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r = 0;
    for p in parts {
        assert_eq!(p.ncols(), cols, "vstack column mismatch");
        out.rows_mut(r, p.nrows()).copy_from(p);
        r += p.nrows();
    }
    out
}

pub fn hstack(parts: &[&Mat]) -> Mat {
    let rows = parts.first().map_or(0, |p| p.nrows());
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut c = 0;
    for p in parts {
        assert_eq!(p.nrows(), rows, "hstack row mismatch");
        out.columns_mut(c, p.ncols()).copy_from(p);
        c += p.ncols();
    }
    out
}

/// Dense symmetric matrix assembled from a square grid of blocks; `None`
/// entries are zero and the lower triangle is mirrored from the upper one.
pub fn block_sym(sizes: &[usize], upper: &[(usize, usize, Mat)]) -> Mat {
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();
    let n: usize = sizes.iter().sum();
    let mut out = Mat::zeros(n, n);
    for (bi, bj, blk) in upper {
        assert!(bi <= bj, "block_sym expects upper-triangular block indices");
        assert_eq!((blk.nrows(), blk.ncols()), (sizes[*bi], sizes[*bj]));
        out.view_mut((offsets[*bi], offsets[*bj]), (blk.nrows(), blk.ncols()))
            .copy_from(blk);
        if bi != bj {
            out.view_mut((offsets[*bj], offsets[*bi]), (blk.ncols(), blk.nrows()))
                .copy_from(&blk.transpose());
        }
    }
    out
}

pub fn is_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inf_norm_is_max_abs_row_sum() {
        let m = Mat::from_row_slice(2, 3, &[1.0, -2.0, 0.5, -4.0, 0.0, 1.0]);
        assert_eq!(inf_norm(&m), 5.0);
    }

    #[test]
    fn block_sym_mirrors_off_diagonal() {
        let a = Mat::identity(1, 1);
        let b = Mat::from_row_slice(1, 2, &[2.0, 3.0]);
        let c = Mat::identity(2, 2) * 5.0;
        let m = block_sym(&[1, 2], &[(0, 0, a), (0, 1, b), (1, 1, c)]);
        assert_eq!(m[(2, 0)], 3.0);
        assert_eq!(m[(0, 2)], 3.0);
        assert_eq!(m[(1, 1)], 5.0);
    }

    #[test]
    fn min_eig_of_diag() {
        let m = diag(&col_from(&[3.0, -1.0, 2.0]));
        assert!((min_eig_sym(&m) + 1.0).abs() < 1e-12);
    }
}
