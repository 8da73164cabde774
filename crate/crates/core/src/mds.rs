//! Classical (Torgerson) multidimensional scaling of embedding rows.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::encoders::EncoderModel;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::matrix::Matrix;

/// Relative eigenvalue below which a layout axis is reported as degenerate.
const DEGENERATE_RATIO: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdsLayout {
    pub labels: Vec<String>,
    /// `n x dims` coordinates.
    pub coordinates: Matrix,
    /// `sqrt(sum (d_ij - dhat_ij)^2 / sum d_ij^2)` over pairs.
    pub stress: f64,
    /// All eigenvalues of the double-centred matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// Fewer than `dims` positive eigenvalues (points are collinear or
    /// coincident); the missing axes are zero.
    pub degenerate: bool,
}

/// Euclidean distances between the rows of `points`.
pub fn pairwise_distances(points: &Matrix) -> Matrix {
    let n = points.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let sq: f64 = points
                .row(i)
                .iter()
                .zip(points.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let v = libm::sqrt(sq);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Embeds a symmetric distance matrix in `dims` dimensions.
pub fn classical_mds(distances: &Matrix, labels: Vec<String>, dims: usize) -> Result<MdsLayout> {
    let n = distances.rows();
    if distances.cols() != n || labels.len() != n {
        return Err(Error::Shape(format!(
            "{}x{} distances for {} labels",
            n,
            distances.cols(),
            labels.len()
        )));
    }
    if n < 3 || dims == 0 {
        return Err(Error::InvalidArgument("MDS needs at least three points and one dimension".into()));
    }
    let mut b = Matrix::zeros(n, n);
    let mut row_mean = alloc::vec![0.0; n];
    let mut grand = 0.0;
    for i in 0..n {
        for j in 0..n {
            let sq = distances[(i, j)] * distances[(i, j)];
            b[(i, j)] = sq;
            row_mean[i] += sq / n as f64;
            grand += sq / (n * n) as f64;
        }
    }
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = -0.5 * (b[(i, j)] - row_mean[i] - row_mean[j] + grand);
        }
    }
    let eig = symmetric_eigen(&b);
    let scale = eig.values.first().copied().unwrap_or(0.0).abs().max(f64::MIN_POSITIVE);
    let mut coordinates = Matrix::zeros(n, dims);
    let mut degenerate = false;
    for k in 0..dims {
        let lambda = eig.values.get(k).copied().unwrap_or(0.0);
        if lambda <= DEGENERATE_RATIO * scale {
            degenerate = true;
            continue;
        }
        let s = libm::sqrt(lambda);
        for i in 0..n {
            coordinates[(i, k)] = eig.vectors[(i, k)] * s;
        }
    }
    if degenerate {
        log::warn!("MDS layout is degenerate: fewer than {dims} positive eigenvalues");
    }
    let fitted = pairwise_distances(&coordinates);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let r = distances[(i, j)] - fitted[(i, j)];
            num += r * r;
            den += distances[(i, j)] * distances[(i, j)];
        }
    }
    let stress = if den > 0.0 { libm::sqrt(num / den) } else { 0.0 };
    Ok(MdsLayout {
        labels,
        coordinates,
        stress,
        eigenvalues: eig.values,
        degenerate,
    })
}

/// Two-dimensional layout of an encoder's category rows.
pub fn layout_encoder(encoder: &EncoderModel) -> Result<MdsLayout> {
    classical_mds(&pairwise_distances(&encoder.matrix), encoder.categories.clone(), 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    #[test]
    fn planar_points_are_recovered() {
        let pts = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![3.0, 0.0],
            vec![0.0, 4.0],
            vec![1.0, 1.0],
            vec![-2.0, 0.5],
        ])
        .unwrap();
        let d = pairwise_distances(&pts);
        let layout = classical_mds(&d, labels(5), 2).unwrap();
        assert!(layout.stress < 1e-10);
        assert!(!layout.degenerate);
        assert!(pairwise_distances(&layout.coordinates).max_abs_diff(&d) < 1e-10);
    }

    #[test]
    fn equilateral_triangle() {
        let s = 2.0;
        let mut d = Matrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    d[(i, j)] = s;
                }
            }
        }
        let layout = classical_mds(&d, labels(3), 2).unwrap();
        let fitted = pairwise_distances(&layout.coordinates);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!((fitted[(i, j)] - s).abs() < 1e-12);
                }
            }
        }
        // both eigenvalues equal s^2 / 2
        assert!((layout.eigenvalues[0] - 2.0).abs() < 1e-12);
        assert!((layout.eigenvalues[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_points_flag_degenerate() {
        let pts = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![3.0, 3.0]]).unwrap();
        let layout = classical_mds(&pairwise_distances(&pts), labels(3), 2).unwrap();
        assert!(layout.degenerate);
        assert!(layout.stress < 1e-10);
        assert!(layout.coordinates.column(1).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(classical_mds(&Matrix::zeros(2, 3), labels(2), 2).is_err());
        assert!(classical_mds(&Matrix::zeros(2, 2), labels(2), 2).is_err());
    }
}
