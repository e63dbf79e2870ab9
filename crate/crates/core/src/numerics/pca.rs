//! Principal component analysis via SVD of the centered point matrix.

use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;
use crate::numerics::svd::svd;

/// PCA output: `components` has one orthonormal component per row,
/// `coords` holds the centered points projected onto the components
/// (points × n_components), and `explained_variance` is nonincreasing.
#[derive(Debug, Clone)]
pub struct PcaResult {
    pub components: Matrix,
    pub coords: Matrix,
    pub explained_variance: Vec<f64>,
}

/// Run PCA on a points × dims matrix.
pub fn pca(points: &Matrix, n_components: usize) -> Result<PcaResult> {
    let n = points.rows();
    let dims = points.cols();
    if n < 2 {
        return Err(Error::InvalidConfig("pca: need at least 2 points".into()));
    }
    if n_components == 0 || n_components > dims.min(n - 1) {
        return Err(Error::InvalidConfig(format!(
            "pca: n_components {n_components} out of range for {n} points of dim {dims}"
        )));
    }

    let centered = points.center_columns();
    let scale = points.max_abs().max(1.0);
    if centered.max_abs() <= 1e-12 * scale {
        return Err(Error::DegenerateData(
            "all points identical after centering".into(),
        ));
    }

    let dec = svd(&centered)?;
    let mut components = Matrix::from_fn(n_components, dims, |i, j| dec.vt[(i, j)]);

    // Sign convention: first (relatively) nonzero entry of each component
    // is nonnegative so outputs are stable across runs.
    for k in 0..n_components {
        let row = components.row(k);
        let thresh = 1e-12 * row.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let flip = row.iter().find(|x| x.abs() > thresh).is_some_and(|x| *x < 0.0);
        if flip {
            for j in 0..dims {
                components[(k, j)] = -components[(k, j)];
            }
        }
    }

    let coords = centered.matmul(&components.transpose());
    let explained_variance: Vec<f64> = dec
        .s
        .iter()
        .take(n_components)
        .map(|s| s * s / (n as f64 - 1.0))
        .collect();

    Ok(PcaResult {
        components,
        coords,
        explained_variance,
    })
}

/// Ratio of each returned component's variance to the total variance of
/// the centered cloud.
pub fn explained_variance_ratio(points: &Matrix, result: &PcaResult) -> f64 {
    let centered = points.center_columns();
    let total = centered.frobenius_norm().powi(2) / (points.rows() as f64 - 1.0);
    result.explained_variance[0] / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::test_util::seeded_matrix;

    #[test]
    fn collinear_cloud_is_rank_one() {
        let points = Matrix::from_fn(5, 2, |i, _| i as f64 * 2.0);
        let r = pca(&points, 1).unwrap();
        assert!((explained_variance_ratio(&points, &r) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn identical_points_degenerate() {
        let points = Matrix::from_fn(4, 3, |_, j| j as f64);
        assert!(matches!(pca(&points, 1), Err(Error::DegenerateData(_))));
    }

    /// Oracle: symmetric Jacobi eigendecomposition of the covariance
    /// matrix, independent of the SVD path used by `pca`.
    #[test]
    fn seeded_cloud_matches_covariance_oracle() {
        let points = seeded_matrix(31, 10, 4);
        let n_comp = 3;
        let r = pca(&points, n_comp).unwrap();

        let centered = points.center_columns();
        let cov = centered
            .transpose()
            .matmul(&centered)
            .scale(1.0 / (points.rows() as f64 - 1.0));

        // Cyclic Jacobi eigensolver on the 4×4 symmetric covariance.
        let d = cov.rows();
        let mut a = cov.clone();
        let mut q = Matrix::identity(d);
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..d {
                for r2 in (p + 1)..d {
                    off += a[(p, r2)].abs();
                    if a[(p, r2)].abs() < 1e-15 {
                        continue;
                    }
                    let theta = 0.5 * (a[(r2, r2)] - a[(p, p)]) / a[(p, r2)];
                    let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..d {
                        let aip = a[(i, p)];
                        let air = a[(i, r2)];
                        a[(i, p)] = c * aip - s * air;
                        a[(i, r2)] = s * aip + c * air;
                    }
                    for i in 0..d {
                        let api = a[(p, i)];
                        let ari = a[(r2, i)];
                        a[(p, i)] = c * api - s * ari;
                        a[(r2, i)] = s * api + c * ari;
                    }
                    for i in 0..d {
                        let qip = q[(i, p)];
                        let qir = q[(i, r2)];
                        q[(i, p)] = c * qip - s * qir;
                        q[(i, r2)] = s * qip + c * qir;
                    }
                }
            }
            if off < 1e-30 {
                break;
            }
        }
        let mut eig: Vec<(f64, Vec<f64>)> = (0..d).map(|j| (a[(j, j)], q.column(j))).collect();
        eig.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());

        for k in 0..n_comp {
            assert!(
                (r.explained_variance[k] - eig[k].0).abs() < 1e-8,
                "variance mismatch at {k}"
            );
            // Coordinates along the oracle eigenvector, aligned in sign.
            let v = &eig[k].1;
            let dot_sign: f64 = (0..d).map(|j| v[j] * r.components[(k, j)]).sum();
            let sgn = dot_sign.signum();
            for i in 0..points.rows() {
                let oracle_coord: f64 =
                    (0..d).map(|j| centered[(i, j)] * v[j]).sum::<f64>() * sgn;
                assert!((r.coords[(i, k)] - oracle_coord).abs() < 1e-8);
            }
        }
    }
}
