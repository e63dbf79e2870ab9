//! Learning, validating, persisting, and applying the physicochemical →
//! perceptual linear map.
//!
//! The map is the minimizer of `½‖Y − AX‖_F² + λ‖A‖_*`, solved by
//! accelerated proximal gradient with singular value thresholding as the
//! prox and step `1/σ_max(X)²`.

use std::path::Path;

use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{mix, Dictionary, MixtureSpec};
use crate::error::{Error, Result};
use crate::numerics::matrix::{norm2, Matrix};
use crate::numerics::solver::{apg, StopRule};
use crate::numerics::svd::{sigma_max, svd, svt};

/// Singular values below `RANK_THRESHOLD · s₁` count as zero in rank
/// readouts.
pub const RANK_THRESHOLD: f64 = 1e-6;

/// The learned linear operator A (l×k) with its regularization weight and
/// spectrum.
#[derive(Debug, Clone)]
pub struct PerceptualMap {
    pub a: Matrix,
    pub lambda: f64,
    pub singular_values: Vec<f64>,
    pub train_rmse: f64,
    /// True when per-feature scaling was folded into `a` during fitting.
    pub standardized: bool,
}

impl PerceptualMap {
    pub fn output_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.a.cols()
    }

    /// Number of singular values above the rank-readout threshold.
    pub fn fitted_rank(&self) -> usize {
        let s1 = self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values
            .iter()
            .filter(|&&s| s > RANK_THRESHOLD * s1)
            .count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Relative objective-change stopping tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Scale each feature by the reciprocal of its standard deviation
    /// before fitting; the scaling is folded back into the returned map so
    /// it stays a plain linear operator on raw features.
    pub standardize: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-9,
            max_iter: 50_000,
            standardize: false,
        }
    }
}

/// Objective value `½‖Y − AX‖_F² + λ‖A‖_*`.
pub fn fit_objective(a: &Matrix, x: &Matrix, y: &Matrix, lambda: f64) -> f64 {
    let fid = 0.5 * y.sub(&a.matmul(x)).frobenius_norm().powi(2);
    let nn: f64 = svd(a).map(|d| d.s.iter().sum()).unwrap_or(f64::NAN);
    fid + lambda * nn
}

/// Per-dimension RMSE averaged over output dimensions.
pub fn mean_rmse(residual: &Matrix) -> f64 {
    let n = residual.cols() as f64;
    let l = residual.rows();
    (0..l)
        .map(|i| (residual.row(i).iter().map(|v| v * v).sum::<f64>() / n).sqrt())
        .sum::<f64>()
        / l as f64
}

fn feature_scales(x: &Matrix) -> Vec<f64> {
    let n = x.cols() as f64;
    (0..x.rows())
        .map(|i| {
            let row = x.row(i);
            let mean: f64 = row.iter().sum::<f64>() / n;
            let var: f64 = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect()
}

/// Fit the map on X (k×n) and Y (l×n) at regularization weight `lambda`.
pub fn fit(x: &Matrix, y: &Matrix, lambda: f64, opts: &FitOptions) -> Result<PerceptualMap> {
    if x.cols() != y.cols() {
        return Err(Error::dim("fit: sample counts", x.cols(), y.cols()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig("lambda must be >= 0".into()));
    }
    if !x.is_finite() || !y.is_finite() {
        return Err(Error::NonFinite);
    }

    let scales = if opts.standardize {
        Some(feature_scales(x))
    } else {
        None
    };
    let x_work = match &scales {
        Some(s) => {
            let mut m = x.clone();
            for i in 0..m.rows() {
                for j in 0..m.cols() {
                    m[(i, j)] /= s[i];
                }
            }
            m
        }
        None => x.clone(),
    };

    let l_lip = sigma_max(&x_work)?.powi(2);
    let xt = x_work.transpose();
    let a0 = Matrix::zeros(y.rows(), x.rows());

    let a_fit = if l_lip == 0.0 {
        // X = 0: every A attains the same fidelity; A = 0 is the minimizer.
        a0
    } else {
        let out = apg(
            a0,
            1.0 / l_lip,
            |a| a.matmul(&x_work).sub(y).matmul(&xt),
            |a| 0.5 * y.sub(&a.matmul(&x_work)).frobenius_norm().powi(2),
            |v, step| svt(v, step * lambda),
            |a| {
                lambda
                    * svd(a)
                        .map(|d| d.s.iter().sum::<f64>())
                        .expect("spectrum of finite iterate")
            },
            StopRule::RelObjChange(opts.tol),
            opts.max_iter,
        )?;
        out.x
    };

    // Fold the feature scaling back so the map acts on raw features.
    let a = match &scales {
        Some(s) => {
            let mut m = a_fit;
            for i in 0..m.rows() {
                for j in 0..m.cols() {
                    m[(i, j)] /= s[j];
                }
            }
            m
        }
        None => a_fit,
    };

    let singular_values = svd(&a)?.s;
    let train_rmse = mean_rmse(&y.sub(&a.matmul(x)));
    Ok(PerceptualMap {
        a,
        lambda,
        singular_values,
        train_rmse,
        standardized: opts.standardize,
    })
}

/// Cross-validation report over a λ grid.
#[derive(Debug, Clone)]
pub struct CvReport {
    pub lambda_grid: Vec<f64>,
    /// folds × grid held-out mean RMSE.
    pub fold_rmse: Matrix,
    pub mean_rmse: Vec<f64>,
    pub best_lambda: f64,
}

/// Five-fold-style cross-validation: deterministic fold assignment from
/// `seed`, per-dimension held-out RMSE averaged across output dimensions,
/// then across folds.
pub fn cross_validate(
    x: &Matrix,
    y: &Matrix,
    lambda_grid: &[f64],
    folds: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<CvReport> {
    let n = x.cols();
    if folds < 2 {
        return Err(Error::InvalidConfig("folds must be >= 2".into()));
    }
    if n < folds {
        return Err(Error::InvalidConfig(format!(
            "need at least {folds} samples for {folds} folds, got {n}"
        )));
    }
    if lambda_grid.is_empty() || !lambda_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidConfig(
            "lambda grid must be non-empty and strictly increasing".into(),
        ));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let fold_of: Vec<usize> = {
        let mut f = vec![0; n];
        for (pos, &idx) in order.iter().enumerate() {
            f[idx] = pos % folds;
        }
        f
    };

    let take = |cols: &[usize], m: &Matrix| {
        Matrix::from_fn(m.rows(), cols.len(), |i, j| m[(i, cols[j])])
    };

    let mut fold_rmse = Matrix::zeros(folds, lambda_grid.len());
    for fold in 0..folds {
        let test_cols: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
        let train_cols: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
        let (x_tr, y_tr) = (take(&train_cols, x), take(&train_cols, y));
        let (x_te, y_te) = (take(&test_cols, x), take(&test_cols, y));
        for (g, &lambda) in lambda_grid.iter().enumerate() {
            let map = fit(&x_tr, &y_tr, lambda, opts)?;
            fold_rmse[(fold, g)] = mean_rmse(&y_te.sub(&map.a.matmul(&x_te)));
        }
    }

    let mean: Vec<f64> = (0..lambda_grid.len())
        .map(|g| (0..folds).map(|f| fold_rmse[(f, g)]).sum::<f64>() / folds as f64)
        .collect();
    let best = mean
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .expect("non-empty grid");

    Ok(CvReport {
        lambda_grid: lambda_grid.to_vec(),
        fold_rmse,
        mean_rmse: mean,
        best_lambda: lambda_grid[best],
    })
}

/// Percept of a single compound: `A·x`.
pub fn predict_compound(map: &PerceptualMap, features: &[f64]) -> Result<Vec<f64>> {
    if features.len() != map.input_dim() {
        return Err(Error::dim(
            "predict_compound",
            map.input_dim(),
            features.len(),
        ));
    }
    Ok(map.a.matvec(features))
}

/// Percept of a mixture: synthesis in feature space first, then one
/// application of the map.
pub fn predict_mixture(
    map: &PerceptualMap,
    dict: &Dictionary,
    spec: &MixtureSpec,
    normalize: bool,
) -> Result<Vec<f64>> {
    let features = mix(dict, spec, normalize)?;
    predict_compound(map, &features)
}

/// ℓ2 distance between the predicted percepts of two mixtures.
pub fn perceptual_distance(
    map: &PerceptualMap,
    dict: &Dictionary,
    spec_a: &MixtureSpec,
    spec_b: &MixtureSpec,
    normalize: bool,
) -> Result<f64> {
    let pa = predict_mixture(map, dict, spec_a, normalize)?;
    let pb = predict_mixture(map, dict, spec_b, normalize)?;
    let diff: Vec<f64> = pa.iter().zip(&pb).map(|(a, b)| a - b).collect();
    Ok(norm2(&diff))
}

// ── Persistence ──────────────────────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
pub struct MapJson {
    pub k: usize,
    pub l: usize,
    pub lambda: f64,
    /// Row-major entries of A.
    pub a: Vec<f64>,
    pub singular_values: Vec<f64>,
    pub train_rmse: f64,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

pub fn save_map(
    path: impl AsRef<Path>,
    map: &PerceptualMap,
    config: Option<serde_json::Value>,
) -> Result<()> {
    let doc = MapJson {
        k: map.input_dim(),
        l: map.output_dim(),
        lambda: map.lambda,
        a: map.a.data().to_vec(),
        singular_values: map.singular_values.clone(),
        train_rmse: map.train_rmse,
        standardize: map.standardized,
        config,
    };
    std::fs::write(path, serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

pub fn load_map(path: impl AsRef<Path>) -> Result<PerceptualMap> {
    let doc: MapJson = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    Ok(PerceptualMap {
        a: Matrix::new(doc.l, doc.k, doc.a)?,
        lambda: doc.lambda,
        singular_values: doc.singular_values,
        train_rmse: doc.train_rmse,
        standardized: doc.standardize,
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CvJson {
    pub lambda_grid: Vec<f64>,
    pub fold_rmse: Vec<Vec<f64>>,
    pub mean_rmse: Vec<f64>,
    pub best_lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

pub fn save_cv(
    path: impl AsRef<Path>,
    report: &CvReport,
    config: Option<serde_json::Value>,
) -> Result<()> {
    let doc = CvJson {
        lambda_grid: report.lambda_grid.clone(),
        fold_rmse: (0..report.fold_rmse.rows())
            .map(|i| report.fold_rmse.row(i).to_vec())
            .collect(),
        mean_rmse: report.mean_rmse.clone(),
        best_lambda: report.best_lambda,
        config,
    };
    std::fs::write(path, serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}
