//! Simultaneously sparse non-negative mixture design for canceling
//! several malodors at once.
//!
//! Minimizes `½‖Y_mal + D·W‖_F² + μ‖W‖_{1,2}` over `W ≥ 0` with
//! `D = A·X_dict`, by accelerated proximal gradient with the row-wise
//! non-negative group prox. With the olfactory-white family enabled, the
//! fidelity term is centered per column (`C = I − (1/l)·1·1ᵀ`), which
//! minimizes over whites of the form `1·cᵀ` exactly: for fixed W the
//! optimal `c` is the per-column mean of the residual.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Dictionary;
use crate::error::{Error, Result};
use crate::numerics::matrix::{norm2, Matrix};
use crate::numerics::prox::prox_nonneg_group;
use crate::numerics::solver::{apg, StopRule};
use crate::numerics::svd::sigma_max;
use crate::perceptmap::PerceptualMap;

/// Rows with any weight above `ACTIVITY_THRESHOLD · max(W)` count as
/// active support.
pub const ACTIVITY_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct CancellationProblem {
    /// l×m perceptual representations of the malodors (one column each).
    pub y_mal: Matrix,
    pub dict: Dictionary,
    pub map: PerceptualMap,
    pub mu: f64,
    /// Minimize over the family of whites `1·cᵀ` instead of fixing the
    /// white at zero.
    pub white_family: bool,
}

#[derive(Debug, Clone)]
pub struct CancellationSolution {
    /// n×m non-negative design weights.
    pub w: Matrix,
    /// Compound ids with any weight above the activity threshold.
    pub support: Vec<String>,
    pub residual_frobenius: f64,
    pub residual_per_odor: Vec<f64>,
    /// Optimal white offset per malodor when the family is enabled.
    pub white_offset: Option<Vec<f64>>,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub objective: f64,
}

impl CancellationProblem {
    fn check(&self) -> Result<()> {
        if self.map.output_dim() != self.y_mal.rows() {
            return Err(Error::dim(
                "cancellation: perceptual dims",
                self.map.output_dim(),
                self.y_mal.rows(),
            ));
        }
        if self.map.input_dim() != self.dict.feature_dim() {
            return Err(Error::dim(
                "cancellation: feature dims",
                self.map.input_dim(),
                self.dict.feature_dim(),
            ));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidConfig("mu must be >= 0".into()));
        }
        Ok(())
    }

    /// The synthesizer's perceptual dictionary `D = A·X_dict`.
    pub fn design_matrix(&self) -> Matrix {
        self.map.a.matmul(self.dict.features())
    }
}

fn centered(m: &Matrix) -> Matrix {
    m.center_columns()
}

/// Row-wise ℓ1/ℓ2 group norm: sum over rows of row ℓ2 norms.
pub fn group_norm(w: &Matrix) -> f64 {
    (0..w.rows()).map(|i| norm2(w.row(i))).sum()
}

/// μ at or above which W = 0 is optimal: the largest row-wise ℓ2 norm of
/// the negative part of `Dᵀ·Y_mal` (centered when the white family is on).
pub fn zero_solution_threshold(p: &CancellationProblem) -> Result<f64> {
    p.check()?;
    let d = p.design_matrix();
    let y = if p.white_family {
        centered(&p.y_mal)
    } else {
        p.y_mal.clone()
    };
    let g = d.transpose().matmul(&y);
    Ok((0..g.rows())
        .map(|i| {
            let neg: Vec<f64> = g.row(i).iter().map(|v| (-v).max(0.0)).collect();
            norm2(&neg)
        })
        .fold(0.0f64, f64::max))
}

/// Solve the cancellation design problem.
pub fn solve_cancellation(
    p: &CancellationProblem,
    tol: f64,
    max_iter: usize,
) -> Result<CancellationSolution> {
    p.check()?;
    let d = p.design_matrix();
    let n = p.dict.len();
    let m = p.y_mal.cols();

    let lip = sigma_max(&d)?.powi(2);
    let mu = p.mu;
    let white = p.white_family;
    let y = &p.y_mal;

    let residual = |w: &Matrix| {
        let r = y.add(&d.matmul(w));
        if white {
            centered(&r)
        } else {
            r
        }
    };
    let prox = |v: &Matrix, step: f64| -> Result<Matrix> {
        let mut out = Matrix::zeros(v.rows(), v.cols());
        for i in 0..v.rows() {
            let row = prox_nonneg_group(v.row(i), step * mu);
            out.row_mut(i).copy_from_slice(&row);
        }
        Ok(out)
    };

    let outcome = if lip == 0.0 {
        // Degenerate zero map or dictionary: W = 0 is optimal.
        crate::numerics::solver::ApgOutcome {
            x: Matrix::zeros(n, m),
            objective: 0.5 * residual(&Matrix::zeros(n, m)).frobenius_norm().powi(2),
            iterations: 0,
            kkt_residual: 0.0,
            objective_trace: vec![],
        }
    } else {
        apg(
            Matrix::zeros(n, m),
            1.0 / lip,
            |w| {
                let r = residual(w);
                d.transpose().matmul(&r)
            },
            |w| 0.5 * residual(w).frobenius_norm().powi(2),
            prox,
            group_norm_scaled(mu),
            StopRule::KktResidual(tol),
            max_iter,
        )?
    };

    let w = outcome.x;
    let r = residual(&w);
    let residual_per_odor = r.column_norms();
    let residual_frobenius = r.frobenius_norm();
    let white_offset = if white {
        // c = per-column mean of the uncentered residual.
        Some(y.add(&d.matmul(&w)).column_means())
    } else {
        None
    };

    let w_max = w.max_abs();
    let support: Vec<String> = (0..n)
        .filter(|&i| w.row(i).iter().any(|&v| v > ACTIVITY_THRESHOLD * w_max))
        .map(|i| p.dict.ids()[i].clone())
        .collect();

    Ok(CancellationSolution {
        w,
        support,
        residual_frobenius,
        residual_per_odor,
        white_offset,
        iterations: outcome.iterations,
        kkt_residual: outcome.kkt_residual,
        objective: outcome.objective,
    })
}

fn group_norm_scaled(mu: f64) -> impl Fn(&Matrix) -> f64 {
    move |w| mu * group_norm(w)
}

/// Recompute the residual norms of a solution from the problem data.
pub fn residual_report(
    p: &CancellationProblem,
    sol: &CancellationSolution,
) -> Result<(f64, Vec<f64>)> {
    p.check()?;
    if sol.w.rows() != p.dict.len() || sol.w.cols() != p.y_mal.cols() {
        return Err(Error::dim(
            "residual_report",
            format!("{}x{}", p.dict.len(), p.y_mal.cols()),
            format!("{}x{}", sol.w.rows(), sol.w.cols()),
        ));
    }
    let r = p.y_mal.add(&p.design_matrix().matmul(&sol.w));
    let r = if p.white_family { centered(&r) } else { r };
    Ok((r.frobenius_norm(), r.column_norms()))
}

/// Full objective `½‖residual‖_F² + μ‖W‖_{1,2}`.
pub fn cancellation_objective(p: &CancellationProblem, w: &Matrix) -> f64 {
    let r = p.y_mal.add(&p.design_matrix().matmul(w));
    let r = if p.white_family { centered(&r) } else { r };
    0.5 * r.frobenius_norm().powi(2) + p.mu * group_norm(w)
}

// ── Persistence ──────────────────────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
pub struct SolutionJson {
    /// Per-compound weight rows (length m), keyed by compound id; only
    /// rows with a positive entry are listed.
    pub weights: BTreeMap<String, Vec<f64>>,
    pub support: Vec<String>,
    pub residual_frobenius: f64,
    pub residual_per_odor: Vec<f64>,
    pub white_offset: Option<Vec<f64>>,
    pub mu: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

pub fn save_solution(
    path: impl AsRef<Path>,
    p: &CancellationProblem,
    sol: &CancellationSolution,
    config: Option<serde_json::Value>,
) -> Result<()> {
    let mut weights = BTreeMap::new();
    for (i, id) in p.dict.ids().iter().enumerate() {
        let row = sol.w.row(i);
        if row.iter().any(|&v| v > 0.0) {
            weights.insert(id.clone(), row.to_vec());
        }
    }
    let mut support = sol.support.clone();
    support.sort();
    let doc = SolutionJson {
        weights,
        support,
        residual_frobenius: sol.residual_frobenius,
        residual_per_odor: sol.residual_per_odor.clone(),
        white_offset: sol.white_offset.clone(),
        mu: p.mu,
        kkt_residual: sol.kkt_residual,
        iterations: sol.iterations,
        config,
    };
    std::fs::write(path, serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::svd::svd;
    use crate::numerics::test_util::seeded_matrix;

    fn make_problem(seed: u64, n: usize, m: usize, mu: f64, white: bool) -> CancellationProblem {
        let l = 4;
        let k = 5;
        let a = seeded_matrix(seed, l, k);
        let map = PerceptualMap {
            singular_values: svd(&a).unwrap().s,
            a,
            lambda: 0.0,
            train_rmse: 0.0,
            standardized: false,
        };
        let dict = Dictionary::new(
            (0..n).map(|i| format!("c{i}")).collect(),
            seeded_matrix(seed + 1, k, n),
        )
        .unwrap();
        CancellationProblem {
            y_mal: seeded_matrix(seed + 2, l, m).scale(2.0),
            dict,
            map,
            mu,
            white_family: white,
        }
    }

    #[test]
    fn zero_malodor_gives_zero_design() {
        let mut p = make_problem(1, 6, 2, 0.5, false);
        p.y_mal = Matrix::zeros(4, 2);
        let sol = solve_cancellation(&p, 1e-10, 50_000).unwrap();
        assert_eq!(sol.w.max_abs(), 0.0);
        assert_eq!(sol.residual_frobenius, 0.0);
        assert!(sol.support.is_empty());
    }

    #[test]
    fn mu_above_threshold_zeroes_w() {
        for seed in [3, 4, 5] {
            let mut p = make_problem(seed, 5, 3, 0.0, false);
            let thresh = zero_solution_threshold(&p).unwrap();
            p.mu = thresh * 1.000001;
            let sol = solve_cancellation(&p, 1e-10, 50_000).unwrap();
            assert_eq!(sol.w.max_abs(), 0.0, "seed {seed}");
            // Just below the threshold the solution is nonzero.
            p.mu = thresh * 0.99;
            let sol = solve_cancellation(&p, 1e-10, 50_000).unwrap();
            assert!(sol.w.max_abs() > 0.0, "seed {seed}");
        }
    }

    /// Brute-force grid oracle on a 3-compound single-malodor instance.
    #[test]
    fn grid_search_oracle_small_instance() {
        let p = make_problem(7, 3, 1, 0.3, false);
        let sol = solve_cancellation(&p, 1e-10, 100_000).unwrap();
        let f_solver = cancellation_objective(&p, &sol.w);

        let mut best = f64::INFINITY;
        let steps = 201; // [0, 2] at step 1e-2
        for i in 0..steps {
            for j in 0..steps {
                for k in 0..steps {
                    let w = Matrix::new(
                        3,
                        1,
                        vec![i as f64 * 0.01, j as f64 * 0.01, k as f64 * 0.01],
                    )
                    .unwrap();
                    let f = cancellation_objective(&p, &w);
                    if f < best {
                        best = f;
                    }
                }
            }
        }
        assert!(
            f_solver <= best + 1e-3,
            "solver {f_solver} worse than grid {best}"
        );
    }

    #[test]
    fn exact_cancellation_instance() {
        // Construct a dictionary column whose image is exactly -y_mal.
        let mut p = make_problem(11, 4, 1, 0.0, false);
        let d = p.design_matrix();
        let y = d.column(2).iter().map(|v| -v).collect::<Vec<_>>();
        p.y_mal = Matrix::new(4, 1, y).unwrap();
        let sol = solve_cancellation(&p, 1e-12, 200_000).unwrap();
        assert!(sol.residual_frobenius < 1e-8);
    }

    #[test]
    fn residual_report_identities() {
        let p = make_problem(13, 6, 3, 0.4, false);
        let sol = solve_cancellation(&p, 1e-9, 100_000).unwrap();
        let (fro, per) = residual_report(&p, &sol).unwrap();
        assert!((fro - sol.residual_frobenius).abs() < 1e-12);
        let sumsq: f64 = per.iter().map(|v| v * v).sum();
        assert!((fro * fro - sumsq).abs() < 1e-9);

        // W = 0 report equals the column norms of Y_mal.
        let zero = CancellationSolution {
            w: Matrix::zeros(6, 3),
            support: vec![],
            residual_frobenius: 0.0,
            residual_per_odor: vec![],
            white_offset: None,
            iterations: 0,
            kkt_residual: 0.0,
            objective: 0.0,
        };
        let (_, per0) = residual_report(&p, &zero).unwrap();
        for (a, b) in per0.iter().zip(p.y_mal.column_norms()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn feasibility_and_monotonicity_in_mu() {
        let mus = [2.0, 1.0, 0.5, 0.25, 0.1];
        let mut prev_res = f64::INFINITY;
        let mut prev_gn = 0.0;
        for &mu in &mus {
            let p = make_problem(17, 8, 2, mu, false);
            let sol = solve_cancellation(&p, 1e-10, 200_000).unwrap();
            assert!(sol.w.data().iter().all(|&v| v >= 0.0), "W must be >= 0");
            // Decreasing mu: residual nonincreasing, group norm nondecreasing.
            assert!(sol.residual_frobenius <= prev_res + 1e-6);
            assert!(group_norm(&sol.w) >= prev_gn - 1e-6);
            prev_res = sol.residual_frobenius;
            prev_gn = group_norm(&sol.w);
        }
    }

    #[test]
    fn white_family_dominates_fixed_zero() {
        for seed in [21, 22, 23] {
            let p_off = make_problem(seed, 6, 2, 0.5, false);
            let mut p_on = p_off.clone();
            p_on.white_family = true;
            let off = solve_cancellation(&p_off, 1e-10, 200_000).unwrap();
            let on = solve_cancellation(&p_on, 1e-10, 200_000).unwrap();
            assert!(
                on.residual_frobenius <= off.residual_frobenius + 1e-6,
                "seed {seed}: {} vs {}",
                on.residual_frobenius,
                off.residual_frobenius
            );
            assert!(on.white_offset.is_some());
        }
    }

    #[test]
    fn white_offset_is_column_mean() {
        let mut p = make_problem(31, 5, 2, 0.3, true);
        p.white_family = true;
        let sol = solve_cancellation(&p, 1e-10, 200_000).unwrap();
        let r = p.y_mal.add(&p.design_matrix().matmul(&sol.w));
        for (a, b) in sol.white_offset.as_ref().unwrap().iter().zip(r.column_means()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn objective_trace_monotone() {
        let p = make_problem(41, 10, 3, 0.2, false);
        let d = p.design_matrix();
        let lip = sigma_max(&d).unwrap().powi(2);
        let out = apg(
            Matrix::zeros(10, 3),
            1.0 / lip,
            |w| d.transpose().matmul(&p.y_mal.add(&d.matmul(w))),
            |w| 0.5 * p.y_mal.add(&d.matmul(w)).frobenius_norm().powi(2),
            |v, step| {
                let mut out = Matrix::zeros(v.rows(), v.cols());
                for i in 0..v.rows() {
                    let row = prox_nonneg_group(v.row(i), step * p.mu);
                    out.row_mut(i).copy_from_slice(&row);
                }
                Ok(out)
            },
            |w| p.mu * group_norm(w),
            StopRule::KktResidual(1e-9),
            200_000,
        )
        .unwrap();
        for w in out.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    /// KKT certificate: active rows satisfy ‖−grad row‖₂ = μ on their
    /// positive part; inactive rows satisfy the zero-optimality condition.
    #[test]
    fn kkt_certificate() {
        let p = make_problem(51, 8, 2, 0.6, false);
        let tol = 1e-7;
        let sol = solve_cancellation(&p, 1e-10, 300_000).unwrap();
        let d = p.design_matrix();
        let g = d.transpose().matmul(&p.y_mal.add(&d.matmul(&sol.w)));
        let w_max = sol.w.max_abs();
        for i in 0..8 {
            let active = sol.w.row(i).iter().any(|&v| v > ACTIVITY_THRESHOLD * w_max);
            if active {
                // On active rows with strictly positive entries, the
                // stationarity condition gives grad = −μ·w/‖w‖ at positive
                // coordinates.
                let wn = norm2(sol.w.row(i));
                for j in 0..2 {
                    if sol.w[(i, j)] > ACTIVITY_THRESHOLD * w_max {
                        let expect = -p.mu * sol.w[(i, j)] / wn;
                        assert!(
                            (g[(i, j)] - expect).abs() < 1e-5,
                            "row {i} col {j}: {} vs {}",
                            g[(i, j)],
                            expect
                        );
                    }
                }
            } else {
                // Zero row: ‖negative part of grad row‖ ≤ μ.
                let neg: Vec<f64> = g.row(i).iter().map(|v| (-v).max(0.0)).collect();
                assert!(norm2(&neg) <= p.mu + tol);
            }
        }
    }
}
