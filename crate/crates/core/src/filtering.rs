//! Static target-percept filter design and LMS-like non-negative
//! adaptive filtering in a simulated time-varying environment.
//!
//! The static problem minimizes `½‖A·x_in + A·X_dict·w − y_des‖₂² + μJ(w)`
//! over `w ≥ 0` via the shared design core. The adaptive rule is the
//! multiplicative LMS update
//!
//! `w_{t+1} = w_t − 2η·diag(w_t)·(Dᵀ(A·x_in,t + D·w_t − y_des,t) + μ·∂J(w_t))`
//!
//! with `D = A·X_dict`, `∂J = sign` (zero at zero), clamped elementwise at
//! zero afterwards. Coordinates that reach exactly zero are permanently
//! absorbed by the diag(w_t) factor, so initialization must be strictly
//! positive.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::Dictionary;
use crate::error::{Error, Result};
use crate::numerics::matrix::{norm2, Matrix};
use crate::numerics::svd::sigma_max;
use crate::perceptmap::PerceptualMap;
use crate::steganography::{solve_design_core, support_of, Regularizer, StegoSolution};

#[derive(Debug, Clone)]
pub struct FilterProblem {
    pub x_in: Vec<f64>,
    pub y_des: Vec<f64>,
    pub dict: Dictionary,
    pub map: PerceptualMap,
    pub mu: f64,
    pub regularizer: Regularizer,
}

impl FilterProblem {
    fn check(&self) -> Result<()> {
        if self.map.input_dim() != self.x_in.len() {
            return Err(Error::dim(
                "filter: input dims",
                self.map.input_dim(),
                self.x_in.len(),
            ));
        }
        if self.map.output_dim() != self.y_des.len() {
            return Err(Error::dim(
                "filter: target dims",
                self.map.output_dim(),
                self.y_des.len(),
            ));
        }
        if self.map.input_dim() != self.dict.feature_dim() {
            return Err(Error::dim(
                "filter: dict feature dims",
                self.map.input_dim(),
                self.dict.feature_dim(),
            ));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidConfig("mu must be >= 0".into()));
        }
        Ok(())
    }

    /// Offset b = A·x_in − y_des.
    fn offset(&self) -> Result<Vec<f64>> {
        let ax = crate::perceptmap::predict_compound(&self.map, &self.x_in)?;
        Ok(ax.iter().zip(&self.y_des).map(|(a, y)| a - y).collect())
    }
}

/// Solve the static filter design problem.
pub fn solve_filter(p: &FilterProblem, tol: f64, max_iter: usize) -> Result<StegoSolution> {
    p.check()?;
    let b = p.offset()?;
    let e = p.map.a.matmul(p.dict.features());
    let (weights, objective, kkt_residual, iterations) =
        solve_design_core(&e, &b, p.mu, p.regularizer, tol, max_iter)?;
    let wm = Matrix::new(weights.len(), 1, weights.clone())?;
    let bm = Matrix::new(b.len(), 1, b)?;
    let residual_l2 = bm.add(&e.matmul(&wm)).frobenius_norm();
    let support = support_of(p.dict.ids(), &weights);
    Ok(StegoSolution {
        weights,
        support,
        residual_l2,
        objective,
        kkt_residual,
        iterations,
    })
}

/// One LMS update. Returns the new weights and the number of coordinates
/// the final clamp set to zero.
#[allow(clippy::too_many_arguments)]
pub fn lms_step(
    w: &[f64],
    x_in: &[f64],
    y_des: &[f64],
    dict: &Dictionary,
    map: &PerceptualMap,
    eta: f64,
    mu: f64,
) -> Result<(Vec<f64>, usize)> {
    if map.input_dim() != x_in.len() {
        return Err(Error::dim("lms_step: input dims", map.input_dim(), x_in.len()));
    }
    if map.output_dim() != y_des.len() {
        return Err(Error::dim(
            "lms_step: target dims",
            map.output_dim(),
            y_des.len(),
        ));
    }
    if dict.len() != w.len() {
        return Err(Error::dim("lms_step: weight dims", dict.len(), w.len()));
    }
    if map.input_dim() != dict.feature_dim() {
        return Err(Error::dim(
            "lms_step: dict feature dims",
            map.input_dim(),
            dict.feature_dim(),
        ));
    }

    let d = map.a.matmul(dict.features());
    let wm = Matrix::new(w.len(), 1, w.to_vec())?;
    let ax = crate::perceptmap::predict_compound(map, x_in)?;
    // residual r = A·x_in + D·w − y_des
    let dw = d.matmul(&wm);
    let r: Vec<f64> = (0..ax.len())
        .map(|i| ax[i] + dw[(i, 0)] - y_des[i])
        .collect();
    let g = d.transpose().matvec(&r);

    let mut clamped = 0usize;
    let mut out = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        let subgrad = if w[i] > 0.0 { 1.0 } else { 0.0 };
        let next = w[i] - 2.0 * eta * w[i] * (g[i] + mu * subgrad);
        if next < 0.0 {
            clamped += 1;
            out.push(0.0);
        } else {
            out.push(next);
        }
    }
    Ok((out, clamped))
}

/// Step-size bound below which the stationary residual is empirically
/// nonincreasing: 1/(2·max(w₀)·σ_max(A·X_dict)²).
pub fn eta_bound(w0: &[f64], dict: &Dictionary, map: &PerceptualMap) -> Result<f64> {
    let d = map.a.matmul(dict.features());
    let s = sigma_max(&d)?;
    let w_max = w0.iter().cloned().fold(0.0f64, f64::max);
    if w_max <= 0.0 || s <= 0.0 {
        return Err(Error::DegenerateData(
            "eta bound undefined for zero weights or zero dictionary".into(),
        ));
    }
    Ok(1.0 / (2.0 * w_max * s * s))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Segment {
    pub steps: usize,
    pub x_in: Vec<f64>,
    pub y_des: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvironmentScenario {
    pub segments: Vec<Segment>,
    pub seed: u64,
    pub jitter_sigma: f64,
}

impl EnvironmentScenario {
    pub fn check(&self, k: usize, l: usize) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidConfig("scenario has no segments".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if s.steps == 0 {
                return Err(Error::InvalidConfig(format!(
                    "segment {i}: duration must be >= 1"
                )));
            }
            if s.x_in.len() != k {
                return Err(Error::dim("scenario x_in", k, s.x_in.len()));
            }
            if s.y_des.len() != l {
                return Err(Error::dim("scenario y_des", l, s.y_des.len()));
            }
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(Error::InvalidConfig("jitter_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<EnvironmentScenario> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

pub fn save_scenario(path: impl AsRef<Path>, s: &EnvironmentScenario) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(s)?)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct AdaptiveRun {
    pub eta: f64,
    pub mu: f64,
    /// w_t after each step; w_trajectory[t] pairs with
    /// residual_trajectory[t], the residual measured before step t's
    /// update.
    pub w_trajectory: Vec<Vec<f64>>,
    pub residual_trajectory: Vec<f64>,
    /// Total coordinate clamps over the run (zero for small η).
    pub clamp_events: usize,
    pub scenario: EnvironmentScenario,
}

/// Iterate `lms_step` over a scenario with optional seeded Gaussian
/// jitter on x_in.
pub fn run_adaptive(
    scenario: &EnvironmentScenario,
    dict: &Dictionary,
    map: &PerceptualMap,
    eta: f64,
    mu: f64,
    w0: &[f64],
) -> Result<AdaptiveRun> {
    scenario.check(map.input_dim(), map.output_dim())?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidConfig("eta must be > 0".into()));
    }
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::InvalidConfig("mu must be >= 0".into()));
    }
    if w0.len() != dict.len() {
        return Err(Error::dim("run_adaptive: w0", dict.len(), w0.len()));
    }
    if let Some(i) = w0.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::InvalidConfig(format!(
            "w0[{i}] = {} is not strictly positive: the multiplicative \
             update freezes zero coordinates permanently (absorbing state)",
            w0[i]
        )));
    }

    let d = map.a.matmul(dict.features());
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");

    let mut w = w0.to_vec();
    let mut w_trajectory = Vec::new();
    let mut residual_trajectory = Vec::new();
    let mut clamp_events = 0usize;

    for seg in &scenario.segments {
        for _ in 0..seg.steps {
            let x_t: Vec<f64> = if scenario.jitter_sigma > 0.0 {
                seg.x_in
                    .iter()
                    .map(|&v| v + scenario.jitter_sigma * noise.sample(&mut rng))
                    .collect()
            } else {
                seg.x_in.clone()
            };
            // Residual before the update.
            let ax = crate::perceptmap::predict_compound(map, &x_t)?;
            let wm = Matrix::new(w.len(), 1, w.clone())?;
            let dw = d.matmul(&wm);
            let r: Vec<f64> = (0..ax.len())
                .map(|i| ax[i] + dw[(i, 0)] - seg.y_des[i])
                .collect();
            residual_trajectory.push(norm2(&r));

            let (w_next, clamps) = lms_step(&w, &x_t, &seg.y_des, dict, map, eta, mu)?;
            clamp_events += clamps;
            w = w_next;
            w_trajectory.push(w.clone());
        }
    }

    Ok(AdaptiveRun {
        eta,
        mu,
        w_trajectory,
        residual_trajectory,
        clamp_events,
        scenario: scenario.clone(),
    })
}

/// Write a run as CSV: `t, residual, w_1..w_n`.
pub fn save_run_csv(path: impl AsRef<Path>, run: &AdaptiveRun) -> Result<()> {
    let n = run.w_trajectory.first().map_or(0, Vec::len);
    let mut wtr = csv::Writer::from_path(path.as_ref())
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let mut header = vec!["t".to_string(), "residual".to_string()];
    header.extend((1..=n).map(|i| format!("w_{i}")));
    wtr.write_record(&header)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for (t, (res, w)) in run
        .residual_trajectory
        .iter()
        .zip(&run.w_trajectory)
        .enumerate()
    {
        let mut rec = vec![t.to_string(), res.to_string()];
        rec.extend(w.iter().map(|v| v.to_string()));
        wtr.write_record(&rec)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    wtr.flush()?;
    Ok(())
}
