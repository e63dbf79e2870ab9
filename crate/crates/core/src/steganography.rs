//! Food-steganography design: a non-negative additive (pure compounds or
//! food ingredients) whose predicted percept cancels a hidden food's
//! percept.
//!
//! Minimizes `½‖b + E·w‖₂² + ν·J(w)` over `w ≥ 0`, where
//! `b = A·X_hid·ŵ_hid` (hidden weights unit-ℓ2 normalized) and
//! `E = A·X_dict` or, when an ingredient table is present,
//! `E = A·X_dict·W_ingr`. The same solver core backs the static target
//! filter.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{mix, Dictionary, IngredientTable, MixtureSpec};
use crate::error::{Error, Result};
use crate::numerics::matrix::{norm2, Matrix};
use crate::numerics::prox::{project_nonneg, prox_nonneg_l1, prox_nonneg_l2sq};
use crate::numerics::solver::{apg, StopRule};
use crate::numerics::svd::sigma_max;
use crate::perceptmap::PerceptualMap;

pub use crate::cancellation::ACTIVITY_THRESHOLD;

/// Penalty `J` applied to the additive weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    /// J(w) = Σ wᵢ (= ‖w‖₁ on the non-negative orthant).
    L1,
    /// J(w) = ‖w‖₂².
    L2Sq,
    /// J(w) = 0; only the non-negativity constraint remains.
    None,
}

impl Regularizer {
    pub fn value(&self, w: &[f64]) -> f64 {
        match self {
            Regularizer::L1 => w.iter().sum(),
            Regularizer::L2Sq => w.iter().map(|v| v * v).sum(),
            Regularizer::None => 0.0,
        }
    }

    pub fn prox(&self, v: &[f64], theta: f64) -> Vec<f64> {
        match self {
            Regularizer::L1 => prox_nonneg_l1(v, theta),
            Regularizer::L2Sq => prox_nonneg_l2sq(v, theta),
            Regularizer::None => project_nonneg(v),
        }
    }
}

impl std::str::FromStr for Regularizer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(Regularizer::L1),
            "l2sq" => Ok(Regularizer::L2Sq),
            "none" => Ok(Regularizer::None),
            other => Err(Error::InvalidConfig(format!(
                "unknown regularizer '{other}' (expected l1, l2sq, or none)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StegoProblem {
    /// Dictionary the hidden mixture is expressed over (X_hid).
    pub hidden_dict: Dictionary,
    /// The hidden (averse) food as a mixture over `hidden_dict`.
    pub hidden: MixtureSpec,
    /// Design dictionary of available pure compounds (X_dict).
    pub dict: Dictionary,
    /// When present, the additive is composed of these ingredients and
    /// the design variable lives on the ingredient axis.
    pub ingredients: Option<IngredientTable>,
    pub map: PerceptualMap,
    pub nu: f64,
    pub regularizer: Regularizer,
}

#[derive(Debug, Clone)]
pub struct StegoSolution {
    /// Non-negative weights over dict compounds, or over ingredients when
    /// an ingredient table is present.
    pub weights: Vec<f64>,
    /// Ids of entries above the activity threshold.
    pub support: Vec<String>,
    pub residual_l2: f64,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl StegoProblem {
    fn check(&self) -> Result<()> {
        if self.map.input_dim() != self.hidden_dict.feature_dim() {
            return Err(Error::dim(
                "stego: hidden feature dims",
                self.map.input_dim(),
                self.hidden_dict.feature_dim(),
            ));
        }
        if self.map.input_dim() != self.dict.feature_dim() {
            return Err(Error::dim(
                "stego: dict feature dims",
                self.map.input_dim(),
                self.dict.feature_dim(),
            ));
        }
        if let Some(t) = &self.ingredients {
            if t.weights.rows() != self.dict.len() {
                return Err(Error::dim(
                    "stego: ingredient compound axis",
                    self.dict.len(),
                    t.weights.rows(),
                ));
            }
            if t.weights.cols() != t.ingredient_ids.len() {
                return Err(Error::dim(
                    "stego: ingredient id count",
                    t.weights.cols(),
                    t.ingredient_ids.len(),
                ));
            }
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::InvalidConfig("nu must be >= 0".into()));
        }
        Ok(())
    }

    /// Hidden percept b = A·X_hid·ŵ_hid with the hidden mixture weights
    /// normalized to unit ℓ2 norm.
    pub fn hidden_percept(&self) -> Result<Vec<f64>> {
        let features = mix(&self.hidden_dict, &self.hidden, true)?;
        crate::perceptmap::predict_compound(&self.map, &features)
    }

    /// Design operator E (l×n over compounds, or l×n' over ingredients).
    pub fn design_operator(&self) -> Matrix {
        let e = self.map.a.matmul(self.dict.features());
        match &self.ingredients {
            Some(t) => e.matmul(&t.weights),
            None => e,
        }
    }

    /// Ids indexing the design variable.
    pub fn variable_ids(&self) -> Vec<String> {
        match &self.ingredients {
            Some(t) => t.ingredient_ids.clone(),
            None => self.dict.ids().to_vec(),
        }
    }
}

/// ν at or above which w = 0 is optimal for the l1 regularizer: the
/// largest positive part of `−Eᵀb`.
pub fn zero_solution_threshold(e: &Matrix, b: &[f64]) -> f64 {
    let bm = Matrix::new(b.len(), 1, b.to_vec()).expect("b finite");
    let g = e.transpose().matmul(&bm);
    g.data().iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max)
}

/// Shared non-negative design core: minimize ½‖b + E·w‖² + ν·J(w), w ≥ 0.
pub(crate) fn solve_design_core(
    e: &Matrix,
    b: &[f64],
    nu: f64,
    reg: Regularizer,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, f64, usize)> {
    if e.rows() != b.len() {
        return Err(Error::dim("design core: rows", e.rows(), b.len()));
    }
    let n = e.cols();
    let bm = Matrix::new(b.len(), 1, b.to_vec())?;
    let lip = sigma_max(e)?.powi(2);

    if lip == 0.0 {
        let obj = 0.5 * norm2(b).powi(2);
        return Ok((vec![0.0; n], obj, 0.0, 0));
    }

    let out = apg(
        Matrix::zeros(n, 1),
        1.0 / lip,
        |w| e.transpose().matmul(&bm.add(&e.matmul(w))),
        |w| 0.5 * bm.add(&e.matmul(w)).frobenius_norm().powi(2),
        |v, step| Matrix::new(n, 1, reg.prox(v.data(), step * nu)),
        |w| nu * reg.value(w.data()),
        StopRule::KktResidual(tol),
        max_iter,
    )?;
    Ok((
        out.x.data().to_vec(),
        out.objective,
        out.kkt_residual,
        out.iterations,
    ))
}

pub(crate) fn support_of(ids: &[String], w: &[f64]) -> Vec<String> {
    let w_max = w.iter().cloned().fold(0.0f64, f64::max);
    ids.iter()
        .zip(w)
        .filter(|&(_, &v)| v > ACTIVITY_THRESHOLD * w_max)
        .map(|(id, _)| id.clone())
        .collect()
}

pub fn solve_stego(p: &StegoProblem, tol: f64, max_iter: usize) -> Result<StegoSolution> {
    p.check()?;
    let b = p.hidden_percept()?;
    let e = p.design_operator();
    let (weights, objective, kkt_residual, iterations) =
        solve_design_core(&e, &b, p.nu, p.regularizer, tol, max_iter)?;
    let w = Matrix::new(weights.len(), 1, weights.clone())?;
    let bm = Matrix::new(b.len(), 1, b)?;
    let residual_l2 = bm.add(&e.matmul(&w)).frobenius_norm();
    let support = support_of(&p.variable_ids(), &weights);
    Ok(StegoSolution {
        weights,
        support,
        residual_l2,
        objective,
        kkt_residual,
        iterations,
    })
}

/// Check hiding quality two ways: the design residual ‖b + E·w‖₂ and the
/// perceptual distance between (cover + hidden + additive) and the cover
/// alone. Under the linear map these agree.
pub fn verify_hiding(
    p: &StegoProblem,
    sol: &StegoSolution,
    cover_dict: &Dictionary,
    cover: &MixtureSpec,
) -> Result<(f64, f64)> {
    p.check()?;
    let b = p.hidden_percept()?;
    let e = p.design_operator();
    if sol.weights.len() != e.cols() {
        return Err(Error::dim("verify_hiding", e.cols(), sol.weights.len()));
    }
    let w = Matrix::new(sol.weights.len(), 1, sol.weights.clone())?;
    let bm = Matrix::new(b.len(), 1, b)?;
    let hidden_residual = bm.add(&e.matmul(&w)).frobenius_norm();

    // Percept of cover + hidden + additive versus cover alone.
    let cover_percept = crate::perceptmap::predict_compound(&p.map, &mix(cover_dict, cover, false)?)?;
    let combined = {
        let hid = p.hidden_percept()?;
        let add = e.matmul(&w);
        let mut out = cover_percept.clone();
        for i in 0..out.len() {
            out[i] += hid[i] + add[(i, 0)];
        }
        out
    };
    let diff: Vec<f64> = combined
        .iter()
        .zip(&cover_percept)
        .map(|(a, b)| a - b)
        .collect();
    Ok((hidden_residual, norm2(&diff)))
}

// ── Persistence ──────────────────────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
pub struct StegoSolutionJson {
    /// Positive weights keyed by compound or ingredient id.
    pub weights: BTreeMap<String, f64>,
    pub support: Vec<String>,
    pub residual_l2: f64,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub nu: f64,
    pub regularizer: Regularizer,
    /// The hidden mixture is unit-ℓ2 normalized before solving; recorded
    /// so downstream consumers know the modeled intensity convention.
    pub hidden_normalized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

pub fn save_stego_solution(
    path: impl AsRef<Path>,
    p: &StegoProblem,
    sol: &StegoSolution,
    config: Option<serde_json::Value>,
) -> Result<()> {
    let ids = p.variable_ids();
    let mut weights = BTreeMap::new();
    for (id, &w) in ids.iter().zip(&sol.weights) {
        if w > 0.0 {
            weights.insert(id.clone(), w);
        }
    }
    let mut support = sol.support.clone();
    support.sort();
    let doc = StegoSolutionJson {
        weights,
        support,
        residual_l2: sol.residual_l2,
        objective: sol.objective,
        kkt_residual: sol.kkt_residual,
        iterations: sol.iterations,
        nu: p.nu,
        regularizer: p.regularizer,
        hidden_normalized: true,
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

    fn map_from(a: Matrix) -> PerceptualMap {
        PerceptualMap {
            singular_values: svd(&a).unwrap().s,
            a,
            lambda: 0.0,
            train_rmse: 0.0,
            standardized: false,
        }
    }

    fn make_problem(seed: u64, n: usize, nu: f64, reg: Regularizer) -> StegoProblem {
        let l = 4;
        let k = 5;
        let map = map_from(seeded_matrix(seed, l, k));
        let hidden_dict = Dictionary::new(
            vec!["h1".into(), "h2".into()],
            seeded_matrix(seed + 1, k, 2).add(&Matrix::from_fn(k, 2, |_, _| 1.5)),
        )
        .unwrap();
        let dict = Dictionary::new(
            (0..n).map(|i| format!("c{i}")).collect(),
            seeded_matrix(seed + 2, k, n),
        )
        .unwrap();
        StegoProblem {
            hidden_dict,
            hidden: MixtureSpec::new(vec![("h1".into(), 1.0), ("h2".into(), 0.5)]).unwrap(),
            dict,
            ingredients: None,
            map,
            nu,
            regularizer: reg,
        }
    }

    #[test]
    fn zero_hidden_percept_gives_zero_additive() {
        let mut p = make_problem(1, 4, 0.1, Regularizer::L1);
        p.map = map_from(Matrix::zeros(4, 5));
        let sol = solve_stego(&p, 1e-10, 50_000).unwrap();
        assert!(sol.weights.iter().all(|&w| w == 0.0));
        assert_eq!(sol.residual_l2, 0.0);
    }

    #[test]
    fn constructed_exact_canceler_reaches_zero_residual() {
        // Append a dict column whose image is exactly −b.
        let p0 = make_problem(3, 3, 0.0, Regularizer::None);
        let b = p0.hidden_percept().unwrap();
        // Solve A·x = −b in least squares via the SVD (A is 4×5, wide).
        let dec = svd(&p0.map.a).unwrap();
        let mut x = vec![0.0; 5];
        for r in 0..dec.s.len() {
            if dec.s[r] <= 1e-12 {
                continue;
            }
            let ur: Vec<f64> = (0..4).map(|i| dec.u[(i, r)]).collect();
            let coef = -b.iter().zip(&ur).map(|(a, b)| a * b).sum::<f64>() / dec.s[r];
            for j in 0..5 {
                x[j] += coef * dec.vt[(r, j)];
            }
        }
        let mut cols: Vec<Vec<f64>> = (0..3).map(|j| p0.dict.features().column(j)).collect();
        cols.push(x);
        let dict = Dictionary::new(
            vec!["c0".into(), "c1".into(), "c2".into(), "e".into()],
            Matrix::from_columns(&cols).unwrap(),
        )
        .unwrap();
        let p = StegoProblem { dict, ..p0 };
        let sol = solve_stego(&p, 1e-12, 500_000).unwrap();
        assert!(sol.residual_l2 < 1e-8, "residual {}", sol.residual_l2);
        assert!(sol.support.contains(&"e".to_string()));
    }

    /// Brute-force grid oracle: n=2, ν=0.1, l1, grid over [0,2]² at 1e-3.
    #[test]
    fn grid_search_oracle_two_compounds() {
        let p = make_problem(5, 2, 0.1, Regularizer::L1);
        let sol = solve_stego(&p, 1e-11, 200_000).unwrap();
        let b = p.hidden_percept().unwrap();
        let e = p.design_operator();
        let obj = |w: &[f64]| {
            let wm = Matrix::new(2, 1, w.to_vec()).unwrap();
            let bm = Matrix::new(b.len(), 1, b.clone()).unwrap();
            0.5 * bm.add(&e.matmul(&wm)).frobenius_norm().powi(2)
                + p.nu * p.regularizer.value(w)
        };
        let mut best = f64::INFINITY;
        for i in 0..=2000 {
            for j in 0..=2000 {
                let f = obj(&[i as f64 * 1e-3, j as f64 * 1e-3]);
                if f < best {
                    best = f;
                }
            }
        }
        assert!(
            sol.objective <= best + 1e-3,
            "solver {} worse than grid {best}",
            sol.objective
        );
    }

    #[test]
    fn nu_above_threshold_zeroes_w() {
        for seed in [7, 8, 9] {
            let mut p = make_problem(seed, 5, 0.0, Regularizer::L1);
            let b = p.hidden_percept().unwrap();
            let thresh = zero_solution_threshold(&p.design_operator(), &b);
            p.nu = thresh * 1.000001;
            let sol = solve_stego(&p, 1e-11, 200_000).unwrap();
            assert!(sol.weights.iter().all(|&w| w == 0.0), "seed {seed}");
            p.nu = thresh * 0.99;
            let sol = solve_stego(&p, 1e-11, 200_000).unwrap();
            assert!(sol.weights.iter().any(|&w| w > 0.0), "seed {seed}");
        }
    }

    #[test]
    fn fidelity_monotone_in_nu() {
        let mut prev = 0.0;
        for &nu in &[0.0, 0.05, 0.2, 0.5, 1.0] {
            let p = make_problem(11, 6, nu, Regularizer::L1);
            let sol = solve_stego(&p, 1e-11, 300_000).unwrap();
            assert!(sol.residual_l2 >= prev - 1e-7, "nu {nu}");
            prev = sol.residual_l2;
        }
    }

    #[test]
    fn ingredient_problem_matches_composed_dictionary() {
        for seed in [13, 14] {
            let p5 = make_problem(seed, 4, 0.1, Regularizer::L1);
            // Random non-negative 4×3 ingredient table.
            let raw = seeded_matrix(seed + 100, 4, 3);
            let w_ingr = Matrix::from_fn(4, 3, |i, j| raw[(i, j)].abs() + 0.05);
            let p6 = StegoProblem {
                ingredients: Some(IngredientTable {
                    ingredient_ids: vec!["i0".into(), "i1".into(), "i2".into()],
                    weights: w_ingr.clone(),
                }),
                ..p5.clone()
            };
            // Composed dictionary: X_dict·W_ingr as explicit compounds.
            let composed = p5.dict.features().matmul(&w_ingr);
            let p5c = StegoProblem {
                dict: Dictionary::new(
                    vec!["i0".into(), "i1".into(), "i2".into()],
                    composed,
                )
                .unwrap(),
                ..p5
            };
            let a = solve_stego(&p6, 1e-11, 300_000).unwrap();
            let c = solve_stego(&p5c, 1e-11, 300_000).unwrap();
            assert!(
                (a.objective - c.objective).abs() <= 1e-9,
                "seed {seed}: {} vs {}",
                a.objective,
                c.objective
            );
        }
    }

    #[test]
    fn cover_independence() {
        let p = make_problem(17, 5, 0.2, Regularizer::L1);
        let sol = solve_stego(&p, 1e-11, 200_000).unwrap();
        let cover_dict = Dictionary::new(
            vec!["cv1".into(), "cv2".into()],
            Matrix::from_fn(5, 2, |i, j| 0.3 + 0.1 * (i + j) as f64),
        )
        .unwrap();
        let cover_a = MixtureSpec::new(vec![("cv1".into(), 1.0)]).unwrap();
        let cover_b = MixtureSpec::new(vec![("cv2".into(), 2.0), ("cv1".into(), 0.3)]).unwrap();
        let (ra, da) = verify_hiding(&p, &sol, &cover_dict, &cover_a).unwrap();
        let (rb, db) = verify_hiding(&p, &sol, &cover_dict, &cover_b).unwrap();
        // The two routes agree, and neither depends on the cover.
        assert!((ra - da).abs() < 1e-9);
        assert!((rb - db).abs() < 1e-9);
        assert!((da - db).abs() < 1e-9);
    }

    #[test]
    fn verify_hiding_zero_additive_returns_hidden_norm() {
        let p = make_problem(19, 4, 0.1, Regularizer::L1);
        let sol = StegoSolution {
            weights: vec![0.0; 4],
            support: vec![],
            residual_l2: 0.0,
            objective: 0.0,
            kkt_residual: 0.0,
            iterations: 0,
        };
        let cover_dict = p.hidden_dict.clone();
        let cover = MixtureSpec::new(vec![("h2".into(), 1.0)]).unwrap();
        let (r, d) = verify_hiding(&p, &sol, &cover_dict, &cover).unwrap();
        let b = p.hidden_percept().unwrap();
        assert!((r - norm2(&b)).abs() < 1e-12);
        assert!((r - d).abs() < 1e-9);
    }

    #[test]
    fn l2sq_and_none_regularizers_solve() {
        for reg in [Regularizer::L2Sq, Regularizer::None] {
            let p = make_problem(23, 5, 0.3, reg);
            let sol = solve_stego(&p, 1e-10, 300_000).unwrap();
            assert!(sol.weights.iter().all(|&w| w >= 0.0));
            assert!(sol.kkt_residual <= 1e-10);
            // Recompute the objective from the parts.
            let b = p.hidden_percept().unwrap();
            let e = p.design_operator();
            let wm = Matrix::new(5, 1, sol.weights.clone()).unwrap();
            let bm = Matrix::new(b.len(), 1, b).unwrap();
            let f = 0.5 * bm.add(&e.matmul(&wm)).frobenius_norm().powi(2)
                + p.nu * reg.value(&sol.weights);
            assert!((f - sol.objective).abs() < 1e-9);
        }
    }

    #[test]
    fn solution_json_roundtrip() {
        let p = make_problem(29, 4, 0.15, Regularizer::L1);
        let sol = solve_stego(&p, 1e-10, 200_000).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stego-solution.json");
        save_stego_solution(&path, &p, &sol, None).unwrap();
        let doc: StegoSolutionJson =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(doc.regularizer, Regularizer::L1);
        assert!((doc.residual_l2 - sol.residual_l2).abs() < 1e-15);
        for (id, w) in &doc.weights {
            let i = p.dict.index_of(id).unwrap();
            assert_eq!(*w, sol.weights[i]);
        }
    }
}
