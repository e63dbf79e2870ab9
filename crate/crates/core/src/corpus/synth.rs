//! Seeded synthetic corpus generation.
//!
//! Percept scores are `clip(A₀·X + noise, 0, 100)` for a ground-truth map
//! `A₀` of prescribed rank. Feature and factor entries are positive and
//! scaled so that the pre-clip scores sit well inside the [0, 100]
//! percentage-of-applicability scale, keeping clipping rare.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{CompoundRecord, Dictionary, PerceptRecord};
use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub k: usize,
    pub l: usize,
    pub n_train: usize,
    pub n_dict: usize,
    pub true_rank: usize,
    pub noise_sigma: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub compounds: Vec<CompoundRecord>,
    pub percepts: Vec<PerceptRecord>,
    pub dictionary: Dictionary,
    /// The l×k map A₀ used to generate percepts (rank = `true_rank`).
    pub ground_truth_map: Matrix,
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    if cfg.k == 0 || cfg.l == 0 || cfg.n_train == 0 || cfg.n_dict == 0 || cfg.true_rank == 0 {
        return Err(Error::InvalidConfig("all counts must be >= 1".into()));
    }
    if cfg.true_rank > cfg.k.min(cfg.l) {
        return Err(Error::InvalidConfig(format!(
            "true_rank {} exceeds min(k, l) = {}",
            cfg.true_rank,
            cfg.k.min(cfg.l)
        )));
    }
    if !(cfg.noise_sigma >= 0.0 && cfg.noise_sigma.is_finite()) {
        return Err(Error::InvalidConfig("noise_sigma must be >= 0".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let r = cfg.true_rank;

    // A₀ = B·C with positive factors; gamma targets a pre-clip score mean
    // around 20 (mean of B, C, X entries is gamma/2, gamma/2, 1/2), which
    // keeps even tail values clear of the [0, 100] clip bounds.
    let gamma = (160.0 / (r * cfg.k) as f64).sqrt();
    let b = Matrix::from_fn(cfg.l, r, |_, _| rng.gen_range(0.0..gamma));
    let c = Matrix::from_fn(r, cfg.k, |_, _| rng.gen_range(0.0..gamma));
    let a0 = b.matmul(&c);

    let x = Matrix::from_fn(cfg.k, cfg.n_train, |_, _| rng.gen_range(0.0..1.0));
    let clean = a0.matmul(&x);

    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut y = clean.clone();
    if cfg.noise_sigma > 0.0 {
        for i in 0..y.rows() {
            for j in 0..y.cols() {
                y[(i, j)] += cfg.noise_sigma * noise.sample(&mut rng);
            }
        }
    }
    for i in 0..y.rows() {
        for j in 0..y.cols() {
            y[(i, j)] = y[(i, j)].clamp(0.0, 100.0);
        }
    }

    let width = cfg.n_train.max(cfg.n_dict).to_string().len().max(4);
    let compounds: Vec<CompoundRecord> = (0..cfg.n_train)
        .map(|j| CompoundRecord {
            id: format!("syn-{:0width$}", j + 1),
            name: format!("synthetic compound {}", j + 1),
            features: x.column(j),
        })
        .collect();
    let percepts: Vec<PerceptRecord> = (0..cfg.n_train)
        .map(|j| PerceptRecord {
            id: compounds[j].id.clone(),
            scores: y.column(j),
        })
        .collect();

    let dict_features = Matrix::from_fn(cfg.k, cfg.n_dict, |_, _| rng.gen_range(0.0..1.0));
    let dictionary = Dictionary::new(
        (0..cfg.n_dict)
            .map(|j| format!("dict-{:0width$}", j + 1))
            .collect(),
        dict_features,
    )?;

    Ok(SyntheticData {
        compounds,
        percepts,
        dictionary,
        ground_truth_map: a0,
    })
}

/// Feature matrix X (k×n) and percept matrix Y (l×n) of a generated
/// corpus, in record order.
pub fn to_matrices(data: &SyntheticData) -> (Matrix, Matrix) {
    let xs: Vec<Vec<f64>> = data.compounds.iter().map(|c| c.features.clone()).collect();
    let ys: Vec<Vec<f64>> = data.percepts.iter().map(|p| p.scores.clone()).collect();
    (
        Matrix::from_columns(&xs).expect("consistent k"),
        Matrix::from_columns(&ys).expect("consistent l"),
    )
}
