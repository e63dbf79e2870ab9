//! Data model for compounds, percepts, dictionaries, ingredient tables,
//! and mixtures, with CSV ingestion/persistence and seeded synthetic-data
//! generation.

pub mod csvio;
pub mod synth;

use crate::error::{Error, Result};
use crate::numerics::matrix::{norm2, Matrix};

pub use csvio::{
    load_compounds, load_ingredients, load_mixture, load_percepts, save_compounds, save_mixture,
    save_percepts,
};
pub use synth::{generate_synthetic, SyntheticConfig, SyntheticData};

/// One compound: CAS-registry-style id, display name, and a length-k
/// physicochemical feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CompoundRecord {
    pub id: String,
    pub name: String,
    pub features: Vec<f64>,
}

/// Odor-descriptor scores for one compound, on the percentage-of-
/// applicability scale [0, 100].
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptRecord {
    pub id: String,
    pub scores: Vec<f64>,
}

/// A compound dictionary: feature matrix with one column per compound,
/// column order matching `ids`.
#[derive(Debug, Clone)]
pub struct Dictionary {
    ids: Vec<String>,
    features: Matrix,
}

impl Dictionary {
    pub fn new(ids: Vec<String>, features: Matrix) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::InvalidConfig("dictionary must be non-empty".into()));
        }
        if ids.len() != features.cols() {
            return Err(Error::dim("Dictionary::new", ids.len(), features.cols()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in &ids {
            if !seen.insert(id) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(Dictionary { ids, features })
    }

    pub fn from_compounds(records: &[CompoundRecord]) -> Result<Self> {
        let cols: Vec<Vec<f64>> = records.iter().map(|r| r.features.clone()).collect();
        Dictionary::new(
            records.iter().map(|r| r.id.clone()).collect(),
            Matrix::from_columns(&cols)?,
        )
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Feature matrix, k×n (one column per compound).
    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Feature dimension k.
    pub fn feature_dim(&self) -> usize {
        self.features.rows()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }
}

/// Ingredient concentration table: compound-by-ingredient weights with
/// unit-ℓ2 columns, compound axis in dictionary order.
#[derive(Debug, Clone)]
pub struct IngredientTable {
    pub ingredient_ids: Vec<String>,
    /// n × n' matrix; rows follow the ambient dictionary's compound order.
    pub weights: Matrix,
}

/// Non-negative weights over named compounds.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    entries: Vec<(String, f64)>,
}

impl MixtureSpec {
    pub fn new(entries: Vec<(String, f64)>) -> Result<Self> {
        if entries.iter().any(|(_, w)| !w.is_finite()) {
            return Err(Error::NonFinite);
        }
        if entries.iter().any(|(_, w)| *w < 0.0) {
            return Err(Error::InvalidConfig("mixture weights must be >= 0".into()));
        }
        if !entries.iter().any(|(_, w)| *w > 0.0) {
            return Err(Error::InvalidConfig(
                "mixture needs at least one positive weight".into(),
            ));
        }
        Ok(MixtureSpec { entries })
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    /// Dense weight vector over `dict`, in dictionary order.
    pub fn to_weights(&self, dict: &Dictionary) -> Result<Vec<f64>> {
        let mut w = vec![0.0; dict.len()];
        for (id, weight) in &self.entries {
            let idx = dict
                .index_of(id)
                .ok_or_else(|| Error::UnknownCompound(id.clone()))?;
            w[idx] += weight;
        }
        Ok(w)
    }
}

/// Physicochemical vector of a mixture: `X·w`, with `w` rescaled to unit
/// ℓ2 norm first when `normalize` is set.
pub fn mix(dict: &Dictionary, spec: &MixtureSpec, normalize: bool) -> Result<Vec<f64>> {
    let mut w = spec.to_weights(dict)?;
    if normalize {
        let n = norm2(&w);
        // MixtureSpec guarantees at least one positive weight.
        for x in w.iter_mut() {
            *x /= n;
        }
    }
    Ok(dict.features().matvec(&w))
}
