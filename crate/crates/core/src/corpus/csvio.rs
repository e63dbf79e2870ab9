//! CSV ingestion and persistence.
//!
//! All parsers reject rows with the wrong arity and report 1-based row and
//! column numbers in errors. Reals are written with Rust's shortest
//! round-trip float formatting, so load → save → load is lossless.

use std::path::Path;

use crate::corpus::{CompoundRecord, Dictionary, IngredientTable, MixtureSpec, PerceptRecord};
use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;

fn parse_err(path: &Path, row: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        row,
        col,
        msg: msg.into(),
    }
}

fn parse_real(path: &Path, row: usize, col: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, row, col, format!("expected a real number, got `{field}`")))?;
    if !v.is_finite() {
        return Err(parse_err(path, row, col, "non-finite value"));
    }
    Ok(v)
}

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<(usize, Vec<String>)>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| parse_err(path, 1, 1, e.to_string()))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, i + 2, 1, e.to_string()))?;
        rows.push((i + 2, rec.iter().map(str::to_string).collect()));
    }
    Ok((header, rows))
}

fn check_arity(path: &Path, row: usize, fields: &[String], expected: usize) -> Result<()> {
    if fields.len() != expected {
        return Err(parse_err(
            path,
            row,
            fields.len().min(expected) + 1,
            format!("expected {expected} fields, got {}", fields.len()),
        ));
    }
    Ok(())
}

/// Load `compounds.csv` (header `id,name,f1,...,fk`).
pub fn load_compounds(path: impl AsRef<Path>) -> Result<Vec<CompoundRecord>> {
    let path = path.as_ref();
    let (header, rows) = read_rows(path)?;
    if header.len() < 3 || header[0] != "id" || header[1] != "name" {
        return Err(parse_err(path, 1, 1, "expected header `id,name,f1,...,fk`"));
    }
    let k = header.len() - 2;
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (row, fields) in rows {
        check_arity(path, row, &fields, k + 2)?;
        let id = fields[0].clone();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let mut features = Vec::with_capacity(k);
        for (j, field) in fields[2..].iter().enumerate() {
            features.push(parse_real(path, row, j + 3, field)?);
        }
        out.push(CompoundRecord {
            id,
            name: fields[1].clone(),
            features,
        });
    }
    Ok(out)
}

/// Load `percepts.csv` (header `id,d1,...,dl`). Scores must lie in
/// [0, 100].
pub fn load_percepts(path: impl AsRef<Path>) -> Result<Vec<PerceptRecord>> {
    let path = path.as_ref();
    let (header, rows) = read_rows(path)?;
    if header.len() < 2 || header[0] != "id" {
        return Err(parse_err(path, 1, 1, "expected header `id,d1,...,dl`"));
    }
    let l = header.len() - 1;
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (row, fields) in rows {
        check_arity(path, row, &fields, l + 1)?;
        let id = fields[0].clone();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let mut scores = Vec::with_capacity(l);
        for (j, field) in fields[1..].iter().enumerate() {
            let v = parse_real(path, row, j + 2, field)?;
            if !(0.0..=100.0).contains(&v) {
                return Err(parse_err(
                    path,
                    row,
                    j + 2,
                    format!("score {v} outside [0, 100]"),
                ));
            }
            scores.push(v);
        }
        out.push(PerceptRecord { id, scores });
    }
    Ok(out)
}

/// Load `mixture.csv` (header `id,weight`).
pub fn load_mixture(path: impl AsRef<Path>) -> Result<MixtureSpec> {
    let path = path.as_ref();
    let (header, rows) = read_rows(path)?;
    if header != ["id", "weight"] {
        return Err(parse_err(path, 1, 1, "expected header `id,weight`"));
    }
    let mut entries = Vec::with_capacity(rows.len());
    for (row, fields) in rows {
        check_arity(path, row, &fields, 2)?;
        let w = parse_real(path, row, 2, &fields[1])?;
        if w < 0.0 {
            return Err(parse_err(path, row, 2, format!("negative weight {w}")));
        }
        entries.push((fields[0].clone(), w));
    }
    MixtureSpec::new(entries)
}

/// Concentration field syntax for ingredient files: a plain real, a
/// `lo..hi` range (taken at its midpoint), or the literal `trace`
/// (10⁻⁶ ppm).
fn parse_concentration(path: &Path, row: usize, col: usize, field: &str) -> Result<f64> {
    let field = field.trim();
    if field == "trace" {
        return Ok(1e-6);
    }
    if let Some((lo, hi)) = field.split_once("..") {
        let lo = parse_real(path, row, col, lo)?;
        let hi = parse_real(path, row, col, hi)?;
        return Ok(0.5 * (lo + hi));
    }
    parse_real(path, row, col, field)
}

/// Load `ingredients.csv` (long form, header
/// `ingredient_id,compound_id,concentration`) against a dictionary whose
/// compound order fixes the row axis. Each ingredient column is rescaled
/// to unit ℓ2 norm.
pub fn load_ingredients(path: impl AsRef<Path>, dict: &Dictionary) -> Result<IngredientTable> {
    let path = path.as_ref();
    let (header, rows) = read_rows(path)?;
    if header != ["ingredient_id", "compound_id", "concentration"] {
        return Err(parse_err(
            path,
            1,
            1,
            "expected header `ingredient_id,compound_id,concentration`",
        ));
    }
    let mut ingredient_ids: Vec<String> = Vec::new();
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for (row, fields) in rows {
        check_arity(path, row, &fields, 3)?;
        let ing = &fields[0];
        let compound_idx = dict
            .index_of(&fields[1])
            .ok_or_else(|| Error::UnknownCompound(fields[1].clone()))?;
        let conc = parse_concentration(path, row, 3, &fields[2])?;
        if conc < 0.0 {
            return Err(parse_err(path, row, 3, format!("negative concentration {conc}")));
        }
        let ing_idx = match ingredient_ids.iter().position(|x| x == ing) {
            Some(i) => i,
            None => {
                ingredient_ids.push(ing.clone());
                ingredient_ids.len() - 1
            }
        };
        entries.push((compound_idx, ing_idx, conc));
    }
    if ingredient_ids.is_empty() {
        return Err(parse_err(path, 1, 1, "no ingredient rows"));
    }

    let mut weights = Matrix::zeros(dict.len(), ingredient_ids.len());
    for (ci, ii, conc) in entries {
        weights[(ci, ii)] += conc;
    }
    // Normalize each ingredient column to unit ℓ2.
    let norms = weights.column_norms();
    for (j, nrm) in norms.iter().enumerate() {
        if *nrm == 0.0 {
            return Err(Error::DegenerateData(format!(
                "ingredient `{}` has all-zero concentrations",
                ingredient_ids[j]
            )));
        }
        for i in 0..weights.rows() {
            weights[(i, j)] /= nrm;
        }
    }
    Ok(IngredientTable {
        ingredient_ids,
        weights,
    })
}

fn write_csv(path: &Path, header: &[String], rows: Vec<Vec<String>>) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    wtr.write_record(header)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for row in rows {
        wtr.write_record(&row)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_compounds(path: impl AsRef<Path>, records: &[CompoundRecord]) -> Result<()> {
    let k = records.first().map_or(0, |r| r.features.len());
    let mut header = vec!["id".to_string(), "name".to_string()];
    header.extend((1..=k).map(|i| format!("f{i}")));
    let rows = records
        .iter()
        .map(|r| {
            let mut row = vec![r.id.clone(), r.name.clone()];
            row.extend(r.features.iter().map(|v| v.to_string()));
            row
        })
        .collect();
    write_csv(path.as_ref(), &header, rows)
}

pub fn save_percepts(path: impl AsRef<Path>, records: &[PerceptRecord]) -> Result<()> {
    let l = records.first().map_or(0, |r| r.scores.len());
    let mut header = vec!["id".to_string()];
    header.extend((1..=l).map(|i| format!("d{i}")));
    let rows = records
        .iter()
        .map(|r| {
            let mut row = vec![r.id.clone()];
            row.extend(r.scores.iter().map(|v| v.to_string()));
            row
        })
        .collect();
    write_csv(path.as_ref(), &header, rows)
}

pub fn save_mixture(path: impl AsRef<Path>, spec: &MixtureSpec) -> Result<()> {
    let header = vec!["id".to_string(), "weight".to_string()];
    let rows = spec
        .entries()
        .iter()
        .map(|(id, w)| vec![id.clone(), w.to_string()])
        .collect();
    write_csv(path.as_ref(), &header, rows)
}
