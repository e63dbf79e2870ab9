//! Integration tests for the `olfact` binary: exit-code semantics,
//! artifact schema reload, rerun determinism, and the identity-ingredient
//! reduction.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn olfact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_olfact"))
        .args(args)
        .output()
        .expect("spawn olfact")
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Generate a small corpus and fit a map in `dir`; returns key paths.
fn fixture(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let data = dir.join("data");
    let out = olfact(&[
        "synth-data", "--seed", "5", "--k", "6", "--l", "5",
        "--n-train", "30", "--n-dict", "8", "--rank", "2", "--noise", "0.3",
        "--out-dir", &path_str(&data),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let map = dir.join("map.json");
    let cv = dir.join("cv.json");
    let out = olfact(&[
        "fit-map",
        "--features", &path_str(&data.join("compounds.csv")),
        "--percepts", &path_str(&data.join("percepts.csv")),
        "--lambda-grid", "0.1,1,10", "--folds", "3", "--seed", "5",
        "--out-map", &path_str(&map), "--out-cv", &path_str(&cv),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (data, map, cv)
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (data, map, _cv) = fixture(dir.path());

    // Input error: missing file.
    let out = olfact(&[
        "predict", "--map", &path_str(&map),
        "--dict", &path_str(&data.join("dict.csv")),
        "--mixture", &path_str(&dir.path().join("missing.csv")),
        "--out", &path_str(&dir.path().join("p.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Input error: empty percepts file (header only).
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "id,d1,d2,d3,d4,d5\n").unwrap();
    let out = olfact(&[
        "fit-map",
        "--features", &path_str(&data.join("compounds.csv")),
        "--percepts", &path_str(&empty),
        "--lambda-grid", "0.1,1", "--folds", "3", "--seed", "5",
        "--out-map", &path_str(&dir.path().join("m.json")),
        "--out-cv", &path_str(&dir.path().join("c.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Config error: malformed lambda grid.
    let out = olfact(&[
        "fit-map",
        "--features", &path_str(&data.join("compounds.csv")),
        "--percepts", &path_str(&data.join("percepts.csv")),
        "--lambda-grid", "10:1:log4", "--folds", "3", "--seed", "5",
        "--out-map", &path_str(&dir.path().join("m.json")),
        "--out-cv", &path_str(&dir.path().join("c.json")),
    ]);
    assert_eq!(out.status.code(), Some(4));

    // Non-convergence: an iteration cap of 1 with an unreachable tolerance.
    let out = olfact(&[
        "fit-map",
        "--features", &path_str(&data.join("compounds.csv")),
        "--percepts", &path_str(&data.join("percepts.csv")),
        "--lambda-grid", "0.1,1", "--folds", "3", "--seed", "5",
        "--tol", "1e-300", "--max-iter", "1",
        "--out-map", &path_str(&dir.path().join("m.json")),
        "--out-cv", &path_str(&dir.path().join("c.json")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn artifacts_reload_and_rerun_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (data, map, cv) = fixture(dir.path());

    // Schema reload through the library loaders.
    let loaded = olfact_core::perceptmap::load_map(&map).unwrap();
    assert_eq!(loaded.input_dim(), 6);
    assert_eq!(loaded.output_dim(), 5);
    let cv_doc: olfact_core::perceptmap::CvJson =
        serde_json::from_str(&std::fs::read_to_string(&cv).unwrap()).unwrap();
    assert_eq!(cv_doc.lambda_grid, vec![0.1, 1.0, 10.0]);
    let min = cv_doc
        .mean_rmse
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let best_idx = cv_doc
        .lambda_grid
        .iter()
        .position(|&l| l == cv_doc.best_lambda)
        .unwrap();
    assert_eq!(cv_doc.mean_rmse[best_idx], min);

    // Rerunning fit-map with the same inputs is byte-identical.
    let map2 = dir.path().join("map2.json");
    let cv2 = dir.path().join("cv2.json");
    let out = olfact(&[
        "fit-map",
        "--features", &path_str(&data.join("compounds.csv")),
        "--percepts", &path_str(&data.join("percepts.csv")),
        "--lambda-grid", "0.1,1,10", "--folds", "3", "--seed", "5",
        "--out-map", &path_str(&map2), "--out-cv", &path_str(&cv2),
    ]);
    assert!(out.status.success());
    assert_eq!(std::fs::read(&map).unwrap(), std::fs::read(&map2).unwrap());
    assert_eq!(std::fs::read(&cv).unwrap(), std::fs::read(&cv2).unwrap());
}

#[test]
fn identity_ingredients_match_plain_stego() {
    let dir = tempfile::tempdir().unwrap();
    let (data, map, _cv) = fixture(dir.path());

    let hidden = dir.path().join("hidden.csv");
    std::fs::write(&hidden, "id,weight\ndict-0002,1.0\ndict-0005,0.7\n").unwrap();

    // Identity ingredient table: one ingredient per dictionary compound.
    let ingredients = dir.path().join("ingredients.csv");
    let mut table = String::from("ingredient_id,compound_id,concentration\n");
    for j in 1..=8 {
        table.push_str(&format!("ing-{j},dict-{j:04},1.0\n"));
    }
    std::fs::write(&ingredients, table).unwrap();

    let sol_plain = dir.path().join("plain.json");
    let out = olfact(&[
        "design-stego", "--map", &path_str(&map),
        "--dict", &path_str(&data.join("dict.csv")),
        "--hidden", &path_str(&hidden), "--nu", "0.05", "--reg", "l1",
        "--out", &path_str(&sol_plain),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let sol_ingr = dir.path().join("ingr.json");
    let out = olfact(&[
        "design-stego", "--map", &path_str(&map),
        "--dict", &path_str(&data.join("dict.csv")),
        "--hidden", &path_str(&hidden),
        "--ingredients", &path_str(&ingredients),
        "--nu", "0.05", "--reg", "l1",
        "--out", &path_str(&sol_ingr),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let a: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&sol_plain).unwrap()).unwrap();
    let b: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&sol_ingr).unwrap()).unwrap();
    assert!(
        (a["residual_l2"].as_f64().unwrap() - b["residual_l2"].as_f64().unwrap()).abs() < 1e-9
    );
    assert!(
        (a["objective"].as_f64().unwrap() - b["objective"].as_f64().unwrap()).abs() < 1e-9
    );
    // Per-variable weights agree after mapping compound ids to their
    // identity ingredients.
    let wa = a["weights"].as_object().unwrap();
    let wb = b["weights"].as_object().unwrap();
    assert_eq!(wa.len(), wb.len());
    for (cid, va) in wa {
        let j: usize = cid.trim_start_matches("dict-").parse().unwrap();
        let vb = wb
            .get(&format!("ing-{j}"))
            .unwrap_or_else(|| panic!("missing ing-{j}"))
            .as_f64()
            .unwrap();
        assert!((va.as_f64().unwrap() - vb).abs() < 1e-9);
    }
}

#[test]
fn predict_emits_one_row_per_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let (data, map, _cv) = fixture(dir.path());
    let mixture = dir.path().join("mix.csv");
    std::fs::write(&mixture, "id,weight\ndict-0001,1.0\n").unwrap();
    let out_path = dir.path().join("percept.csv");
    let out = olfact(&[
        "predict", "--map", &path_str(&map),
        "--dict", &path_str(&data.join("dict.csv")),
        "--mixture", &path_str(&mixture),
        "--out", &path_str(&out_path),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "dim,score");
    assert_eq!(lines.len(), 6); // header + 5 perceptual dimensions
}
