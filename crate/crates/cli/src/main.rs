//! Command-line pipelines for olfactory signal processing: fit a
//! perceptual map, predict mixture percepts, design cancellation /
//! hiding / filtering mixtures, run adaptive cancellation, and generate
//! seeded synthetic corpora.
//!
//! Exit codes: 0 success, 2 input error, 3 solver non-convergence,
//! 4 configuration error. All randomness flows from explicit `--seed`
//! flags; outputs are byte-identical across reruns of the same command.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use olfact_core::cancellation::{save_solution, solve_cancellation, CancellationProblem};
use olfact_core::corpus::{
    self, csvio, generate_synthetic, Dictionary, SyntheticConfig,
};
use olfact_core::filtering::{
    load_scenario, run_adaptive, save_run_csv, solve_filter, FilterProblem,
};
use olfact_core::numerics::matrix::Matrix;
use olfact_core::numerics::pca::pca;
use olfact_core::perceptmap::{
    cross_validate, fit, load_map, predict_mixture, save_cv, save_map, FitOptions,
};
use olfact_core::steganography::{
    save_stego_solution, solve_stego, Regularizer, StegoProblem,
};
use olfact_core::{Error, Result};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "olfact", version, about = "Olfactory signal processing pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the physicochemical → perceptual map with cross-validation.
    FitMap(FitMapArgs),
    /// Predict the percept of a compound mixture.
    Predict(PredictArgs),
    /// Design a sparse non-negative cancellation mixture for malodors.
    DesignCancel(DesignCancelArgs),
    /// Design an additive that hides a food's percept.
    DesignStego(DesignStegoArgs),
    /// Design a mixture steering an input odor toward a target percept.
    DesignFilter(DesignFilterArgs),
    /// Run the adaptive cancellation filter over a scenario.
    Adapt(AdaptArgs),
    /// Generate a seeded synthetic corpus.
    SynthData(SynthDataArgs),
}

#[derive(Args)]
struct FitMapArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    percepts: PathBuf,
    /// Either `start:end:logN` (N log-spaced points) or a comma list.
    #[arg(long)]
    lambda_grid: String,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_map: PathBuf,
    #[arg(long)]
    out_cv: PathBuf,
    #[arg(long)]
    standardize: bool,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 50_000)]
    max_iter: usize,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    #[arg(long)]
    mixture: PathBuf,
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DesignCancelArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    /// Malodor mixture CSV; repeat for several malodors.
    #[arg(long, required = true)]
    malodor: Vec<PathBuf>,
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    white_family: bool,
    /// Normalize malodor mixture weights to unit ℓ2 norm before mixing.
    #[arg(long)]
    normalize: bool,
    /// Write 2-D PCA coordinates of dictionary/malodor/selected percepts.
    #[arg(long)]
    pca: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 200_000)]
    max_iter: usize,
}

#[derive(Args)]
struct DesignStegoArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    /// Hidden-food mixture over the dictionary compounds.
    #[arg(long)]
    hidden: PathBuf,
    /// Ingredient table CSV; switches the design variable to ingredients.
    #[arg(long)]
    ingredients: Option<PathBuf>,
    #[arg(long)]
    nu: f64,
    #[arg(long, default_value = "l1")]
    reg: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 200_000)]
    max_iter: usize,
}

#[derive(Args)]
struct DesignFilterArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    /// Input odor as a mixture over the dictionary compounds.
    #[arg(long)]
    input_mixture: PathBuf,
    /// Target percept CSV in `id,d1..dl` format (first row is used).
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    mu: f64,
    #[arg(long, default_value = "l1")]
    reg: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 200_000)]
    max_iter: usize,
}

#[derive(Args)]
struct AdaptArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    eta: f64,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    /// Initial weights: `uniform` (1/n each), a single value, or a comma
    /// list of n values. All entries must be strictly positive.
    #[arg(long, default_value = "uniform")]
    w0: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthDataArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 18)]
    k: usize,
    #[arg(long, default_value_t = 20)]
    l: usize,
    #[arg(long, default_value_t = 60)]
    n_train: usize,
    #[arg(long, default_value_t = 200)]
    n_dict: usize,
    #[arg(long, default_value_t = 3)]
    rank: usize,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::NoConvergence { .. } => 3,
                Error::InvalidConfig(_) => 4,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::FitMap(a) => cmd_fit_map(a),
        Command::Predict(a) => cmd_predict(a),
        Command::DesignCancel(a) => cmd_design_cancel(a),
        Command::DesignStego(a) => cmd_design_stego(a),
        Command::DesignFilter(a) => cmd_design_filter(a),
        Command::Adapt(a) => cmd_adapt(a),
        Command::SynthData(a) => cmd_synth_data(a),
    }
}

/// Parse `start:end:logN` into N log-spaced points, or a comma list.
fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |msg: String| Error::InvalidConfig(format!("lambda grid '{text}': {msg}"));
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:end:logN".into()));
        }
        let start: f64 = parts[0].parse().map_err(|e| bad(format!("{e}")))?;
        let end: f64 = parts[1].parse().map_err(|e| bad(format!("{e}")))?;
        let n: usize = parts[2]
            .strip_prefix("log")
            .ok_or_else(|| bad("third field must be logN".into()))?
            .parse()
            .map_err(|e| bad(format!("{e}")))?;
        if !(start > 0.0 && end > start) || n < 2 {
            return Err(bad("need 0 < start < end and N >= 2".into()));
        }
        let (ls, le) = (start.ln(), end.ln());
        Ok((0..n)
            .map(|i| (ls + (le - ls) * i as f64 / (n - 1) as f64).exp())
            .collect())
    } else {
        text.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| bad(format!("{e}"))))
            .collect()
    }
}

fn cmd_fit_map(a: FitMapArgs) -> Result<()> {
    let grid = parse_grid(&a.lambda_grid)?;
    let compounds = csvio::load_compounds(&a.features)?;
    let percepts = csvio::load_percepts(&a.percepts)?;
    if compounds.is_empty() {
        return Err(Error::DegenerateData("no compounds in features file".into()));
    }
    if percepts.is_empty() {
        return Err(Error::DegenerateData("no rows in percepts file".into()));
    }

    // Align percepts to compounds by id.
    let by_id: BTreeMap<&str, &Vec<f64>> = percepts
        .iter()
        .map(|p| (p.id.as_str(), &p.scores))
        .collect();
    let mut xs = Vec::with_capacity(compounds.len());
    let mut ys = Vec::with_capacity(compounds.len());
    for c in &compounds {
        let scores = by_id
            .get(c.id.as_str())
            .ok_or_else(|| Error::UnknownCompound(c.id.clone()))?;
        xs.push(c.features.clone());
        ys.push((*scores).clone());
    }
    let x = Matrix::from_columns(&xs)?;
    let y = Matrix::from_columns(&ys)?;

    let opts = FitOptions {
        tol: a.tol,
        max_iter: a.max_iter,
        standardize: a.standardize,
    };
    let report = cross_validate(&x, &y, &grid, a.folds, a.seed, &opts)?;
    let map = fit(&x, &y, report.best_lambda, &opts)?;

    let config = json!({
        "command": "fit-map",
        "version": VERSION,
        "seed": a.seed,
        "lambda_grid": a.lambda_grid,
        "folds": a.folds,
        "standardize": a.standardize,
        "tol": a.tol,
        "max_iter": a.max_iter,
    });
    save_map(&a.out_map, &map, Some(config.clone()))?;
    save_cv(&a.out_cv, &report, Some(config))?;
    println!(
        "fit-map: best lambda {:.6e}, train RMSE {:.6}, rank {}",
        report.best_lambda,
        map.train_rmse,
        map.fitted_rank()
    );
    Ok(())
}

fn load_dictionary(path: &PathBuf) -> Result<Dictionary> {
    let compounds = csvio::load_compounds(path)?;
    Dictionary::from_compounds(&compounds)
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let map = load_map(&a.map)?;
    let dict = load_dictionary(&a.dict)?;
    let spec = csvio::load_mixture(&a.mixture)?;
    let percept = predict_mixture(&map, &dict, &spec, a.normalize)?;

    let mut wtr = csv::Writer::from_path(&a.out)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    wtr.write_record(["dim", "score"])
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for (i, v) in percept.iter().enumerate() {
        wtr.write_record([format!("d{}", i + 1), v.to_string()])
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    wtr.flush()?;
    Ok(())
}

fn cmd_design_cancel(a: DesignCancelArgs) -> Result<()> {
    let map = load_map(&a.map)?;
    let dict = load_dictionary(&a.dict)?;
    if a.malodor.is_empty() {
        return Err(Error::InvalidConfig("at least one --malodor required".into()));
    }
    let mut cols = Vec::with_capacity(a.malodor.len());
    let mut malodor_names = Vec::new();
    for path in &a.malodor {
        let spec = csvio::load_mixture(path)?;
        cols.push(predict_mixture(&map, &dict, &spec, a.normalize)?);
        malodor_names.push(
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
        );
    }
    let y_mal = Matrix::from_columns(&cols)?;

    let problem = CancellationProblem {
        y_mal,
        dict,
        map,
        mu: a.mu,
        white_family: a.white_family,
    };
    let sol = solve_cancellation(&problem, a.tol, a.max_iter)?;

    let config = json!({
        "command": "design-cancel",
        "version": VERSION,
        "mu": a.mu,
        "white_family": a.white_family,
        "normalize": a.normalize,
        "malodors": malodor_names,
        "tol": a.tol,
        "max_iter": a.max_iter,
    });
    save_solution(&a.out, &problem, &sol, Some(config))?;

    if let Some(pca_path) = &a.pca {
        write_cancel_pca(pca_path, &problem, &sol, &malodor_names)?;
    }
    println!(
        "design-cancel: residual {:.6}, support size {}",
        sol.residual_frobenius,
        sol.support.len()
    );
    Ok(())
}

/// 2-D PCA of dictionary-compound percepts plus the malodor percepts;
/// support compounds are re-emitted with kind `selected`.
fn write_cancel_pca(
    path: &PathBuf,
    p: &CancellationProblem,
    sol: &olfact_core::cancellation::CancellationSolution,
    malodor_names: &[String],
) -> Result<()> {
    let d = p.design_matrix(); // l × n percepts of dictionary compounds
    let n = p.dict.len();
    let m = p.y_mal.cols();
    let mut points = Vec::with_capacity(n + m);
    for j in 0..n {
        points.push(d.column(j));
    }
    for j in 0..m {
        points.push(p.y_mal.column(j));
    }
    let result = pca(&Matrix::from_columns(&points)?.transpose(), 2)?;

    let mut wtr = csv::Writer::from_path(path)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    wtr.write_record(["kind", "id", "pc1", "pc2"])
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let mut write_row = |kind: &str, id: &str, i: usize| -> Result<()> {
        wtr.write_record([
            kind.to_string(),
            id.to_string(),
            result.coords[(i, 0)].to_string(),
            result.coords[(i, 1)].to_string(),
        ])
        .map_err(|e| Error::Io(std::io::Error::other(e)))
    };
    for (j, id) in p.dict.ids().iter().enumerate() {
        write_row("dict", id, j)?;
    }
    for (j, name) in malodor_names.iter().enumerate() {
        write_row("malodor", name, n + j)?;
    }
    for id in &sol.support {
        let j = p.dict.index_of(id).expect("support id in dictionary");
        write_row("selected", id, j)?;
    }
    Ok(())
}

fn cmd_design_stego(a: DesignStegoArgs) -> Result<()> {
    let map = load_map(&a.map)?;
    let dict = load_dictionary(&a.dict)?;
    let hidden = csvio::load_mixture(&a.hidden)?;
    let ingredients = match &a.ingredients {
        Some(path) => Some(csvio::load_ingredients(path, &dict)?),
        None => None,
    };
    let regularizer: Regularizer = a.reg.parse()?;

    let problem = StegoProblem {
        hidden_dict: dict.clone(),
        hidden,
        dict,
        ingredients,
        map,
        nu: a.nu,
        regularizer,
    };
    let sol = solve_stego(&problem, a.tol, a.max_iter)?;

    let config = json!({
        "command": "design-stego",
        "version": VERSION,
        "nu": a.nu,
        "reg": a.reg,
        "ingredients": a.ingredients.is_some(),
        "tol": a.tol,
        "max_iter": a.max_iter,
    });
    save_stego_solution(&a.out, &problem, &sol, Some(config))?;
    println!(
        "design-stego: residual {:.6}, support size {}",
        sol.residual_l2,
        sol.support.len()
    );
    Ok(())
}

fn cmd_design_filter(a: DesignFilterArgs) -> Result<()> {
    let map = load_map(&a.map)?;
    let dict = load_dictionary(&a.dict)?;
    let input = csvio::load_mixture(&a.input_mixture)?;
    let x_in = corpus::mix(&dict, &input, false)?;
    let targets = csvio::load_percepts(&a.target)?;
    let y_des = targets
        .first()
        .ok_or_else(|| Error::DegenerateData("no rows in target file".into()))?
        .scores
        .clone();
    let regularizer: Regularizer = a.reg.parse()?;

    let problem = FilterProblem {
        x_in,
        y_des,
        dict,
        map,
        mu: a.mu,
        regularizer,
    };
    let sol = solve_filter(&problem, a.tol, a.max_iter)?;

    // The filter solution shares the stego artifact schema.
    let config = json!({
        "command": "design-filter",
        "version": VERSION,
        "mu": a.mu,
        "reg": a.reg,
        "tol": a.tol,
        "max_iter": a.max_iter,
    });
    let mut weights = BTreeMap::new();
    for (id, &w) in problem.dict.ids().iter().zip(&sol.weights) {
        if w > 0.0 {
            weights.insert(id.clone(), w);
        }
    }
    let mut support = sol.support.clone();
    support.sort();
    let doc = json!({
        "weights": weights,
        "support": support,
        "residual_l2": sol.residual_l2,
        "objective": sol.objective,
        "kkt_residual": sol.kkt_residual,
        "iterations": sol.iterations,
        "mu": a.mu,
        "regularizer": a.reg,
        "config": config,
    });
    std::fs::write(&a.out, serde_json::to_string_pretty(&doc)?)?;
    println!(
        "design-filter: residual {:.6}, support size {}",
        sol.residual_l2,
        sol.support.len()
    );
    Ok(())
}

fn parse_w0(text: &str, n: usize) -> Result<Vec<f64>> {
    if text == "uniform" {
        return Ok(vec![1.0 / n as f64; n]);
    }
    if let Ok(v) = text.parse::<f64>() {
        return Ok(vec![v; n]);
    }
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidConfig(format!("w0 entry '{s}': {e}")))
        })
        .collect::<Result<_>>()?;
    if parts.len() != n {
        return Err(Error::InvalidConfig(format!(
            "w0 has {} entries, dictionary has {n}",
            parts.len()
        )));
    }
    Ok(parts)
}

fn cmd_adapt(a: AdaptArgs) -> Result<()> {
    let map = load_map(&a.map)?;
    let dict = load_dictionary(&a.dict)?;
    let scenario = load_scenario(&a.scenario)?;
    let w0 = parse_w0(&a.w0, dict.len())?;
    let run = run_adaptive(&scenario, &dict, &map, a.eta, a.mu, &w0)?;
    save_run_csv(&a.out, &run)?;
    println!(
        "adapt: {} steps, final residual {:.6}, clamp events {}",
        run.residual_trajectory.len(),
        run.residual_trajectory.last().copied().unwrap_or(f64::NAN),
        run.clamp_events
    );
    Ok(())
}

fn cmd_synth_data(a: SynthDataArgs) -> Result<()> {
    let cfg = SyntheticConfig {
        seed: a.seed,
        k: a.k,
        l: a.l,
        n_train: a.n_train,
        n_dict: a.n_dict,
        true_rank: a.rank,
        noise_sigma: a.noise,
    };
    let data = generate_synthetic(&cfg)?;
    std::fs::create_dir_all(&a.out_dir)?;

    csvio::save_compounds(a.out_dir.join("compounds.csv"), &data.compounds)?;
    csvio::save_percepts(a.out_dir.join("percepts.csv"), &data.percepts)?;
    let dict_records: Vec<corpus::CompoundRecord> = data
        .dictionary
        .ids()
        .iter()
        .enumerate()
        .map(|(j, id)| corpus::CompoundRecord {
            id: id.clone(),
            name: format!("dictionary compound {}", j + 1),
            features: data.dictionary.features().column(j),
        })
        .collect();
    csvio::save_compounds(a.out_dir.join("dict.csv"), &dict_records)?;

    let gt = json!({
        "k": a.k,
        "l": a.l,
        "rank": a.rank,
        "a0": data.ground_truth_map.data(),
    });
    std::fs::write(
        a.out_dir.join("ground_truth.json"),
        serde_json::to_string_pretty(&gt)?,
    )?;

    let manifest = json!({
        "command": "synth-data",
        "version": VERSION,
        "seed": a.seed,
        "k": a.k,
        "l": a.l,
        "n_train": a.n_train,
        "n_dict": a.n_dict,
        "rank": a.rank,
        "noise": a.noise,
        "files": ["compounds.csv", "percepts.csv", "dict.csv", "ground_truth.json"],
    });
    std::fs::write(
        a.out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    println!(
        "synth-data: wrote {} training compounds and {} dictionary compounds to {}",
        a.n_train,
        a.n_dict,
        a.out_dir.display()
    );
    Ok(())
}
