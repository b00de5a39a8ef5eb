//! Browser bindings for the `dlpp` core: three operations, each taking plain
//! numbers and returning a JSON string for the page script to draw.
//!
//! The `*_json` functions are ordinary Rust so they can be tested on the host;
//! the `#[wasm_bindgen]` wrappers only convert errors into JS exceptions.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use dlpp::coupling::{CoupledTrajectory, LipschitzConstants, TrajectoryMode};
use dlpp::distributions::WeightModel;
use dlpp::experiments::{run_replicate, summarize, ExperimentKind, ExperimentSpec, Overrides};
use dlpp::lattice::{geodesics, hi_mode_max, last_passage, GridShape, TieBreak, WeightGrid};
use dlpp::stream::{domain, stream};

/// Grids above this many sites are refused; the page has to stay responsive.
pub const MAX_SITES: usize = 1 << 20;

fn setup(n: usize, alpha: f64, p: f64) -> Result<(GridShape, WeightModel), String> {
    let model = WeightModel::two_point(p).map_err(|e| e.to_string())?;
    let shape = GridShape::thin(n, alpha).map_err(|e| e.to_string())?;
    if shape.sites() > MAX_SITES {
        return Err(format!("{} sites is too many for the demo (limit {MAX_SITES})", shape.sites()));
    }
    Ok((shape, model))
}

fn xy(v: &dlpp::lattice::Vertex) -> [usize; 2] {
    [v.x, v.y]
}

/// One grid: weights (row-major, bottom row first), `L`, `M_n`, the canonical
/// geodesic and the vertices shared by every geodesic.
pub fn simulate_json(n: usize, alpha: f64, p: f64, seed: u64) -> Result<String, String> {
    let (shape, model) = setup(n, alpha, p)?;
    let mut rng = stream(seed, domain::SINGLE, n as u64, 0);
    let grid = WeightGrid::sample(shape, &model, &mut rng);
    let result = last_passage(&grid);
    let set = geodesics(&grid, &result, TieBreak::default());
    let value = json!({
        "columns": shape.columns(),
        "rows": shape.rows(),
        "weights": grid.weights(),
        "passage": model.to_real(result.value()),
        "hi_max": hi_mode_max(&grid),
        "canonical": set.canonical.iter().map(xy).collect::<Vec<_>>(),
        "intersection": set.intersection.iter().map(xy).collect::<Vec<_>>(),
    });
    Ok(value.to_string())
}

/// One coupled flipping trajectory `k ↦ L(k), M(k)` with the binomial window
/// and the outcome of the reversed Lipschitz scan.
pub fn trajectory_json(n: usize, alpha: f64, p: f64, seed: u64) -> Result<String, String> {
    let (shape, model) = setup(n, alpha, p)?;
    let mut rng = stream(seed, domain::SINGLE, n as u64, 1);
    let trajectory = CoupledTrajectory::build(shape, &model, &mut rng, TrajectoryMode::Incremental);
    let constants = LipschitzConstants::defaults(&model);
    let report = trajectory
        .check_reversed_lipschitz(&constants)
        .map_err(|e| e.to_string())?;
    let value = json!({
        "columns": shape.columns(),
        "rows": shape.rows(),
        "passage": trajectory.passage_real(),
        "hi_max": trajectory.hi_max(),
        "window": [report.window.center - report.window.half_width,
                   report.window.center + report.window.half_width],
        "gap": report.gap,
        "slope": report.slope,
        "violations": report.violations.len(),
        "o_n_holds": report.o_n_holds,
        "a_n_holds": report.a_n_holds,
    });
    Ok(value.to_string())
}

/// A small moment-scaling sweep over `n = n0, 2·n0, …` (`sizes` of them),
/// returning the experiment summary. Runs single-threaded on the caller.
pub fn moment_scaling_json(
    alpha: f64,
    p: f64,
    n0: usize,
    sizes: usize,
    replicates: usize,
    seed: u64,
) -> Result<String, String> {
    let n: Vec<usize> = (0..sizes).map(|i| n0 << i).collect();
    let largest = GridShape::thin(*n.last().ok_or("no sizes")?, alpha).map_err(|e| e.to_string())?;
    if largest.sites().saturating_mul(replicates) > 50 * MAX_SITES {
        return Err("sweep too large for the demo; lower n0, sizes or replicates".into());
    }
    let spec = ExperimentSpec {
        kind: ExperimentKind::MomentScaling,
        model: WeightModel::two_point(p).map_err(|e| e.to_string())?,
        alpha,
        r: vec![1.0, 2.0],
        n,
        replicates,
        seed,
        constants: Overrides {
            bootstrap: Some(100),
            fit_resamples: Some(200),
            ..Default::default()
        },
    };
    spec.validate().map_err(|e| e.to_string())?;
    let rows: Vec<_> = (0..spec.n.len())
        .flat_map(|i| (0..replicates).map(move |j| (i, j)))
        .map(|(i, j)| run_replicate(&spec, i, j))
        .collect();
    let summary = summarize(&spec, &rows).map_err(|e| e.to_string())?;
    let value: Value = serde_json::to_value(&summary).map_err(|e| e.to_string())?;
    Ok(value.to_string())
}

#[wasm_bindgen]
pub fn simulate(n: usize, alpha: f64, p: f64, seed: u64) -> Result<String, JsError> {
    simulate_json(n, alpha, p, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn trajectory(n: usize, alpha: f64, p: f64, seed: u64) -> Result<String, JsError> {
    trajectory_json(n, alpha, p, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn moment_scaling(
    alpha: f64,
    p: f64,
    n0: usize,
    sizes: usize,
    replicates: usize,
    seed: u64,
) -> Result<String, JsError> {
    moment_scaling_json(alpha, p, n0, sizes, replicates, seed).map_err(|e| JsError::new(&e))
}
