//! The lo→hi flipping sequence `W^0, …, W^{rows·n}`.
//!
//! `W^0` holds an independent lo-mode draw at every site. Step `k → k+1`
//! picks a uniformly random site that is still lo and replaces its weight
//! with an independent hi-mode draw, so `W^k` has exactly `k` hi sites and
//! `W^k` has the law of the i.i.d. grid conditioned on `N = k` hi sites.
//!
//! Per-site lo and hi values are drawn upfront and the flip order is a
//! uniform permutation; this is the same law as drawing at flip time and
//! lets a trajectory be replayed exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::distributions::{Mode, WeightModel};
use crate::error::{Error, Result};
use crate::estimation::WindowI;
use crate::lattice::{
    hi_mode_max, last_passage, last_passage_value, GridShape, IncrementalPassage, WeightGrid,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryMode {
    /// Rebuild the grid and rerun the full dynamic program at every step.
    FullRecompute,
    /// Propagate each flip through the forward table.
    #[default]
    Incremental,
}

#[derive(Clone, Debug)]
pub struct CoupledTrajectory {
    shape: GridShape,
    model: WeightModel,
    flip_order: Vec<usize>,
    lo_values: Vec<i64>,
    hi_values: Vec<i64>,
    passage: Vec<i64>,
    hi_max: Vec<i64>,
}

impl CoupledTrajectory {
    /// Draws lo values (row-major), then hi values (row-major), then a
    /// Fisher–Yates flip order, and evaluates `L(k)` and `M(k)` for every `k`.
    pub fn build<R: Rng + ?Sized>(
        shape: GridShape,
        model: &WeightModel,
        rng: &mut R,
        mode: TrajectoryMode,
    ) -> Self {
        let sites = shape.sites();
        let lo_values: Vec<i64> = (0..sites)
            .map(|_| model.sample_conditional(Mode::Lo, rng))
            .collect();
        let hi_values: Vec<i64> = (0..sites)
            .map(|_| model.sample_conditional(Mode::Hi, rng))
            .collect();
        let mut flip_order: Vec<usize> = (0..sites).collect();
        flip_order.shuffle(rng);

        let mut trajectory = CoupledTrajectory {
            shape,
            model: model.clone(),
            flip_order,
            lo_values,
            hi_values,
            passage: Vec::with_capacity(sites + 1),
            hi_max: Vec::with_capacity(sites + 1),
        };
        match mode {
            TrajectoryMode::FullRecompute => trajectory.fill_full(),
            TrajectoryMode::Incremental => trajectory.fill_incremental(),
        }
        trajectory
    }

    fn fill_full(&mut self) {
        for k in 0..=self.shape.sites() {
            let grid = self.grid_at(k);
            self.passage.push(last_passage_value(&grid));
            self.hi_max.push(hi_mode_max(&grid));
        }
    }

    fn fill_incremental(&mut self) {
        let threshold = self.model.threshold_scaled();
        let grid = WeightGrid::from_weights(self.shape, self.lo_values.clone(), threshold)
            .expect("lo values match the shape");
        let mut weights = IncrementalPassage::new(grid);
        let zeros = WeightGrid::from_weights(self.shape, vec![0; self.shape.sites()], 0)
            .expect("shape matches");
        let mut flags = IncrementalPassage::new(zeros);
        self.passage.push(weights.value());
        self.hi_max.push(flags.value());
        for &site in &self.flip_order {
            let v = self.shape.vertex(site);
            let l = weights
                .raise(v, self.hi_values[site])
                .expect("hi values exceed lo values");
            let m = flags.raise(v, 1).expect("0 → 1 is a raise");
            self.passage.push(l);
            self.hi_max.push(m);
        }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn model(&self) -> &WeightModel {
        &self.model
    }

    /// Row-major site indices in flip order.
    pub fn flip_order(&self) -> &[usize] {
        &self.flip_order
    }

    pub fn lo_values(&self) -> &[i64] {
        &self.lo_values
    }

    pub fn hi_values(&self) -> &[i64] {
        &self.hi_values
    }

    /// `L(k)` for `k = 0..=rows·n`, scaled units.
    pub fn passage(&self) -> &[i64] {
        &self.passage
    }

    /// `L(k)` in real units.
    pub fn passage_real(&self) -> Vec<f64> {
        self.passage.iter().map(|&l| self.model.to_real(l)).collect()
    }

    /// `M(k)` for `k = 0..=rows·n`.
    pub fn hi_max(&self) -> &[i64] {
        &self.hi_max
    }

    /// The configuration `W^k`.
    pub fn grid_at(&self, k: usize) -> WeightGrid {
        let mut weights = self.lo_values.clone();
        for &site in &self.flip_order[..k] {
            weights[site] = self.hi_values[site];
        }
        WeightGrid::from_weights(self.shape, weights, self.model.threshold_scaled())
            .expect("trajectory weights match the shape")
    }

    /// Draws `N ~ Binomial(rows·n, p)` from `rng` and returns `(N, L(N))`.
    ///
    /// `rng` must be independent of the stream that built the trajectory.
    pub fn evaluate_at_n<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, i64) {
        let binomial = Binomial::new(self.shape.sites() as u64, self.model.p())
            .expect("p lies in (0, 1)");
        let n = binomial.sample(rng) as usize;
        (n, self.passage[n])
    }

    pub fn window(&self) -> Result<WindowI> {
        WindowI::new(self.shape, &self.model)
    }

    pub fn check_reversed_lipschitz(&self, constants: &LipschitzConstants) -> Result<LipschitzReport> {
        let window = self.window()?;
        check_reversed_lipschitz(
            &self.passage_real(),
            Some(&self.hi_max),
            self.shape,
            window,
            constants,
        )
    }

    /// Monte Carlo estimate of `E(L(k+1) − L(k) | W^k)` from `reps`
    /// independent choices of the flipped lo site and its hi value, next to
    /// the lower bound `(n + rows − 1 − M(k)) / (rows·n − k) · (E(w|hi) − m)`.
    pub fn increment_conditional_mean<R: Rng + ?Sized>(
        &self,
        k: usize,
        reps: usize,
        rng: &mut R,
    ) -> Result<IncrementCheck> {
        let sites = self.shape.sites();
        if k >= sites {
            return Err(Error::NoLoSite { k });
        }
        if reps < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: reps,
            });
        }
        let grid = self.grid_at(k);
        let result = last_passage(&grid);
        let lo_sites = &self.flip_order[k..];
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..reps {
            let site = lo_sites[rng.random_range(0..lo_sites.len())];
            let raised = self.model.sample_conditional(Mode::Hi, rng);
            let through = result.through(&grid, site) + raised - grid.weights()[site];
            let step = self.model.to_real(through.max(result.value()) - result.value());
            sum += step;
            sum_sq += step * step;
        }
        let reps_f = reps as f64;
        let mean = sum / reps_f;
        let variance = ((sum_sq - reps_f * mean * mean) / (reps_f - 1.0)).max(0.0);
        let hi_max = self.hi_max[k];
        let lo_on_path = self.shape.path_len() as f64 - hi_max as f64;
        let bound = lo_on_path / (sites - k) as f64
            * (self.model.mean_hi() - self.model.threshold());
        Ok(IncrementCheck {
            k,
            hi_max,
            mean,
            std_error: (variance / reps_f).sqrt(),
            bound,
        })
    }
}

/// Columnar export `k L_k M_k` with a `# key=value` header line.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryTable {
    pub header: BTreeMap<String, f64>,
    /// `(k, L(k) in real units, M(k))`.
    pub rows: Vec<(usize, f64, i64)>,
}

impl TrajectoryTable {
    pub fn new(trajectory: &CoupledTrajectory, constants: &LipschitzConstants) -> Self {
        let shape = trajectory.shape;
        let model = &trajectory.model;
        let mut header = BTreeMap::new();
        let mut put = |k: &str, v: f64| {
            header.insert(k.to_string(), v);
        };
        put("n", shape.columns() as f64);
        put("rows", shape.rows() as f64);
        put("sites", shape.sites() as f64);
        put("p", model.p());
        put("m", model.threshold());
        put("mean_hi", model.mean_hi());
        put("scale", model.scale() as f64);
        put("c1", constants.c1);
        put("c5", constants.c5);
        put("c_ell", constants.c_ell);
        put("gap", constants.gap(shape));
        put("slope", constants.c5 / shape.rows() as f64);
        if let Ok(w) = trajectory.window() {
            put("window_center", w.center);
            put("window_half_width", w.half_width);
        }
        let rows = trajectory
            .passage
            .iter()
            .zip(&trajectory.hi_max)
            .enumerate()
            .map(|(k, (&l, &m))| (k, model.to_real(l), m))
            .collect();
        TrajectoryTable { header, rows }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("#");
        for (k, v) in &self.header {
            let _ = write!(out, " {k}={v}");
        }
        out.push_str("\nk L_k M_k\n");
        for (k, l, m) in &self.rows {
            let _ = writeln!(out, "{k} {l} {m}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidArgument(format!("trajectory file: {msg}"));
        let mut header = BTreeMap::new();
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                for pair in rest.split_whitespace() {
                    let (k, v) = pair
                        .split_once('=')
                        .ok_or_else(|| bad(format!("line {}: bad header entry {pair}", lineno + 1)))?;
                    let v: f64 = v
                        .parse()
                        .map_err(|_| bad(format!("line {}: bad value {v}", lineno + 1)))?;
                    header.insert(k.to_string(), v);
                }
                continue;
            }
            if line.is_empty() || line.starts_with('k') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let parsed = match cols.as_slice() {
                [k, l, m] => k
                    .parse()
                    .ok()
                    .zip(l.parse().ok())
                    .zip(m.parse().ok())
                    .map(|((k, l), m)| (k, l, m)),
                _ => None,
            };
            rows.push(parsed.ok_or_else(|| bad(format!("line {}: expected `k L_k M_k`", lineno + 1)))?);
        }
        if rows.is_empty() {
            return Err(bad("no rows".into()));
        }
        Ok(TrajectoryTable { header, rows })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IncrementCheck {
    pub k: usize,
    pub hi_max: i64,
    pub mean: f64,
    pub std_error: f64,
    pub bound: f64,
}

/// Optional overrides for the reversed Lipschitz constants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c5: Option<f64>,
    /// Gap coefficient: `ℓ = c_ell · √(rows·n)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_ell: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzConstants {
    pub epsilon: f64,
    /// `M < c₁·n` defines the good event `A`.
    pub c1: f64,
    /// Required slope is `c₅ / rows` per flip.
    pub c5: f64,
    pub c_ell: f64,
}

impl LipschitzConstants {
    /// `ε = (1−p)/4`, `c₁ = ε + (p+1)/2`, `c₅ = (1−c₁)(E(w|hi) − m)`,
    /// `c_ell = √(p(1−p))`, each replaced by its override when given.
    pub fn resolve(model: &WeightModel, config: &LipschitzConfig) -> Result<Self> {
        let p = model.p();
        let epsilon = config.epsilon.unwrap_or((1.0 - p) / 4.0);
        if !(epsilon > 0.0 && epsilon < (1.0 - p) / 2.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon = {epsilon} outside (0, (1−p)/2)"
            )));
        }
        let c1 = config.c1.unwrap_or(epsilon + (p + 1.0) / 2.0);
        let c5 = config
            .c5
            .unwrap_or((1.0 - c1) * (model.mean_hi() - model.threshold()));
        let c_ell = config.c_ell.unwrap_or((p * (1.0 - p)).sqrt());
        if !(c1 > 0.0 && c5 > 0.0 && c_ell >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "constants must be positive: c1 = {c1}, c5 = {c5}, c_ell = {c_ell}"
            )));
        }
        Ok(LipschitzConstants {
            epsilon,
            c1,
            c5,
            c_ell,
        })
    }

    pub fn defaults(model: &WeightModel) -> Self {
        Self::resolve(model, &LipschitzConfig::default()).expect("defaults are admissible")
    }

    /// `ℓ = c_ell · √(rows·n)`.
    pub fn gap(&self, shape: GridShape) -> f64 {
        self.c_ell * (shape.sites() as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub constants: LipschitzConstants,
    pub gap: f64,
    /// Required increase per flip, `c₅ / rows`.
    pub slope: f64,
    pub window: WindowI,
    /// Pairs `(i, j)` in the window with `j − i ≥ gap` and
    /// `L(j) − L(i) < slope · (j − i)`.
    pub violations: Vec<(usize, usize)>,
    pub o_n_holds: bool,
    /// Whether `M(k) < c₁·n` held for every `k` in the window, when `M` is known.
    pub a_n_holds: Option<bool>,
}

/// Scans every pair of the window for the reversed Lipschitz condition.
///
/// `passage[k]` is `L(k)` in real units; `hi_max[k]`, when given, is `M(k)`.
pub fn check_reversed_lipschitz(
    passage: &[f64],
    hi_max: Option<&[i64]>,
    shape: GridShape,
    window: WindowI,
    constants: &LipschitzConstants,
) -> Result<LipschitzReport> {
    let Some((lo, hi)) = window.integer_range(passage.len() - 1) else {
        return Err(Error::EmptyWindow {
            variance: window.half_width * window.half_width,
        });
    };
    let gap = constants.gap(shape);
    let slope = constants.c5 / shape.rows() as f64;
    let mut violations = Vec::new();
    for i in lo..=hi {
        for j in i + 1..=hi {
            let span = (j - i) as f64;
            if span >= gap && passage[j] - passage[i] < slope * span {
                violations.push((i, j));
            }
        }
    }
    let limit = constants.c1 * shape.columns() as f64;
    let a_n_holds = hi_max.map(|m| m[lo..=hi].iter().all(|&v| (v as f64) < limit));
    Ok(LipschitzReport {
        constants: *constants,
        gap,
        slope,
        window,
        o_n_holds: violations.is_empty(),
        violations,
        a_n_holds,
    })
}
