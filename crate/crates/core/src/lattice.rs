//! Grid geometry, last-passage dynamic programming and geodesics.
//!
//! Vertices are addressed 0-based as `(x, y)` with `x` the column in
//! `0..columns` and `y` the row in `0..rows`; `(0, 0)` is the source and
//! `(columns − 1, rows − 1)` the sink. Weights live row-major, row 0 first.
//! All passage values are exact integers in the model's scaled units.

use std::fmt::Write as _;

use rand::Rng;

use crate::distributions::{Mode, WeightModel};
use crate::error::{Error, Result};

/// Default cap on the number of paths [`enumerate_paths_lpp`] will visit.
pub const ENUMERATION_CAP: u128 = 1_000_000;

const UNREACHABLE: i64 = i64::MIN / 4;

/// `⌊n^α⌋`, nudged by `1e−9` so exact powers do not floor one short.
pub fn rows_for(n: usize, alpha: f64) -> usize {
    ((n as f64).powf(alpha) + 1e-9).floor() as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex {
    pub x: usize,
    pub y: usize,
}

impl Vertex {
    pub fn new(x: usize, y: usize) -> Self {
        Vertex { x, y }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridShape {
    columns: usize,
    rows: usize,
    alpha: Option<f64>,
}

impl GridShape {
    /// The `n × ⌊n^α⌋` grid.
    pub fn thin(n: usize, alpha: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidShape("n must be positive".into()));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidShape(format!("alpha = {alpha} outside (0, 1]")));
        }
        let rows = rows_for(n, alpha);
        if rows < 1 || rows > n {
            return Err(Error::InvalidShape(format!("rows = {rows} for n = {n}")));
        }
        Ok(GridShape {
            columns: n,
            rows,
            alpha: Some(alpha),
        })
    }

    /// An explicit `columns × rows` grid.
    pub fn new(columns: usize, rows: usize) -> Result<Self> {
        if columns == 0 || rows == 0 {
            return Err(Error::InvalidShape(format!("{columns} × {rows} grid")));
        }
        Ok(GridShape {
            columns,
            rows,
            alpha: None,
        })
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn sites(&self) -> usize {
        self.columns * self.rows
    }

    /// Number of vertices on every directed path, `n + rows − 1`.
    pub fn path_len(&self) -> usize {
        self.columns + self.rows - 1
    }

    /// `C(n + rows − 2, rows − 1)`, saturating at `u128::MAX`.
    pub fn path_count(&self) -> u128 {
        let k = (self.rows - 1).min(self.columns - 1) as u128;
        let total = (self.columns + self.rows - 2) as u128;
        let mut acc: u128 = 1;
        for i in 0..k {
            acc = match acc.checked_mul(total - i) {
                Some(v) => v / (i + 1),
                None => return u128::MAX,
            };
        }
        acc
    }

    pub fn index(&self, v: Vertex) -> usize {
        v.y * self.columns + v.x
    }

    pub fn vertex(&self, index: usize) -> Vertex {
        Vertex {
            x: index % self.columns,
            y: index / self.columns,
        }
    }

    pub fn sink(&self) -> Vertex {
        Vertex::new(self.columns - 1, self.rows - 1)
    }

    fn check(&self, v: Vertex) -> Result<()> {
        if v.x < self.columns && v.y < self.rows {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange { x: v.x, y: v.y })
        }
    }
}

/// Realised weights on a grid, in scaled integer units.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightGrid {
    shape: GridShape,
    weights: Vec<i64>,
    threshold: i64,
}

impl WeightGrid {
    /// `rows · n` i.i.d. draws from `model`, row-major with row 0 first.
    pub fn sample<R: Rng + ?Sized>(shape: GridShape, model: &WeightModel, rng: &mut R) -> Self {
        let weights = (0..shape.sites()).map(|_| model.sample(rng)).collect();
        WeightGrid {
            shape,
            weights,
            threshold: model.threshold_scaled(),
        }
    }

    /// Builds a grid from raw weights; a site is hi iff its weight exceeds `threshold`.
    pub fn from_weights(shape: GridShape, weights: Vec<i64>, threshold: i64) -> Result<Self> {
        if weights.len() != shape.sites() {
            return Err(Error::InvalidShape(format!(
                "{} weights for {} sites",
                weights.len(),
                shape.sites()
            )));
        }
        if weights.iter().any(|&w| w < 0) {
            return Err(Error::InvalidArgument("weights must be non-negative".into()));
        }
        Ok(WeightGrid {
            shape,
            weights,
            threshold,
        })
    }

    /// `rows[y][x]`, row 0 (the source row) first.
    pub fn from_rows(rows: &[Vec<i64>], threshold: i64) -> Result<Self> {
        let columns = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != columns) {
            return Err(Error::InvalidShape("ragged rows".into()));
        }
        let shape = GridShape::new(columns, rows.len())?;
        WeightGrid::from_weights(shape, rows.concat(), threshold)
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn weights(&self) -> &[i64] {
        &self.weights
    }

    pub fn threshold(&self) -> i64 {
        self.threshold
    }

    pub fn weight(&self, v: Vertex) -> i64 {
        self.weights[self.shape.index(v)]
    }

    pub fn mode(&self, v: Vertex) -> Mode {
        if self.weight(v) > self.threshold {
            Mode::Hi
        } else {
            Mode::Lo
        }
    }

    pub fn hi_count(&self) -> usize {
        self.weights.iter().filter(|&&w| w > self.threshold).count()
    }

    /// The 0/1 grid of hi-mode flags.
    pub fn indicator(&self) -> WeightGrid {
        WeightGrid {
            shape: self.shape,
            weights: self
                .weights
                .iter()
                .map(|&w| i64::from(w > self.threshold))
                .collect(),
            threshold: 0,
        }
    }

    /// Debug dump: one line per row, row 1 (the source row) first,
    /// space-separated scaled weights.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for row in self.weights.chunks(self.shape.columns) {
            let line: Vec<String> = row.iter().map(i64::to_string).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

/// Forward and backward last-passage tables.
#[derive(Clone, Debug, PartialEq)]
pub struct PassageResult {
    value: i64,
    forward: Vec<i64>,
    backward: Vec<i64>,
}

impl PassageResult {
    /// The last-passage time `L`.
    pub fn value(&self) -> i64 {
        self.value
    }

    /// Best sum over directed paths from the source to each vertex.
    pub fn forward(&self) -> &[i64] {
        &self.forward
    }

    /// Best sum over directed paths from each vertex to the sink.
    pub fn backward(&self) -> &[i64] {
        &self.backward
    }

    /// Best sum over directed paths forced through vertex index `i`.
    pub fn through(&self, grid: &WeightGrid, i: usize) -> i64 {
        self.forward[i] + self.backward[i] - grid.weights[i]
    }

    /// Whether vertex index `i` lies on at least one geodesic.
    pub fn on_some_geodesic(&self, grid: &WeightGrid, i: usize) -> bool {
        self.through(grid, i) == self.value
    }
}

#[derive(Clone, Copy)]
enum Sweep {
    Forward,
    Backward,
}

impl Sweep {
    /// Up to two neighbours the table value at `v` is computed from.
    fn sources(self, shape: GridShape, v: Vertex) -> [Option<Vertex>; 2] {
        match self {
            Sweep::Forward => [
                (v.x > 0).then(|| Vertex::new(v.x - 1, v.y)),
                (v.y > 0).then(|| Vertex::new(v.x, v.y - 1)),
            ],
            Sweep::Backward => [
                (v.x + 1 < shape.columns).then(|| Vertex::new(v.x + 1, v.y)),
                (v.y + 1 < shape.rows).then(|| Vertex::new(v.x, v.y + 1)),
            ],
        }
    }

    /// Neighbours whose table value depends on `v`.
    fn dependents(self, shape: GridShape, v: Vertex) -> [Option<Vertex>; 2] {
        match self {
            Sweep::Forward => Sweep::Backward.sources(shape, v),
            Sweep::Backward => Sweep::Forward.sources(shape, v),
        }
    }

    fn cell(self, shape: GridShape, table: &[i64], weights: &[i64], v: Vertex) -> i64 {
        let [a, b] = self.sources(shape, v);
        let best = match (a, b) {
            (None, None) => 0,
            (a, b) => a
                .into_iter()
                .chain(b)
                .map(|u| table[shape.index(u)])
                .max()
                .unwrap(),
        };
        weights[shape.index(v)] + best
    }
}

fn forward_table(shape: GridShape, weights: &[i64], admissible: Option<&[bool]>) -> Vec<i64> {
    let (n, rows) = (shape.columns, shape.rows);
    let mut table = vec![UNREACHABLE; shape.sites()];
    for y in 0..rows {
        for x in 0..n {
            let i = y * n + x;
            if admissible.is_some_and(|a| !a[i]) {
                continue;
            }
            let best = if x == 0 && y == 0 {
                0
            } else {
                let left = if x > 0 { table[i - 1] } else { UNREACHABLE };
                let down = if y > 0 { table[i - n] } else { UNREACHABLE };
                left.max(down)
            };
            if best > UNREACHABLE {
                table[i] = best + weights[i];
            }
        }
    }
    table
}

fn backward_table(shape: GridShape, weights: &[i64]) -> Vec<i64> {
    let (n, rows) = (shape.columns, shape.rows);
    let mut table = vec![UNREACHABLE; shape.sites()];
    for y in (0..rows).rev() {
        for x in (0..n).rev() {
            let i = y * n + x;
            let best = if x + 1 == n && y + 1 == rows {
                0
            } else {
                let right = if x + 1 < n { table[i + 1] } else { UNREACHABLE };
                let up = if y + 1 < rows { table[i + n] } else { UNREACHABLE };
                right.max(up)
            };
            table[i] = best + weights[i];
        }
    }
    table
}

/// Last-passage time with full forward and backward tables.
pub fn last_passage(grid: &WeightGrid) -> PassageResult {
    let shape = grid.shape;
    let forward = forward_table(shape, &grid.weights, None);
    let backward = backward_table(shape, &grid.weights);
    PassageResult {
        value: forward[shape.sites() - 1],
        forward,
        backward,
    }
}

/// Last-passage value only; skips the backward table.
pub fn last_passage_value(grid: &WeightGrid) -> i64 {
    forward_table(grid.shape, &grid.weights, None)[grid.shape.sites() - 1]
}

/// `M`: the largest number of hi-mode sites on a directed path.
pub fn hi_mode_max(grid: &WeightGrid) -> i64 {
    last_passage_value(&grid.indicator())
}

/// Visits every directed path from source to sink with its weight sum.
///
/// The path is passed as row-major vertex indices. Returns the number of
/// paths visited. Fails before visiting anything if the path count exceeds
/// `cap`.
pub fn enumerate_paths<F>(grid: &WeightGrid, cap: u128, mut visit: F) -> Result<u64>
where
    F: FnMut(&[usize], i64),
{
    let shape = grid.shape;
    let count = shape.path_count();
    if count > cap {
        return Err(Error::PathCountOverCap { count, cap });
    }
    let mut path = Vec::with_capacity(shape.path_len());
    let mut visited = 0u64;
    walk(grid, Vertex::new(0, 0), 0, &mut path, &mut visited, &mut visit);
    Ok(visited)
}

fn walk<F>(
    grid: &WeightGrid,
    v: Vertex,
    acc: i64,
    path: &mut Vec<usize>,
    visited: &mut u64,
    visit: &mut F,
) where
    F: FnMut(&[usize], i64),
{
    let shape = grid.shape;
    let i = shape.index(v);
    let acc = acc + grid.weights[i];
    path.push(i);
    if v == shape.sink() {
        *visited += 1;
        visit(path, acc);
    } else {
        if v.x + 1 < shape.columns {
            walk(grid, Vertex::new(v.x + 1, v.y), acc, path, visited, visit);
        }
        if v.y + 1 < shape.rows {
            walk(grid, Vertex::new(v.x, v.y + 1), acc, path, visited, visit);
        }
    }
    path.pop();
}

/// Brute-force last-passage time over every directed path.
pub fn enumerate_paths_lpp(grid: &WeightGrid) -> Result<i64> {
    let mut best = i64::MIN;
    enumerate_paths(grid, ENUMERATION_CAP, |_, sum| best = best.max(sum))?;
    Ok(best)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieBreak {
    /// On ties, the backward trace steps left (the path arrived by `e₁`).
    #[default]
    PreferRight,
    /// On ties, the backward trace steps down (the path arrived by `e₂`).
    PreferUp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicSet {
    /// One geodesic, source first.
    pub canonical: Vec<Vertex>,
    /// Vertices common to every geodesic, ordered along the path.
    pub intersection: Vec<Vertex>,
    /// Number of vertices lying on some geodesic, per anti-diagonal `x + y`.
    pub per_diagonal: Vec<usize>,
}

/// Canonical geodesic and the intersection of all geodesics.
///
/// Every directed path crosses each anti-diagonal exactly once, so a vertex
/// lies on every geodesic iff it is the only on-some-geodesic vertex of its
/// anti-diagonal.
pub fn geodesics(grid: &WeightGrid, result: &PassageResult, tie_break: TieBreak) -> GeodesicSet {
    let shape = grid.shape;
    let mut canonical = Vec::with_capacity(shape.path_len());
    let mut v = shape.sink();
    loop {
        canonical.push(v);
        if v.x == 0 && v.y == 0 {
            break;
        }
        let need = result.forward[shape.index(v)] - grid.weight(v);
        let left = (v.x > 0)
            .then(|| Vertex::new(v.x - 1, v.y))
            .filter(|u| result.forward[shape.index(*u)] == need);
        let down = (v.y > 0)
            .then(|| Vertex::new(v.x, v.y - 1))
            .filter(|u| result.forward[shape.index(*u)] == need);
        v = match tie_break {
            TieBreak::PreferRight => left.or(down),
            TieBreak::PreferUp => down.or(left),
        }
        .expect("forward table inconsistent with grid");
    }
    canonical.reverse();

    let mut per_diagonal = vec![0usize; shape.path_len()];
    let mut witness = vec![Vertex::new(0, 0); shape.path_len()];
    for i in 0..shape.sites() {
        if result.on_some_geodesic(grid, i) {
            let v = shape.vertex(i);
            per_diagonal[v.x + v.y] += 1;
            witness[v.x + v.y] = v;
        }
    }
    let intersection = per_diagonal
        .iter()
        .zip(&witness)
        .filter(|(&count, _)| count == 1)
        .map(|(_, &v)| v)
        .collect();

    GeodesicSet {
        canonical,
        intersection,
        per_diagonal,
    }
}

/// Whether `(x, y)` lies within vertical distance `width` of the segment
/// from the source to the sink. Exact integer comparison of
/// `|y − x·(rows − 1)/(n − 1)| ≤ width`.
pub fn in_cylinder(shape: GridShape, v: Vertex, width: usize) -> bool {
    if shape.columns == 1 {
        return true;
    }
    let span = (shape.columns - 1) as i128;
    let offset = v.y as i128 * span - v.x as i128 * (shape.rows - 1) as i128;
    offset.abs() <= width as i128 * span
}

/// Last-passage time over directed paths confined to the cylinder of the
/// given vertical half-width around the main diagonal.
///
/// On grids with `rows ≤ columns` every width ≥ 1 admits a path. Steeper
/// grids can disconnect a narrow band (2 columns, 5 rows, width 1), which
/// is reported as [`Error::EmptyCylinder`].
pub fn cylinder_last_passage(grid: &WeightGrid, width: usize) -> Result<i64> {
    if width == 0 {
        return Err(Error::InvalidArgument("cylinder width must be ≥ 1".into()));
    }
    let shape = grid.shape;
    let admissible: Vec<bool> = (0..shape.sites())
        .map(|i| in_cylinder(shape, shape.vertex(i), width))
        .collect();
    let table = forward_table(shape, &grid.weights, Some(&admissible));
    let value = table[shape.sites() - 1];
    if value <= UNREACHABLE {
        debug_assert!(shape.rows > shape.columns, "thin grids always admit a path");
        return Err(Error::EmptyCylinder { width });
    }
    Ok(value)
}

/// Re-propagates one table after the weight at `start` increased.
///
/// Walks anti-diagonal by anti-diagonal away from `start`, recomputing only
/// cells downstream of a changed cell and stopping once a wave changes
/// nothing.
fn propagate(shape: GridShape, weights: &[i64], table: &mut [i64], start: Vertex, sweep: Sweep) {
    let mut wave = vec![start];
    let mut next = Vec::new();
    while !wave.is_empty() {
        next.clear();
        for &v in &wave {
            let i = shape.index(v);
            let value = sweep.cell(shape, table, weights, v);
            if value != table[i] {
                table[i] = value;
                next.extend(sweep.dependents(shape, v).into_iter().flatten());
            }
        }
        next.sort_unstable();
        next.dedup();
        std::mem::swap(&mut wave, &mut next);
    }
}

fn raise(grid: &mut WeightGrid, v: Vertex, new_value: i64) -> Result<()> {
    grid.shape.check(v)?;
    let i = grid.shape.index(v);
    let old = grid.weights[i];
    if new_value < old {
        return Err(Error::DecreasingFlip {
            x: v.x,
            y: v.y,
            old,
            new: new_value,
        });
    }
    grid.weights[i] = new_value;
    Ok(())
}

/// Raises the weight at `v` to `new_value` and updates both tables of
/// `result` incrementally. Returns the new last-passage time.
pub fn apply_flip(
    grid: &mut WeightGrid,
    result: &mut PassageResult,
    v: Vertex,
    new_value: i64,
) -> Result<i64> {
    raise(grid, v, new_value)?;
    let shape = grid.shape;
    propagate(shape, &grid.weights, &mut result.forward, v, Sweep::Forward);
    propagate(shape, &grid.weights, &mut result.backward, v, Sweep::Backward);
    result.value = result.forward[shape.sites() - 1];
    Ok(result.value)
}

/// Forward-table-only state for long monotone flip sequences.
#[derive(Clone, Debug)]
pub struct IncrementalPassage {
    grid: WeightGrid,
    forward: Vec<i64>,
}

impl IncrementalPassage {
    pub fn new(grid: WeightGrid) -> Self {
        let forward = forward_table(grid.shape, &grid.weights, None);
        IncrementalPassage { grid, forward }
    }

    pub fn grid(&self) -> &WeightGrid {
        &self.grid
    }

    pub fn value(&self) -> i64 {
        self.forward[self.grid.shape.sites() - 1]
    }

    /// Raises one weight and returns the new last-passage time.
    pub fn raise(&mut self, v: Vertex, new_value: i64) -> Result<i64> {
        raise(&mut self.grid, v, new_value)?;
        propagate(
            self.grid.shape,
            &self.grid.weights,
            &mut self.forward,
            v,
            Sweep::Forward,
        );
        Ok(self.value())
    }
}
