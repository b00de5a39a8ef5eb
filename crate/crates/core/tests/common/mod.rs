//! Test-side oracles, written independently of the library's own
//! enumerator and dynamic program.

#![allow(dead_code)]

use dlpp::lattice::{GridShape, Vertex, WeightGrid};
use proptest::prelude::*;

/// Every up-right path as a list of vertices, generated from step bitmasks:
/// bit `s` set means step `s` goes up.
pub fn all_paths(columns: usize, rows: usize) -> Vec<Vec<Vertex>> {
    let steps = columns + rows - 2;
    assert!(steps < 26, "oracle is for small grids only");
    let mut paths = Vec::new();
    for mask in 0u32..(1u32 << steps) {
        if mask.count_ones() as usize != rows - 1 {
            continue;
        }
        let mut v = Vertex::new(0, 0);
        let mut path = vec![v];
        for s in 0..steps {
            if mask >> s & 1 == 1 {
                v.y += 1;
            } else {
                v.x += 1;
            }
            path.push(v);
        }
        paths.push(path);
    }
    paths
}

pub fn path_sum(grid: &WeightGrid, path: &[Vertex]) -> i64 {
    path.iter().map(|&v| grid.weight(v)).sum()
}

pub fn brute_force_lpp(grid: &WeightGrid) -> i64 {
    let shape = grid.shape();
    all_paths(shape.columns(), shape.rows())
        .iter()
        .map(|p| path_sum(grid, p))
        .max()
        .unwrap()
}

/// Vertices shared by every optimal path, sorted by anti-diagonal.
pub fn brute_force_intersection(grid: &WeightGrid) -> Vec<Vertex> {
    let shape = grid.shape();
    let paths = all_paths(shape.columns(), shape.rows());
    let best = paths.iter().map(|p| path_sum(grid, p)).max().unwrap();
    let optimal: Vec<&Vec<Vertex>> = paths.iter().filter(|p| path_sum(grid, p) == best).collect();
    // Paths are indexed by anti-diagonal, so compare position by position.
    (0..shape.path_len())
        .filter(|&d| optimal.iter().all(|p| p[d] == optimal[0][d]))
        .map(|d| optimal[0][d])
        .collect()
}

pub fn binomial(n: u64, k: u64) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Small grids with integer weights in `0..=max_weight`.
pub fn small_grid(max_columns: usize, max_rows: usize, max_weight: i64) -> impl Strategy<Value = WeightGrid> {
    (1..=max_columns, 1..=max_rows)
        .prop_flat_map(move |(c, r)| {
            (Just(c), Just(r), prop::collection::vec(0..=max_weight, c * r))
        })
        .prop_map(move |(c, r, w)| {
            WeightGrid::from_weights(GridShape::new(c, r).unwrap(), w, max_weight / 2).unwrap()
        })
}

/// Two-sample Kolmogorov–Smirnov test; returns `(D, asymptotic p-value)`.
/// Conservative for discrete data.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    let en = (a.len() as f64 * b.len() as f64 / (a.len() + b.len()) as f64).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    if lambda < 0.3 {
        return (d, 1.0);
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    (d, p.clamp(0.0, 1.0))
}
