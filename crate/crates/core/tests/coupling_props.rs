mod common;

use dlpp::coupling::{CoupledTrajectory, LipschitzConstants, TrajectoryMode, TrajectoryTable};
use dlpp::distributions::WeightModel;
use dlpp::estimation::chi_square_gof;
use dlpp::lattice::{last_passage, last_passage_value, GridShape, WeightGrid};
use dlpp::stream::stream;
use rand::Rng;

const SEED: u64 = 20_240_601;

/// Exact law of `L` on the 2×2 grid with i.i.d. Bernoulli(p) weights, by
/// enumerating all 16 configurations. `L = w00 + max(w10, w01) + w11`.
fn exact_two_by_two_law(p: f64) -> [f64; 4] {
    let mut law = [0.0; 4];
    for config in 0u32..16 {
        let w: Vec<u32> = (0..4).map(|b| config >> b & 1).collect();
        let l = w[0] + w[1].max(w[2]) + w[3];
        let ones = config.count_ones() as i32;
        law[l as usize] += p.powi(ones) * (1.0 - p).powi(4 - ones);
    }
    law
}

/// Exact law of `L` given exactly `k` ones among the four sites, each
/// placement equally likely.
fn exact_conditional_law(k: u32) -> [f64; 4] {
    let configs: Vec<u32> = (0u32..16).filter(|c| c.count_ones() == k).collect();
    let mut law = [0.0; 4];
    for &config in &configs {
        let w: Vec<u32> = (0..4).map(|b| config >> b & 1).collect();
        law[(w[0] + w[1].max(w[2]) + w[3]) as usize] += 1.0 / configs.len() as f64;
    }
    law
}

#[test]
fn oracle_law_matches_hand_values() {
    let law = exact_two_by_two_law(0.4);
    // All lo: 0.6^4. Both corners hi and one middle site hi: 0.4²·(1 − 0.6²).
    assert!((law[0] - 0.1296).abs() < 1e-15);
    assert!((law[3] - 0.1024).abs() < 1e-15);
    assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    let conditional = exact_conditional_law(2);
    for (got, want) in conditional.iter().zip([0.0, 1.0 / 6.0, 5.0 / 6.0, 0.0]) {
        assert!((got - want).abs() < 1e-15);
    }
}

#[test]
fn coupled_law_matches_enumeration_on_two_by_two() {
    let model = WeightModel::two_point(0.4).unwrap();
    let shape = GridShape::new(2, 2).unwrap();
    let mut counts = [0u64; 4];
    for j in 0..100_000 {
        let mut rng = stream(SEED, 1, 0, j);
        let traj = CoupledTrajectory::build(shape, &model, &mut rng, TrajectoryMode::Incremental);
        let (_, l) = traj.evaluate_at_n(&mut stream(SEED, 2, 0, j));
        counts[l as usize] += 1;
    }
    let test = chi_square_gof(&counts, &exact_two_by_two_law(0.4));
    assert!(test.p_value > 1e-3, "{test:?} counts {counts:?}");
}

#[test]
fn single_row_is_exact_in_distribution() {
    let model = WeightModel::two_point(0.5).unwrap();
    for columns in 1..=6 {
        let shape = GridShape::new(columns, 1).unwrap();
        for seed in 0..50 {
            let traj = CoupledTrajectory::build(shape, &model, &mut stream(SEED, 3, columns as u64, seed), TrajectoryMode::Incremental);
            let expected: Vec<i64> = (0..=columns as i64).collect();
            assert_eq!(traj.passage(), expected.as_slice());
        }
    }
    // 1×2: L = N ~ Binomial(2, 1/2).
    let shape = GridShape::new(2, 1).unwrap();
    let traj = CoupledTrajectory::build(shape, &model, &mut stream(SEED, 4, 0, 0), TrajectoryMode::Incremental);
    let mut counts = [0u64; 3];
    for j in 0..40_000 {
        let (n, l) = traj.evaluate_at_n(&mut stream(SEED, 5, 0, j));
        assert_eq!(n as i64, l);
        counts[n] += 1;
    }
    let test = chi_square_gof(&counts, &[0.25, 0.5, 0.25]);
    assert!(test.p_value > 1e-3, "{test:?}");
}

#[test]
fn fixed_k_law_does_not_depend_on_the_permutation() {
    let model = WeightModel::two_point(0.5).unwrap();
    let shape = GridShape::new(2, 2).unwrap();
    let k = 2;
    let sample = |family: u64| -> Vec<f64> {
        (0..10_000)
            .map(|j| {
                let t = CoupledTrajectory::build(shape, &model, &mut stream(SEED, family, 0, j), TrajectoryMode::Incremental);
                t.passage()[k] as f64
            })
            .collect()
    };
    let (a, b) = (sample(6), sample(7));
    let (d, p) = common::ks_two_sample(&a, &b);
    assert!(p > 1e-3, "KS D = {d}, p = {p}");
    let mut counts = [0u64; 4];
    for &l in &a {
        counts[l as usize] += 1;
    }
    let test = chi_square_gof(&counts, &exact_conditional_law(k as u32));
    assert!(test.p_value > 1e-3, "{test:?}");
}

#[test]
fn incremental_equals_full_and_steps_are_bounded() {
    let model = WeightModel::new(&[(0.0, 0.2), (0.5, 0.3), (1.0, 0.25), (1.5, 0.25)], 0.5).unwrap();
    let c = model.max_scaled();
    let mut shape_rng = stream(SEED, 8, 0, 0);
    for j in 0..100 {
        let shape = GridShape::new(shape_rng.random_range(1..=64), shape_rng.random_range(1..=8)).unwrap();
        let full = CoupledTrajectory::build(shape, &model, &mut stream(SEED, 9, 0, j), TrajectoryMode::FullRecompute);
        let inc = CoupledTrajectory::build(shape, &model, &mut stream(SEED, 9, 0, j), TrajectoryMode::Incremental);
        assert_eq!(full.passage(), inc.passage());
        assert_eq!(full.hi_max(), inc.hi_max());
        for step in inc.passage().windows(2) {
            assert!((0..=c).contains(&(step[1] - step[0])));
        }
        let all_hi = inc.grid_at(shape.sites());
        assert_eq!(all_hi.hi_count(), shape.sites());
        assert_eq!(*inc.passage().last().unwrap(), last_passage_value(&all_hi));
        let k = shape_rng.random_range(0..=shape.sites());
        assert_eq!(inc.passage()[k], last_passage_value(&inc.grid_at(k)));
    }
}

/// Exact `E(L(k+1) − L(k) | W^k)`: average over the remaining lo sites of
/// the expected gain from a hi draw there.
fn exact_increment(traj: &CoupledTrajectory, k: usize) -> f64 {
    let model = traj.model();
    let grid = traj.grid_at(k);
    let result = last_passage(&grid);
    let hi_atoms: Vec<(i64, f64)> = model
        .atoms()
        .iter()
        .filter(|(v, _)| *v > model.threshold())
        .map(|&(v, q)| ((v * model.scale() as f64).round() as i64, q / model.p()))
        .collect();
    let lo_sites = &traj.flip_order()[k..];
    let total: f64 = lo_sites
        .iter()
        .map(|&site| {
            let through = result.through(&grid, site) - grid.weights()[site];
            hi_atoms
                .iter()
                .map(|&(h, q)| q * model.to_real((through + h).max(result.value()) - result.value()))
                .sum::<f64>()
        })
        .sum();
    total / lo_sites.len() as f64
}

#[test]
fn increment_mean_respects_its_lower_bound() {
    let model = WeightModel::two_point(0.5).unwrap();
    let shape = GridShape::new(16, 4).unwrap();
    let mut below_3_sigma = 0;
    for j in 0..1000 {
        let mut rng = stream(SEED, 10, 0, j);
        let traj = CoupledTrajectory::build(shape, &model, &mut rng, TrajectoryMode::Incremental);
        let k = rng.random_range(0..shape.sites());
        let check = traj.increment_conditional_mean(k, 400, &mut rng).unwrap();
        assert_eq!(check.hi_max, traj.hi_max()[k]);
        let exact = exact_increment(&traj, k);
        // The bound itself holds exactly; the Monte Carlo mean tracks the
        // exact value within its error bar.
        assert!(exact >= check.bound - 1e-12, "{check:?} exact {exact}");
        assert!((check.mean - exact).abs() <= 5.0 * check.std_error.max(1e-3), "{check:?} exact {exact}");
        if check.mean < check.bound - 3.0 * check.std_error {
            below_3_sigma += 1;
        }
    }
    // Where the bound is tight a one-sided 3σ miss has probability ≈ 0.00135
    // per check, so a handful in 1000 is expected noise.
    assert!(below_3_sigma <= 5, "{below_3_sigma} checks more than 3σ below the bound");
}

#[test]
fn single_row_increment_is_the_mode_gap() {
    let model = WeightModel::new(&[(0.0, 0.3), (1.0, 0.2), (3.0, 0.5)], 1.0).unwrap();
    let shape = GridShape::new(6, 1).unwrap();
    let traj = CoupledTrajectory::build(shape, &model, &mut stream(SEED, 11, 0, 0), TrajectoryMode::Incremental);
    for k in 0..6 {
        // Every lo site is on the unique path, so the gain is E(w|hi) minus
        // the average current lo value.
        let lo_mean = traj.flip_order()[k..]
            .iter()
            .map(|&site| model.to_real(traj.lo_values()[site]))
            .sum::<f64>()
            / (6 - k) as f64;
        let gap = model.mean_hi() - lo_mean;
        assert!((exact_increment(&traj, k) - gap).abs() < 1e-12);
        let check = traj.increment_conditional_mean(k, 20_000, &mut stream(SEED, 12, k as u64, 0)).unwrap();
        assert!((check.mean - gap).abs() < 5.0 * check.std_error + 1e-9, "{check:?} vs {gap}");
        assert!(gap >= check.bound);
    }
    assert!(traj.increment_conditional_mean(6, 10, &mut stream(SEED, 12, 9, 0)).is_err());
}

#[test]
fn trajectory_export_round_trips() {
    let model = WeightModel::two_point(0.5).unwrap();
    let shape = GridShape::thin(64, 0.25).unwrap();
    let traj = CoupledTrajectory::build(shape, &model, &mut stream(SEED, 13, 0, 0), TrajectoryMode::Incremental);
    let table = TrajectoryTable::new(&traj, &LipschitzConstants::defaults(&model));
    assert_eq!(table.rows.len(), shape.sites() + 1);
    let parsed = TrajectoryTable::parse(&table.to_text()).unwrap();
    assert_eq!(parsed, table);
    // 64^{1/4} ≈ 2.83, so two rows and 128 sites at p = 1/2.
    assert_eq!(shape.rows(), 2);
    assert_eq!(parsed.header["window_center"], 64.0);
}

#[test]
fn direct_grid_agrees_with_coupled_mean() {
    // A cheap sanity cross-check beyond the exact 2×2 case.
    let model = WeightModel::two_point(0.5).unwrap();
    let shape = GridShape::new(8, 3).unwrap();
    let reps = 20_000;
    let (mut coupled, mut direct) = (0.0, 0.0);
    for j in 0..reps {
        let mut rng = stream(SEED, 14, 0, j);
        let t = CoupledTrajectory::build(shape, &model, &mut rng, TrajectoryMode::Incremental);
        coupled += t.evaluate_at_n(&mut rng).1 as f64;
        direct += last_passage_value(&WeightGrid::sample(shape, &model, &mut rng)) as f64;
    }
    let diff = (coupled - direct) / reps as f64;
    assert!(diff.abs() < 0.05, "mean difference {diff}");
}
