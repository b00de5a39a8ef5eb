//! Central moments with bootstrap errors, log-log exponent fits, the
//! binomial window around `E N`, and the thin-rectangle shape function.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::distributions::WeightModel;
use crate::error::{Error, Result};
use crate::lattice::{hi_mode_max, GridShape, WeightGrid};
use crate::stream::{domain, stream};

/// `Φ(1) − Φ(−1)`.
pub const ONE_SIGMA_MASS: f64 = 0.682_689_492_137_085_9;

/// Slope of `log 𝕄_r` against `log n` predicted by the lower bound, `r(1−α)/2`.
pub fn target_slope(r: f64, alpha: f64) -> f64 {
    r * (1.0 - alpha) / 2.0
}

/// Tracy–Widom reference slope `r(1/2 − α/6)` for thin rectangles.
pub fn universality_slope(r: f64, alpha: f64) -> f64 {
    r * (0.5 - alpha / 6.0)
}

fn abs_pow(x: f64, r: f64) -> f64 {
    if r.fract() == 0.0 && r <= i32::MAX as f64 {
        x.abs().powi(r as i32)
    } else {
        x.abs().powf(r)
    }
}

/// Plug-in `(mean, (1/S)·Σ|x − mean|^r)`.
pub fn plug_in_moment(samples: &[f64], r: f64) -> (f64, f64) {
    let s = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / s;
    let moment = samples.iter().map(|&x| abs_pow(x - mean, r)).sum::<f64>() / s;
    (mean, moment)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub r: f64,
    pub sample_count: usize,
    pub mean: f64,
    /// `𝕄̂_r = (1/S)·Σ|x_s − mean|^r`.
    pub moment: f64,
    /// Standard deviation of the moment over bootstrap resamples; 0 when
    /// no resampling was requested.
    pub stderr: f64,
    pub bootstrap_resamples: usize,
}

/// Plug-in central moment with a bootstrap standard error from `bootstrap`
/// resamples of the full sample.
pub fn central_moment<R: Rng + ?Sized>(
    samples: &[f64],
    r: f64,
    bootstrap: usize,
    rng: &mut R,
) -> Result<MomentEstimate> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("moment order r = {r} must be ≥ 1")));
    }
    let (mean, moment) = plug_in_moment(samples, r);
    let stderr = if bootstrap >= 2 {
        let mut resample = vec![0.0; samples.len()];
        let replicates: Vec<f64> = (0..bootstrap)
            .map(|_| {
                for slot in resample.iter_mut() {
                    *slot = samples[rng.random_range(0..samples.len())];
                }
                plug_in_moment(&resample, r).1
            })
            .collect();
        sample_std(&replicates)
    } else {
        0.0
    };
    Ok(MomentEstimate {
        r,
        sample_count: samples.len(),
        mean,
        moment,
        stderr,
        bootstrap_resamples: if bootstrap >= 2 { bootstrap } else { 0 },
    })
}

fn sample_std(values: &[f64]) -> f64 {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (k - 1.0)).sqrt()
}

/// Persisted form of a moment estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRecord {
    pub n: usize,
    pub alpha: f64,
    pub r: f64,
    pub moment: f64,
    pub stderr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
}

impl MomentRecord {
    pub fn new(n: usize, alpha: f64, estimate: &MomentEstimate, samples: Option<Vec<f64>>) -> Self {
        MomentRecord {
            n,
            alpha,
            r: estimate.r,
            moment: estimate.moment,
            stderr: estimate.stderr,
            samples,
        }
    }
}

/// Ordinary least squares `y = slope·x + intercept`, with `R²`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        let sse: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let e = b - (slope * a + intercept);
                e * e
            })
            .sum();
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    (slope, intercept, r2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub n: usize,
    pub log_n: f64,
    pub log_moment: f64,
    /// `log 𝕄̂_r^{1/r}`.
    pub log_root: f64,
    /// Standard error of `log 𝕄̂_r` (delta method).
    pub log_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub r: f64,
    pub points: Vec<FitPoint>,
    /// Slope of `log 𝕄̂_r` against `log n`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Slope of `log 𝕄̂_r^{1/r}`, i.e. `slope / r`.
    pub root_slope: f64,
    /// 95% percentile interval of the slope over perturbed refits.
    pub slope_ci: (f64, f64),
    /// Grid sizes dropped because their moment estimate was not positive.
    pub dropped: Vec<usize>,
}

/// Fits `log 𝕄̂_r = slope·log n + intercept`.
///
/// The slope interval comes from `ci_resamples` refits in which every
/// `log 𝕄̂_r` is perturbed by a Gaussian with its delta-method standard error
/// `stderr / 𝕄̂_r`.
pub fn fit_exponent<R: Rng + ?Sized>(
    estimates: &[(usize, MomentEstimate)],
    ci_resamples: usize,
    rng: &mut R,
) -> Result<ExponentFit> {
    let r = estimates.first().map_or(1.0, |e| e.1.r);
    let mut dropped = Vec::new();
    let mut points: Vec<FitPoint> = Vec::new();
    for (n, est) in estimates {
        if !(est.moment > 0.0) || *n == 0 {
            dropped.push(*n);
            continue;
        }
        let log_moment = est.moment.ln();
        points.push(FitPoint {
            n: *n,
            log_n: (*n as f64).ln(),
            log_moment,
            log_root: log_moment / r,
            log_stderr: est.stderr / est.moment,
        });
    }
    let mut distinct: Vec<usize> = points.iter().map(|p| p.n).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::TooFewFitPoints(distinct.len()));
    }
    let x: Vec<f64> = points.iter().map(|p| p.log_n).collect();
    let y: Vec<f64> = points.iter().map(|p| p.log_moment).collect();
    let (slope, intercept, r_squared) = linear_fit(&x, &y);

    let mut slopes = Vec::with_capacity(ci_resamples);
    let mut perturbed = y.clone();
    for _ in 0..ci_resamples {
        for (slot, p) in perturbed.iter_mut().zip(&points) {
            let z: f64 = StandardNormal.sample(rng);
            *slot = p.log_moment + p.log_stderr * z;
        }
        slopes.push(linear_fit(&x, &perturbed).0);
    }
    let slope_ci = if slopes.is_empty() {
        (slope, slope)
    } else {
        slopes.sort_by(f64::total_cmp);
        (quantile(&slopes, 0.025), quantile(&slopes, 0.975))
    };

    Ok(ExponentFit {
        r,
        points,
        slope,
        intercept,
        r_squared,
        root_slope: slope / r,
        slope_ci,
        dropped,
    })
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// The open window `(rows·n·p − σ, rows·n·p + σ)` with `σ = √(p(1−p)·rows·n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowI {
    pub sites: usize,
    pub p: f64,
    pub center: f64,
    pub half_width: f64,
}

impl WindowI {
    pub fn new(shape: GridShape, model: &WeightModel) -> Result<Self> {
        Self::for_sites(shape.sites(), model.p())
    }

    /// Requires `sites·p(1−p) ≥ 1`.
    pub fn for_sites(sites: usize, p: f64) -> Result<Self> {
        let variance = sites as f64 * p * (1.0 - p);
        if !(variance >= 1.0) {
            return Err(Error::EmptyWindow { variance });
        }
        Ok(WindowI {
            sites,
            p,
            center: sites as f64 * p,
            half_width: variance.sqrt(),
        })
    }

    pub fn contains(&self, k: usize) -> bool {
        let k = k as f64;
        self.center - self.half_width < k && k < self.center + self.half_width
    }

    /// Smallest and largest integers of the window within `0..=max`.
    pub fn integer_range(&self, max: usize) -> Option<(usize, usize)> {
        let lo = ((self.center - self.half_width).floor() + 1.0).max(0.0) as usize;
        let hi_f = (self.center + self.half_width).ceil() - 1.0;
        if hi_f < 0.0 {
            return None;
        }
        let hi = (hi_f as usize).min(max);
        (lo <= hi).then_some((lo, hi))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub samples: usize,
    pub inside: usize,
    /// `P̂(N ∈ I)`.
    pub inside_fraction: f64,
    /// `Ê(N | N ∈ I)`.
    pub conditional_mean: f64,
    /// `|Ê(N | N ∈ I) − rows·n·p|`.
    pub mean_offset: f64,
    /// `𝕄̂_r(N | N ∈ I)`.
    pub conditional_moment: f64,
}

/// Conditional statistics of hi-site counts on the window.
pub fn window_stats(counts: &[u64], window: &WindowI, r: f64) -> Result<WindowStats> {
    let inside: Vec<f64> = counts
        .iter()
        .filter(|&&c| window.contains(c as usize))
        .map(|&c| c as f64)
        .collect();
    if inside.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let (conditional_mean, conditional_moment) = plug_in_moment(&inside, r);
    Ok(WindowStats {
        samples: counts.len(),
        inside: inside.len(),
        inside_fraction: inside.len() as f64 / counts.len() as f64,
        conditional_mean,
        mean_offset: (conditional_mean - window.center).abs(),
        conditional_moment,
    })
}

/// Small-aspect approximation `g((1, a)) ≈ p + 2√(p(1−p)a)` of the hi-count
/// shape function.
pub fn shape_function_estimate(p: f64, a: f64) -> Result<f64> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::InvalidArgument(format!("aspect a = {a} outside (0, 1]")));
    }
    Ok(p + 2.0 * (p * (1.0 - p) * a).sqrt())
}

/// `mean(M(n, ⌊n·a⌋)) / n` over `reps` grids; replicate `j` uses stream
/// `(seed, SHAPE_CURVE, n, j)`.
pub fn empirical_shape(n: usize, a: f64, model: &WeightModel, reps: usize, seed: u64) -> Result<f64> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::InvalidArgument(format!("aspect a = {a} outside (0, 1]")));
    }
    let rows = (n as f64 * a + 1e-9).floor() as usize;
    if rows < 1 {
        return Err(Error::InvalidShape(format!("⌊n·a⌋ = 0 for n = {n}, a = {a}")));
    }
    if reps == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let shape = GridShape::new(n, rows)?;
    let total: i64 = (0..reps)
        .map(|j| {
            let mut rng = stream(seed, domain::SHAPE_CURVE, n as u64, j as u64);
            hi_mode_max(&WeightGrid::sample(shape, model, &mut rng))
        })
        .sum();
    Ok(total as f64 / reps as f64 / n as f64)
}

/// Wilson score interval for a binomial proportion at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let t = trials as f64;
    let phat = successes as f64 / t;
    let z2 = z * z;
    let denom = 1.0 + z2 / t;
    let center = (phat + z2 / (2.0 * t)) / denom;
    let half = z * (phat * (1.0 - phat) / t + z2 / (4.0 * t * t)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn chi_square_p(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    dist.sf(statistic)
}

/// Groups category indices so that each group has expected count ≥ 5.
fn pool(expected: &[f64]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut pending: Vec<usize> = Vec::new();
    let mut pending_mass = 0.0;
    for (i, &e) in expected.iter().enumerate() {
        if e <= 0.0 {
            continue;
        }
        pending.push(i);
        pending_mass += e;
        if pending_mass >= 5.0 {
            groups.push(std::mem::take(&mut pending));
            pending_mass = 0.0;
        }
    }
    if !pending.is_empty() {
        match groups.last_mut() {
            Some(last) => last.extend(pending),
            None => groups.push(pending),
        }
    }
    groups
}

/// Pearson goodness-of-fit of `observed` counts against category
/// probabilities, pooling adjacent sparse categories.
pub fn chi_square_gof(observed: &[u64], probabilities: &[f64]) -> ChiSquareTest {
    let total: u64 = observed.iter().sum();
    let expected: Vec<f64> = probabilities.iter().map(|p| p * total as f64).collect();
    let groups = pool(&expected);
    let statistic = groups
        .iter()
        .map(|g| {
            let o: f64 = g.iter().map(|&i| observed[i] as f64).sum();
            let e: f64 = g.iter().map(|&i| expected[i]).sum();
            (o - e) * (o - e) / e
        })
        .sum();
    let dof = groups.len().saturating_sub(1);
    ChiSquareTest {
        statistic,
        dof,
        p_value: chi_square_p(statistic, dof),
    }
}

/// Pearson test that two count vectors over the same categories share one law.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> ChiSquareTest {
    let (ta, tb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let total = ta + tb;
    let pooled: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x + y) as f64 / total)
        .collect();
    let groups = pool(&pooled.iter().map(|q| q * ta.min(tb)).collect::<Vec<_>>());
    let mut statistic = 0.0;
    for g in &groups {
        let q: f64 = g.iter().map(|&i| pooled[i]).sum();
        let oa: f64 = g.iter().map(|&i| a[i] as f64).sum();
        let ob: f64 = g.iter().map(|&i| b[i] as f64).sum();
        let (ea, eb) = (q * ta, q * tb);
        statistic += (oa - ea) * (oa - ea) / ea + (ob - eb) * (ob - eb) / eb;
    }
    let dof = groups.len().saturating_sub(1);
    ChiSquareTest {
        statistic,
        dof,
        p_value: chi_square_p(statistic, dof),
    }
}
