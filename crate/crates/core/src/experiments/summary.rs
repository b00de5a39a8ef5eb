use serde::{Deserialize, Serialize};

use super::replicate::{Outcome, ReplicateRow};
use super::spec::{
    ExperimentKind, ExperimentSpec, DEFAULT_MAX_FINAL_FREQUENCY, DEFAULT_MIN_ON_FREQUENCY,
    DEFAULT_MIN_P_VALUE, DEFAULT_SLOPE_TOLERANCE,
};
use crate::coupling::LipschitzConstants;
use crate::error::Result;
use crate::estimation::{
    central_moment, chi_square_homogeneity, fit_exponent, linear_fit, plug_in_moment,
    shape_function_estimate, target_slope, universality_slope, wilson_interval, ChiSquareTest,
    ExponentFit, MomentEstimate, MomentRecord,
};
use crate::stream::{domain, stream};

pub const SOFTWARE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One pass/fail line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn at_least(name: impl Into<String>, value: f64, threshold: f64, detail: String) -> Self {
        Check {
            name: name.into(),
            passed: value >= threshold,
            value,
            threshold,
            detail,
        }
    }

    fn below(name: impl Into<String>, value: f64, threshold: f64, detail: String) -> Self {
        Check {
            name: name.into(),
            passed: value < threshold,
            value,
            threshold,
            detail,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSize {
    pub n: usize,
    pub rows: usize,
    pub mean_l: f64,
    pub mean_m: f64,
    pub moments: Vec<MomentRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub target_slope: f64,
    pub universality_slope: f64,
    pub fit: ExponentFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSize {
    pub n: usize,
    pub rows: usize,
    pub mean_coupled: f64,
    pub mean_direct: f64,
    pub var_coupled: f64,
    pub var_direct: f64,
    pub homogeneity: ChiSquareTest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub n: usize,
    pub rows: usize,
    pub exceed: u64,
    pub trials: u64,
    pub frequency: f64,
    pub wilson: (f64, f64),
    /// No exceedance observed; the frequency is only known to be `< 1/trials`.
    pub upper_bound_only: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPoint {
    pub n: usize,
    pub rows: usize,
    pub gap: f64,
    pub slope: f64,
    pub trials: u64,
    pub o_n_frequency: f64,
    pub o_n_wilson: (f64, f64),
    pub a_n_frequency: f64,
    pub mean_violations: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderWidth {
    pub width: usize,
    pub mean: f64,
    pub var: f64,
    pub var_stderr: f64,
    /// `P̂(L̃ < L)`.
    pub prob_below: f64,
    /// `Var L̃ − 8n²·P̂(L̃ < L) − (Ê L − Ê L̃)²`.
    pub sandwich_lower: f64,
    /// `Var L̃ + 8n²·P̂(L̃ < L) − (Ê L − Ê L̃)²`.
    pub sandwich_upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderSize {
    pub n: usize,
    pub rows: usize,
    pub mean_l: f64,
    pub var_l: f64,
    /// Samples with `L̃ > L`; always 0.
    pub order_violations: u64,
    pub widths: Vec<CylinderWidth>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapePoint {
    pub n: usize,
    pub rows: usize,
    pub aspect: f64,
    pub empirical: f64,
    pub formula: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Results {
    MomentScaling {
        sizes: Vec<MomentSize>,
        fits: Vec<FitSummary>,
    },
    CouplingCheck {
        sizes: Vec<CouplingSize>,
    },
    MnGrowth {
        c1: f64,
        points: Vec<DecayPoint>,
        /// `−slope` of `ln P̂` against `n` over points with a positive
        /// frequency, when at least two exist.
        decay_rate: Option<f64>,
    },
    LipschitzFrequency {
        constants: LipschitzConstants,
        points: Vec<FrequencyPoint>,
    },
    CylinderVariance {
        sizes: Vec<CylinderSize>,
    },
    ShapeCurve {
        points: Vec<ShapePoint>,
    },
}

/// Derived summary; a pure function of the spec and its replicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub spec_hash: String,
    pub software_version: String,
    pub kind: ExperimentKind,
    pub alpha: f64,
    pub p: f64,
    pub replicates: usize,
    pub results: Results,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("summary serializes");
        text.push('\n');
        text
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Builds the summary. `rows` must be sorted by `(i, j)` and complete.
pub fn summarize(spec: &ExperimentSpec, rows: &[ReplicateRow]) -> Result<Summary> {
    let by_size: Vec<&[ReplicateRow]> = rows.chunks(spec.replicates).collect();
    let mut checks = Vec::new();
    let results = match spec.kind {
        ExperimentKind::MomentScaling => moment_scaling(spec, &by_size, &mut checks)?,
        ExperimentKind::CouplingCheck => coupling_check(spec, &by_size, &mut checks),
        ExperimentKind::MnGrowth => mn_growth(spec, &by_size, &mut checks),
        ExperimentKind::LipschitzFrequency => lipschitz(spec, &by_size, &mut checks),
        ExperimentKind::CylinderVariance => cylinder(spec, &by_size, &mut checks)?,
        ExperimentKind::ShapeCurve => shape_curve(spec, &by_size, &mut checks),
    };
    Ok(Summary {
        spec_hash: spec.hash(),
        software_version: SOFTWARE_VERSION.to_string(),
        kind: spec.kind,
        alpha: spec.alpha,
        p: spec.model.p(),
        replicates: spec.replicates,
        results,
        checks,
    })
}

fn moment_scaling(
    spec: &ExperimentSpec,
    by_size: &[&[ReplicateRow]],
    checks: &mut Vec<Check>,
) -> Result<Results> {
    let bootstrap = spec.constants.bootstrap();
    let mut sizes = Vec::new();
    let mut per_r: Vec<Vec<(usize, MomentEstimate)>> = vec![Vec::new(); spec.r.len()];
    for (i, rows) in by_size.iter().enumerate() {
        let (mut ls, mut ms) = (Vec::new(), Vec::new());
        for row in rows.iter() {
            if let Outcome::MomentScaling { l, m } = row.outcome {
                ls.push(l);
                ms.push(m as f64);
            }
        }
        let n = spec.n[i];
        let mut moments = Vec::new();
        for (ri, &r) in spec.r.iter().enumerate() {
            let mut rng = stream(spec.seed, domain::BOOTSTRAP, i as u64, ri as u64);
            let est = central_moment(&ls, r, bootstrap, &mut rng)?;
            moments.push(MomentRecord::new(n, spec.alpha, &est, None));
            per_r[ri].push((n, est));
        }
        sizes.push(MomentSize {
            n,
            rows: spec.shape(i).rows(),
            mean_l: mean(&ls),
            mean_m: mean(&ms),
            moments,
        });
    }
    let tolerance = spec.constants.slope_tolerance.unwrap_or(DEFAULT_SLOPE_TOLERANCE);
    let mut fits = Vec::new();
    for (ri, &r) in spec.r.iter().enumerate() {
        let mut rng = stream(spec.seed, domain::FIT, ri as u64, 0);
        let fit = fit_exponent(&per_r[ri], spec.constants.fit_resamples(), &mut rng)?;
        let target = target_slope(r, spec.alpha);
        checks.push(Check::at_least(
            format!("slope_r{r}"),
            fit.slope,
            target - tolerance,
            format!(
                "log-log slope of M_{r} is {:.4} (95% CI {:.4}..{:.4}); lower-bound target {target:.4}",
                fit.slope, fit.slope_ci.0, fit.slope_ci.1
            ),
        ));
        fits.push(FitSummary {
            target_slope: target,
            universality_slope: universality_slope(r, spec.alpha),
            fit,
        });
    }
    Ok(Results::MomentScaling { sizes, fits })
}

fn histogram(values: &[f64], support: &[f64]) -> Vec<u64> {
    let mut counts = vec![0u64; support.len()];
    for v in values {
        let k = support.binary_search_by(|s| s.total_cmp(v)).expect("value in support");
        counts[k] += 1;
    }
    counts
}

fn coupling_check(
    spec: &ExperimentSpec,
    by_size: &[&[ReplicateRow]],
    checks: &mut Vec<Check>,
) -> Results {
    let min_p = spec.constants.min_p_value.unwrap_or(DEFAULT_MIN_P_VALUE);
    let mut sizes = Vec::new();
    for (i, rows) in by_size.iter().enumerate() {
        let (mut coupled, mut direct) = (Vec::new(), Vec::new());
        for row in rows.iter() {
            if let Outcome::CouplingCheck {
                coupled: c,
                direct: d,
                ..
            } = row.outcome
            {
                coupled.push(c);
                direct.push(d);
            }
        }
        let mut support: Vec<f64> = coupled.iter().chain(&direct).copied().collect();
        support.sort_by(f64::total_cmp);
        support.dedup();
        let homogeneity =
            chi_square_homogeneity(&histogram(&coupled, &support), &histogram(&direct, &support));
        let n = spec.n[i];
        checks.push(Check::at_least(
            format!("coupling_law_n{n}"),
            homogeneity.p_value,
            min_p,
            format!(
                "chi-square {:.3} on {} dof: L(N) vs directly sampled L",
                homogeneity.statistic, homogeneity.dof
            ),
        ));
        sizes.push(CouplingSize {
            n,
            rows: spec.shape(i).rows(),
            mean_coupled: mean(&coupled),
            mean_direct: mean(&direct),
            var_coupled: plug_in_moment(&coupled, 2.0).1,
            var_direct: plug_in_moment(&direct, 2.0).1,
            homogeneity,
        });
    }
    Results::CouplingCheck { sizes }
}

fn mn_growth(spec: &ExperimentSpec, by_size: &[&[ReplicateRow]], checks: &mut Vec<Check>) -> Results {
    let c1 = LipschitzConstants::resolve(&spec.model, &spec.constants.lipschitz())
        .expect("validated")
        .c1;
    let mut points = Vec::new();
    for (i, rows) in by_size.iter().enumerate() {
        let n = spec.n[i];
        let limit = c1 * n as f64;
        let exceed = rows
            .iter()
            .filter(|row| matches!(row.outcome, Outcome::MnGrowth { m } if m as f64 >= limit))
            .count() as u64;
        let trials = rows.len() as u64;
        points.push(DecayPoint {
            n,
            rows: spec.shape(i).rows(),
            exceed,
            trials,
            frequency: exceed as f64 / trials as f64,
            wilson: wilson_interval(exceed, trials, 1.96),
            upper_bound_only: exceed == 0,
        });
    }
    let positive: Vec<&DecayPoint> = points.iter().filter(|p| p.exceed > 0).collect();
    let decay_rate = (positive.len() >= 2).then(|| {
        let x: Vec<f64> = positive.iter().map(|p| p.n as f64).collect();
        let y: Vec<f64> = positive.iter().map(|p| p.frequency.ln()).collect();
        -linear_fit(&x, &y).0
    });

    let worst_rise = points
        .windows(2)
        .map(|w| w[1].wilson.0 - w[0].wilson.1)
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check {
        name: "decay_non_increasing".into(),
        passed: points.len() < 2 || worst_rise <= 0.0,
        value: worst_rise.max(-1.0),
        threshold: 0.0,
        detail: "largest gap between a Wilson lower bound and the previous size's upper bound".into(),
    });
    let last = points.last().expect("non-empty n list");
    let max_final = spec
        .constants
        .max_final_frequency
        .unwrap_or(DEFAULT_MAX_FINAL_FREQUENCY);
    checks.push(Check::below(
        "final_frequency",
        last.frequency,
        max_final,
        format!(
            "P(M_n >= {c1}·n) at n = {} is {}/{}",
            last.n, last.exceed, last.trials
        ),
    ));
    Results::MnGrowth {
        c1,
        points,
        decay_rate,
    }
}

fn lipschitz(spec: &ExperimentSpec, by_size: &[&[ReplicateRow]], checks: &mut Vec<Check>) -> Results {
    let constants =
        LipschitzConstants::resolve(&spec.model, &spec.constants.lipschitz()).expect("validated");
    let mut points = Vec::new();
    for (i, rows) in by_size.iter().enumerate() {
        let shape = spec.shape(i);
        let (mut on, mut an, mut violations) = (0u64, 0u64, 0usize);
        for row in rows.iter() {
            if let Outcome::LipschitzFrequency {
                o_n,
                a_n,
                violations: v,
            } = row.outcome
            {
                on += u64::from(o_n);
                an += u64::from(a_n);
                violations += v;
            }
        }
        let trials = rows.len() as u64;
        points.push(FrequencyPoint {
            n: spec.n[i],
            rows: shape.rows(),
            gap: constants.gap(shape),
            slope: constants.c5 / shape.rows() as f64,
            trials,
            o_n_frequency: on as f64 / trials as f64,
            o_n_wilson: wilson_interval(on, trials, 1.96),
            a_n_frequency: an as f64 / trials as f64,
            mean_violations: violations as f64 / trials as f64,
        });
    }
    let last = points.last().expect("non-empty n list");
    let min_on = spec.constants.min_on_frequency.unwrap_or(DEFAULT_MIN_ON_FREQUENCY);
    checks.push(Check::at_least(
        "o_n_frequency",
        last.o_n_frequency,
        min_on,
        format!("reversed Lipschitz event held in {}/{} trajectories at n = {}",
            (last.o_n_frequency * last.trials as f64).round(), last.trials, last.n),
    ));
    Results::LipschitzFrequency { constants, points }
}

fn cylinder(
    spec: &ExperimentSpec,
    by_size: &[&[ReplicateRow]],
    checks: &mut Vec<Check>,
) -> Result<Results> {
    let bootstrap = spec.constants.bootstrap();
    let mut sizes = Vec::new();
    let (mut total_violations, mut full_width_exact, mut worst_drop) = (0u64, true, f64::NEG_INFINITY);
    for (i, rows) in by_size.iter().enumerate() {
        let shape = spec.shape(i);
        let widths = spec.constants.widths(shape.rows());
        let mut ls = Vec::new();
        let mut restricted: Vec<Vec<f64>> = vec![Vec::new(); widths.len()];
        for row in rows.iter() {
            if let Outcome::CylinderVariance { l, cylinder } = &row.outcome {
                ls.push(*l);
                for (slot, &v) in restricted.iter_mut().zip(cylinder) {
                    slot.push(v);
                }
            }
        }
        let (mean_l, var_l) = plug_in_moment(&ls, 2.0);
        let n = spec.n[i];
        let mut order_violations = 0u64;
        let mut entries: Vec<CylinderWidth> = Vec::new();
        for (wi, (&width, values)) in widths.iter().zip(&restricted).enumerate() {
            let mut rng = stream(spec.seed, domain::BOOTSTRAP, i as u64, wi as u64);
            let est = central_moment(values, 2.0, bootstrap, &mut rng)?;
            let below = values.iter().zip(&ls).filter(|(t, l)| t < l).count();
            order_violations += values.iter().zip(&ls).filter(|(t, l)| t > l).count() as u64;
            let prob_below = below as f64 / values.len() as f64;
            let shift = (mean_l - est.mean).powi(2);
            let slack = 8.0 * (n as f64).powi(2) * prob_below;
            if width >= shape.rows() && (est.moment != var_l || est.mean != mean_l) {
                full_width_exact = false;
            }
            entries.push(CylinderWidth {
                width,
                mean: est.mean,
                var: est.moment,
                var_stderr: est.stderr,
                prob_below,
                sandwich_lower: est.moment - slack - shift,
                sandwich_upper: est.moment + slack - shift,
            });
        }
        for pair in entries.windows(2) {
            let allowed = 2.0 * pair[0].var_stderr.hypot(pair[1].var_stderr);
            worst_drop = worst_drop.max(pair[0].var - pair[1].var - allowed);
        }
        total_violations += order_violations;
        sizes.push(CylinderSize {
            n,
            rows: shape.rows(),
            mean_l,
            var_l,
            order_violations,
            widths: entries,
        });
    }
    checks.push(Check {
        name: "cylinder_below_full".into(),
        passed: total_violations == 0,
        value: total_violations as f64,
        threshold: 0.0,
        detail: "samples with restricted passage time above the unrestricted one".into(),
    });
    checks.push(Check {
        name: "full_width_variance_exact".into(),
        passed: full_width_exact,
        value: f64::from(u8::from(full_width_exact)),
        threshold: 1.0,
        detail: "variance at width >= rows equals the unrestricted variance bit-for-bit".into(),
    });
    checks.push(Check {
        name: "variance_monotone_in_width".into(),
        passed: worst_drop <= 0.0,
        value: worst_drop.max(-1e300),
        threshold: 0.0,
        detail: "largest variance drop between consecutive widths beyond 2 combined stderr".into(),
    });
    Ok(Results::CylinderVariance { sizes })
}

fn shape_curve(spec: &ExperimentSpec, by_size: &[&[ReplicateRow]], checks: &mut Vec<Check>) -> Results {
    let p = spec.model.p();
    let mut points = Vec::new();
    for (i, rows) in by_size.iter().enumerate() {
        let shape = spec.shape(i);
        let n = spec.n[i];
        let total: i64 = rows
            .iter()
            .map(|row| match row.outcome {
                Outcome::ShapeCurve { m } => m,
                _ => 0,
            })
            .sum();
        let aspect = shape.rows() as f64 / n as f64;
        let empirical = total as f64 / rows.len() as f64 / n as f64;
        let formula = shape_function_estimate(p, aspect).expect("aspect in (0, 1]");
        let band = (p * (1.0 - p) * aspect).sqrt();
        checks.push(Check {
            name: format!("shape_band_n{n}"),
            passed: (empirical - formula).abs() <= band,
            value: empirical,
            threshold: formula,
            detail: format!("empirical M/n within ±{band:.4} of p + 2√(p(1−p)a)"),
        });
        points.push(ShapePoint {
            n,
            rows: shape.rows(),
            aspect,
            empirical,
            formula,
        });
    }
    Results::ShapeCurve { points }
}
