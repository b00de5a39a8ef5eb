//! Plain-text tables for `dlpp run` and `dlpp lipschitz`.

use dlpp::experiments::{Results, Summary};

pub fn print_summary(summary: &Summary) {
    println!(
        "{} | alpha = {} | p = {} | {} replicates per size | spec {}",
        summary.kind.name(),
        summary.alpha,
        summary.p,
        summary.replicates,
        &summary.spec_hash[..12.min(summary.spec_hash.len())]
    );
    println!();
    match &summary.results {
        Results::MomentScaling { sizes, fits } => {
            let orders: Vec<f64> = fits.iter().map(|f| f.fit.r).collect();
            print!("{:>8} {:>5} {:>12} {:>10}", "n", "rows", "E L", "E M/n");
            for r in &orders {
                print!(" {:>22}", format!("M_{r} (stderr)"));
            }
            println!();
            for size in sizes {
                print!(
                    "{:>8} {:>5} {:>12.3} {:>10.4}",
                    size.n,
                    size.rows,
                    size.mean_l,
                    size.mean_m / size.n as f64
                );
                for m in &size.moments {
                    print!(" {:>22}", format!("{:.4} ({:.4})", m.moment, m.stderr));
                }
                println!();
            }
            println!();
            println!(
                "{:>4} {:>9} {:>20} {:>10} {:>13} {:>7}",
                "r", "slope", "95% CI", "target", "universality", "R^2"
            );
            for f in fits {
                println!(
                    "{:>4} {:>9.4} {:>20} {:>10.4} {:>13.4} {:>7.4}",
                    f.fit.r,
                    f.fit.slope,
                    format!("[{:.4}, {:.4}]", f.fit.slope_ci.0, f.fit.slope_ci.1),
                    f.target_slope,
                    f.universality_slope,
                    f.fit.r_squared
                );
                if !f.fit.dropped.is_empty() {
                    println!("     dropped sizes with zero moment: {:?}", f.fit.dropped);
                }
            }
        }
        Results::CouplingCheck { sizes } => {
            println!(
                "{:>8} {:>5} {:>12} {:>12} {:>10} {:>10} {:>10}",
                "n", "rows", "E L coupled", "E L direct", "var c", "var d", "chi2 p"
            );
            for s in sizes {
                println!(
                    "{:>8} {:>5} {:>12.3} {:>12.3} {:>10.3} {:>10.3} {:>10.4}",
                    s.n, s.rows, s.mean_coupled, s.mean_direct, s.var_coupled, s.var_direct, s.homogeneity.p_value
                );
            }
        }
        Results::MnGrowth { c1, points, decay_rate } => {
            println!("threshold M_n >= {c1:.4} n");
            println!(
                "{:>8} {:>5} {:>8} {:>8} {:>12} {:>22}",
                "n", "rows", "exceed", "trials", "frequency", "Wilson 95%"
            );
            for p in points {
                let freq = if p.upper_bound_only {
                    format!("< {:.2e}", 1.0 / p.trials as f64)
                } else {
                    format!("{:.3e}", p.frequency)
                };
                println!(
                    "{:>8} {:>5} {:>8} {:>8} {:>12} {:>22}",
                    p.n,
                    p.rows,
                    p.exceed,
                    p.trials,
                    freq,
                    format!("[{:.2e}, {:.2e}]", p.wilson.0, p.wilson.1)
                );
            }
            match decay_rate {
                Some(rate) => println!("decay rate of ln P in n: {rate:.5}"),
                None => println!("decay rate: fewer than two positive frequencies"),
            }
        }
        Results::LipschitzFrequency { constants, points } => {
            println!(
                "epsilon = {:.4}, c1 = {:.4}, c5 = {:.4}, c_ell = {:.4}",
                constants.epsilon, constants.c1, constants.c5, constants.c_ell
            );
            println!(
                "{:>8} {:>5} {:>9} {:>9} {:>8} {:>8} {:>18} {:>8} {:>10}",
                "n", "rows", "gap", "slope", "trials", "O_n", "Wilson 95%", "A_n", "viol/traj"
            );
            for p in points {
                println!(
                    "{:>8} {:>5} {:>9.3} {:>9.5} {:>8} {:>8.4} {:>18} {:>8.4} {:>10.2}",
                    p.n,
                    p.rows,
                    p.gap,
                    p.slope,
                    p.trials,
                    p.o_n_frequency,
                    format!("[{:.3}, {:.3}]", p.o_n_wilson.0, p.o_n_wilson.1),
                    p.a_n_frequency,
                    p.mean_violations
                );
            }
        }
        Results::CylinderVariance { sizes } => {
            for s in sizes {
                println!(
                    "n = {}, rows = {}: E L = {:.3}, Var L = {:.3}, order violations {}",
                    s.n, s.rows, s.mean_l, s.var_l, s.order_violations
                );
                println!(
                    "{:>8} {:>10} {:>10} {:>10} {:>10} {:>24}",
                    "width", "E L~", "Var L~", "stderr", "P(L~<L)", "sandwich"
                );
                for w in &s.widths {
                    println!(
                        "{:>8} {:>10.3} {:>10.3} {:>10.3} {:>10.4} {:>24}",
                        w.width,
                        w.mean,
                        w.var,
                        w.var_stderr,
                        w.prob_below,
                        format!("[{:.1}, {:.1}]", w.sandwich_lower, w.sandwich_upper)
                    );
                }
            }
        }
        Results::ShapeCurve { points } => {
            println!("{:>8} {:>6} {:>10} {:>12} {:>12}", "n", "rows", "aspect", "M/n", "formula");
            for p in points {
                println!(
                    "{:>8} {:>6} {:>10.4} {:>12.4} {:>12.4}",
                    p.n, p.rows, p.aspect, p.empirical, p.formula
                );
            }
        }
    }
    if !summary.checks.is_empty() {
        println!();
        for c in &summary.checks {
            println!(
                "{} {}: {} (value {:.4}, threshold {:.4})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail,
                c.value,
                c.threshold
            );
        }
    }
}
