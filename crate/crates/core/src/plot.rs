//! Standalone SVG plots of experiment records and trajectory exports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coupling::TrajectoryTable;
use crate::error::{Error, Result};
use crate::experiments::{load_summary, Results, Summary, SUMMARY_FILE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    LoglogMoments,
    Trajectory,
    DecayCurve,
    ShapeCurve,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotSpec {
    pub kind: PlotKind,
    /// A record directory or `summary.json` for record plots; a trajectory
    /// export for [`PlotKind::Trajectory`].
    pub input: PathBuf,
    pub output: PathBuf,
    /// Moment order to plot for [`PlotKind::LoglogMoments`]; the first
    /// order of the record when absent.
    pub r: Option<f64>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn fit(xs: &[f64], ys: &[f64]) -> Self {
        let span = |v: &[f64]| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let pad = if hi > lo { (hi - lo) * 0.06 } else { 0.5 };
            (lo - pad, hi + pad)
        };
        Axes {
            x: span(xs),
            y: span(ys),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

struct Svg {
    body: String,
}

impl Svg {
    fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        let mut body = String::new();
        let _ = write!(
            body,
            r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<style>.marker{{fill:#1f5fa8}}.upper-bound{{fill:none;stroke:#1f5fa8}}.ref-line{{stroke-width:1.5}}.fit{{stroke:#c0392b}}.target{{stroke:#555;stroke-dasharray:6 4}}.window{{fill:#f3d27a;fill-opacity:0.45}}.trajectory{{fill:none;stroke:#1f5fa8;stroke-width:1}}</style>
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="24" text-anchor="middle" font-size="14">{title}</text>
<line x1="{MARGIN}" y1="{}" x2="{}" y2="{}" stroke="black"/>
<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{}" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle">{x_label}</text>
<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{y_label}</text>
"##,
            WIDTH / 2.0,
            HEIGHT - MARGIN,
            WIDTH - MARGIN,
            HEIGHT - MARGIN,
            HEIGHT - MARGIN,
            WIDTH / 2.0,
            HEIGHT - 14.0,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
        );
        Svg { body }
    }

    fn ticks(&mut self, axes: &Axes, fmt_x: impl Fn(f64) -> String, fmt_y: impl Fn(f64) -> String) {
        for t in 0..=4 {
            let f = t as f64 / 4.0;
            let x = axes.x.0 + f * (axes.x.1 - axes.x.0);
            let y = axes.y.0 + f * (axes.y.1 - axes.y.0);
            let _ = writeln!(
                self.body,
                r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" fill="#444">{}</text>"##,
                axes.px(x),
                HEIGHT - MARGIN + 16.0,
                fmt_x(x)
            );
            let _ = writeln!(
                self.body,
                r##"<text x="{:.2}" y="{:.2}" text-anchor="end" fill="#444">{}</text>"##,
                MARGIN - 6.0,
                axes.py(y) + 4.0,
                fmt_y(y)
            );
        }
    }

    fn marker(&mut self, axes: &Axes, x: f64, y: f64) {
        let _ = writeln!(
            self.body,
            r#"<circle class="marker" cx="{:.2}" cy="{:.2}" r="4"/>"#,
            axes.px(x),
            axes.py(y)
        );
    }

    /// Downward triangle: the true value lies below.
    fn upper_bound(&mut self, axes: &Axes, x: f64, y: f64) {
        let (cx, cy) = (axes.px(x), axes.py(y));
        let _ = writeln!(
            self.body,
            r#"<path class="upper-bound" d="M {:.2} {:.2} L {:.2} {:.2} L {:.2} {:.2} Z"/>"#,
            cx - 5.0,
            cy - 4.0,
            cx + 5.0,
            cy - 4.0,
            cx,
            cy + 5.0
        );
    }

    fn line(&mut self, axes: &Axes, class: &str, (x1, y1): (f64, f64), (x2, y2): (f64, f64)) {
        let _ = writeln!(
            self.body,
            r#"<line class="ref-line {class}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
            axes.px(x1),
            axes.py(y1),
            axes.px(x2),
            axes.py(y2)
        );
    }

    fn legend(&mut self, lines: &[&str]) {
        for (i, text) in lines.iter().enumerate() {
            let _ = writeln!(
                self.body,
                r#"<text x="{:.2}" y="{:.2}">{text}</text>"#,
                MARGIN + 10.0,
                MARGIN + 14.0 + 16.0 * i as f64
            );
        }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn read_summary(input: &Path) -> Result<Summary> {
    if input.is_dir() {
        load_summary(input)
    } else if input.file_name().is_some_and(|f| f == SUMMARY_FILE) || input.extension().is_some_and(|e| e == "json") {
        let text = fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(input, e))
    } else {
        Err(Error::InvalidArgument(format!(
            "{} is neither a record directory nor a summary file",
            input.display()
        )))
    }
}

fn mismatch(summary: &Summary, plot: PlotKind) -> Error {
    Error::InvalidArgument(format!(
        "record kind {} cannot be drawn as {plot:?}",
        summary.kind.name()
    ))
}

/// Log-log moments with the fitted line and a guide of the target slope
/// through the first point.
pub fn loglog_svg(summary: &Summary, r: Option<f64>) -> Result<String> {
    let Results::MomentScaling { fits, .. } = &summary.results else {
        return Err(mismatch(summary, PlotKind::LoglogMoments));
    };
    let chosen = match r {
        Some(r) => fits.iter().find(|f| f.fit.r == r),
        None => fits.first(),
    }
    .ok_or_else(|| Error::InvalidArgument(format!("record has no fit for r = {r:?}")))?;
    let fit = &chosen.fit;
    let xs: Vec<f64> = fit.points.iter().map(|p| p.log_n).collect();
    let ys: Vec<f64> = fit.points.iter().map(|p| p.log_moment).collect();
    let (x0, x1) = (xs[0], xs[xs.len() - 1]);
    let guide = |x: f64| ys[0] + chosen.target_slope * (x - x0);
    let mut all_y = ys.clone();
    all_y.extend([guide(x1), fit.intercept + fit.slope * x0, fit.intercept + fit.slope * x1]);
    let axes = Axes::fit(&xs, &all_y);

    let mut svg = Svg::new(
        &format!("central moment of order {} vs n", fit.r),
        "ln n",
        &format!("ln M_{}", fit.r),
    );
    svg.ticks(&axes, |x| format!("{:.0}", x.exp()), |y| format!("{y:.2}"));
    svg.line(&axes, "fit", (x0, fit.intercept + fit.slope * x0), (x1, fit.intercept + fit.slope * x1));
    svg.line(&axes, "target", (x0, guide(x0)), (x1, guide(x1)));
    for (x, y) in xs.iter().zip(&ys) {
        svg.marker(&axes, *x, *y);
    }
    svg.legend(&[
        &format!("fitted slope {:.3} [{:.3}, {:.3}]", fit.slope, fit.slope_ci.0, fit.slope_ci.1),
        &format!("target slope r(1-a)/2 = {:.3}", chosen.target_slope),
    ]);
    Ok(svg.finish())
}

/// `k ↦ L(k)` with the window around `rows·n·p` shaded.
pub fn trajectory_svg(table: &TrajectoryTable) -> Result<String> {
    let xs: Vec<f64> = table.rows.iter().map(|r| r.0 as f64).collect();
    let ys: Vec<f64> = table.rows.iter().map(|r| r.1).collect();
    let axes = Axes::fit(&xs, &ys);
    let mut svg = Svg::new("passage time along the flipping sequence", "k (hi sites)", "L(k)");
    svg.ticks(&axes, |x| format!("{x:.0}"), |y| format!("{y:.1}"));
    if let (Some(&c), Some(&h)) = (
        table.header.get("window_center"),
        table.header.get("window_half_width"),
    ) {
        let (left, right) = (axes.px(c - h), axes.px(c + h));
        let _ = writeln!(
            svg.body,
            r#"<rect class="window" x="{left:.4}" y="{MARGIN}" width="{:.4}" height="{}" data-lo="{}" data-hi="{}"/>"#,
            right - left,
            HEIGHT - 2.0 * MARGIN,
            c - h,
            c + h
        );
    }
    let mut points = String::new();
    for (x, y) in xs.iter().zip(&ys) {
        let _ = write!(points, "{:.2},{:.2} ", axes.px(*x), axes.py(*y));
    }
    let _ = writeln!(svg.body, r#"<polyline class="trajectory" points="{}"/>"#, points.trim_end());
    Ok(svg.finish())
}

/// `P̂(M_n ≥ c₁n)` against `n` on a log scale; zero frequencies are drawn
/// as upper-bound markers at `1/trials`.
pub fn decay_svg(summary: &Summary) -> Result<String> {
    let Results::MnGrowth { c1, points, decay_rate } = &summary.results else {
        return Err(mismatch(summary, PlotKind::DecayCurve));
    };
    let value = |p: &crate::experiments::DecayPoint| {
        if p.exceed == 0 {
            (1.0 / p.trials as f64).log10()
        } else {
            p.frequency.log10()
        }
    };
    let xs: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let ys: Vec<f64> = points.iter().map(value).collect();
    let axes = Axes::fit(&xs, &ys);
    let mut svg = Svg::new(&format!("P(M_n >= {c1} n)"), "n", "log10 frequency");
    svg.ticks(&axes, |x| format!("{x:.0}"), |y| format!("{y:.1}"));
    for (p, (x, y)) in points.iter().zip(xs.iter().zip(&ys)) {
        if p.upper_bound_only {
            svg.upper_bound(&axes, *x, *y);
        } else {
            svg.marker(&axes, *x, *y);
        }
    }
    if let Some(rate) = decay_rate {
        svg.legend(&[&format!("fitted decay rate {rate:.4} per unit n")]);
    }
    Ok(svg.finish())
}

/// Empirical `M/n` against the aspect ratio, with the small-aspect formula.
pub fn shape_svg(summary: &Summary) -> Result<String> {
    let Results::ShapeCurve { points } = &summary.results else {
        return Err(mismatch(summary, PlotKind::ShapeCurve));
    };
    let xs: Vec<f64> = points.iter().map(|p| p.aspect).collect();
    let mut ys: Vec<f64> = points.iter().map(|p| p.empirical).collect();
    ys.extend(points.iter().map(|p| p.formula));
    let axes = Axes::fit(&xs, &ys);
    let mut svg = Svg::new("hi-count shape function", "aspect a = rows/n", "M/n");
    svg.ticks(&axes, |x| format!("{x:.3}"), |y| format!("{y:.3}"));
    let mut formula = points.iter().map(|p| (p.aspect, p.formula)).collect::<Vec<_>>();
    formula.sort_by(|a, b| a.0.total_cmp(&b.0));
    for pair in formula.windows(2) {
        svg.line(&axes, "target", pair[0], pair[1]);
    }
    for p in points {
        svg.marker(&axes, p.aspect, p.empirical);
    }
    Ok(svg.finish())
}

/// Reads the plot input and writes the SVG to `spec.output`.
pub fn render(spec: &PlotSpec) -> Result<()> {
    let svg = match spec.kind {
        PlotKind::Trajectory => {
            let text = fs::read_to_string(&spec.input).map_err(|e| Error::io(&spec.input, e))?;
            trajectory_svg(&TrajectoryTable::parse(&text)?)?
        }
        PlotKind::LoglogMoments => loglog_svg(&read_summary(&spec.input)?, spec.r)?,
        PlotKind::DecayCurve => decay_svg(&read_summary(&spec.input)?)?,
        PlotKind::ShapeCurve => shape_svg(&read_summary(&spec.input)?)?,
    };
    fs::write(&spec.output, svg).map_err(|e| Error::io(&spec.output, e))
}
