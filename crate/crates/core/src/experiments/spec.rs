use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coupling::{LipschitzConfig, TrajectoryMode};
use crate::distributions::WeightModel;
use crate::error::{Error, Result};
use crate::estimation::WindowI;
use crate::lattice::GridShape;
use crate::stream::domain;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    MomentScaling,
    CouplingCheck,
    MnGrowth,
    LipschitzFrequency,
    CylinderVariance,
    ShapeCurve,
}

impl ExperimentKind {
    pub fn domain(self) -> u64 {
        match self {
            ExperimentKind::MomentScaling => domain::MOMENT_SCALING,
            ExperimentKind::CouplingCheck => domain::COUPLING_CHECK,
            ExperimentKind::MnGrowth => domain::MN_GROWTH,
            ExperimentKind::LipschitzFrequency => domain::LIPSCHITZ_FREQUENCY,
            ExperimentKind::CylinderVariance => domain::CYLINDER_VARIANCE,
            ExperimentKind::ShapeCurve => domain::SHAPE_CURVE,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MomentScaling => "moment_scaling",
            ExperimentKind::CouplingCheck => "coupling_check",
            ExperimentKind::MnGrowth => "mn_growth",
            ExperimentKind::LipschitzFrequency => "lipschitz_frequency",
            ExperimentKind::CylinderVariance => "cylinder_variance",
            ExperimentKind::ShapeCurve => "shape_curve",
        }
    }
}

pub const DEFAULT_BOOTSTRAP: usize = 1000;
pub const DEFAULT_FIT_RESAMPLES: usize = 1000;
pub const DEFAULT_SLOPE_TOLERANCE: f64 = 0.05;
pub const DEFAULT_MAX_FINAL_FREQUENCY: f64 = 1e-3;
pub const DEFAULT_MIN_ON_FREQUENCY: f64 = 0.9;
pub const DEFAULT_MIN_P_VALUE: f64 = 1e-3;

/// Optional constants and acceptance thresholds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c5: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_ell: Option<f64>,
    /// Cylinder half-widths; defaults to powers of two up to `rows`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub widths: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_resamples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_mode: Option<TrajectoryMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_final_frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_on_frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_p_value: Option<f64>,
}

impl Overrides {
    pub fn lipschitz(&self) -> LipschitzConfig {
        LipschitzConfig {
            epsilon: self.epsilon,
            c1: self.c1,
            c5: self.c5,
            c_ell: self.c_ell,
        }
    }

    pub fn bootstrap(&self) -> usize {
        self.bootstrap.unwrap_or(DEFAULT_BOOTSTRAP)
    }

    pub fn fit_resamples(&self) -> usize {
        self.fit_resamples.unwrap_or(DEFAULT_FIT_RESAMPLES)
    }

    pub fn trajectory_mode(&self) -> TrajectoryMode {
        self.trajectory_mode.unwrap_or_default()
    }

    pub fn widths(&self, rows: usize) -> Vec<usize> {
        match &self.widths {
            Some(w) => w.clone(),
            None => {
                let mut widths: Vec<usize> = std::iter::successors(Some(1usize), |w| Some(w * 2))
                    .take_while(|&w| w < rows)
                    .collect();
                widths.push(rows);
                widths
            }
        }
    }
}

fn default_r() -> Vec<f64> {
    vec![1.0, 2.0]
}

/// Reproducible experiment configuration; the JSON config file format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub model: WeightModel,
    pub alpha: f64,
    #[serde(default = "default_r")]
    pub r: Vec<f64>,
    pub n: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub constants: Overrides,
}

impl ExperimentSpec {
    /// Parses and validates a JSON config; errors carry serde's line and
    /// column, or the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)
            .map_err(|e| Error::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::InvalidSpec(format!("field `{field}`: {msg}")));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha", format!("{} outside (0, 1]", self.alpha));
        }
        if self.n.is_empty() {
            return bad("n", "empty list".into());
        }
        if self.n.windows(2).any(|w| w[0] >= w[1]) || self.n[0] == 0 {
            return bad("n", "must be positive and strictly increasing".into());
        }
        if self.replicates < 2 {
            return bad("replicates", format!("{} < 2", self.replicates));
        }
        if self.r.is_empty() || self.r.iter().any(|&r| !(r >= 1.0) || !r.is_finite()) {
            return bad("r", "every order must be finite and ≥ 1".into());
        }
        if let Some(widths) = &self.constants.widths {
            if widths.is_empty() || widths.contains(&0) {
                return bad("constants.widths", "widths must be ≥ 1".into());
            }
        }
        for &n in &self.n {
            let shape = GridShape::thin(n, self.alpha).map_err(|e| {
                Error::InvalidSpec(format!("field `n`: {e}"))
            })?;
            if self.kind == ExperimentKind::LipschitzFrequency {
                WindowI::new(shape, &self.model)
                    .map_err(|e| Error::InvalidSpec(format!("field `n`: n = {n}: {e}")))?;
            }
        }
        if self.kind == ExperimentKind::MomentScaling && self.n.len() < 3 {
            return bad("n", "moment scaling needs at least 3 grid sizes".into());
        }
        crate::coupling::LipschitzConstants::resolve(&self.model, &self.constants.lipschitz())
            .map_err(|e| Error::InvalidSpec(format!("field `constants`: {e}")))?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }

    /// Hex SHA-256 of the compact JSON serialisation.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn shape(&self, i: usize) -> GridShape {
        GridShape::thin(self.n[i], self.alpha).expect("validated")
    }

    pub fn total_replicates(&self) -> usize {
        self.n.len() * self.replicates
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADLINE: &str = r#"{
        "kind": "moment_scaling",
        "model": {"atoms": [[0, 0.5], [1, 0.5]], "m": 0},
        "alpha": 0.25,
        "r": [1, 2],
        "n": [64, 128, 256, 512, 1024],
        "replicates": 2000,
        "seed": 1
    }"#;

    #[test]
    fn parses_headline_config() {
        let spec = ExperimentSpec::from_json(HEADLINE).unwrap();
        assert_eq!(spec.kind, ExperimentKind::MomentScaling);
        assert_eq!(spec.model.p(), 0.5);
        assert_eq!(spec.hash().len(), 64);
        let again = ExperimentSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(again.hash(), spec.hash());
    }

    #[test]
    fn missing_field_is_named() {
        let text = HEADLINE.replace(r#""replicates": 2000,"#, "");
        let err = ExperimentSpec::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("replicates"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn unknown_field_rejected() {
        let text = HEADLINE.replace(r#""seed": 1"#, r#""seed": 1, "sede": 2"#);
        let err = ExperimentSpec::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("sede"), "{err}");
    }

    #[test]
    fn invariants_checked() {
        let cases = [
            (r#""n": [64, 128, 256, 512, 1024]"#, r#""n": [64, 64, 256]"#, "`n`"),
            (r#""replicates": 2000"#, r#""replicates": 1"#, "`replicates`"),
            (r#""alpha": 0.25"#, r#""alpha": 1.5"#, "`alpha`"),
            (r#""r": [1, 2]"#, r#""r": [0.5]"#, "`r`"),
        ];
        for (from, to, field) in cases {
            let err = ExperimentSpec::from_json(&HEADLINE.replace(from, to))
                .unwrap_err()
                .to_string();
            assert!(err.contains(field), "{err}");
        }
        let bad_model = HEADLINE.replace("[[0, 0.5], [1, 0.5]]", "[[1, 1.0]]");
        assert!(ExperimentSpec::from_json(&bad_model).is_err());
    }

    #[test]
    fn default_widths_reach_rows() {
        let o = Overrides::default();
        assert_eq!(o.widths(4), vec![1, 2, 4]);
        assert_eq!(o.widths(5), vec![1, 2, 4, 5]);
        assert_eq!(o.widths(1), vec![1]);
    }
}
