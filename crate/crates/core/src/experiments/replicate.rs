use serde::{Deserialize, Serialize};

use super::spec::{ExperimentKind, ExperimentSpec};
use crate::coupling::{CoupledTrajectory, LipschitzConstants};
use crate::lattice::{cylinder_last_passage, hi_mode_max, last_passage_value, WeightGrid};
use crate::stream::stream;

/// Per-replicate output, tagged by experiment kind. Passage values are in
/// real units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    MomentScaling { l: f64, m: i64 },
    CouplingCheck { hi_count: usize, coupled: f64, direct: f64 },
    MnGrowth { m: i64 },
    LipschitzFrequency { o_n: bool, a_n: bool, violations: usize },
    CylinderVariance { l: f64, cylinder: Vec<f64> },
    ShapeCurve { m: i64 },
}

/// One line of `replicates.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    /// Index into the spec's `n` list.
    pub i: usize,
    /// Replicate index within grid size `i`.
    pub j: usize,
    pub n: usize,
    #[serde(flatten)]
    pub outcome: Outcome,
}

/// Runs replicate `j` of grid size `i` on stream `(seed, kind, i, j)`.
pub fn run_replicate(spec: &ExperimentSpec, i: usize, j: usize) -> ReplicateRow {
    let shape = spec.shape(i);
    let model = &spec.model;
    let mut rng = stream(spec.seed, spec.kind.domain(), i as u64, j as u64);
    let outcome = match spec.kind {
        ExperimentKind::MomentScaling => {
            let grid = WeightGrid::sample(shape, model, &mut rng);
            Outcome::MomentScaling {
                l: model.to_real(last_passage_value(&grid)),
                m: hi_mode_max(&grid),
            }
        }
        ExperimentKind::CouplingCheck => {
            let mode = spec.constants.trajectory_mode();
            let trajectory = CoupledTrajectory::build(shape, model, &mut rng, mode);
            let (hi_count, coupled) = trajectory.evaluate_at_n(&mut rng);
            let grid = WeightGrid::sample(shape, model, &mut rng);
            Outcome::CouplingCheck {
                hi_count,
                coupled: model.to_real(coupled),
                direct: model.to_real(last_passage_value(&grid)),
            }
        }
        ExperimentKind::MnGrowth | ExperimentKind::ShapeCurve => {
            let m = hi_mode_max(&WeightGrid::sample(shape, model, &mut rng));
            if spec.kind == ExperimentKind::MnGrowth {
                Outcome::MnGrowth { m }
            } else {
                Outcome::ShapeCurve { m }
            }
        }
        ExperimentKind::LipschitzFrequency => {
            let mode = spec.constants.trajectory_mode();
            let trajectory = CoupledTrajectory::build(shape, model, &mut rng, mode);
            let constants = LipschitzConstants::resolve(model, &spec.constants.lipschitz())
                .expect("validated");
            let report = trajectory
                .check_reversed_lipschitz(&constants)
                .expect("validated window");
            Outcome::LipschitzFrequency {
                o_n: report.o_n_holds,
                a_n: report.a_n_holds.unwrap_or(false),
                violations: report.violations.len(),
            }
        }
        ExperimentKind::CylinderVariance => {
            let grid = WeightGrid::sample(shape, model, &mut rng);
            let cylinder = spec
                .constants
                .widths(shape.rows())
                .into_iter()
                .map(|w| model.to_real(cylinder_last_passage(&grid, w).expect("validated width")))
                .collect();
            Outcome::CylinderVariance {
                l: model.to_real(last_passage_value(&grid)),
                cylinder,
            }
        }
    };
    ReplicateRow {
        i,
        j,
        n: spec.n[i],
        outcome,
    }
}
