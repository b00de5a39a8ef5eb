//! Finite-atom weight laws and their hi/lo mode split.
//!
//! Atom values are scaled to integers once, at construction, so every
//! downstream dynamic program runs in exact integer arithmetic. A weight is in
//! hi mode iff its value exceeds the threshold `m`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of atom probabilities before silent renormalisation.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-12;

const MAX_DECIMAL_DIGITS: u32 = 9;
const MAX_SCALED_VALUE: f64 = (1u64 << 40) as f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Hi,
    Lo,
}

/// Config-file form of a model: `{"atoms": [[0, 0.5], [1, 0.5]], "m": 0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelLiteral {
    pub atoms: Vec<(f64, f64)>,
    pub m: f64,
}

impl ModelLiteral {
    pub fn two_point(p: f64) -> Self {
        ModelLiteral {
            atoms: vec![(0.0, 1.0 - p), (1.0, p)],
            m: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
struct Table {
    indices: Vec<usize>,
    cumulative: Vec<f64>,
}

impl Table {
    fn new(atoms: &[(f64, f64)], keep: impl Fn(usize) -> bool) -> Self {
        let indices: Vec<usize> = (0..atoms.len()).filter(|&i| keep(i)).collect();
        let total: f64 = indices.iter().map(|&i| atoms[i].1).sum();
        let mut acc = 0.0;
        let cumulative = indices
            .iter()
            .map(|&i| {
                acc += atoms[i].1;
                acc / total
            })
            .collect();
        Table {
            indices,
            cumulative,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let pos = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.indices.len() - 1);
        self.indices[pos]
    }
}

/// An immutable finite-support weight law `F` with mode threshold `m`.
///
/// Sampled weights are returned in integer-scaled units: the real value is
/// `scaled / scale()`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ModelLiteral", into = "ModelLiteral")]
pub struct WeightModel {
    literal: ModelLiteral,
    /// Merged, sorted by value, renormalised.
    atoms: Vec<(f64, f64)>,
    scaled: Vec<i64>,
    scale: i64,
    threshold_scaled: i64,
    p: f64,
    mean_hi: f64,
    mean_lo: f64,
    all: Table,
    hi: Table,
    lo: Table,
}

impl TryFrom<ModelLiteral> for WeightModel {
    type Error = Error;

    fn try_from(literal: ModelLiteral) -> Result<Self> {
        WeightModel::new(&literal.atoms, literal.m)
    }
}

impl From<WeightModel> for ModelLiteral {
    fn from(model: WeightModel) -> Self {
        model.literal
    }
}

/// Models compare by their config literal.
impl PartialEq for WeightModel {
    fn eq(&self, other: &Self) -> bool {
        self.literal == other.literal
    }
}

impl WeightModel {
    pub fn new(atoms: &[(f64, f64)], threshold_m: f64) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if atoms.is_empty() {
            return bad("no atoms".into());
        }
        if !threshold_m.is_finite() || threshold_m < 0.0 {
            return bad(format!("threshold m = {threshold_m} must be finite and ≥ 0"));
        }
        for &(value, prob) in atoms {
            if !value.is_finite() || value < 0.0 {
                return bad(format!("atom value {value} must be finite and ≥ 0"));
            }
            if !(prob > 0.0 && prob <= 1.0) {
                return bad(format!("atom probability {prob} must lie in (0, 1]"));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return bad(format!("probabilities sum to {total}, not 1"));
        }

        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        let mut sorted = atoms.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (value, prob) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == value => last.1 += prob,
                _ => merged.push((value, prob)),
            }
        }
        for atom in &mut merged {
            atom.1 /= total;
        }
        if merged.len() < 2 {
            return bad("degenerate law: fewer than two distinct atom values".into());
        }

        let scale = integer_scale(&merged)?;
        let scaled: Vec<i64> = merged
            .iter()
            .map(|&(v, _)| (v * scale as f64).round() as i64)
            .collect();
        // w > m  ⇔  scaled(w) > ⌊m·scale⌋ for integer scaled(w).
        let threshold_scaled = (threshold_m * scale as f64 + 1e-9).floor() as i64;

        let p: f64 = merged
            .iter()
            .zip(&scaled)
            .filter(|(_, &s)| s > threshold_scaled)
            .map(|(a, _)| a.1)
            .sum();
        if p <= 0.0 || p >= 1.0 || !merged.iter().any(|a| a.0 <= threshold_m) {
            return bad(format!("P(w > m) = {p} must lie strictly in (0, 1)"));
        }
        let conditional_mean = |hi: bool| {
            let (mass, moment) = merged
                .iter()
                .zip(&scaled)
                .filter(|(_, &s)| (s > threshold_scaled) == hi)
                .fold((0.0, 0.0), |(m0, m1), (a, _)| (m0 + a.1, m1 + a.0 * a.1));
            moment / mass
        };
        let mean_hi = conditional_mean(true);
        let mean_lo = conditional_mean(false);

        let is_hi = |i: usize| scaled[i] > threshold_scaled;
        let all = Table::new(&merged, |_| true);
        let hi = Table::new(&merged, is_hi);
        let lo = Table::new(&merged, |i| !is_hi(i));

        Ok(WeightModel {
            literal: ModelLiteral {
                atoms: atoms.to_vec(),
                m: threshold_m,
            },
            atoms: merged,
            scaled,
            scale,
            threshold_scaled,
            p,
            mean_hi,
            mean_lo,
            all,
            hi,
            lo,
        })
    }

    /// Two-point law on `{0, 1}` with `P(w = 1) = p` and `m = 0`.
    pub fn two_point(p: f64) -> Result<Self> {
        let lit = ModelLiteral::two_point(p);
        WeightModel::new(&lit.atoms, lit.m)
    }

    pub fn literal(&self) -> &ModelLiteral {
        &self.literal
    }

    /// Merged atoms `(value, probability)`, sorted by value.
    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn threshold(&self) -> f64 {
        self.literal.m
    }

    /// `m` in scaled units; a scaled weight `w` is hi iff `w > threshold_scaled()`.
    pub fn threshold_scaled(&self) -> i64 {
        self.threshold_scaled
    }

    /// `p = P(w > m)`.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Largest atom value `C`.
    pub fn max_value(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].0
    }

    pub fn max_scaled(&self) -> i64 {
        self.scaled[self.scaled.len() - 1]
    }

    /// `E(w | w > m)`.
    pub fn mean_hi(&self) -> f64 {
        self.mean_hi
    }

    /// `E(w | w ≤ m)`.
    pub fn mean_lo(&self) -> f64 {
        self.mean_lo
    }

    /// Integer factor applied to every atom value (a power of ten).
    pub fn scale(&self) -> i64 {
        self.scale
    }

    pub fn to_real(&self, scaled: i64) -> f64 {
        scaled as f64 / self.scale as f64
    }

    pub fn mode_of(&self, scaled: i64) -> Mode {
        if scaled > self.threshold_scaled {
            Mode::Hi
        } else {
            Mode::Lo
        }
    }

    /// One draw from `F`, in scaled units. Consumes exactly one `f64` from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        self.scaled[self.all.draw(rng)]
    }

    /// One draw from `F` restricted to the given mode and renormalised.
    pub fn sample_conditional<R: Rng + ?Sized>(&self, mode: Mode, rng: &mut R) -> i64 {
        let table = match mode {
            Mode::Hi => &self.hi,
            Mode::Lo => &self.lo,
        };
        self.scaled[table.draw(rng)]
    }
}

/// Smallest power of ten turning every atom value into an integer.
fn integer_scale(atoms: &[(f64, f64)]) -> Result<i64> {
    for digits in 0..=MAX_DECIMAL_DIGITS {
        let scale = 10f64.powi(digits as i32);
        let exact = atoms.iter().all(|&(v, _)| {
            let s = v * scale;
            (s - s.round()).abs() <= 1e-9 * s.abs().max(1.0)
        });
        if exact {
            if atoms.iter().any(|&(v, _)| v * scale > MAX_SCALED_VALUE) {
                break;
            }
            return Ok(10i64.pow(digits));
        }
    }
    Err(Error::InvalidModel(format!(
        "atom values need at most {MAX_DECIMAL_DIGITS} decimal digits and a scaled magnitude below 2^40"
    )))
}
