use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Rows and distributions must sum to one within this tolerance.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Normalizers below this are treated as zero-probability evidence.
pub const MIN_NORMALIZER: f64 = 1e-300;

/// Probability mass function over a dense index set `0..len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Validates non-negativity and unit mass; never renormalizes.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if let Some(msg) = super::check_row(&probs) {
            return Err(Error::InvalidDistribution(msg));
        }
        Ok(Self { probs })
    }

    pub fn point(len: usize, index: usize) -> Self {
        assert!(index < len, "point mass index {index} outside support of size {len}");
        let mut probs = vec![0.0; len];
        probs[index] = 1.0;
        Self { probs }
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len > 0, "uniform distribution over an empty set");
        Self {
            probs: vec![1.0 / len as f64; len],
        }
    }

    /// Normalizes non-negative weights. Returns `None` when the total mass is
    /// below [`MIN_NORMALIZER`], i.e. the conditioning event is impossible.
    pub fn from_weights(mut weights: Vec<f64>) -> Option<Self> {
        let total: f64 = weights.iter().sum();
        if !(total >= MIN_NORMALIZER) || !total.is_finite() {
            return None;
        }
        for w in &mut weights {
            *w /= total;
        }
        Some(Self { probs: weights })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    /// `Σ_i p_i · values_i`.
    pub fn dot(&self, values: &[f64]) -> f64 {
        self.probs.iter().zip(values).map(|(p, v)| p * v).sum()
    }

    /// Index of the largest entry, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// Inverse-CDF draw from one uniform variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.probs, rng)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

/// Inverse-CDF draw from a probability row. Zero-probability entries are never
/// returned.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

impl TryFrom<Vec<f64>> for Distribution {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<Distribution> for Vec<f64> {
    fn from(d: Distribution) -> Self {
        d.probs
    }
}

impl AsRef<[f64]> for Distribution {
    fn as_ref(&self) -> &[f64] {
        &self.probs
    }
}
