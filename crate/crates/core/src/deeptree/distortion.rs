//! Per-role feature weights and the weighted trajectory distortion.

use serde::{Deserialize, Serialize};

use crate::trajectory::Play;
use crate::{Error, Result};

/// Non-negative per-role weights summing to the role count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureWeights {
    alpha: Vec<f64>,
}

impl FeatureWeights {
    pub fn uniform(m: usize) -> Self {
        FeatureWeights {
            alpha: vec![1.0; m],
        }
    }

    /// Validates `alpha` against the constraint set (tolerance 1e-9·m on the sum).
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        let m = alpha.len() as f64;
        if alpha.is_empty() || alpha.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::invalid(
                "feature weights must be finite and non-negative",
            ));
        }
        let sum: f64 = alpha.iter().sum();
        if (sum - m).abs() > 1e-9 * m {
            return Err(Error::invalid(format!(
                "feature weights sum to {sum}, expected {m}"
            )));
        }
        Ok(FeatureWeights { alpha })
    }

    /// Wraps raw values without checking the constraint set; for
    /// sensitivity analysis only.
    pub fn from_unchecked(alpha: Vec<f64>) -> Self {
        FeatureWeights { alpha }
    }

    /// Euclidean projection of arbitrary values onto `{α ≥ 0, Σα = m}`.
    pub fn project(values: &[f64]) -> Self {
        let m = values.len();
        let target = m as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut cumsum = 0.0;
        let mut theta = 0.0;
        for (k, v) in sorted.iter().enumerate() {
            cumsum += v;
            let t = (cumsum - target) / (k + 1) as f64;
            if v - t > 0.0 {
                theta = t;
            }
        }
        let mut alpha: Vec<f64> = values.iter().map(|v| (v - theta).max(0.0)).collect();
        // remove rounding drift so the sum is exact to the last bit or two
        let sum: f64 = alpha.iter().sum();
        if sum > 0.0 {
            alpha.iter_mut().for_each(|a| *a *= target / sum);
        }
        FeatureWeights { alpha }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Role with the largest weight (lowest index on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (l, a) in self.alpha.iter().enumerate() {
            if *a > self.alpha[best] {
                best = l;
            }
        }
        best
    }

    /// `Σ_l α_l d_l`.
    pub fn weigh(&self, per_role: &[f64]) -> f64 {
        self.alpha.iter().zip(per_role).map(|(a, d)| a * d).sum()
    }
}

/// Squared Euclidean distance per role between two flattened plays laid out
/// as `m` contiguous blocks of `2τ` coordinates.
pub fn role_distortions_into(a: &[f64], b: &[f64], tau: usize, out: &mut [f64]) {
    let block = 2 * tau;
    for ((ra, rb), o) in a
        .chunks_exact(block)
        .zip(b.chunks_exact(block))
        .zip(out.iter_mut())
    {
        *o = ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)).sum();
    }
}

pub fn role_distortions(a: &[f64], b: &[f64], tau: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len() / (2 * tau).max(1)];
    role_distortions_into(a, b, tau, &mut out);
    out
}

/// `Σ_l α_l ‖x_{a,l} − x_{b,l}‖²` over flattened plays.
pub fn weighted_distortion_flat(a: &[f64], b: &[f64], tau: usize, w: &FeatureWeights) -> f64 {
    let block = 2 * tau;
    a.chunks_exact(block)
        .zip(b.chunks_exact(block))
        .zip(w.as_slice())
        .map(|((ra, rb), alpha)| {
            alpha
                * ra.iter()
                    .zip(rb)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
        })
        .sum()
}

pub fn weighted_distortion(a: &Play, b: &Play, w: &FeatureWeights) -> Result<f64> {
    let tau = a.tau();
    if b.tau() != tau || a.agents() != b.agents() || a.attacking.len() != b.attacking.len() {
        return Err(Error::invalid(format!(
            "plays differ in shape: {} agents x {} frames vs {} x {}",
            a.agents(),
            tau,
            b.agents(),
            b.tau()
        )));
    }
    if w.len() != a.agents() {
        return Err(Error::invalid(format!(
            "{} feature weights for {} roles",
            w.len(),
            a.agents()
        )));
    }
    Ok(weighted_distortion_flat(&a.flatten(), &b.flatten(), tau, w))
}
