//! Logistic regression on handcrafted shot features, the reference model
//! the tree is compared against.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::deeptree::{log_loss, sigmoid};
use crate::trajectory::{handcrafted_features, Dataset, Pitch, Play, HANDCRAFTED_LEN};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Penalty on standardised slopes, per play.
    pub l2: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            l2: 1e-3,
            max_iters: 100,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandcraftedLogistic {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Slopes on standardised features, then the intercept.
    pub weights: Vec<f64>,
    pub pitch: Pitch,
    pub iterations: usize,
}

impl HandcraftedLogistic {
    fn standardise(&self, f: &[f64]) -> Vec<f64> {
        f.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    pub fn predict(&self, play: &Play) -> f64 {
        let z = self.standardise(&handcrafted_features(play, &self.pitch));
        let k = z.len();
        sigmoid(z.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>() + self.weights[k])
    }

    pub fn evaluate_logloss(&self, dataset: &Dataset) -> Result<f64> {
        let q: Vec<f64> = dataset.plays.iter().map(|p| self.predict(p)).collect();
        let p: Vec<f64> = dataset.plays.iter().map(Play::label_f64).collect();
        log_loss(&p, &q)
    }
}

/// Penalised maximum likelihood by Newton's method:
/// minimises `mean NLL + (l2/2)‖w‖²` (intercept unpenalised).
pub fn fit_baseline(dataset: &Dataset, cfg: &BaselineConfig) -> Result<HandcraftedLogistic> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = dataset.len();
    let k = HANDCRAFTED_LEN;
    let raw: Vec<Vec<f64>> = dataset
        .plays
        .iter()
        .map(|p| handcrafted_features(p, &dataset.pitch))
        .collect();
    let mut mean = vec![0.0; k];
    for f in &raw {
        for (m, x) in mean.iter_mut().zip(f) {
            *m += x / n as f64;
        }
    }
    let mut std = vec![0.0; k];
    for f in &raw {
        for ((s, x), m) in std.iter_mut().zip(f).zip(&mean) {
            *s += (x - m).powi(2) / n as f64;
        }
    }
    let std: Vec<f64> = std
        .into_iter()
        .map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
        .collect();
    let mut model = HandcraftedLogistic {
        mean,
        std,
        weights: vec![0.0; k + 1],
        pitch: dataset.pitch,
        iterations: 0,
    };
    let x = DMatrix::from_fn(n, k + 1, |i, j| {
        if j == k {
            1.0
        } else {
            (raw[i][j] - model.mean[j]) / model.std[j]
        }
    });
    let y = DVector::from_iterator(n, dataset.plays.iter().map(Play::label_f64));
    let mut w = DVector::zeros(k + 1);
    let mut penalty = DVector::from_element(k + 1, cfg.l2);
    penalty[k] = 0.0;

    for it in 0..cfg.max_iters {
        let z = &x * &w;
        let q = z.map(sigmoid);
        let r = q.map(|v| v * (1.0 - v));
        let grad = x.transpose() * (&q - &y) / n as f64 + penalty.component_mul(&w);
        let weighted = DMatrix::from_fn(n, k + 1, |i, j| x[(i, j)] * r[i]);
        let mut h = x.transpose() * weighted / n as f64;
        for j in 0..=k {
            h[(j, j)] += penalty[j] + 1e-12;
        }
        let step = h
            .cholesky()
            .ok_or_else(|| Error::invalid("baseline Hessian is not positive definite"))?
            .solve(&grad);
        w -= &step;
        model.iterations = it + 1;
        if step.norm() < cfg.tol * (1.0 + w.norm()) {
            break;
        }
    }
    model.weights = w.iter().copied().collect();
    Ok(model)
}
