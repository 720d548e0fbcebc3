//! Deep decision tree over aligned plays.
//!
//! The root splits by play type. Below it, each branch holds a hierarchy of
//! decision nodes that route a play to the nearest cluster centroid under a
//! per-branch role weighting `α`, and prediction leaves that score the play
//! with a logistic classifier. Training grows the tree one clustering layer
//! at a time and alternates SGD on the leaf classifiers and on `α`, using a
//! softmax relaxation of the routing so that the classification error
//! reaches the weights.

mod cluster;
mod distortion;
mod train;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::trajectory::{Dataset, Play, PlayType};
use crate::{Error, Result};

pub use cluster::{centroids, cluster_node, Clustering};
pub use distortion::{
    role_distortions, role_distortions_into, weighted_distortion, weighted_distortion_flat,
    FeatureWeights,
};
pub use train::{objective, train, TreeGradient};

/// Lower clamp applied to predictions before taking logarithms.
pub const LOGLOSS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    /// Total depth: the play-type split, the clustering layers and the leaves.
    pub n_layers: usize,
    pub branching_factor: usize,
    /// Expected leaf count; the realised count is reported after training.
    pub target_codebook_size: usize,
    /// Softmax temperature; `None` derives it per branch as
    /// `beta_scale / median pairwise distortion`.
    pub beta: Option<f64>,
    pub beta_scale: f64,
    pub eta_alpha: f64,
    pub eta_pi: f64,
    /// Epochs per layer.
    pub epochs: usize,
    pub batch_size: usize,
    /// L2 penalty on leaf classifier slopes.
    pub l2: f64,
    pub rng_seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            n_layers: 4,
            branching_factor: 3,
            target_codebook_size: 36,
            beta: None,
            beta_scale: 100.0,
            eta_alpha: 0.3,
            eta_pi: 3.0,
            epochs: 30,
            batch_size: 32,
            l2: 1e-3,
            rng_seed: 0,
        }
    }
}

impl TreeConfig {
    pub fn decision_layers(&self) -> usize {
        self.n_layers.saturating_sub(2)
    }

    /// Leaf count when no branch stops early.
    pub fn full_codebook_size(&self) -> usize {
        PlayType::ALL.len() * self.branching_factor.pow(self.decision_layers() as u32)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_layers < 2 {
            return bad(format!(
                "n_layers must be at least 2, got {}",
                self.n_layers
            ));
        }
        if self.branching_factor < 2 {
            return bad(format!(
                "branching_factor must be at least 2, got {}",
                self.branching_factor
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        for (name, v) in [
            ("eta_alpha", self.eta_alpha),
            ("eta_pi", self.eta_pi),
            ("l2", self.l2),
            ("beta_scale", self.beta_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if let Some(b) = self.beta {
            if !(b >= 0.0) || b.is_nan() {
                return bad(format!("beta must be non-negative, got {b}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRef {
    /// Index into the branch's decision nodes.
    Decision(usize),
    /// Index into the tree's leaves.
    Leaf(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionNode {
    pub depth: usize,
    pub centroids: Vec<Vec<f64>>,
    pub children: Vec<NodeRef>,
}

/// Leaf classifier `f(x) = sigmoid(w · (x − center) / scale + b)` with
/// `pi = [w; b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionNode {
    pub codebook_id: usize,
    pub play_type: PlayType,
    pub pi: Vec<f64>,
    /// Mean of the plays the leaf was created for.
    pub center: Vec<f64>,
    pub scale: f64,
    /// Training plays routed here by hard routing.
    pub assigned_count: usize,
}

impl PredictionNode {
    pub fn logit_flat(&self, x: &[f64]) -> f64 {
        let d = self.center.len();
        let w = &self.pi[..d];
        let dot: f64 = w
            .iter()
            .zip(x)
            .zip(&self.center)
            .map(|((w, x), c)| w * (x - c))
            .sum();
        dot / self.scale + self.pi[d]
    }

    pub fn predict_flat(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit_flat(x))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub play_type: PlayType,
    pub alpha: FeatureWeights,
    pub beta: f64,
    pub nodes: Vec<DecisionNode>,
    pub root: NodeRef,
    pub n_train: usize,
}

impl Branch {
    fn descend(&self, mut pick: impl FnMut(&DecisionNode) -> usize) -> usize {
        let mut at = self.root;
        loop {
            match at {
                NodeRef::Leaf(k) => return k,
                NodeRef::Decision(i) => {
                    let node = &self.nodes[i];
                    at = node.children[pick(node)];
                }
            }
        }
    }

    pub fn route_hard_flat(&self, x: &[f64], tau: usize) -> usize {
        self.descend(|node| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in node.centroids.iter().enumerate() {
                let d = weighted_distortion_flat(x, centroid, tau, &self.alpha);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            best
        })
    }

    /// Leaf probabilities under softmax routing at temperature `beta`.
    /// Infinite `beta` reduces to hard routing.
    pub fn route_soft_flat(&self, x: &[f64], tau: usize, beta: f64) -> Vec<(usize, f64)> {
        if beta == f64::INFINITY {
            return vec![(self.route_hard_flat(x, tau), 1.0)];
        }
        let mut out = Vec::new();
        let mut stack = vec![(self.root, 1.0)];
        while let Some((at, p)) = stack.pop() {
            match at {
                NodeRef::Leaf(k) => out.push((k, p)),
                NodeRef::Decision(i) => {
                    let node = &self.nodes[i];
                    let z: Vec<f64> = node
                        .centroids
                        .iter()
                        .map(|c| -beta * weighted_distortion_flat(x, c, tau, &self.alpha))
                        .collect();
                    let s = softmax(&z);
                    for (child, sc) in node.children.iter().zip(s).rev() {
                        stack.push((*child, p * sc));
                    }
                }
            }
        }
        out
    }
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub layer: usize,
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub target_codebook_size: usize,
    pub realized_codebook_size: usize,
    pub pruned_leaves: usize,
    /// Human-readable notes on branches that stopped splitting early.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepDecisionTree {
    pub config: TreeConfig,
    pub tau: usize,
    pub m: usize,
    /// One branch per play type, in [`PlayType::ALL`] order.
    pub branches: Vec<Branch>,
    pub leaves: Vec<PredictionNode>,
    pub loss_trace: Vec<EpochLoss>,
    pub report: TrainReport,
}

impl DeepDecisionTree {
    pub fn flat_len(&self) -> usize {
        2 * self.tau * self.m
    }

    pub fn branch(&self, play_type: PlayType) -> Result<&Branch> {
        self.branches
            .iter()
            .find(|b| b.play_type == play_type)
            .ok_or_else(|| Error::invalid(format!("tree has no branch for {play_type}")))
    }

    fn check(&self, play: &Play) -> Result<()> {
        if play.tau() != self.tau || play.agents() != self.m {
            return Err(Error::invalid(format!(
                "play has {} agents x {} frames, tree expects {} x {}",
                play.agents(),
                play.tau(),
                self.m,
                self.tau
            )));
        }
        Ok(())
    }

    pub fn route_hard(&self, play: &Play) -> Result<usize> {
        self.check(play)?;
        Ok(self
            .branch(play.play_type)?
            .route_hard_flat(&play.flatten(), self.tau))
    }

    /// Soft leaf distribution at each branch's trained temperature, as a
    /// dense vector over all leaves.
    pub fn route_soft(&self, play: &Play) -> Result<Vec<f64>> {
        let beta = self.branch(play.play_type)?.beta;
        self.route_soft_with(play, beta)
    }

    pub fn route_soft_with(&self, play: &Play, beta: f64) -> Result<Vec<f64>> {
        self.check(play)?;
        let branch = self.branch(play.play_type)?;
        let mut out = vec![0.0; self.leaves.len()];
        for (k, p) in branch.route_soft_flat(&play.flatten(), self.tau, beta) {
            out[k] += p;
        }
        Ok(out)
    }

    /// Hard-routed leaf and its predicted goal probability.
    pub fn assign_and_score(&self, play: &Play) -> Result<(usize, f64)> {
        self.check(play)?;
        let x = play.flatten();
        let leaf = self.branch(play.play_type)?.route_hard_flat(&x, self.tau);
        Ok((leaf, self.leaves[leaf].predict_flat(&x)))
    }

    pub fn alpha(&self, play_type: PlayType) -> Result<&FeatureWeights> {
        Ok(&self.branch(play_type)?.alpha)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let tree: DeepDecisionTree = serde_json::from_str(&text)?;
        tree.validate_shape()?;
        Ok(tree)
    }

    fn validate_shape(&self) -> Result<()> {
        let d = self.flat_len();
        let bad = |msg: String| Err(Error::invalid(format!("malformed tree: {msg}")));
        for (k, leaf) in self.leaves.iter().enumerate() {
            if leaf.pi.len() != d + 1 || leaf.center.len() != d || !(leaf.scale > 0.0) {
                return bad(format!("leaf {k} has wrong dimensions"));
            }
        }
        for b in &self.branches {
            if b.alpha.len() != self.m {
                return bad(format!(
                    "{} weights have length {}",
                    b.play_type,
                    b.alpha.len()
                ));
            }
            let refs = b
                .nodes
                .iter()
                .flat_map(|n| n.children.iter())
                .chain(std::iter::once(&b.root));
            for r in refs {
                let ok = match *r {
                    NodeRef::Leaf(k) => k < self.leaves.len(),
                    NodeRef::Decision(i) => i < b.nodes.len(),
                };
                if !ok {
                    return bad(format!("dangling reference {r:?}"));
                }
            }
            for n in &b.nodes {
                if n.centroids.len() != n.children.len() || n.centroids.iter().any(|c| c.len() != d)
                {
                    return bad("decision node shape mismatch".into());
                }
            }
        }
        Ok(())
    }
}

pub fn leaf_predict(node: &PredictionNode, play: &Play) -> f64 {
    node.predict_flat(&play.flatten())
}

/// Mean Bernoulli log loss with `q` clamped to `[1e-9, 1 − 1e-9]`.
pub fn log_loss(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if p.len() != q.len() {
        return Err(Error::invalid(format!(
            "{} labels vs {} predictions",
            p.len(),
            q.len()
        )));
    }
    let total: f64 = p
        .iter()
        .zip(q)
        .map(|(p, q)| {
            let q = q.clamp(LOGLOSS_EPS, 1.0 - LOGLOSS_EPS);
            p * q.ln() + (1.0 - p) * (1.0 - q).ln()
        })
        .sum();
    Ok(-total / p.len() as f64)
}

/// Predicted goal probability per play under hard routing.
pub fn predict_dataset(tree: &DeepDecisionTree, dataset: &Dataset) -> Result<Vec<(usize, f64)>> {
    dataset
        .plays
        .iter()
        .map(|p| tree.assign_and_score(p))
        .collect()
}

pub fn evaluate_logloss(tree: &DeepDecisionTree, dataset: &Dataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let q: Vec<f64> = predict_dataset(tree, dataset)?
        .into_iter()
        .map(|(_, q)| q)
        .collect();
    let p: Vec<f64> = dataset.plays.iter().map(Play::label_f64).collect();
    log_loss(&p, &q)
}

#[cfg(test)]
mod tests;
