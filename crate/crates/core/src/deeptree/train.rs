//! Layer-wise construction and alternating SGD.
//!
//! The objective for a branch with plays `i` and leaves `k` is
//!
//! ```text
//! L = mean_i Σ_k P(k | x_i) (p_i − f_k(x_i))² + (λ/2) Σ_k ‖w_k‖²
//! ```
//!
//! where `P` is the product of per-node softmaxes over `−β Σ_l α_l d_l`.
//! The whole-tree objective weights each branch by its share of the plays.
//! Centroids are frozen once built, so per-role distortions to every
//! centroid are cached per play and `α` steps only re-weight them.

use log::{debug, info};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cluster::cluster_node;
use super::distortion::{role_distortions_into, weighted_distortion_flat, FeatureWeights};
use super::{
    sigmoid, softmax, Branch, DecisionNode, DeepDecisionTree, EpochLoss, NodeRef, PredictionNode,
    TrainReport, TreeConfig,
};
use crate::trajectory::{Dataset, Play, PlayType};
use crate::{rng, Error, Result};

/// Plays sampled to set the default softmax temperature.
const BETA_SAMPLE: usize = 256;

/// Gradient of the whole-tree objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeGradient {
    /// Per branch, in tree branch order.
    pub alpha: Vec<Vec<f64>>,
    /// Per leaf, slopes then bias.
    pub pi: Vec<Vec<f64>>,
}

struct Leaf {
    /// Path from which the leaf hangs, `None` for a branch root.
    parent: Option<(usize, usize)>,
    node: PredictionNode,
}

struct BranchState {
    play_type: PlayType,
    tau: usize,
    m: usize,
    alpha: Vec<f64>,
    beta: f64,
    nodes: Vec<DecisionNode>,
    root: NodeRef,
    leaves: Vec<Leaf>,
    x: Vec<f64>,
    labels: Vec<f64>,
    /// Per play, per-role distortions to each centroid of each node.
    dists: Vec<Vec<f64>>,
    offsets: Vec<usize>,
    l2: f64,
}

struct Path {
    leaf: usize,
    prob: f64,
    dlogp: Vec<f64>,
}

#[derive(Default)]
struct Grad {
    loss: f64,
    alpha: Vec<f64>,
    pi: Vec<Vec<f64>>,
}

fn mean_logit(labels: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0.0);
    for p in labels {
        s += p;
        n += 1.0;
    }
    let q = (s + 0.5) / (n + 1.0);
    (q / (1.0 - q)).ln()
}

impl BranchState {
    fn dim(&self) -> usize {
        2 * self.tau * self.m
    }

    fn n(&self) -> usize {
        self.labels.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.x[i * d..(i + 1) * d]
    }

    fn new(play_type: PlayType, plays: &[&Play], tau: usize, m: usize, l2: f64) -> Self {
        let d = 2 * tau * m;
        let mut x = vec![0.0; plays.len() * d];
        for (p, chunk) in plays.iter().zip(x.chunks_exact_mut(d)) {
            p.flatten_into(chunk);
        }
        BranchState {
            play_type,
            tau,
            m,
            alpha: vec![1.0; m],
            beta: 1.0,
            nodes: Vec::new(),
            root: NodeRef::Leaf(0),
            leaves: Vec::new(),
            x,
            labels: plays.iter().map(|p| p.label_f64()).collect(),
            dists: vec![Vec::new(); plays.len()],
            offsets: Vec::new(),
            l2,
        }
    }

    /// Rebuilds the state of a finished branch, keeping global leaf indices
    /// in a local table.
    fn from_tree(
        tree: &DeepDecisionTree,
        branch: &Branch,
        plays: &[&Play],
        l2: f64,
    ) -> (Self, Vec<usize>) {
        let mut state = BranchState::new(branch.play_type, plays, tree.tau, tree.m, l2);
        state.alpha = branch.alpha.as_slice().to_vec();
        state.beta = branch.beta;
        let mut global = Vec::new();
        let local = |r: NodeRef, global: &mut Vec<usize>, leaves: &mut Vec<Leaf>| match r {
            NodeRef::Leaf(k) => {
                global.push(k);
                leaves.push(Leaf {
                    parent: None,
                    node: tree.leaves[k].clone(),
                });
                NodeRef::Leaf(leaves.len() - 1)
            }
            d => d,
        };
        state.root = local(branch.root, &mut global, &mut state.leaves);
        for node in &branch.nodes {
            let mut node = node.clone();
            for c in node.children.iter_mut() {
                *c = local(*c, &mut global, &mut state.leaves);
            }
            state.nodes.push(node);
        }
        for i in 0..state.nodes.len() {
            state.cache_node(i);
        }
        (state, global)
    }

    fn cache_node(&mut self, idx: usize) {
        let m = self.m;
        let d = self.dim();
        let tau = self.tau;
        let k = self.nodes[idx].centroids.len();
        self.offsets.push(self.dists.first().map_or(0, |v| v.len()));
        for i in 0..self.n() {
            let row = &self.x[i * d..(i + 1) * d];
            let v = &mut self.dists[i];
            let start = v.len();
            v.resize(start + k * m, 0.0);
            for (c, centroid) in self.nodes[idx].centroids.iter().enumerate() {
                role_distortions_into(
                    row,
                    centroid,
                    tau,
                    &mut v[start + c * m..start + (c + 1) * m],
                );
            }
        }
    }

    fn scores(&self, i: usize, node: usize) -> Vec<f64> {
        let m = self.m;
        let block = &self.dists[i][self.offsets[node]..];
        (0..self.nodes[node].children.len())
            .map(|c| -self.beta * dot(&self.alpha, &block[c * m..(c + 1) * m]))
            .collect()
    }

    fn hard_route_from(&self, i: usize, mut at: NodeRef) -> usize {
        let m = self.m;
        loop {
            match at {
                NodeRef::Leaf(k) => return k,
                NodeRef::Decision(n) => {
                    let block = &self.dists[i][self.offsets[n]..];
                    let mut best = 0;
                    let mut best_d = f64::INFINITY;
                    for c in 0..self.nodes[n].children.len() {
                        let d = dot(&self.alpha, &block[c * m..(c + 1) * m]);
                        if d < best_d {
                            best = c;
                            best_d = d;
                        }
                    }
                    at = self.nodes[n].children[best];
                }
            }
        }
    }

    fn hard_route(&self, i: usize) -> usize {
        self.hard_route_from(i, self.root)
    }

    fn soft_paths(&self, i: usize, want_grad: bool) -> Vec<Path> {
        let m = self.m;
        let mut out = Vec::new();
        let zeros = if want_grad { vec![0.0; m] } else { Vec::new() };
        let mut stack = vec![(self.root, 1.0, zeros)];
        while let Some((at, prob, dlogp)) = stack.pop() {
            match at {
                NodeRef::Leaf(leaf) => out.push(Path { leaf, prob, dlogp }),
                NodeRef::Decision(n) => {
                    let s = softmax(&self.scores(i, n));
                    let block = &self.dists[i][self.offsets[n]..];
                    let mut dbar = vec![0.0; if want_grad { m } else { 0 }];
                    if want_grad {
                        for (c, sc) in s.iter().enumerate() {
                            for l in 0..m {
                                dbar[l] += sc * block[c * m + l];
                            }
                        }
                    }
                    for (c, (child, sc)) in self.nodes[n].children.iter().zip(&s).enumerate() {
                        let g = if want_grad {
                            (0..m)
                                .map(|l| dlogp[l] - self.beta * (block[c * m + l] - dbar[l]))
                                .collect()
                        } else {
                            Vec::new()
                        };
                        stack.push((*child, prob * sc, g));
                    }
                }
            }
        }
        out
    }

    fn penalty(&self) -> f64 {
        let d = self.dim();
        self.live_leaves()
            .iter()
            .map(|&k| {
                0.5 * self.l2
                    * self.leaves[k].node.pi[..d]
                        .iter()
                        .map(|w| w * w)
                        .sum::<f64>()
            })
            .sum()
    }

    /// Mean loss over `batch` plus the penalty, with the requested gradients.
    fn evaluate(&self, batch: &[usize], want_pi: bool, want_alpha: bool) -> Grad {
        let d = self.dim();
        let inv = 1.0 / batch.len() as f64;
        let mut g = Grad {
            loss: 0.0,
            alpha: vec![0.0; if want_alpha { self.m } else { 0 }],
            pi: if want_pi {
                vec![Vec::new(); self.leaves.len()]
            } else {
                Vec::new()
            },
        };
        for &i in batch {
            let x = self.row(i);
            let p = self.labels[i];
            for path in self.soft_paths(i, want_alpha) {
                let leaf = &self.leaves[path.leaf].node;
                let f = sigmoid(leaf.logit_flat(x));
                let e = (p - f) * (p - f);
                g.loss += inv * path.prob * e;
                if want_alpha {
                    for (ga, dl) in g.alpha.iter_mut().zip(&path.dlogp) {
                        *ga += inv * path.prob * e * dl;
                    }
                }
                if want_pi {
                    let gp = &mut g.pi[path.leaf];
                    if gp.is_empty() {
                        gp.resize(d + 1, 0.0);
                    }
                    let coef = inv * path.prob * 2.0 * (f - p) * f * (1.0 - f);
                    let scaled = coef / leaf.scale;
                    for ((gw, xv), c) in gp[..d].iter_mut().zip(x).zip(&leaf.center) {
                        *gw += scaled * (xv - c);
                    }
                    gp[d] += coef;
                }
            }
        }
        g.loss += self.penalty();
        if want_pi {
            for k in self.live_leaves() {
                let gp = &mut g.pi[k];
                if gp.is_empty() {
                    gp.resize(d + 1, 0.0);
                }
                for (gw, w) in gp[..d].iter_mut().zip(&self.leaves[k].node.pi[..d]) {
                    *gw += self.l2 * w;
                }
            }
        }
        g
    }

    fn full_loss(&self) -> f64 {
        let all: Vec<usize> = (0..self.n()).collect();
        self.evaluate(&all, false, false).loss
    }

    fn live_leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(at) = stack.pop() {
            match at {
                NodeRef::Leaf(k) => out.push(k),
                NodeRef::Decision(n) => stack.extend(self.nodes[n].children.iter().rev()),
            }
        }
        out
    }

    fn new_leaf(
        &mut self,
        parent: Option<(usize, usize)>,
        center: Vec<f64>,
        members: &[usize],
        fallback: (f64, f64),
    ) -> usize {
        let d = self.dim();
        let (scale, bias) = if members.is_empty() {
            fallback
        } else {
            let ms: f64 = members
                .iter()
                .map(|&i| {
                    self.row(i)
                        .iter()
                        .zip(&center)
                        .map(|(x, c)| (x - c) * (x - c))
                        .sum::<f64>()
                })
                .sum::<f64>()
                / members.len() as f64;
            let scale = if ms > 0.0 { ms.sqrt() } else { fallback.0 };
            (scale, mean_logit(members.iter().map(|&i| self.labels[i])))
        };
        let mut pi = vec![0.0; d + 1];
        pi[d] = bias;
        self.leaves.push(Leaf {
            parent,
            node: PredictionNode {
                codebook_id: 0,
                play_type: self.play_type,
                pi,
                center,
                scale,
                assigned_count: 0,
            },
        });
        self.leaves.len() - 1
    }

    fn init_root(&mut self) {
        let d = self.dim();
        let n = self.n();
        let mut center = vec![0.0; d];
        for i in 0..n {
            for (c, x) in center.iter_mut().zip(self.row(i)) {
                *c += x;
            }
        }
        center.iter_mut().for_each(|c| *c /= n as f64);
        let all: Vec<usize> = (0..n).collect();
        let k = self.new_leaf(None, center, &all, (1.0, 0.0));
        self.root = NodeRef::Leaf(k);
    }

    /// Replaces a leaf by a decision node over a clustering of the plays it
    /// currently receives. Returns false if it has too few plays.
    fn split(&mut self, leaf: usize, depth: usize, b: usize) -> Result<bool> {
        let members: Vec<usize> = (0..self.n())
            .filter(|&i| self.hard_route(i) == leaf)
            .collect();
        if members.len() < b {
            return Ok(false);
        }
        let rows: Vec<&[f64]> = members.iter().map(|&i| self.row(i)).collect();
        let weights = FeatureWeights::project(&self.alpha);
        let clustering = cluster_node(&rows, self.tau, &weights, b)?;
        let node_idx = self.nodes.len();
        self.nodes.push(DecisionNode {
            depth,
            centroids: clustering.centroids,
            children: Vec::new(),
        });
        self.cache_node(node_idx);

        let mut routed = vec![Vec::new(); b];
        for &i in &members {
            let c = {
                let s = self.scores(i, node_idx);
                // highest score = smallest distortion; first index on ties
                let mut best = 0;
                for (c, v) in s.iter().enumerate() {
                    if *v > s[best] {
                        best = c;
                    }
                }
                best
            };
            routed[c].push(i);
        }
        let parent = &self.leaves[leaf];
        let fallback = (parent.node.scale, parent.node.pi[self.dim()]);
        let parent_ref = parent.parent;
        let mut children = Vec::with_capacity(b);
        for (c, members) in routed.iter().enumerate() {
            let center = self.nodes[node_idx].centroids[c].clone();
            children.push(NodeRef::Leaf(self.new_leaf(
                Some((node_idx, c)),
                center,
                members,
                fallback,
            )));
        }
        self.nodes[node_idx].children = children;
        match parent_ref {
            None => self.root = NodeRef::Decision(node_idx),
            Some((n, c)) => self.nodes[n].children[c] = NodeRef::Decision(node_idx),
        }
        Ok(true)
    }

    fn step_pi(&mut self, grad: &Grad, eta: f64) {
        for (leaf, g) in self.leaves.iter_mut().zip(&grad.pi) {
            for (w, gw) in leaf.node.pi.iter_mut().zip(g) {
                *w -= eta * gw;
            }
        }
    }

    fn step_alpha(&mut self, grad: &Grad, eta: f64) {
        let raw: Vec<f64> = self
            .alpha
            .iter()
            .zip(&grad.alpha)
            .map(|(a, g)| a - eta * g)
            .collect();
        self.alpha = FeatureWeights::project(&raw).as_slice().to_vec();
    }

    fn set_default_beta(&mut self, scale: f64, rng: &mut ChaCha8Rng) {
        let mut idx: Vec<usize> = (0..self.n()).collect();
        idx.shuffle(rng);
        idx.truncate(BETA_SAMPLE);
        idx.sort_unstable();
        let uniform = FeatureWeights::uniform(self.m);
        let mut d = Vec::with_capacity(idx.len() * idx.len() / 2);
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                d.push(weighted_distortion_flat(
                    self.row(i),
                    self.row(j),
                    self.tau,
                    &uniform,
                ));
            }
        }
        d.sort_by(f64::total_cmp);
        let median = match d.len() {
            0 => 0.0,
            n if n % 2 == 1 => d[n / 2],
            n => 0.5 * (d[n / 2 - 1] + d[n / 2]),
        };
        self.beta = if median > 0.0 { scale / median } else { scale };
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn minibatches(n: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(size).map(|c| c.to_vec()).collect()
}

struct Trained {
    branch: Branch,
    leaves: Vec<PredictionNode>,
    trace: Vec<(usize, usize, f64)>,
    pruned: usize,
}

fn train_branch(
    play_type: PlayType,
    plays: &[&Play],
    tau: usize,
    m: usize,
    cfg: &TreeConfig,
    notes: &mut Vec<String>,
) -> Result<Trained> {
    let mut rng = rng::seeded(cfg.rng_seed, play_type.index() as u64);
    let mut st = BranchState::new(play_type, plays, tau, m, cfg.l2);
    match cfg.beta {
        Some(b) => st.beta = b,
        None => st.set_default_beta(cfg.beta_scale, &mut rng),
    }
    st.init_root();
    let rounds = cfg.decision_layers().max(1);
    let mut trace = Vec::new();
    let mut growing = vec![match st.root {
        NodeRef::Leaf(k) => k,
        NodeRef::Decision(_) => unreachable!("fresh branch"),
    }];
    for layer in 0..rounds {
        if layer < cfg.decision_layers() {
            let mut next = Vec::new();
            for leaf in growing {
                if st.split(leaf, layer, cfg.branching_factor)? {
                    let NodeRef::Decision(n) = (match st.leaves[leaf].parent {
                        None => st.root,
                        Some((n, c)) => st.nodes[n].children[c],
                    }) else {
                        unreachable!("split installs a decision node")
                    };
                    next.extend(st.nodes[n].children.iter().map(|c| match c {
                        NodeRef::Leaf(k) => *k,
                        NodeRef::Decision(_) => unreachable!("new children are leaves"),
                    }));
                } else {
                    notes.push(format!(
                        "{play_type}: a leaf at layer {} has fewer than {} plays and stops splitting",
                        layer + 1,
                        cfg.branching_factor
                    ));
                }
            }
            growing = next;
        }
        for epoch in 0..cfg.epochs {
            if cfg.eta_pi > 0.0 {
                for batch in minibatches(st.n(), cfg.batch_size, &mut rng) {
                    let g = st.evaluate(&batch, true, false);
                    st.step_pi(&g, cfg.eta_pi);
                }
            }
            if cfg.eta_alpha > 0.0 && !st.nodes.is_empty() {
                for batch in minibatches(st.n(), cfg.batch_size, &mut rng) {
                    let g = st.evaluate(&batch, false, true);
                    st.step_alpha(&g, cfg.eta_alpha);
                }
            }
            let loss = st.full_loss();
            debug!("{play_type} layer {layer} epoch {epoch}: loss {loss:.6}");
            trace.push((layer, epoch, loss));
        }
    }
    Ok(finish_branch(st, trace))
}

/// Drops leaves that no training play reaches and compacts the nodes.
fn finish_branch(st: BranchState, trace: Vec<(usize, usize, f64)>) -> Trained {
    let mut counts = vec![0usize; st.leaves.len()];
    for i in 0..st.n() {
        counts[st.hard_route(i)] += 1;
    }
    let live = st.live_leaves();
    let mut nodes = Vec::new();
    let mut leaves = Vec::new();

    fn rebuild(
        at: NodeRef,
        st: &BranchState,
        counts: &[usize],
        nodes: &mut Vec<DecisionNode>,
        leaves: &mut Vec<PredictionNode>,
    ) -> Option<NodeRef> {
        match at {
            NodeRef::Leaf(k) => (counts[k] > 0).then(|| {
                let mut node = st.leaves[k].node.clone();
                node.assigned_count = counts[k];
                leaves.push(node);
                NodeRef::Leaf(leaves.len() - 1)
            }),
            NodeRef::Decision(n) => {
                let idx = nodes.len();
                nodes.push(DecisionNode {
                    depth: st.nodes[n].depth,
                    centroids: Vec::new(),
                    children: Vec::new(),
                });
                let mut centroids = Vec::new();
                let mut children = Vec::new();
                for (c, child) in st.nodes[n].children.iter().enumerate() {
                    if let Some(r) = rebuild(*child, st, counts, nodes, leaves) {
                        centroids.push(st.nodes[n].centroids[c].clone());
                        children.push(r);
                    }
                }
                if children.is_empty() {
                    nodes.truncate(idx);
                    return None;
                }
                nodes[idx].centroids = centroids;
                nodes[idx].children = children;
                Some(NodeRef::Decision(idx))
            }
        }
    }

    let root = rebuild(st.root, &st, &counts, &mut nodes, &mut leaves).expect("branch has plays");
    let pruned = live.len() - leaves.len();
    let alpha = FeatureWeights::project(&st.alpha);
    Trained {
        branch: Branch {
            play_type: st.play_type,
            alpha,
            beta: st.beta,
            nodes,
            root,
            n_train: st.n(),
        },
        leaves,
        trace,
        pruned,
    }
}

/// Grows and fits a tree on an aligned dataset.
pub fn train(dataset: &Dataset, config: &TreeConfig) -> Result<DeepDecisionTree> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (tau, m) = (dataset.tau, dataset.m);
    let mut report = TrainReport {
        target_codebook_size: config.target_codebook_size,
        ..Default::default()
    };
    if config.full_codebook_size() != config.target_codebook_size {
        report.notes.push(format!(
            "{} layers with branching {} give at most {} leaves, target is {}",
            config.n_layers,
            config.branching_factor,
            config.full_codebook_size(),
            config.target_codebook_size
        ));
    }

    let mut branches = Vec::new();
    let mut leaves: Vec<PredictionNode> = Vec::new();
    let mut traces = Vec::new();
    for play_type in PlayType::ALL {
        let plays: Vec<&Play> = dataset
            .plays
            .iter()
            .filter(|p| p.play_type == play_type)
            .collect();
        if plays.is_empty() {
            return Err(Error::invalid(format!(
                "no training plays of type {play_type}"
            )));
        }
        info!("training {play_type} branch on {} plays", plays.len());
        let mut t = train_branch(play_type, &plays, tau, m, config, &mut report.notes)?;
        let offset = leaves.len();
        let shift = |r: &mut NodeRef| {
            if let NodeRef::Leaf(k) = r {
                *k += offset;
            }
        };
        shift(&mut t.branch.root);
        t.branch
            .nodes
            .iter_mut()
            .flat_map(|n| n.children.iter_mut())
            .for_each(shift);
        for (k, mut leaf) in t.leaves.into_iter().enumerate() {
            leaf.codebook_id = offset + k;
            leaves.push(leaf);
        }
        report.pruned_leaves += t.pruned;
        traces.push((plays.len(), t.trace));
        branches.push(t.branch);
    }

    let n = dataset.len() as f64;
    let loss_trace = (0..traces[0].1.len())
        .map(|i| {
            let (layer, epoch, _) = traces[0].1[i];
            let loss = traces.iter().map(|(nb, tr)| *nb as f64 / n * tr[i].2).sum();
            EpochLoss { layer, epoch, loss }
        })
        .collect();
    report.realized_codebook_size = leaves.len();
    if report.realized_codebook_size != report.target_codebook_size {
        info!(
            "realised codebook has {} elements (target {})",
            report.realized_codebook_size, report.target_codebook_size
        );
    }
    Ok(DeepDecisionTree {
        config: config.clone(),
        tau,
        m,
        branches,
        leaves,
        loss_trace,
        report,
    })
}

/// Whole-tree objective and its gradient with respect to every branch's
/// `α` (unprojected) and every leaf's `π`, at the branches' own temperatures.
pub fn objective(tree: &DeepDecisionTree, dataset: &Dataset) -> Result<(f64, TreeGradient)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if dataset.tau != tree.tau || dataset.m != tree.m {
        return Err(Error::invalid("dataset shape does not match the tree"));
    }
    let n = dataset.len() as f64;
    let d = tree.flat_len();
    let mut total = 0.0;
    let mut grad = TreeGradient {
        alpha: Vec::new(),
        pi: vec![vec![0.0; d + 1]; tree.leaves.len()],
    };
    for branch in &tree.branches {
        let plays: Vec<&Play> = dataset
            .plays
            .iter()
            .filter(|p| p.play_type == branch.play_type)
            .collect();
        if plays.is_empty() {
            grad.alpha.push(vec![0.0; tree.m]);
            continue;
        }
        let share = plays.len() as f64 / n;
        let (st, global) = BranchState::from_tree(tree, branch, &plays, tree.config.l2);
        let all: Vec<usize> = (0..st.n()).collect();
        let g = st.evaluate(&all, true, true);
        total += share * g.loss;
        grad.alpha.push(g.alpha.iter().map(|v| share * v).collect());
        for (local, gk) in g.pi.iter().enumerate() {
            for (acc, v) in grad.pi[global[local]].iter_mut().zip(gk) {
                *acc += share * v;
            }
        }
    }
    if dataset
        .plays
        .iter()
        .any(|p| tree.branch(p.play_type).is_err())
    {
        return Err(Error::invalid("dataset has plays of a type the tree lacks"));
    }
    Ok((total, grad))
}
