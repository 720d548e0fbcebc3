use super::*;
use crate::trajectory::{unflatten, Pitch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TAU: usize = 2;
const M: usize = 2;
const D: usize = 2 * TAU * M;

fn play_at(x: &[f64], label: bool, play_type: PlayType) -> Play {
    let (attacking, defending) = unflatten(x, TAU, M);
    Play {
        attacking,
        defending,
        label,
        play_type,
        attacking_team: 0,
        defending_team: 1,
        is_home: true,
        shot_clock_s: 0.0,
        match_id: 0,
    }
}

fn dataset(plays: Vec<Play>) -> Dataset {
    Dataset::new(plays, TAU, M, Pitch::default(), 10.0, []).unwrap()
}

fn random_x(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..D).map(|_| 20.0 + rng.random::<f64>() * 40.0).collect()
}

fn leaf(id: usize, rng: &mut ChaCha8Rng, center: Vec<f64>) -> PredictionNode {
    PredictionNode {
        codebook_id: id,
        play_type: PlayType::OpenPlay,
        pi: (0..=D).map(|_| rng.random::<f64>() - 0.5).collect(),
        center,
        scale: 15.0,
        assigned_count: 0,
    }
}

/// One open-play branch with a single decision node over two leaves.
fn toy_tree(rng: &mut ChaCha8Rng, alpha: Vec<f64>, beta: f64) -> DeepDecisionTree {
    let c0 = random_x(rng);
    let c1 = random_x(rng);
    DeepDecisionTree {
        config: TreeConfig {
            l2: 0.3,
            ..TreeConfig::default()
        },
        tau: TAU,
        m: M,
        branches: vec![Branch {
            play_type: PlayType::OpenPlay,
            alpha: FeatureWeights::from_unchecked(alpha),
            beta,
            nodes: vec![DecisionNode {
                depth: 0,
                centroids: vec![c0.clone(), c1.clone()],
                children: vec![NodeRef::Leaf(0), NodeRef::Leaf(1)],
            }],
            root: NodeRef::Decision(0),
            n_train: 0,
        }],
        leaves: vec![leaf(0, rng, c0), leaf(1, rng, c1)],
        loss_trace: vec![],
        report: TrainReport::default(),
    }
}

/// Two decision layers, 2 x 2 leaves, random centroids.
fn deep_toy(rng: &mut ChaCha8Rng) -> DeepDecisionTree {
    let mut nodes = vec![DecisionNode {
        depth: 0,
        centroids: vec![random_x(rng), random_x(rng)],
        children: vec![NodeRef::Decision(1), NodeRef::Decision(2)],
    }];
    let mut leaves = Vec::new();
    for n in 0..2 {
        let cs = vec![random_x(rng), random_x(rng)];
        let children = (0..2).map(|c| NodeRef::Leaf(2 * n + c)).collect();
        for c in &cs {
            leaves.push(leaf(leaves.len(), rng, c.clone()));
        }
        nodes.push(DecisionNode {
            depth: 1,
            centroids: cs,
            children,
        });
    }
    DeepDecisionTree {
        config: TreeConfig::default(),
        tau: TAU,
        m: M,
        branches: vec![Branch {
            play_type: PlayType::OpenPlay,
            alpha: FeatureWeights::project(&[0.7, 1.3]),
            beta: 0.01,
            nodes,
            root: NodeRef::Decision(0),
            n_train: 0,
        }],
        leaves,
        loss_trace: vec![],
        report: TrainReport::default(),
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-10
}

#[test]
fn leaf_prediction_extremes() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = random_x(&mut rng);
    let play = play_at(&x, false, PlayType::OpenPlay);
    let mut node = leaf(0, &mut rng, x.clone());
    node.pi = vec![0.0; D + 1];
    assert_eq!(leaf_predict(&node, &play), 0.5);
    node.pi[D] = 20.0;
    assert!(leaf_predict(&node, &play) > 0.999);
    node.pi[D] = -800.0;
    let q = leaf_predict(&node, &play);
    assert!((0.0..1.0).contains(&q));
}

#[test]
fn hard_routing_follows_centroids_and_breaks_ties_low() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tree = toy_tree(&mut rng, vec![1.0, 1.0], 0.05);
    let c1 = tree.branches[0].nodes[0].centroids[1].clone();
    assert_eq!(
        tree.route_hard(&play_at(&c1, false, PlayType::OpenPlay))
            .unwrap(),
        1
    );

    let mut tie = toy_tree(&mut rng, vec![1.0, 1.0], 0.05);
    let base: Vec<f64> = vec![30.0; D];
    let mut a = base.clone();
    let mut b = base.clone();
    a[0] += 2.0;
    b[0] -= 2.0;
    tie.branches[0].nodes[0].centroids = vec![a, b];
    assert_eq!(
        tie.route_hard(&play_at(&base, false, PlayType::OpenPlay))
            .unwrap(),
        0
    );
    assert!(tie
        .route_hard(&play_at(&base, false, PlayType::Corner))
        .is_err());
}

#[test]
fn soft_routing_normalises_and_limits() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let tree = deep_toy(&mut rng);
    let mut agree = 0;
    for _ in 0..200 {
        let play = play_at(&random_x(&mut rng), false, PlayType::OpenPlay);
        let soft = tree.route_soft(&play).unwrap();
        assert!((soft.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let uniform = tree.route_soft_with(&play, 0.0).unwrap();
        assert!(uniform.iter().all(|p| (p - 0.25).abs() < 1e-15));
        let hard = tree.route_hard(&play).unwrap();
        assert_eq!(
            tree.route_soft_with(&play, f64::INFINITY).unwrap()[hard],
            1.0
        );
        let sharp = tree.route_soft_with(&play, 1e6).unwrap();
        let argmax = (0..4)
            .max_by(|&a, &b| sharp[a].total_cmp(&sharp[b]))
            .unwrap();
        agree += usize::from(argmax == hard);
    }
    assert!(agree >= 198, "{agree}");
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tree = toy_tree(&mut rng, vec![0.8, 1.2], 0.02);
    let plays: Vec<Play> = (0..5)
        .map(|i| play_at(&random_x(&mut rng), i % 2 == 0, PlayType::OpenPlay))
        .collect();
    let data = dataset(plays);
    let (_, grad) = objective(&tree, &data).unwrap();
    let h = 1e-5;

    for l in 0..M {
        let eval = |delta: f64| {
            let mut t = tree.clone();
            let mut a = t.branches[0].alpha.as_slice().to_vec();
            a[l] += delta;
            t.branches[0].alpha = FeatureWeights::from_unchecked(a);
            objective(&t, &data).unwrap().0
        };
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        assert!(
            close(grad.alpha[0][l], fd, 1e-4),
            "alpha {l}: {} vs {fd}",
            grad.alpha[0][l]
        );
    }
    for k in 0..2 {
        for j in 0..=D {
            let eval = |delta: f64| {
                let mut t = tree.clone();
                t.leaves[k].pi[j] += delta;
                objective(&t, &data).unwrap().0
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            assert!(
                close(grad.pi[k][j], fd, 1e-4),
                "pi {k},{j}: {} vs {fd}",
                grad.pi[k][j]
            );
        }
    }
}

#[test]
fn logloss_closed_forms() {
    assert!((log_loss(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    let near_zero = log_loss(&[0.0; 4], &[0.0; 4]).unwrap();
    assert!(near_zero > 0.0 && near_zero < 1e-8);
    assert!(matches!(log_loss(&[], &[]), Err(Error::EmptyDataset)));

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p: Vec<f64> = (0..100).map(|_| f64::from(rng.random::<bool>())).collect();
    let q: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
    let mut naive = 0.0;
    for i in 0..100 {
        let qi = q[i].clamp(1e-9, 1.0 - 1e-9);
        naive -= p[i] * qi.ln() + (1.0 - p[i]) * (1.0 - qi).ln();
    }
    assert!((log_loss(&p, &q).unwrap() - naive / 100.0).abs() < 1e-12);
}

#[test]
fn constant_half_tree_has_ln2_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tree = toy_tree(&mut rng, vec![1.0, 1.0], 0.05);
    for l in &mut tree.leaves {
        l.pi = vec![0.0; D + 1];
    }
    let plays = (0..10)
        .map(|i| play_at(&random_x(&mut rng), i < 3, PlayType::OpenPlay))
        .collect();
    let loss = evaluate_logloss(&tree, &dataset(plays)).unwrap();
    assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    assert!(matches!(
        evaluate_logloss(&tree, &dataset(vec![])),
        Err(Error::EmptyDataset)
    ));
}

/// Four play types, each with three well-separated groups whose labels
/// depend only on the group.
fn grouped_dataset(rng: &mut ChaCha8Rng, per_group: usize) -> Dataset {
    let mut plays = Vec::new();
    for pt in PlayType::ALL {
        for i in 0..3 * per_group {
            let g = i % 3;
            let mut x: Vec<f64> = (0..D).map(|_| 30.0 + rng.random::<f64>()).collect();
            // role 1 carries the group
            for v in &mut x[2 * TAU..] {
                *v += 12.0 * g as f64;
            }
            let p = [0.1, 0.8, 0.3][g];
            plays.push(play_at(&x, rng.random::<f64>() < p, pt));
        }
    }
    dataset(plays)
}

#[test]
fn training_reduces_loss_and_keeps_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let data = grouped_dataset(&mut rng, 20);
    let cfg = TreeConfig {
        n_layers: 3,
        target_codebook_size: 12,
        epochs: 15,
        batch_size: 8,
        beta_scale: 1.0,
        eta_alpha: 0.01,
        eta_pi: 0.05,
        ..TreeConfig::default()
    };
    let tree = train(&data, &cfg).unwrap();
    assert!(tree.leaves.len() <= cfg.target_codebook_size);
    assert_eq!(tree.report.realized_codebook_size, tree.leaves.len());
    let first = tree.loss_trace.first().unwrap().loss;
    let last = tree.loss_trace.last().unwrap().loss;
    assert!(last < first, "{first} -> {last}");

    let mut hits = vec![0; tree.leaves.len()];
    for p in &data.plays {
        hits[tree.route_hard(p).unwrap()] += 1;
    }
    for (k, leaf) in tree.leaves.iter().enumerate() {
        assert!(hits[k] > 0);
        assert_eq!(hits[k], leaf.assigned_count);
        assert_eq!(leaf.codebook_id, k);
    }
    for b in &tree.branches {
        let a = b.alpha.as_slice();
        assert!(a.iter().all(|v| *v >= 0.0));
        assert!((a.iter().sum::<f64>() - M as f64).abs() < 1e-9);
        assert_eq!(b.alpha.argmax(), 1);
    }
}

#[test]
fn frozen_weights_reproduce_clustering() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let data = grouped_dataset(&mut rng, 10);
    let cfg = TreeConfig {
        n_layers: 3,
        eta_alpha: 0.0,
        epochs: 3,
        ..TreeConfig::default()
    };
    let tree = train(&data, &cfg).unwrap();
    for pt in PlayType::ALL {
        let plays: Vec<&Play> = data.plays.iter().filter(|p| p.play_type == pt).collect();
        let flat: Vec<Vec<f64>> = plays.iter().map(|p| p.flatten()).collect();
        let rows: Vec<&[f64]> = flat.iter().map(|r| r.as_slice()).collect();
        let oracle = cluster_node(&rows, TAU, &FeatureWeights::uniform(M), 3).unwrap();
        let routed: Vec<usize> = plays.iter().map(|p| tree.route_hard(p).unwrap()).collect();
        for i in 0..plays.len() {
            for j in 0..plays.len() {
                assert_eq!(routed[i] == routed[j], oracle.labels[i] == oracle.labels[j]);
            }
        }
    }
}

#[test]
fn training_is_deterministic_and_serialisable() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data = grouped_dataset(&mut rng, 6);
    let cfg = TreeConfig {
        n_layers: 3,
        epochs: 2,
        ..TreeConfig::default()
    };
    let a = train(&data, &cfg).unwrap();
    let b = train(&data, &cfg).unwrap();
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tree.json");
    a.save(&path).unwrap();
    assert_eq!(DeepDecisionTree::load(&path).unwrap(), a);
}

#[test]
fn small_branches_stop_early() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut plays = Vec::new();
    for pt in PlayType::ALL {
        let n = if pt == PlayType::Corner { 2 } else { 12 };
        for i in 0..n {
            plays.push(play_at(&random_x(&mut rng), i % 2 == 0, pt));
        }
    }
    let tree = train(
        &dataset(plays),
        &TreeConfig {
            epochs: 1,
            ..TreeConfig::default()
        },
    )
    .unwrap();
    let corner = tree.branch(PlayType::Corner).unwrap();
    assert!(matches!(corner.root, NodeRef::Leaf(_)));
    assert!(tree.report.notes.iter().any(|n| n.contains("corner")));
    assert!(tree.leaves.len() < 36);
}

#[test]
fn rejects_missing_play_type_and_bad_config() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let plays = (0..10)
        .map(|_| play_at(&random_x(&mut rng), false, PlayType::OpenPlay))
        .collect();
    assert!(train(&dataset(plays), &TreeConfig::default()).is_err());
    assert!(TreeConfig {
        n_layers: 1,
        ..TreeConfig::default()
    }
    .validate()
    .is_err());
    assert!(TreeConfig {
        batch_size: 0,
        ..TreeConfig::default()
    }
    .validate()
    .is_err());
    assert!(TreeConfig {
        eta_pi: f64::NAN,
        ..TreeConfig::default()
    }
    .validate()
    .is_err());
}
