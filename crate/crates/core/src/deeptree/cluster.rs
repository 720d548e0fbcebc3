//! Average-linkage agglomerative clustering under the weighted distortion.

use super::distortion::{weighted_distortion_flat, FeatureWeights};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cluster index per input row. Clusters are numbered by their smallest
    /// member index.
    pub labels: Vec<usize>,
    /// Coordinate-wise mean of each cluster's rows.
    pub centroids: Vec<Vec<f64>>,
}

impl Clustering {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centroids.len()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Sum over rows of the weighted distortion to their own centroid.
    pub fn total_distortion(&self, rows: &[&[f64]], tau: usize, w: &FeatureWeights) -> f64 {
        rows.iter()
            .zip(&self.labels)
            .map(|(r, &l)| weighted_distortion_flat(r, &self.centroids[l], tau, w))
            .sum()
    }
}

pub fn centroids(rows: &[&[f64]], labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = rows.first().map_or(0, |r| r.len());
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (r, &l) in rows.iter().zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(r.iter()) {
            *s += x;
        }
    }
    for (s, n) in sums.iter_mut().zip(&counts) {
        if *n > 0 {
            let n = *n as f64;
            s.iter_mut().for_each(|x| *x /= n);
        }
    }
    sums
}

/// Merges clusters until `b` remain, always joining the pair with the
/// smallest average pairwise distortion. Ties go to the pair whose
/// (smaller, larger) representative indices are lexicographically smallest,
/// where a cluster's representative is its smallest member index.
pub fn cluster_node(
    rows: &[&[f64]],
    tau: usize,
    w: &FeatureWeights,
    b: usize,
) -> Result<Clustering> {
    let n = rows.len();
    if b == 0 || n < b {
        return Err(Error::invalid(format!(
            "cannot form {b} clusters from {n} plays"
        )));
    }
    let dim = rows[0].len();
    if tau == 0 || rows.iter().any(|r| r.len() != dim) || dim != 2 * tau * w.len() {
        return Err(Error::invalid(
            "rows do not match the weight and frame dimensions",
        ));
    }

    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = weighted_distortion_flat(rows[i], rows[j], tau, w);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut parent: Vec<usize> = (0..n).collect();
    // nearest active neighbour with a larger index, ties to the smaller index
    let mut nn: Vec<Option<usize>> = vec![None; n];
    let scan = |i: usize, active: &[bool], dist: &[f64]| -> Option<usize> {
        let mut best: Option<usize> = None;
        for j in i + 1..n {
            if active[j] && best.is_none_or(|bj| dist[i * n + j] < dist[i * n + bj]) {
                best = Some(j);
            }
        }
        best
    };
    for i in 0..n {
        nn[i] = scan(i, &active, &dist);
    }

    let mut remaining = n;
    while remaining > b {
        let mut pair: Option<(usize, usize)> = None;
        for i in 0..n {
            if let (true, Some(j)) = (active[i], nn[i]) {
                if pair.is_none_or(|(pi, pj)| dist[i * n + j] < dist[pi * n + pj]) {
                    pair = Some((i, j));
                }
            }
        }
        let (i, j) = pair.expect("at least two active clusters");
        let (si, sj) = (size[i] as f64, size[j] as f64);
        for k in 0..n {
            if active[k] && k != i && k != j {
                let d = (si * dist[i * n + k] + sj * dist[j * n + k]) / (si + sj);
                dist[i * n + k] = d;
                dist[k * n + i] = d;
            }
        }
        active[j] = false;
        size[i] += size[j];
        parent[j] = i;
        remaining -= 1;

        nn[i] = scan(i, &active, &dist);
        for k in 0..n {
            if !active[k] || k == i {
                continue;
            }
            match nn[k] {
                Some(x) if x == i || x == j => nn[k] = scan(k, &active, &dist),
                Some(x) if k < i => {
                    let d = dist[k * n + i];
                    let cur = dist[k * n + x];
                    if d < cur || (d == cur && i < x) {
                        nn[k] = Some(i);
                    }
                }
                _ => {}
            }
        }
    }

    // representatives are the lowest member indices, so numbering by
    // first appearance orders clusters by their smallest member
    let root = |mut x: usize| {
        while parent[x] != x {
            x = parent[x];
        }
        x
    };
    let mut ids = vec![usize::MAX; n];
    let mut next = 0;
    let labels: Vec<usize> = (0..n)
        .map(|x| {
            let r = root(x);
            if ids[r] == usize::MAX {
                ids[r] = next;
                next += 1;
            }
            ids[r]
        })
        .collect();
    let centroids = centroids(rows, &labels, b);
    Ok(Clustering { labels, centroids })
}
