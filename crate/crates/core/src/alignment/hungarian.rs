//! Optimal linear assignment with deterministic tie-breaking.
//!
//! The dense O(n³) shortest-augmenting-path Hungarian method yields optimal
//! dual potentials. Every optimal assignment uses only edges with zero reduced
//! cost, so the lexicographically smallest optimum is recovered by a greedy
//! row-by-row pick over that tight subgraph, keeping a perfect matching
//! feasible at each step.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// `permutation[row] = column`.
    pub permutation: Vec<usize>,
    pub cost: f64,
}

impl Assignment {
    pub fn is_identity(&self) -> bool {
        self.permutation.iter().enumerate().all(|(i, &j)| i == j)
    }
}

/// Row-order sum of `cost[i][perm[i]]`.
pub fn assignment_cost(cost: &[Vec<f64>], perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum()
}

fn validate(cost: &[Vec<f64>]) -> Result<()> {
    let n = cost.len();
    for (i, row) in cost.iter().enumerate() {
        if row.len() != n {
            return Err(Error::invalid(format!(
                "cost matrix is not square: row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("non-finite cost at ({i}, {j})")));
        }
    }
    Ok(())
}

/// Optimal dual potentials `(u, v)` (1-based, index 0 unused).
fn potentials(cost: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = cost.len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (u, v)
}

/// Kuhn's augmenting path on the tight graph restricted to free columns.
fn augment(
    row: usize,
    tight: &[Vec<usize>],
    col_owner: &mut [Option<usize>],
    seen: &mut [bool],
) -> bool {
    for &j in &tight[row] {
        if seen[j] {
            continue;
        }
        seen[j] = true;
        let free = match col_owner[j] {
            None => true,
            Some(r) => augment(r, tight, col_owner, seen),
        };
        if free {
            col_owner[j] = Some(row);
            return true;
        }
    }
    false
}

/// Whether rows `from..n` can be perfectly matched to columns not in `taken`.
fn completable(from: usize, tight: &[Vec<usize>], taken: &[bool]) -> bool {
    let n = tight.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for row in from..n {
        let mut seen = taken.to_vec();
        if !augment(row, tight, &mut owner, &mut seen) {
            return false;
        }
    }
    true
}

/// Minimum-cost assignment; among equal-cost optima the lexicographically
/// smallest permutation is returned.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<Assignment> {
    validate(cost)?;
    let n = cost.len();
    if n == 0 {
        return Ok(Assignment {
            permutation: Vec::new(),
            cost: 0.0,
        });
    }
    let (u, v) = potentials(cost);
    let scale = cost
        .iter()
        .flatten()
        .fold(0.0f64, |acc, c| acc.max(c.abs()));
    let eps = 1e-9 * (1.0 + scale);
    let tight: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| cost[i][j] - u[i + 1] - v[j + 1] <= eps)
                .collect()
        })
        .collect();

    let mut taken = vec![false; n];
    let mut permutation = Vec::with_capacity(n);
    for i in 0..n {
        let pick = tight[i].iter().copied().find(|&j| {
            if taken[j] {
                return false;
            }
            taken[j] = true;
            let ok = completable(i + 1, &tight, &taken);
            taken[j] = false;
            ok
        });
        let j = pick.expect("tight graph of an optimal dual admits a perfect matching");
        taken[j] = true;
        permutation.push(j);
    }
    let total = assignment_cost(cost, &permutation);
    Ok(Assignment {
        permutation,
        cost: total,
    })
}
