//! Log-linear Poisson season model with home, attack and defence effects,
//! fitted by penalised maximum likelihood under sum-to-zero constraints.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{MatchResult, SimulationConfig};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoissonConfig {
    /// Penalty on the attack and defence effects.
    pub l2: f64,
    pub max_iters: usize,
    /// Stop once the gradient norm falls below this.
    pub tol: f64,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        PoissonConfig {
            l2: 1e-3,
            max_iters: 200,
            tol: 1e-9,
        }
    }
}

/// `log θ_home = home + att[h] + def[a]`, `log θ_away = att[a] + def[h]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonSeasonModel {
    pub teams: Vec<u32>,
    pub home: f64,
    pub att: Vec<f64>,
    pub def: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
}

impl PoissonSeasonModel {
    pub fn team_index(&self, team: u32) -> Result<usize> {
        self.teams
            .binary_search(&team)
            .map_err(|_| Error::UnknownTeam(team))
    }

    /// Expected goals `(θ_home, θ_away)`.
    pub fn theta(&self, home: u32, away: u32) -> Result<[f64; 2]> {
        let (h, a) = (self.team_index(home)?, self.team_index(away)?);
        Ok([
            (self.home + self.att[h] + self.def[a]).exp(),
            (self.att[a] + self.def[h]).exp(),
        ])
    }
}

/// Reduced parameter layout: `[home, att_0..att_{T-2}, def_0..def_{T-2}]`;
/// the last team's effects are minus the sum of the others.
struct Layout {
    t: usize,
}

impl Layout {
    fn dim(&self) -> usize {
        2 * self.t - 1
    }

    /// Adds `scale` times the reduced-coordinate row for effect `team` of
    /// block `block` (0 attack, 1 defence).
    fn add(&self, row: &mut [f64], block: usize, team: usize, scale: f64) {
        let base = 1 + block * (self.t - 1);
        if team + 1 < self.t {
            row[base + team] += scale;
        } else {
            for v in &mut row[base..base + self.t - 1] {
                *v -= scale;
            }
        }
    }

    fn expand(&self, p: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let block = |b: usize| {
            let base = 1 + b * (self.t - 1);
            let mut v = p[base..base + self.t - 1].to_vec();
            v.push(-v.iter().sum::<f64>());
            v
        };
        (p[0], block(0), block(1))
    }
}

fn teams_of(results: &[MatchResult]) -> Vec<u32> {
    let mut teams: Vec<u32> = results
        .iter()
        .flat_map(|r| [r.home_team, r.away_team])
        .collect();
    teams.sort_unstable();
    teams.dedup();
    teams
}

fn check_connected(teams: &[u32], edges: &[(usize, usize)]) -> Result<()> {
    let mut parent: Vec<usize> = (0..teams.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra] = rb;
    }
    let root = find(&mut parent, 0);
    if let Some(i) = (0..teams.len()).find(|&i| find(&mut parent, i) != root) {
        return Err(Error::DisconnectedSchedule(format!(
            "team {} is not linked to team {} by any chain of matches",
            teams[i], teams[0]
        )));
    }
    Ok(())
}

pub fn fit_poisson(results: &[MatchResult]) -> Result<PoissonSeasonModel> {
    fit_poisson_with(results, &PoissonConfig::default(), None)
}

/// Newton's method with backtracking on
/// `Σ (θ − y log θ) + (l2/2)(‖att‖² + ‖def‖²)`,
/// optionally from a given reduced starting point.
pub fn fit_poisson_with(
    results: &[MatchResult],
    cfg: &PoissonConfig,
    init: Option<&[f64]>,
) -> Result<PoissonSeasonModel> {
    if results.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let teams = teams_of(results);
    let t = teams.len();
    if t < 2 {
        return Err(Error::invalid("a season needs at least two teams"));
    }
    let index = |team: u32| teams.binary_search(&team).expect("collected above");
    let edges: Vec<(usize, usize)> = results
        .iter()
        .map(|r| (index(r.home_team), index(r.away_team)))
        .collect();
    check_connected(&teams, &edges)?;

    let layout = Layout { t };
    let dim = layout.dim();
    let n_obs = 2 * results.len();
    let mut x = DMatrix::zeros(n_obs, dim);
    let mut y = DVector::zeros(n_obs);
    for (k, (r, &(h, a))) in results.iter().zip(&edges).enumerate() {
        let mut row = vec![0.0; dim];
        row[0] = 1.0;
        layout.add(&mut row, 0, h, 1.0);
        layout.add(&mut row, 1, a, 1.0);
        x.row_mut(2 * k).copy_from_slice(&row);
        let mut row = vec![0.0; dim];
        layout.add(&mut row, 0, a, 1.0);
        layout.add(&mut row, 1, h, 1.0);
        x.row_mut(2 * k + 1).copy_from_slice(&row);
        y[2 * k] = f64::from(r.goals[0]);
        y[2 * k + 1] = f64::from(r.goals[1]);
    }
    // penalty on the full effects: ‖P p‖² with P expanding reduced to full
    let mut pen = DMatrix::zeros(dim, dim);
    for block in 0..2 {
        for team in 0..t {
            let mut row = vec![0.0; dim];
            layout.add(&mut row, block, team, 1.0);
            let r = DVector::from_vec(row);
            pen += &r * r.transpose();
        }
    }
    pen *= cfg.l2;

    let objective = |p: &DVector<f64>| -> f64 {
        let eta = &x * p;
        let nll: f64 = eta.iter().zip(y.iter()).map(|(e, y)| e.exp() - y * e).sum();
        nll + 0.5 * p.dot(&(&pen * p))
    };

    let mut p = match init {
        Some(v) if v.len() == dim => DVector::from_column_slice(v),
        Some(v) => {
            return Err(Error::invalid(format!(
                "initial point has {} values, expected {dim}",
                v.len()
            )))
        }
        None => DVector::zeros(dim),
    };
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;
    let mut f = objective(&p);
    for it in 0..cfg.max_iters {
        let eta = &x * &p;
        let mu = eta.map(f64::exp);
        let grad = x.transpose() * (&mu - &y) + &pen * &p;
        grad_norm = grad.norm();
        iterations = it;
        if grad_norm < cfg.tol {
            break;
        }
        let weighted = DMatrix::from_fn(n_obs, dim, |i, j| x[(i, j)] * mu[i]);
        let hess = x.transpose() * weighted + &pen;
        let step = match hess.clone().cholesky() {
            Some(c) => c.solve(&grad),
            None => {
                let mut h = hess;
                for j in 0..dim {
                    h[(j, j)] += 1e-8;
                }
                h.cholesky()
                    .ok_or_else(|| Error::invalid("Poisson Hessian is not positive definite"))?
                    .solve(&grad)
            }
        };
        let slope = -grad.dot(&step);
        let mut s = 1.0;
        loop {
            let cand = &p - s * &step;
            let fc = objective(&cand);
            if fc <= f + 1e-4 * s * slope || s < 1e-10 {
                p = cand;
                f = fc;
                break;
            }
            s *= 0.5;
        }
        iterations = it + 1;
    }
    if grad_norm >= cfg.tol {
        let mu = (&x * &p).map(f64::exp);
        grad_norm = (x.transpose() * (&mu - &y) + &pen * &p).norm();
    }
    let (home, att, def) = layout.expand(p.as_slice());
    Ok(PoissonSeasonModel {
        teams,
        home,
        att,
        def,
        iterations,
        grad_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BhmPrediction {
    /// Monte-Carlo mean score over the runs.
    pub mean: [f64; 2],
    /// Analytic expected goals.
    pub theta: [f64; 2],
}

/// Averages `n_runs` independent Poisson score draws; run `i` uses the
/// stream seeded by `(rng_seed, i)`.
pub fn simulate_bhm(
    model: &PoissonSeasonModel,
    home: u32,
    away: u32,
    cfg: &SimulationConfig,
) -> Result<BhmPrediction> {
    cfg.validate()?;
    let theta = model.theta(home, away)?;
    let dists = [
        Poisson::new(theta[0]).map_err(|e| Error::invalid(e.to_string()))?,
        Poisson::new(theta[1]).map_err(|e| Error::invalid(e.to_string()))?,
    ];
    let mut sum = [0.0; 2];
    for i in 0..cfg.n_runs {
        let mut r = rng::seeded(cfg.rng_seed, i as u64);
        for (s, d) in sum.iter_mut().zip(&dists) {
            *s += d.sample(&mut r);
        }
    }
    let n = cfg.n_runs as f64;
    Ok(BhmPrediction {
        mean: [sum[0] / n, sum[1] / n],
        theta,
    })
}
