//! Linear regression of each team's time to its next shot.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::trajectory::{Dataset, Play};
use crate::{Error, Result};

/// Minimum inter-arrival observations required per team.
pub const MIN_GAPS_PER_TEAM: usize = 10;
/// Ridge used when the design matrix is rank deficient.
pub const RIDGE_FALLBACK: f64 = 1e-6;
/// Floor on predicted inter-arrival times, in seconds.
pub const MIN_INTERARRIVAL_S: f64 = 1.0;
/// Cap on refits when imputing censored waits.
pub const MAX_IMPUTATION_ROUNDS: usize = 500;

/// Match state seen by the team about to shoot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotContext {
    pub is_home: bool,
    /// Own goals minus opponent goals.
    pub goal_diff: i32,
    /// Share of regulation time still to play, in `[0, 1]`.
    pub remaining: f64,
}

impl ShotContext {
    pub fn kickoff(is_home: bool) -> Self {
        ShotContext {
            is_home,
            goal_diff: 0,
            remaining: 1.0,
        }
    }

    pub fn at(is_home: bool, goal_diff: i32, t: f64, match_length_s: f64) -> Self {
        ShotContext {
            is_home,
            goal_diff,
            remaining: (1.0 - t / match_length_s).clamp(0.0, 1.0),
        }
    }
}

/// One wait for a team's next shot, with the context at its start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interarrival {
    pub team: u32,
    pub context: ShotContext,
    pub gap_s: f64,
    /// The match ended before the shot came; `gap_s` is a lower bound.
    pub censored: bool,
}

/// Weights over `[1, team indicators for teams[1..], (is_home, goal_diff,
/// remaining)]`; the context block is present only `with_context`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotClockModel {
    pub with_context: bool,
    pub teams: Vec<u32>,
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub match_length_s: f64,
    pub ridge_used: bool,
}

impl ShotClockModel {
    fn features(
        teams: &[u32],
        with_context: bool,
        team: u32,
        ctx: &ShotContext,
    ) -> Result<Vec<f64>> {
        let idx = teams
            .binary_search(&team)
            .map_err(|_| Error::UnknownTeam(team))?;
        let mut row = vec![0.0; teams.len()];
        row[0] = 1.0;
        if idx > 0 {
            row[idx] = 1.0;
        }
        if with_context {
            row.extend([
                f64::from(u8::from(ctx.is_home)),
                f64::from(ctx.goal_diff),
                ctx.remaining,
            ]);
        }
        Ok(row)
    }

    pub fn raw_prediction(&self, team: u32, ctx: &ShotContext) -> Result<f64> {
        let x = Self::features(&self.teams, self.with_context, team, ctx)?;
        Ok(x.iter().zip(&self.weights).map(|(a, b)| a * b).sum())
    }

    /// Expected seconds to the team's next shot, at least one second.
    pub fn predict(&self, team: u32, ctx: &ShotContext) -> Result<f64> {
        Ok(self.raw_prediction(team, ctx)?.max(MIN_INTERARRIVAL_S))
    }

    pub fn weight(&self, name: &str) -> Option<f64> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.weights[i])
    }
}

/// Shots sorted by time within each match, keyed by match id.
fn matches(dataset: &Dataset) -> BTreeMap<u32, Vec<&Play>> {
    let mut out: BTreeMap<u32, Vec<&Play>> = BTreeMap::new();
    for p in &dataset.plays {
        out.entry(p.match_id).or_default().push(p);
    }
    for shots in out.values_mut() {
        shots.sort_by(|a, b| a.shot_clock_s.total_cmp(&b.shot_clock_s));
    }
    out
}

/// Per-team waits between consecutive shots, the first from kickoff, with
/// the score and clock at each wait's start. The wait after a team's last
/// shot runs to full time (or to the match's last shot, if later) and is
/// marked censored.
pub fn interarrivals(dataset: &Dataset, match_length_s: f64) -> Vec<Interarrival> {
    let mut out = Vec::new();
    for shots in matches(dataset).values() {
        let mut goals: BTreeMap<u32, i32> = BTreeMap::new();
        let mut last: BTreeMap<u32, (f64, ShotContext)> = BTreeMap::new();
        for p in shots {
            let (team, opp) = (p.attacking_team, p.defending_team);
            let (t0, ctx) = last
                .get(&team)
                .copied()
                .unwrap_or((0.0, ShotContext::kickoff(p.is_home)));
            out.push(Interarrival {
                team,
                context: ctx,
                gap_s: p.shot_clock_s - t0,
                censored: false,
            });
            if p.label {
                *goals.entry(team).or_default() += 1;
            }
            let diff =
                goals.get(&team).copied().unwrap_or(0) - goals.get(&opp).copied().unwrap_or(0);
            last.insert(
                team,
                (
                    p.shot_clock_s,
                    ShotContext::at(p.is_home, diff, p.shot_clock_s, match_length_s),
                ),
            );
        }
        let end = shots
            .last()
            .map_or(match_length_s, |p| p.shot_clock_s.max(match_length_s));
        for (team, (t0, ctx)) in last {
            if end > t0 {
                out.push(Interarrival {
                    team,
                    context: ctx,
                    gap_s: end - t0,
                    censored: true,
                });
            }
        }
    }
    out
}

/// Ordinary least squares on inter-arrival seconds, falling back to a small
/// ridge when the design is rank deficient. A censored wait `c` enters at
/// its expected length under an exponential wait, `c + predicted mean`,
/// refitted until the weights settle; the fixed point gives each state the
/// censored maximum-likelihood mean, exposure over shots.
pub fn fit_shot_clock(
    dataset: &Dataset,
    with_context: bool,
    match_length_s: f64,
) -> Result<ShotClockModel> {
    fit_shot_clock_on(
        &interarrivals(dataset, match_length_s),
        with_context,
        match_length_s,
    )
}

pub fn fit_shot_clock_on(
    gaps: &[Interarrival],
    with_context: bool,
    match_length_s: f64,
) -> Result<ShotClockModel> {
    if gaps.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut per_team: BTreeMap<u32, usize> = BTreeMap::new();
    for g in gaps {
        *per_team.entry(g.team).or_default() += 1;
    }
    if let Some((team, n)) = per_team.iter().find(|(_, n)| **n < MIN_GAPS_PER_TEAM) {
        return Err(Error::invalid(format!(
            "team {team} has {n} shot inter-arrivals, at least {MIN_GAPS_PER_TEAM} are needed"
        )));
    }
    let teams: Vec<u32> = per_team.keys().copied().collect();
    let mut feature_names = vec!["intercept".to_string()];
    feature_names.extend(teams[1..].iter().map(|t| format!("team_{t}")));
    if with_context {
        feature_names.extend(["is_home", "goal_diff", "remaining"].map(String::from));
    }
    let p = feature_names.len();
    let rows = gaps
        .iter()
        .map(|g| ShotClockModel::features(&teams, with_context, g.team, &g.context))
        .collect::<Result<Vec<_>>>()?;
    let x = DMatrix::from_fn(gaps.len(), p, |i, j| rows[i][j]);
    let mut y = DVector::from_iterator(gaps.len(), gaps.iter().map(|g| g.gap_s));
    let (mut w, mut ridge_used) = least_squares(&x, &y);
    if gaps.iter().any(|g| g.censored) {
        for _ in 0..MAX_IMPUTATION_ROUNDS {
            let pred = &x * &w;
            for (i, g) in gaps.iter().enumerate() {
                if g.censored {
                    y[i] = g.gap_s + pred[i].max(MIN_INTERARRIVAL_S);
                }
            }
            let (next, ridge) = least_squares(&x, &y);
            let change = (&next - &w).amax();
            w = next;
            ridge_used = ridge;
            if change <= 1e-9 * (1.0 + w.amax()) {
                break;
            }
        }
    }
    Ok(ShotClockModel {
        with_context,
        teams,
        feature_names,
        weights: w.iter().copied().collect(),
        match_length_s,
        ridge_used,
    })
}

/// QR solve of `min ‖Xw − y‖`; ridge normal equations if `R` is singular.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, bool) {
    let p = x.ncols();
    if x.nrows() >= p {
        let qr = x.clone().qr();
        let r = qr.r();
        let scale = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        if (0..p).all(|i| r[(i, i)].abs() > 1e-10 * scale.max(1e-300)) {
            let qty = qr.q().transpose() * y;
            if let Some(w) = r.solve_upper_triangular(&qty) {
                return (w, false);
            }
        }
    }
    log::warn!("rank-deficient shot-clock design; using ridge {RIDGE_FALLBACK}");
    let mut a = x.transpose() * x;
    for i in 0..p {
        a[(i, i)] += RIDGE_FALLBACK;
    }
    let b = x.transpose() * y;
    let w = a
        .cholesky()
        .map(|c| c.solve(&b))
        .unwrap_or_else(|| DVector::zeros(p));
    (w, true)
}
