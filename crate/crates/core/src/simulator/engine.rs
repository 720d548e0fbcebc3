//! Shot-by-shot Monte-Carlo match simulation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::{ShotClockModel, ShotContext, SimulationConfig};
use crate::strategy::LeagueStrategies;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMode {
    /// Shot-clock features frozen at their kickoff values.
    M1,
    /// Score and remaining time re-read after every shot.
    Context,
}

impl SimulationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SimulationMode::M1 => "m1",
            SimulationMode::Context => "context",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TeamProfile {
    /// Cumulative shot-type frequencies; empty for a team without shots.
    element_cdf: Vec<f64>,
    offence: Vec<Option<f64>>,
    defence_relative: Vec<Option<f64>>,
}

/// What the simulator needs from the strategy distributions: each team's
/// shot-type frequencies, its conversion per type and its defensive
/// relative values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamProfiles {
    teams: Vec<u32>,
    profiles: Vec<TeamProfile>,
}

impl TeamProfiles {
    pub fn from_strategies(s: &LeagueStrategies) -> Self {
        let profiles = s
            .absolute
            .iter()
            .zip(&s.relative)
            .map(|(abs, rel)| {
                let shots = &abs[0].shots;
                let total: usize = shots.iter().sum();
                let element_cdf = if total == 0 {
                    Vec::new()
                } else {
                    shots
                        .iter()
                        .scan(0usize, |acc, &n| {
                            *acc += n;
                            Some(*acc as f64 / total as f64)
                        })
                        .collect()
                };
                TeamProfile {
                    element_cdf,
                    offence: abs[0].values.clone(),
                    defence_relative: rel[1].values.clone(),
                }
            })
            .collect();
        TeamProfiles {
            teams: s.teams.clone(),
            profiles,
        }
    }

    fn get(&self, team: u32) -> Result<&TeamProfile> {
        let i = self
            .teams
            .binary_search(&team)
            .map_err(|_| Error::UnknownTeam(team))?;
        Ok(&self.profiles[i])
    }

    /// Attacker's conversion for the element plus the defender's relative
    /// value there, clamped to `[0.01, 0.99]`; zero when the conversion is.
    pub fn goal_probability(&self, attacker: u32, defender: u32, element: usize) -> Result<f64> {
        let v = self
            .get(attacker)?
            .offence
            .get(element)
            .copied()
            .flatten()
            .unwrap_or(0.0);
        if v == 0.0 {
            return Ok(0.0);
        }
        let d = self
            .get(defender)?
            .defence_relative
            .get(element)
            .copied()
            .flatten()
            .unwrap_or(0.0);
        Ok((v + d).clamp(0.01, 0.99))
    }

    fn sample_element(&self, team: u32, rng: &mut ChaCha8Rng) -> Result<usize> {
        let cdf = &self.get(team)?.element_cdf;
        let u: f64 = rng.random();
        Ok(cdf
            .iter()
            .position(|&c| u < c)
            .unwrap_or(cdf.len().saturating_sub(1)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSimulation {
    /// Mean home and away goals over the runs.
    pub mean: [f64; 2],
    pub scores: Vec<[u32; 2]>,
}

/// Shot-clock features for side `s` (0 home, 1 away).
fn context(mode: SimulationMode, s: usize, score: [u32; 2], t: f64, length: f64) -> ShotContext {
    match mode {
        SimulationMode::M1 => ShotContext::kickoff(s == 0),
        SimulationMode::Context => {
            let diff = score[s] as i32 - score[1 - s] as i32;
            ShotContext::at(s == 0, diff, t, length)
        }
    }
}

/// `t` plus an exponential wait with the mean the shot clock predicts.
fn draw(
    clock: &ShotClockModel,
    team: u32,
    ctx: &ShotContext,
    t: f64,
    r: &mut ChaCha8Rng,
) -> Result<f64> {
    let mean = clock.predict(team, ctx)?;
    let wait = Exp::new(1.0 / mean)
        .map_err(|e| Error::invalid(e.to_string()))?
        .sample(r);
    Ok(t + wait)
}

/// Runs `cfg.n_runs` matches; run `i` draws from the stream seeded by
/// `(rng_seed, i)`. A side's next shot is drawn when it shoots, from the
/// state right after that shot. The shot clock is fitted on the same
/// own-shot-to-own-shot gaps with the state at their start, so a pending
/// wait is not redrawn when the other side scores. The earlier shot fires.
pub fn simulate_match(
    clock: &ShotClockModel,
    profiles: &TeamProfiles,
    home: u32,
    away: u32,
    cfg: &SimulationConfig,
    mode: SimulationMode,
) -> Result<MatchSimulation> {
    cfg.validate()?;
    if clock.weights.is_empty() || clock.weights.len() != clock.feature_names.len() {
        return Err(Error::invalid("shot-clock model is not fitted"));
    }
    let sides = [home, away];
    for &t in &sides {
        clock.predict(t, &ShotContext::kickoff(true))?;
        if profiles.get(t)?.element_cdf.is_empty() {
            return Err(Error::invalid(format!(
                "team {t} has no shots to sample from"
            )));
        }
    }
    let length = cfg.match_length_s;
    let mut scores = Vec::with_capacity(cfg.n_runs);
    for i in 0..cfg.n_runs {
        let mut r = rng::seeded(cfg.rng_seed, i as u64);
        let end = length + r.random::<f64>() * cfg.stoppage_max_s;
        let mut score = [0u32; 2];
        let mut next = [0.0; 2];
        for s in 0..2 {
            next[s] = draw(
                clock,
                sides[s],
                &context(mode, s, score, 0.0, length),
                0.0,
                &mut r,
            )?;
        }
        loop {
            let s = usize::from(next[1] < next[0]);
            let t = next[s];
            if t > end {
                break;
            }
            let element = profiles.sample_element(sides[s], &mut r)?;
            let p = profiles.goal_probability(sides[s], sides[1 - s], element)?;
            if r.random::<f64>() < p {
                score[s] += 1;
            }
            next[s] = draw(
                clock,
                sides[s],
                &context(mode, s, score, t, length),
                t,
                &mut r,
            )?;
        }
        scores.push(score);
    }
    let n = cfg.n_runs as f64;
    let mean = [
        scores.iter().map(|s| f64::from(s[0])).sum::<f64>() / n,
        scores.iter().map(|s| f64::from(s[1])).sum::<f64>() / n,
    ];
    Ok(MatchSimulation { mean, scores })
}
