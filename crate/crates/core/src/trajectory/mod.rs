//! Plays, datasets and their flattened feature representation.
//!
//! A play is the window of all `m` agent trajectories (attacking team first,
//! then defending team) leading up to a shot. Coordinates are metres with the
//! origin at the attacking team's left corner flag and attack running towards
//! `x = pitch.length`.

mod features;
mod io;
mod split;
mod synthetic;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use features::{handcrafted_features, shot_location, HANDCRAFTED_LEN};
pub use io::{load_plays, read_plays, save_plays, write_plays};
pub use split::{split_by_match, MatchSplit};
pub use synthetic::{
    generate_synthetic, generate_synthetic_with_truth, round_robin, MatchDynamics, PlayTruth,
    SignalConfig, SyntheticConfig,
};

pub const DEFAULT_TAU: usize = 100;
pub const DEFAULT_AGENTS: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlayType {
    #[serde(rename = "free_kick")]
    FreeKick,
    #[serde(rename = "open_play")]
    OpenPlay,
    #[serde(rename = "corner")]
    Corner,
    #[serde(rename = "counter")]
    CounterAttack,
}

impl PlayType {
    pub const ALL: [PlayType; 4] = [
        PlayType::FreeKick,
        PlayType::OpenPlay,
        PlayType::Corner,
        PlayType::CounterAttack,
    ];

    pub fn index(self) -> usize {
        match self {
            PlayType::FreeKick => 0,
            PlayType::OpenPlay => 1,
            PlayType::Corner => 2,
            PlayType::CounterAttack => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PlayType::FreeKick => "free_kick",
            PlayType::OpenPlay => "open_play",
            PlayType::Corner => "corner",
            PlayType::CounterAttack => "counter",
        }
    }
}

impl fmt::Display for PlayType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pitch {
    pub length: f64,
    pub width: f64,
}

impl Default for Pitch {
    fn default() -> Self {
        Pitch {
            length: 105.0,
            width: 68.0,
        }
    }
}

impl Pitch {
    /// Centre of the goal the attacking team is shooting at.
    pub fn goal_centre(&self) -> [f64; 2] {
        [self.length, self.width / 2.0]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0].is_finite()
            && p[1].is_finite()
            && (0.0..=self.length).contains(&p[0])
            && (0.0..=self.width).contains(&p[1])
    }
}

/// One agent's positions over the play window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrajectory {
    pub role_index: usize,
    pub points: Vec<[f64; 2]>,
}

impl AgentTrajectory {
    pub fn new(role_index: usize, points: Vec<[f64; 2]>) -> Self {
        AgentTrajectory { role_index, points }
    }

    pub fn last(&self) -> [f64; 2] {
        *self
            .points
            .last()
            .expect("trajectory has at least one frame")
    }

    /// Time-averaged position.
    pub fn mean_position(&self) -> [f64; 2] {
        let n = self.points.len() as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
        [sx / n, sy / n]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Play {
    pub attacking: Vec<AgentTrajectory>,
    pub defending: Vec<AgentTrajectory>,
    /// Whether the terminating shot was a goal.
    pub label: bool,
    pub play_type: PlayType,
    pub attacking_team: u32,
    pub defending_team: u32,
    /// Whether the attacking team is the home side.
    pub is_home: bool,
    pub shot_clock_s: f64,
    pub match_id: u32,
}

impl Play {
    /// Total agent count `m`.
    pub fn agents(&self) -> usize {
        self.attacking.len() + self.defending.len()
    }

    pub fn tau(&self) -> usize {
        self.attacking
            .first()
            .or(self.defending.first())
            .map_or(0, |t| t.points.len())
    }

    pub fn label_f64(&self) -> f64 {
        if self.label {
            1.0
        } else {
            0.0
        }
    }

    pub fn attacker(&self, role: usize) -> Option<&AgentTrajectory> {
        self.attacking.iter().find(|t| t.role_index == role)
    }

    pub fn defender(&self, role: usize) -> Option<&AgentTrajectory> {
        self.defending.iter().find(|t| t.role_index == role)
    }

    /// Checks frame counts, role permutations and pitch bounds.
    pub fn validate(&self, tau: usize, m: usize, pitch: &Pitch) -> std::result::Result<(), String> {
        if m % 2 != 0 {
            return Err(format!("agent count {m} is odd"));
        }
        let half = m / 2;
        for (side, team) in [
            ("attacking", &self.attacking),
            ("defending", &self.defending),
        ] {
            if team.len() != half {
                return Err(format!(
                    "{side} team has {} agents, expected {half}",
                    team.len()
                ));
            }
            let mut seen = vec![false; half];
            for traj in team {
                if traj.role_index >= half || seen[traj.role_index] {
                    return Err(format!(
                        "{side} role indices are not a permutation of 0..{half}"
                    ));
                }
                seen[traj.role_index] = true;
                if traj.points.len() != tau {
                    return Err(format!(
                        "{side} role {} has {} frames, expected {tau}",
                        traj.role_index,
                        traj.points.len()
                    ));
                }
                if let Some(p) = traj.points.iter().find(|p| !pitch.contains(**p)) {
                    return Err(format!(
                        "{side} role {} leaves the pitch at ({}, {})",
                        traj.role_index, p[0], p[1]
                    ));
                }
            }
        }
        if !self.shot_clock_s.is_finite() || self.shot_clock_s < 0.0 {
            return Err(format!("invalid shot clock {}", self.shot_clock_s));
        }
        Ok(())
    }

    /// Length of the flattened vector, `2·τ·m`.
    pub fn flat_len(&self) -> usize {
        2 * self.tau() * self.agents()
    }

    /// Concatenates trajectories: attacking roles ascending, then defending
    /// roles ascending, each as `x_1, y_1, …, x_τ, y_τ`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.flat_len()];
        self.flatten_into(&mut out);
        out
    }

    pub fn flatten_into(&self, out: &mut [f64]) {
        let tau = self.tau();
        let half = self.attacking.len();
        let stride = 2 * tau;
        for (offset, team) in [(0, &self.attacking), (half, &self.defending)] {
            for traj in team.iter() {
                let base = (offset + traj.role_index) * stride;
                for (t, p) in traj.points.iter().enumerate() {
                    out[base + 2 * t] = p[0];
                    out[base + 2 * t + 1] = p[1];
                }
            }
        }
    }

    /// Returns a copy with each team stored in ascending role order.
    pub fn canonical(&self) -> Play {
        let mut play = self.clone();
        play.attacking.sort_by_key(|t| t.role_index);
        play.defending.sort_by_key(|t| t.role_index);
        play
    }
}

/// Inverse of [`Play::flatten`]: splits a flat vector of `m` role blocks into
/// attacking and defending trajectories in role order.
pub fn unflatten(
    flat: &[f64],
    tau: usize,
    m: usize,
) -> (Vec<AgentTrajectory>, Vec<AgentTrajectory>) {
    let stride = 2 * tau;
    let mut roles = flat
        .chunks_exact(stride)
        .take(m)
        .enumerate()
        .map(|(l, block)| {
            let points = block.chunks_exact(2).map(|p| [p[0], p[1]]).collect();
            AgentTrajectory::new(l % (m / 2), points)
        });
    let attacking = roles.by_ref().take(m / 2).collect();
    let defending = roles.collect();
    (attacking, defending)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub plays: Vec<Play>,
    pub tau: usize,
    pub m: usize,
    pub pitch: Pitch,
    pub frame_rate_hz: f64,
    pub team_ids: BTreeSet<u32>,
}

impl Dataset {
    /// Builds a dataset, validating every play against the shared dimensions.
    /// Team ids are the union of `teams` and the teams appearing in plays.
    pub fn new(
        plays: Vec<Play>,
        tau: usize,
        m: usize,
        pitch: Pitch,
        frame_rate_hz: f64,
        teams: impl IntoIterator<Item = u32>,
    ) -> Result<Self> {
        if tau == 0 || m == 0 || m % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "invalid dimensions tau={tau} m={m}"
            )));
        }
        if !(pitch.length > 0.0 && pitch.width > 0.0) {
            return Err(Error::InvalidConfig(
                "pitch dimensions must be positive".into(),
            ));
        }
        for (i, play) in plays.iter().enumerate() {
            play.validate(tau, m, &pitch)
                .map_err(|message| Error::Dimension { play: i, message })?;
        }
        let mut team_ids: BTreeSet<u32> = teams.into_iter().collect();
        for p in &plays {
            team_ids.insert(p.attacking_team);
            team_ids.insert(p.defending_team);
        }
        Ok(Dataset {
            plays,
            tau,
            m,
            pitch,
            frame_rate_hz,
            team_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.plays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plays.is_empty()
    }

    pub fn flat_len(&self) -> usize {
        2 * self.tau * self.m
    }

    /// Same metadata, different plays (already validated by the caller).
    pub fn with_plays(&self, plays: Vec<Play>) -> Dataset {
        Dataset {
            plays,
            ..self.metadata_only()
        }
    }

    pub fn metadata_only(&self) -> Dataset {
        Dataset {
            plays: Vec::new(),
            tau: self.tau,
            m: self.m,
            pitch: self.pitch,
            frame_rate_hz: self.frame_rate_hz,
            team_ids: self.team_ids.clone(),
        }
    }

    pub fn match_ids(&self) -> BTreeSet<u32> {
        self.plays.iter().map(|p| p.match_id).collect()
    }
}
