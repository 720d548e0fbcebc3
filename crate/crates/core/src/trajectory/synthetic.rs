//! Seeded synthetic match generator.
//!
//! Matches are simulated as two competing shot processes whose intensity
//! depends on home advantage, the current score and the elapsed time. Every
//! shot yields a play whose trajectories follow a play-type formation, a
//! lateral motion archetype and (optionally) a multi-modal run of one planted
//! signal role. The goal label is Bernoulli with a logit that is additive in
//! play type, archetype, signal mode and the two teams' skills.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use super::{AgentTrajectory, Dataset, Pitch, Play, PlayType};
use crate::{rng, Error, Result};

/// Attacking end-of-window formation, as fractions of the pitch.
const ATT_FORMATION: [[f64; 2]; 11] = [
    [0.30, 0.50],
    [0.55, 0.22],
    [0.55, 0.78],
    [0.80, 0.50],
    [0.64, 0.36],
    [0.64, 0.64],
    [0.73, 0.26],
    [0.73, 0.74],
    [0.86, 0.16],
    [0.93, 0.44],
    [0.86, 0.84],
];

/// Defending end-of-window formation. Role 0 is the goalkeeper.
const DEF_FORMATION: [[f64; 2]; 11] = [
    [0.985, 0.50],
    [0.91, 0.30],
    [0.91, 0.44],
    [0.91, 0.56],
    [0.91, 0.70],
    [0.81, 0.26],
    [0.81, 0.42],
    [0.81, 0.58],
    [0.81, 0.74],
    [0.70, 0.42],
    [0.70, 0.58],
];

/// A role whose final position is drawn from several modes, each with its
/// own effect on the goal logit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalConfig {
    /// Attacking role carrying the signal.
    pub role: usize,
    /// Lateral distance between adjacent end-position modes (metres).
    pub separation_m: f64,
    /// Goal-logit offset per mode; the mode count is its length.
    pub effects: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchDynamics {
    pub match_length_s: f64,
    /// Stoppage time is uniform on `[0, stoppage_max_s]`.
    pub stoppage_max_s: f64,
    /// Log shot-rate offset for the home side.
    pub home_shot_effect: f64,
    /// Log shot-rate change per goal of lead (negative: leaders sit back).
    pub lead_shot_effect: f64,
    /// Log shot-rate change from kickoff to full time.
    pub late_shot_effect: f64,
    /// Spread of per-team log shot rates.
    pub team_shot_sd: f64,
}

impl Default for MatchDynamics {
    fn default() -> Self {
        MatchDynamics {
            match_length_s: 5400.0,
            stoppage_max_s: 300.0,
            home_shot_effect: 0.25,
            lead_shot_effect: -0.25,
            late_shot_effect: 0.5,
            team_shot_sd: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_teams: usize,
    pub n_matches: usize,
    /// Truncate the dataset after this many plays.
    pub max_plays: Option<usize>,
    pub shots_per_match_mean: f64,
    /// Goal probability with every effect at zero.
    pub goal_base_rate: f64,
    pub tau: usize,
    pub agents_per_team: usize,
    pub pitch: Pitch,
    pub frame_rate_hz: f64,
    /// Relative frequency of free kicks, open play, corners, counters.
    pub play_type_weights: [f64; 4],
    pub play_type_effects: [f64; 4],
    /// Lateral offset between adjacent motion archetypes (metres).
    pub archetype_shift_m: f64,
    /// Goal-logit offset per archetype; the archetype count is its length.
    pub archetype_effects: Vec<f64>,
    pub signal: Option<SignalConfig>,
    /// Spread of per-team attack/defence skill when not given explicitly.
    pub skill_sd: f64,
    pub attack_skill: Vec<f64>,
    pub defence_skill: Vec<f64>,
    /// Spread of per-team archetype preference logits.
    pub style_sd: f64,
    pub noise_std: f64,
    /// Probability that two outfield roles of a team are stored swapped.
    pub role_swap_prob: f64,
    pub dynamics: MatchDynamics,
    pub rng_seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_teams: 20,
            n_matches: 240,
            max_plays: Some(5000),
            shots_per_match_mean: 24.0,
            goal_base_rate: 0.12,
            tau: super::DEFAULT_TAU,
            agents_per_team: super::DEFAULT_AGENTS / 2,
            pitch: Pitch::default(),
            frame_rate_hz: 10.0,
            play_type_weights: [0.15, 0.45, 0.2, 0.2],
            play_type_effects: [-0.6, 0.0, -0.4, 0.8],
            archetype_shift_m: 10.0,
            archetype_effects: vec![-1.0, 0.0, 1.0],
            signal: Some(SignalConfig {
                role: 3,
                separation_m: 14.0,
                effects: vec![-1.5, 1.5, -1.5],
            }),
            skill_sd: 0.2,
            attack_skill: Vec::new(),
            defence_skill: Vec::new(),
            style_sd: 0.5,
            noise_std: 2.0,
            role_swap_prob: 0.1,
            dynamics: MatchDynamics::default(),
            rng_seed: 42,
        }
    }
}

impl SyntheticConfig {
    /// A light configuration for quick experiments and tests.
    /// A full double round-robin season with one-second plays and a goal
    /// rate near three per match, for the match-simulation experiment.
    pub fn season() -> Self {
        SyntheticConfig {
            n_matches: 380,
            max_plays: None,
            goal_base_rate: 0.09,
            tau: 10,
            ..SyntheticConfig::default()
        }
    }

    pub fn small() -> Self {
        SyntheticConfig {
            n_teams: 4,
            n_matches: 12,
            max_plays: None,
            tau: 10,
            ..SyntheticConfig::default()
        }
    }

    pub fn n_archetypes(&self) -> usize {
        self.archetype_effects.len().max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_teams < 2 {
            return bad(format!("n_teams must be at least 2, got {}", self.n_teams));
        }
        if self.n_matches == 0 || self.tau == 0 {
            return bad("n_matches and tau must be positive".into());
        }
        if !(1..=11).contains(&self.agents_per_team) {
            return bad(format!(
                "agents_per_team must be in 1..=11, got {}",
                self.agents_per_team
            ));
        }
        if !(0.0..=1.0).contains(&self.goal_base_rate) {
            return bad(format!(
                "goal_base_rate {} outside [0, 1]",
                self.goal_base_rate
            ));
        }
        if !(0.0..=1.0).contains(&self.role_swap_prob) {
            return bad(format!(
                "role_swap_prob {} outside [0, 1]",
                self.role_swap_prob
            ));
        }
        if !(self.shots_per_match_mean > 0.0) {
            return bad("shots_per_match_mean must be positive".into());
        }
        if self.play_type_weights.iter().any(|w| !(*w >= 0.0))
            || self.play_type_weights.iter().sum::<f64>() <= 0.0
        {
            return bad("play_type_weights must be non-negative with a positive sum".into());
        }
        if !(self.noise_std >= 0.0) || !(self.skill_sd >= 0.0) || !(self.style_sd >= 0.0) {
            return bad("spreads must be non-negative".into());
        }
        if !(self.pitch.length > 0.0 && self.pitch.width > 0.0) {
            return bad("pitch dimensions must be positive".into());
        }
        for (name, v) in [
            ("attack_skill", &self.attack_skill),
            ("defence_skill", &self.defence_skill),
        ] {
            if !v.is_empty() && v.len() != self.n_teams {
                return bad(format!(
                    "{name} has {} entries for {} teams",
                    v.len(),
                    self.n_teams
                ));
            }
        }
        if let Some(sig) = &self.signal {
            if sig.role >= self.agents_per_team || sig.effects.is_empty() {
                return bad(format!("signal role {} invalid", sig.role));
            }
        }
        let d = &self.dynamics;
        if !(d.match_length_s > 0.0) || !(d.stoppage_max_s >= 0.0) || !(d.team_shot_sd >= 0.0) {
            return bad("invalid match dynamics".into());
        }
        Ok(())
    }
}

/// Ground truth behind one generated play.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayTruth {
    pub archetype: usize,
    pub signal_mode: Option<usize>,
    pub goal_probability: f64,
    pub swapped: bool,
}

/// Double round-robin (circle method), home and away legs.
pub fn round_robin(n_teams: usize) -> Vec<(u32, u32)> {
    let mut slots: Vec<Option<u32>> = (0..n_teams as u32).map(Some).collect();
    if n_teams % 2 == 1 {
        slots.push(None);
    }
    let n = slots.len();
    let mut first_leg = Vec::new();
    for round in 0..n - 1 {
        for i in 0..n / 2 {
            let (a, b) = (slots[i], slots[n - 1 - i]);
            if let (Some(a), Some(b)) = (a, b) {
                if (round + i) % 2 == 0 {
                    first_leg.push((a, b));
                } else {
                    first_leg.push((b, a));
                }
            }
        }
        slots[1..].rotate_right(1);
    }
    let second_leg: Vec<(u32, u32)> = first_leg.iter().map(|&(h, a)| (a, h)).collect();
    first_leg.into_iter().chain(second_leg).collect()
}

struct Teams {
    attack: Vec<f64>,
    defence: Vec<f64>,
    shot_rate: Vec<f64>,
    /// Cumulative archetype preference per team.
    style_cdf: Vec<Vec<f64>>,
}

impl Teams {
    fn draw(cfg: &SyntheticConfig) -> Teams {
        let mut rng = rng::seeded(cfg.rng_seed, u64::MAX);
        let mut normals = |sd: f64, n: usize| -> Vec<f64> {
            if sd == 0.0 {
                return vec![0.0; n];
            }
            let dist = Normal::new(0.0, sd).expect("finite sd");
            (0..n).map(|_| dist.sample(&mut rng)).collect()
        };
        let n = cfg.n_teams;
        let attack = normals(cfg.skill_sd, n);
        let defence = normals(cfg.skill_sd, n);
        let shot_rate = normals(cfg.dynamics.team_shot_sd, n);
        let k = cfg.n_archetypes();
        let style_cdf = (0..n)
            .map(|_| {
                let w: Vec<f64> = normals(cfg.style_sd, k).into_iter().map(f64::exp).collect();
                let total: f64 = w.iter().sum();
                w.iter()
                    .scan(0.0, |acc, x| {
                        *acc += x / total;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        Teams {
            attack: if cfg.attack_skill.is_empty() {
                attack
            } else {
                cfg.attack_skill.clone()
            },
            defence: if cfg.defence_skill.is_empty() {
                defence
            } else {
                cfg.defence_skill.clone()
            },
            shot_rate,
            style_cdf,
        }
    }
}

fn sample_cdf(rng: &mut ChaCha8Rng, cdf: &[f64]) -> usize {
    let u: f64 = rng.random();
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

struct PlayGenerator<'a> {
    cfg: &'a SyntheticConfig,
    type_cdf: Vec<f64>,
    noise: Option<Normal<f64>>,
    jitter: Option<Normal<f64>>,
}

impl<'a> PlayGenerator<'a> {
    fn new(cfg: &'a SyntheticConfig) -> Self {
        let total: f64 = cfg.play_type_weights.iter().sum();
        let type_cdf = cfg
            .play_type_weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w / total;
                Some(*acc)
            })
            .collect();
        let normal = |sd: f64| (sd > 0.0).then(|| Normal::new(0.0, sd).expect("finite sd"));
        PlayGenerator {
            cfg,
            type_cdf,
            noise: normal(cfg.noise_std),
            jitter: normal(0.1 * cfg.noise_std),
        }
    }

    fn draw(noise: &Option<Normal<f64>>, rng: &mut ChaCha8Rng) -> f64 {
        noise.as_ref().map_or(0.0, |n| n.sample(rng))
    }

    /// Forward distance the attacking shape covers during the window.
    fn advance(play_type: PlayType) -> f64 {
        match play_type {
            PlayType::FreeKick => 3.0,
            PlayType::OpenPlay => 14.0,
            PlayType::Corner => 5.0,
            PlayType::CounterAttack => 32.0,
        }
    }

    fn end_positions(&self, play_type: PlayType) -> ([[f64; 2]; 11], [[f64; 2]; 11]) {
        let mut att = ATT_FORMATION;
        let mut def = DEF_FORMATION;
        match play_type {
            PlayType::Corner => {
                for (r, y) in [(2, 0.40), (4, 0.48), (5, 0.56), (6, 0.62), (7, 0.36)] {
                    att[r] = [0.93, y];
                }
                att[8] = [0.99, 0.03];
                for r in 1..9 {
                    def[r][0] = 0.95;
                }
            }
            PlayType::FreeKick => {
                att[6] = [0.76, 0.50];
                for (r, y) in [(5, 0.44), (6, 0.48), (7, 0.52)] {
                    def[r] = [0.84, y];
                }
            }
            PlayType::CounterAttack => {
                for r in 9..11 {
                    def[r][0] = 0.86;
                }
                for r in 1..3 {
                    att[r][0] = 0.62;
                }
            }
            PlayType::OpenPlay => {}
        }
        (att, def)
    }

    #[allow(clippy::too_many_arguments)]
    fn trajectory(
        &self,
        rng: &mut ChaCha8Rng,
        role: usize,
        start: [f64; 2],
        end: [f64; 2],
    ) -> AgentTrajectory {
        let cfg = self.cfg;
        let pitch = cfg.pitch;
        let s = [
            start[0] + Self::draw(&self.noise, rng),
            start[1] + Self::draw(&self.noise, rng),
        ];
        let e = [
            end[0] + Self::draw(&self.noise, rng),
            end[1] + Self::draw(&self.noise, rng),
        ];
        let tau = cfg.tau;
        let points = (0..tau)
            .map(|t| {
                let u = if tau == 1 {
                    1.0
                } else {
                    t as f64 / (tau - 1) as f64
                };
                let w = u * u * (3.0 - 2.0 * u);
                let x = s[0] + (e[0] - s[0]) * w + Self::draw(&self.jitter, rng);
                let y = s[1] + (e[1] - s[1]) * w + Self::draw(&self.jitter, rng);
                [x.clamp(0.0, pitch.length), y.clamp(0.0, pitch.width)]
            })
            .collect();
        AgentTrajectory::new(role, points)
    }

    #[allow(clippy::too_many_arguments)]
    fn play(
        &self,
        rng: &mut ChaCha8Rng,
        teams: &Teams,
        att_team: u32,
        def_team: u32,
        is_home: bool,
        clock: f64,
        match_id: u32,
    ) -> (Play, PlayTruth) {
        let cfg = self.cfg;
        let (l, w) = (cfg.pitch.length, cfg.pitch.width);
        let play_type = PlayType::from_index(sample_cdf(rng, &self.type_cdf)).expect("four types");
        let archetype = sample_cdf(rng, &teams.style_cdf[att_team as usize]);
        let k = cfg.n_archetypes();
        let lateral = (archetype as f64 - (k as f64 - 1.0) / 2.0) * cfg.archetype_shift_m;
        let advance = Self::advance(play_type);
        let (att_end, def_end) = self.end_positions(play_type);

        let signal_mode = cfg
            .signal
            .as_ref()
            .map(|s| rng.random_range(0..s.effects.len()));
        let n = cfg.agents_per_team;

        let mut attacking = Vec::with_capacity(n);
        for (r, f) in att_end.iter().enumerate().take(n) {
            let mut end = [f[0] * l, f[1] * w];
            if let (Some(sig), Some(mode)) = (&cfg.signal, signal_mode) {
                if sig.role == r {
                    let offset =
                        (mode as f64 - (sig.effects.len() as f64 - 1.0) / 2.0) * sig.separation_m;
                    end = [0.88 * l, w / 2.0 + offset];
                }
            }
            let start = [f[0] * l - advance, f[1] * w + lateral];
            attacking.push(self.trajectory(rng, r, start, end));
        }
        let mut defending = Vec::with_capacity(n);
        for (r, f) in def_end.iter().enumerate().take(n) {
            let end = [f[0] * l, f[1] * w];
            let retreat = if r == 0 { 0.0 } else { 0.6 * advance };
            let start = [
                f[0] * l - retreat,
                f[1] * w + if r == 0 { 0.0 } else { 0.5 * lateral },
            ];
            defending.push(self.trajectory(rng, r, start, end));
        }

        let mut swapped = false;
        if n > 2 && rng.random::<f64>() < cfg.role_swap_prob {
            let team = if rng.random::<bool>() {
                &mut attacking
            } else {
                &mut defending
            };
            let a = rng.random_range(1..n);
            let mut b = rng.random_range(1..n - 1);
            if b >= a {
                b += 1;
            }
            let (ra, rb) = (team[a].role_index, team[b].role_index);
            team[a].role_index = rb;
            team[b].role_index = ra;
            team.sort_by_key(|t| t.role_index);
            swapped = true;
        }

        let goal_probability = if cfg.goal_base_rate <= 0.0 {
            0.0
        } else if cfg.goal_base_rate >= 1.0 {
            1.0
        } else {
            let mut z = logit(cfg.goal_base_rate) + cfg.play_type_effects[play_type.index()];
            z += cfg.archetype_effects.get(archetype).copied().unwrap_or(0.0);
            if let (Some(sig), Some(mode)) = (&cfg.signal, signal_mode) {
                z += sig.effects[mode];
            }
            z += teams.attack[att_team as usize] - teams.defence[def_team as usize];
            1.0 / (1.0 + (-z).exp())
        };
        let label = rng.random::<f64>() < goal_probability;

        let play = Play {
            attacking,
            defending,
            label,
            play_type,
            attacking_team: att_team,
            defending_team: def_team,
            is_home,
            shot_clock_s: clock,
            match_id,
        };
        let truth = PlayTruth {
            archetype,
            signal_mode,
            goal_probability,
            swapped,
        };
        (play, truth)
    }
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    generate_synthetic_with_truth(cfg).map(|(d, _)| d)
}

/// Generates a dataset together with the hidden per-play ground truth.
pub fn generate_synthetic_with_truth(cfg: &SyntheticConfig) -> Result<(Dataset, Vec<PlayTruth>)> {
    cfg.validate()?;
    let teams = Teams::draw(cfg);
    let schedule = round_robin(cfg.n_teams);
    let gen = PlayGenerator::new(cfg);
    let dyn_ = &cfg.dynamics;
    let base_rate = cfg.shots_per_match_mean / 2.0 / dyn_.match_length_s;
    const GRID_S: f64 = 300.0;

    let limit = cfg.max_plays.unwrap_or(usize::MAX);
    let mut plays = Vec::new();
    let mut truths = Vec::new();
    'matches: for match_idx in 0..cfg.n_matches {
        let (home, away) = schedule[match_idx % schedule.len()];
        let mut rng = rng::seeded(cfg.rng_seed, match_idx as u64);
        let end = dyn_.match_length_s + rng.random::<f64>() * dyn_.stoppage_max_s;
        let mut t = 0.0;
        let mut score = [0i32; 2];
        let sides = [home, away];
        loop {
            if plays.len() >= limit {
                break 'matches;
            }
            let rate = |side: usize| {
                let lead = f64::from(score[side] - score[1 - side]);
                let home_term = if side == 0 { 0.5 } else { -0.5 } * dyn_.home_shot_effect;
                let frac = (t / dyn_.match_length_s).min(1.0) - 0.5;
                base_rate
                    * (home_term
                        + dyn_.lead_shot_effect * lead
                        + dyn_.late_shot_effect * frac
                        + teams.shot_rate[sides[side] as usize])
                        .exp()
            };
            let rates = [rate(0), rate(1)];
            let total = rates[0] + rates[1];
            let dt = Exp::new(total).expect("positive rate").sample(&mut rng);
            // Rates are held piecewise constant on a fixed grid.
            let next_grid = ((t / GRID_S).floor() + 1.0) * GRID_S;
            if t + dt > next_grid {
                t = next_grid;
                if t > end {
                    break;
                }
                continue;
            }
            t += dt;
            if t > end {
                break;
            }
            let side = usize::from(rng.random::<f64>() * total >= rates[0]);
            let (play, truth) = gen.play(
                &mut rng,
                &teams,
                sides[side],
                sides[1 - side],
                side == 0,
                t,
                match_idx as u32,
            );
            if play.label {
                score[side] += 1;
            }
            plays.push(play);
            truths.push(truth);
        }
    }
    let dataset = Dataset::new(
        plays,
        cfg.tau,
        2 * cfg.agents_per_team,
        cfg.pitch,
        cfg.frame_rate_hz,
        0..cfg.n_teams as u32,
    )?;
    Ok((dataset, truths))
}
