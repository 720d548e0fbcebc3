//! Handcrafted shot features used by the logistic baseline.

use super::{AgentTrajectory, Pitch, Play};

/// Shot location, four nearest outfield defenders, four nearest other
/// attackers, goalkeeper: ten points.
pub const HANDCRAFTED_LEN: usize = 20;

const NEAREST: usize = 4;

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Role and final-frame position of the attacker nearest the goal centre.
/// Ties go to the lower role index.
pub fn shot_location(play: &Play, pitch: &Pitch) -> (usize, [f64; 2]) {
    let goal = pitch.goal_centre();
    play.attacking
        .iter()
        .map(|t| (t.role_index, t.last()))
        .min_by(|a, b| {
            dist2(a.1, goal)
                .total_cmp(&dist2(b.1, goal))
                .then(a.0.cmp(&b.0))
        })
        .expect("play has attackers")
}

fn nearest<'a>(team: impl Iterator<Item = &'a AgentTrajectory>, origin: [f64; 2]) -> Vec<[f64; 2]> {
    let mut cands: Vec<(f64, usize, [f64; 2])> = team
        .map(|t| (dist2(t.last(), origin), t.role_index, t.last()))
        .collect();
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cands.into_iter().take(NEAREST).map(|c| c.2).collect()
}

/// Baseline feature vector of length [`HANDCRAFTED_LEN`]. Depends only on
/// role geometry, never on storage order. Slots with too few agents to fill
/// them repeat the shot location.
pub fn handcrafted_features(play: &Play, pitch: &Pitch) -> Vec<f64> {
    let (shooter, shot) = shot_location(play, pitch);
    let defenders = nearest(play.defending.iter().filter(|t| t.role_index != 0), shot);
    let attackers = nearest(
        play.attacking.iter().filter(|t| t.role_index != shooter),
        shot,
    );
    let keeper = play.defender(0).map_or(shot, |t| t.last());

    let mut out = Vec::with_capacity(HANDCRAFTED_LEN);
    out.extend_from_slice(&shot);
    for group in [&defenders, &attackers] {
        for k in 0..NEAREST {
            out.extend_from_slice(group.get(k).unwrap_or(&shot));
        }
    }
    out.extend_from_slice(&keeper);
    out
}
