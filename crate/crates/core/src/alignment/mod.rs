//! Role alignment against a formation template learned from the data.
//!
//! Each agent is summarised by its time-averaged position. Template learning
//! alternates an optimal per-play assignment of agents to role means with a
//! mean update, which is coordinate descent on the total squared distance.
//! Attacking and defending shapes are learned separately.

mod hungarian;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::trajectory::{AgentTrajectory, Dataset, Play};
use crate::{Error, Result};

pub use hungarian::{assignment_cost, hungarian, Assignment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormationTemplate {
    pub att_means: Vec<[f64; 2]>,
    pub def_means: Vec<[f64; 2]>,
    #[serde(default)]
    pub iterations_run: usize,
    #[serde(default)]
    pub final_cost: f64,
    /// Objective after initialisation and after every iteration.
    #[serde(default)]
    pub cost_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateOptions {
    pub max_iters: usize,
    /// Minimum objective improvement (m²) to keep iterating.
    pub tol: f64,
}

impl Default for TemplateOptions {
    fn default() -> Self {
        TemplateOptions {
            max_iters: 50,
            tol: 1e-6,
        }
    }
}

fn sq(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Time-averaged positions in ascending current-role order.
fn team_means(team: &[AgentTrajectory]) -> Vec<[f64; 2]> {
    let mut out = vec![[0.0; 2]; team.len()];
    for t in team {
        out[t.role_index] = t.mean_position();
    }
    out
}

fn cost_matrix(positions: &[[f64; 2]], means: &[[f64; 2]]) -> Vec<Vec<f64>> {
    positions
        .iter()
        .map(|p| means.iter().map(|m| sq(*p, *m)).collect())
        .collect()
}

/// Per-team learning state: one row of agent positions per play.
struct Side {
    positions: Vec<Vec<[f64; 2]>>,
    roles: Vec<Vec<usize>>,
    means: Vec<[f64; 2]>,
}

impl Side {
    fn new(positions: Vec<Vec<[f64; 2]>>, k: usize) -> Self {
        let roles = positions.iter().map(|_| (0..k).collect()).collect();
        let mut side = Side {
            positions,
            roles,
            means: vec![[0.0; 2]; k],
        };
        side.update_means();
        side
    }

    fn update_means(&mut self) {
        let k = self.means.len();
        let mut sums = vec![[0.0; 2]; k];
        for (pos, roles) in self.positions.iter().zip(&self.roles) {
            for (p, &r) in pos.iter().zip(roles) {
                sums[r][0] += p[0];
                sums[r][1] += p[1];
            }
        }
        let n = self.positions.len() as f64;
        self.means = sums.iter().map(|s| [s[0] / n, s[1] / n]).collect();
    }

    fn assign(&mut self) -> Result<()> {
        for (pos, roles) in self.positions.iter().zip(self.roles.iter_mut()) {
            *roles = hungarian(&cost_matrix(pos, &self.means))?.permutation;
        }
        Ok(())
    }

    fn cost(&self) -> f64 {
        self.positions
            .iter()
            .zip(&self.roles)
            .map(|(pos, roles)| {
                pos.iter()
                    .zip(roles)
                    .map(|(p, &r)| sq(*p, self.means[r]))
                    .sum::<f64>()
            })
            .sum()
    }
}

/// Learns attacking and defending templates, initialised from the stored
/// role labels. The defending role nearest the defended goal line is
/// relabelled 0 (goalkeeper).
pub fn learn_template(dataset: &Dataset, opts: &TemplateOptions) -> Result<FormationTemplate> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let half = dataset.m / 2;
    let mut att = Side::new(
        dataset
            .plays
            .iter()
            .map(|p| team_means(&p.attacking))
            .collect(),
        half,
    );
    let mut def = Side::new(
        dataset
            .plays
            .iter()
            .map(|p| team_means(&p.defending))
            .collect(),
        half,
    );

    let mut cost_trace = vec![att.cost() + def.cost()];
    let mut iterations_run = 0;
    while iterations_run < opts.max_iters {
        for side in [&mut att, &mut def] {
            side.assign()?;
            side.update_means();
        }
        iterations_run += 1;
        let cost = att.cost() + def.cost();
        let prev = *cost_trace.last().expect("non-empty trace");
        cost_trace.push(cost);
        if prev - cost < opts.tol {
            break;
        }
    }

    let keeper = (0..half)
        .max_by(|&a, &b| def.means[a][0].total_cmp(&def.means[b][0]).then(b.cmp(&a)))
        .expect("non-empty team");
    def.means.swap(0, keeper);

    Ok(FormationTemplate {
        att_means: att.means,
        def_means: def.means,
        iterations_run,
        final_cost: *cost_trace.last().expect("non-empty trace"),
        cost_trace,
    })
}

fn relabel(
    team: &[AgentTrajectory],
    means: &[[f64; 2]],
) -> Result<(Vec<AgentTrajectory>, Assignment)> {
    let mut sorted: Vec<&AgentTrajectory> = team.iter().collect();
    sorted.sort_by_key(|t| t.role_index);
    let positions: Vec<[f64; 2]> = sorted.iter().map(|t| t.mean_position()).collect();
    let assignment = hungarian(&cost_matrix(&positions, means))?;
    let mut out: Vec<AgentTrajectory> = sorted
        .into_iter()
        .zip(&assignment.permutation)
        .map(|(t, &r)| AgentTrajectory::new(r, t.points.clone()))
        .collect();
    out.sort_by_key(|t| t.role_index);
    Ok((out, assignment))
}

/// Aligns a play and also returns the attacking and defending assignments
/// (rows are agents in their previous role order).
pub fn align_play_with_assignment(
    play: &Play,
    template: &FormationTemplate,
) -> Result<(Play, [Assignment; 2])> {
    if play.attacking.len() != template.att_means.len()
        || play.defending.len() != template.def_means.len()
    {
        return Err(Error::invalid(format!(
            "play has {}+{} agents, template expects {}+{}",
            play.attacking.len(),
            play.defending.len(),
            template.att_means.len(),
            template.def_means.len()
        )));
    }
    let (attacking, a) = relabel(&play.attacking, &template.att_means)?;
    let (defending, d) = relabel(&play.defending, &template.def_means)?;
    Ok((
        Play {
            attacking,
            defending,
            ..play.clone()
        },
        [a, d],
    ))
}

/// Reassigns role indices by optimal matching of time-averaged positions to
/// the template; trajectories are untouched and stored in role order.
pub fn align_play(play: &Play, template: &FormationTemplate) -> Result<Play> {
    align_play_with_assignment(play, template).map(|(p, _)| p)
}

pub fn align_dataset(dataset: &Dataset, template: &FormationTemplate) -> Result<Dataset> {
    let plays = dataset
        .plays
        .iter()
        .map(|p| align_play(p, template))
        .collect::<Result<Vec<_>>>()?;
    Ok(dataset.with_plays(plays))
}

pub fn save_template(template: &FormationTemplate, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(template)?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_template(path: impl AsRef<Path>) -> Result<FormationTemplate> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
