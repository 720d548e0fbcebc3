//! Per-element expected-goal strategy distributions for the league and for
//! each team, offensive and defensive, plus their relative forms.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::deeptree::DeepDecisionTree;
use crate::trajectory::Dataset;
use crate::{Error, Result};

pub const STRATEGY_CSV: &str = "strategy.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Offensive,
    Defensive,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Offensive => "offensive",
            Side::Defensive => "defensive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TeamRef {
    League,
    Team(u32),
}

/// What a shot contributes to a strategy value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotValue {
    /// The tree's goal probability for the shot.
    #[default]
    Predicted,
    /// The observed outcome, 0 or 1.
    Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPlay {
    pub element: usize,
    pub value: f64,
    pub attacking_team: u32,
    pub defending_team: u32,
}

impl ScoredPlay {
    fn team(&self, side: Side) -> u32 {
        match side {
            Side::Offensive => self.attacking_team,
            Side::Defensive => self.defending_team,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyDistribution {
    pub team: TeamRef,
    pub side: Side,
    /// Mean value per element; `None` where no shot supports it.
    pub values: Vec<Option<f64>>,
    pub shots: Vec<usize>,
}

impl StrategyDistribution {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value for `element`, treating absent elements as 0.
    pub fn value_or_zero(&self, element: usize) -> f64 {
        self.values.get(element).copied().flatten().unwrap_or(0.0)
    }
}

/// Scores every play of `dataset` with the tree.
pub fn score_plays(
    tree: &DeepDecisionTree,
    dataset: &Dataset,
    value: ShotValue,
) -> Result<Vec<ScoredPlay>> {
    dataset
        .plays
        .iter()
        .map(|p| {
            let (element, q) = tree.assign_and_score(p)?;
            Ok(ScoredPlay {
                element,
                value: match value {
                    ShotValue::Predicted => q,
                    ShotValue::Outcome => p.label_f64(),
                },
                attacking_team: p.attacking_team,
                defending_team: p.defending_team,
            })
        })
        .collect()
}

fn group_mean<'a>(
    plays: impl Iterator<Item = &'a ScoredPlay>,
    n_elements: usize,
    team: TeamRef,
    side: Side,
) -> Result<StrategyDistribution> {
    let mut sums = vec![0.0; n_elements];
    let mut shots = vec![0usize; n_elements];
    for p in plays {
        if p.element >= n_elements {
            return Err(Error::invalid(format!(
                "element {} outside codebook of {n_elements}",
                p.element
            )));
        }
        sums[p.element] += p.value;
        shots[p.element] += 1;
    }
    let values = sums
        .iter()
        .zip(&shots)
        .map(|(s, &n)| (n > 0).then(|| s / n as f64))
        .collect();
    Ok(StrategyDistribution {
        team,
        side,
        values,
        shots,
    })
}

/// League-average value per element over all plays.
pub fn mean_strategy(
    plays: &[ScoredPlay],
    n_elements: usize,
    side: Side,
) -> Result<StrategyDistribution> {
    group_mean(plays.iter(), n_elements, TeamRef::League, side)
}

/// Offensive: plays the team attacked in. Defensive: plays it defended.
pub fn team_strategy(
    plays: &[ScoredPlay],
    n_elements: usize,
    team: u32,
    side: Side,
) -> Result<StrategyDistribution> {
    if !plays
        .iter()
        .any(|p| p.attacking_team == team || p.defending_team == team)
    {
        return Err(Error::UnknownTeam(team));
    }
    group_mean(
        plays.iter().filter(|p| p.team(side) == team),
        n_elements,
        TeamRef::Team(team),
        side,
    )
}

/// Team value minus league value, element-wise; absent where the team is.
pub fn relative_strategy(
    team: &StrategyDistribution,
    mean: &StrategyDistribution,
) -> Result<StrategyDistribution> {
    if team.side != mean.side {
        return Err(Error::invalid(
            "relative strategy needs distributions of the same side",
        ));
    }
    if team.len() != mean.len() {
        return Err(Error::invalid(format!(
            "codebook sizes differ: {} vs {}",
            team.len(),
            mean.len()
        )));
    }
    let values = team
        .values
        .iter()
        .zip(&mean.values)
        .map(|(t, m)| match (t, m) {
            (Some(t), Some(m)) => Some(t - m),
            _ => None,
        })
        .collect();
    Ok(StrategyDistribution {
        team: team.team,
        side: team.side,
        values,
        shots: team.shots.clone(),
    })
}

pub fn shot_frequency(plays: &[ScoredPlay], n_elements: usize) -> Vec<usize> {
    let mut counts = vec![0; n_elements];
    for p in plays {
        if let Some(c) = counts.get_mut(p.element) {
            *c += 1;
        }
    }
    counts
}

/// Every team's offensive and defensive distributions, absolute and relative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeagueStrategies {
    pub league: [StrategyDistribution; 2],
    pub teams: Vec<u32>,
    /// Indexed `[team][side]`, sides in offensive, defensive order.
    pub absolute: Vec<[StrategyDistribution; 2]>,
    pub relative: Vec<[StrategyDistribution; 2]>,
}

impl LeagueStrategies {
    pub fn build(plays: &[ScoredPlay], n_elements: usize) -> Result<Self> {
        let league = [
            mean_strategy(plays, n_elements, Side::Offensive)?,
            mean_strategy(plays, n_elements, Side::Defensive)?,
        ];
        let teams: Vec<u32> = plays
            .iter()
            .flat_map(|p| [p.attacking_team, p.defending_team])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut absolute = Vec::with_capacity(teams.len());
        let mut relative = Vec::with_capacity(teams.len());
        for &t in &teams {
            let off = team_strategy(plays, n_elements, t, Side::Offensive)?;
            let def = team_strategy(plays, n_elements, t, Side::Defensive)?;
            relative.push([
                relative_strategy(&off, &league[0])?,
                relative_strategy(&def, &league[1])?,
            ]);
            absolute.push([off, def]);
        }
        Ok(LeagueStrategies {
            league,
            teams,
            absolute,
            relative,
        })
    }

    pub fn team_index(&self, team: u32) -> Result<usize> {
        self.teams
            .binary_search(&team)
            .map_err(|_| Error::UnknownTeam(team))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub team: String,
    pub side: String,
    pub element: usize,
    /// Empty when unsupported.
    pub value: Option<f64>,
    pub shots: usize,
    pub supported: bool,
}

/// Writes the league means and every team's relative distributions.
pub fn write_strategy_csv(strategies: &LeagueStrategies, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let rows = strategies
        .league
        .iter()
        .map(|d| ("LEAGUE".to_string(), d))
        .chain(
            strategies
                .teams
                .iter()
                .zip(&strategies.relative)
                .flat_map(|(t, ds)| ds.iter().map(move |d| (t.to_string(), d))),
        );
    for (team, dist) in rows {
        for (element, (value, &shots)) in dist.values.iter().zip(&dist.shots).enumerate() {
            w.serialize(StrategyRow {
                team: team.clone(),
                side: dist.side.as_str().to_string(),
                element,
                value: *value,
                shots,
                supported: value.is_some(),
            })?;
        }
    }
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

pub fn read_strategy_csv(path: impl AsRef<Path>) -> Result<Vec<StrategyRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}
