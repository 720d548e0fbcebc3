//! Long-term prediction by match simulation: a Poisson season model, a
//! shot-by-shot Monte-Carlo simulator driven by a shot-clock regression and
//! team strategy distributions, and mean-squared-error evaluation.

mod engine;
mod experiment;
mod poisson;
mod shot_clock;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::trajectory::Dataset;
use crate::{Error, Result};

pub use engine::{simulate_match, MatchSimulation, SimulationMode, TeamProfiles};
pub use experiment::{
    read_predictions_csv, run_season_experiment, write_mse_csv, write_predictions_csv,
    ExperimentConfig, PredictionRow, SeasonReport, MSE_CSV, PREDICTIONS_CSV,
};
pub use poisson::{
    fit_poisson, fit_poisson_with, simulate_bhm, BhmPrediction, PoissonConfig, PoissonSeasonModel,
};
pub use shot_clock::{
    fit_shot_clock, fit_shot_clock_on, interarrivals, least_squares, Interarrival, ShotClockModel,
    ShotContext, MIN_GAPS_PER_TEAM, MIN_INTERARRIVAL_S, RIDGE_FALLBACK,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotEvent {
    pub time_s: f64,
    pub team: u32,
    /// Codebook element, when the shot has been routed through a tree.
    pub element: Option<usize>,
    pub goal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub match_id: u32,
    pub home_team: u32,
    pub away_team: u32,
    /// Home goals, away goals.
    pub goals: [u32; 2],
    pub shots: Vec<ShotEvent>,
}

impl MatchResult {
    /// Goal totals recomputed from the shot events.
    pub fn goals_from_shots(&self) -> [u32; 2] {
        let mut g = [0, 0];
        for s in self.shots.iter().filter(|s| s.goal) {
            g[usize::from(s.team != self.home_team)] += 1;
        }
        g
    }
}

/// Rebuilds match results from the shots in a dataset. `elements`, when
/// given, holds the codebook element of every play in dataset order.
/// Matches without any shot do not appear.
pub fn match_results(dataset: &Dataset, elements: Option<&[usize]>) -> Result<Vec<MatchResult>> {
    if let Some(e) = elements {
        if e.len() != dataset.len() {
            return Err(Error::invalid(format!(
                "{} elements for {} plays",
                e.len(),
                dataset.len()
            )));
        }
    }
    let mut by_match: BTreeMap<u32, MatchResult> = BTreeMap::new();
    for (i, p) in dataset.plays.iter().enumerate() {
        let (home, away) = if p.is_home {
            (p.attacking_team, p.defending_team)
        } else {
            (p.defending_team, p.attacking_team)
        };
        let r = by_match.entry(p.match_id).or_insert_with(|| MatchResult {
            match_id: p.match_id,
            home_team: home,
            away_team: away,
            goals: [0, 0],
            shots: Vec::new(),
        });
        if (r.home_team, r.away_team) != (home, away) {
            return Err(Error::invalid(format!(
                "match {} has inconsistent teams",
                p.match_id
            )));
        }
        r.shots.push(ShotEvent {
            time_s: p.shot_clock_s,
            team: p.attacking_team,
            element: elements.map(|e| e[i]),
            goal: p.label,
        });
    }
    Ok(by_match
        .into_values()
        .map(|mut r| {
            r.shots.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
            r.goals = r.goals_from_shots();
            r
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_runs: usize,
    pub match_length_s: f64,
    /// Stoppage time is uniform on `[0, stoppage_max_s]`.
    pub stoppage_max_s: f64,
    pub rng_seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_runs: 1000,
            match_length_s: 5400.0,
            stoppage_max_s: 300.0,
            rng_seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::InvalidConfig("n_runs must be at least 1".into()));
        }
        if !(self.match_length_s > 0.0) || !(self.stoppage_max_s >= 0.0) {
            return Err(Error::InvalidConfig(
                "match length must be positive and stoppage non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Mean over matches of the squared error averaged over both scores.
pub fn evaluate_mse(predictions: &[[f64; 2]], truths: &[[u32; 2]]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} matches",
            predictions.len(),
            truths.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let total: f64 = predictions
        .iter()
        .zip(truths)
        .map(|(p, t)| ((p[0] - f64::from(t[0])).powi(2) + (p[1] - f64::from(t[1])).powi(2)) / 2.0)
        .sum();
    Ok(total / predictions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{generate_synthetic, SyntheticConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mse_examples_and_oracle() {
        assert_eq!(evaluate_mse(&[[1.0, 2.0]], &[[1, 2]]).unwrap(), 0.0);
        assert_eq!(evaluate_mse(&[[2.0, 1.0]], &[[1, 1]]).unwrap(), 0.5);
        assert!(evaluate_mse(&[[2.0, 1.0]], &[]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p: Vec<[f64; 2]> = (0..50)
            .map(|_| [rng.random_range(0.0..4.0), rng.random_range(0.0..4.0)])
            .collect();
        let t: Vec<[u32; 2]> = (0..50)
            .map(|_| [rng.random_range(0..5), rng.random_range(0..5)])
            .collect();
        let mut naive = 0.0;
        for i in 0..50 {
            for s in 0..2 {
                naive += (p[i][s] - t[i][s] as f64).powi(2);
            }
        }
        naive /= 100.0;
        assert!((evaluate_mse(&p, &t).unwrap() - naive).abs() <= 1e-12);
    }

    #[test]
    fn results_rebuilt_from_shots() {
        let cfg = SyntheticConfig {
            tau: 1,
            n_matches: 10,
            ..SyntheticConfig::small()
        };
        let d = generate_synthetic(&cfg).unwrap();
        let results = match_results(&d, None).unwrap();
        assert_eq!(
            results.iter().map(|r| r.shots.len()).sum::<usize>(),
            d.len()
        );
        for r in &results {
            assert_ne!(r.home_team, r.away_team);
            assert_eq!(r.goals, r.goals_from_shots());
            let scored = d
                .plays
                .iter()
                .filter(|p| p.match_id == r.match_id && p.label)
                .count() as u32;
            assert_eq!(r.goals[0] + r.goals[1], scored);
            assert!(r.shots.windows(2).all(|w| w[0].time_s <= w[1].time_s));
        }
        assert!(match_results(&d, Some(&[0])).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SimulationConfig::default().validate().is_ok());
        assert!(SimulationConfig {
            n_runs: 0,
            ..SimulationConfig::default()
        }
        .validate()
        .is_err());
    }
}
