//! Held-out season evaluation of the Poisson model and the two shot
//! simulators.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    evaluate_mse, fit_poisson_with, fit_shot_clock, match_results, simulate_bhm, simulate_match,
    PoissonConfig, SimulationConfig, SimulationMode, TeamProfiles,
};
use crate::alignment::{align_dataset, learn_template, TemplateOptions};
use crate::deeptree::{train, TreeConfig};
use crate::strategy::{score_plays, LeagueStrategies, ShotValue};
use crate::trajectory::{split_by_match, Dataset};
use crate::{rng, Error, Result};

pub const PREDICTIONS_CSV: &str = "simulation_predictions.csv";
pub const MSE_CSV: &str = "simulation_mse.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub train_frac: f64,
    pub split_seed: u64,
    pub template: TemplateOptions,
    pub tree: TreeConfig,
    /// Value a shot contributes to the strategy distributions.
    pub shot_value: ShotValue,
    pub poisson: PoissonConfig,
    pub simulation: SimulationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train_frac: 0.7,
            split_seed: 1,
            template: TemplateOptions::default(),
            tree: TreeConfig::default(),
            shot_value: ShotValue::Predicted,
            poisson: PoissonConfig::default(),
            simulation: SimulationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub match_id: u32,
    pub home_team: u32,
    pub away_team: u32,
    pub predicted_home: f64,
    pub predicted_away: f64,
    pub truth_home: u32,
    pub truth_away: u32,
    pub mode: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonReport {
    pub train_matches: usize,
    pub test_matches: usize,
    pub codebook_size: usize,
    pub rows: Vec<PredictionRow>,
    pub mse_bhm: f64,
    pub mse_m1: f64,
    pub mse_context: f64,
}

/// Fits every model on the training matches and predicts each held-out
/// match's score with the Poisson model, M1 and the context simulator.
pub fn run_season_experiment(dataset: &Dataset, cfg: &ExperimentConfig) -> Result<SeasonReport> {
    cfg.simulation.validate()?;
    let split = split_by_match(dataset, cfg.train_frac, cfg.split_seed)?;
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::invalid(
            "both sides of the split need at least one match",
        ));
    }
    let template = learn_template(&split.train, &cfg.template)?;
    let train_aligned = align_dataset(&split.train, &template)?;
    let tree = train(&train_aligned, &cfg.tree)?;
    let scored = score_plays(&tree, &train_aligned, cfg.shot_value)?;
    let profiles =
        TeamProfiles::from_strategies(&LeagueStrategies::build(&scored, tree.leaves.len())?);

    let length = cfg.simulation.match_length_s;
    let clock_m1 = fit_shot_clock(&split.train, false, length)?;
    let clock_ctx = fit_shot_clock(&split.train, true, length)?;
    let season = fit_poisson_with(&match_results(&split.train, None)?, &cfg.poisson, None)?;

    let test = match_results(&split.test, None)?;
    let mut rows = Vec::with_capacity(3 * test.len());
    let mut preds = [Vec::new(), Vec::new(), Vec::new()];
    let mut truths = Vec::with_capacity(test.len());
    for r in &test {
        let sim = SimulationConfig {
            rng_seed: rng::derive_seed(cfg.simulation.rng_seed, u64::from(r.match_id)),
            ..cfg.simulation
        };
        let (h, a) = (r.home_team, r.away_team);
        let bhm = simulate_bhm(&season, h, a, &sim)?.mean;
        let m1 = simulate_match(&clock_m1, &profiles, h, a, &sim, SimulationMode::M1)?.mean;
        let ctx = simulate_match(&clock_ctx, &profiles, h, a, &sim, SimulationMode::Context)?.mean;
        for (k, (mode, p)) in [("bhm", bhm), ("m1", m1), ("context", ctx)]
            .into_iter()
            .enumerate()
        {
            preds[k].push(p);
            rows.push(PredictionRow {
                match_id: r.match_id,
                home_team: h,
                away_team: a,
                predicted_home: p[0],
                predicted_away: p[1],
                truth_home: r.goals[0],
                truth_away: r.goals[1],
                mode: mode.to_string(),
            });
        }
        truths.push(r.goals);
    }
    Ok(SeasonReport {
        train_matches: split.train_matches.len(),
        test_matches: test.len(),
        codebook_size: tree.leaves.len(),
        rows,
        mse_bhm: evaluate_mse(&preds[0], &truths)?,
        mse_m1: evaluate_mse(&preds[1], &truths)?,
        mse_context: evaluate_mse(&preds[2], &truths)?,
    })
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn close(w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

pub fn write_predictions_csv(rows: &[PredictionRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    close(w, path)
}

pub fn read_predictions_csv(path: impl AsRef<Path>) -> Result<Vec<PredictionRow>> {
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

#[derive(Serialize)]
struct MseRow<'a> {
    model: &'a str,
    mse: f64,
}

/// One row per model: the Poisson model, M1 and the context simulator.
pub fn write_mse_csv(report: &SeasonReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    for (model, mse) in [
        ("BHM", report.mse_bhm),
        ("M1", report.mse_m1),
        ("Ours", report.mse_context),
    ] {
        w.serialize(MseRow { model, mse })?;
    }
    close(w, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{generate_synthetic, SyntheticConfig};

    #[test]
    fn small_season_runs_end_to_end() {
        let data = generate_synthetic(&SyntheticConfig {
            n_teams: 4,
            n_matches: 24,
            tau: 2,
            max_plays: None,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let cfg = ExperimentConfig {
            tree: TreeConfig {
                n_layers: 3,
                epochs: 2,
                target_codebook_size: 12,
                ..TreeConfig::default()
            },
            simulation: SimulationConfig {
                n_runs: 20,
                ..SimulationConfig::default()
            },
            ..ExperimentConfig::default()
        };
        let report = run_season_experiment(&data, &cfg).unwrap();
        assert_eq!(report.rows.len(), 3 * report.test_matches);
        assert!(
            report.mse_bhm.is_finite()
                && report.mse_m1.is_finite()
                && report.mse_context.is_finite()
        );
        assert_eq!(report, run_season_experiment(&data, &cfg).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(PREDICTIONS_CSV);
        write_predictions_csv(&report.rows, &path).unwrap();
        assert_eq!(read_predictions_csv(&path).unwrap(), report.rows);
        write_mse_csv(&report, dir.path().join(MSE_CSV)).unwrap();
    }
}
