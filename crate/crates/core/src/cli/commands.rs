//! One function per subcommand; each returns the files it read and wrote.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{Command, PipelineConfig};
use crate::alignment::{align_dataset, learn_template, save_template};
use crate::baseline::fit_baseline;
use crate::codebook::{build_histograms, export_playbook};
use crate::deeptree::{evaluate_logloss, predict_dataset, train, DeepDecisionTree};
use crate::simulator::{
    run_season_experiment, write_mse_csv, write_predictions_csv, MSE_CSV, PREDICTIONS_CSV,
};
use crate::strategy::{score_plays, write_strategy_csv, LeagueStrategies, STRATEGY_CSV};
use crate::trajectory::{
    generate_synthetic, load_plays, save_plays, split_by_match, Dataset, MatchSplit,
};
use crate::{Error, Result};

pub const PLAYS_JSONL: &str = "plays.jsonl";
pub const PLAYS_CSV: &str = "plays.csv";
pub const TEMPLATE_JSON: &str = "template.json";
pub const ALIGNED_JSONL: &str = "aligned.jsonl";
pub const ALIGNMENT_CSV: &str = "alignment_cost.csv";
pub const TREE_JSON: &str = "tree.json";
pub const TRAINING_CSV: &str = "training_loss.csv";
pub const SPLIT_CSV: &str = "split.csv";
pub const EVALUATION_CSV: &str = "evaluation.csv";
pub const EVALUATION_PREDICTIONS_CSV: &str = "evaluation_predictions.csv";

type Files = (Vec<PathBuf>, Vec<PathBuf>);

pub(super) fn run(command: &Command, cfg: &PipelineConfig, out: &Path) -> Result<Files> {
    match command {
        Command::Generate(_) => generate(cfg, out),
        Command::Align(a) => align(&a.input, cfg, out),
        Command::Train(a) => train_tree(&a.input.input, cfg, out),
        Command::Evaluate(a) => evaluate(&a.input.input, &a.tree, cfg, out),
        Command::Codebook(a) => codebook(&a.input.input, &a.tree, cfg, out),
        Command::Strategy(a) => strategy(&a.input.input, &a.tree, cfg, out),
        Command::Simulate(a) => simulate(&a.input.input, cfg, out),
    }
}

fn write_rows<T: Serialize>(rows: impl IntoIterator<Item = T>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct PlayRow {
    play: usize,
    match_id: u32,
    attacking_team: u32,
    defending_team: u32,
    is_home: bool,
    play_type: &'static str,
    shot_clock_s: f64,
    label: u8,
}

fn generate(cfg: &PipelineConfig, out: &Path) -> Result<Files> {
    let data = generate_synthetic(&cfg.synthetic)?;
    let jsonl = out.join(PLAYS_JSONL);
    save_plays(&data, &jsonl)?;
    let csv = out.join(PLAYS_CSV);
    write_rows(
        data.plays.iter().enumerate().map(|(i, p)| PlayRow {
            play: i,
            match_id: p.match_id,
            attacking_team: p.attacking_team,
            defending_team: p.defending_team,
            is_home: p.is_home,
            play_type: p.play_type.as_str(),
            shot_clock_s: p.shot_clock_s,
            label: u8::from(p.label),
        }),
        &csv,
    )?;
    Ok((Vec::new(), vec![jsonl, csv]))
}

#[derive(Serialize)]
struct CostRow {
    iteration: usize,
    cost: f64,
}

fn align(input: &Path, cfg: &PipelineConfig, out: &Path) -> Result<Files> {
    let data = load_plays(input)?;
    let template = learn_template(&data, &cfg.template)?;
    let aligned = align_dataset(&data, &template)?;
    let (t, a, c) = (
        out.join(TEMPLATE_JSON),
        out.join(ALIGNED_JSONL),
        out.join(ALIGNMENT_CSV),
    );
    save_template(&template, &t)?;
    save_plays(&aligned, &a)?;
    write_rows(
        template
            .cost_trace
            .iter()
            .enumerate()
            .map(|(iteration, &cost)| CostRow { iteration, cost }),
        &c,
    )?;
    Ok((vec![input.to_path_buf()], vec![t, a, c]))
}

fn split(data: &Dataset, cfg: &PipelineConfig) -> Result<MatchSplit> {
    let s = split_by_match(data, cfg.train_frac, cfg.split_seed)?;
    if s.train.is_empty() {
        return Err(Error::invalid("the training split has no plays"));
    }
    Ok(s)
}

#[derive(Serialize)]
struct SplitRow {
    match_id: u32,
    side: &'static str,
}

fn train_tree(input: &Path, cfg: &PipelineConfig, out: &Path) -> Result<Files> {
    let data = load_plays(input)?;
    let s = split(&data, cfg)?;
    let tree = train(&s.train, &cfg.tree)?;
    let (t, l, sp) = (
        out.join(TREE_JSON),
        out.join(TRAINING_CSV),
        out.join(SPLIT_CSV),
    );
    tree.save(&t)?;
    write_rows(&tree.loss_trace, &l)?;
    let mut rows: Vec<SplitRow> = s
        .train_matches
        .iter()
        .map(|&match_id| SplitRow {
            match_id,
            side: "train",
        })
        .chain(s.test_matches.iter().map(|&match_id| SplitRow {
            match_id,
            side: "test",
        }))
        .collect();
    rows.sort_by_key(|r| r.match_id);
    write_rows(rows, &sp)?;
    Ok((vec![input.to_path_buf()], vec![t, l, sp]))
}

#[derive(Serialize)]
struct EvaluationRow {
    model: &'static str,
    split: &'static str,
    matches: usize,
    plays: usize,
    log_loss: f64,
}

#[derive(Serialize)]
struct PredictionRow {
    play: usize,
    match_id: u32,
    element: usize,
    label: u8,
    tree: f64,
    baseline: f64,
}

fn evaluate(input: &Path, tree_path: &Path, cfg: &PipelineConfig, out: &Path) -> Result<Files> {
    let data = load_plays(input)?;
    let tree = DeepDecisionTree::load(tree_path)?;
    let s = split(&data, cfg)?;
    let baseline = fit_baseline(&s.train, &cfg.baseline)?;
    let mut rows = Vec::new();
    for (name, part, matches) in [
        ("train", &s.train, s.train_matches.len()),
        ("test", &s.test, s.test_matches.len()),
    ] {
        if part.is_empty() {
            continue;
        }
        rows.push(EvaluationRow {
            model: "tree",
            split: name,
            matches,
            plays: part.len(),
            log_loss: evaluate_logloss(&tree, part)?,
        });
        rows.push(EvaluationRow {
            model: "baseline",
            split: name,
            matches,
            plays: part.len(),
            log_loss: baseline.evaluate_logloss(part)?,
        });
    }
    let e = out.join(EVALUATION_CSV);
    write_rows(rows, &e)?;
    let p = out.join(EVALUATION_PREDICTIONS_CSV);
    let scored = predict_dataset(&tree, &s.test)?;
    write_rows(
        s.test
            .plays
            .iter()
            .zip(scored)
            .enumerate()
            .map(|(i, (play, (element, q)))| PredictionRow {
                play: i,
                match_id: play.match_id,
                element,
                label: u8::from(play.label),
                tree: q,
                baseline: baseline.predict(play),
            }),
        &p,
    )?;
    Ok((
        vec![input.to_path_buf(), tree_path.to_path_buf()],
        vec![e, p],
    ))
}

fn codebook(input: &Path, tree_path: &Path, cfg: &PipelineConfig, out: &Path) -> Result<Files> {
    let data = load_plays(input)?;
    let tree = DeepDecisionTree::load(tree_path)?;
    let elements = build_histograms(&tree, &data, &cfg.histogram)?;
    let (t, h) = export_playbook(&elements, &cfg.histogram, out)?;
    Ok((
        vec![input.to_path_buf(), tree_path.to_path_buf()],
        vec![t, h],
    ))
}

fn strategy(input: &Path, tree_path: &Path, cfg: &PipelineConfig, out: &Path) -> Result<Files> {
    let data = load_plays(input)?;
    let tree = DeepDecisionTree::load(tree_path)?;
    let scored = score_plays(&tree, &data, cfg.shot_value)?;
    let league = LeagueStrategies::build(&scored, tree.leaves.len())?;
    let path = out.join(STRATEGY_CSV);
    write_strategy_csv(&league, &path)?;
    Ok((
        vec![input.to_path_buf(), tree_path.to_path_buf()],
        vec![path],
    ))
}

fn simulate(input: &Path, cfg: &PipelineConfig, out: &Path) -> Result<Files> {
    let data = load_plays(input)?;
    let report = run_season_experiment(&data, &cfg.experiment())?;
    let (p, m) = (out.join(PREDICTIONS_CSV), out.join(MSE_CSV));
    write_predictions_csv(&report.rows, &p)?;
    write_mse_csv(&report, &m)?;
    Ok((vec![input.to_path_buf()], vec![p, m]))
}
