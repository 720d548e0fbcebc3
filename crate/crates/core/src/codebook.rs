//! Playbook extraction: one element per tree leaf, with the histogram of
//! expected-goal values of the plays routed to it.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::deeptree::{DeepDecisionTree, PredictionNode};
use crate::trajectory::{unflatten, AgentTrajectory, Dataset, Play, PlayType};
use crate::{Error, Result};

pub const TRAJECTORIES_CSV: &str = "playbook_trajectories.csv";
pub const HISTOGRAMS_CSV: &str = "playbook_histograms.csv";

/// Equal-width bins over `[0, 1]`: half-open `[l_k, l_{k+1})`, last bin closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HistogramSpecRepr", into = "HistogramSpecRepr")]
pub struct HistogramSpec {
    n_bins: usize,
    edges: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HistogramSpecRepr {
    bin_width: f64,
}

impl TryFrom<HistogramSpecRepr> for HistogramSpec {
    type Error = Error;

    fn try_from(r: HistogramSpecRepr) -> Result<Self> {
        HistogramSpec::new(r.bin_width)
    }
}

impl From<HistogramSpec> for HistogramSpecRepr {
    fn from(s: HistogramSpec) -> Self {
        HistogramSpecRepr {
            bin_width: s.bin_width(),
        }
    }
}

impl Default for HistogramSpec {
    fn default() -> Self {
        HistogramSpec::new(0.1).expect("0.1 divides the unit interval")
    }
}

impl HistogramSpec {
    /// `bin_width` must divide 1 into a whole number of bins.
    pub fn new(bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "bin width {bin_width} outside (0, 1]"
            )));
        }
        let n = (1.0 / bin_width).round();
        if (n * bin_width - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "bin width {bin_width} does not divide [0, 1]"
            )));
        }
        let n_bins = n as usize;
        let edges = (0..=n_bins).map(|k| k as f64 / n).collect();
        Ok(HistogramSpec { n_bins, edges })
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn bin_width(&self) -> f64 {
        1.0 / self.n_bins as f64
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Bin holding `p`; values on an interior edge go to the upper bin.
    pub fn bin(&self, p: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
        }
        Ok(self.edges[1..self.n_bins].partition_point(|&e| e <= p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookElement {
    pub id: usize,
    pub play_type: PlayType,
    /// Leaf centroid, attacking roles then defending roles.
    pub mean_play: Vec<AgentTrajectory>,
    pub member_count: usize,
    pub counts: Vec<usize>,
    /// `counts / (member_count · h)`; all zero for an empty element.
    pub density: Vec<f64>,
}

/// Routes `play` through the tree: the hard leaf id and its goal probability.
pub fn assign_and_score(tree: &DeepDecisionTree, play: &Play) -> Result<(usize, f64)> {
    tree.assign_and_score(play)
}

fn mean_play(leaf: &PredictionNode, tau: usize, m: usize) -> Vec<AgentTrajectory> {
    let (attacking, defending) = unflatten(&leaf.center, tau, m);
    attacking.into_iter().chain(defending).collect()
}

pub fn build_histograms(
    tree: &DeepDecisionTree,
    dataset: &Dataset,
    spec: &HistogramSpec,
) -> Result<Vec<CodebookElement>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let k = spec.n_bins();
    let mut counts = vec![vec![0usize; k]; tree.leaves.len()];
    for play in &dataset.plays {
        let (c, p) = tree.assign_and_score(play)?;
        counts[c][spec.bin(p)?] += 1;
    }
    let h = spec.bin_width();
    Ok(tree
        .leaves
        .iter()
        .zip(counts)
        .map(|(leaf, counts)| {
            let n: usize = counts.iter().sum();
            let density = counts
                .iter()
                .map(|&v| {
                    if n == 0 {
                        0.0
                    } else {
                        v as f64 / (n as f64 * h)
                    }
                })
                .collect();
            CodebookElement {
                id: leaf.codebook_id,
                play_type: leaf.play_type,
                mean_play: mean_play(leaf, tree.tau, tree.m),
                member_count: n,
                counts,
                density,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub element: usize,
    /// Position in the flattened role order: attacking roles, then defending.
    pub role: usize,
    pub frame: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub element: usize,
    pub bin_low: f64,
    pub bin_high: f64,
    pub count: usize,
    pub density: f64,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn finish<W: std::io::Write>(w: csv::Writer<W>, path: &Path) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

/// Writes the playbook CSVs into `dir` and returns their paths
/// (trajectories, histograms).
pub fn export_playbook(
    elements: &[CodebookElement],
    spec: &HistogramSpec,
    dir: impl AsRef<Path>,
) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    let traj_path = dir.join(TRAJECTORIES_CSV);
    let mut w = csv_writer(&traj_path)?;
    for el in elements {
        for (role, agent) in el.mean_play.iter().enumerate() {
            for (frame, p) in agent.points.iter().enumerate() {
                w.serialize(TrajectoryRow {
                    element: el.id,
                    role,
                    frame,
                    x: p[0],
                    y: p[1],
                })?;
            }
        }
    }
    finish(w, &traj_path)?;

    let hist_path = dir.join(HISTOGRAMS_CSV);
    let mut w = csv_writer(&hist_path)?;
    let edges = spec.edges();
    for el in elements {
        for (k, (&count, &density)) in el.counts.iter().zip(&el.density).enumerate() {
            w.serialize(HistogramRow {
                element: el.id,
                bin_low: edges[k],
                bin_high: edges[k + 1],
                count,
                density,
            })?;
        }
    }
    finish(w, &hist_path)?;
    Ok((traj_path, hist_path))
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
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

pub fn read_trajectory_rows(path: impl AsRef<Path>) -> Result<Vec<TrajectoryRow>> {
    read_rows(path.as_ref())
}

pub fn read_histogram_rows(path: impl AsRef<Path>) -> Result<Vec<HistogramRow>> {
    read_rows(path.as_ref())
}
