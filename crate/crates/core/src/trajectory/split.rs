//! Seeded train/test split at match granularity.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use super::Dataset;
use crate::{rng, Error, Result};

#[derive(Debug, Clone)]
pub struct MatchSplit {
    pub train_matches: BTreeSet<u32>,
    pub test_matches: BTreeSet<u32>,
    pub train: Dataset,
    pub test: Dataset,
}

/// Assigns `round(train_frac · n_matches)` whole matches to the training set.
/// Plays keep their original relative order within each side.
pub fn split_by_match(dataset: &Dataset, train_frac: f64, seed: u64) -> Result<MatchSplit> {
    if !(0.0..=1.0).contains(&train_frac) {
        return Err(Error::InvalidConfig(format!(
            "train fraction {train_frac} outside [0, 1]"
        )));
    }
    let mut ids: Vec<u32> = dataset.match_ids().into_iter().collect();
    ids.shuffle(&mut rng::seeded(seed, 0x5EED_5EED));
    let n_train = (train_frac * ids.len() as f64).round() as usize;
    let train_matches: BTreeSet<u32> = ids[..n_train].iter().copied().collect();
    let test_matches: BTreeSet<u32> = ids[n_train..].iter().copied().collect();
    let (train, test): (Vec<_>, Vec<_>) = dataset
        .plays
        .iter()
        .cloned()
        .partition(|p| train_matches.contains(&p.match_id));
    Ok(MatchSplit {
        train_matches,
        test_matches,
        train: dataset.with_plays(train),
        test: dataset.with_plays(test),
    })
}
