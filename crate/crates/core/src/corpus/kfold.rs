use rand::seq::SliceRandom;

use super::schema::{Intent, Label};
use super::Utterance;
use crate::error::{NluError, Result};
use crate::numerics::SeedStream;

/// Indices into the corpus for one train/test split, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Fold {
    pub fn train_set(&self, corpus: &[Utterance]) -> Vec<Utterance> {
        self.train.iter().map(|&i| corpus[i].clone()).collect()
    }

    pub fn test_set(&self, corpus: &[Utterance]) -> Vec<Utterance> {
        self.test.iter().map(|&i| corpus[i].clone()).collect()
    }
}

/// Stratified k-fold split. Utterances are grouped by intent, each group is
/// shuffled, and the concatenation is dealt round-robin across folds, so
/// fold sizes differ by at most one and every intent is spread evenly.
pub fn kfold_split(corpus: &[Utterance], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(NluError::Config(format!("k must be at least 2, got {k}")));
    }
    if k > corpus.len() {
        return Err(NluError::Config(format!("k = {k} exceeds corpus size {}", corpus.len())));
    }
    let mut rng = SeedStream::new(seed).derive("kfold", k as u64).rng();
    let mut order = Vec::with_capacity(corpus.len());
    for intent in Intent::ALL {
        let mut group: Vec<usize> = (0..corpus.len()).filter(|&i| corpus[i].intent == *intent).collect();
        group.shuffle(&mut rng);
        order.extend(group);
    }
    let mut tests = vec![Vec::new(); k];
    for (pos, idx) in order.into_iter().enumerate() {
        tests[pos % k].push(idx);
    }
    Ok(tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let train = (0..corpus.len()).filter(|i| test.binary_search(i).is_err()).collect();
            Fold { train, test }
        })
        .collect())
}
