#![allow(dead_code)]

use std::path::PathBuf;

use cabin_nlu::corpus::{parse_corpus, Utterance};
use cabin_nlu::models::TrainConfig;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// The 50-utterance overfit corpus.
pub fn overfit_corpus() -> Vec<Utterance> {
    let text = std::fs::read_to_string(fixture_path("overfit50.tsv")).expect("fixture");
    parse_corpus(&text).expect("fixture parses")
}

/// Small network that memorizes the overfit corpus quickly.
pub fn overfit_config() -> TrainConfig {
    TrainConfig {
        hidden_dim: 32,
        attention_dim: 16,
        embedding_dim: 50,
        dropout: 0.0,
        max_epochs: 300,
        patience: 300,
        holdout_fraction: 0.0,
        ..TrainConfig::default()
    }
}
