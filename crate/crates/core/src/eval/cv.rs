use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{score, ClassMetrics, Scores};
use crate::corpus::{kfold_split, write_corpus, Intent, KeywordLabel, Label, SlotLabel, Utterance};
use crate::embeddings::PretrainedVectors;
use crate::error::{NluError, Result};
use crate::models::{ModelSpec, System, TaggerTask, TrainConfig};
use crate::numerics::SeedStream;

/// What a report scores: token slots, token keywords or utterance intents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Slot,
    Keyword,
    Intent,
}

impl Task {
    pub fn of(spec: ModelSpec) -> Task {
        match spec.tagger_task() {
            Some(TaggerTask::Slot) => Task::Slot,
            Some(TaggerTask::Keyword) => Task::Keyword,
            None => Task::Intent,
        }
    }
}

/// Per-fold bookkeeping, enough to audit that no test data reached training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub train_size: usize,
    pub test_ids: Vec<u64>,
    /// SHA-256 of the serialized training utterances.
    pub train_hash: String,
    /// Utterance total of the fold's frequency table (hybrid specs only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub freq_table_total: Option<f64>,
    /// SHA-256 of the fold's frequency table JSON (hybrid specs only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub freq_table_hash: Option<String>,
    pub weighted_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub spec: ModelSpec,
    pub task: Task,
    pub seed: u64,
    pub k: usize,
    pub config: TrainConfig,
    pub classes: Vec<ClassMetrics>,
    pub weighted_f1: f64,
    pub folds: Vec<FoldRecord>,
}

impl CvReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Gold and predicted label names of one fold, in test order.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldPredictions {
    pub gold: Vec<String>,
    pub pred: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash identifying a training set.
pub fn training_hash(train: &[Utterance]) -> String {
    sha256_hex(write_corpus(train).as_bytes())
}

/// Scores pooled name sequences over the label set of `task`.
pub fn score_names(task: Task, gold: &[String], pred: &[String]) -> Result<Scores> {
    fn typed<L: Label>(gold: &[String], pred: &[String]) -> Result<Scores> {
        let parse = |v: &[String]| -> Result<Vec<L>> {
            v.iter()
                .map(|s| L::parse(s).ok_or_else(|| NluError::Data(format!("unknown label '{s}'"))))
                .collect()
        };
        score(&parse(gold)?, &parse(pred)?, L::ALL)
    }
    match task {
        Task::Slot => typed::<SlotLabel>(gold, pred),
        Task::Keyword => typed::<KeywordLabel>(gold, pred),
        Task::Intent => typed::<Intent>(gold, pred),
    }
}

fn names<L: Label>(labels: &[L]) -> Vec<String> {
    labels.iter().map(|l| l.name().to_string()).collect()
}

fn predict_fold(system: &System, task: Task, test: &[Utterance]) -> Result<FoldPredictions> {
    let mut out = FoldPredictions {
        gold: Vec::new(),
        pred: Vec::new(),
    };
    for u in test {
        let p = system.predict(&u.tokens)?;
        let missing = || NluError::Contract(format!("{} produced no {task:?} output", system.spec()));
        match task {
            Task::Slot => {
                out.gold.extend(names(&u.slot_tags));
                out.pred.extend(names(&p.slots.ok_or_else(missing)?));
            }
            Task::Keyword => {
                out.gold.extend(names(&u.keyword_tags));
                out.pred.extend(names(&p.keywords.ok_or_else(missing)?));
            }
            Task::Intent => {
                out.gold.push(u.intent.name().to_string());
                out.pred.push(p.intent.ok_or_else(missing)?.name().to_string());
            }
        }
    }
    Ok(out)
}

/// Seed used to train fold `fold`.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    SeedStream::new(seed).derive("fold", fold as u64).seed()
}

/// k-fold cross-validation with pooled (micro) scoring. Every model and
/// frequency table is built from the training folds only.
pub fn run_cv(
    spec: ModelSpec,
    cfg: &TrainConfig,
    corpus: &[Utterance],
    k: usize,
    seed: u64,
    pretrained: Option<&PretrainedVectors>,
) -> Result<CvReport> {
    Ok(run_cv_detailed(spec, cfg, corpus, k, seed, pretrained)?.0)
}

/// As [`run_cv`], also returning each fold's predictions.
pub fn run_cv_detailed(
    spec: ModelSpec,
    cfg: &TrainConfig,
    corpus: &[Utterance],
    k: usize,
    seed: u64,
    pretrained: Option<&PretrainedVectors>,
) -> Result<(CvReport, Vec<FoldPredictions>)> {
    cfg.validate()?;
    let task = Task::of(spec);
    let folds = kfold_split(corpus, k, seed)?;
    let mut records = Vec::with_capacity(k);
    let mut outcomes = Vec::with_capacity(k);
    for (i, fold) in folds.iter().enumerate() {
        let train = fold.train_set(corpus);
        let test = fold.test_set(corpus);
        let fold_cfg = TrainConfig {
            seed: fold_seed(seed, i),
            ..cfg.clone()
        };
        let system = System::train(spec, &train, &fold_cfg, pretrained)?;
        let (freq_table_total, freq_table_hash) = match &system {
            System::Hybrid(p) => (Some(p.table.total()), Some(sha256_hex(&serde_json::to_vec(&p.table)?))),
            _ => (None, None),
        };
        let preds = predict_fold(&system, task, &test)?;
        records.push(FoldRecord {
            fold: i,
            train_size: train.len(),
            test_ids: test.iter().map(|u| u.id).collect(),
            train_hash: training_hash(&train),
            freq_table_total,
            freq_table_hash,
            weighted_f1: score_names(task, &preds.gold, &preds.pred)?.weighted_f1,
        });
        outcomes.push(preds);
    }
    let gold: Vec<String> = outcomes.iter().flat_map(|o| o.gold.iter().cloned()).collect();
    let pred: Vec<String> = outcomes.iter().flat_map(|o| o.pred.iter().cloned()).collect();
    let pooled = score_names(task, &gold, &pred)?;
    let report = CvReport {
        spec,
        task,
        seed,
        k,
        config: cfg.clone(),
        classes: pooled.classes,
        weighted_f1: pooled.weighted_f1,
        folds: records,
    };
    Ok((report, outcomes))
}
