use serde::{Deserialize, Serialize};

use super::encoder::{apply_dropout, Encoder, Linear};
use super::train::{fit, DropoutCtx, FitSummary, Network, TrainConfig};
use super::argmax;
use crate::corpus::{KeywordLabel, Label, SlotLabel, Utterance};
use crate::embeddings::{build_embeddings, PretrainedVectors};
use crate::error::{NluError, Result};
use crate::eval::score;
use crate::numerics::{softmax, NodeId, Tape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaggerTask {
    Slot,
    Keyword,
}

impl TaggerTask {
    pub fn label_count(self) -> usize {
        match self {
            TaggerTask::Slot => SlotLabel::count(),
            TaggerTask::Keyword => KeywordLabel::count(),
        }
    }

    pub fn label_names(self) -> Vec<&'static str> {
        match self {
            TaggerTask::Slot => SlotLabel::ALL.iter().map(|l| l.name()).collect(),
            TaggerTask::Keyword => KeywordLabel::ALL.iter().map(|l| l.name()).collect(),
        }
    }

    pub fn gold(self, u: &Utterance) -> Vec<usize> {
        match self {
            TaggerTask::Slot => u.slot_tags.iter().map(|l| l.index()).collect(),
            TaggerTask::Keyword => u.keyword_tags.iter().map(|l| l.index()).collect(),
        }
    }
}

/// Per-token argmax labels (label indices) and their softmax distributions.
#[derive(Clone, Debug, PartialEq)]
pub struct TagOutput {
    pub labels: Vec<usize>,
    pub probabilities: Vec<Vec<f64>>,
}

/// Bi-RNN sequence tagger for slot types or intent keywords.
#[derive(Clone, Debug, PartialEq)]
pub struct TaggerModel {
    pub task: TaggerTask,
    pub encoder: Encoder,
    pub output: Linear,
    pub config: TrainConfig,
    pub summary: FitSummary,
}

pub(crate) struct TagExample {
    indices: Vec<usize>,
    labels: Vec<usize>,
}

/// Weighted F1 between two index sequences over a closed label set `L`.
pub(crate) fn index_weighted_f1<L: Label>(gold: &[usize], pred: &[usize]) -> Result<f64> {
    let to = |v: &[usize]| -> Vec<L> { v.iter().map(|&i| L::from_index(i).expect("label index")).collect() };
    Ok(score(&to(gold), &to(pred), L::ALL)?.weighted_f1)
}

impl TaggerModel {
    pub fn label_count(&self) -> usize {
        self.output.out_dim()
    }

    fn logits(&self, tape: &mut Tape, indices: &[usize], dropout: &mut DropoutCtx<'_>) -> Result<Vec<NodeId>> {
        let enc = self.encoder.bind(tape);
        let out = self.output.bind(tape);
        let encoded = self.encoder.encode(tape, &enc, indices, dropout)?;
        let hs = apply_dropout(tape, encoded.outputs, dropout)?;
        (0..indices.len())
            .map(|t| {
                let row = tape.row(hs, t)?;
                Linear::apply(tape, out, row)
            })
            .collect()
    }

    fn tag_indices(&self, indices: &[usize]) -> Result<TagOutput> {
        let mut tape = Tape::new();
        let logits = self.logits(&mut tape, indices, &mut None)?;
        let mut labels = Vec::with_capacity(logits.len());
        let mut probabilities = Vec::with_capacity(logits.len());
        for l in logits {
            let p = softmax(&tape.tensor(l))?.data().to_vec();
            labels.push(argmax(&p));
            probabilities.push(p);
        }
        Ok(TagOutput { labels, probabilities })
    }

    /// Labels every token; probabilities are kept for downstream confidence.
    pub fn tag<S: AsRef<str>>(&self, tokens: &[S]) -> Result<TagOutput> {
        if tokens.is_empty() {
            return Err(NluError::Contract("cannot tag an empty utterance".into()));
        }
        self.tag_indices(&self.encoder.vocab.encode(tokens))
    }

    pub fn tag_slots<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<SlotLabel>> {
        self.typed(tokens, TaggerTask::Slot)
    }

    pub fn tag_keywords<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<KeywordLabel>> {
        self.typed(tokens, TaggerTask::Keyword)
    }

    fn typed<L: Label, S: AsRef<str>>(&self, tokens: &[S], task: TaggerTask) -> Result<Vec<L>> {
        if self.task != task {
            return Err(NluError::Contract(format!("{:?} tagger asked for {:?} labels", self.task, task)));
        }
        Ok(self
            .tag(tokens)?
            .labels
            .into_iter()
            .map(|i| L::from_index(i).expect("label index"))
            .collect())
    }
}

impl Network for TaggerModel {
    type Example = TagExample;

    fn tensors(&self) -> Vec<&Tensor> {
        let mut v = self.encoder.tensors();
        v.extend(self.output.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.encoder.tensors_mut();
        v.extend(self.output.tensors_mut());
        v
    }

    fn loss(&self, tape: &mut Tape, ex: &TagExample, dropout: &mut DropoutCtx<'_>) -> Result<NodeId> {
        let logits = self.logits(tape, &ex.indices, dropout)?;
        let terms: Vec<NodeId> = logits
            .into_iter()
            .zip(&ex.labels)
            .map(|(l, &y)| tape.softmax_cross_entropy(l, y))
            .collect::<Result<_>>()?;
        tape.sum(&terms)
    }

    fn monitor_score(&self, examples: &[TagExample]) -> Result<f64> {
        let (mut gold, mut pred) = (Vec::new(), Vec::new());
        for ex in examples {
            gold.extend_from_slice(&ex.labels);
            pred.extend(self.tag_indices(&ex.indices)?.labels);
        }
        match self.task {
            TaggerTask::Slot => index_weighted_f1::<SlotLabel>(&gold, &pred),
            TaggerTask::Keyword => index_weighted_f1::<KeywordLabel>(&gold, &pred),
        }
    }
}

pub(crate) fn check_corpus(corpus: &[Utterance]) -> Result<()> {
    if corpus.is_empty() {
        return Err(NluError::Data("cannot train on an empty corpus".into()));
    }
    corpus.iter().try_for_each(Utterance::validate)
}

/// Trains a slot or keyword tagger with summed per-token cross-entropy.
pub fn train_tagger(
    corpus: &[Utterance],
    task: TaggerTask,
    cfg: &TrainConfig,
    pretrained: Option<&PretrainedVectors>,
) -> Result<TaggerModel> {
    check_corpus(corpus)?;
    cfg.validate()?;
    let seeds = cfg.stream();
    let (vocab, embeddings) = build_embeddings(
        corpus.iter().flat_map(|u| u.tokens.iter().map(String::as_str)),
        pretrained,
        cfg.embedding_dim,
        cfg.trainable_embeddings,
        seeds,
    )?;
    let mut rng = seeds.derive("init", 0).rng();
    let encoder = Encoder::init(vocab, embeddings, cfg.cell, cfg.hidden_dim, &mut rng);
    let output = Linear::init(task.label_count(), encoder.output_dim(), &mut rng);
    let examples = corpus
        .iter()
        .map(|u| TagExample {
            indices: encoder.vocab.encode(&u.tokens),
            labels: task.gold(u),
        })
        .collect();
    let mut model = TaggerModel {
        task,
        encoder,
        output,
        config: cfg.clone(),
        summary: FitSummary::default(),
    };
    model.summary = fit(&mut model, examples, cfg)?;
    Ok(model)
}
