use super::encoder::{apply_dropout, Encoder, Linear};
use super::tagger::{check_corpus, index_weighted_f1};
use super::train::{fit, DropoutCtx, FitSummary, Network, TrainConfig};
use super::argmax;
use crate::corpus::{Intent, Label, Utterance};
use crate::embeddings::{build_embeddings, PretrainedVectors};
use crate::error::{NluError, Result};
use crate::numerics::{softmax, NodeId, Tape, Tensor};
use crate::recurrent::AttentionParams;

/// Seq2one intent classifier: Bi-RNN, optionally attention-pooled, then a
/// 10-way softmax.
#[derive(Clone, Debug, PartialEq)]
pub struct IntentModel {
    pub encoder: Encoder,
    pub attention: Option<AttentionParams>,
    pub output: Linear,
    pub config: TrainConfig,
    pub summary: FitSummary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntentPrediction {
    pub intent: Intent,
    pub confidence: f64,
    pub distribution: Vec<f64>,
    pub attention: Option<Vec<f64>>,
}

pub(crate) struct IntentExample {
    indices: Vec<usize>,
    intent: usize,
}

impl IntentModel {
    pub fn use_attention(&self) -> bool {
        self.attention.is_some()
    }

    /// Returns the logits node and, with attention, the weights node.
    fn logits(&self, tape: &mut Tape, indices: &[usize], dropout: &mut DropoutCtx<'_>) -> Result<(NodeId, Option<NodeId>)> {
        let enc = self.encoder.bind(tape);
        let att = self.attention.as_ref().map(|a| a.bind(tape));
        let out = self.output.bind(tape);
        let encoded = self.encoder.encode(tape, &enc, indices, dropout)?;
        let (features, weights) = match att {
            Some(att) => {
                let (ctx, w) = att.pool(tape, encoded.outputs)?;
                (ctx, Some(w))
            }
            None => (encoded.summary(tape)?, None),
        };
        let features = apply_dropout(tape, features, dropout)?;
        Ok((Linear::apply(tape, out, features)?, weights))
    }

    fn classify_indices(&self, indices: &[usize]) -> Result<IntentPrediction> {
        let mut tape = Tape::new();
        let (logits, weights) = self.logits(&mut tape, indices, &mut None)?;
        let distribution = softmax(&tape.tensor(logits))?.data().to_vec();
        let best = argmax(&distribution);
        Ok(IntentPrediction {
            intent: Intent::ALL[best],
            confidence: distribution[best],
            attention: weights.map(|w| tape.value(w).to_vec()),
            distribution,
        })
    }

    pub fn classify<S: AsRef<str>>(&self, tokens: &[S]) -> Result<IntentPrediction> {
        if tokens.is_empty() {
            return Err(NluError::Contract("cannot classify an empty utterance".into()));
        }
        self.classify_indices(&self.encoder.vocab.encode(tokens))
    }
}

impl Network for IntentModel {
    type Example = IntentExample;

    fn tensors(&self) -> Vec<&Tensor> {
        let mut v = self.encoder.tensors();
        if let Some(a) = &self.attention {
            v.extend(a.tensors());
        }
        v.extend(self.output.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.encoder.tensors_mut();
        if let Some(a) = &mut self.attention {
            v.extend(a.tensors_mut());
        }
        v.extend(self.output.tensors_mut());
        v
    }

    fn loss(&self, tape: &mut Tape, ex: &IntentExample, dropout: &mut DropoutCtx<'_>) -> Result<NodeId> {
        let (logits, _) = self.logits(tape, &ex.indices, dropout)?;
        tape.softmax_cross_entropy(logits, ex.intent)
    }

    fn monitor_score(&self, examples: &[IntentExample]) -> Result<f64> {
        let gold: Vec<usize> = examples.iter().map(|e| e.intent).collect();
        let pred: Vec<usize> = examples
            .iter()
            .map(|e| Ok(self.classify_indices(&e.indices)?.intent.index()))
            .collect::<Result<_>>()?;
        index_weighted_f1::<Intent>(&gold, &pred)
    }
}

/// Trains a seq2one classifier on the utterance intent. Without attention
/// the classifier sees the final forward and backward states.
pub fn train_seq2one(
    corpus: &[Utterance],
    use_attention: bool,
    cfg: &TrainConfig,
    pretrained: Option<&PretrainedVectors>,
) -> Result<IntentModel> {
    train_seq2one_with_vocab(corpus, corpus, use_attention, cfg, pretrained)
}

/// As [`train_seq2one`], with the vocabulary taken from `vocab_source`.
pub(crate) fn train_seq2one_with_vocab(
    corpus: &[Utterance],
    vocab_source: &[Utterance],
    use_attention: bool,
    cfg: &TrainConfig,
    pretrained: Option<&PretrainedVectors>,
) -> Result<IntentModel> {
    check_corpus(corpus)?;
    cfg.validate()?;
    let seeds = cfg.stream();
    let (vocab, embeddings) = build_embeddings(
        vocab_source.iter().flat_map(|u| u.tokens.iter().map(String::as_str)),
        pretrained,
        cfg.embedding_dim,
        cfg.trainable_embeddings,
        seeds,
    )?;
    let mut rng = seeds.derive("init", 0).rng();
    let encoder = Encoder::init(vocab, embeddings, cfg.cell, cfg.hidden_dim, &mut rng);
    let attention = use_attention.then(|| AttentionParams::init(encoder.output_dim(), cfg.attention_dim, &mut rng));
    let output = Linear::init(Intent::count(), encoder.output_dim(), &mut rng);
    let examples = corpus
        .iter()
        .map(|u| IntentExample {
            indices: encoder.vocab.encode(&u.tokens),
            intent: u.intent.index(),
        })
        .collect();
    let mut model = IntentModel {
        encoder,
        attention,
        output,
        config: cfg.clone(),
        summary: FitSummary::default(),
    };
    model.summary = fit(&mut model, examples, cfg)?;
    Ok(model)
}
