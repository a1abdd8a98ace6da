//! Joint model: the utterance is wrapped as `<bou> tokens <eou>` and one
//! output layer scores every position. BOU/EOU positions are restricted to
//! the intent zone of the label space, interior positions to the token zone.

use super::encoder::{apply_dropout, Encoder, Linear};
use super::tagger::{check_corpus, index_weighted_f1};
use super::train::{fit, DropoutCtx, FitSummary, Network, TrainConfig};
use super::argmax;
use crate::corpus::{Intent, Label, TokenLabel, Utterance};
use crate::embeddings::{build_embeddings, PretrainedVectors, BOU, EOU};
use crate::error::{NluError, Result};
use crate::numerics::{softmax, NodeId, Tape, Tensor};

/// Size of the joint label space: intents first, then fused token labels.
pub const JOINT_LABELS: usize = 10 + 9;
const INTENT_ZONE: (usize, usize) = (0, 10);
const TOKEN_ZONE: (usize, usize) = (10, 9);

#[derive(Clone, Debug, PartialEq)]
pub struct JointModel {
    pub encoder: Encoder,
    pub output: Linear,
    pub config: TrainConfig,
    pub summary: FitSummary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointPrediction {
    pub intent: Intent,
    pub confidence: f64,
    pub tokens: Vec<TokenLabel>,
    /// Intent distribution at the BOU position.
    pub bou: Vec<f64>,
    /// Intent distribution at the EOU position.
    pub eou: Vec<f64>,
}

pub(crate) struct JointExample {
    indices: Vec<usize>,
    intent: usize,
    tokens: Vec<usize>,
}

/// Combines the two intent positions: agreeing argmaxes win outright,
/// otherwise the more confident position wins and exact ties go to EOU.
/// Returns the intent and its probability at the deciding position.
pub fn decode_intent(bou: &[f64], eou: &[f64]) -> (Intent, f64) {
    let (b, e) = (argmax(bou), argmax(eou));
    if b == e {
        (Intent::ALL[b], bou[b].max(eou[e]))
    } else if bou[b] > eou[e] {
        (Intent::ALL[b], bou[b])
    } else {
        (Intent::ALL[e], eou[e])
    }
}

fn wrap(inner: Vec<usize>) -> Vec<usize> {
    let mut v = Vec::with_capacity(inner.len() + 2);
    v.push(BOU);
    v.extend(inner);
    v.push(EOU);
    v
}

impl JointModel {
    pub fn label_space(&self) -> usize {
        self.output.out_dim()
    }

    /// Zone-restricted logits per position of the wrapped sequence.
    fn logits(&self, tape: &mut Tape, wrapped: &[usize], dropout: &mut DropoutCtx<'_>) -> Result<Vec<NodeId>> {
        let enc = self.encoder.bind(tape);
        let out = self.output.bind(tape);
        let encoded = self.encoder.encode(tape, &enc, wrapped, dropout)?;
        let hs = apply_dropout(tape, encoded.outputs, dropout)?;
        let last = wrapped.len() - 1;
        (0..wrapped.len())
            .map(|t| {
                let row = tape.row(hs, t)?;
                let full = Linear::apply(tape, out, row)?;
                let (start, len) = if t == 0 || t == last { INTENT_ZONE } else { TOKEN_ZONE };
                tape.slice(full, start, len)
            })
            .collect()
    }

    fn predict_wrapped(&self, wrapped: &[usize]) -> Result<JointPrediction> {
        let mut tape = Tape::new();
        let logits = self.logits(&mut tape, wrapped, &mut None)?;
        let probs: Vec<Vec<f64>> = logits
            .iter()
            .map(|&l| Ok(softmax(&tape.tensor(l))?.data().to_vec()))
            .collect::<Result<_>>()?;
        let last = probs.len() - 1;
        let (intent, confidence) = decode_intent(&probs[0], &probs[last]);
        let tokens = probs[1..last]
            .iter()
            .map(|p| TokenLabel::ALL[argmax(p)])
            .collect();
        Ok(JointPrediction {
            intent,
            confidence,
            tokens,
            bou: probs[0].clone(),
            eou: probs[last].clone(),
        })
    }

    /// Parameters in tape registration order.
    pub fn parameters(&self) -> Vec<&Tensor> {
        Network::tensors(self)
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        Network::tensors_mut(self)
    }

    /// Summed masked cross-entropy of one annotated utterance, no dropout.
    pub fn utterance_loss(&self, tape: &mut Tape, u: &Utterance) -> Result<NodeId> {
        u.validate()?;
        let ex = JointExample {
            indices: wrap(self.encoder.vocab.encode(&u.tokens)),
            intent: u.intent.index(),
            tokens: u.fused_tags().iter().map(|l| l.index()).collect(),
        };
        self.loss(tape, &ex, &mut None)
    }

    pub fn predict<S: AsRef<str>>(&self, tokens: &[S]) -> Result<JointPrediction> {
        if tokens.is_empty() {
            return Err(NluError::Contract("cannot predict on an empty utterance".into()));
        }
        self.predict_wrapped(&wrap(self.encoder.vocab.encode(tokens)))
    }
}

impl Network for JointModel {
    type Example = JointExample;

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

    fn loss(&self, tape: &mut Tape, ex: &JointExample, dropout: &mut DropoutCtx<'_>) -> Result<NodeId> {
        let logits = self.logits(tape, &ex.indices, dropout)?;
        let last = logits.len() - 1;
        let mut terms = Vec::with_capacity(logits.len());
        for (t, &l) in logits.iter().enumerate() {
            let target = if t == 0 || t == last { ex.intent } else { ex.tokens[t - 1] };
            terms.push(tape.softmax_cross_entropy(l, target)?);
        }
        tape.sum(&terms)
    }

    fn monitor_score(&self, examples: &[JointExample]) -> Result<f64> {
        let (mut gold_i, mut pred_i, mut gold_t, mut pred_t) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for ex in examples {
            let p = self.predict_wrapped(&ex.indices)?;
            gold_i.push(ex.intent);
            pred_i.push(p.intent.index());
            gold_t.extend_from_slice(&ex.tokens);
            pred_t.extend(p.tokens.iter().map(|l| l.index()));
        }
        let intent = index_weighted_f1::<Intent>(&gold_i, &pred_i)?;
        let token = index_weighted_f1::<TokenLabel>(&gold_t, &pred_t)?;
        Ok(0.5 * (intent + token))
    }
}

/// Trains the joint model with summed, zone-masked cross-entropy.
pub fn train_joint(corpus: &[Utterance], cfg: &TrainConfig, pretrained: Option<&PretrainedVectors>) -> Result<JointModel> {
    train_joint_with_vocab(corpus, corpus, cfg, pretrained)
}

pub(crate) fn train_joint_with_vocab(
    corpus: &[Utterance],
    vocab_source: &[Utterance],
    cfg: &TrainConfig,
    pretrained: Option<&PretrainedVectors>,
) -> Result<JointModel> {
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
    let output = Linear::init(JOINT_LABELS, encoder.output_dim(), &mut rng);
    let examples = corpus
        .iter()
        .map(|u| JointExample {
            indices: wrap(encoder.vocab.encode(&u.tokens)),
            intent: u.intent.index(),
            tokens: u.fused_tags().iter().map(|l| l.index()).collect(),
        })
        .collect();
    let mut model = JointModel {
        encoder,
        output,
        config: cfg.clone(),
        summary: FitSummary::default(),
    };
    model.summary = fit(&mut model, examples, cfg)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(hot: Intent, p: f64) -> Vec<f64> {
        let rest = (1.0 - p) / 9.0;
        Intent::ALL.iter().map(|&i| if i == hot { p } else { rest }).collect()
    }

    #[test]
    fn decode_rule() {
        assert_eq!(decode_intent(&dist(Intent::Stop, 0.9), &dist(Intent::Stop, 0.8)).0, Intent::Stop);
        assert_eq!(decode_intent(&dist(Intent::Stop, 0.6), &dist(Intent::Park, 0.7)).0, Intent::Park);
        assert_eq!(decode_intent(&dist(Intent::Stop, 0.7), &dist(Intent::Park, 0.6)).0, Intent::Stop);
        let (i, c) = decode_intent(&dist(Intent::Stop, 0.65), &dist(Intent::Park, 0.65));
        assert_eq!((i, c), (Intent::Park, 0.65));
    }

    #[test]
    fn label_zones_are_disjoint() {
        assert_eq!(INTENT_ZONE.0 + INTENT_ZONE.1, TOKEN_ZONE.0);
        assert_eq!(TOKEN_ZONE.0 + TOKEN_ZONE.1, JOINT_LABELS);
        assert_eq!(INTENT_ZONE.1, Intent::count());
        assert_eq!(TOKEN_ZONE.1, TokenLabel::count());
    }
}
