use super::joint::{train_joint_with_vocab, JointModel};
use super::seq2one::{train_seq2one_with_vocab, IntentModel};
use super::tagger::{train_tagger, TaggerModel, TaggerTask};
use super::train::TrainConfig;
use crate::corpus::{Intent, KeywordLabel, SlotLabel, Utterance};
use crate::embeddings::PretrainedVectors;
use crate::error::{NluError, Result};

/// Keeps, in order, the tokens tagged as intent keywords or with a slot
/// type. Returns the input unchanged when nothing survives.
pub fn hierarchical_reduce<S: AsRef<str>>(tokens: &[S], slots: &[SlotLabel], keywords: &[KeywordLabel]) -> Result<Vec<String>> {
    if tokens.len() != slots.len() || tokens.len() != keywords.len() {
        return Err(NluError::Contract(format!(
            "reduce needs equal lengths, got {} tokens, {} slot tags, {} keyword tags",
            tokens.len(),
            slots.len(),
            keywords.len()
        )));
    }
    let keep: Vec<usize> = (0..tokens.len())
        .filter(|&i| keywords[i] == KeywordLabel::Intent || slots[i] != SlotLabel::None)
        .collect();
    let picked: Vec<usize> = if keep.is_empty() { (0..tokens.len()).collect() } else { keep };
    Ok(picked.into_iter().map(|i| tokens[i].as_ref().to_string()).collect())
}

/// Gold-tag reduction of a training utterance, tags carried along.
fn reduce_utterance(u: &Utterance) -> Utterance {
    let keep: Vec<usize> = (0..u.len())
        .filter(|&i| u.keyword_tags[i] == KeywordLabel::Intent || u.slot_tags[i] != SlotLabel::None)
        .collect();
    if keep.is_empty() {
        return u.clone();
    }
    Utterance {
        id: u.id,
        tokens: keep.iter().map(|&i| u.tokens[i].clone()).collect(),
        slot_tags: keep.iter().map(|&i| u.slot_tags[i]).collect(),
        keyword_tags: keep.iter().map(|&i| u.keyword_tags[i]).collect(),
        intent: u.intent,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stage2 {
    Separate(IntentModel),
    Joint(JointModel),
}

/// Slot and keyword taggers whose reduced output feeds an intent model.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchicalPipeline {
    pub slots: TaggerModel,
    pub keywords: TaggerModel,
    pub stage2: Stage2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HierarchicalPrediction {
    pub intent: Intent,
    pub confidence: f64,
    pub slots: Vec<SlotLabel>,
    pub keywords: Vec<KeywordLabel>,
    pub reduced: Vec<String>,
}

/// Which second stage to train.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage2Kind {
    Separate { use_attention: bool },
    Joint,
}

impl HierarchicalPipeline {
    /// Stage 1 trains on full utterances. Stage 2 trains on gold-tag
    /// reductions, with its vocabulary drawn from the full utterances.
    pub fn train(corpus: &[Utterance], kind: Stage2Kind, cfg: &TrainConfig, pretrained: Option<&PretrainedVectors>) -> Result<Self> {
        let slots = train_tagger(corpus, TaggerTask::Slot, &cfg.for_component("slot"), pretrained)?;
        let keywords = train_tagger(corpus, TaggerTask::Keyword, &cfg.for_component("keyword"), pretrained)?;
        let reduced: Vec<Utterance> = corpus.iter().map(reduce_utterance).collect();
        let stage_cfg = cfg.for_component("stage2");
        let stage2 = match kind {
            Stage2Kind::Separate { use_attention } => {
                Stage2::Separate(train_seq2one_with_vocab(&reduced, corpus, use_attention, &stage_cfg, pretrained)?)
            }
            Stage2Kind::Joint => Stage2::Joint(train_joint_with_vocab(&reduced, corpus, &stage_cfg, pretrained)?),
        };
        Ok(Self { slots, keywords, stage2 })
    }

    pub fn predict<S: AsRef<str>>(&self, tokens: &[S]) -> Result<HierarchicalPrediction> {
        let slots = self.slots.tag_slots(tokens)?;
        let keywords = self.keywords.tag_keywords(tokens)?;
        let reduced = hierarchical_reduce(tokens, &slots, &keywords)?;
        let (intent, confidence) = match &self.stage2 {
            Stage2::Separate(m) => {
                let p = m.classify(&reduced)?;
                (p.intent, p.confidence)
            }
            Stage2::Joint(m) => {
                let p = m.predict(&reduced)?;
                (p.intent, p.confidence)
            }
        };
        Ok(HierarchicalPrediction {
            intent,
            confidence,
            slots,
            keywords,
            reduced,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use KeywordLabel::{Intent as K, NonIntent as N};
    use SlotLabel::{Location, None as O};

    #[test]
    fn keeps_keywords_and_slots() {
        let r = hierarchical_reduce(&["please", "stop", "the", "car"], &[O, O, O, O], &[N, K, N, N]).unwrap();
        assert_eq!(r, ["stop"]);
        let r = hierarchical_reduce(&["take", "me", "to", "downtown"], &[O, O, O, Location], &[K, N, N, N]).unwrap();
        assert_eq!(r, ["take", "downtown"]);
    }

    #[test]
    fn falls_back_to_input() {
        let r = hierarchical_reduce(&["hello", "there"], &[O, O], &[N, N]).unwrap();
        assert_eq!(r, ["hello", "there"]);
    }

    #[test]
    fn length_mismatch_is_contract_error() {
        let err = hierarchical_reduce(&["a", "b"], &[O], &[N, N]).unwrap_err();
        assert!(matches!(err, NluError::Contract(_)));
    }

    #[test]
    fn gold_reduction_keeps_tags_aligned() {
        let u = Utterance::new(
            1,
            vec!["take".into(), "me".into(), "home".into()],
            vec![O, O, Location],
            vec![K, N, N],
            Intent::SetChangeDest,
        )
        .unwrap();
        let r = reduce_utterance(&u);
        assert_eq!(r.tokens, ["take", "home"]);
        assert_eq!(r.slot_tags, [O, Location]);
        assert_eq!(r.keyword_tags, [K, N]);
    }
}
