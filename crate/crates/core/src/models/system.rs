use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::hierarchical::{HierarchicalPipeline, Stage2, Stage2Kind};
use super::hybrid::{HybridMode, HybridPipeline};
use super::joint::{train_joint, JointModel};
use super::seq2one::{train_seq2one, IntentModel};
use super::tagger::{train_tagger, TaggerModel, TaggerTask};
use super::train::TrainConfig;
use crate::corpus::{Intent, KeywordLabel, Label, SlotLabel, Utterance};
use crate::embeddings::PretrainedVectors;
use crate::error::{NluError, Result};

/// The ten trainable configurations: two taggers and eight intent recognizers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    Hybrid1,
    Hybrid2,
    Separate1,
    Separate2,
    Joint,
    HierSeparate1,
    HierSeparate2,
    HierJoint,
    SlotTagger,
    KeywordTagger,
}

impl ModelSpec {
    pub const ALL: [ModelSpec; 10] = [
        ModelSpec::Hybrid1,
        ModelSpec::Hybrid2,
        ModelSpec::Separate1,
        ModelSpec::Separate2,
        ModelSpec::Joint,
        ModelSpec::HierSeparate1,
        ModelSpec::HierSeparate2,
        ModelSpec::HierJoint,
        ModelSpec::SlotTagger,
        ModelSpec::KeywordTagger,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelSpec::Hybrid1 => "hybrid1",
            ModelSpec::Hybrid2 => "hybrid2",
            ModelSpec::Separate1 => "separate1",
            ModelSpec::Separate2 => "separate2",
            ModelSpec::Joint => "joint",
            ModelSpec::HierSeparate1 => "hier_separate1",
            ModelSpec::HierSeparate2 => "hier_separate2",
            ModelSpec::HierJoint => "hier_joint",
            ModelSpec::SlotTagger => "slot_tagger",
            ModelSpec::KeywordTagger => "keyword_tagger",
        }
    }

    /// Row label used in the utterance-level results table.
    pub fn title(self) -> &'static str {
        match self {
            ModelSpec::Hybrid1 => "Hybrid-1: RNN + Rule-based (intent keywords)",
            ModelSpec::Hybrid2 => "Hybrid-2: RNN + Rule-based (intent keywords & slots)",
            ModelSpec::Separate1 => "Separate-1: Seq2one Bi-LSTM",
            ModelSpec::Separate2 => "Separate-2: Seq2one Bi-LSTM + Attention",
            ModelSpec::Joint => "Joint: Seq2seq Bi-LSTM (intent keywords & slots & utterance-level intent types)",
            ModelSpec::HierSeparate1 => "Hierarchical & Separate-1",
            ModelSpec::HierSeparate2 => "Hierarchical & Separate-2 (Separate-1 + Attention)",
            ModelSpec::HierJoint => "Hierarchical & Joint",
            ModelSpec::SlotTagger => "Slot tagger",
            ModelSpec::KeywordTagger => "Intent keyword tagger",
        }
    }

    pub fn tagger_task(self) -> Option<TaggerTask> {
        match self {
            ModelSpec::SlotTagger => Some(TaggerTask::Slot),
            ModelSpec::KeywordTagger => Some(TaggerTask::Keyword),
            _ => None,
        }
    }

    pub fn is_hybrid(self) -> bool {
        matches!(self, ModelSpec::Hybrid1 | ModelSpec::Hybrid2)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelSpec {
    type Err = NluError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| NluError::Config(format!("unknown model spec '{s}'")))
    }
}

/// Any trained configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum System {
    Tagger(TaggerModel),
    Hybrid(HybridPipeline),
    Separate(IntentModel),
    Joint(JointModel),
    Hierarchical(HierarchicalPipeline),
}

/// Uniform prediction shape. Fields a configuration does not produce are
/// `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub intent: Option<Intent>,
    pub confidence: Option<f64>,
    pub slots: Option<Vec<SlotLabel>>,
    pub keywords: Option<Vec<KeywordLabel>>,
}

impl System {
    pub fn train(spec: ModelSpec, corpus: &[Utterance], cfg: &TrainConfig, pretrained: Option<&PretrainedVectors>) -> Result<Self> {
        Ok(match spec {
            ModelSpec::SlotTagger => System::Tagger(train_tagger(corpus, TaggerTask::Slot, cfg, pretrained)?),
            ModelSpec::KeywordTagger => System::Tagger(train_tagger(corpus, TaggerTask::Keyword, cfg, pretrained)?),
            ModelSpec::Hybrid1 => System::Hybrid(HybridPipeline::train(corpus, HybridMode::KeywordsOnly, cfg, pretrained)?),
            ModelSpec::Hybrid2 => System::Hybrid(HybridPipeline::train(corpus, HybridMode::KeywordsAndSlots, cfg, pretrained)?),
            ModelSpec::Separate1 => System::Separate(train_seq2one(corpus, false, cfg, pretrained)?),
            ModelSpec::Separate2 => System::Separate(train_seq2one(corpus, true, cfg, pretrained)?),
            ModelSpec::Joint => System::Joint(train_joint(corpus, cfg, pretrained)?),
            ModelSpec::HierSeparate1 => System::Hierarchical(HierarchicalPipeline::train(
                corpus,
                Stage2Kind::Separate { use_attention: false },
                cfg,
                pretrained,
            )?),
            ModelSpec::HierSeparate2 => System::Hierarchical(HierarchicalPipeline::train(
                corpus,
                Stage2Kind::Separate { use_attention: true },
                cfg,
                pretrained,
            )?),
            ModelSpec::HierJoint => System::Hierarchical(HierarchicalPipeline::train(corpus, Stage2Kind::Joint, cfg, pretrained)?),
        })
    }

    /// The configuration this system was trained as.
    pub fn spec(&self) -> ModelSpec {
        match self {
            System::Tagger(m) => match m.task {
                TaggerTask::Slot => ModelSpec::SlotTagger,
                TaggerTask::Keyword => ModelSpec::KeywordTagger,
            },
            System::Hybrid(p) => match p.mode {
                HybridMode::KeywordsOnly => ModelSpec::Hybrid1,
                HybridMode::KeywordsAndSlots => ModelSpec::Hybrid2,
            },
            System::Separate(m) if m.use_attention() => ModelSpec::Separate2,
            System::Separate(_) => ModelSpec::Separate1,
            System::Joint(_) => ModelSpec::Joint,
            System::Hierarchical(p) => match &p.stage2 {
                Stage2::Separate(m) if m.use_attention() => ModelSpec::HierSeparate2,
                Stage2::Separate(_) => ModelSpec::HierSeparate1,
                Stage2::Joint(_) => ModelSpec::HierJoint,
            },
        }
    }

    pub fn predict<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Prediction> {
        Ok(match self {
            System::Tagger(m) => {
                let labels = m.tag(tokens)?.labels;
                match m.task {
                    TaggerTask::Slot => Prediction {
                        intent: None,
                        confidence: None,
                        slots: Some(labels.into_iter().map(|i| SlotLabel::ALL[i]).collect()),
                        keywords: None,
                    },
                    TaggerTask::Keyword => Prediction {
                        intent: None,
                        confidence: None,
                        slots: None,
                        keywords: Some(labels.into_iter().map(|i| KeywordLabel::ALL[i]).collect()),
                    },
                }
            }
            System::Hybrid(p) => {
                let r = p.predict(tokens)?;
                Prediction {
                    intent: Some(r.intent),
                    confidence: Some(r.confidence),
                    slots: r.slots,
                    keywords: Some(r.keywords),
                }
            }
            System::Separate(m) => {
                let r = m.classify(tokens)?;
                Prediction {
                    intent: Some(r.intent),
                    confidence: Some(r.confidence),
                    slots: None,
                    keywords: None,
                }
            }
            System::Joint(m) => {
                let r = m.predict(tokens)?;
                Prediction {
                    intent: Some(r.intent),
                    confidence: Some(r.confidence),
                    slots: Some(r.tokens.iter().map(|l| l.slot()).collect()),
                    keywords: Some(r.tokens.iter().map(|l| l.keyword()).collect()),
                }
            }
            System::Hierarchical(p) => {
                let r = p.predict(tokens)?;
                Prediction {
                    intent: Some(r.intent),
                    confidence: Some(r.confidence),
                    slots: Some(r.slots),
                    keywords: Some(r.keywords),
                }
            }
        })
    }
}
