use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tagger::{train_tagger, TaggerModel, TaggerTask};
use super::train::TrainConfig;
use crate::corpus::{Intent, KeywordLabel, Label, SlotLabel, Utterance};
use crate::embeddings::PretrainedVectors;
use crate::error::{NluError, Result};

/// Relative gap below which two scores count as tied.
const TIE_TOLERANCE: f64 = 1e-9;

/// Per-intent term frequencies for the rule-based mapper.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FreqTable {
    /// Counts of Intent-tagged tokens, per intent.
    pub keywords: BTreeMap<Intent, BTreeMap<String, f64>>,
    /// Counts of non-None slot types, per intent.
    pub slots: BTreeMap<Intent, BTreeMap<SlotLabel, f64>>,
    /// Utterance counts per intent.
    pub priors: BTreeMap<Intent, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridMode {
    KeywordsOnly,
    KeywordsAndSlots,
}

impl FreqTable {
    pub fn keyword_count(&self, intent: Intent, token: &str) -> f64 {
        self.keywords.get(&intent).and_then(|m| m.get(token)).copied().unwrap_or(0.0)
    }

    pub fn slot_count(&self, intent: Intent, slot: SlotLabel) -> f64 {
        self.slots.get(&intent).and_then(|m| m.get(&slot)).copied().unwrap_or(0.0)
    }

    pub fn prior(&self, intent: Intent) -> f64 {
        self.priors.get(&intent).copied().unwrap_or(0.0)
    }

    /// Sum of the priors, i.e. the number of utterances the table was built from.
    pub fn total(&self) -> f64 {
        self.priors.values().sum()
    }

    /// Multiplies every count by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut t = self.clone();
        t.keywords.values_mut().flat_map(|m| m.values_mut()).for_each(|c| *c *= factor);
        t.slots.values_mut().flat_map(|m| m.values_mut()).for_each(|c| *c *= factor);
        t.priors.values_mut().for_each(|c| *c *= factor);
        t
    }

    /// Unnormalized per-intent scores, in `Intent::ALL` order. Every piece of
    /// evidence contributes its share of counts to each intent.
    pub fn scores<S: AsRef<str>>(&self, keywords: &[S], slots: &[SlotLabel], mode: HybridMode) -> Vec<f64> {
        let mut scores = vec![0.0; Intent::count()];
        let mut spread = |counts: Vec<f64>| {
            let total: f64 = counts.iter().sum();
            if total > 0.0 {
                for (s, c) in scores.iter_mut().zip(counts) {
                    *s += c / total;
                }
            }
        };
        for k in keywords {
            let k = k.as_ref().to_lowercase();
            spread(Intent::ALL.iter().map(|&i| self.keyword_count(i, &k)).collect());
        }
        if mode == HybridMode::KeywordsAndSlots {
            for &s in slots.iter().filter(|&&s| s != SlotLabel::None) {
                spread(Intent::ALL.iter().map(|&i| self.slot_count(i, s)).collect());
            }
        }
        scores
    }
}

/// Counts keyword tokens, slot types and priors per intent.
pub fn build_freq_table(corpus: &[Utterance]) -> Result<FreqTable> {
    if corpus.is_empty() {
        return Err(NluError::Data("cannot build a frequency table from an empty corpus".into()));
    }
    let mut t = FreqTable::default();
    for u in corpus {
        *t.priors.entry(u.intent).or_default() += 1.0;
        for ((tok, &slot), &kw) in u.tokens.iter().zip(&u.slot_tags).zip(&u.keyword_tags) {
            if kw == KeywordLabel::Intent {
                *t.keywords.entry(u.intent).or_default().entry(tok.clone()).or_default() += 1.0;
            }
            if slot != SlotLabel::None {
                *t.slots.entry(u.intent).or_default().entry(slot).or_default() += 1.0;
            }
        }
    }
    Ok(t)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs())
}

/// Orders intents best first: score, then prior, then label name.
fn rank(table: &FreqTable, scores: &[f64], a: Intent, b: Intent) -> Ordering {
    let (sa, sb) = (scores[a.index()], scores[b.index()]);
    if !close(sa, sb) {
        return sb.total_cmp(&sa);
    }
    let (pa, pb) = (table.prior(a), table.prior(b));
    if !close(pa, pb) {
        return pb.total_cmp(&pa);
    }
    a.name().cmp(b.name())
}

/// Intents sorted from best to worst under the mapping rule.
pub fn hybrid_ranking<S: AsRef<str>>(table: &FreqTable, keywords: &[S], slots: &[SlotLabel], mode: HybridMode) -> Vec<Intent> {
    let scores = table.scores(keywords, slots, mode);
    let mut order = Intent::ALL.to_vec();
    order.sort_by(|&a, &b| rank(table, &scores, a, b));
    order
}

/// Maps extracted evidence to an intent. With no evidence the table knows
/// about, the answer is [`Intent::FALLBACK`].
pub fn hybrid_map<S: AsRef<str>>(table: &FreqTable, keywords: &[S], slots: &[SlotLabel], mode: HybridMode) -> Intent {
    hybrid_decide(table, keywords, slots, mode).0
}

/// As [`hybrid_map`], also returning the winner's share of the total score
/// (0 on fallback).
pub fn hybrid_decide<S: AsRef<str>>(table: &FreqTable, keywords: &[S], slots: &[SlotLabel], mode: HybridMode) -> (Intent, f64) {
    let scores = table.scores(keywords, slots, mode);
    let total: f64 = scores.iter().sum();
    if total <= 0.0 {
        return (Intent::FALLBACK, 0.0);
    }
    let best = Intent::ALL
        .iter()
        .copied()
        .min_by(|&a, &b| rank(table, &scores, a, b))
        .expect("intent set is non-empty");
    (best, scores[best.index()] / total)
}

/// Keyword tagger (and slot tagger in the second mode) feeding the mapper.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridPipeline {
    pub mode: HybridMode,
    pub keywords: TaggerModel,
    pub slots: Option<TaggerModel>,
    pub table: FreqTable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridPrediction {
    pub intent: Intent,
    pub confidence: f64,
    pub keywords: Vec<KeywordLabel>,
    pub slots: Option<Vec<SlotLabel>>,
}

impl HybridPipeline {
    pub fn train(corpus: &[Utterance], mode: HybridMode, cfg: &TrainConfig, pretrained: Option<&PretrainedVectors>) -> Result<Self> {
        let table = build_freq_table(corpus)?;
        let keywords = train_tagger(corpus, TaggerTask::Keyword, &cfg.for_component("keyword"), pretrained)?;
        let slots = match mode {
            HybridMode::KeywordsOnly => None,
            HybridMode::KeywordsAndSlots => Some(train_tagger(corpus, TaggerTask::Slot, &cfg.for_component("slot"), pretrained)?),
        };
        Ok(Self {
            mode,
            keywords,
            slots,
            table,
        })
    }

    pub fn predict<S: AsRef<str>>(&self, tokens: &[S]) -> Result<HybridPrediction> {
        let keywords = self.keywords.tag_keywords(tokens)?;
        let slots = self.slots.as_ref().map(|m| m.tag_slots(tokens)).transpose()?;
        let extracted: Vec<&str> = tokens
            .iter()
            .zip(&keywords)
            .filter(|(_, &k)| k == KeywordLabel::Intent)
            .map(|(t, _)| t.as_ref())
            .collect();
        let (intent, confidence) = hybrid_decide(&self.table, &extracted, slots.as_deref().unwrap_or(&[]), self.mode);
        Ok(HybridPrediction {
            intent,
            confidence,
            keywords,
            slots,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(entries: &[(Intent, &str, f64)], priors: &[(Intent, f64)]) -> FreqTable {
        let mut t = FreqTable::default();
        for &(i, k, c) in entries {
            t.keywords.entry(i).or_default().insert(k.into(), c);
        }
        for &(i, p) in priors {
            t.priors.insert(i, p);
        }
        t
    }

    #[test]
    fn single_keyword_maps_to_its_intent() {
        let t = table(&[(Intent::Stop, "stop", 3.0), (Intent::Park, "park", 2.0)], &[(Intent::Stop, 3.0), (Intent::Park, 2.0)]);
        assert_eq!(hybrid_map(&t, &["stop"], &[], HybridMode::KeywordsOnly), Intent::Stop);
        assert_eq!(hybrid_map(&t, &["STOP"], &[], HybridMode::KeywordsOnly), Intent::Stop);
    }

    #[test]
    fn empty_or_unknown_evidence_falls_back() {
        let t = table(&[(Intent::Stop, "stop", 3.0)], &[(Intent::Stop, 3.0)]);
        let none: [&str; 0] = [];
        assert_eq!(hybrid_decide(&t, &none, &[], HybridMode::KeywordsAndSlots), (Intent::Other, 0.0));
        assert_eq!(hybrid_map(&t, &["banana"], &[], HybridMode::KeywordsOnly), Intent::Other);
    }

    #[test]
    fn ties_prefer_prior_then_name() {
        let t = table(&[(Intent::Stop, "halt", 1.0), (Intent::Park, "halt", 1.0)], &[(Intent::Stop, 2.0), (Intent::Park, 5.0)]);
        assert_eq!(hybrid_map(&t, &["halt"], &[], HybridMode::KeywordsOnly), Intent::Park);
        let t = table(&[(Intent::Stop, "halt", 1.0), (Intent::Park, "halt", 1.0)], &[(Intent::Stop, 5.0), (Intent::Park, 5.0)]);
        assert_eq!(hybrid_map(&t, &["halt"], &[], HybridMode::KeywordsOnly), Intent::Park);
    }

    #[test]
    fn slots_only_count_in_second_mode() {
        let mut t = table(&[(Intent::Stop, "go", 1.0), (Intent::SetChangeDest, "go", 1.0)], &[(Intent::Stop, 1.0), (Intent::SetChangeDest, 1.0)]);
        t.slots.entry(Intent::SetChangeDest).or_default().insert(SlotLabel::Location, 4.0);
        let slots = [SlotLabel::None, SlotLabel::Location];
        assert_eq!(hybrid_map(&t, &["go"], &slots, HybridMode::KeywordsOnly), Intent::SetChangeDest);
        assert_eq!(hybrid_map(&t, &["go"], &slots, HybridMode::KeywordsAndSlots), Intent::SetChangeDest);
        let scores = t.scores(&["go"], &slots, HybridMode::KeywordsAndSlots);
        assert_eq!(scores[Intent::SetChangeDest.index()], 1.5);
        assert_eq!(scores[Intent::Stop.index()], 0.5);
    }

    #[test]
    fn table_serializes_with_label_names() {
        let t = table(&[(Intent::Stop, "stop", 1.0)], &[(Intent::Stop, 1.0)]);
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains("\"Stop\":{\"stop\":1.0}"), "{json}");
        assert_eq!(serde_json::from_str::<FreqTable>(&json).unwrap(), t);
    }
}
