//! Annotated utterances: schema, TSV corpus files, tokenization, k-fold
//! splitting and a grammar-based synthetic command generator.

mod generator;
mod io;
mod kfold;
pub mod schema;

pub use generator::{generate_corpus, toy_vectors, GeneratorConfig, Template};
pub use io::{parse_corpus, read_corpus_file, write_corpus};
pub use kfold::{kfold_split, Fold};
pub use schema::{display_name, Intent, KeywordLabel, Label, SlotLabel, TokenLabel};

use crate::error::{NluError, Result};

/// One annotated command.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Utterance {
    pub id: u64,
    pub tokens: Vec<String>,
    pub slot_tags: Vec<SlotLabel>,
    pub keyword_tags: Vec<KeywordLabel>,
    pub intent: Intent,
}

impl Utterance {
    pub fn new(
        id: u64,
        tokens: Vec<String>,
        slot_tags: Vec<SlotLabel>,
        keyword_tags: Vec<KeywordLabel>,
        intent: Intent,
    ) -> Result<Self> {
        let u = Self {
            id,
            tokens,
            slot_tags,
            keyword_tags,
            intent,
        };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(NluError::Data(format!("utterance {} has no tokens", self.id)));
        }
        if self.tokens.len() != self.slot_tags.len() || self.tokens.len() != self.keyword_tags.len() {
            return Err(NluError::Data(format!(
                "utterance {}: {} tokens but {} slot tags and {} keyword tags",
                self.id,
                self.tokens.len(),
                self.slot_tags.len(),
                self.keyword_tags.len()
            )));
        }
        for t in &self.tokens {
            if t.is_empty() || t.chars().any(char::is_whitespace) || t.to_lowercase() != *t {
                return Err(NluError::Data(format!("utterance {}: invalid token {t:?}", self.id)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn fused_tags(&self) -> Vec<TokenLabel> {
        self.slot_tags
            .iter()
            .zip(&self.keyword_tags)
            .map(|(&s, &k)| TokenLabel::fuse(s, k))
            .collect()
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Lowercases, splits on whitespace and detaches leading and trailing ASCII
/// punctuation into single-character tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let chunk = chunk.to_lowercase();
        let chars: Vec<char> = chunk.chars().collect();
        let lead = chars.iter().take_while(|c| c.is_ascii_punctuation()).count();
        if lead == chars.len() {
            out.extend(chars.iter().map(|c| c.to_string()));
            continue;
        }
        let trail = chars.iter().rev().take_while(|c| c.is_ascii_punctuation()).count();
        out.extend(chars[..lead].iter().map(|c| c.to_string()));
        out.push(chars[lead..chars.len() - trail].iter().collect());
        out.extend(chars[chars.len() - trail..].iter().map(|c| c.to_string()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_rules() {
        assert_eq!(tokenize("Stop the car."), toks(&["stop", "the", "car", "."]));
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \t ").is_empty());
        assert_eq!(tokenize("pull over, please"), toks(&["pull", "over", ",", "please"]));
        assert_eq!(tokenize("(Now!?)"), toks(&["(", "now", "!", "?", ")"]));
        assert_eq!(tokenize("turn on the a/c ..."), toks(&["turn", "on", "the", "a/c", ".", ".", "."]));
    }

    #[test]
    fn utterance_invariants() {
        let ok = Utterance::new(1, toks(&["stop"]), vec![SlotLabel::None], vec![KeywordLabel::Intent], Intent::Stop);
        assert!(ok.is_ok());
        assert!(Utterance::new(1, toks(&["stop", "now"]), vec![SlotLabel::None], vec![KeywordLabel::Intent], Intent::Stop).is_err());
        assert!(Utterance::new(1, vec![], vec![], vec![], Intent::Stop).is_err());
        assert!(Utterance::new(1, toks(&["Stop"]), vec![SlotLabel::None], vec![KeywordLabel::Intent], Intent::Stop).is_err());
    }
}
