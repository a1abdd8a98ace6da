//! Corpus TSV format:
//!
//! ```text
//! # id=<uint>\tintent=<Intent>
//! token\tslot_label\tkeyword_label
//! ...
//! <blank line>
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use super::schema::{Intent, KeywordLabel, Label, SlotLabel};
use super::Utterance;
use crate::error::{NluError, Result};

fn data_err(line: usize, msg: impl Into<String>) -> NluError {
    NluError::DataAt { line, msg: msg.into() }
}

struct Pending {
    header_line: usize,
    id: u64,
    intent: Intent,
    tokens: Vec<String>,
    slots: Vec<SlotLabel>,
    keywords: Vec<KeywordLabel>,
}

impl Pending {
    fn finish(self) -> Result<Utterance> {
        if self.tokens.is_empty() {
            return Err(data_err(self.header_line, format!("utterance {} has no token lines", self.id)));
        }
        let line = self.header_line;
        Utterance::new(self.id, self.tokens, self.slots, self.keywords, self.intent)
            .map_err(|e| data_err(line, e.to_string()))
    }
}

fn parse_header(rest: &str, line: usize) -> Result<(u64, Intent)> {
    let mut fields = rest.split('\t');
    let (Some(id_field), Some(intent_field), None) = (fields.next(), fields.next(), fields.next()) else {
        return Err(data_err(line, "header must be `# id=<uint>\\tintent=<label>`"));
    };
    let id = id_field
        .strip_prefix("id=")
        .and_then(|v| v.parse::<u64>().ok())
        .ok_or_else(|| data_err(line, format!("bad id field {id_field:?}")))?;
    let intent_name = intent_field
        .strip_prefix("intent=")
        .ok_or_else(|| data_err(line, format!("bad intent field {intent_field:?}")))?;
    let intent = Intent::parse(intent_name).ok_or_else(|| data_err(line, format!("unknown intent label {intent_name:?}")))?;
    Ok((id, intent))
}

/// Parses a corpus document. Line numbers in errors are 1-based.
pub fn parse_corpus(text: &str) -> Result<Vec<Utterance>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut pending: Option<Pending> = None;

    for (i, raw) in text.split('\n').enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            if let Some(p) = pending.take() {
                out.push(p.finish()?);
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("# ") {
            if let Some(p) = pending.take() {
                out.push(p.finish()?);
            }
            let (id, intent) = parse_header(rest, line_no)?;
            if !seen.insert(id) {
                return Err(data_err(line_no, format!("duplicate utterance id {id}")));
            }
            pending = Some(Pending {
                header_line: line_no,
                id,
                intent,
                tokens: Vec::new(),
                slots: Vec::new(),
                keywords: Vec::new(),
            });
            continue;
        }
        let p = pending
            .as_mut()
            .ok_or_else(|| data_err(line_no, "token line before any `# id=... intent=...` header"))?;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(data_err(line_no, format!("expected 3 tab-separated columns, found {}", cols.len())));
        }
        let slot = SlotLabel::parse(cols[1]).ok_or_else(|| data_err(line_no, format!("unknown slot label {:?}", cols[1])))?;
        let keyword =
            KeywordLabel::parse(cols[2]).ok_or_else(|| data_err(line_no, format!("unknown keyword label {:?}", cols[2])))?;
        p.tokens.push(cols[0].to_string());
        p.slots.push(slot);
        p.keywords.push(keyword);
    }
    if let Some(p) = pending.take() {
        out.push(p.finish()?);
    }
    Ok(out)
}

pub fn read_corpus_file(path: &Path) -> Result<Vec<Utterance>> {
    parse_corpus(&std::fs::read_to_string(path)?)
}

/// Inverse of [`parse_corpus`].
pub fn write_corpus(utterances: &[Utterance]) -> String {
    let mut s = String::new();
    for u in utterances {
        let _ = writeln!(s, "# id={}\tintent={}", u.id, u.intent);
        for ((t, sl), kw) in u.tokens.iter().zip(&u.slot_tags).zip(&u.keyword_tags) {
            let _ = writeln!(s, "{t}\t{sl}\t{kw}");
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = "# id=1\tintent=Stop\nstop\tNone\tIntent\nthe\tNone\tNonIntent\ncar\tObject\tNonIntent\n\n# id=2\tintent=SetChangeDest\ntake\tNone\tIntent\nme\tPerson\tNonIntent\nto\tNone\tNonIntent\ndowntown\tLocation\tNonIntent\n\n";

    #[test]
    fn parses_hand_written_file() {
        let c = parse_corpus(TWO).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].id, 1);
        assert_eq!(c[0].intent, Intent::Stop);
        assert_eq!(c[0].tokens, vec!["stop", "the", "car"]);
        assert_eq!(c[0].slot_tags, vec![SlotLabel::None, SlotLabel::None, SlotLabel::Object]);
        assert_eq!(c[1].keyword_tags[0], KeywordLabel::Intent);
        assert_eq!(c[1].slot_tags[3], SlotLabel::Location);
        assert_eq!(write_corpus(&c), TWO);
    }

    #[test]
    fn empty_input_and_output() {
        assert!(parse_corpus("").unwrap().is_empty());
        assert_eq!(write_corpus(&[]), "");
    }

    fn err_line(text: &str) -> usize {
        match parse_corpus(text).unwrap_err() {
            NluError::DataAt { line, .. } => line,
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn errors_cite_line_numbers() {
        assert_eq!(err_line("# id=1\tintent=Stop\nstop\tNone\n\n"), 2);
        assert_eq!(err_line("# id=1\tintent=Stop\nstop\tNone\tIntent\n\n# id=1\tintent=Park\npark\tNone\tIntent\n"), 4);
        assert_eq!(err_line("# id=1\tintent=Halt\nstop\tNone\tIntent\n"), 1);
        assert_eq!(err_line("# id=1\tintent=Stop\nstop\tPlace\tIntent\n"), 2);
        assert_eq!(err_line("stop\tNone\tIntent\n"), 1);
        assert_eq!(err_line("# id=1\tintent=Stop\n\n"), 1);
        assert_eq!(err_line("# id=x\tintent=Stop\nstop\tNone\tIntent\n"), 1);
    }

    #[test]
    fn writer_uses_single_blank_separator() {
        let out = write_corpus(&parse_corpus(TWO).unwrap());
        assert!(!out.contains("\r"));
        assert!(!out.contains("\n\n\n"));
        assert!(out.ends_with("\n\n"));
    }
}
