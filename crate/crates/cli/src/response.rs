//! JSON shapes of `predict` and `serve`.

use serde::{Deserialize, Serialize};

use cabin_nlu::corpus::{tokenize, KeywordLabel, Label, SlotLabel};
use cabin_nlu::models::System;
use cabin_nlu::{NluError, Result};

#[derive(Deserialize)]
struct Request {
    id: u64,
    text: String,
}

#[derive(Serialize)]
pub struct SlotSpan {
    pub token: String,
    pub label: &'static str,
}

#[derive(Serialize)]
pub struct Response {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    pub intent: Option<&'static str>,
    pub confidence: Option<f64>,
    /// Tokens with a slot type other than None.
    pub slots: Vec<SlotSpan>,
    /// Tokens tagged as intent keywords.
    pub keywords: Vec<String>,
}

#[derive(Serialize)]
struct ErrorResponse {
    id: Option<u64>,
    error: String,
}

pub fn respond(system: &System, id: Option<u64>, text: &str) -> Result<Response> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(NluError::Contract("text has no tokens".into()));
    }
    let p = system.predict(&tokens)?;
    let slots = p
        .slots
        .iter()
        .flat_map(|s| tokens.iter().zip(s))
        .filter(|(_, &l)| l != SlotLabel::None)
        .map(|(t, l)| SlotSpan {
            token: t.clone(),
            label: l.name(),
        })
        .collect();
    let keywords = p
        .keywords
        .iter()
        .flat_map(|k| tokens.iter().zip(k))
        .filter(|(_, &l)| l == KeywordLabel::Intent)
        .map(|(t, _)| t.clone())
        .collect();
    Ok(Response {
        id,
        intent: p.intent.map(|i| i.name()),
        confidence: p.confidence,
        slots,
        keywords,
    })
}

/// One response line for one request line. Never fails: problems become
/// error objects.
pub fn handle_line(system: &System, line: &str) -> String {
    let result = match serde_json::from_str::<Request>(line) {
        Ok(req) => respond(system, Some(req.id), &req.text).map_err(|e| (Some(req.id), e.to_string())),
        Err(e) => Err((None, format!("malformed request: {e}"))),
    };
    let json = match result {
        Ok(resp) => serde_json::to_string(&resp),
        Err((id, error)) => serde_json::to_string(&ErrorResponse { id, error }),
    };
    json.unwrap_or_else(|e| format!("{{\"id\":null,\"error\":\"{e}\"}}"))
}
