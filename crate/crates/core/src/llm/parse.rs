use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Completion, GatewayError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    DetectionList,
    Clarification,
    SingleLine,
}

impl fmt::Display for OutputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputKind::DetectionList => "detection list",
            OutputKind::Clarification => "clarification question",
            OutputKind::SingleLine => "single line",
        })
    }
}

/// One item of a detection reply, before validation against the question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDetection {
    pub phrase: String,
    #[serde(alias = "category_label")]
    pub category: String,
    #[serde(default)]
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawOption {
    #[serde(default)]
    pub key: Option<String>,
    pub display: String,
    pub resolution: String,
    /// `table.column` the option maps to, for schema-backed options.
    #[serde(default)]
    pub column: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawClarification {
    pub question: String,
    pub options: Vec<RawOption>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Structured {
    Detections(Vec<RawDetection>),
    Clarification(RawClarification),
    Line(String),
}

/// Fenced blocks first (in order), then the whole text.
fn candidate_regions(text: &str) -> Vec<&str> {
    let mut regions = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        // skip the info string (`json`, `sql`, ...)
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
        let body = &after[body_start..];
        match body.find("```") {
            Some(close) => {
                regions.push(&body[..close]);
                rest = &body[close + 3..];
            }
            None => break,
        }
    }
    regions.push(text);
    regions
}

/// First JSON value in `region` that satisfies `accept`, scanning from each
/// `[` or `{` in turn so surrounding prose is ignored.
fn first_json(region: &str, accept: impl Fn(&Value) -> bool) -> Option<Value> {
    for (i, ch) in region.char_indices() {
        if ch != '[' && ch != '{' {
            continue;
        }
        let mut stream = serde_json::Deserializer::from_str(&region[i..]).into_iter::<Value>();
        if let Some(Ok(v)) = stream.next() {
            if accept(&v) {
                return Some(v);
            }
        }
    }
    None
}

fn detections_from(value: &Value) -> Option<Vec<RawDetection>> {
    let list = match value {
        Value::Array(_) => value.clone(),
        Value::Object(map) => map
            .get("ambiguities")
            .or_else(|| map.get("detections"))
            .filter(|v| v.is_array())?
            .clone(),
        _ => return None,
    };
    serde_json::from_value(list).ok()
}

fn clarification_from(value: &Value) -> Option<RawClarification> {
    if !value.is_object() {
        return None;
    }
    serde_json::from_value(value.clone()).ok()
}

fn single_line(text: &str) -> Option<String> {
    let region = candidate_regions(text).into_iter().next().unwrap_or(text);
    let line = region.lines().map(str::trim).find(|l| !l.is_empty())?;
    let line = line
        .strip_prefix('"')
        .and_then(|l| l.strip_suffix('"'))
        .unwrap_or(line)
        .trim();
    (!line.is_empty()).then(|| line.to_string())
}

/// Extracts the first block of the expected shape from a completion.
pub fn parse_structured(completion: &Completion, expected: OutputKind) -> Result<Structured, GatewayError> {
    let text = completion.text.as_str();
    let failure = |message: &str| GatewayError::ParseFailure {
        expected,
        message: message.to_string(),
    };
    match expected {
        OutputKind::DetectionList => candidate_regions(text)
            .into_iter()
            .find_map(|r| first_json(r, |v| detections_from(v).is_some()))
            .and_then(|v| detections_from(&v))
            .map(Structured::Detections)
            .ok_or_else(|| failure("no JSON list of {phrase, category, rationale} found")),
        OutputKind::Clarification => candidate_regions(text)
            .into_iter()
            .find_map(|r| first_json(r, |v| clarification_from(v).is_some()))
            .and_then(|v| clarification_from(&v))
            .map(Structured::Clarification)
            .ok_or_else(|| failure("no JSON object with question and options found")),
        OutputKind::SingleLine => single_line(text)
            .map(Structured::Line)
            .ok_or_else(|| failure("empty reply")),
    }
}
