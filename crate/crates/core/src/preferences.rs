//! Taxonomy-indexed store of user clarifications.
//!
//! Each of the seven categories is a leaf holding versioned entries. Entries
//! are keyed by a normalized `target_key`; recording a second entry for a
//! key that already has a live entry is a conflict and goes through
//! [`merge`], after which the older entry is kept as superseded history.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::llm::{build_merge_prompt, Gateway, OutputKind, Structured};
use crate::taxonomy::{parse_category, AmbiguityCategory, Dimension};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceEntry {
    pub target_key: String,
    pub resolution: String,
    pub version: u32,
    #[serde(default)]
    pub superseded: bool,
    pub source_question_id: String,
    pub recorded_at: DateTime<Utc>,
}

impl PreferenceEntry {
    /// A fresh, not yet recorded entry. The version is assigned by
    /// [`PreferenceTree::record`].
    pub fn new(target_key: &str, resolution: &str, source_question_id: &str) -> Self {
        PreferenceEntry {
            target_key: normalize_key(target_key),
            resolution: resolution.trim().to_string(),
            version: 0,
            superseded: false,
            source_question_id: source_question_id.to_string(),
            recorded_at: Utc::now(),
        }
    }
}

pub fn normalize_key(key: &str) -> String {
    key.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Conflict identity for a clarified phrase: `<kind>:<phrase>`. Two answers
/// about the same phrase in the same category conflict.
pub fn target_key(category: AmbiguityCategory, phrase: &str) -> String {
    let kind = match category {
        AmbiguityCategory::UnclearSchemaReference => "column",
        AmbiguityCategory::UnclearValueReference => "value",
        AmbiguityCategory::MissingSqlKeywords => "keyword",
        AmbiguityCategory::UnclearKnowledgeSource => "knowledge",
        AmbiguityCategory::InsufficientReasoningContext => "context",
        AmbiguityCategory::ConflictingKnowledge => "conflict",
        AmbiguityCategory::AmbiguousTemporalSpatialScope => "temporal",
    };
    normalize_key(&format!("{kind}:{phrase}"))
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid preference snapshot at `{path}`: {message}")]
pub struct SnapshotError {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceTree {
    leaves: BTreeMap<AmbiguityCategory, Vec<PreferenceEntry>>,
}

impl Default for PreferenceTree {
    fn default() -> Self {
        PreferenceTree {
            leaves: AmbiguityCategory::ALL.into_iter().map(|c| (c, Vec::new())).collect(),
        }
    }
}

/// Combines an existing preference with a newer one for the same target.
///
/// The model is asked for a merged resolution when a gateway is given; if it
/// is absent, fails, or returns nothing usable, the incoming entry wins
/// wholesale. The result always carries the incoming entry's provenance.
pub fn merge(
    existing: &PreferenceEntry,
    incoming: &PreferenceEntry,
    gateway: Option<&Gateway>,
) -> PreferenceEntry {
    let mut merged = incoming.clone();
    if existing.resolution == incoming.resolution {
        return merged;
    }
    let Some(gateway) = gateway else {
        return merged;
    };
    let request = build_merge_prompt(existing, incoming);
    match gateway.complete_structured(&request, OutputKind::SingleLine) {
        Ok(Structured::Line(line)) => merged.resolution = line,
        Ok(_) => {}
        Err(err) => {
            tracing::info!(target_key = %incoming.target_key, error = %err, "merge fell back to latest entry");
        }
    }
    merged
}

impl PreferenceTree {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `entry` under `category` and returns the live entry for its key.
    pub fn record(
        &mut self,
        category: AmbiguityCategory,
        mut entry: PreferenceEntry,
        gateway: Option<&Gateway>,
    ) -> &PreferenceEntry {
        entry.target_key = normalize_key(&entry.target_key);
        entry.superseded = false;
        let leaf = self.leaves.entry(category).or_default();
        let live = leaf
            .iter()
            .position(|e| !e.superseded && e.target_key == entry.target_key);
        let stored = match live {
            None => {
                entry.version = 1;
                entry
            }
            Some(i) => {
                let mut merged = merge(&leaf[i], &entry, gateway);
                merged.version = leaf[i].version + 1;
                merged.superseded = false;
                leaf[i].superseded = true;
                merged
            }
        };
        leaf.push(stored);
        leaf.last().expect("just pushed")
    }

    /// Live entries of one category, in insertion order.
    pub fn lookup(&self, category: AmbiguityCategory) -> Vec<&PreferenceEntry> {
        self.leaves
            .get(&category)
            .map(|leaf| leaf.iter().filter(|e| !e.superseded).collect())
            .unwrap_or_default()
    }

    /// All entries of one category, superseded history included.
    pub fn history(&self, category: AmbiguityCategory) -> &[PreferenceEntry] {
        self.leaves.get(&category).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn live_entries(&self) -> impl Iterator<Item = (AmbiguityCategory, &PreferenceEntry)> {
        self.leaves
            .iter()
            .flat_map(|(c, leaf)| leaf.iter().filter(|e| !e.superseded).map(move |e| (*c, e)))
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.values().all(Vec::is_empty)
    }

    /// Plain-text listing of live preferences grouped by dimension.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for dim in Dimension::ALL {
            for cat in dim.categories() {
                for e in self.lookup(cat) {
                    out.push_str(&format!("- [{}] {}: {}\n", cat.label(), e.target_key, e.resolution));
                }
            }
        }
        out
    }

    pub fn snapshot(&self) -> Value {
        let map: serde_json::Map<String, Value> = AmbiguityCategory::ALL
            .into_iter()
            .map(|c| {
                let leaf = self.leaves.get(&c).cloned().unwrap_or_default();
                (c.label().to_string(), serde_json::to_value(leaf).expect("entries serialize"))
            })
            .collect();
        Value::Object(map)
    }

    pub fn load(doc: &Value) -> Result<Self, SnapshotError> {
        let err = |path: String, message: String| SnapshotError { path, message };
        let obj = doc
            .as_object()
            .ok_or_else(|| err(String::new(), "expected an object keyed by category".into()))?;
        let mut leaves = BTreeMap::new();
        for (key, value) in obj {
            let category =
                parse_category(key).map_err(|e| err(key.clone(), e.to_string()))?;
            if category.label() != key {
                return Err(err(key.clone(), format!("expected label `{}`", category.label())));
            }
            let entries: Vec<PreferenceEntry> = serde_json::from_value(value.clone())
                .map_err(|e| err(key.clone(), e.to_string()))?;
            leaves.insert(category, entries);
        }
        for c in AmbiguityCategory::ALL {
            if !leaves.contains_key(&c) {
                return Err(err(c.label().to_string(), "missing category".into()));
            }
        }
        let tree = PreferenceTree { leaves };
        tree.check_invariants()
            .map_err(|(path, message)| err(path, message))?;
        Ok(tree)
    }

    /// Verifies one live entry per key and gapless versions 1..n, with the
    /// highest version being the live one.
    pub fn check_invariants(&self) -> Result<(), (String, String)> {
        for (category, leaf) in &self.leaves {
            let mut by_key: BTreeMap<&str, Vec<(usize, &PreferenceEntry)>> = BTreeMap::new();
            for (i, e) in leaf.iter().enumerate() {
                let path = format!("{}[{i}]", category.label());
                if e.target_key.is_empty() || e.target_key != normalize_key(&e.target_key) {
                    return Err((path, "target_key must be non-empty and normalized".into()));
                }
                by_key.entry(&e.target_key).or_default().push((i, e));
            }
            for (key, entries) in by_key {
                let path = format!("{}/{key}", category.label());
                let live = entries.iter().filter(|(_, e)| !e.superseded).count();
                if live != 1 {
                    return Err((path, format!("expected exactly one live entry, found {live}")));
                }
                for (n, (_, e)) in entries.iter().enumerate() {
                    if e.version as usize != n + 1 {
                        return Err((path, format!("version {} out of sequence", e.version)));
                    }
                }
                if entries.last().map(|(_, e)| e.superseded) != Some(false) {
                    return Err((path, "newest version must be the live entry".into()));
                }
            }
        }
        Ok(())
    }
}

impl Serialize for PreferenceTree {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.snapshot().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PreferenceTree {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(deserializer)?;
        PreferenceTree::load(&v).map_err(serde::de::Error::custom)
    }
}
