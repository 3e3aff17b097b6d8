//! Batch evaluation: annotated datasets, detection scoring against gold
//! spans, an oracle user that answers clarification questions from the
//! annotations, and end-to-end exact-match accuracy with and without the
//! clarification loop.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use pathfinding::prelude::{kuhn_munkres, Matrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{span_matches, ClarificationQuestion, DetectedAmbiguity, Engine, Session, SessionState, Span, UserAnswer};
use crate::hook::SqlGenerator;
use crate::metrics::Counts;
use crate::schema::SchemaCatalog;
use crate::sql::{canonicalize, compare};
use crate::taxonomy::{AmbiguityCategory, Dimension};
use crate::Metrics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CaseSource {
    #[serde(rename = "BIRD")]
    Bird,
    #[serde(rename = "TAG")]
    Tag,
    #[serde(rename = "custom")]
    Custom,
}

impl CaseSource {
    pub fn label(self) -> &'static str {
        match self {
            CaseSource::Bird => "BIRD",
            CaseSource::Tag => "TAG",
            CaseSource::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub phrase: String,
    pub span: Span,
    pub category: AmbiguityCategory,
    pub gold_resolution: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCase {
    pub id: String,
    pub source: CaseSource,
    pub database_id: String,
    pub question: String,
    pub gold_sql: String,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}, case {}: invalid `{field}`: {message}", case_id.as_deref().unwrap_or("?"))]
    Validation {
        line: usize,
        case_id: Option<String>,
        field: String,
        message: String,
    },
}

fn invalid(line: usize, case_id: Option<&str>, field: &str, message: impl Into<String>) -> DatasetError {
    DatasetError::Validation {
        line,
        case_id: case_id.map(str::to_string),
        field: field.to_string(),
        message: message.into(),
    }
}

/// Parses JSONL text, one case per non-blank line.
pub fn parse_dataset(text: &str) -> Result<Vec<EvalCase>, DatasetError> {
    let mut cases = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let id_hint = serde_json::from_str::<serde_json::Value>(raw)
            .ok()
            .and_then(|v| v.get("id").and_then(|i| i.as_str()).map(str::to_string));
        let mut de = serde_json::Deserializer::from_str(raw);
        let case: EvalCase = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let field = e.path().to_string();
            invalid(line, id_hint.as_deref(), &field, e.into_inner().to_string())
        })?;
        let id = Some(case.id.as_str());
        if case.id.trim().is_empty() {
            return Err(invalid(line, id, "id", "must not be empty"));
        }
        if case.question.trim().is_empty() {
            return Err(invalid(line, id, "question", "must not be empty"));
        }
        if let Err(e) = canonicalize(&case.gold_sql) {
            return Err(invalid(line, id, "gold_sql", e.to_string()));
        }
        for (i, a) in case.annotations.iter().enumerate() {
            if !span_matches(&case.question, a.span, &a.phrase) {
                return Err(invalid(
                    line,
                    id,
                    &format!("annotations[{i}].span"),
                    format!("{} does not cover `{}` in the question", a.span, a.phrase),
                ));
            }
            if a.gold_resolution.trim().is_empty() {
                return Err(invalid(line, id, &format!("annotations[{i}].gold_resolution"), "must not be empty"));
            }
        }
        if !seen.insert(case.id.clone()) {
            return Err(invalid(line, id, "id", "duplicate case id"));
        }
        cases.push(case);
    }
    Ok(cases)
}

pub fn load_dataset(path: &Path) -> Result<Vec<EvalCase>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_dataset(&text)
}

/// The fields detection scoring looks at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoredItem {
    pub span: Span,
    pub category: AmbiguityCategory,
    pub phrase: String,
}

impl From<&DetectedAmbiguity> for ScoredItem {
    fn from(d: &DetectedAmbiguity) -> Self {
        ScoredItem {
            span: d.span,
            category: d.category,
            phrase: d.phrase.clone(),
        }
    }
}

impl From<&Annotation> for ScoredItem {
    fn from(a: &Annotation) -> Self {
        ScoredItem {
            span: a.span,
            category: a.category,
            phrase: a.phrase.clone(),
        }
    }
}

pub fn items_match(d: &ScoredItem, a: &ScoredItem) -> bool {
    d.category == a.category && d.span.overlap(&a.span) >= 1
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub per_category: BTreeMap<AmbiguityCategory, Counts>,
    /// Matched (detected index, annotation index) pairs.
    pub matches: Vec<(usize, usize)>,
}

impl DetectionOutcome {
    pub fn total(&self) -> Counts {
        self.per_category.values().copied().sum()
    }
}

/// One-to-one matching of detections to annotations. Pairs are eligible when
/// categories agree and spans share at least one character. The matching
/// maximizes the number of pairs, then total overlap, then the number of
/// pairs whose phrases agree case-insensitively.
pub fn match_items(detected: &[ScoredItem], annotated: &[ScoredItem]) -> Vec<(usize, usize)> {
    if detected.is_empty() || annotated.is_empty() {
        return Vec::new();
    }
    let max_overlap = detected.iter().map(|d| d.span.len()).max().unwrap_or(0) as i64 + 1;
    let pair_bonus = (max_overlap * 2 + 1) * (detected.len().max(annotated.len()) as i64 + 1);
    let weight = |d: &ScoredItem, a: &ScoredItem| -> i64 {
        if !items_match(d, a) {
            return 0;
        }
        let same_phrase = i64::from(d.phrase.to_lowercase() == a.phrase.to_lowercase());
        pair_bonus + 2 * d.span.overlap(&a.span) as i64 + same_phrase
    };
    let transpose = detected.len() > annotated.len();
    let (rows, cols) = if transpose { (annotated, detected) } else { (detected, annotated) };
    let matrix = Matrix::from_fn(rows.len(), cols.len(), |(r, c)| {
        if transpose {
            weight(&cols[c], &rows[r])
        } else {
            weight(&rows[r], &cols[c])
        }
    });
    let (_, assignment) = kuhn_munkres(&matrix);
    let mut pairs: Vec<(usize, usize)> = assignment
        .into_iter()
        .enumerate()
        .filter(|&(r, c)| matrix[(r, c)] > 0)
        .map(|(r, c)| if transpose { (c, r) } else { (r, c) })
        .collect();
    pairs.sort_unstable();
    pairs
}

pub fn score_items(detected: &[ScoredItem], annotated: &[ScoredItem]) -> DetectionOutcome {
    let matches = match_items(detected, annotated);
    let mut per_category: BTreeMap<AmbiguityCategory, Counts> = BTreeMap::new();
    let matched_d: BTreeSet<usize> = matches.iter().map(|m| m.0).collect();
    let matched_a: BTreeSet<usize> = matches.iter().map(|m| m.1).collect();
    for (i, d) in detected.iter().enumerate() {
        let c = per_category.entry(d.category).or_default();
        if matched_d.contains(&i) {
            c.tp += 1;
        } else {
            c.fp += 1;
        }
    }
    for (i, a) in annotated.iter().enumerate() {
        if !matched_a.contains(&i) {
            per_category.entry(a.category).or_default().fn_ += 1;
        }
    }
    DetectionOutcome { per_category, matches }
}

pub fn score_detection(detected: &[DetectedAmbiguity], annotated: &[Annotation]) -> DetectionOutcome {
    let d: Vec<ScoredItem> = detected.iter().map(ScoredItem::from).collect();
    let a: Vec<ScoredItem> = annotated.iter().map(ScoredItem::from).collect();
    score_items(&d, &a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub zero_division: bool,
}

impl From<Counts> for MetricRow {
    fn from(c: Counts) -> Self {
        let s: Metrics = c.scores();
        MetricRow {
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
            zero_division: s.zero_division,
        }
    }
}

impl MetricRow {
    pub fn counts(&self) -> Counts {
        Counts::new(self.tp, self.fp, self.fn_)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: u64,
    pub evaluated: u64,
    pub accuracy: f64,
}

impl Accuracy {
    fn add(&mut self, correct: bool) {
        self.evaluated += 1;
        self.correct += u64::from(correct);
        self.accuracy = self.correct as f64 / self.evaluated as f64;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactMatchAccuracy {
    pub with_disambiguation: bool,
    pub overall: Accuracy,
    pub per_source: BTreeMap<String, Accuracy>,
    /// Cases left out of the accuracy, with the reason.
    pub excluded: Vec<(String, String)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<CaseSource>,
    pub detection: DetectionOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_state: Option<SessionState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_sent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_sql: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excluded: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// How detections are counted and pooled.
    pub scoring: String,
    pub per_category: BTreeMap<String, MetricRow>,
    pub per_dimension: BTreeMap<String, MetricRow>,
    pub overall: MetricRow,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_match_accuracy: Option<ExactMatchAccuracy>,
    pub case_results: Vec<CaseResult>,
}

pub const SCORING_NOTE: &str =
    "phrase-level; a detection is a true positive when it shares the category and at least one character of span with an annotation (one-to-one); micro-averaged over pooled counts";

/// Pools per-case detection counts into category, dimension and overall
/// rows. Exact-match accuracy is filled in when `with_disambiguation` is
/// given, from the cases' `exact` fields.
pub fn aggregate(case_results: Vec<CaseResult>, with_disambiguation: Option<bool>) -> MetricsReport {
    let mut by_cat: BTreeMap<AmbiguityCategory, Counts> =
        AmbiguityCategory::ALL.iter().map(|c| (*c, Counts::default())).collect();
    for r in &case_results {
        for (cat, c) in &r.detection.per_category {
            *by_cat.entry(*cat).or_default() += *c;
        }
    }
    let per_dimension = Dimension::ALL
        .iter()
        .map(|d| {
            let pooled: Counts = d.categories().map(|c| by_cat[&c]).sum();
            (d.label().to_string(), MetricRow::from(pooled))
        })
        .collect();
    let overall = MetricRow::from(by_cat.values().copied().sum::<Counts>());
    let per_category = by_cat
        .iter()
        .map(|(c, counts)| (c.label().to_string(), MetricRow::from(*counts)))
        .collect();

    let exact_match_accuracy = with_disambiguation.map(|with| {
        let mut acc = ExactMatchAccuracy {
            with_disambiguation: with,
            overall: Accuracy::default(),
            per_source: BTreeMap::new(),
            excluded: Vec::new(),
        };
        for r in &case_results {
            if let Some(reason) = &r.excluded {
                acc.excluded.push((r.id.clone(), reason.clone()));
                continue;
            }
            let ok = r.exact == Some(true);
            acc.overall.add(ok);
            let source = r.source.map_or("unknown", CaseSource::label);
            acc.per_source.entry(source.to_string()).or_default().add(ok);
        }
        acc
    });

    MetricsReport {
        scoring: SCORING_NOTE.to_string(),
        per_category,
        per_dimension,
        overall,
        exact_match_accuracy,
        case_results,
    }
}

fn pct(x: f64) -> String {
    format!("{:.1}", x * 100.0)
}

/// Plain-text tables: detection scores per category and dimension, then
/// exact-match accuracy per source.
pub fn render_report(report: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Ambiguity detection ({})", report.scoring);
    let _ = writeln!(
        out,
        "{:<36} {:>4} {:>4} {:>4} {:>7} {:>7} {:>7}",
        "category", "tp", "fp", "fn", "P%", "R%", "F1%"
    );
    let mut row = |name: &str, r: &MetricRow| {
        let flag = if r.zero_division { " *" } else { "" };
        let _ = writeln!(
            out,
            "{:<36} {:>4} {:>4} {:>4} {:>7} {:>7} {:>7}{flag}",
            name,
            r.tp,
            r.fp,
            r.fn_,
            pct(r.precision),
            pct(r.recall),
            pct(r.f1)
        );
    };
    for d in Dimension::ALL {
        row(&format!("[{}]", d.display_name()), &report.per_dimension[d.label()]);
        for c in d.categories() {
            row(&format!("  {}", c.display_name()), &report.per_category[c.label()]);
        }
    }
    row("overall", &report.overall);
    out.push_str("(* a ratio had a zero denominator and is reported as 0)\n");

    if let Some(acc) = &report.exact_match_accuracy {
        let mode = if acc.with_disambiguation { "with" } else { "without" };
        let _ = writeln!(out, "\nExact-match accuracy ({mode} disambiguation)");
        for (source, a) in &acc.per_source {
            let _ = writeln!(out, "{:<12} {:>3}/{:<3} {:>6}%", source, a.correct, a.evaluated, pct(a.accuracy));
        }
        let a = acc.overall;
        let _ = writeln!(out, "{:<12} {:>3}/{:<3} {:>6}%", "overall", a.correct, a.evaluated, pct(a.accuracy));
        for (id, reason) in &acc.excluded {
            let _ = writeln!(out, "excluded {id}: {reason}");
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("no confident answer for `{question_id}`: {reason}")]
    NoConfidentAnswer { question_id: String, reason: String },
}

fn tokens(text: &str) -> BTreeSet<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Picks the option whose resolution shares the most tokens with the gold
/// resolution of the annotation that best overlaps the question's span.
pub fn oracle_answer(question: &ClarificationQuestion, case: &EvalCase) -> Result<UserAnswer, OracleError> {
    let fail = |reason: &str| OracleError::NoConfidentAnswer {
        question_id: question.id.clone(),
        reason: reason.to_string(),
    };
    let annotation = case
        .annotations
        .iter()
        .filter(|a| a.span.overlap(&question.span) > 0)
        .max_by_key(|a| (a.span.overlap(&question.span), a.category == question.category))
        .ok_or_else(|| fail("no annotation overlaps the ambiguous phrase"))?;
    let gold = tokens(&annotation.gold_resolution);
    let mut scored: Vec<(usize, &str)> = question
        .options
        .iter()
        .map(|o| (tokens(&o.resolution).intersection(&gold).count(), o.key.as_str()))
        .collect();
    scored.sort_by_key(|s| std::cmp::Reverse(s.0));
    match scored.as_slice() {
        [] => Err(fail("question has no options")),
        [(0, _), ..] => Err(fail("no option shares a token with the gold resolution")),
        [(a, _), (b, _), ..] if a == b => Err(fail("options tie on token overlap")),
        [(_, key), ..] => Ok(UserAnswer::new(&question.id, key)),
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset is empty")]
    EmptyDataset,
}

fn evaluate_case(
    case: &EvalCase,
    catalog: &SchemaCatalog,
    engine: &Engine,
    generator: &dyn SqlGenerator,
    with_disambiguation: bool,
) -> CaseResult {
    let mut result = CaseResult {
        id: case.id.clone(),
        source: Some(case.source),
        ..CaseResult::default()
    };
    let entry = match catalog.get(&case.database_id) {
        Ok(e) => e,
        Err(e) => {
            result.error = Some(e.to_string());
            result.exact = Some(false);
            return result;
        }
    };
    let schema = entry.model.clone();
    let dialect = schema.dialect.clone();

    let question = if with_disambiguation {
        let session = Session::new(&case.question, schema.clone(), &dialect);
        let mut oracle_failure = None;
        let mut provider = |s: &Session| {
            let answers = s
                .open_questions
                .iter()
                .map(|q| oracle_answer(q, case))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| {
                    oracle_failure = Some(e.to_string());
                    e.to_string()
                })?;
            Ok((answers, Vec::new()))
        };
        let session = match engine.resolve_loop(session, &mut provider) {
            Ok(s) => s,
            Err(e) => {
                result.error = Some(e.to_string());
                result.exact = Some(false);
                return result;
            }
        };
        result.detection = score_detection(session.initial_detections(), &case.annotations);
        result.final_state = Some(session.state);
        if let Some(reason) = oracle_failure {
            result.excluded = Some(reason);
            return result;
        }
        if session.state != SessionState::Resolved {
            result.error = Some(session.failure.unwrap_or_else(|| "session did not resolve".into()));
            result.exact = Some(false);
            return result;
        }
        session.rewritten_question
    } else {
        match engine.detect(&case.question, &schema) {
            Ok(d) => result.detection = score_detection(&d, &case.annotations),
            Err(e) => {
                result.detection = score_detection(&[], &case.annotations);
                result.error = Some(e.to_string());
            }
        }
        case.question.clone()
    };

    result.question_sent = Some(question.clone());
    match generator.generate(&question, &schema, &dialect) {
        Ok(sql) => {
            let report = compare(&sql, &case.gold_sql, entry.database_file.as_deref());
            result.exact = Some(report.exact);
            result.execution = report.execution;
            if !report.notes.is_empty() {
                result.error = Some(report.notes);
            }
            result.generated_sql = Some(sql);
        }
        Err(e) => {
            result.exact = Some(false);
            result.error = Some(e.to_string());
        }
    }
    result
}

/// Evaluates every case on a pool of `workers` threads. Results keep dataset
/// order, so the report does not depend on scheduling.
pub fn run_end_to_end(
    cases: &[EvalCase],
    catalog: &SchemaCatalog,
    engine: &Engine,
    generator: &dyn SqlGenerator,
    with_disambiguation: bool,
    workers: usize,
) -> Result<MetricsReport, EvalError> {
    if cases.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<CaseResult>> = vec![None; cases.len()];
    let workers = workers.clamp(1, cases.len());
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        let Some(case) = cases.get(i) else { break };
                        done.push((i, evaluate_case(case, catalog, engine, generator, with_disambiguation)));
                    }
                    done
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("evaluation worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    let results = slots.into_iter().map(|r| r.expect("every case evaluated")).collect();
    Ok(aggregate(results, Some(with_disambiguation)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ClarificationOption;

    fn item(start: usize, end: usize, cat: AmbiguityCategory) -> ScoredItem {
        ScoredItem {
            span: Span::new(start, end),
            category: cat,
            phrase: format!("p{start}"),
        }
    }

    const COL: AmbiguityCategory = AmbiguityCategory::UnclearSchemaReference;
    const VAL: AmbiguityCategory = AmbiguityCategory::UnclearValueReference;

    #[test]
    fn identity_and_spurious() {
        let a = vec![item(0, 5, COL), item(10, 15, VAL)];
        let o = score_items(&a, &a);
        assert_eq!(o.total(), Counts::new(2, 0, 0));

        let d = vec![item(0, 5, COL), item(10, 15, VAL), item(20, 25, COL)];
        let a = vec![item(0, 5, COL), item(10, 15, VAL), item(30, 35, VAL)];
        assert_eq!(score_items(&d, &a).total(), Counts::new(2, 1, 1));
    }

    #[test]
    fn category_mismatch_is_fp_and_fn() {
        let o = score_items(&[item(0, 5, COL)], &[item(0, 5, VAL)]);
        assert_eq!(o.total(), Counts::new(0, 1, 1));
        assert_eq!(o.per_category[&COL], Counts::new(0, 1, 0));
        assert_eq!(o.per_category[&VAL], Counts::new(0, 0, 1));
    }

    #[test]
    fn overlap_greedy_trap() {
        // Pairing the largest overlap first (d0-a1) would leave a0 and d1 unmatched.
        let a = vec![item(0, 5, COL), item(5, 10, COL)];
        let d = vec![item(3, 8, COL), item(8, 10, COL)];
        let o = score_items(&d, &a);
        assert_eq!(o.total(), Counts::new(2, 0, 0));
        assert_eq!(o.matches, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn phrase_breaks_overlap_ties() {
        let mut d = item(0, 4, COL);
        d.phrase = "rank".into();
        let mut a0 = item(0, 6, COL);
        a0.phrase = "ranked".into();
        let mut a1 = item(0, 4, COL);
        a1.phrase = "RANK".into();
        let o = score_items(&[d], &[a0, a1]);
        assert_eq!(o.matches, vec![(0, 1)]);
    }

    #[test]
    fn aggregate_pools_counts() {
        let mut r = CaseResult {
            id: "c".into(),
            ..Default::default()
        };
        r.detection.per_category.insert(COL, Counts::new(2, 1, 0));
        r.detection.per_category.insert(VAL, Counts::new(0, 0, 1));
        let report = aggregate(vec![r], None);
        assert_eq!(report.overall.counts(), Counts::new(2, 1, 1));
        assert!((report.overall.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(report.per_dimension["db_related"].counts(), Counts::new(2, 1, 1));
        assert_eq!(report.per_dimension["llm_related"].counts(), Counts::default());
        assert!(report.per_dimension["llm_related"].zero_division);
        assert_eq!(report.per_category.len(), 7);
        let text = render_report(&report);
        assert!(text.contains("overall"));
    }

    fn question(options: &[(&str, &str)]) -> ClarificationQuestion {
        ClarificationQuestion {
            id: "q0-0".into(),
            ambiguity_id: "a0-0".into(),
            phrase: "ranked 2".into(),
            span: Span::new(10, 18),
            category: COL,
            text: "Which column?".into(),
            options: options
                .iter()
                .map(|(k, r)| ClarificationOption {
                    key: k.to_string(),
                    display: r.to_string(),
                    resolution: r.to_string(),
                    snippet: None,
                })
                .collect(),
        }
    }

    fn case(gold: &str) -> EvalCase {
        EvalCase {
            id: "c1".into(),
            source: CaseSource::Bird,
            database_id: "f1".into(),
            question: "drivers   ranked 2".into(),
            gold_sql: "SELECT 1".into(),
            annotations: vec![Annotation {
                phrase: "ranked 2".into(),
                span: Span::new(10, 18),
                category: COL,
                gold_resolution: gold.into(),
            }],
            notes: None,
        }
    }

    #[test]
    fn oracle_picks_max_overlap() {
        let q = question(&[("A", "position column"), ("B", "rank column"), ("C", "points column")]);
        let a = oracle_answer(&q, &case("use the rank column of results")).unwrap();
        assert_eq!(a.selected_key, "B");
    }

    #[test]
    fn oracle_ties_and_misses_fail() {
        let q = question(&[("A", "position column"), ("B", "rank column")]);
        assert!(oracle_answer(&q, &case("the column")).is_err());
        assert!(oracle_answer(&q, &case("nothing shared")).is_err());
        let single = question(&[("A", "rank column")]);
        assert_eq!(oracle_answer(&single, &case("rank")).unwrap().selected_key, "A");
        let mut far = case("rank");
        far.annotations[0].span = Span::new(0, 7);
        far.annotations[0].phrase = "drivers".into();
        assert!(oracle_answer(&single, &far).is_err());
    }

    #[test]
    fn dataset_validation() {
        assert!(parse_dataset("").unwrap().is_empty());
        let good = serde_json::to_string(&case("rank")).unwrap();
        assert_eq!(parse_dataset(&good).unwrap().len(), 1);

        let dup = format!("{good}\n{good}\n");
        let err = parse_dataset(&dup).unwrap_err();
        assert!(matches!(err, DatasetError::Validation { line: 2, ref field, .. } if field == "id"));

        let mut bad = case("rank");
        bad.annotations[0].span = Span::new(9, 17);
        let err = parse_dataset(&serde_json::to_string(&bad).unwrap()).unwrap_err();
        match err {
            DatasetError::Validation { case_id, field, .. } => {
                assert_eq!(case_id.as_deref(), Some("c1"));
                assert_eq!(field, "annotations[0].span");
            }
            other => panic!("{other}"),
        }

        let wrong_cat = good.replace("unclear_schema_reference", "not_a_category");
        match parse_dataset(&wrong_cat).unwrap_err() {
            DatasetError::Validation { case_id, field, .. } => {
                assert_eq!(case_id.as_deref(), Some("c1"));
                assert_eq!(field, "annotations[0].category");
            }
            other => panic!("{other}"),
        }
    }
}
