//! Prompt builders. All of them are pure: equal inputs give byte-identical
//! requests, which is what the scripted backend and the tests rely on.

use std::fmt::Write as _;

use super::{DecodeParams, PromptRequest, Stage};
use crate::engine::{ClarificationQuestion, DetectedAmbiguity, UserAnswer};
use crate::preferences::PreferenceEntry;
use crate::schema::SchemaSnippet;
use crate::taxonomy::{render_cards, AmbiguityCategory, Dimension};

/// Appended to the user text when a reply could not be parsed.
pub const REPAIR_INSTRUCTION: &str = "\n\nREPAIR: your previous reply could not be parsed. \
Reply again using exactly the output format requested above and nothing else.";

const PIPELINE_DECODE: DecodeParams = DecodeParams {
    temperature: 0.0,
    max_output_tokens: 1024,
};

fn request(stage: Stage, system_text: String, user_text: String) -> PromptRequest {
    PromptRequest {
        stage,
        system_text,
        user_text,
        decode: PIPELINE_DECODE,
    }
}

pub fn build_detection_prompt(question: &str, schema_text: &str) -> PromptRequest {
    build_detection_prompt_with_context(question, schema_text, None)
}

/// Detection prompt with the session's recorded preferences as extra context
/// for re-detection after a rewrite.
pub fn build_detection_prompt_with_context(
    question: &str,
    schema_text: &str,
    preferences: Option<&str>,
) -> PromptRequest {
    let mut system = String::new();
    system.push_str(
        "You review natural-language questions that will be translated into SQL over the \
database described by the user. A phrase is ambiguous when, given that database, it supports \
more than one reasonable SQL interpretation, so a translator could silently pick the wrong one.\n\n\
Find every ambiguous phrase in the question and label it with exactly one category from this \
taxonomy (labels in snake_case):\n\n",
    );
    system.push_str(&render_cards());
    system.push_str(
        "\nWorked examples\n\n\
[DB-related] Question: \"Which city is the largest one?\"\n\
```json\n\
[{\"phrase\": \"largest\", \"category\": \"unclear_schema_reference\", \"rationale\": \"'largest' may be measured by area or by population; the question does not say which column to rank by.\"}]\n\
```\n\n\
[LLM-related] Question: \"List the players who signed after the 2018 World Cup.\"\n\
```json\n\
[{\"phrase\": \"after the 2018 World Cup\", \"category\": \"ambiguous_temporal_spatial_scope\", \"rationale\": \"The cut-off may be the final match (2018-07-15) or the end of 2018.\"}]\n\
```\n\n\
Rules:\n\
- Copy each phrase verbatim from the question.\n\
- When a phrase could map to several columns, name each candidate as table.column in the rationale.\n\
- Report a phrase once per category; a phrase may appear under two categories if both apply.\n\
- If the question is unambiguous, return [].\n\n\
Output: a single ```json fenced block containing a list of objects with the keys \
\"phrase\", \"category\" and \"rationale\". No other text.",
    );

    let mut user = format!("QUESTION: {question}\n\nSCHEMA:\n{schema_text}\n");
    if let Some(prefs) = preferences.filter(|p| !p.trim().is_empty()) {
        write!(
            user,
            "\nCLARIFICATIONS ALREADY GIVEN BY THE USER (do not report ambiguities these settle):\n{prefs}"
        )
        .unwrap();
    }
    request(Stage::Detect, system, user)
}

fn render_snippet(out: &mut String, s: &SchemaSnippet) {
    write!(out, "- {}.{}", s.table, s.column).unwrap();
    if let Some(d) = &s.description {
        write!(out, " ({d})").unwrap();
    }
    let values: Vec<_> = s.values.iter().map(|v| format!("{v:?}")).collect();
    writeln!(out, ": {}", values.join(", ")).unwrap();
}

pub fn build_clarification_prompt(
    ambiguity: &DetectedAmbiguity,
    evidence: &[SchemaSnippet],
    question: &str,
) -> PromptRequest {
    let category = ambiguity.category;
    let mut system = String::from(
        "You turn one detected ambiguity in a database question into a single multiple-choice \
clarification question for the user.\n\n\
Requirements:\n\
- Between 2 and 6 options, each a distinct reasonable interpretation.\n\
- Every option has a short \"display\" text and a \"resolution\": one standalone declarative \
sentence that states the interpretation precisely enough to be inserted into the question \
verbatim.\n",
    );
    match category.dimension() {
        Dimension::DbRelated => system.push_str(
            "- This is a database-related ambiguity. Base the options on the database snippets \
provided and ask which column, stored value or SQL operation is meant. When an option \
corresponds to a column, set \"column\" to its table.column name.\n",
        ),
        Dimension::LlmRelated => system.push_str(
            "- This ambiguity concerns knowledge or reasoning outside the stored data. Ask where the \
information should come from, or which exact value the phrase should stand for.\n",
        ),
    }
    if category == AmbiguityCategory::AmbiguousTemporalSpatialScope {
        system.push_str(
            "- Offer the scope at distinct granularities (for a time reference: start date, end \
date, or year), each annotated with the exact time reference, e.g. an ISO date or a year; for \
a place: the exact area such as a city versus a county.\n",
        );
    }
    system.push_str(
        "\nOutput: a single ```json fenced block with an object {\"question\": text, \"options\": \
[{\"display\": text, \"resolution\": text, \"column\": optional table.column}]}. No other text.",
    );

    let mut user = format!(
        "QUESTION: {question}\nAMBIGUOUS PHRASE: \"{}\"\nCATEGORY: {} ({})\nRATIONALE: {}\n",
        ambiguity.phrase,
        category.label(),
        category.display_name(),
        ambiguity.rationale
    );
    if category.dimension() == Dimension::DbRelated {
        if evidence.is_empty() {
            user.push_str("DATABASE SNIPPETS: none available; derive the options from the rationale.\n");
        } else {
            user.push_str("DATABASE SNIPPETS:\n");
            for s in evidence {
                render_snippet(&mut user, s);
            }
        }
    }
    request(Stage::Clarify, system, user)
}

pub fn build_refinement_prompt(
    question: &str,
    answers: &[(ClarificationQuestion, UserAnswer)],
    constraints: &[String],
) -> PromptRequest {
    let system = String::from(
        "You rewrite a database question so that it states the user's intent without ambiguity.\n\n\
Rules:\n\
1. For every clarification, insert the resolution sentence of the selected option verbatim.\n\
2. Add every additional constraint to the question.\n\
3. When an additional constraint conflicts with the question or with a clarification, keep the \
constraint from the ADDITIONAL CONSTRAINTS section and drop the conflicting condition.\n\
4. Change nothing else. If there are no clarifications and no additional constraints, return \
the question unchanged.\n\n\
Output: the rewritten question on a single line, with no quotes or commentary.",
    );
    let mut user = format!("QUESTION: {question}\n\nCLARIFICATIONS:\n");
    let mut any = false;
    for (q, a) in answers {
        if let Some(opt) = q.option(&a.selected_key) {
            writeln!(
                user,
                "- \"{}\" ({}): {}\n  selected: {}\n  resolution: {}",
                q.phrase,
                q.category.label(),
                q.text,
                opt.display,
                opt.resolution
            )
            .unwrap();
            any = true;
        }
    }
    if !any {
        user.push_str("(none)\n");
    }
    user.push_str("\nADDITIONAL CONSTRAINTS:\n");
    if constraints.is_empty() {
        user.push_str("(none)\n");
    }
    for c in constraints {
        writeln!(user, "- {c}").unwrap();
    }
    if !any && constraints.is_empty() {
        user.push_str("\nThere is nothing to apply: return the question unchanged.\n");
    }
    request(Stage::Refine, system, user)
}

pub fn build_merge_prompt(existing: &PreferenceEntry, incoming: &PreferenceEntry) -> PromptRequest {
    let system = String::from(
        "You maintain a user's recorded clarification preferences for database questions.\n\n\
A conflict exists when two preferences about the same target cannot both hold, for example \
two different columns for the same phrase, or two different dates for the same event. When \
they conflict, the newer preference reflects the user's latest intent and must win; keep any \
detail of the earlier preference that does not contradict it.\n\n\
Example\n\
TARGET: column:ranked 2\n\
EARLIER PREFERENCE: Use the position column of the results table for \"ranked 2\".\n\
NEWER PREFERENCE: Use the rank column of the results table for \"ranked 2\".\n\
MERGED: Use the rank column of the results table for \"ranked 2\".\n\n\
Output: the merged preference as one sentence on a single line, nothing else.",
    );
    let user = format!(
        "TARGET: {}\nEARLIER PREFERENCE (version {}): {}\nNEWER PREFERENCE: {}\n",
        existing.target_key, existing.version, existing.resolution, incoming.resolution
    );
    request(Stage::Merge, system, user)
}

/// Prompt for the gateway-backed SQL generator.
pub fn build_generation_prompt(question: &str, dialect: &str, schema_text: &str) -> PromptRequest {
    let system = format!(
        "You translate questions into a single {dialect} SELECT statement over the given schema. \
Output only the SQL inside a ```sql fenced block."
    );
    let user = format!("QUESTION: {question}\n\nSCHEMA:\n{schema_text}\n");
    request(Stage::Generate, system, user)
}
