//! The closed ambiguity taxonomy: two dimensions, seven categories.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which side of the pipeline an ambiguity hurts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    /// Mapping of question phrases onto schema elements and stored values.
    DbRelated,
    /// Reasoning or knowledge the model has to supply beyond the database.
    LlmRelated,
}

impl Dimension {
    pub const ALL: [Dimension; 2] = [Dimension::DbRelated, Dimension::LlmRelated];

    pub fn label(self) -> &'static str {
        match self {
            Dimension::DbRelated => "db_related",
            Dimension::LlmRelated => "llm_related",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Dimension::DbRelated => "DB-related ambiguity",
            Dimension::LlmRelated => "LLM-related ambiguity",
        }
    }

    pub fn categories(self) -> impl Iterator<Item = AmbiguityCategory> {
        AmbiguityCategory::ALL
            .into_iter()
            .filter(move |c| c.dimension() == self)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmbiguityCategory {
    UnclearSchemaReference,
    UnclearValueReference,
    MissingSqlKeywords,
    UnclearKnowledgeSource,
    InsufficientReasoningContext,
    ConflictingKnowledge,
    AmbiguousTemporalSpatialScope,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown ambiguity category `{0}`")]
pub struct UnknownCategory(pub String);

impl AmbiguityCategory {
    pub const ALL: [AmbiguityCategory; 7] = [
        AmbiguityCategory::UnclearSchemaReference,
        AmbiguityCategory::UnclearValueReference,
        AmbiguityCategory::MissingSqlKeywords,
        AmbiguityCategory::UnclearKnowledgeSource,
        AmbiguityCategory::InsufficientReasoningContext,
        AmbiguityCategory::ConflictingKnowledge,
        AmbiguityCategory::AmbiguousTemporalSpatialScope,
    ];

    /// Stable serialized label, identical to the serde representation.
    pub fn label(self) -> &'static str {
        match self {
            AmbiguityCategory::UnclearSchemaReference => "unclear_schema_reference",
            AmbiguityCategory::UnclearValueReference => "unclear_value_reference",
            AmbiguityCategory::MissingSqlKeywords => "missing_sql_keywords",
            AmbiguityCategory::UnclearKnowledgeSource => "unclear_knowledge_source",
            AmbiguityCategory::InsufficientReasoningContext => "insufficient_reasoning_context",
            AmbiguityCategory::ConflictingKnowledge => "conflicting_knowledge",
            AmbiguityCategory::AmbiguousTemporalSpatialScope => {
                "ambiguous_temporal_spatial_scope"
            }
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            AmbiguityCategory::UnclearSchemaReference => "Unclear schema reference",
            AmbiguityCategory::UnclearValueReference => "Unclear value reference",
            AmbiguityCategory::MissingSqlKeywords => "Missing SQL-related keywords",
            AmbiguityCategory::UnclearKnowledgeSource => "Unclear knowledge source",
            AmbiguityCategory::InsufficientReasoningContext => "Insufficient reasoning context",
            AmbiguityCategory::ConflictingKnowledge => "Conflicting knowledge",
            AmbiguityCategory::AmbiguousTemporalSpatialScope => "Ambiguous temporal/spatial scope",
        }
    }

    pub fn dimension(self) -> Dimension {
        dimension_of(self)
    }

    pub fn card(self) -> &'static CategoryCard {
        category_card(self)
    }
}

impl fmt::Display for AmbiguityCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AmbiguityCategory {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_category(s)
    }
}

fn squash(label: &str) -> String {
    label
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Parses a category label leniently: casing, spaces, underscores, hyphens and
/// the slash in "temporal/spatial" are ignored. The display names and the
/// CamelCase variant names are accepted as well.
pub fn parse_category(label: &str) -> Result<AmbiguityCategory, UnknownCategory> {
    let key = squash(label);
    if key.is_empty() {
        return Err(UnknownCategory(label.to_string()));
    }
    AmbiguityCategory::ALL
        .into_iter()
        .find(|c| squash(c.label()) == key || squash(c.display_name()) == key)
        .ok_or_else(|| UnknownCategory(label.to_string()))
}

pub fn dimension_of(category: AmbiguityCategory) -> Dimension {
    use AmbiguityCategory::*;
    match category {
        UnclearSchemaReference | UnclearValueReference | MissingSqlKeywords => Dimension::DbRelated,
        UnclearKnowledgeSource
        | InsufficientReasoningContext
        | ConflictingKnowledge
        | AmbiguousTemporalSpatialScope => Dimension::LlmRelated,
    }
}

/// Definition plus one worked exemplar for a category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategoryCard {
    pub category: AmbiguityCategory,
    pub dimension: Dimension,
    pub definition: &'static str,
    pub exemplar: &'static str,
}

static CARDS: [CategoryCard; 7] = [
    CategoryCard {
        category: AmbiguityCategory::UnclearSchemaReference,
        dimension: Dimension::DbRelated,
        definition: "A phrase can be linked to more than one table or column for filtering, \
                     ranking or aggregation, and the question gives no way to pick one.",
        exemplar: "\"Who is the oldest user?\" - \"oldest user\" may be computed from the age \
                   column or from the registration date.",
    },
    CategoryCard {
        category: AmbiguityCategory::UnclearValueReference,
        dimension: Dimension::DbRelated,
        definition: "A literal in the question does not match the way the value is stored, so \
                     the filter condition cannot be written reliably.",
        exemplar: "\"How many customers live in New York City?\" - the database may store the \
                   city as \"NYC\".",
    },
    CategoryCard {
        category: AmbiguityCategory::MissingSqlKeywords,
        dimension: Dimension::DbRelated,
        definition: "The intended SQL operation is not stated, so sorting, grouping and \
                     filtering are all plausible readings.",
        exemplar: "\"Show me users by registration date\" - ORDER BY, GROUP BY and WHERE on the \
                   registration date all fit.",
    },
    CategoryCard {
        category: AmbiguityCategory::UnclearKnowledgeSource,
        dimension: Dimension::LlmRelated,
        definition: "It is not said whether a fact should be read from the database or derived \
                     by model reasoning.",
        exemplar: "\"List the female employees\" - use a gender column, or infer gender from \
                   first names?",
    },
    CategoryCard {
        category: AmbiguityCategory::InsufficientReasoningContext,
        dimension: Dimension::LlmRelated,
        definition: "Reasoning the question requires is missing an input such as a unit, a \
                     reference date or a conversion target.",
        exemplar: "\"Convert the totals at the current exchange rate\" - which currencies, and \
                   the rate of which date?",
    },
    CategoryCard {
        category: AmbiguityCategory::ConflictingKnowledge,
        dimension: Dimension::LlmRelated,
        definition: "The question presupposes something that contradicts real-world facts or \
                     the stored data.",
        exemplar: "\"Who won the 2020 Olympic marathon held in 2020?\" - the event took place \
                   in 2021.",
    },
    CategoryCard {
        category: AmbiguityCategory::AmbiguousTemporalSpatialScope,
        dimension: Dimension::LlmRelated,
        definition: "A time or place boundary admits several granularities, such as an exact \
                     date versus a whole year, or a city versus a county.",
        exemplar: "\"Players who joined after the 2018 World Cup\" - after the final match, or \
                   after the tournament year?",
    },
];

pub fn category_card(category: AmbiguityCategory) -> &'static CategoryCard {
    &CARDS[AmbiguityCategory::ALL
        .iter()
        .position(|c| *c == category)
        .expect("every category has a card")]
}

pub fn all_cards() -> &'static [CategoryCard; 7] {
    &CARDS
}

/// Renders every card grouped by dimension, as embedded in detection prompts.
pub fn render_cards() -> String {
    let mut out = String::new();
    for dim in Dimension::ALL {
        out.push_str(&format!("## {}\n", dim.display_name()));
        for cat in dim.categories() {
            let card = category_card(cat);
            out.push_str(&format!(
                "- {} ({}): {}\n  Example: {}\n",
                cat.label(),
                cat.display_name(),
                card.definition,
                card.exemplar
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_prose_names() {
        assert_eq!(
            parse_category("unclear schema reference").unwrap(),
            AmbiguityCategory::UnclearSchemaReference
        );
        assert_eq!(
            parse_category("Ambiguous temporal/spatial scope").unwrap(),
            AmbiguityCategory::AmbiguousTemporalSpatialScope
        );
        assert_eq!(
            parse_category("Missing SQL-related keywords").unwrap(),
            AmbiguityCategory::MissingSqlKeywords
        );
        assert_eq!(
            parse_category("ConflictingKnowledge").unwrap(),
            AmbiguityCategory::ConflictingKnowledge
        );
    }

    #[test]
    fn rejects_outside_closed_set() {
        assert_eq!(
            parse_category("largest city"),
            Err(UnknownCategory("largest city".into()))
        );
        assert!(parse_category("").is_err());
        assert!(parse_category(" / ").is_err());
    }

    #[test]
    fn label_round_trip() {
        for c in AmbiguityCategory::ALL {
            assert_eq!(parse_category(c.label()).unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.label()));
        }
    }

    #[test]
    fn dimension_partition() {
        assert_eq!(
            dimension_of(AmbiguityCategory::UnclearValueReference),
            Dimension::DbRelated
        );
        assert_eq!(
            dimension_of(AmbiguityCategory::ConflictingKnowledge),
            Dimension::LlmRelated
        );
        assert_eq!(Dimension::DbRelated.categories().count(), 3);
        assert_eq!(Dimension::LlmRelated.categories().count(), 4);
        let db: Vec<_> = Dimension::DbRelated.categories().collect();
        assert_eq!(db, AmbiguityCategory::ALL[..3].to_vec());
    }

    #[test]
    fn cards_are_complete() {
        for c in AmbiguityCategory::ALL {
            let card = category_card(c);
            assert_eq!(card.category, c);
            assert_eq!(card.dimension, c.dimension());
            assert!(!card.definition.trim().is_empty());
            assert!(!card.exemplar.trim().is_empty());
        }
        assert!(category_card(AmbiguityCategory::UnclearSchemaReference)
            .exemplar
            .contains("oldest user"));
        assert!(category_card(AmbiguityCategory::MissingSqlKeywords)
            .exemplar
            .contains("Show me users by registration date"));
    }

    #[test]
    fn rendered_cards_name_each_label_once() {
        let text = render_cards();
        for c in AmbiguityCategory::ALL {
            assert_eq!(text.matches(c.label()).count(), 1, "{c}");
        }
    }
}
