//! Method cards: each method's knowledge before and after it runs, loaded
//! from a JSON catalog.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{
    classify_transition, satisfies, KnowledgeState, LatticeError, ParametricTag, StructuralTag,
    TemporalFlag, Transition,
};

/// The built-in catalog shipped with the crate.
pub const SEED_CATALOG_JSON: &str = include_str!("../data/seed_catalog.json");

/// Catalog files carry no version field; every file is read as this one.
pub const CATALOG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("catalog is not a JSON array of cards: {0}")]
    NotAnArray(String),
    #[error("card {card}: {message}")]
    Schema { card: String, message: String },
    #[error("card {0}: duplicate id")]
    DuplicateId(String),
    #[error("card {card}: field {field}: {message}")]
    Invalid {
        card: String,
        field: &'static str,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodCard {
    pub id: String,
    pub name: String,
    pub citation_key: String,
    pub a_priori: KnowledgeState,
    pub a_posteriori: KnowledgeState,
    #[serde(default)]
    pub assumption_tags: BTreeSet<String>,
    #[serde(default)]
    pub notes: String,
}

impl MethodCard {
    pub fn validate(&self) -> Result<(), RegistryError> {
        let invalid = |field, message: &str| RegistryError::Invalid {
            card: self.id.clone(),
            field,
            message: message.to_string(),
        };
        let slug_ok = !self.id.is_empty()
            && self
                .id
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_');
        if !slug_ok {
            return Err(invalid("id", "must be a nonempty slug of [a-z0-9_-]"));
        }
        if self.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        if self.a_priori.temporal() != self.a_posteriori.temporal() {
            return Err(invalid(
                "a_posteriori.temporal",
                "must equal a_priori.temporal",
            ));
        }
        if self.assumption_tags.iter().any(|t| t.trim().is_empty()) {
            return Err(invalid("assumption_tags", "tags must not be empty"));
        }
        Ok(())
    }

    pub fn transition(&self) -> Transition {
        classify_transition(&self.a_priori, &self.a_posteriori)
    }
}

/// Validated, immutable set of cards kept in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    cards: Vec<MethodCard>,
    version: u32,
}

impl Catalog {
    /// Validates every card; the first problem aborts the whole load.
    pub fn new(mut cards: Vec<MethodCard>) -> Result<Self, RegistryError> {
        let mut seen = HashSet::new();
        for c in &cards {
            c.validate()?;
            if !seen.insert(c.id.clone()) {
                return Err(RegistryError::DuplicateId(c.id.clone()));
            }
        }
        cards.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(Catalog {
            cards,
            version: CATALOG_VERSION,
        })
    }

    pub fn seed() -> Self {
        Catalog::from_json_str(SEED_CATALOG_JSON).expect("built-in catalog is valid")
    }

    pub fn from_json_str(text: &str) -> Result<Self, RegistryError> {
        let raw: Vec<serde_json::Value> =
            serde_json::from_str(text).map_err(|e| RegistryError::NotAnArray(e.to_string()))?;
        let mut cards = Vec::with_capacity(raw.len());
        for (i, value) in raw.into_iter().enumerate() {
            let label = value
                .get("id")
                .and_then(|v| v.as_str())
                .map_or_else(|| format!("#{}", i + 1), str::to_string);
            let card: MethodCard = serde_json::from_value(value).map_err(|e| RegistryError::Schema {
                card: label,
                message: e.to_string(),
            })?;
            cards.push(card);
        }
        Catalog::new(cards)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.cards).expect("cards serialize");
        s.push('\n');
        s
    }

    pub fn cards(&self) -> &[MethodCard] {
        &self.cards
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&MethodCard> {
        self.cards
            .binary_search_by(|c| c.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.cards[i])
    }

    /// A catalog restricted to the given ids; unknown ids are ignored.
    pub fn subset(&self, ids: &[&str]) -> Catalog {
        Catalog {
            cards: self
                .cards
                .iter()
                .filter(|c| ids.contains(&c.id.as_str()))
                .cloned()
                .collect(),
            version: self.version,
        }
    }
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<Catalog, RegistryError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Catalog::from_json_str(&text)
}

pub fn save_catalog(c: &Catalog, path: impl AsRef<Path>) -> Result<(), RegistryError> {
    let path = path.as_ref();
    std::fs::write(path, c.to_json_string()).map_err(|source| RegistryError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// A knowledge state where any axis may be left open, written like a state
/// with `*` for open axes: `causal:*:temporal`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StateBound {
    pub structural: Option<StructuralTag>,
    pub parametric: Option<ParametricTag>,
    pub temporal: Option<TemporalFlag>,
}

impl StateBound {
    fn fill(&self, s: StructuralTag, p: ParametricTag, t: TemporalFlag) -> KnowledgeState {
        KnowledgeState::from_tags(
            self.structural.unwrap_or(s),
            self.parametric.unwrap_or(p),
            self.temporal.unwrap_or(t),
        )
    }

    /// `state` holds at least the knowledge in this bound (open axes always
    /// pass).
    pub fn is_met_by(&self, state: &KnowledgeState) -> bool {
        let t = state.temporal();
        satisfies(state, &self.fill(StructuralTag::Unknown, ParametricTag::NonParametric, t))
    }

    /// `state` needs no more than the knowledge in this bound.
    pub fn admits(&self, state: &KnowledgeState) -> bool {
        let (s, p, t) = state.tags();
        satisfies(&self.fill(s, p, t), state)
    }
}

impl FromStr for StateBound {
    type Err = LatticeError;
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = || LatticeError::Parse(text.to_string());
        let parts: Vec<&str> = text.trim().split(':').collect();
        let [s, p, t] = parts[..] else {
            return Err(err());
        };
        fn axis<T: FromStr>(s: &str) -> Result<Option<T>, ()> {
            if s == "*" {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| ())
            }
        }
        Ok(StateBound {
            structural: axis(s).map_err(|_| err())?,
            parametric: axis(p).map_err(|_| err())?,
            temporal: axis(t).map_err(|_| err())?,
        })
    }
}

impl fmt::Display for StateBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn part<T: fmt::Display>(v: Option<T>) -> String {
            v.map_or_else(|| "*".to_string(), |t| t.to_string())
        }
        write!(
            f,
            "{}:{}:{}",
            part(self.structural),
            part(self.parametric),
            part(self.temporal)
        )
    }
}

impl From<&KnowledgeState> for StateBound {
    fn from(s: &KnowledgeState) -> Self {
        let (st, p, t) = s.tags();
        StateBound {
            structural: Some(st),
            parametric: Some(p),
            temporal: Some(t),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CatalogFilter {
    pub temporal: Option<TemporalFlag>,
    /// Keep cards whose output holds at least this much knowledge.
    pub min_a_posteriori: Option<StateBound>,
    /// Keep cards that can run with this much knowledge.
    pub max_a_priori: Option<StateBound>,
    pub tag: Option<String>,
}

/// Cards matching every field of the filter, in id order.
pub fn query_catalog<'a>(c: &'a Catalog, filter: &CatalogFilter) -> Vec<&'a MethodCard> {
    c.cards
        .iter()
        .filter(|card| filter.temporal.is_none_or(|t| card.a_priori.temporal() == t))
        .filter(|card| {
            filter
                .min_a_posteriori
                .is_none_or(|b| b.is_met_by(&card.a_posteriori))
        })
        .filter(|card| filter.max_a_priori.is_none_or(|b| b.admits(&card.a_priori)))
        .filter(|card| {
            filter
                .tag
                .as_ref()
                .is_none_or(|t| card.assumption_tags.contains(t))
        })
        .collect()
}
