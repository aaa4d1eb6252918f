use std::collections::BTreeSet;
use std::fmt::Write as _;

use mas2_core::ir::BackbonePool;
use mas2_core::money::PricePerMillion;
use mas2_core::Money;
use serde::{Deserialize, Deserializer, Serialize};

/// Priced backbone, as listed in the catalog file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneCard {
    pub id: String,
    pub endpoint: String,
    pub model_name: String,
    pub description: String,
    #[serde(deserialize_with = "price")]
    pub price_in: PricePerMillion,
    #[serde(deserialize_with = "price")]
    pub price_out: PricePerMillion,
    /// Whether the implementer may assign this backbone to workflow roles.
    /// Meta-agent backbones are registered with `pool = false`.
    #[serde(default = "yes")]
    pub pool: bool,
}

fn yes() -> bool {
    true
}

fn price<'de, D: Deserializer<'de>>(d: D) -> Result<PricePerMillion, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => PricePerMillion::from_f64(v).ok_or_else(|| serde::de::Error::custom(format!("invalid price {v}"))),
        Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
    }
}

impl BackboneCard {
    pub fn new(id: &str, description: &str, price_in: &str, price_out: &str) -> Self {
        BackboneCard {
            id: id.into(),
            endpoint: "https://openrouter.ai/api/v1".into(),
            model_name: id.into(),
            description: description.into(),
            price_in: price_in.parse().expect("price literal"),
            price_out: price_out.parse().expect("price literal"),
            pool: true,
        }
    }

    pub fn cost(&self, prompt_tokens: u64, completion_tokens: u64) -> Money {
        self.price_in.cost(prompt_tokens) + self.price_out.cost(completion_tokens)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CatalogError {
    #[error("backbone `{0}` is already registered")]
    DuplicateBackbone(String),
    #[error("backbone `{0}` has an empty description")]
    EmptyDescription(String),
    #[error("catalog file is malformed: {0}")]
    Malformed(String),
}

/// Backbones in registration order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalog {
    cards: Vec<BackboneCard>,
}

/// On-disk layout: `[[backbone]]` tables.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CatalogFile {
    #[serde(default)]
    pub backbone: Vec<BackboneCard>,
}

/// Workflow-role pool: id, description, price in, price out (per 1M tokens).
pub const SEED_POOL: [(&str, &str, &str, &str); 5] = [
    ("gpt-4o", "Strong general model; best for hard reasoning, careful review and final answer synthesis. Expensive.", "2.5", "10"),
    ("gpt-4o-mini", "Fast, cheap general model; good for extraction, short answers and simple drafting.", "0.15", "0.6"),
    ("qwen/qwen-2.5-72b-instruct", "Large open instruction model; solid at multi-step QA and code at low cost.", "0.12", "0.39"),
    ("qwen/qwen3-14b", "Mid-size open model; cheap drafting, brainstorming and candidate generation.", "0.06", "0.24"),
    ("qwen/qwq-32b", "Open reasoning model; long chains of thought for math and verification.", "0.15", "0.2"),
];

/// Shared backbone of the three meta-agents; not offered to workflow roles.
pub const META_BACKBONE: (&str, &str, &str, &str) =
    ("qwen/qwen3-8b", "Small open model used to run the generator, implementer and rectifier.", "0.035", "0.138");

impl Catalog {
    pub fn new() -> Self {
        Catalog::default()
    }

    /// The five-member pool plus the meta-agent backbone.
    pub fn seed() -> Self {
        let mut c = Catalog::new();
        for (id, desc, pin, pout) in SEED_POOL {
            c.register(BackboneCard::new(id, desc, pin, pout)).expect("seed ids are distinct");
        }
        let (id, desc, pin, pout) = META_BACKBONE;
        c.register(BackboneCard { pool: false, ..BackboneCard::new(id, desc, pin, pout) }).expect("seed ids are distinct");
        c
    }

    pub fn register(&mut self, card: BackboneCard) -> Result<(), CatalogError> {
        if self.get(&card.id).is_some() {
            return Err(CatalogError::DuplicateBackbone(card.id));
        }
        if card.description.trim().is_empty() {
            return Err(CatalogError::EmptyDescription(card.id));
        }
        self.cards.push(card);
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, CatalogError> {
        let file: CatalogFile = toml::from_str(text).map_err(|e| CatalogError::Malformed(e.to_string()))?;
        let mut c = Catalog::new();
        for card in file.backbone {
            c.register(card)?;
        }
        Ok(c)
    }

    /// Point every backbone at one endpoint.
    pub fn set_endpoint(&mut self, endpoint: &str) {
        for c in &mut self.cards {
            c.endpoint = endpoint.to_string();
        }
    }

    pub fn get(&self, id: &str) -> Option<&BackboneCard> {
        self.cards.iter().find(|c| c.id == id)
    }

    pub fn cards(&self) -> &[BackboneCard] {
        &self.cards
    }

    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }

    /// Backbones the implementer may assign, in registration order.
    pub fn pool(&self) -> impl Iterator<Item = &BackboneCard> {
        self.cards.iter().filter(|c| c.pool)
    }

    pub fn pool_ids(&self) -> BTreeSet<String> {
        self.pool().map(|c| c.id.clone()).collect()
    }

    /// Listing fed to the implementer: one line per pool backbone.
    pub fn describe_pool(&self) -> String {
        let mut out = String::new();
        for c in self.pool() {
            let _ = writeln!(out, "- {}: {} (input {}/1M tokens, output {}/1M tokens)", c.id, c.description, c.price_in, c.price_out);
        }
        out
    }
}

impl BackbonePool for Catalog {
    fn contains_backbone(&self, id: &str) -> bool {
        self.pool().any(|c| c.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_pool_and_duplicates() {
        let mut c = Catalog::seed();
        assert_eq!(c.pool().count(), 5);
        assert_eq!(c.len(), 6);
        let ids: Vec<_> = c.cards().iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids[0], "gpt-4o");
        assert_eq!(c.register(BackboneCard::new("gpt-4o", "x", "1", "1")), Err(CatalogError::DuplicateBackbone("gpt-4o".into())));
        assert!(Catalog::new().cards().is_empty());
        assert!(c.contains_backbone("qwen/qwq-32b"));
        assert!(!c.contains_backbone(META_BACKBONE.0));
    }

    #[test]
    fn hand_worked_cost() {
        let card = BackboneCard::new("gpt-4o", "x", "2.5", "10");
        assert_eq!(card.cost(400, 100), "0.002".parse().unwrap());
        assert_eq!(card.cost(0, 0), Money::ZERO);
        assert_eq!(BackboneCard::new("free", "x", "0", "0").cost(12345, 678), Money::ZERO);
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
[[backbone]]
id = "a"
endpoint = "http://localhost:1"
model_name = "a-model"
description = "first"
price_in = 0.15
price_out = "0.6"

[[backbone]]
id = "meta"
endpoint = "http://localhost:1"
model_name = "m"
description = "meta"
price_in = 0
price_out = 0
pool = false
"#;
        let c = Catalog::from_toml(text).unwrap();
        assert_eq!(c.get("a").unwrap().price_in, PricePerMillion::from_micros(150_000));
        assert_eq!(c.get("a").unwrap().price_out, PricePerMillion::from_micros(600_000));
        assert_eq!(c.pool_ids().len(), 1);
        let dup = format!("{text}\n[[backbone]]\nid = \"a\"\nendpoint = \"\"\nmodel_name = \"\"\ndescription = \"d\"\nprice_in = 1\nprice_out = 1\n");
        assert_eq!(Catalog::from_toml(&dup), Err(CatalogError::DuplicateBackbone("a".into())));
    }
}
