//! Tokenizer-extension manifest: structural tags plus table and column names.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::prompt::STRUCTURAL_TAGS;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("metadata name `{0}` collides with a structural tag; rename it in the catalog")]
pub struct ManifestCollision(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenManifest {
    #[serde(rename = "special_tokens")]
    pub structural_tags: Vec<String>,
    #[serde(rename = "added_tokens")]
    pub metadata_tokens: Vec<String>,
    pub source_catalog_hash: String,
}

/// Hex SHA-256 of the catalog's canonical JSON.
pub fn catalog_hash(catalog: &Catalog) -> String {
    Sha256::digest(catalog.canonical_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn build_manifest(catalog: &Catalog, include_metadata: bool) -> Result<TokenManifest, ManifestCollision> {
    let structural_tags: Vec<String> = STRUCTURAL_TAGS.iter().map(|t| t.to_string()).collect();
    let mut metadata_tokens = Vec::new();
    if include_metadata {
        let tables: BTreeSet<&str> = catalog.tables().iter().map(|t| t.name.as_str()).collect();
        let columns: BTreeSet<&str> = catalog
            .tables()
            .iter()
            .flat_map(|t| t.columns.iter().map(|c| c.name.as_str()))
            .collect();
        let mut seen = BTreeSet::new();
        for name in tables.into_iter().chain(columns) {
            if STRUCTURAL_TAGS.contains(&name) {
                return Err(ManifestCollision(name.to_string()));
            }
            if seen.insert(name) {
                metadata_tokens.push(name.to_string());
            }
        }
    }
    Ok(TokenManifest {
        structural_tags,
        metadata_tokens,
        source_catalog_hash: catalog_hash(catalog),
    })
}

impl TokenManifest {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }
}
