//! Instruction pools and seeded instruction assignment.
//!
//! A pool holds `k` distinct phrasings of one base instruction (the base is
//! always variant 0). Variants come from a rephrasing client or from a static
//! newline-delimited file. Each sample then draws its instruction uniformly,
//! with replacement, from the pool.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::PromptSample;
use crate::seed;

#[derive(Debug, Error)]
pub enum DiversifyError {
    #[error("pool size must be at least 1")]
    ZeroPool,
    #[error("static variant file holds {available} distinct variants, {needed} needed")]
    PoolTooSmall { available: usize, needed: usize },
    #[error("rephrase client unavailable: {0}")]
    Unreachable(String),
    #[error("rephrase request failed: {0}")]
    Request(String),
    #[error("instruction pool is empty")]
    EmptyPool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Llm,
    StaticFile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionPool {
    pub base_instruction: String,
    pub variants: Vec<String>,
    pub provenance: Provenance,
}

impl InstructionPool {
    /// A pool holding only the base instruction.
    pub fn single(base: impl Into<String>) -> Self {
        let base = base.into();
        InstructionPool {
            variants: vec![base.clone()],
            base_instruction: base,
            provenance: Provenance::StaticFile,
        }
    }

    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }
}

/// Produces one rephrasing of an instruction per call.
pub trait Rephraser {
    /// `attempt` counts calls for the same instruction, starting at 0, so an
    /// implementation can vary its request on retries.
    fn rephrase(&self, instruction: &str, attempt: u32) -> Result<String, DiversifyError>;
}

pub enum PoolSource<'a> {
    Client {
        client: &'a dyn Rephraser,
        /// Extra requests allowed in total for empty or duplicate replies.
        retry_budget: u32,
        /// Static variants used when the client cannot be reached.
        fallback: Option<Vec<String>>,
    },
    Static(Vec<String>),
}

/// Non-empty, trimmed lines of a variant file.
pub fn parse_variant_file(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

fn first_line(reply: &str) -> String {
    reply
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("")
        .to_string()
}

pub fn build_pool(base_instruction: &str, k: usize, source: PoolSource<'_>) -> Result<InstructionPool, DiversifyError> {
    if k == 0 {
        return Err(DiversifyError::ZeroPool);
    }
    match source {
        PoolSource::Static(lines) => from_static(base_instruction, k, &lines),
        PoolSource::Client {
            client,
            retry_budget,
            fallback,
        } => match from_client(base_instruction, k, client, retry_budget) {
            Err(DiversifyError::Unreachable(reason)) => match fallback {
                Some(lines) => {
                    log::warn!("rephrase client unreachable ({reason}); using static variants");
                    from_static(base_instruction, k, &lines)
                }
                None => Err(DiversifyError::Unreachable(reason)),
            },
            other => other,
        },
    }
}

fn from_static(base: &str, k: usize, lines: &[String]) -> Result<InstructionPool, DiversifyError> {
    let mut seen = BTreeSet::from([base.to_string()]);
    let mut variants = vec![base.to_string()];
    for line in lines {
        if variants.len() == k {
            break;
        }
        if seen.insert(line.clone()) {
            variants.push(line.clone());
        }
    }
    if variants.len() < k {
        return Err(DiversifyError::PoolTooSmall {
            available: variants.len() - 1,
            needed: k - 1,
        });
    }
    Ok(InstructionPool {
        base_instruction: base.to_string(),
        variants,
        provenance: Provenance::StaticFile,
    })
}

fn from_client(
    base: &str,
    k: usize,
    client: &dyn Rephraser,
    retry_budget: u32,
) -> Result<InstructionPool, DiversifyError> {
    let mut variants = vec![base.to_string()];
    let mut retries_left = retry_budget;
    let mut dropped = 0;
    for _ in 1..k {
        let mut attempt = 0;
        loop {
            let reply = first_line(&client.rephrase(base, attempt)?);
            attempt += 1;
            if !reply.is_empty() && !variants.contains(&reply) {
                variants.push(reply);
                break;
            }
            if retries_left == 0 {
                dropped += 1;
                break;
            }
            retries_left -= 1;
        }
    }
    if dropped > 0 {
        log::warn!(
            "dropped {dropped} duplicate rephrasings; pool reduced from {k} to {}",
            variants.len()
        );
    }
    Ok(InstructionPool {
        base_instruction: base.to_string(),
        variants,
        provenance: Provenance::Llm,
    })
}

/// Replaces each sample's instruction with a uniformly drawn pool variant.
pub fn assign_instructions(
    samples: &mut [PromptSample],
    pool: &InstructionPool,
    seed: u64,
) -> Result<(), DiversifyError> {
    if pool.is_empty() {
        return Err(DiversifyError::EmptyPool);
    }
    let mut rng = seed::rng(seed);
    for sample in samples {
        let index = rng.random_range(0..pool.len());
        sample.instruction = pool.variants[index].clone();
        sample.meta.instruction_variant = Some(index);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::cell::Cell;

    use super::*;

    struct Scripted {
        replies: Vec<&'static str>,
        calls: Cell<usize>,
    }

    impl Rephraser for Scripted {
        fn rephrase(&self, _: &str, _: u32) -> Result<String, DiversifyError> {
            let i = self.calls.get();
            self.calls.set(i + 1);
            Ok(self.replies.get(i).copied().unwrap_or("").to_string())
        }
    }

    struct Down;

    impl Rephraser for Down {
        fn rephrase(&self, _: &str, _: u32) -> Result<String, DiversifyError> {
            Err(DiversifyError::Unreachable("connection refused".into()))
        }
    }

    #[test]
    fn k_one_is_base_only() {
        let pool = build_pool("base", 1, PoolSource::Static(vec![])).unwrap();
        assert_eq!(pool.variants, vec!["base"]);
    }

    #[test]
    fn static_pool_takes_first_distinct() {
        let lines = parse_variant_file("a\n\nb\na\nbase\nc\nd\ne\n");
        let pool = build_pool("base", 5, PoolSource::Static(lines)).unwrap();
        assert_eq!(pool.variants, vec!["base", "a", "b", "c", "d"]);
    }

    #[test]
    fn static_pool_too_small() {
        let err = build_pool("base", 4, PoolSource::Static(vec!["a".into()])).unwrap_err();
        assert!(matches!(
            err,
            DiversifyError::PoolTooSmall {
                available: 1,
                needed: 3
            }
        ));
    }

    #[test]
    fn client_duplicates_are_retried_then_dropped() {
        let client = Scripted {
            replies: vec!["one\nextra", "one", "two", "two", "two"],
            calls: Cell::new(0),
        };
        let source = PoolSource::Client {
            client: &client,
            retry_budget: 2,
            fallback: None,
        };
        let pool = build_pool("base", 4, source).unwrap();
        assert_eq!(pool.variants, vec!["base", "one", "two"]);
        assert_eq!(pool.provenance, Provenance::Llm);
    }

    #[test]
    fn unreachable_client_without_fallback() {
        let source = PoolSource::Client {
            client: &Down,
            retry_budget: 0,
            fallback: None,
        };
        assert!(matches!(
            build_pool("base", 3, source),
            Err(DiversifyError::Unreachable(_))
        ));
    }

    #[test]
    fn unreachable_client_uses_fallback() {
        let source = PoolSource::Client {
            client: &Down,
            retry_budget: 0,
            fallback: Some(vec!["x".into(), "y".into()]),
        };
        let pool = build_pool("base", 3, source).unwrap();
        assert_eq!(pool.provenance, Provenance::StaticFile);
        assert_eq!(pool.len(), 3);
    }
}
