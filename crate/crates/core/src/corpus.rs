//! Corpus assembly, stratified splitting, size ladders and JSONL I/O.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::cot::{CotAnswer, COT_INSTRUCTION};
use crate::diversify::{self, InstructionPool};
use crate::knowledge::KnowledgeSample;
use crate::prompt::{
    self, PromptError, PromptSample, PromptStructure, SampleMeta, TaskType, COT_CLAIMER, KNOWLEDGE_CLAIMER,
    SQL_EXPERT_CLAIMER,
};
use crate::schema::{self, SchemaError, SchemaMode};
use crate::seed;
use crate::sql::{self, SqlError};
use crate::template::QaPair;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{family} samples cannot use the {structure} structure")]
    IncompatibleStructure {
        family: TaskType,
        structure: PromptStructure,
    },
    #[error("{cot} CoT answers for {qa} question/SQL pairs")]
    CotMismatch { qa: usize, cot: usize },
    #[error("sample {id}: {source}")]
    Schema { id: String, source: SchemaError },
    #[error("sample {id}: {source}")]
    Sql { id: String, source: SqlError },
    #[error("sample {id}: {source}")]
    Prompt { id: String, source: PromptError },
    #[error("sample {id}: {source}")]
    Diversify {
        id: String,
        source: diversify::DiversifyError,
    },
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("stratum `{stratum}` holds {available} samples, quota is {quota}")]
    Stratum {
        stratum: String,
        available: usize,
        quota: usize,
    },
    #[error("test size {0} requested from a corpus without strata")]
    NoStrata(usize),
    #[error("ladder size {size} exceeds the {available} available samples")]
    Ladder { size: usize, available: usize },
    #[error("line {line}: {message}")]
    Jsonl { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// Prompt structure used for each sample family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyStructures {
    pub schema: PromptStructure,
    pub cot: PromptStructure,
    pub knowledge: PromptStructure,
}

impl Default for FamilyStructures {
    fn default() -> Self {
        FamilyStructures {
            schema: PromptStructure::MetaSchema,
            cot: PromptStructure::MetaCot,
            knowledge: PromptStructure::MetaKnowledge,
        }
    }
}

impl FamilyStructures {
    pub fn check(&self) -> Result<(), CorpusError> {
        let allowed = [
            (
                TaskType::Schema,
                self.schema,
                &[
                    PromptStructure::MetaSchema,
                    PromptStructure::BasePrompt1,
                    PromptStructure::BasePrompt2,
                ][..],
            ),
            (TaskType::Cot, self.cot, &[PromptStructure::MetaCot][..]),
            (
                TaskType::Knowledge,
                self.knowledge,
                &[PromptStructure::MetaKnowledge][..],
            ),
        ];
        for (family, structure, ok) in allowed {
            if !ok.contains(&structure) {
                return Err(CorpusError::IncompatibleStructure { family, structure });
            }
        }
        Ok(())
    }
}

/// Echo of the inputs that produced a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub seed: u64,
    pub schema_mode: Option<SchemaMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamic_budget: Option<usize>,
    pub structures: Option<FamilyStructures>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction_pool_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_catalog_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub samples: Vec<PromptSample>,
    pub split: Split,
    pub generation_config: GenerationConfig,
}

/// Inputs of [`assemble`]. `cot`, when present, is aligned with `qa`.
pub struct AssembleInput<'a> {
    pub catalog: &'a Catalog,
    pub qa: &'a [QaPair],
    pub include_schema: bool,
    pub cot: Option<&'a [CotAnswer]>,
    pub knowledge: Option<&'a [KnowledgeSample]>,
    pub structures: FamilyStructures,
    pub schema_mode: SchemaMode,
    pub dynamic_budget: Option<usize>,
    pub pool: &'a InstructionPool,
    pub seed: u64,
}

pub fn sample_id(task_type: TaskType, index: usize) -> String {
    let prefix = match task_type {
        TaskType::Schema => "schema",
        TaskType::Cot => "cot",
        TaskType::Knowledge => "kn",
    };
    format!("{prefix}-{:06}", index + 1)
}

fn schema_sample(input: &AssembleInput<'_>, index: usize, qa: &QaPair) -> Result<PromptSample, CorpusError> {
    let id = sample_id(TaskType::Schema, index);
    let structure = input.structures.schema;
    let analysis = sql::analyze_sql(&qa.answer_sql, input.catalog)
        .map_err(|source| CorpusError::Sql { id: id.clone(), source })?;
    let mut anchor = qa.anchor_set();
    anchor.extend(analysis.columns);
    let block = schema::schema_context(
        input.catalog,
        input.schema_mode,
        &anchor,
        seed::derive(input.seed, &format!("schema/{id}")),
        input.dynamic_budget,
    )
    .map_err(|source| CorpusError::Schema { id: id.clone(), source })?;
    let system = match structure {
        PromptStructure::BasePrompt2 => block,
        _ => prompt::system_block(SQL_EXPERT_CLAIMER, Some(&block)),
    };
    let instruction = if structure.has_instruction() {
        input.pool.base_instruction.clone()
    } else {
        String::new()
    };
    let mut meta = SampleMeta::new(id, TaskType::Schema);
    meta.template_id = Some(qa.template_id.clone());
    meta.schema_mode = Some(input.schema_mode);
    meta.pair_index = Some(index);
    meta.anchor_tables = qa.anchor_tables();
    Ok(PromptSample {
        system,
        instruction,
        question: qa.question.clone(),
        answer: qa.answer_sql.trim().to_string(),
        structure,
        meta,
    })
}

fn cot_sample(input: &AssembleInput<'_>, index: usize, qa: &QaPair, cot: &CotAnswer) -> PromptSample {
    let mut meta = SampleMeta::new(sample_id(TaskType::Cot, index), TaskType::Cot);
    meta.template_id = Some(qa.template_id.clone());
    meta.pair_index = Some(index);
    meta.anchor_tables = qa.anchor_tables();
    PromptSample {
        system: COT_CLAIMER.to_string(),
        instruction: COT_INSTRUCTION.to_string(),
        question: qa.question.clone(),
        answer: cot.render(),
        structure: input.structures.cot,
        meta,
    }
}

fn knowledge_sample(input: &AssembleInput<'_>, index: usize, k: &KnowledgeSample) -> PromptSample {
    let mut meta = SampleMeta::new(sample_id(TaskType::Knowledge, index), TaskType::Knowledge);
    meta.subtask = Some(k.subtask);
    meta.anchor_tables = k.tables();
    PromptSample {
        system: KNOWLEDGE_CLAIMER.to_string(),
        instruction: String::new(),
        question: k.question.clone(),
        answer: k.answer.clone(),
        structure: input.structures.knowledge,
        meta,
    }
}

/// Builds one prompt sample per input record and checks that each renders.
///
/// Schema samples draw their instruction from the pool; CoT samples keep
/// the fixed four-step instruction. The result is sorted by sample id.
pub fn assemble(input: &AssembleInput<'_>) -> Result<Corpus, CorpusError> {
    input.structures.check()?;
    let mut samples = Vec::new();

    if input.include_schema {
        let mut schema_samples = input
            .qa
            .iter()
            .enumerate()
            .map(|(i, qa)| schema_sample(input, i, qa))
            .collect::<Result<Vec<_>, _>>()?;
        if input.structures.schema.has_instruction() {
            diversify::assign_instructions(
                &mut schema_samples,
                input.pool,
                seed::derive(input.seed, "instructions"),
            )
            .map_err(|source| CorpusError::Diversify {
                id: sample_id(TaskType::Schema, 0),
                source,
            })?;
        }
        samples.extend(schema_samples);
    }
    if let Some(cot) = input.cot {
        if cot.len() != input.qa.len() {
            return Err(CorpusError::CotMismatch {
                qa: input.qa.len(),
                cot: cot.len(),
            });
        }
        samples.extend(
            input
                .qa
                .iter()
                .zip(cot)
                .enumerate()
                .map(|(i, (qa, c))| cot_sample(input, i, qa, c)),
        );
    }
    if let Some(knowledge) = input.knowledge {
        samples.extend(knowledge.iter().enumerate().map(|(i, k)| knowledge_sample(input, i, k)));
    }

    for s in &samples {
        prompt::render(s).map_err(|source| CorpusError::Prompt {
            id: s.meta.sample_id.clone(),
            source,
        })?;
    }
    samples.sort_by(|a, b| a.meta.sample_id.cmp(&b.meta.sample_id));
    check_unique(&samples)?;

    Ok(Corpus {
        samples,
        split: Split::Train,
        generation_config: GenerationConfig {
            seed: input.seed,
            schema_mode: Some(input.schema_mode),
            dynamic_budget: input.dynamic_budget,
            structures: Some(input.structures),
            instruction_pool_size: Some(input.pool.len()),
            ..GenerationConfig::default()
        },
    })
}

fn check_unique(samples: &[PromptSample]) -> Result<(), CorpusError> {
    let mut seen = BTreeSet::new();
    for s in samples {
        if !seen.insert(s.meta.sample_id.as_str()) {
            return Err(CorpusError::DuplicateId(s.meta.sample_id.clone()));
        }
    }
    Ok(())
}

fn sorted(mut samples: Vec<PromptSample>) -> Vec<PromptSample> {
    samples.sort_by(|a, b| a.meta.sample_id.cmp(&b.meta.sample_id));
    samples
}

/// Test quota per stratum: `test_size / n`, with the remainder going one
/// each to the lexicographically first strata.
pub fn stratum_quotas<'a>(strata: impl IntoIterator<Item = &'a str>, test_size: usize) -> BTreeMap<&'a str, usize> {
    let strata: BTreeSet<&str> = strata.into_iter().collect();
    let n = strata.len();
    if n == 0 {
        return BTreeMap::new();
    }
    let (base, remainder) = (test_size / n, test_size % n);
    strata
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s, base + usize::from(i < remainder)))
        .collect()
}

/// Splits by primary anchor table so each stratum contributes its quota to
/// the test set.
pub fn split_balanced(corpus: &Corpus, test_size: usize, seed: u64) -> Result<(Corpus, Corpus), CorpusError> {
    let mut by_stratum: BTreeMap<&str, Vec<&PromptSample>> = BTreeMap::new();
    for s in &corpus.samples {
        by_stratum.entry(s.meta.stratum()).or_default().push(s);
    }
    if by_stratum.is_empty() && test_size > 0 {
        return Err(CorpusError::NoStrata(test_size));
    }
    let quotas = stratum_quotas(by_stratum.keys().copied(), test_size);
    let mut test_ids = BTreeSet::new();
    for (stratum, members) in &by_stratum {
        let quota = quotas[stratum];
        if members.len() < quota {
            return Err(CorpusError::Stratum {
                stratum: stratum.to_string(),
                available: members.len(),
                quota,
            });
        }
        let mut ids: Vec<&str> = members.iter().map(|s| s.meta.sample_id.as_str()).collect();
        ids.sort_unstable();
        ids.shuffle(&mut seed::rng(seed::derive(seed, &format!("split/{stratum}"))));
        test_ids.extend(ids.into_iter().take(quota));
    }
    let (test, train): (Vec<PromptSample>, Vec<PromptSample>) = corpus
        .samples
        .iter()
        .cloned()
        .partition(|s| test_ids.contains(s.meta.sample_id.as_str()));
    let config = GenerationConfig {
        test_size: Some(test_size),
        ..corpus.generation_config.clone()
    };
    Ok((
        Corpus {
            samples: sorted(train),
            split: Split::Train,
            generation_config: config.clone(),
        },
        Corpus {
            samples: sorted(test),
            split: Split::Test,
            generation_config: config,
        },
    ))
}

/// Nested training subsets: every size takes a prefix of one seeded
/// permutation, so smaller subsets are contained in larger ones.
pub fn subset_ladder(train: &Corpus, sizes: &[usize], seed: u64) -> Result<Vec<Corpus>, CorpusError> {
    if let Some(&size) = sizes.iter().find(|&&n| n > train.samples.len()) {
        return Err(CorpusError::Ladder {
            size,
            available: train.samples.len(),
        });
    }
    let mut order = sorted(train.samples.clone());
    order.shuffle(&mut seed::rng(seed::derive(seed, "ladder")));
    Ok(sizes
        .iter()
        .map(|&n| Corpus {
            samples: sorted(order[..n].to_vec()),
            split: Split::Train,
            generation_config: GenerationConfig {
                ladder_size: Some(n),
                ..train.generation_config.clone()
            },
        })
        .collect())
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    task_type: TaskType,
    structure: PromptStructure,
    prompt: String,
    completion: String,
    meta: SampleMeta,
}

impl Corpus {
    /// One JSON object per line: generation prefix as `prompt`, answer
    /// content as `completion`.
    pub fn to_jsonl(&self) -> Result<String, CorpusError> {
        let mut out = String::new();
        for s in &self.samples {
            let record = Record {
                id: s.meta.sample_id.clone(),
                task_type: s.meta.task_type,
                structure: s.structure,
                prompt: prompt::render_prefix(s).map_err(|source| CorpusError::Prompt {
                    id: s.meta.sample_id.clone(),
                    source,
                })?,
                completion: s.answer.clone(),
                meta: s.meta.clone(),
            };
            out.push_str(&serde_json::to_string(&record).expect("record serializes"));
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str, split: Split, generation_config: GenerationConfig) -> Result<Corpus, CorpusError> {
        let mut samples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| CorpusError::Jsonl { line: i + 1, message };
            let record: Record = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            if record.id != record.meta.sample_id {
                return Err(err(format!("id `{}` differs from meta.sample_id", record.id)));
            }
            let fields = prompt::parse_prefix(&record.prompt, record.structure).map_err(|e| err(e.to_string()))?;
            samples.push(PromptSample {
                system: fields.system,
                instruction: fields.instruction,
                question: fields.question,
                answer: record.completion,
                structure: record.structure,
                meta: record.meta,
            });
        }
        check_unique(&samples)?;
        Ok(Corpus {
            samples,
            split,
            generation_config,
        })
    }

    pub fn config_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.generation_config).expect("config serializes");
        text.push('\n');
        text
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ids(&self) -> BTreeSet<&str> {
        self.samples.iter().map(|s| s.meta.sample_id.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotas_give_remainder_to_first_strata() {
        let q = stratum_quotas(["c", "a", "b"], 8);
        assert_eq!(q.into_iter().collect::<Vec<_>>(), vec![("a", 3), ("b", 3), ("c", 2)]);
    }

    #[test]
    fn ids_are_zero_padded() {
        assert_eq!(sample_id(TaskType::Knowledge, 0), "kn-000001");
        assert_eq!(sample_id(TaskType::Schema, 41), "schema-000042");
    }

    #[test]
    fn cot_family_rejects_base_prompt() {
        let s = FamilyStructures {
            cot: PromptStructure::BasePrompt1,
            ..FamilyStructures::default()
        };
        assert!(matches!(s.check(), Err(CorpusError::IncompatibleStructure { .. })));
    }
}
