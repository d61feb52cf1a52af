//! Pipeline stages behind the subcommands.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use metasql_core::corpus::{self, AssembleInput, GenerationConfig};
use metasql_core::diversify::{self, InstructionPool, PoolSource};
use metasql_core::knowledge::{generate_knowledge, KnowledgeSample, Phrasings};
use metasql_core::manifest::{build_manifest, catalog_hash, TokenManifest};
use metasql_core::sql::{analyze_sql, SqlAnalysis};
use metasql_core::template::{self, FilterValue, MetricDef, QaPair, TemplatePair};
use metasql_core::{cot, ddl, Catalog, Corpus, CotAnswer, Relationship, Split, TaskType};
use metasql_eval::{Database, DbError, EvalCase, EvalReport};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::io;
use crate::rephrase::HttpRephraser;

pub struct Inputs {
    pub catalog: Catalog,
    pub templates: Vec<TemplatePair>,
    pub metrics: Vec<MetricDef>,
    pub filters: Vec<FilterValue>,
}

pub fn load_catalog(path: &Path) -> Result<Catalog, CliError> {
    Ok(Catalog::from_json(&io::read_text(path)?)?)
}

/// Loads and cross-validates the catalog, templates, metrics and filters.
pub fn load_inputs(cfg: &PipelineConfig) -> Result<Inputs, CliError> {
    let inputs = Inputs {
        catalog: load_catalog(&cfg.catalog)?,
        templates: io::read_json(&cfg.templates)?,
        metrics: io::read_json(&cfg.metrics)?,
        filters: io::read_json(&cfg.filters)?,
    };
    template::validate(&inputs.catalog, &inputs.templates, &inputs.metrics, &inputs.filters)?;
    Ok(inputs)
}

/// Catalog JSON, or DDL text plus an optional relationship list.
pub fn ingest(input: &Path, relationships: Option<&Path>) -> Result<Catalog, CliError> {
    let text = io::read_text(input)?;
    let is_json = input.extension().is_some_and(|e| e == "json");
    if is_json {
        if relationships.is_some() {
            return Err(CliError::Usage(
                "--relationships applies to DDL input only; JSON catalogs declare their own".into(),
            ));
        }
        return Ok(Catalog::from_json(&text)?);
    }
    let parsed = ddl::parse_ddl(&text)?;
    match relationships {
        None => Ok(parsed),
        Some(path) => {
            let rels: Vec<Relationship> = io::read_json(path)?;
            Ok(Catalog::new(parsed.tables().to_vec(), rels)?)
        }
    }
}

pub fn expand(inputs: &Inputs) -> Result<Vec<QaPair>, CliError> {
    Ok(template::expand(&inputs.templates, &inputs.metrics, &inputs.filters)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CotRecord {
    pub template_id: String,
    pub metric_id: String,
    pub filter_id: String,
    pub question: String,
    pub analysis: SqlAnalysis,
    pub cot: CotAnswer,
}

pub fn derive_cot(catalog: &Catalog, qa: &[QaPair]) -> Result<Vec<CotRecord>, CliError> {
    qa.iter()
        .map(|q| {
            let analysis = analyze_sql(&q.answer_sql, catalog)?;
            let answer = cot::build_cot_answer(q, &analysis);
            Ok(CotRecord {
                template_id: q.template_id.clone(),
                metric_id: q.metric_id.clone(),
                filter_id: q.filter_id.clone(),
                question: q.question.clone(),
                analysis,
                cot: answer,
            })
        })
        .collect()
}

pub fn phrasings(cfg: &PipelineConfig) -> Result<Phrasings, CliError> {
    let mut p = Phrasings::default();
    for (subtask, path) in &cfg.phrasings {
        p.set(*subtask, diversify::parse_variant_file(&io::read_text(path)?))?;
    }
    Ok(p)
}

pub fn knowledge(cfg: &PipelineConfig, catalog: &Catalog) -> Result<Vec<KnowledgeSample>, CliError> {
    Ok(generate_knowledge(
        catalog,
        &cfg.knowledge_subtasks,
        &phrasings(cfg)?,
        cfg.seed,
    )?)
}

/// Uses the rephrase client when an endpoint is configured, with the static
/// variant file as fallback; otherwise the static file alone.
pub fn instruction_pool(cfg: &PipelineConfig) -> Result<InstructionPool, CliError> {
    let k = cfg.instruction_pool_size;
    let fallback = match &cfg.instruction_variants {
        Some(path) => Some(diversify::parse_variant_file(&io::read_text(path)?)),
        None => None,
    };
    let settings = cfg.rephrase_settings();
    let pool = match HttpRephraser::from_settings(&settings) {
        Some(client) => {
            log::info!(
                "requesting {} rephrasings from {}",
                k.saturating_sub(1),
                client.endpoint()
            );
            diversify::build_pool(
                &cfg.base_instruction,
                k,
                PoolSource::Client {
                    client: &client,
                    retry_budget: settings.retry_budget,
                    fallback,
                },
            )?
        }
        None => diversify::build_pool(
            &cfg.base_instruction,
            k,
            PoolSource::Static(fallback.unwrap_or_default()),
        )?,
    };
    Ok(pool)
}

pub fn manifest(cfg: &PipelineConfig, catalog: &Catalog) -> Result<TokenManifest, CliError> {
    Ok(build_manifest(catalog, cfg.include_metadata_tokens)?)
}

/// `dir/name.jsonl` next to `dir/name.config.json`.
pub fn config_sibling(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.config.json"))
}

pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<Vec<PathBuf>, CliError> {
    io::write_atomic(path, corpus.to_jsonl()?.as_bytes())?;
    let sibling = config_sibling(path);
    io::write_atomic(&sibling, corpus.config_json().as_bytes())?;
    Ok(vec![path.to_path_buf(), sibling])
}

/// Reads a corpus JSONL and its sibling config if present.
pub fn read_corpus(path: &Path, split: Split, seed: u64) -> Result<Corpus, CliError> {
    let sibling = config_sibling(path);
    let config = if sibling.is_file() {
        io::read_json(&sibling)?
    } else {
        GenerationConfig {
            seed,
            ..GenerationConfig::default()
        }
    };
    let text = io::read_text(path)?;
    Corpus::from_jsonl(&text, split, config).map_err(|e| match e {
        corpus::CorpusError::Jsonl { line, message } => CliError::Input {
            path: path.to_path_buf(),
            line,
            message,
        },
        other => other.into(),
    })
}

pub fn ladder_path(dir: &Path, size: usize) -> PathBuf {
    dir.join("ladder").join(format!("train_{size}.jsonl"))
}

/// Everything `all` produces, before writing.
pub struct Artifacts {
    pub pool: InstructionPool,
    pub manifest: TokenManifest,
    pub train: Corpus,
    pub test: Corpus,
    pub test_cot: Corpus,
    pub ladder: Vec<Corpus>,
}

/// Chains expansion, CoT derivation, knowledge generation, diversification,
/// assembly, splitting and the manifest.
///
/// Only schema samples are split by table. CoT samples follow their schema
/// pair: those of test pairs go to a separate held-out file. Knowledge
/// samples are training-only.
pub fn build_all(cfg: &PipelineConfig) -> Result<Artifacts, CliError> {
    let inputs = load_inputs(cfg)?;
    let qa = expand(&inputs)?;
    log::info!("expanded {} question/SQL pairs", qa.len());
    let cot: Vec<CotAnswer> = derive_cot(&inputs.catalog, &qa)?.into_iter().map(|r| r.cot).collect();
    let kn = knowledge(cfg, &inputs.catalog)?;
    let pool = instruction_pool(cfg)?;
    let mut full = corpus::assemble(&AssembleInput {
        catalog: &inputs.catalog,
        qa: &qa,
        include_schema: true,
        cot: Some(&cot),
        knowledge: Some(&kn),
        structures: cfg.structures,
        schema_mode: cfg.schema_mode,
        dynamic_budget: cfg.dynamic_budget,
        pool: &pool,
        seed: cfg.seed,
    })?;
    let hash = catalog_hash(&inputs.catalog);
    full.generation_config.source_catalog_hash = Some(hash);
    full.generation_config.test_size = Some(cfg.test_size);

    let family = |t: TaskType| Corpus {
        samples: full.samples.iter().filter(|s| s.meta.task_type == t).cloned().collect(),
        split: Split::Train,
        generation_config: full.generation_config.clone(),
    };
    let (schema_train, test) = corpus::split_balanced(&family(TaskType::Schema), cfg.test_size, cfg.seed)?;
    let held_out: BTreeSet<usize> = test.samples.iter().filter_map(|s| s.meta.pair_index).collect();
    let (test_cot, cot_train): (Vec<_>, Vec<_>) = family(TaskType::Cot)
        .samples
        .into_iter()
        .partition(|s| s.meta.pair_index.is_some_and(|i| held_out.contains(&i)));

    let mut train_samples = schema_train.samples;
    train_samples.extend(cot_train);
    train_samples.extend(family(TaskType::Knowledge).samples);
    train_samples.sort_by(|a, b| a.meta.sample_id.cmp(&b.meta.sample_id));
    let train = Corpus {
        samples: train_samples,
        split: Split::Train,
        generation_config: full.generation_config.clone(),
    };
    let test_cot = Corpus {
        samples: test_cot,
        split: Split::Test,
        generation_config: full.generation_config.clone(),
    };
    let ladder = corpus::subset_ladder(&train, &cfg.ladder_sizes, cfg.seed)?;
    let manifest = manifest(cfg, &inputs.catalog)?;
    Ok(Artifacts {
        pool,
        manifest,
        train,
        test,
        test_cot,
        ladder,
    })
}

pub fn write_all(cfg: &PipelineConfig, a: &Artifacts) -> Result<Vec<PathBuf>, CliError> {
    let dir = &cfg.output_dir;
    let mut written = Vec::new();
    written.extend(write_corpus(&dir.join("train.jsonl"), &a.train)?);
    written.extend(write_corpus(&dir.join("test.jsonl"), &a.test)?);
    written.extend(write_corpus(&dir.join("test_cot.jsonl"), &a.test_cot)?);
    for rung in &a.ladder {
        let size = rung.generation_config.ladder_size.unwrap_or(rung.len());
        written.extend(write_corpus(&ladder_path(dir, size), rung)?);
    }
    let manifest = dir.join("token_manifest.json");
    io::write_atomic(&manifest, a.manifest.to_json().as_bytes())?;
    written.push(manifest);
    let pool = dir.join("instruction_pool.json");
    io::write_atomic(&pool, io::to_pretty(&a.pool).as_bytes())?;
    written.push(pool);
    let echo = dir.join("pipeline_config.json");
    io::write_atomic(&echo, io::to_pretty(cfg).as_bytes())?;
    written.push(echo);
    Ok(written)
}

/// Opens the database named on the command line or in the config.
pub fn open_database(cfg: &PipelineConfig, db: Option<&Path>) -> Result<Database, CliError> {
    let name = cfg.database_name();
    if let Some(path) = db {
        return Ok(Database::open(path, name)?);
    }
    let Some(db_cfg) = &cfg.database else {
        return Err(DbError::Missing("no database configured".into()).into());
    };
    if let Some(path) = &db_cfg.path {
        return Ok(Database::open(path, name)?);
    }
    if let Some(script) = &db_cfg.seed_script {
        if !script.is_file() {
            return Err(DbError::Missing(script.display().to_string()).into());
        }
        return Ok(Database::from_seed_script(&io::read_text(script)?, name)?);
    }
    Err(DbError::Missing("no database path or seed script configured".into()).into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub prediction: String,
}

/// Joins model predictions to held-out samples. Samples with no prediction
/// are scored with an empty query.
pub fn cases_from_predictions(
    test: &Corpus,
    predictions: &[Prediction],
    database_ref: &str,
) -> Result<Vec<EvalCase>, CliError> {
    let ids = test.ids();
    if let Some(p) = predictions.iter().find(|p| !ids.contains(p.id.as_str())) {
        return Err(CliError::Usage(format!(
            "prediction `{}` has no matching test sample",
            p.id
        )));
    }
    let by_id: BTreeMap<&str, &str> = predictions
        .iter()
        .map(|p| (p.id.as_str(), p.prediction.as_str()))
        .collect();
    let mut cases = Vec::new();
    for s in &test.samples {
        let gold = match s.meta.task_type {
            TaskType::Schema => s.answer.clone(),
            TaskType::Cot => metasql_eval::extract_sql(&s.answer),
            TaskType::Knowledge => continue,
        };
        let predicted = by_id.get(s.meta.sample_id.as_str()).copied().unwrap_or_default();
        let mut case = EvalCase::new(s.meta.sample_id.clone(), predicted, gold, database_ref);
        case.task_type = Some(s.meta.task_type);
        case.schema_mode = s.meta.schema_mode;
        case.table = Some(s.meta.stratum().to_string()).filter(|t| !t.is_empty());
        cases.push(case);
    }
    Ok(cases)
}

pub fn write_report(path: &Path, report: &EvalReport) -> Result<(), CliError> {
    io::write_atomic(path, io::to_pretty(report).as_bytes())
}
