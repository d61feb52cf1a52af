//! Pipeline configuration file. Relative paths resolve against the
//! directory holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use metasql_core::corpus::FamilyStructures;
use metasql_core::{SchemaMode, Subtask};
use metasql_eval::EvalSettings;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub catalog: PathBuf,
    pub templates: PathBuf,
    pub metrics: PathBuf,
    pub filters: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction_variants: Option<PathBuf>,
    /// Replacement phrasing files per knowledge subtask.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub phrasings: BTreeMap<Subtask, PathBuf>,
    pub base_instruction: String,
    #[serde(default = "one")]
    pub instruction_pool_size: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    #[serde(default = "exact")]
    pub schema_mode: SchemaMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamic_budget: Option<usize>,
    #[serde(default)]
    pub structures: FamilyStructures,
    #[serde(default = "all_subtasks")]
    pub knowledge_subtasks: Vec<Subtask>,
    #[serde(default = "yes")]
    pub include_metadata_tokens: bool,
    pub test_size: usize,
    #[serde(default)]
    pub ladder_sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub database: Option<DatabaseConfig>,
    #[serde(default)]
    pub eval: EvalSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rephrase: Option<RephraseConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatabaseConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Existing SQLite file, opened read-only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// SQL script that creates and fills an in-memory database.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_script: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RephraseConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preamble: Option<String>,
    #[serde(default = "retry_budget")]
    pub retry_budget: u32,
    #[serde(default = "request_timeout_ms")]
    pub timeout_ms: u64,
}

impl Default for RephraseConfig {
    fn default() -> Self {
        RephraseConfig {
            endpoint: None,
            model: None,
            preamble: None,
            retry_budget: retry_budget(),
            timeout_ms: request_timeout_ms(),
        }
    }
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn exact() -> SchemaMode {
    SchemaMode::Exact
}

fn all_subtasks() -> Vec<Subtask> {
    Subtask::ALL.to_vec()
}

fn retry_budget() -> u32 {
    8
}

fn request_timeout_ms() -> u64 {
    30_000
}

/// Command-line values that win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub schema_mode: Option<SchemaMode>,
    pub structures: Option<FamilyStructures>,
    pub output_dir: Option<PathBuf>,
}

impl PipelineConfig {
    /// Reads, resolves paths, applies overrides and checks that every
    /// referenced input file exists.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = crate::io::read_text(path)?;
        let mut config: PipelineConfig = serde_json::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve(base);
        config.apply(overrides);
        config.check(path)?;
        Ok(config)
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.catalog);
        join(&mut self.templates);
        join(&mut self.metrics);
        join(&mut self.filters);
        join(&mut self.output_dir);
        if let Some(p) = &mut self.instruction_variants {
            join(p);
        }
        for p in self.phrasings.values_mut() {
            join(p);
        }
        if let Some(db) = &mut self.database {
            if let Some(p) = &mut db.path {
                join(p);
            }
            if let Some(p) = &mut db.seed_script {
                join(p);
            }
        }
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(mode) = o.schema_mode {
            self.schema_mode = mode;
        }
        if let Some(s) = o.structures {
            self.structures = s;
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = dir.clone();
        }
    }

    fn check(&self, path: &Path) -> Result<(), CliError> {
        let invalid = |message: String| CliError::Config {
            path: path.to_path_buf(),
            message,
        };
        let mut inputs = vec![&self.catalog, &self.templates, &self.metrics, &self.filters];
        inputs.extend(&self.instruction_variants);
        inputs.extend(self.phrasings.values());
        for p in inputs {
            if !p.is_file() {
                return Err(invalid(format!("input file {} does not exist", p.display())));
            }
        }
        if self.instruction_pool_size == 0 {
            return Err(invalid("instruction_pool_size must be at least 1".into()));
        }
        self.structures.check().map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }

    /// The rephrase section with environment overrides applied.
    pub fn rephrase_settings(&self) -> RephraseConfig {
        let mut r = self.rephrase.clone().unwrap_or_default();
        if let Ok(endpoint) = std::env::var(crate::rephrase::ENDPOINT_VAR) {
            if !endpoint.trim().is_empty() {
                r.endpoint = Some(endpoint);
            }
        }
        if let Ok(model) = std::env::var(crate::rephrase::MODEL_VAR) {
            r.model = Some(model);
        }
        r
    }

    pub fn database_name(&self) -> String {
        let db = self.database.as_ref();
        if let Some(name) = db.and_then(|d| d.name.clone()) {
            return name;
        }
        db.and_then(|d| d.path.as_ref().or(d.seed_script.as_ref()))
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "fixture".into())
    }
}

/// Parses `schema=base_prompt_1,cot=meta_cot`; unnamed families keep their
/// defaults.
pub fn parse_structures(text: &str) -> Result<FamilyStructures, String> {
    let mut s = FamilyStructures::default();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (family, value) = part
            .split_once('=')
            .ok_or_else(|| format!("expected family=structure, got `{part}`"))?;
        let structure = value.trim().parse().map_err(|e| format!("{e}"))?;
        match family.trim() {
            "schema" => s.schema = structure,
            "cot" => s.cot = structure,
            "knowledge" => s.knowledge = structure,
            other => return Err(format!("unknown family `{other}`")),
        }
    }
    s.check().map_err(|e| e.to_string())?;
    Ok(s)
}
