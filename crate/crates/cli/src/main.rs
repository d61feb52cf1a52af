use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use metasql_cli::config::{parse_structures, Overrides, PipelineConfig};
use metasql_cli::error::CliError;
use metasql_cli::{io, pipeline};
use metasql_core::corpus::{self, FamilyStructures};
use metasql_core::prompt::{self, PromptFields};
use metasql_core::{PromptStructure, SchemaMode, Split};
use metasql_eval::{evaluate, EvalCase};
use serde_json::json;

/// Meta-aware text-to-SQL corpus generation and execution evaluation.
#[derive(Parser)]
#[command(name = "metasql", version)]
struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Pipeline config JSON.
    #[arg(short, long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_mode)]
    schema_mode: Option<SchemaMode>,
    /// Per-family structures, e.g. `schema=base_prompt_1,cot=meta_cot`.
    #[arg(long, value_parser = parse_structures)]
    structures: Option<FamilyStructures>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<SchemaMode, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_structure(s: &str) -> Result<PromptStructure, String> {
    s.parse().map_err(|e| format!("{e}"))
}

#[derive(Subcommand)]
enum Command {
    /// Validate a catalog (JSON, or DDL with --relationships) and write canonical JSON.
    Ingest {
        input: PathBuf,
        #[arg(long)]
        relationships: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Expand templates into question/SQL pairs (qa.jsonl).
    Expand(ConfigArgs),
    /// Derive chain-of-thought answers for every pair (cot.jsonl).
    Cot(ConfigArgs),
    /// Generate catalog knowledge samples (knowledge.jsonl).
    Knowledge(ConfigArgs),
    /// Build the instruction pool (instruction_pool.json).
    Diversify(ConfigArgs),
    /// Render prompt fields from a JSON file into one structure.
    Render {
        #[arg(long, value_parser = parse_structure)]
        structure: PromptStructure,
        /// JSON object with system, instruction, question, answer.
        #[arg(long)]
        fields: PathBuf,
        /// Stop after the answer opener.
        #[arg(long)]
        prefix: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the tokenizer manifest (token_manifest.json).
    Manifest(ConfigArgs),
    /// Split a corpus JSONL into table-balanced train and test files.
    Split {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        test_size: Option<usize>,
    },
    /// Write nested training subsets of a corpus JSONL.
    Ladder {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated sizes; defaults to the config's ladder_sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
    },
    /// Score predictions by execution against the fixture database.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        /// JSONL of evaluation cases.
        #[arg(long, conflicts_with_all = ["predictions", "test"])]
        cases: Option<PathBuf>,
        /// JSONL of {id, prediction}, joined to --test.
        #[arg(long, requires = "test")]
        predictions: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        /// SQLite file to use instead of the configured database.
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the whole generation pipeline.
    All(ConfigArgs),
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig, CliError> {
        PipelineConfig::load(
            &self.config,
            &Overrides {
                seed: self.seed,
                schema_mode: self.schema_mode,
                structures: self.structures,
                output_dir: self.out.clone(),
            },
        )
    }
}

fn run(command: Command) -> Result<Vec<PathBuf>, CliError> {
    match command {
        Command::Ingest {
            input,
            relationships,
            out,
        } => {
            let catalog = pipeline::ingest(&input, relationships.as_deref())?;
            io::write_atomic(&out, format!("{}\n", catalog.to_json()).as_bytes())?;
            Ok(vec![out])
        }
        Command::Expand(args) => {
            let cfg = args.load()?;
            let qa = pipeline::expand(&pipeline::load_inputs(&cfg)?)?;
            let path = cfg.output_dir.join("qa.jsonl");
            io::write_atomic(&path, io::to_jsonl(&qa).as_bytes())?;
            Ok(vec![path])
        }
        Command::Cot(args) => {
            let cfg = args.load()?;
            let inputs = pipeline::load_inputs(&cfg)?;
            let records = pipeline::derive_cot(&inputs.catalog, &pipeline::expand(&inputs)?)?;
            let path = cfg.output_dir.join("cot.jsonl");
            io::write_atomic(&path, io::to_jsonl(&records).as_bytes())?;
            Ok(vec![path])
        }
        Command::Knowledge(args) => {
            let cfg = args.load()?;
            let samples = pipeline::knowledge(&cfg, &pipeline::load_catalog(&cfg.catalog)?)?;
            let path = cfg.output_dir.join("knowledge.jsonl");
            io::write_atomic(&path, io::to_jsonl(&samples).as_bytes())?;
            Ok(vec![path])
        }
        Command::Diversify(args) => {
            let cfg = args.load()?;
            let pool = pipeline::instruction_pool(&cfg)?;
            let path = cfg.output_dir.join("instruction_pool.json");
            io::write_atomic(&path, io::to_pretty(&pool).as_bytes())?;
            Ok(vec![path])
        }
        Command::Render {
            structure,
            fields,
            prefix,
            out,
        } => {
            let fields: PromptFields = io::read_json(&fields)?;
            let mut text = prompt::render_fields(&fields, structure)?;
            if prefix {
                let sample = metasql_core::PromptSample {
                    system: fields.system,
                    instruction: fields.instruction,
                    question: fields.question,
                    answer: fields.answer,
                    structure,
                    meta: metasql_core::SampleMeta::new("render", metasql_core::TaskType::Schema),
                };
                text = prompt::render_prefix(&sample)?;
            }
            match out {
                Some(path) => {
                    io::write_atomic(&path, text.as_bytes())?;
                    Ok(vec![path])
                }
                None => {
                    print!("{text}");
                    Ok(vec![])
                }
            }
        }
        Command::Manifest(args) => {
            let cfg = args.load()?;
            let m = pipeline::manifest(&cfg, &pipeline::load_catalog(&cfg.catalog)?)?;
            let path = cfg.output_dir.join("token_manifest.json");
            io::write_atomic(&path, m.to_json().as_bytes())?;
            Ok(vec![path])
        }
        Command::Split {
            config,
            input,
            test_size,
        } => {
            let cfg = config.load()?;
            let source = pipeline::read_corpus(&input, Split::Train, cfg.seed)?;
            let (train, test) = corpus::split_balanced(&source, test_size.unwrap_or(cfg.test_size), cfg.seed)?;
            let mut written = pipeline::write_corpus(&cfg.output_dir.join("train.jsonl"), &train)?;
            written.extend(pipeline::write_corpus(&cfg.output_dir.join("test.jsonl"), &test)?);
            Ok(written)
        }
        Command::Ladder { config, input, sizes } => {
            let cfg = config.load()?;
            let sizes = if sizes.is_empty() {
                cfg.ladder_sizes.clone()
            } else {
                sizes
            };
            let train = pipeline::read_corpus(&input, Split::Train, cfg.seed)?;
            let mut written = Vec::new();
            for rung in corpus::subset_ladder(&train, &sizes, cfg.seed)? {
                let size = rung.len();
                written.extend(pipeline::write_corpus(
                    &pipeline::ladder_path(&cfg.output_dir, size),
                    &rung,
                )?);
            }
            Ok(written)
        }
        Command::Eval {
            config,
            cases,
            predictions,
            test,
            db,
            report,
        } => {
            let cfg = config.load()?;
            let database = pipeline::open_database(&cfg, db.as_deref())?;
            let cases: Vec<EvalCase> = match (cases, predictions, test) {
                (Some(path), _, _) => io::read_jsonl(&path)?,
                (None, predictions, Some(test)) => {
                    let test = pipeline::read_corpus(&test, Split::Test, cfg.seed)?;
                    let predictions = match predictions {
                        Some(p) => io::read_jsonl(&p)?,
                        None => Vec::new(),
                    };
                    pipeline::cases_from_predictions(&test, &predictions, database.name())?
                }
                _ => {
                    return Err(CliError::Usage(
                        "eval needs --cases or --predictions with --test".into(),
                    ))
                }
            };
            let result = evaluate(&cases, &database, &cfg.eval)?;
            let path = report.unwrap_or_else(|| cfg.output_dir.join("eval_report.json"));
            pipeline::write_report(&path, &result)?;
            print!("{}", result.summary());
            Ok(vec![path])
        }
        Command::All(args) => {
            let cfg = args.load()?;
            let artifacts = pipeline::build_all(&cfg)?;
            pipeline::write_all(&cfg, &artifacts)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
    match run(cli.command) {
        Ok(written) => {
            let artifacts: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
            if !artifacts.is_empty() {
                eprintln!("{}", json!({ "artifacts": artifacts }));
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
