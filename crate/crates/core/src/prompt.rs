//! The five prompt layouts and their exact byte rendering.
//!
//! Tagged layouts (`meta_schema`, `meta_cot`, `meta_knowledge`) wrap the
//! document in `<s>` ... `</s>`; every block is its opening tag, a newline,
//! the content verbatim, a newline, and `<end>`:
//!
//! ```text
//! <s>
//! <system>
//! Assistant claimer: SQL expert
//! Schema: CREATE TABLE sales (
//! ...
//! )
//! <end>
//! <instruction>
//! ...
//! <end>
//! <question>
//! ...
//! <end>
//! <answer>
//! ...
//! <end>
//! </s>
//! ```
//!
//! `meta_knowledge` has no instruction block. `base_prompt_1` uses the
//! `[INST]`/`<<SYS>>` wrapper and `base_prompt_2` three `[Schema]`,
//! `[Question]`, `[Answer]` line prefixes with no system claimer.
//!
//! The generation prefix used at evaluation time is the rendering cut right
//! after the answer opener, with the answer content absent.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::Subtask;
use crate::schema::SchemaMode;

pub const SQL_EXPERT_CLAIMER: &str = "Assistant claimer: SQL expert";
pub const COT_CLAIMER: &str = "Assistant claimer: CoT SQL expert";
pub const KNOWLEDGE_CLAIMER: &str = "Assistant claimer: metadata knowledge assistant";

/// Structural tags of the tagged layouts, in manifest order.
pub const STRUCTURAL_TAGS: [&str; 7] = [
    "<s>",
    "</s>",
    "<system>",
    "<instruction>",
    "<question>",
    "<answer>",
    "<end>",
];

const BASE1_TAGS: [&str; 6] = ["<s>", "</s>", "[INST]", "[/INST]", "<<SYS>>", "<</SYS>>"];
const BASE2_TAGS: [&str; 3] = ["[Schema]", "[Question]", "[Answer]"];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("{field} contains the structural tag `{tag}`")]
    TagCollision { field: &'static str, tag: &'static str },
    #[error("{structure} requires a non-empty {field}")]
    MissingField {
        structure: PromptStructure,
        field: &'static str,
    },
    #[error("{structure} takes no {field}")]
    UnexpectedField {
        structure: PromptStructure,
        field: &'static str,
    },
    #[error("{structure} requires a single-line {field}")]
    MultilineField {
        structure: PromptStructure,
        field: &'static str,
    },
    #[error("malformed {structure} prompt at byte {offset}: expected {expected}")]
    Parse {
        structure: PromptStructure,
        offset: usize,
        expected: String,
    },
    #[error("unknown prompt structure `{0}`")]
    UnknownStructure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStructure {
    MetaSchema,
    MetaCot,
    MetaKnowledge,
    #[serde(rename = "base_prompt_1")]
    BasePrompt1,
    #[serde(rename = "base_prompt_2")]
    BasePrompt2,
}

impl PromptStructure {
    pub const ALL: [PromptStructure; 5] = [
        PromptStructure::MetaSchema,
        PromptStructure::MetaCot,
        PromptStructure::MetaKnowledge,
        PromptStructure::BasePrompt1,
        PromptStructure::BasePrompt2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptStructure::MetaSchema => "meta_schema",
            PromptStructure::MetaCot => "meta_cot",
            PromptStructure::MetaKnowledge => "meta_knowledge",
            PromptStructure::BasePrompt1 => "base_prompt_1",
            PromptStructure::BasePrompt2 => "base_prompt_2",
        }
    }

    pub fn is_tagged(self) -> bool {
        matches!(
            self,
            PromptStructure::MetaSchema | PromptStructure::MetaCot | PromptStructure::MetaKnowledge
        )
    }

    /// Delimiters that may not occur inside any field.
    pub fn tags(self) -> &'static [&'static str] {
        match self {
            PromptStructure::MetaSchema | PromptStructure::MetaCot | PromptStructure::MetaKnowledge => &STRUCTURAL_TAGS,
            PromptStructure::BasePrompt1 => &BASE1_TAGS,
            PromptStructure::BasePrompt2 => &BASE2_TAGS,
        }
    }

    pub fn has_instruction(self) -> bool {
        matches!(
            self,
            PromptStructure::MetaSchema | PromptStructure::MetaCot | PromptStructure::BasePrompt1
        )
    }

    /// Whether the layout carries a schema context.
    pub fn carries_schema(self) -> bool {
        matches!(
            self,
            PromptStructure::MetaSchema | PromptStructure::BasePrompt1 | PromptStructure::BasePrompt2
        )
    }
}

impl fmt::Display for PromptStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptStructure {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptStructure::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| PromptError::UnknownStructure(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    Schema,
    Cot,
    Knowledge,
}

impl TaskType {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskType::Schema => "schema",
            TaskType::Cot => "cot",
            TaskType::Knowledge => "knowledge",
        }
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub sample_id: String,
    pub task_type: TaskType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_mode: Option<SchemaMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction_variant: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtask: Option<Subtask>,
    /// Index of the source question/SQL pair, shared by its schema and CoT
    /// samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_index: Option<usize>,
    /// Tables the sample is about; the first one is its stratum.
    pub anchor_tables: Vec<String>,
}

impl SampleMeta {
    pub fn new(sample_id: impl Into<String>, task_type: TaskType) -> Self {
        SampleMeta {
            sample_id: sample_id.into(),
            task_type,
            template_id: None,
            schema_mode: None,
            instruction_variant: None,
            subtask: None,
            pair_index: None,
            anchor_tables: Vec::new(),
        }
    }

    pub fn stratum(&self) -> &str {
        self.anchor_tables.first().map_or("", String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSample {
    /// Claimer line plus optional `Schema:` block; for `base_prompt_2` the
    /// schema text alone.
    pub system: String,
    pub instruction: String,
    pub question: String,
    pub answer: String,
    pub structure: PromptStructure,
    pub meta: SampleMeta,
}

/// The four text blocks recovered from a rendered prompt.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptFields {
    pub system: String,
    pub instruction: String,
    pub question: String,
    pub answer: String,
}

impl PromptSample {
    pub fn fields(&self) -> PromptFields {
        PromptFields {
            system: self.system.clone(),
            instruction: self.instruction.clone(),
            question: self.question.clone(),
            answer: self.answer.clone(),
        }
    }
}

/// System block text: the claimer line, then `Schema: ` and the schema block.
pub fn system_block(claimer: &str, schema: Option<&str>) -> String {
    match schema {
        Some(schema) => format!("{claimer}\nSchema: {schema}"),
        None => claimer.to_string(),
    }
}

fn validate(fields: &PromptFields, structure: PromptStructure) -> Result<(), PromptError> {
    let named = [
        ("system", &fields.system),
        ("instruction", &fields.instruction),
        ("question", &fields.question),
        ("answer", &fields.answer),
    ];
    for (field, text) in named {
        if let Some(tag) = structure.tags().iter().find(|t| text.contains(*t)) {
            return Err(PromptError::TagCollision { field, tag });
        }
    }
    let missing = |field| PromptError::MissingField { structure, field };
    if fields.system.is_empty() {
        return Err(missing("system"));
    }
    if fields.question.is_empty() {
        return Err(missing("question"));
    }
    if structure.has_instruction() {
        if fields.instruction.is_empty() {
            return Err(missing("instruction"));
        }
    } else if !fields.instruction.is_empty() {
        return Err(PromptError::UnexpectedField {
            structure,
            field: "instruction",
        });
    }
    if structure == PromptStructure::BasePrompt1 && fields.question.contains('\n') {
        return Err(PromptError::MultilineField {
            structure,
            field: "question",
        });
    }
    Ok(())
}

fn tagged_block(out: &mut String, tag: &str, content: &str) {
    out.push_str(tag);
    out.push('\n');
    out.push_str(content);
    out.push_str("\n<end>\n");
}

/// Generation prefix and closing suffix; the full prompt is
/// `prefix + answer + suffix`.
fn frame(fields: &PromptFields, structure: PromptStructure) -> (String, &'static str) {
    let mut prefix = String::new();
    match structure {
        PromptStructure::MetaSchema | PromptStructure::MetaCot | PromptStructure::MetaKnowledge => {
            prefix.push_str("<s>\n");
            tagged_block(&mut prefix, "<system>", &fields.system);
            if structure.has_instruction() {
                tagged_block(&mut prefix, "<instruction>", &fields.instruction);
            }
            tagged_block(&mut prefix, "<question>", &fields.question);
            prefix.push_str("<answer>\n");
            (prefix, "\n<end>\n</s>")
        }
        PromptStructure::BasePrompt1 => {
            prefix.push_str("<s>[INST]\n<<SYS>>\n");
            prefix.push_str(&fields.system);
            prefix.push_str("\n<</SYS>>\nInstructions:\n");
            prefix.push_str(&fields.instruction);
            prefix.push('\n');
            prefix.push_str(&fields.question);
            prefix.push_str("\n[/INST]\n");
            (prefix, "\n</s>")
        }
        PromptStructure::BasePrompt2 => {
            prefix.push_str("[Schema] ");
            prefix.push_str(&fields.system);
            prefix.push_str("\n[Question] ");
            prefix.push_str(&fields.question);
            prefix.push_str("\n[Answer] ");
            (prefix, "")
        }
    }
}

pub fn render_fields(fields: &PromptFields, structure: PromptStructure) -> Result<String, PromptError> {
    validate(fields, structure)?;
    let (mut text, suffix) = frame(fields, structure);
    text.push_str(&fields.answer);
    text.push_str(suffix);
    Ok(text)
}

/// Full training prompt, answer included.
pub fn render(sample: &PromptSample) -> Result<String, PromptError> {
    render_fields(&sample.fields(), sample.structure)
}

/// Evaluation-time prompt: everything up to the (empty) answer content.
pub fn render_prefix(sample: &PromptSample) -> Result<String, PromptError> {
    let fields = sample.fields();
    validate(&fields, sample.structure)?;
    Ok(frame(&fields, sample.structure).0)
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    structure: PromptStructure,
}

impl<'a> Cursor<'a> {
    fn error(&self, offset: usize, expected: &str) -> PromptError {
        PromptError::Parse {
            structure: self.structure,
            offset,
            expected: format!("`{}`", expected.escape_debug()),
        }
    }

    fn expect(&mut self, literal: &str) -> Result<(), PromptError> {
        let rest = &self.text[self.pos..];
        if rest.starts_with(literal) {
            self.pos += literal.len();
            Ok(())
        } else {
            let matched = rest.bytes().zip(literal.bytes()).take_while(|(a, b)| a == b).count();
            Err(self.error(self.pos + matched, literal))
        }
    }

    /// Content up to the next `terminator`, consuming both.
    fn until(&mut self, terminator: &str) -> Result<&'a str, PromptError> {
        let rest = &self.text[self.pos..];
        match rest.find(terminator) {
            Some(i) => {
                let content = &rest[..i];
                self.pos += i + terminator.len();
                Ok(content)
            }
            None => Err(self.error(self.text.len(), terminator)),
        }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }
}

fn parse_frame<'a>(cursor: &mut Cursor<'a>, structure: PromptStructure) -> Result<PromptFields, PromptError> {
    let mut fields = PromptFields::default();
    match structure {
        PromptStructure::MetaSchema | PromptStructure::MetaCot | PromptStructure::MetaKnowledge => {
            cursor.expect("<s>\n<system>\n")?;
            fields.system = cursor.until("\n<end>\n")?.to_string();
            if structure.has_instruction() {
                cursor.expect("<instruction>\n")?;
                fields.instruction = cursor.until("\n<end>\n")?.to_string();
            }
            cursor.expect("<question>\n")?;
            fields.question = cursor.until("\n<end>\n")?.to_string();
            cursor.expect("<answer>\n")?;
        }
        PromptStructure::BasePrompt1 => {
            cursor.expect("<s>[INST]\n<<SYS>>\n")?;
            fields.system = cursor.until("\n<</SYS>>\n")?.to_string();
            cursor.expect("Instructions:\n")?;
            let start = cursor.pos;
            let body = cursor.until("\n[/INST]\n")?;
            let split = body.rfind('\n').ok_or_else(|| cursor.error(start, "\\n"))?;
            fields.instruction = body[..split].to_string();
            fields.question = body[split + 1..].to_string();
        }
        PromptStructure::BasePrompt2 => {
            cursor.expect("[Schema] ")?;
            fields.system = cursor.until("\n[Question] ")?.to_string();
            fields.question = cursor.until("\n[Answer] ")?.to_string();
        }
    }
    Ok(fields)
}

/// Recovers the blocks of a full rendered prompt.
pub fn parse(text: &str, structure: PromptStructure) -> Result<PromptFields, PromptError> {
    let mut cursor = Cursor {
        text,
        pos: 0,
        structure,
    };
    let mut fields = parse_frame(&mut cursor, structure)?;
    let suffix = frame(&PromptFields::default(), structure).1;
    let rest = cursor.rest();
    match rest.strip_suffix(suffix) {
        Some(answer) => fields.answer = answer.to_string(),
        None => return Err(cursor.error(text.len(), suffix)),
    }
    validate(&fields, structure)?;
    Ok(fields)
}

/// Recovers the blocks of a generation prefix (answer left empty).
pub fn parse_prefix(text: &str, structure: PromptStructure) -> Result<PromptFields, PromptError> {
    let mut cursor = Cursor {
        text,
        pos: 0,
        structure,
    };
    let fields = parse_frame(&mut cursor, structure)?;
    if !cursor.rest().is_empty() {
        return Err(cursor.error(cursor.pos, "end of prefix"));
    }
    validate(&fields, structure)?;
    Ok(fields)
}
