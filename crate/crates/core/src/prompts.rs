//! System/user prompt template packs.
//!
//! Templates use single-brace named placeholders (`{license_text}`, `{license_kind}`) and
//! doubled braces (`{{`, `}}`) for literal braces. System templates take no placeholders; user
//! templates embed the license text exactly once. Rendering never re-scans substituted text,
//! so braces inside a license pass through untouched.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Category, LicenseRecord};

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("failed to read template pack {path}: {message}")]
    Read { path: String, message: String },
    #[error("template {id}: {message}")]
    Invalid { id: String, message: String },
    #[error("duplicate template id {0}")]
    DuplicateId(String),
    #[error("unknown template id {0}")]
    UnknownId(String),
    #[error("template {id} is a {actual} template, expected {expected}")]
    KindMismatch {
        id: String,
        expected: TemplateKind,
        actual: TemplateKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    System,
    User,
}

impl std::fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TemplateKind::System => "system",
            TemplateKind::User => "user",
        })
    }
}

/// Where a template's wording came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateOrigin {
    Custom,
    ModelGenerated,
    ToolGenerated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    pub kind: TemplateKind,
    pub origin: TemplateOrigin,
    pub body: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Placeholder {
    LicenseText,
    LicenseKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Slot(Placeholder),
}

fn parse_body(id: &str, body: &str) -> Result<Vec<Segment>, PromptError> {
    let invalid = |message: String| PromptError::Invalid {
        id: id.to_string(),
        message,
    };
    let mut segments = Vec::new();
    let mut literal = String::new();
    let mut chars = body.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '{' if chars.peek() == Some(&'{') => {
                chars.next();
                literal.push('{');
            }
            '}' if chars.peek() == Some(&'}') => {
                chars.next();
                literal.push('}');
            }
            '{' => {
                let mut name = String::new();
                loop {
                    match chars.next() {
                        Some('}') => break,
                        Some(ch) => name.push(ch),
                        None => return Err(invalid("unterminated placeholder".into())),
                    }
                }
                let slot = match name.as_str() {
                    "license_text" => Placeholder::LicenseText,
                    "license_kind" => Placeholder::LicenseKind,
                    other => return Err(invalid(format!("unknown placeholder {{{other}}}"))),
                };
                if !literal.is_empty() {
                    segments.push(Segment::Literal(std::mem::take(&mut literal)));
                }
                segments.push(Segment::Slot(slot));
            }
            '}' => return Err(invalid("unmatched `}` (use `}}` for a literal brace)".into())),
            other => literal.push(other),
        }
    }
    if !literal.is_empty() {
        segments.push(Segment::Literal(literal));
    }
    Ok(segments)
}

#[derive(Debug, Clone)]
struct CompiledTemplate {
    template: PromptTemplate,
    segments: Vec<Segment>,
}

fn compile(template: PromptTemplate) -> Result<CompiledTemplate, PromptError> {
    let segments = parse_body(&template.id, &template.body)?;
    let count = |p: Placeholder| segments.iter().filter(|s| **s == Segment::Slot(p)).count();
    let invalid = |message: &str| PromptError::Invalid {
        id: template.id.clone(),
        message: message.to_string(),
    };
    match template.kind {
        TemplateKind::System => {
            if segments.iter().any(|s| matches!(s, Segment::Slot(_))) {
                return Err(invalid("system templates must not contain placeholders"));
            }
        }
        TemplateKind::User => {
            if count(Placeholder::LicenseText) != 1 {
                return Err(invalid("user templates must contain {license_text} exactly once"));
            }
        }
    }
    Ok(CompiledTemplate { template, segments })
}

#[derive(Serialize, Deserialize)]
struct PackFile {
    templates: Vec<PromptTemplate>,
}

/// A validated, immutable set of prompt templates.
#[derive(Debug, Clone)]
pub struct TemplatePack {
    templates: Vec<CompiledTemplate>,
    index: HashMap<String, usize>,
}

const DEFAULT_PACK: &str = include_str!("../assets/default_pack.json");

impl TemplatePack {
    pub fn new(templates: Vec<PromptTemplate>) -> Result<Self, PromptError> {
        let mut compiled = Vec::with_capacity(templates.len());
        let mut index = HashMap::new();
        for template in templates {
            if index.insert(template.id.clone(), compiled.len()).is_some() {
                return Err(PromptError::DuplicateId(template.id));
            }
            compiled.push(compile(template)?);
        }
        Ok(Self { templates: compiled, index })
    }

    pub fn from_json(json: &str) -> Result<Self, PromptError> {
        let file: PackFile = serde_json::from_str(json).map_err(|e| PromptError::Read {
            path: "<inline>".into(),
            message: e.to_string(),
        })?;
        Self::new(file.templates)
    }

    /// The bundled pack: `sys_v1`..`sys_v6` and `user_v1`..`user_v3`.
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_PACK).expect("bundled template pack is valid")
    }

    pub fn templates(&self) -> impl Iterator<Item = &PromptTemplate> {
        self.templates.iter().map(|c| &c.template)
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&PromptTemplate> {
        self.index.get(id).map(|&i| &self.templates[i].template)
    }

    fn compiled(&self, id: &str, expected: TemplateKind) -> Result<&CompiledTemplate, PromptError> {
        let compiled = self
            .index
            .get(id)
            .map(|&i| &self.templates[i])
            .ok_or_else(|| PromptError::UnknownId(id.to_string()))?;
        if compiled.template.kind != expected {
            return Err(PromptError::KindMismatch {
                id: id.to_string(),
                expected,
                actual: compiled.template.kind,
            });
        }
        Ok(compiled)
    }

    pub fn content_hash(&self) -> String {
        let file = PackFile {
            templates: self.templates().cloned().collect(),
        };
        crate::hashing::json_hash(&file)
    }

    pub fn to_json(&self) -> String {
        let file = PackFile {
            templates: self.templates().cloned().collect(),
        };
        serde_json::to_string_pretty(&file).expect("templates serialize")
    }
}

pub fn load_template_pack(path: &Path) -> Result<TemplatePack, PromptError> {
    let json = std::fs::read_to_string(path).map_err(|e| PromptError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    TemplatePack::from_json(&json).map_err(|e| match e {
        PromptError::Read { message, .. } => PromptError::Read {
            path: path.display().to_string(),
            message,
        },
        other => other,
    })
}

/// A system/user prompt pair instantiated for one license.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub system_id: String,
    pub user_id: String,
    pub license_id: String,
    pub system_text: String,
    pub user_text: String,
}

/// Human phrase for the kind of document under review.
pub fn license_kind_phrase(category: Category) -> &'static str {
    match category {
        Category::General | Category::Customized => "dataset license",
        Category::OfficialTerms => "website usage agreement",
    }
}

fn fill(segments: &[Segment], record: &LicenseRecord) -> String {
    let mut out = String::new();
    for segment in segments {
        match segment {
            Segment::Literal(s) => out.push_str(s),
            Segment::Slot(Placeholder::LicenseText) => out.push_str(&record.text),
            Segment::Slot(Placeholder::LicenseKind) => out.push_str(license_kind_phrase(record.category)),
        }
    }
    out
}

pub fn render(
    pack: &TemplatePack,
    system_id: &str,
    user_id: &str,
    record: &LicenseRecord,
) -> Result<RenderedPrompt, PromptError> {
    let system = pack.compiled(system_id, TemplateKind::System)?;
    let user = pack.compiled(user_id, TemplateKind::User)?;
    Ok(RenderedPrompt {
        system_id: system_id.to_string(),
        user_id: user_id.to_string(),
        license_id: record.id.clone(),
        system_text: fill(&system.segments, record),
        user_text: fill(&user.segments, record),
    })
}

/// Every (system, user) combination, systems outermost, in the given order.
pub fn grid(
    pack: &TemplatePack,
    system_ids: &[String],
    user_ids: &[String],
) -> Result<Vec<(String, String)>, PromptError> {
    for id in system_ids {
        pack.compiled(id, TemplateKind::System)?;
    }
    for id in user_ids {
        pack.compiled(id, TemplateKind::User)?;
    }
    Ok(system_ids
        .iter()
        .flat_map(|s| user_ids.iter().map(move |u| (s.clone(), u.clone())))
        .collect())
}
