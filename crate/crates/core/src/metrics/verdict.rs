//! Rule-based verdict extraction from free-text model responses.
//!
//! A [`Ruleset`] holds three ordered pattern groups. Groups are tried in the order deny,
//! unclear, allow; the first group with any matching pattern decides the verdict, and no match
//! yields [`Verdict::NonSpecific`]. Matching runs on the normalized (whitespace-collapsed,
//! casefolded) response.

use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{MetricsError, Verdict};
use crate::text::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternSyntax {
    #[default]
    Substring,
    Regex,
}

/// On-disk ruleset layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RulesetFile {
    #[serde(default)]
    pub deny: Vec<String>,
    #[serde(default)]
    pub unclear: Vec<String>,
    #[serde(default)]
    pub allow: Vec<String>,
    #[serde(default)]
    pub pattern_syntax: PatternSyntax,
}

#[derive(Debug, Clone)]
enum Matcher {
    Substring(String),
    Regex(Regex),
}

impl Matcher {
    fn is_match(&self, haystack: &str) -> bool {
        match self {
            Matcher::Substring(needle) => haystack.contains(needle.as_str()),
            Matcher::Regex(re) => re.is_match(haystack),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ruleset {
    source: RulesetFile,
    groups: [(Verdict, Vec<Matcher>); 3],
}

const ENGLISH: &str = include_str!("../../assets/rules_en.json");
const CHINESE: &str = include_str!("../../assets/rules_zh.json");

impl Ruleset {
    pub fn new(file: RulesetFile) -> Result<Self, MetricsError> {
        if file.deny.is_empty() && file.unclear.is_empty() && file.allow.is_empty() {
            return Err(MetricsError::Ruleset("ruleset has no patterns".into()));
        }
        let compile = |patterns: &[String]| -> Result<Vec<Matcher>, MetricsError> {
            patterns
                .iter()
                .map(|p| match file.pattern_syntax {
                    PatternSyntax::Substring => Ok(Matcher::Substring(normalize(p))),
                    PatternSyntax::Regex => Regex::new(&format!("(?i){p}"))
                        .map(Matcher::Regex)
                        .map_err(|e| MetricsError::Ruleset(format!("invalid pattern {p:?}: {e}"))),
                })
                .collect()
        };
        let groups = [
            (Verdict::DeniesCommercial, compile(&file.deny)?),
            (Verdict::Unclear, compile(&file.unclear)?),
            (Verdict::AllowsCommercial, compile(&file.allow)?),
        ];
        Ok(Self { source: file, groups })
    }

    pub fn from_json(json: &str) -> Result<Self, MetricsError> {
        let file: RulesetFile = serde_json::from_str(json).map_err(|e| MetricsError::Ruleset(e.to_string()))?;
        Self::new(file)
    }

    pub fn load(path: &Path) -> Result<Self, MetricsError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| MetricsError::Ruleset(format!("{}: {e}", path.display())))?;
        Self::from_json(&json)
    }

    pub fn english() -> Self {
        Self::from_json(ENGLISH).expect("bundled English ruleset is valid")
    }

    pub fn chinese() -> Self {
        Self::from_json(CHINESE).expect("bundled Chinese ruleset is valid")
    }

    /// English and Chinese substring rules combined.
    pub fn multilingual() -> Self {
        let (en, zh) = (Self::english().source, Self::chinese().source);
        let join = |a: Vec<String>, b: Vec<String>| a.into_iter().chain(b).collect();
        Self::new(RulesetFile {
            deny: join(en.deny, zh.deny),
            unclear: join(en.unclear, zh.unclear),
            allow: join(en.allow, zh.allow),
            pattern_syntax: PatternSyntax::Substring,
        })
        .expect("bundled rulesets are valid")
    }

    pub fn source(&self) -> &RulesetFile {
        &self.source
    }

    pub fn content_hash(&self) -> String {
        crate::hashing::json_hash(&self.source)
    }

    pub fn extract(&self, response_text: &str) -> Verdict {
        let haystack = normalize(response_text);
        for (verdict, matchers) in &self.groups {
            if matchers.iter().any(|m| m.is_match(&haystack)) {
                return *verdict;
            }
        }
        Verdict::NonSpecific
    }
}

pub fn extract_verdict(response_text: &str, ruleset: &Ruleset) -> Verdict {
    ruleset.extract(response_text)
}
