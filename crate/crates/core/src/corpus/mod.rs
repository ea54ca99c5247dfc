//! Labeled dataset-license corpora.
//!
//! A [`Corpus`] is an ordered, immutable collection of [`LicenseRecord`]s with unique ids.
//! Loading lives in [`io`], filtering and composition statistics here, seeded sampling
//! (balanced subsets, stratified folds, nested ablation subsets) in [`sampling`], and
//! instruction-tuning export in [`export`].

pub mod export;
pub mod io;
pub mod sampling;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::text::normalize;

pub use export::{export_instruction_dataset, label_phrase, target_completion, InstructionExample};
pub use io::{load_corpus, save_corpus_jsonl, CorpusFormat};
pub use sampling::{balanced_subset, stratified_folds, subsample_for_ablation, FoldAssignment};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate id {id:?} at line {first} and line {second}")]
    DuplicateId {
        id: String,
        first: usize,
        second: usize,
    },
    #[error("label class {label} has {available} records but {required} are required (shortfall {shortfall})")]
    InsufficientClass {
        label: Label,
        available: usize,
        required: usize,
        shortfall: usize,
    },
    #[error("corpus has no records labeled {0}")]
    MissingClass(Label),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("record {0} is unlabeled and cannot form a training target")]
    Unlabeled(String),
    #[error(transparent)]
    Prompt(#[from] crate::prompts::PromptError),
    #[error("failed to write export: {0}")]
    Write(String),
}

/// License family of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    General,
    Customized,
    OfficialTerms,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::General, Category::Customized, Category::OfficialTerms];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::General => "general",
            Category::Customized => "customized",
            Category::OfficialTerms => "official_terms",
        }
    }
}

impl std::str::FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "general" => Ok(Category::General),
            "customized" => Ok(Category::Customized),
            "official_terms" => Ok(Category::OfficialTerms),
            other => Err(format!("unknown category {other:?}")),
        }
    }
}

/// Expert commercial-use label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "allows")]
    AllowsCommercial,
    #[serde(rename = "denies")]
    DeniesCommercial,
    #[serde(rename = "unclear")]
    Unclear,
    #[serde(rename = "unlabeled")]
    Unlabeled,
}

impl Label {
    /// The three ground-truth classes, in the fixed order used by every sampler.
    pub const GROUND_TRUTH: [Label; 3] = [Label::AllowsCommercial, Label::DeniesCommercial, Label::Unclear];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::AllowsCommercial => "allows",
            Label::DeniesCommercial => "denies",
            Label::Unclear => "unclear",
            Label::Unlabeled => "unlabeled",
        }
    }

    pub fn is_ground_truth(self) -> bool {
        self != Label::Unlabeled
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "allows" => Ok(Label::AllowsCommercial),
            "denies" => Ok(Label::DeniesCommercial),
            "unclear" => Ok(Label::Unclear),
            "unlabeled" => Ok(Label::Unlabeled),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    #[default]
    Valid,
    Unreadable,
    Expired,
    Duplicate,
}

impl std::str::FromStr for RecordStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "" | "valid" => Ok(RecordStatus::Valid),
            "unreadable" => Ok(RecordStatus::Unreadable),
            "expired" => Ok(RecordStatus::Expired),
            "duplicate" => Ok(RecordStatus::Duplicate),
            other => Err(format!("unknown status {other:?}")),
        }
    }
}

/// Source platform identifier such as `huggingface` or `github`. Open-ended.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Platform(pub String);

impl Platform {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// One dataset license with its expert label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LicenseRecord {
    pub id: String,
    pub name: String,
    pub platform: Platform,
    pub category: Category,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rights_obligations: Option<Vec<String>>,
    #[serde(default)]
    pub status: RecordStatus,
}

/// Ordered collection of records with unique ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    records: Vec<LicenseRecord>,
    index: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids. Positions in errors are 1-based.
    pub fn new(records: Vec<LicenseRecord>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(records.len());
        for (pos, record) in records.iter().enumerate() {
            if let Some(first) = index.insert(record.id.clone(), pos) {
                return Err(CorpusError::DuplicateId {
                    id: record.id.clone(),
                    first: first + 1,
                    second: pos + 1,
                });
            }
        }
        Ok(Self { records, index })
    }

    /// Subset of this corpus keeping records whose id is in `ids`, in corpus order.
    pub fn retain_ids(&self, ids: &HashSet<&str>) -> Corpus {
        let records: Vec<_> = self
            .records
            .iter()
            .filter(|r| ids.contains(r.id.as_str()))
            .cloned()
            .collect();
        Corpus::new(records).expect("subset of a valid corpus has unique ids")
    }

    pub fn records(&self) -> &[LicenseRecord] {
        &self.records
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LicenseRecord> {
        self.records.iter()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&LicenseRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }

    /// Record count per label.
    pub fn label_counts(&self) -> BTreeMap<Label, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.label).or_insert(0) += 1;
        }
        counts
    }

    /// Stable content hash over the JSON encoding of every record in order.
    pub fn content_hash(&self) -> String {
        crate::hashing::json_hash(&self.records)
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a LicenseRecord;
    type IntoIter = std::slice::Iter<'a, LicenseRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// Counts of records removed by [`filter_invalid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FilterReport {
    pub input_count: usize,
    pub removed_unreadable: usize,
    pub removed_expired: usize,
    pub removed_duplicate: usize,
    pub output_count: usize,
}

impl FilterReport {
    pub fn removed_total(&self) -> usize {
        self.removed_unreadable + self.removed_expired + self.removed_duplicate
    }
}

/// Drops unreadable, expired and duplicated licenses.
///
/// A record is unreadable when flagged so at load (invalid UTF-8) or when its text is empty
/// after trimming. Expiry is taken from the status flag only. Duplicates are records whose
/// normalized text equals an earlier kept record's, or that arrive flagged `duplicate`; the
/// first occurrence wins.
pub fn filter_invalid(corpus: &Corpus) -> (Corpus, FilterReport) {
    let mut report = FilterReport {
        input_count: corpus.len(),
        ..FilterReport::default()
    };
    let mut seen = HashSet::new();
    let mut kept = Vec::new();
    for record in corpus {
        let normalized = normalize(&record.text);
        if record.status == RecordStatus::Unreadable || normalized.is_empty() {
            report.removed_unreadable += 1;
        } else if record.status == RecordStatus::Expired {
            report.removed_expired += 1;
        } else if record.status == RecordStatus::Duplicate || !seen.insert(normalized) {
            report.removed_duplicate += 1;
        } else {
            kept.push(record.clone());
        }
    }
    report.output_count = kept.len();
    let out = Corpus::new(kept).expect("filtered corpus keeps unique ids");
    (out, report)
}

/// Per-category record counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CategoryStats {
    pub general: usize,
    pub customized: usize,
    pub official_terms: usize,
    pub total: usize,
}

impl CategoryStats {
    pub fn count(&self, category: Category) -> usize {
        match category {
            Category::General => self.general,
            Category::Customized => self.customized,
            Category::OfficialTerms => self.official_terms,
        }
    }
}

pub fn category_stats(corpus: &Corpus) -> CategoryStats {
    let mut stats = CategoryStats::default();
    for record in corpus {
        match record.category {
            Category::General => stats.general += 1,
            Category::Customized => stats.customized += 1,
            Category::OfficialTerms => stats.official_terms += 1,
        }
    }
    stats.total = corpus.len();
    stats
}
