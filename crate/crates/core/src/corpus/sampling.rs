//! Seeded sampling over corpora: balanced subsets, stratified folds and nested ablation
//! subsets. Every function is deterministic for a fixed corpus order and seed.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, Label, LicenseRecord};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Records grouped by label in [`Label`] order; each group keeps corpus order.
fn strata(corpus: &Corpus) -> BTreeMap<Label, Vec<&LicenseRecord>> {
    let mut groups: BTreeMap<Label, Vec<&LicenseRecord>> = BTreeMap::new();
    for r in corpus {
        groups.entry(r.label).or_default().push(r);
    }
    groups
}

/// Label-balanced undersample of `corpus`.
///
/// The subset holds `floor(fraction * n)` records rounded down to a multiple of three, split
/// evenly across the three ground-truth classes. When a class cannot supply its share the call
/// fails, unless `allow_shrink` is set, in which case every class contributes as many records
/// as the smallest class has.
pub fn balanced_subset(
    corpus: &Corpus,
    fraction: f64,
    seed: u64,
    allow_shrink: bool,
) -> Result<Corpus, CorpusError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CorpusError::InvalidArgument(format!(
            "fraction must be in (0, 1], got {fraction}"
        )));
    }
    let groups = strata(corpus);
    let available = |label: Label| groups.get(&label).map_or(0, Vec::len);
    for label in Label::GROUND_TRUTH {
        if available(label) == 0 {
            return Err(CorpusError::MissingClass(label));
        }
    }

    let target = (fraction * corpus.len() as f64 + 1e-9).floor() as usize;
    let mut per_class = target / 3;
    if let Some(short) = Label::GROUND_TRUTH.into_iter().find(|&l| available(l) < per_class) {
        if !allow_shrink {
            return Err(CorpusError::InsufficientClass {
                label: short,
                available: available(short),
                required: per_class,
                shortfall: per_class - available(short),
            });
        }
        per_class = Label::GROUND_TRUTH.into_iter().map(available).min().unwrap_or(0);
    }

    let mut rng = rng(seed);
    let mut chosen = HashSet::new();
    for label in Label::GROUND_TRUTH {
        let mut members = groups[&label].clone();
        members.shuffle(&mut rng);
        chosen.extend(members.into_iter().take(per_class).map(|r| r.id.as_str()));
    }
    Ok(corpus.retain_ids(&chosen))
}

/// Assignment of record ids to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    pub assignments: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignments.get(id).copied()
    }

    /// Records of `corpus` assigned to `fold`, in corpus order.
    pub fn members<'a>(&self, corpus: &'a Corpus, fold: usize) -> Vec<&'a LicenseRecord> {
        corpus
            .iter()
            .filter(|r| self.fold_of(&r.id) == Some(fold))
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignments.values() {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn content_hash(&self) -> String {
        crate::hashing::json_hash(self)
    }
}

/// Stratified `k`-fold assignment.
///
/// Each label stratum is shuffled and dealt round-robin into folds with a single running
/// counter, so every class lands floor/ceil of `n_class / k` times per fold and fold sizes
/// differ by at most one.
pub fn stratified_folds(subset: &Corpus, k: usize, seed: u64) -> Result<FoldAssignment, CorpusError> {
    if k < 2 {
        return Err(CorpusError::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    if subset.len() < k {
        return Err(CorpusError::InvalidArgument(format!(
            "k = {k} exceeds subset size {}",
            subset.len()
        )));
    }
    let mut rng = rng(seed);
    let mut assignments = BTreeMap::new();
    let mut slot = 0usize;
    for (_, mut members) in strata(subset) {
        members.shuffle(&mut rng);
        for r in members {
            assignments.insert(r.id.clone(), slot % k);
            slot += 1;
        }
    }
    Ok(FoldAssignment { k, seed, assignments })
}

/// Nested, approximately label-balanced subsets of the requested sizes.
///
/// Strata are shuffled once and interleaved round-robin into a single ordering; each subset is
/// a prefix of it, so smaller subsets are contained in larger ones. Per-class counts differ by
/// at most one whenever the corpus has enough records of every class.
pub fn subsample_for_ablation(corpus: &Corpus, sizes: &[usize], seed: u64) -> Result<Vec<Corpus>, CorpusError> {
    if sizes.is_empty() {
        return Err(CorpusError::InvalidArgument("sizes must not be empty".into()));
    }
    if sizes[0] == 0 || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CorpusError::InvalidArgument(format!(
            "sizes must be positive and strictly increasing, got {sizes:?}"
        )));
    }
    let largest = *sizes.last().expect("non-empty");
    if largest > corpus.len() {
        return Err(CorpusError::InvalidArgument(format!(
            "size {largest} exceeds corpus size {}",
            corpus.len()
        )));
    }

    let mut rng = rng(seed);
    let mut queues: Vec<std::vec::IntoIter<&LicenseRecord>> = strata(corpus)
        .into_values()
        .map(|mut members| {
            members.shuffle(&mut rng);
            members.into_iter()
        })
        .collect();
    let mut order = Vec::with_capacity(corpus.len());
    while order.len() < largest {
        for queue in queues.iter_mut() {
            if let Some(r) = queue.next() {
                order.push(r.id.as_str());
            }
        }
    }

    Ok(sizes
        .iter()
        .map(|&size| corpus.retain_ids(&order[..size].iter().copied().collect()))
        .collect())
}
