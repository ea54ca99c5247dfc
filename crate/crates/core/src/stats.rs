//! Nonparametric ranking and comparison: Cohen's d, Scott-Knott ESD ranking, the Wilcoxon
//! signed-rank test, Cliff's delta and Bonferroni correction.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Negligible-effect boundary used when none is given.
pub const DEFAULT_D_THRESHOLD: f64 = 0.2;

/// Sample sizes up to this bound use the exact Wilcoxon distribution in [`WilcoxonMode::Auto`].
pub const EXACT_WILCOXON_MAX_N: usize = 12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("{what} needs at least {required} values, got {got}")]
    TooFewValues { what: String, required: usize, got: usize },
    #[error("{0} contains a non-finite value")]
    NonFinite(String),
    #[error("pooled variance is zero")]
    DegenerateSpread,
    #[error("paired samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("exact test supports at most 127 non-zero differences, got {0}")]
    TooLargeForExact(usize),
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("p-value {0} outside [0, 1]")]
    InvalidPValue(f64),
    #[error("no groups to rank")]
    NoGroups,
    #[error("duplicate group id {0}")]
    DuplicateGroup(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "higher" | "higher_is_better" => Ok(Direction::HigherIsBetter),
            "lower" | "lower_is_better" => Ok(Direction::LowerIsBetter),
            other => Err(format!("unknown direction {other:?}; expected higher or lower")),
        }
    }
}

fn check_finite(what: &str, values: &[f64]) -> Result<(), StatsError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite(what.to_string()))
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sum_sq_dev(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum()
}

/// Standardized mean difference `(mean(a) - mean(b)) / pooled_sd` with sample variances.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    for (what, v) in [("first sample", a), ("second sample", b)] {
        if v.len() < 2 {
            return Err(StatsError::TooFewValues {
                what: what.into(),
                required: 2,
                got: v.len(),
            });
        }
        check_finite(what, v)?;
    }
    let pooled_var = (sum_sq_dev(a) + sum_sq_dev(b)) / (a.len() + b.len() - 2) as f64;
    if pooled_var <= 0.0 {
        return Err(StatsError::DegenerateSpread);
    }
    Ok((mean(a) - mean(b)) / pooled_var.sqrt())
}

/// Per-fold values of one metric for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGroup {
    pub group_id: String,
    pub values: Vec<f64>,
}

impl SampleGroup {
    pub fn new(group_id: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            group_id: group_id.into(),
            values,
        }
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub group_id: String,
    pub rank: usize,
    pub mean: f64,
}

/// Ranked groups, best first. Ranks run 1..=R without gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub metric_name: String,
    pub direction: Direction,
    pub entries: Vec<RankEntry>,
}

impl RankTable {
    pub fn rank_of(&self, group_id: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.group_id == group_id).map(|e| e.rank)
    }

    pub fn rank_count(&self) -> usize {
        self.entries.iter().map(|e| e.rank).max().unwrap_or(0)
    }
}

/// Orders groups best first; equal means fall back to group id.
pub fn order_groups(groups: &[SampleGroup], direction: Direction) -> Vec<&SampleGroup> {
    let mut ordered: Vec<&SampleGroup> = groups.iter().collect();
    ordered.sort_by(|a, b| {
        let by_mean = match direction {
            Direction::HigherIsBetter => b.mean().total_cmp(&a.mean()),
            Direction::LowerIsBetter => a.mean().total_cmp(&b.mean()),
        };
        by_mean.then_with(|| a.group_id.cmp(&b.group_id))
    });
    ordered
}

/// Whether two adjacent clusters are far enough apart to stay separate.
///
/// Constant samples with different means have an unbounded effect and always separate.
pub fn split_accepted(left: &[f64], right: &[f64], d_threshold: f64) -> bool {
    match cohens_d(left, right) {
        Ok(d) => d.abs() >= d_threshold,
        Err(_) => mean(left) != mean(right),
    }
}

fn between_ss(ordered: &[&SampleGroup], boundary: usize) -> f64 {
    let side = |gs: &[&SampleGroup]| {
        let (sum, n) = gs
            .iter()
            .fold((0.0, 0usize), |(s, n), g| (s + g.values.iter().sum::<f64>(), n + g.values.len()));
        (sum, n as f64)
    };
    let (sl, nl) = side(&ordered[..boundary]);
    let (sr, nr) = side(&ordered[boundary..]);
    let grand = (sl + sr) / (nl + nr);
    nl * (sl / nl - grand).powi(2) + nr * (sr / nr - grand).powi(2)
}

fn concat(groups: &[&SampleGroup]) -> Vec<f64> {
    groups.iter().flat_map(|g| g.values.iter().copied()).collect()
}

fn split_clusters(ordered: &[&SampleGroup], d_threshold: f64, offset: usize, cuts: &mut Vec<usize>) {
    if ordered.len() < 2 {
        return;
    }
    let mut best = 1;
    let mut best_ss = between_ss(ordered, 1);
    for b in 2..ordered.len() {
        let ss = between_ss(ordered, b);
        if ss > best_ss {
            best = b;
            best_ss = ss;
        }
    }
    if !split_accepted(&concat(&ordered[..best]), &concat(&ordered[best..]), d_threshold) {
        return;
    }
    split_clusters(&ordered[..best], d_threshold, offset, cuts);
    cuts.push(offset + best);
    split_clusters(&ordered[best..], d_threshold, offset + best, cuts);
}

/// Scott-Knott ESD ranking.
///
/// Groups are sorted best first and the sequence is split recursively at the boundary with the
/// largest between-cluster sum of squares (earliest boundary on ties). A split survives only if
/// Cohen's d between the two sides reaches `d_threshold`; otherwise the segment shares one rank.
pub fn sk_esd_rank(
    metric_name: &str,
    groups: &[SampleGroup],
    direction: Direction,
    d_threshold: f64,
) -> Result<RankTable, StatsError> {
    if groups.is_empty() {
        return Err(StatsError::NoGroups);
    }
    let mut seen = std::collections::HashSet::new();
    for g in groups {
        if !seen.insert(g.group_id.as_str()) {
            return Err(StatsError::DuplicateGroup(g.group_id.clone()));
        }
        if g.values.len() < 2 {
            return Err(StatsError::TooFewValues {
                what: format!("group {}", g.group_id),
                required: 2,
                got: g.values.len(),
            });
        }
        check_finite(&format!("group {}", g.group_id), &g.values)?;
    }
    let ordered = order_groups(groups, direction);
    let mut cuts = Vec::new();
    split_clusters(&ordered, d_threshold, 0, &mut cuts);

    let mut entries = Vec::with_capacity(ordered.len());
    let mut rank = 1;
    let mut next_cut = cuts.iter().peekable();
    for (i, g) in ordered.iter().enumerate() {
        if next_cut.peek() == Some(&&i) {
            rank += 1;
            next_cut.next();
        }
        entries.push(RankEntry {
            group_id: g.group_id.clone(),
            rank,
            mean: g.mean(),
        });
    }
    Ok(RankTable {
        metric_name: metric_name.to_string(),
        direction,
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMode {
    Exact,
    #[serde(alias = "approx")]
    Approximate,
    #[default]
    Auto,
}

impl std::str::FromStr for WilcoxonMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(WilcoxonMode::Exact),
            "approx" | "approximate" => Ok(WilcoxonMode::Approximate),
            "auto" => Ok(WilcoxonMode::Auto),
            other => Err(format!("unknown mode {other:?}; expected exact, approx or auto")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub w: f64,
    pub p_value: f64,
    /// Non-zero differences that entered the test.
    pub n_used: usize,
    pub zeros_dropped: usize,
    pub exact: bool,
}

/// Average ranks of `values` (1-based), ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped and counted. The exact p-value is `P(min(W+, W-) <= W_obs)` over
/// all sign assignments of the observed ranks, computed by dynamic programming over doubled
/// ranks. The approximation uses the tie-corrected variance with a 0.5 continuity correction.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64], mode: WilcoxonMode) -> Result<WilcoxonResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(StatsError::TooFewValues {
            what: "paired samples".into(),
            required: 1,
            got: 0,
        });
    }
    check_finite("first sample", x)?;
    check_finite("second sample", y)?;
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let zeros_dropped = x.len() - diffs.len();
    if diffs.is_empty() {
        return Err(StatsError::AllZeroDifferences);
    }
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).fold(0.0, |acc, (_, r)| acc + r);
    let total = (n * (n + 1)) as f64 / 2.0;
    let w = w_plus.min(total - w_plus);

    let exact = match mode {
        WilcoxonMode::Exact => true,
        WilcoxonMode::Approximate => false,
        WilcoxonMode::Auto => n <= EXACT_WILCOXON_MAX_N,
    };
    let p_value = if exact {
        exact_p(&ranks, w)?
    } else {
        approximate_p(&abs, w)
    };
    Ok(WilcoxonResult {
        w,
        p_value,
        n_used: n,
        zeros_dropped,
        exact,
    })
}

fn exact_p(ranks: &[f64], w: f64) -> Result<f64, StatsError> {
    let n = ranks.len();
    if n > 127 {
        return Err(StatsError::TooLargeForExact(n));
    }
    // Average ranks are multiples of 0.5, so doubled ranks are integers.
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u128; total + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let w2 = (w * 2.0).round() as usize;
    let hits: u128 = counts
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s).min(total - *s) <= w2)
        .map(|(_, c)| *c)
        .sum();
    Ok(hits as f64 / 2f64.powi(n as i32))
}

fn approximate_p(abs: &[f64], w: f64) -> f64 {
    let n = abs.len() as f64;
    let mu = n * (n + 1.0) / 4.0;
    let mut sorted = abs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|v| **v == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = (w - mu + 0.5) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * normal.cdf(z)).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Magnitude {
    Small,
    Medium,
    Large,
}

impl Magnitude {
    pub fn of(delta: f64) -> Self {
        let a = delta.abs();
        if a <= 0.33 {
            Magnitude::Small
        } else if a <= 0.66 {
            Magnitude::Medium
        } else {
            Magnitude::Large
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Magnitude::Small => "small",
            Magnitude::Medium => "medium",
            Magnitude::Large => "large",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CliffsDelta {
    pub delta: f64,
    pub magnitude: Magnitude,
    /// Set when `delta` is exactly zero.
    pub zero: bool,
}

/// Cliff's delta: `(#{x > y} - #{x < y}) / (|x| |y|)` over all cross pairs.
pub fn cliffs_delta(x: &[f64], y: &[f64]) -> Result<CliffsDelta, StatsError> {
    for (what, v) in [("first sample", x), ("second sample", y)] {
        if v.is_empty() {
            return Err(StatsError::TooFewValues {
                what: what.into(),
                required: 1,
                got: 0,
            });
        }
        check_finite(what, v)?;
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut dominance: i64 = 0;
    for &xi in x {
        let below = sorted.partition_point(|v| v.total_cmp(&xi) == Ordering::Less);
        let not_above = sorted.partition_point(|v| v.total_cmp(&xi) != Ordering::Greater);
        let above = sorted.len() - not_above;
        dominance += below as i64 - above as i64;
    }
    let delta = dominance as f64 / (x.len() * y.len()) as f64;
    Ok(CliffsDelta {
        delta,
        magnitude: Magnitude::of(delta),
        zero: dominance == 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BonferroniEntry {
    pub p_value: f64,
    pub alpha_adjusted: f64,
    pub significant: bool,
}

pub fn bonferroni_threshold(alpha: f64, m: usize) -> Result<f64, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidAlpha(alpha));
    }
    if m == 0 {
        return Err(StatsError::TooFewValues {
            what: "test family".into(),
            required: 1,
            got: 0,
        });
    }
    Ok(alpha / m as f64)
}

/// Applies `alpha / m` with `m = p_values.len()`.
pub fn bonferroni(p_values: &[f64], alpha: f64) -> Result<Vec<BonferroniEntry>, StatsError> {
    let adjusted = bonferroni_threshold(alpha, p_values.len())?;
    p_values
        .iter()
        .map(|&p| {
            if !(0.0..=1.0).contains(&p) {
                return Err(StatsError::InvalidPValue(p));
            }
            Ok(BonferroniEntry {
                p_value: p,
                alpha_adjusted: adjusted,
                significant: p < adjusted,
            })
        })
        .collect()
}
