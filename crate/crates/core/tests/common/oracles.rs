//! Brute-force reference implementations and randomized checks against the library.
//!
//! Each `check_*` function draws its cases from a seeded generator, compares the library with
//! the naive computation and returns the number of cases checked or a description of the first
//! disagreement.

use licensekit_core::metrics::{
    average_response_speed, duplication_rate, mean_ss, nonspecific_rate, prediction_agreement, DrMode,
    SS_CONSISTENCY_THRESHOLD,
};
use licensekit_core::stats::{
    cliffs_delta, cohens_d, sk_esd_rank, wilcoxon_signed_rank, Direction, SampleGroup, StatsError, WilcoxonMode,
};
use licensekit_core::{EvalOutcome, Label, Verdict};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<usize, String>;

const VERDICTS: [Verdict; 4] = [Verdict::AllowsCommercial, Verdict::DeniesCommercial, Verdict::Unclear, Verdict::NonSpecific];

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

// ---------------------------------------------------------------- metrics

pub fn random_outcomes(rng: &mut ChaCha8Rng) -> Vec<EvalOutcome> {
    let n = rng.gen_range(1..=60);
    let pool = rng.gen_range(1..=n.min(12));
    (0..n)
        .map(|i| {
            let extracted = VERDICTS[rng.gen_range(0..4)];
            let ground_truth = Label::GROUND_TRUTH[rng.gen_range(0..3)];
            let text = format!("response {}", rng.gen_range(0..pool));
            EvalOutcome {
                license_id: format!("lic-{i:03}"),
                model_id: "m".into(),
                system_id: "sys_v3".into(),
                user_id: "user_v3".into(),
                response_text: text.clone(),
                extracted,
                ground_truth,
                correct: extracted.matches(ground_truth),
                normalized_response: text,
                ss: Some(rng.gen_range(-0.3..1.0)),
                latency_s: rng.gen_range(0.0..30.0),
            }
        })
        .collect()
}

pub struct NaiveMetrics {
    pub correct: usize,
    pub repeated: usize,
    pub largest_repeat_group: usize,
    pub non_specific: usize,
    pub latency_mean: f64,
    pub ss_pct: f64,
    pub consistent: usize,
}

pub fn naive_metrics(outcomes: &[EvalOutcome]) -> NaiveMetrics {
    let n = outcomes.len();
    let label_of = |v: Verdict| match v {
        Verdict::AllowsCommercial => Some(Label::AllowsCommercial),
        Verdict::DeniesCommercial => Some(Label::DeniesCommercial),
        Verdict::Unclear => Some(Label::Unclear),
        Verdict::NonSpecific => None,
    };
    let correct = outcomes
        .iter()
        .filter(|o| label_of(o.extracted) == Some(o.ground_truth))
        .count();
    let repeated = (0..n)
        .filter(|&i| (0..i).any(|j| outcomes[j].normalized_response == outcomes[i].normalized_response))
        .count();
    let largest = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| outcomes[j].normalized_response == outcomes[i].normalized_response)
                .count()
        })
        .max()
        .unwrap_or(0);
    let non_specific = outcomes.iter().filter(|o| o.extracted == Verdict::NonSpecific).count();
    let mut latency = 0.0;
    let mut ss = 0.0;
    let mut consistent = 0;
    for o in outcomes {
        latency += o.latency_s;
        let s = o.ss.unwrap();
        ss += s;
        if s > SS_CONSISTENCY_THRESHOLD {
            consistent += 1;
        }
    }
    NaiveMetrics {
        correct,
        repeated,
        largest_repeat_group: if largest > 1 { largest } else { 0 },
        non_specific,
        latency_mean: latency / n as f64,
        ss_pct: (100.0 * ss / n as f64).max(0.0),
        consistent,
    }
}

fn count_from_pct(pct: f64, n: usize) -> f64 {
    pct * n as f64 / 100.0
}

/// Compares PA, DR, NRR, ARS and mean SS with [`naive_metrics`] on random outcome sets.
pub fn check_metrics(seed: u64, cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let outcomes = random_outcomes(&mut rng);
        let n = outcomes.len();
        let want = naive_metrics(&outcomes);
        let fail = |what: &str, got: f64, want: f64| Err(format!("case {case} (n={n}): {what} {got} != {want}"));
        let counts = [
            ("correct", prediction_agreement(&outcomes).unwrap(), want.correct),
            ("repeated", duplication_rate(&outcomes, DrMode::Extras).unwrap(), want.repeated),
            (
                "largest repeat group",
                duplication_rate(&outcomes, DrMode::MaxClass).unwrap(),
                want.largest_repeat_group,
            ),
            ("non-specific", nonspecific_rate(&outcomes).unwrap(), want.non_specific),
        ];
        for (what, pct, count) in counts {
            let recovered = count_from_pct(pct, n);
            if recovered.round() as usize != count || !close(recovered, count as f64, 1e-9) {
                return fail(what, recovered, count as f64);
            }
        }
        let ars = average_response_speed(&outcomes).unwrap();
        if !close(ars, want.latency_mean, 1e-9) {
            return fail("ARS", ars, want.latency_mean);
        }
        let ss = mean_ss(&outcomes).unwrap();
        if !close(ss.ss_pct, want.ss_pct, 1e-9) {
            return fail("SS", ss.ss_pct, want.ss_pct);
        }
        let consistent = count_from_pct(ss.consistency_pct, n);
        if consistent.round() as usize != want.consistent {
            return fail("SS consistency", consistent, want.consistent as f64);
        }
    }
    Ok(cases)
}

// ---------------------------------------------------------------- Wilcoxon

/// Midranks by direct counting.
pub fn naive_ranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|v| {
            let less = values.iter().filter(|w| *w < v).count() as f64;
            let equal = values.iter().filter(|w| *w == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Two-sided exact p of the signed-rank statistic by enumerating all `2^n` sign vectors.
/// Returns `(W, p)` with `W = min(W+, W-)`, or `None` when every difference is zero.
pub fn enumerated_wilcoxon(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return None;
    }
    let ranks = naive_ranks(&diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let total: f64 = ranks.iter().sum();
    let plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let observed = plus.min(total - plus);
    let n = diffs.len();
    let mut extreme = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w.min(total - w) <= observed + 1e-9 {
            extreme += 1;
        }
    }
    Some((observed, extreme as f64 / (1u64 << n) as f64))
}

fn random_pairs(rng: &mut ChaCha8Rng, max_n: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rng.gen_range(1..=max_n);
    // Small integer grids produce tied magnitudes and zero differences.
    let grid = rng.gen_bool(0.5);
    let draw = |rng: &mut ChaCha8Rng| {
        if grid {
            rng.gen_range(0..6) as f64
        } else {
            rng.gen_range(-10.0..10.0)
        }
    };
    let x: Vec<f64> = (0..n).map(|_| draw(rng)).collect();
    let y: Vec<f64> = (0..n).map(|_| draw(rng)).collect();
    (x, y)
}

pub fn check_wilcoxon(seed: u64, cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let (x, y) = random_pairs(&mut rng, 10);
        let got = wilcoxon_signed_rank(&x, &y, WilcoxonMode::Exact);
        match (enumerated_wilcoxon(&x, &y), got) {
            (None, Err(StatsError::AllZeroDifferences)) => {}
            (Some((w, p)), Ok(r)) => {
                if r.w != w || !close(r.p_value, p, 1e-12) || !r.exact {
                    return Err(format!(
                        "case {case} x={x:?} y={y:?}: got W={} p={}, enumeration W={w} p={p}",
                        r.w, r.p_value
                    ));
                }
            }
            (want, got) => return Err(format!("case {case}: enumeration {want:?}, library {got:?}")),
        }
    }
    Ok(cases)
}

// ---------------------------------------------------------------- Cliff's delta

pub fn pair_count_delta(x: &[f64], y: &[f64]) -> f64 {
    let mut more = 0i64;
    let mut less = 0i64;
    for a in x {
        for b in y {
            if a > b {
                more += 1;
            } else if a < b {
                less += 1;
            }
        }
    }
    (more - less) as f64 / (x.len() * y.len()) as f64
}

pub fn check_cliffs(seed: u64, cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let m = rng.gen_range(1..=15);
        let n = rng.gen_range(1..=15);
        let grid = rng.gen_bool(0.5);
        let mut draw = |k: usize| -> Vec<f64> {
            (0..k)
                .map(|_| if grid { rng.gen_range(0..5) as f64 } else { rng.gen_range(0.0..1.0) })
                .collect()
        };
        let x = draw(m);
        let y = draw(n);
        let d = cliffs_delta(&x, &y).unwrap();
        let back = cliffs_delta(&y, &x).unwrap();
        let want = pair_count_delta(&x, &y);
        if d.delta != want {
            return Err(format!("case {case}: delta {} != pair count {want}", d.delta));
        }
        if back.delta != -d.delta {
            return Err(format!("case {case}: not antisymmetric ({} vs {})", d.delta, back.delta));
        }
        if d.zero != (want == 0.0) || !(-1.0..=1.0).contains(&d.delta) {
            return Err(format!("case {case}: bad zero flag or range for {}", d.delta));
        }
    }
    Ok(cases)
}

// ---------------------------------------------------------------- Cohen's d

pub fn hand_cohens_d(a: &[f64], b: &[f64]) -> f64 {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = ((na - 1.0) * var(a) + (nb - 1.0) * var(b)) / (na + nb - 2.0);
    (mean(a) - mean(b)) / pooled.sqrt()
}

pub fn check_cohens_d(seed: u64, cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let a: Vec<f64> = (0..rng.gen_range(2..=12)).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let b: Vec<f64> = (0..rng.gen_range(2..=12)).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let d = cohens_d(&a, &b).unwrap();
        let want = hand_cohens_d(&a, &b);
        if !close(d, want, 1e-12) {
            return Err(format!("case {case}: d {d} != hand formula {want}"));
        }
        let scale = rng.gen_range(0.01..100.0);
        let shift = rng.gen_range(-100.0..100.0);
        let rescale = |v: &[f64]| v.iter().map(|x| x * scale + shift).collect::<Vec<_>>();
        let scaled = cohens_d(&rescale(&a), &rescale(&b)).unwrap();
        if !close(scaled, d, 1e-9) {
            return Err(format!("case {case}: d changed under rescaling ({d} vs {scaled})"));
        }
    }
    Ok(cases)
}

// ---------------------------------------------------------------- Scott-Knott ESD

fn naive_mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Between-cluster sum of squares for splitting `segment` before index `cut`, from raw values.
fn naive_between_ss(segment: &[&SampleGroup], cut: usize) -> f64 {
    let left: Vec<f64> = segment[..cut].iter().flat_map(|g| g.values.clone()).collect();
    let right: Vec<f64> = segment[cut..].iter().flat_map(|g| g.values.clone()).collect();
    let all: Vec<f64> = left.iter().chain(&right).copied().collect();
    let grand = naive_mean(&all);
    left.len() as f64 * (naive_mean(&left) - grand).powi(2) + right.len() as f64 * (naive_mean(&right) - grand).powi(2)
}

fn naive_separate(left: &[f64], right: &[f64], threshold: f64) -> bool {
    let d = hand_cohens_d(left, right);
    if d.is_finite() {
        d.abs() >= threshold
    } else {
        naive_mean(left) != naive_mean(right)
    }
}

/// Whether `cuts` (sorted boundaries inside `segment`) is exactly what recursive splitting
/// yields: the best boundary of each segment is cut iff the effect between its sides reaches
/// the threshold, and an uncut segment contains no cuts.
fn partition_is_consistent(segment: &[&SampleGroup], cuts: &[usize], threshold: f64) -> bool {
    if segment.len() < 2 {
        return cuts.is_empty();
    }
    let mut best = 1;
    for c in 2..segment.len() {
        if naive_between_ss(segment, c) > naive_between_ss(segment, best) {
            best = c;
        }
    }
    let left: Vec<f64> = segment[..best].iter().flat_map(|g| g.values.clone()).collect();
    let right: Vec<f64> = segment[best..].iter().flat_map(|g| g.values.clone()).collect();
    if !naive_separate(&left, &right, threshold) {
        return cuts.is_empty();
    }
    if !cuts.contains(&best) {
        return false;
    }
    let inner_left: Vec<usize> = cuts.iter().copied().filter(|&c| c < best).collect();
    let inner_right: Vec<usize> = cuts.iter().filter(|&&c| c > best).map(|c| c - best).collect();
    partition_is_consistent(&segment[..best], &inner_left, threshold)
        && partition_is_consistent(&segment[best..], &inner_right, threshold)
}

/// Ranks by enumerating all `2^(g-1)` contiguous partitions of the sorted groups and keeping the
/// unique consistent one.
pub fn exhaustive_sk_esd(groups: &[SampleGroup], direction: Direction, threshold: f64) -> Vec<(String, usize)> {
    let mut sorted: Vec<&SampleGroup> = groups.iter().collect();
    sorted.sort_by(|a, b| {
        let (ma, mb) = (naive_mean(&a.values), naive_mean(&b.values));
        let ord = match direction {
            Direction::HigherIsBetter => mb.partial_cmp(&ma).unwrap(),
            Direction::LowerIsBetter => ma.partial_cmp(&mb).unwrap(),
        };
        ord.then_with(|| a.group_id.cmp(&b.group_id))
    });
    let g = sorted.len();
    let mut found = Vec::new();
    for mask in 0u32..(1 << (g - 1)) {
        let cuts: Vec<usize> = (1..g).filter(|c| mask >> (c - 1) & 1 == 1).collect();
        if partition_is_consistent(&sorted, &cuts, threshold) {
            found.push(cuts);
        }
    }
    assert_eq!(found.len(), 1, "exactly one partition is consistent");
    let cuts = &found[0];
    sorted
        .iter()
        .enumerate()
        .map(|(i, grp)| (grp.group_id.clone(), 1 + cuts.iter().filter(|&&c| c <= i).count()))
        .collect()
}

pub fn random_groups(rng: &mut ChaCha8Rng) -> Vec<SampleGroup> {
    let g = rng.gen_range(1..=5);
    let folds = rng.gen_range(2..=8);
    let mut ids: Vec<usize> = (0..g).collect();
    ids.shuffle(rng);
    ids.into_iter()
        .map(|id| {
            let center = rng.gen_range(0.0..4.0);
            let spread = rng.gen_range(0.1..2.0);
            let values = (0..folds).map(|_| center + spread * rng.gen_range(-1.0..1.0)).collect();
            SampleGroup::new(format!("g{id}"), values)
        })
        .collect()
}

pub fn check_sk_esd(seed: u64, cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split_somewhere = 0;
    for case in 0..cases {
        let groups = random_groups(&mut rng);
        let direction = if rng.gen_bool(0.5) {
            Direction::HigherIsBetter
        } else {
            Direction::LowerIsBetter
        };
        let threshold = [0.2, 0.5, 0.8][rng.gen_range(0..3)];
        let table = sk_esd_rank("m", &groups, direction, threshold).map_err(|e| format!("case {case}: {e}"))?;
        let got: Vec<(String, usize)> = table.entries.iter().map(|e| (e.group_id.clone(), e.rank)).collect();
        let want = exhaustive_sk_esd(&groups, direction, threshold);
        if got != want {
            return Err(format!("case {case}: library {got:?}, exhaustive {want:?}"));
        }
        if table.rank_count() > 1 {
            split_somewhere += 1;
        }
    }
    if split_somewhere == 0 {
        return Err("no instance produced more than one rank".into());
    }
    Ok(cases)
}
