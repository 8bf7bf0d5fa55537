//! Statistical comparison harness: two-sided Wilcoxon signed-rank test,
//! Vargha–Delaney A12 effect size, and Scott-Knott clustering of algorithm
//! results into ranked groups.
//!
//! Conventions: the signed-rank test drops zero differences before ranking,
//! uses midranks for ties, the exact permutation distribution up to 20 pairs,
//! and the tie-corrected normal approximation (no continuity correction)
//! beyond that. Scott-Knott accepts a split only when the two sides differ
//! significantly (signed-rank on per-repeat side means, alpha 0.05) with a
//! non-negligible A12 effect on the pooled values.

use thiserror::Error;

/// Significance level used inside Scott-Knott splits.
const SK_ALPHA: f64 = 0.05;
/// Largest pair count handled by the exact permutation distribution.
const EXACT_LIMIT: usize = 20;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("sample group '{0}' has no values")]
    EmptyGroup(String),
    #[error("sample group '{0}' contains a non-finite value")]
    NonFinite(String),
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no groups given")]
    NoGroups,
    #[error("groups must have equal repeat counts ({0} vs {1})")]
    UnequalRepeats(usize, usize),
}

/// One algorithm's metric values across repeats.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGroup {
    pub label: String,
    pub values: Vec<f64>,
}

impl SampleGroup {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self, StatsError> {
        let label = label.into();
        if values.is_empty() {
            return Err(StatsError::EmptyGroup(label));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite(label));
        }
        Ok(Self { label, values })
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonOutcome {
    pub p_value: f64,
    pub significant: bool,
}

/// Two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped before ranking; if none remain the samples
/// are indistinguishable (p = 1). Intended for at least five informative
/// pairs — fewer are computed exactly but cannot reach small p-values.
pub fn wilcoxon_signed_rank(
    a: &[f64],
    b: &[f64],
    alpha: f64,
) -> Result<WilcoxonOutcome, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    let diffs: Vec<f64> =
        a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Ok(WilcoxonOutcome { p_value: 1.0, significant: false });
    }
    let n = diffs.len();

    // Midranks of |d|: ties share the average of their positions.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
    let mut ranks = vec![0.0; n];
    let mut tie_sizes: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && diffs[order[j]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = midrank;
        }
        tie_sizes.push(j - i);
        i = j;
    }

    let w_plus: f64 =
        diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| *r).sum();

    let p_value = if n <= EXACT_LIMIT {
        exact_two_sided_p(&ranks, w_plus)
    } else {
        let nf = n as f64;
        let mu = nf * (nf + 1.0) / 4.0;
        let tie_term: f64 = tie_sizes
            .iter()
            .map(|&t| {
                let t = t as f64;
                (t * t * t - t) / 48.0
            })
            .sum();
        let sigma2 = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
        if sigma2 <= 0.0 {
            1.0
        } else {
            let z = (w_plus - mu) / sigma2.sqrt();
            erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
        }
    };
    Ok(WilcoxonOutcome { p_value, significant: p_value < alpha })
}

/// Exact two-sided p-value: enumerate the null distribution of W+ by dynamic
/// programming over doubled ranks (midranks are half-integers, so doubling
/// makes them exact integers).
fn exact_two_sided_p(ranks: &[f64], w_plus: f64) -> f64 {
    let ranks2: Vec<usize> = ranks
        .iter()
        .map(|r| {
            let doubled = (2.0 * r).round();
            debug_assert!((doubled - 2.0 * r).abs() < 1e-9, "midrank not half-integer");
            doubled as usize
        })
        .collect();
    let w2 = (2.0 * w_plus).round() as usize;
    let total: usize = ranks2.iter().sum();
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    for &r in &ranks2 {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let denom = (ranks2.len() as f64).exp2();
    let cdf: f64 = counts[..=w2.min(total)].iter().sum::<f64>() / denom;
    let sf: f64 = counts[w2.min(total)..].iter().sum::<f64>() / denom;
    (2.0 * cdf.min(sf)).min(1.0)
}

/// Complementary error function (Abramowitz–Stegun 7.1.26 rational
/// approximation, absolute error below 1.5e-7 — plenty for p-values).
fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    let t = 1.0 / (1.0 + 0.327_591_1 * x);
    let poly = t
        * (0.254_829_592
            + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    poly * (-x * x).exp()
}

/// Vargha–Delaney A12: probability that a value drawn from `a` exceeds one
/// drawn from `b`, counting ties as half.
pub fn a12(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "a12 needs nonempty samples");
    let mut wins = 0.0;
    for ai in a {
        for bj in b {
            if ai > bj {
                wins += 1.0;
            } else if ai == bj {
                wins += 0.5;
            }
        }
    }
    wins / (a.len() * b.len()) as f64
}

/// Magnitude classes for A12, applied symmetrically (0.5 means no effect).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectSize {
    Equal,
    Small,
    Medium,
    Large,
}

impl EffectSize {
    pub fn label(self) -> &'static str {
        match self {
            EffectSize::Equal => "equal",
            EffectSize::Small => "small",
            EffectSize::Medium => "medium",
            EffectSize::Large => "large",
        }
    }
}

/// Classify an A12 value by the 0.56 / 0.64 / 0.71 thresholds, symmetric in
/// the direction of the effect.
pub fn effect_size_class(a12_value: f64) -> EffectSize {
    let magnitude = a12_value.max(1.0 - a12_value);
    if magnitude >= 0.71 {
        EffectSize::Large
    } else if magnitude >= 0.64 {
        EffectSize::Medium
    } else if magnitude >= 0.56 {
        EffectSize::Small
    } else {
        EffectSize::Equal
    }
}

/// Scott-Knott clustering: rank per input group, 1 = best (largest mean).
///
/// Groups are sorted by mean and recursively split at the boundary
/// maximizing the between-cluster sum of squares; a split stands only if the
/// sides differ significantly (signed-rank over per-repeat side means) with
/// an A12 effect above "equal" on the pooled values. Groups sharing a final
/// cluster share a rank.
pub fn scott_knott(groups: &[SampleGroup]) -> Result<Vec<usize>, StatsError> {
    if groups.is_empty() {
        return Err(StatsError::NoGroups);
    }
    let repeats = groups[0].values.len();
    for g in groups {
        if g.values.is_empty() {
            return Err(StatsError::EmptyGroup(g.label.clone()));
        }
        if g.values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite(g.label.clone()));
        }
        if g.values.len() != repeats {
            return Err(StatsError::UnequalRepeats(repeats, g.values.len()));
        }
    }

    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&i, &j| {
        groups[j].mean().total_cmp(&groups[i].mean()).then(i.cmp(&j))
    });

    let mut clusters: Vec<(usize, usize)> = Vec::new();
    split_range(groups, &order, 0, groups.len(), &mut clusters);

    let mut ranks = vec![0; groups.len()];
    for (c, &(lo, hi)) in clusters.iter().enumerate() {
        for &g in &order[lo..hi] {
            ranks[g] = c + 1;
        }
    }
    Ok(ranks)
}

/// Recursively partition `order[lo..hi]` (already mean-descending), pushing
/// final clusters left to right.
fn split_range(
    groups: &[SampleGroup],
    order: &[usize],
    lo: usize,
    hi: usize,
    out: &mut Vec<(usize, usize)>,
) {
    if hi - lo <= 1 {
        out.push((lo, hi));
        return;
    }

    let pooled = |from: usize, to: usize| -> Vec<f64> {
        order[from..to]
            .iter()
            .flat_map(|&g| groups[g].values.iter().copied())
            .collect()
    };
    let all = pooled(lo, hi);
    let grand_mean = mean(&all);

    let mut best: Option<(f64, usize)> = None;
    for k in (lo + 1)..hi {
        let left = pooled(lo, k);
        let right = pooled(k, hi);
        let bss = left.len() as f64 * (mean(&left) - grand_mean).powi(2)
            + right.len() as f64 * (mean(&right) - grand_mean).powi(2);
        if best.map_or(true, |(b, _)| bss > b) {
            best = Some((bss, k));
        }
    }
    let (_, k) = best.expect("at least one split position");

    let repeats = groups[order[lo]].values.len();
    let side_means = |from: usize, to: usize| -> Vec<f64> {
        (0..repeats)
            .map(|r| {
                order[from..to].iter().map(|&g| groups[g].values[r]).sum::<f64>()
                    / (to - from) as f64
            })
            .collect()
    };
    let left_means = side_means(lo, k);
    let right_means = side_means(k, hi);
    let test = wilcoxon_signed_rank(&left_means, &right_means, SK_ALPHA)
        .expect("side means are finite and equal-length");
    let effect = effect_size_class(a12(&pooled(lo, k), &pooled(k, hi)));

    if test.significant && effect != EffectSize::Equal {
        split_range(groups, order, lo, k, out);
        split_range(groups, order, k, hi, out);
    } else {
        out.push((lo, hi));
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for singletons.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}

/// Median absolute deviation (unscaled).
pub fn mad(values: &[f64]) -> f64 {
    let med = median(values);
    let deviations: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    median(&deviations)
}
