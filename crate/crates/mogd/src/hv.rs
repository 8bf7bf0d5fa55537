//! Exact two-objective hypervolume, per-point contributions, and the batched
//! infill selection that picks the next expensive evaluations.
//!
//! Hypervolume is measured against an explicit reference point; points not
//! strictly better than the reference in every objective are ignored. Two
//! reference conventions are provided: a dynamic one derived from the current
//! candidate predictions (for infill selection) and a fixed one derived from
//! a dense front sample (for reporting, so runs stay comparable).

use crate::core::{Archive, CandidateSet, Solution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Fractional margin added beyond the worst observed value when deriving a
/// reference point from a point set.
const INFILL_MARGIN: f64 = 0.1;
/// Absolute margin used instead when an objective has zero span.
const ZERO_SPAN_MARGIN: f64 = 1e-6;
/// Componentwise scale applied to a front's nadir for the reporting metric.
const METRIC_NADIR_SCALE: f64 = 1.1;

/// Upper corner all hypervolume boxes are anchored to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefPoint {
    r: Vec<f64>,
}

impl RefPoint {
    pub fn new(r: Vec<f64>) -> Self {
        assert!(!r.is_empty(), "reference point needs at least one objective");
        assert!(r.iter().all(|v| v.is_finite()), "reference point must be finite");
        Self { r }
    }

    pub fn values(&self) -> &[f64] {
        &self.r
    }

    pub fn m(&self) -> usize {
        self.r.len()
    }

    /// Dynamic reference for infill selection: per-objective maximum over
    /// `points` plus 10% of the per-objective span (1e-6 when the span is
    /// degenerate), so every point contributes positively.
    pub fn infill_from(points: &[Vec<f64>]) -> Self {
        assert!(!points.is_empty(), "cannot derive a reference from no points");
        let m = points[0].len();
        let mut r = vec![0.0; m];
        for j in 0..m {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for p in points {
                assert_eq!(p.len(), m, "ragged objective vectors");
                lo = lo.min(p[j]);
                hi = hi.max(p[j]);
            }
            let span = hi - lo;
            let margin = if span > 0.0 { INFILL_MARGIN * span } else { ZERO_SPAN_MARGIN };
            r[j] = hi + margin;
        }
        Self::new(r)
    }

    /// Fixed reporting reference: the front's nadir scaled by 1.1 in every
    /// objective.
    pub fn metric_from_nadir(nadir: &[f64]) -> Self {
        Self::new(nadir.iter().map(|v| v * METRIC_NADIR_SCALE).collect())
    }
}

fn strictly_better(p: &[f64], r: &[f64]) -> bool {
    assert_eq!(p.len(), r.len(), "objective count mismatch with reference");
    p.iter().zip(r).all(|(pi, ri)| pi < ri)
}

/// Exact two-objective hypervolume by sort-and-sweep: Lebesgue measure of the
/// union of boxes `[p, ref]` over points strictly better than the reference.
pub fn hv2d(points: &[Vec<f64>], r: &RefPoint) -> f64 {
    assert_eq!(r.m(), 2, "exact hypervolume is two-objective only");
    let inside: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| strictly_better(p, &r.r))
        .map(|p| (p[0], p[1]))
        .collect();
    sweep_area(inside, &r.r)
}

/// Sweeping left to right, each staircase point closes a horizontal slab of
/// height (previous best f2 - its f2) and width (ref - its f1). Callers must
/// pre-filter against the reference.
fn sweep_area(mut pts: Vec<(f64, f64)>, r: &[f64]) -> f64 {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut area = 0.0;
    let mut best_f2 = r[1];
    for (f1, f2) in pts {
        if f2 < best_f2 {
            area += (r[0] - f1) * (best_f2 - f2);
            best_f2 = f2;
        }
    }
    area
}

/// Individual hypervolume contributions: `ihv[i] = HV(P) - HV(P \ {i})`.
///
/// The leave-one-out definition is computed directly, so dominated points,
/// exact duplicates, and points outside the reference box get zero, and a
/// staircase point whose removal re-exposes dominated points is credited only
/// with its truly exclusive area. The O(N^2 log N) cost is immaterial at
/// candidate-pool sizes.
pub fn ihv(points: &[Vec<f64>], r: &RefPoint) -> Vec<f64> {
    assert_eq!(r.m(), 2, "contributions are two-objective only");
    let mut contrib = vec![0.0; points.len()];
    let inside: Vec<(usize, (f64, f64))> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| strictly_better(p, &r.r))
        .map(|(i, p)| (i, (p[0], p[1])))
        .collect();
    if inside.is_empty() {
        return contrib;
    }
    let all: Vec<(f64, f64)> = inside.iter().map(|&(_, q)| q).collect();
    let total = sweep_area(all.clone(), &r.r);
    for (k, &(i, _)) in inside.iter().enumerate() {
        let rest: Vec<(f64, f64)> = all
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, &q)| q)
            .collect();
        contrib[i] = (total - sweep_area(rest, &r.r)).max(0.0);
    }
    contrib
}

/// Pick up to `xi` candidates with the largest hypervolume contributions
/// (ties to the lowest index), skipping anything that duplicates an archive
/// entry or an already-picked candidate in decision space.
pub fn select_batch(
    p: &CandidateSet,
    xi: usize,
    archive: &Archive,
    r: &RefPoint,
) -> Vec<Solution> {
    assert!(xi >= 1, "batch size must be at least 1");
    if p.is_empty() {
        return Vec::new();
    }
    let contrib = ihv(&p.predicted(), r);
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| contrib[b].total_cmp(&contrib[a]).then(a.cmp(&b)));

    let bounds = archive.bounds();
    let mut selected: Vec<Solution> = Vec::new();
    for i in order {
        if selected.len() == xi {
            break;
        }
        let x = &p.solutions[i].x;
        if archive.contains(x) || selected.iter().any(|s| bounds.is_duplicate(&s.x, x)) {
            continue;
        }
        selected.push(p.solutions[i].clone());
    }
    selected
}

/// Monte-Carlo hypervolume estimate, usable for any objective count.
///
/// This exists as a diagnostic cross-check (and the only option beyond two
/// objectives); the sweep in [`hv2d`] is authoritative for m = 2. Sampling is
/// uniform over the box spanned by the filtered points' ideal corner and the
/// reference; two-objective coverage queries use a binary search on the
/// staircase.
pub fn hv_monte_carlo(points: &[Vec<f64>], r: &RefPoint, samples: usize, seed: u64) -> f64 {
    let m = r.m();
    let inside: Vec<&Vec<f64>> =
        points.iter().filter(|p| strictly_better(p, &r.r)).collect();
    if inside.is_empty() || samples == 0 {
        return 0.0;
    }
    let mut lower = vec![f64::INFINITY; m];
    for p in &inside {
        for j in 0..m {
            lower[j] = lower[j].min(p[j]);
        }
    }
    let volume: f64 = (0..m).map(|j| r.r[j] - lower[j]).product();

    let stair: Option<Vec<(f64, f64)>> = (m == 2).then(|| {
        let mut sorted: Vec<(f64, f64)> = inside.iter().map(|p| (p[0], p[1])).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut stair = Vec::new();
        let mut best = f64::INFINITY;
        for (f1, f2) in sorted {
            if f2 < best {
                stair.push((f1, f2));
                best = f2;
            }
        }
        stair
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = vec![0.0; m];
    let mut hits = 0usize;
    for _ in 0..samples {
        for j in 0..m {
            z[j] = lower[j] + (r.r[j] - lower[j]) * rng.gen::<f64>();
        }
        let covered = match &stair {
            Some(st) => {
                let k = st.partition_point(|&(f1, _)| f1 <= z[0]);
                k > 0 && st[k - 1].1 <= z[1]
            }
            None => inside.iter().any(|p| (0..m).all(|j| p[j] <= z[j])),
        };
        if covered {
            hits += 1;
        }
    }
    volume * hits as f64 / samples as f64
}
