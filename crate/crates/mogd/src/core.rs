//! Domain types shared by every other module, plus the Pareto primitives:
//! dominance, nondominated filtering, and crowding-distance truncation.
//!
//! All operations here are pure; the types are plain values that are safe to
//! share read-only across threads. Tie-breaking is always "lowest index wins"
//! so that downstream search loops stay bit-reproducible under a fixed seed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Two decision vectors whose per-dimension distance after range scaling is
/// below this tolerance count as the same point. Keeps near-identical rows out
/// of GP covariance matrices.
pub const DUP_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("bounds need at least one dimension")]
    EmptyBounds,
    #[error("lower and upper bound lists differ in length")]
    BoundsLengthMismatch,
    #[error("bound {0} is not finite")]
    NonFiniteBound(usize),
    #[error("lower bound must be strictly below upper bound in dimension {0}")]
    DegenerateBound(usize),
    #[error("archive entries must carry true objective values")]
    MissingObjectives,
}

/// Axis-aligned box constraints of the decision space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, CoreError> {
        if lower.is_empty() {
            return Err(CoreError::EmptyBounds);
        }
        if lower.len() != upper.len() {
            return Err(CoreError::BoundsLengthMismatch);
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(CoreError::NonFiniteBound(i));
            }
            if lo >= hi {
                return Err(CoreError::DegenerateBound(i));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit hypercube `[0, 1]^n`.
    pub fn unit(n: usize) -> Self {
        Self::new(vec![0.0; n], vec![1.0; n]).expect("unit cube is valid")
    }

    pub fn n(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn span(&self, dim: usize) -> f64 {
        self.upper[dim] - self.lower[dim]
    }

    /// Euclidean length of the box diagonal.
    pub fn diagonal(&self) -> f64 {
        (0..self.n()).map(|i| self.span(i) * self.span(i)).sum::<f64>().sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.n()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(xi, (lo, hi))| *xi >= *lo && *xi <= *hi)
    }

    /// Component-wise projection of `x` onto the box.
    pub fn clip(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n(), "point dimension must match bounds");
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(xi, (lo, hi))| xi.clamp(*lo, *hi))
            .collect()
    }

    /// Largest per-dimension distance between `a` and `b` after scaling each
    /// axis to unit range.
    pub fn scaled_inf_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        assert_eq!(a.len(), self.n());
        assert_eq!(b.len(), self.n());
        (0..self.n())
            .map(|i| (a[i] - b[i]).abs() / self.span(i))
            .fold(0.0, f64::max)
    }

    /// Whether two decision vectors coincide within [`DUP_TOL`].
    pub fn is_duplicate(&self, a: &[f64], b: &[f64]) -> bool {
        self.scaled_inf_distance(a, b) < DUP_TOL
    }
}

/// A decision vector together with whatever objective information is known
/// about it: true (expensively evaluated) objectives and/or surrogate
/// predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objectives: Option<Vec<f64>>,
    pub predicted: Option<Vec<f64>>,
}

impl Solution {
    pub fn new(x: Vec<f64>) -> Self {
        Self { x, objectives: None, predicted: None }
    }

    pub fn with_objectives(x: Vec<f64>, f: Vec<f64>) -> Self {
        Self { x, objectives: Some(f), predicted: None }
    }

    pub fn with_predicted(x: Vec<f64>, f: Vec<f64>) -> Self {
        Self { x, objectives: None, predicted: Some(f) }
    }
}

/// The evolving candidate population screened on surrogate predictions.
#[derive(Debug, Clone, Default)]
pub struct CandidateSet {
    pub solutions: Vec<Solution>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    /// Predicted objective vectors, in population order.
    ///
    /// Panics if any member lacks predictions; the search loop always fills
    /// them in.
    pub fn predicted(&self) -> Vec<Vec<f64>> {
        self.solutions
            .iter()
            .map(|s| s.predicted.clone().expect("candidate lacks predicted objectives"))
            .collect()
    }
}

/// Append-only log of every expensively evaluated solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Archive {
    bounds: Bounds,
    entries: Vec<Solution>,
}

impl Archive {
    pub fn new(bounds: Bounds) -> Self {
        Self { bounds, entries: Vec::new() }
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Solution] {
        &self.entries
    }

    /// Whether some entry already occupies `x` (within [`DUP_TOL`]).
    pub fn contains(&self, x: &[f64]) -> bool {
        self.entries.iter().any(|e| self.bounds.is_duplicate(&e.x, x))
    }

    /// Append an evaluated solution. Returns `Ok(false)` (and drops the
    /// solution) when it duplicates an existing entry.
    pub fn push(&mut self, solution: Solution) -> Result<bool, CoreError> {
        if solution.objectives.is_none() {
            return Err(CoreError::MissingObjectives);
        }
        if self.contains(&solution.x) {
            return Ok(false);
        }
        self.entries.push(solution);
        Ok(true)
    }

    /// Training inputs: every archived decision vector, in insertion order.
    pub fn xs(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(|e| e.x.clone()).collect()
    }

    /// All true objective vectors, in insertion order.
    pub fn objectives(&self) -> Vec<Vec<f64>> {
        self.entries
            .iter()
            .map(|e| e.objectives.clone().expect("archive entries are evaluated"))
            .collect()
    }

    /// One objective as a column, in insertion order.
    pub fn objective_column(&self, j: usize) -> Vec<f64> {
        self.entries
            .iter()
            .map(|e| e.objectives.as_ref().expect("archive entries are evaluated")[j])
            .collect()
    }
}

/// Pareto dominance for minimization: `a` is nowhere worse than `b` and the
/// two vectors differ.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    assert_eq!(a.len(), b.len(), "objective vectors must have equal length");
    a.iter().zip(b).all(|(ai, bi)| ai <= bi) && a != b
}

/// Indices (ascending) of the mutually nondominated points.
///
/// Duplicated objective vectors do not dominate each other, so every copy of
/// a nondominated point is kept.
pub fn nondominated_filter(points: &[Vec<f64>]) -> Vec<usize> {
    if points.is_empty() {
        return Vec::new();
    }
    if points[0].len() == 2 {
        filter_two_objectives(points)
    } else {
        filter_pairwise(points)
    }
}

/// Sort-and-sweep filter for the two-objective case, O(N log N).
fn filter_two_objectives(points: &[Vec<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i][0]
            .total_cmp(&points[j][0])
            .then(points[i][1].total_cmp(&points[j][1]))
            .then(i.cmp(&j))
    });

    // Everything earlier in the sort order has f1 <= f1(current), so a point
    // is dominated iff some earlier point also has f2 <= f2(current) and is
    // not an exact duplicate. Tracking the best f2 so far (and the smallest
    // f1 achieving it) decides that in one pass; dominated points may stay in
    // the tracker because domination is transitive.
    let mut keep = Vec::new();
    let mut best_f2 = f64::INFINITY;
    let mut best_f1_at_best_f2 = f64::INFINITY;
    for &i in &order {
        let (f1, f2) = (points[i][0], points[i][1]);
        let dominated = f2 > best_f2 || (f2 == best_f2 && best_f1_at_best_f2 < f1);
        if !dominated {
            keep.push(i);
        }
        if f2 < best_f2 {
            best_f2 = f2;
            best_f1_at_best_f2 = f1;
        } else if f2 == best_f2 && f1 < best_f1_at_best_f2 {
            best_f1_at_best_f2 = f1;
        }
    }
    keep.sort_unstable();
    keep
}

fn filter_pairwise(points: &[Vec<f64>]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !points.iter().any(|p| dominates(p, &points[i])))
        .collect()
}

/// NSGA-II crowding distances. Boundary points of every objective get
/// infinity; interior points accumulate normalized neighbor gaps.
pub fn crowding_distances(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len();
    let mut dist = vec![0.0; n];
    if n == 0 {
        return dist;
    }
    let m = points[0].len();
    for j in 0..m {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| points[a][j].total_cmp(&points[b][j]).then(a.cmp(&b)));
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let span = points[order[n - 1]][j] - points[order[0]][j];
        if span <= 0.0 {
            continue;
        }
        for w in 1..n.saturating_sub(1) {
            dist[order[w]] += (points[order[w + 1]][j] - points[order[w - 1]][j]) / span;
        }
    }
    dist
}

/// Keep at most `k` of a mutually nondominated set: boundary points first,
/// then largest crowding distance, ties by lowest index. Returns ascending
/// indices into `points`.
pub fn crowding_truncate(points: &[Vec<f64>], k: usize) -> Vec<usize> {
    if k == 0 {
        return Vec::new();
    }
    if k >= points.len() {
        return (0..points.len()).collect();
    }
    let dist = crowding_distances(points);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    let mut selected = order[..k].to_vec();
    selected.sort_unstable();
    selected
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bounds_reject_bad_input() {
        assert!(matches!(Bounds::new(vec![], vec![]), Err(CoreError::EmptyBounds)));
        assert!(matches!(
            Bounds::new(vec![0.0], vec![1.0, 2.0]),
            Err(CoreError::BoundsLengthMismatch)
        ));
        assert!(matches!(
            Bounds::new(vec![0.0, 1.0], vec![1.0, 1.0]),
            Err(CoreError::DegenerateBound(1))
        ));
        assert!(matches!(
            Bounds::new(vec![f64::NAN], vec![1.0]),
            Err(CoreError::NonFiniteBound(0))
        ));
    }

    #[test]
    fn bounds_clip_and_contain() {
        let b = Bounds::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert!(b.contains(&[0.5, 0.0]));
        assert!(!b.contains(&[1.5, 0.0]));
        assert_eq!(b.clip(&[1.5, -2.0]), vec![1.0, -1.0]);
        assert!((b.diagonal() - 5.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn duplicate_detection_is_range_scaled() {
        let b = Bounds::new(vec![0.0, 0.0], vec![1.0, 1000.0]).unwrap();
        // 1e-7 in a unit-range axis is a real difference ...
        assert!(!b.is_duplicate(&[0.5, 500.0], &[0.5 + 1e-7, 500.0]));
        // ... but 1e-7 on a 1000-wide axis scales to 1e-10 < DUP_TOL.
        assert!(b.is_duplicate(&[0.5, 500.0], &[0.5, 500.0 + 1e-7]));
    }

    #[test]
    fn dominates_matches_definition() {
        assert!(dominates(&[1.0, 2.0], &[2.0, 3.0]));
        assert!(!dominates(&[1.0, 2.0], &[1.0, 2.0]));
        assert!(!dominates(&[1.0, 3.0], &[2.0, 2.0]));
        // Weak improvement in one coordinate is enough.
        assert!(dominates(&[1.0, 2.0], &[1.0, 3.0]));
    }

    #[test]
    fn filter_drops_dominated_keeps_duplicates() {
        let pts = vec![
            vec![0.5, 0.5],
            vec![0.2, 0.8],
            vec![0.5, 0.5],
            vec![0.9, 0.1],
            vec![0.6, 0.6],
        ];
        assert_eq!(nondominated_filter(&pts), vec![0, 1, 2, 3]);
    }

    #[test]
    fn filter_hand_cases() {
        let pts = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        assert_eq!(nondominated_filter(&pts), vec![0, 1]);
        assert_eq!(nondominated_filter(&[vec![0.0, 0.0]]), vec![0]);
        assert_eq!(nondominated_filter(&[]), Vec::<usize>::new());
    }

    #[test]
    fn filter_handles_shared_coordinates() {
        // Same f1, worse f2 -> dominated; same f2, worse f1 -> dominated.
        let pts = vec![vec![0.2, 0.3], vec![0.2, 0.5], vec![0.4, 0.3]];
        assert_eq!(nondominated_filter(&pts), vec![0]);
    }

    /// O(N^2) reference used by the property test below.
    fn brute_force_filter(points: &[Vec<f64>]) -> Vec<usize> {
        (0..points.len())
            .filter(|&i| !points.iter().any(|p| dominates(p, &points[i])))
            .collect()
    }

    #[test]
    fn crowding_hand_case() {
        let pts =
            vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![0.4, 0.6], vec![1.0, 0.0]];
        let d = crowding_distances(&pts);
        assert!(d[0].is_infinite() && d[3].is_infinite());
        // Interior distances: index 1 gets 0.6+0.6, index 2 gets 0.5+0.5.
        assert!((d[1] - 1.2).abs() < 1e-12);
        assert!((d[2] - 1.0).abs() < 1e-12);
        assert_eq!(crowding_truncate(&pts, 3), vec![0, 1, 3]);
    }

    #[test]
    fn crowding_truncate_edges() {
        let pts = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(crowding_truncate(&pts, 5), vec![0, 1]);
        assert_eq!(crowding_truncate(&pts, 2), vec![0, 1]);
        assert_eq!(crowding_truncate(&pts, 0), Vec::<usize>::new());
    }

    #[test]
    fn archive_rejects_duplicates_and_unevaluated() {
        let mut a = Archive::new(Bounds::unit(2));
        assert!(matches!(
            a.push(Solution::new(vec![0.5, 0.5])),
            Err(CoreError::MissingObjectives)
        ));
        assert!(a.push(Solution::with_objectives(vec![0.5, 0.5], vec![1.0, 2.0])).unwrap());
        assert!(!a
            .push(Solution::with_objectives(vec![0.5, 0.5 + 1e-12], vec![1.0, 2.0]))
            .unwrap());
        assert_eq!(a.len(), 1);
        assert_eq!(a.objective_column(1), vec![2.0]);
    }

    proptest! {
        #[test]
        fn dominance_is_antisymmetric(a in prop::collection::vec(0.0..1.0f64, 3),
                                      b in prop::collection::vec(0.0..1.0f64, 3)) {
            prop_assert!(!(dominates(&a, &b) && dominates(&b, &a)));
            prop_assert!(!dominates(&a, &a));
        }

        #[test]
        fn filter_matches_brute_force(
            pts in prop::collection::vec(
                prop::collection::vec((0..6u8).prop_map(|v| v as f64 / 5.0), 2),
                1..40,
            )
        ) {
            prop_assert_eq!(nondominated_filter(&pts), brute_force_filter(&pts));
        }

        #[test]
        fn truncation_is_subset_and_keeps_extremes(
            k in 2usize..10,
            pts in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 2), 2..30),
        ) {
            let front: Vec<Vec<f64>> = nondominated_filter(&pts)
                .into_iter()
                .map(|i| pts[i].clone())
                .collect();
            let sel = crowding_truncate(&front, k);
            prop_assert_eq!(sel.len(), k.min(front.len()));
            prop_assert!(sel.windows(2).all(|w| w[0] < w[1]));
            // Boundary points (per-objective extremes) must survive when k >= 2.
            let d = crowding_distances(&front);
            for j in 0..2 {
                let arg_min = (0..front.len())
                    .min_by(|&a, &b| front[a][j].total_cmp(&front[b][j]).then(a.cmp(&b)))
                    .unwrap();
                prop_assert!(d[arg_min].is_infinite());
                prop_assert!(sel.contains(&arg_min));
            }
        }
    }
}
