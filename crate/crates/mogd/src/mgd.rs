//! Multiple-gradient descent over surrogate means: the min-norm weight solve,
//! the three-case direction rule, the bounded descent update, and the
//! iterate–filter loop that produces the candidate set.
//!
//! All randomness (initial design, per-point step scales) is derived from the
//! configured seed; per-point RNG streams are keyed by (iteration, point
//! index) so results do not depend on evaluation order.

use crate::core::{crowding_truncate, nondominated_filter, Bounds, CandidateSet, Solution};
use crate::doe::{lhs_sample, LhsPlan};
use crate::surrogate::GpSurrogate;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The aggregated gradient counts as zero when its norm falls below this
/// fraction of the largest objective-gradient norm.
pub const STATIONARY_REL_TOL: f64 = 1e-8;
/// Two-objective gradients closer than this are treated as identical and get
/// equal weights.
const DEGENERATE_DIFF_TOL: f64 = 1e-12;
const FRANK_WOLFE_MAX_ITERS: usize = 500;
const FRANK_WOLFE_GAP_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MgdError {
    #[error("candidate count must be at least 2, got {0}")]
    TooFewCandidates(usize),
    #[error("iteration count must be at least 1")]
    NoIterations,
    #[error("candidate cap must be at least 1")]
    ZeroCap,
    #[error("parallel cosine threshold must lie in (0, 1), got {0}")]
    BadThreshold(f64),
    #[error("step cap fraction must be positive and finite, got {0}")]
    BadStepCap(f64),
    #[error("need at least two objective models, got {0}")]
    TooFewModels(usize),
    #[error("model {model} expects {model_dim} inputs but bounds have {bounds_dim}")]
    DimensionMismatch { model: usize, model_dim: usize, bounds_dim: usize },
    #[error("surrogate produced a non-finite value in iteration {iteration}")]
    ModelEval { iteration: usize },
    #[error("seed point {0} lies outside the search bounds")]
    SeedOutOfBounds(usize),
}

/// Knobs of the candidate search loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MgdConfig {
    /// Size of the Latin-hypercube initial population.
    pub n_candidates: usize,
    /// Number of step–filter–truncate rounds.
    pub iterations: usize,
    /// Pairwise-cosine bound above which gradients count as near-parallel.
    pub parallel_cos_threshold: f64,
    /// Maximum population size kept after each round.
    pub cap: usize,
    /// Longest distance one update may travel, as a fraction of the box
    /// diagonal. The raw update `eta * u` inherits the scale of the surrogate
    /// gradients, which on a steeply fitted surface can span many box lengths
    /// and turn the walk into bound-to-bound teleports; capping the travelled
    /// distance (by shrinking `eta`, never changing the direction) keeps each
    /// update local so descent actually tracks the modelled landscape.
    pub max_step_frac: f64,
    pub seed: u64,
}

impl Default for MgdConfig {
    fn default() -> Self {
        Self {
            n_candidates: 100,
            iterations: 100,
            parallel_cos_threshold: 0.95,
            cap: 200,
            max_step_frac: 0.1,
            seed: 0,
        }
    }
}

impl MgdConfig {
    pub fn validate(&self) -> Result<(), MgdError> {
        if self.n_candidates < 2 {
            return Err(MgdError::TooFewCandidates(self.n_candidates));
        }
        if self.iterations == 0 {
            return Err(MgdError::NoIterations);
        }
        if self.cap == 0 {
            return Err(MgdError::ZeroCap);
        }
        if !(self.parallel_cos_threshold > 0.0 && self.parallel_cos_threshold < 1.0) {
            return Err(MgdError::BadThreshold(self.parallel_cos_threshold));
        }
        if !(self.max_step_frac > 0.0 && self.max_step_frac.is_finite()) {
            return Err(MgdError::BadStepCap(self.max_step_frac));
        }
        Ok(())
    }
}

/// Which branch of the direction rule fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseTag {
    /// Aggregated gradient is (relatively) zero: move along the largest
    /// gradient to slide along the stationary set.
    Stationary,
    /// All gradients point almost the same way: follow the smallest one.
    NearParallel,
    /// General position: follow the min-norm convex combination.
    Aggregated,
}

/// Direction chosen for one candidate, with the solved weights for
/// diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionOutcome {
    pub u: Vec<f64>,
    pub case_tag: CaseTag,
    pub weights: Vec<f64>,
}

/// Weights of the minimum-norm point in the convex hull of the gradients:
/// nonnegative, summing to one, minimizing `||sum_j w_j g_j||`.
///
/// Two objectives use the closed form `w1 = (g2-g1)'g2 / ||g2-g1||^2` clamped
/// to `[0, 1]`; more objectives run Frank–Wolfe on the simplex.
pub fn min_norm_weights(gradients: &[Vec<f64>]) -> Vec<f64> {
    assert!(gradients.len() >= 2, "need at least two gradients");
    let dim = gradients[0].len();
    assert!(gradients.iter().all(|g| g.len() == dim), "ragged gradients");

    if gradients.len() == 2 {
        let (g1, g2) = (&gradients[0], &gradients[1]);
        let mut diff_sq = 0.0;
        let mut diff_dot_g2 = 0.0;
        for d in 0..dim {
            let diff = g2[d] - g1[d];
            diff_sq += diff * diff;
            diff_dot_g2 += diff * g2[d];
        }
        if diff_sq.sqrt() < DEGENERATE_DIFF_TOL {
            return vec![0.5, 0.5];
        }
        let w1 = (diff_dot_g2 / diff_sq).clamp(0.0, 1.0);
        return vec![w1, 1.0 - w1];
    }

    frank_wolfe_weights(gradients)
}

/// Frank–Wolfe minimization of `w' G w` on the probability simplex, where
/// `G` is the Gram matrix of the gradients.
///
/// Runs the fully corrective variant (Wolfe's minimum-norm-point method):
/// each round adds the vertex with the most negative directional derivative
/// to the active set, then re-solves the problem on that set exactly. Plain
/// toward-step rounds zig-zag at O(1/k) whenever the solution lies inside a
/// face — badly ill-conditioned gradient sets exhaust the round cap while
/// still visibly off the optimum — whereas corrective rounds terminate
/// finitely, so the duality-gap stop actually binds.
fn frank_wolfe_weights(gradients: &[Vec<f64>]) -> Vec<f64> {
    let m = gradients.len();
    let gram: Vec<Vec<f64>> = gradients
        .iter()
        .map(|gi| gradients.iter().map(|gj| dot(gi, gj)).collect())
        .collect();
    // Start from the shortest gradient alone.
    let start = (0..m).min_by(|&a, &b| gram[a][a].total_cmp(&gram[b][b])).expect("m >= 2");
    let mut w = vec![0.0; m];
    w[start] = 1.0;
    let mut prev_value = f64::INFINITY;
    for _ in 0..FRANK_WOLFE_MAX_ITERS {
        // d/dw_j of w'Gw = 2 (Gw)_j.
        let gw: Vec<f64> = gram.iter().map(|row| dot(row, &w)).collect();
        let value = dot(&gw, &w);
        let toward = (0..m).min_by(|&a, &b| gw[a].total_cmp(&gw[b])).expect("m >= 2");
        // Duality gap: 2 * (w - e_toward)' G w.
        if 2.0 * (value - gw[toward]) < FRANK_WOLFE_GAP_TOL {
            break;
        }
        // After a corrective solve every active atom sees the same derivative,
        // so a strictly better vertex is necessarily a new one; seeing an old
        // vertex again — or no strict decrease — means the remaining gap is
        // rounding noise.
        if w[toward] > 0.0 || value >= prev_value {
            break;
        }
        prev_value = value;
        let mut support: Vec<usize> = (0..m).filter(|&j| w[j] > 0.0).collect();
        support.push(toward);
        corrective_step(&gram, &mut w, support);
    }
    w
}

/// Exact minimization of `w' G w` over the simplex face spanned by `support`,
/// by Wolfe's minor cycles: solve the affine-hull relaxation on the active
/// set, and while that solution leaves the face, step back to the feasible
/// boundary and drop an atom that hit zero.
fn corrective_step(gram: &[Vec<f64>], w: &mut [f64], mut support: Vec<usize>) {
    loop {
        let v = affine_min(gram, &support);
        if v.iter().all(|&vj| vj >= 0.0) {
            w.fill(0.0);
            let sum: f64 = v.iter().sum();
            for (&j, &vj) in support.iter().zip(&v) {
                w[j] = vj / sum;
            }
            return;
        }
        // Largest step from w toward v that keeps the face weights feasible;
        // the blocking atom is dropped explicitly so every pass shrinks the
        // support even when rounding leaves it a hair above zero.
        let mut t: f64 = 1.0;
        let mut blocking = 0;
        for (idx, (&j, &vj)) in support.iter().zip(&v).enumerate() {
            if vj < 0.0 {
                let tj = w[j] / (w[j] - vj);
                if tj < t {
                    t = tj;
                    blocking = idx;
                }
            }
        }
        let mut kept = Vec::with_capacity(support.len());
        for (idx, (&j, &vj)) in support.iter().zip(&v).enumerate() {
            let moved = if idx == blocking { 0.0 } else { w[j] + t * (vj - w[j]) };
            w[j] = moved.max(0.0);
            if w[j] > 0.0 {
                kept.push(j);
            }
        }
        support = kept;
    }
}

/// Minimize `v' G_S v` subject to `sum(v) = 1` with signs free, via the KKT
/// system; a tiny ridge keeps the system solvable when atoms coincide.
fn affine_min(gram: &[Vec<f64>], support: &[usize]) -> Vec<f64> {
    let k = support.len();
    let ridge = 1e-12 * (1.0 + support.iter().map(|&j| gram[j][j]).fold(0.0, f64::max));
    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    for (a, &ja) in support.iter().enumerate() {
        for (b, &jb) in support.iter().enumerate() {
            kkt[(a, b)] = 2.0 * gram[ja][jb];
        }
        kkt[(a, a)] += ridge;
        kkt[(a, k)] = 1.0;
        kkt[(k, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    match kkt.lu().solve(&rhs) {
        Some(sol) => (0..k).map(|a| sol[a]).collect(),
        None => vec![1.0 / k as f64; k],
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// The three-case direction rule.
///
/// 1. Aggregated gradient (relatively) zero → the point is Pareto-stationary
///    under the models; move along the gradient of largest norm to traverse
///    the stationary set. All-zero gradients yield `u = 0` (caller skips).
/// 2. All pairwise gradient cosines above the threshold → gradients nearly
///    agree; follow the smallest one to avoid overshooting.
/// 3. Otherwise → the min-norm aggregated gradient, which descends every
///    objective for a small enough step.
///
/// Argmax/argmin ties resolve to the lowest index.
pub fn direction(gradients: &[Vec<f64>], weights: &[f64], config: &MgdConfig) -> DirectionOutcome {
    assert_eq!(gradients.len(), weights.len(), "one weight per gradient");
    let dim = gradients[0].len();
    let norms: Vec<f64> = gradients.iter().map(|g| norm(g)).collect();
    let max_norm = norms.iter().fold(0.0f64, |a, &b| a.max(b));

    if max_norm == 0.0 {
        return DirectionOutcome {
            u: vec![0.0; dim],
            case_tag: CaseTag::Stationary,
            weights: weights.to_vec(),
        };
    }

    let mut agg = vec![0.0; dim];
    for (g, w) in gradients.iter().zip(weights) {
        for d in 0..dim {
            agg[d] += w * g[d];
        }
    }

    if norm(&agg) < STATIONARY_REL_TOL * max_norm {
        let largest = argmax(&norms);
        return DirectionOutcome {
            u: gradients[largest].clone(),
            case_tag: CaseTag::Stationary,
            weights: weights.to_vec(),
        };
    }

    if all_pairwise_parallel(gradients, &norms, config.parallel_cos_threshold) {
        let smallest = argmin(&norms);
        return DirectionOutcome {
            u: gradients[smallest].clone(),
            case_tag: CaseTag::NearParallel,
            weights: weights.to_vec(),
        };
    }

    DirectionOutcome { u: agg, case_tag: CaseTag::Aggregated, weights: weights.to_vec() }
}

fn all_pairwise_parallel(gradients: &[Vec<f64>], norms: &[f64], threshold: f64) -> bool {
    for i in 0..gradients.len() {
        for j in (i + 1)..gradients.len() {
            if norms[i] == 0.0 || norms[j] == 0.0 {
                return false;
            }
            let cos = dot(&gradients[i], &gradients[j]) / (norms[i] * norms[j]);
            if cos <= threshold {
                return false;
            }
        }
    }
    true
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// One descent update: `x' = clip(x - eta * u, bounds)`.
pub fn mgd_step(x: &[f64], outcome: &DirectionOutcome, eta: f64, bounds: &Bounds) -> Vec<f64> {
    assert!(eta > 0.0 && eta <= 1.0, "step scale must lie in (0, 1]");
    if outcome.u.iter().all(|&v| v == 0.0) {
        return x.to_vec();
    }
    let moved: Vec<f64> = x.iter().zip(&outcome.u).map(|(xi, ui)| xi - eta * ui).collect();
    bounds.clip(&moved)
}

/// Gradient-guided candidate search on the surrogate means.
///
/// Starts from a Latin-hypercube population, then repeats `iterations` times:
/// every current point takes one descent step with a fresh uniform-(0,1]
/// scale (shrunk if needed so the travelled distance stays within
/// `max_step_frac` of the box diagonal) and the stepped point joins the
/// population; the population is then reduced to its predicted-nondominated
/// subset and crowding-truncated to `cap`. Deterministic given the config
/// seed.
pub fn mgd_search(
    models: &[GpSurrogate],
    bounds: &Bounds,
    config: &MgdConfig,
) -> Result<CandidateSet, MgdError> {
    search_impl(models, bounds, config, &[])
}

/// [`mgd_search`] with extra caller-supplied starting points (for example,
/// nondominated archive entries) joining the initial population. Not used by
/// the default pipeline.
pub fn mgd_search_seeded(
    models: &[GpSurrogate],
    bounds: &Bounds,
    config: &MgdConfig,
    seed_points: &[Vec<f64>],
) -> Result<CandidateSet, MgdError> {
    for (i, s) in seed_points.iter().enumerate() {
        if !bounds.contains(s) {
            return Err(MgdError::SeedOutOfBounds(i));
        }
    }
    search_impl(models, bounds, config, seed_points)
}

fn search_impl(
    models: &[GpSurrogate],
    bounds: &Bounds,
    config: &MgdConfig,
    seed_points: &[Vec<f64>],
) -> Result<CandidateSet, MgdError> {
    config.validate()?;
    if models.len() < 2 {
        return Err(MgdError::TooFewModels(models.len()));
    }
    for (i, model) in models.iter().enumerate() {
        if model.input_dim() != bounds.n() {
            return Err(MgdError::DimensionMismatch {
                model: i,
                model_dim: model.input_dim(),
                bounds_dim: bounds.n(),
            });
        }
    }

    let step_cap = config.max_step_frac * bounds.diagonal();
    let mut pool = lhs_sample(&LhsPlan {
        n_points: config.n_candidates,
        bounds: bounds.clone(),
        seed: config.seed,
    });
    pool.extend(seed_points.iter().cloned());
    let mut objs: Vec<Vec<f64>> = pool
        .iter()
        .map(|x| predict_all(models, x).ok_or(MgdError::ModelEval { iteration: 0 }))
        .collect::<Result<_, _>>()?;

    for iter in 1..=config.iterations {
        let base_len = pool.len();
        for idx in 0..base_len {
            let x = pool[idx].clone();
            let gradients: Vec<Vec<f64>> = models.iter().map(|m| m.grad_mean(&x)).collect();
            if gradients.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
                return Err(MgdError::ModelEval { iteration: iter });
            }
            let weights = min_norm_weights(&gradients);
            let outcome = direction(&gradients, &weights, config);
            if outcome.u.iter().all(|&v| v == 0.0) {
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(((iter as u64) << 32) | idx as u64);
            let mut eta = 1.0 - rng.gen::<f64>();
            let travel = eta * norm(&outcome.u);
            if travel > step_cap {
                eta *= step_cap / travel;
            }
            let stepped = mgd_step(&x, &outcome, eta, bounds);
            let pred =
                predict_all(models, &stepped).ok_or(MgdError::ModelEval { iteration: iter })?;
            pool.push(stepped);
            objs.push(pred);
        }

        let mut keep = nondominated_filter(&objs);
        if keep.len() > config.cap {
            let front: Vec<Vec<f64>> = keep.iter().map(|&i| objs[i].clone()).collect();
            keep = crowding_truncate(&front, config.cap)
                .into_iter()
                .map(|j| keep[j])
                .collect();
        }
        pool = keep.iter().map(|&i| pool[i].clone()).collect();
        objs = keep.iter().map(|&i| objs[i].clone()).collect();
    }

    let solutions = pool
        .into_iter()
        .zip(objs)
        .map(|(x, f)| Solution::with_predicted(x, f))
        .collect();
    Ok(CandidateSet { solutions })
}

fn predict_all(models: &[GpSurrogate], x: &[f64]) -> Option<Vec<f64>> {
    let pred: Vec<f64> = models.iter().map(|m| m.predict_mean(x)).collect();
    if pred.iter().all(|v| v.is_finite()) {
        Some(pred)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> MgdConfig {
        MgdConfig::default()
    }

    /// GPs for f1(x) = x^2, f2(x) = (x-1)^2 on [0, 2] from a dense design;
    /// the surrogate Pareto set is close to the analytic one, [0, 1].
    fn quadratic_pair_models(n_train: usize) -> (Vec<GpSurrogate>, Bounds) {
        let bounds = Bounds::new(vec![0.0], vec![2.0]).unwrap();
        let xs: Vec<Vec<f64>> =
            (0..n_train).map(|i| vec![2.0 * i as f64 / (n_train - 1) as f64]).collect();
        let f1: Vec<f64> = xs.iter().map(|x| x[0] * x[0]).collect();
        let f2: Vec<f64> = xs.iter().map(|x| (x[0] - 1.0) * (x[0] - 1.0)).collect();
        let models =
            vec![GpSurrogate::fit(&xs, &f1).unwrap(), GpSurrogate::fit(&xs, &f2).unwrap()];
        (models, bounds)
    }

    /// GPs for the spheres centered at (0.5, 0.5) and (1.5, 1.5) on [0, 2]^2.
    /// In one dimension two gradients are always (anti-)parallel, so only a
    /// planar problem exercises the aggregated branch of the direction rule.
    fn quadratic_pair_models_2d(side: usize) -> (Vec<GpSurrogate>, Bounds) {
        let bounds = Bounds::new(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap();
        let mut xs = Vec::new();
        for i in 0..side {
            for j in 0..side {
                xs.push(vec![
                    2.0 * i as f64 / (side - 1) as f64,
                    2.0 * j as f64 / (side - 1) as f64,
                ]);
            }
        }
        let sphere = |x: &[f64], c: f64| (x[0] - c).powi(2) + (x[1] - c).powi(2);
        let f1: Vec<f64> = xs.iter().map(|x| sphere(x, 0.5)).collect();
        let f2: Vec<f64> = xs.iter().map(|x| sphere(x, 1.5)).collect();
        let models =
            vec![GpSurrogate::fit(&xs, &f1).unwrap(), GpSurrogate::fit(&xs, &f2).unwrap()];
        (models, bounds)
    }

    #[test]
    fn weights_orthogonal_gradients_split_evenly() {
        let w = min_norm_weights(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn weights_opposed_gradients_reach_zero() {
        let g = [vec![2.0, 0.0], vec![-1.0, 0.0]];
        let w = min_norm_weights(&g);
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-12);
        let agg = w[0] * g[0][0] + w[1] * g[1][0];
        assert!(agg.abs() < 1e-12);
    }

    #[test]
    fn weights_identical_gradients_split_evenly() {
        let w = min_norm_weights(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(w, vec![0.5, 0.5]);
    }

    #[test]
    fn closed_form_matches_grid_argmin() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let g1: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let g2: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let w = min_norm_weights(&[g1.clone(), g2.clone()]);

            let combo_norm = |w1: f64| {
                (0..3)
                    .map(|d| {
                        let v = w1 * g1[d] + (1.0 - w1) * g2[d];
                        v * v
                    })
                    .sum::<f64>()
            };
            let mut best = (f64::INFINITY, 0.0);
            let steps = 10_000;
            for k in 0..=steps {
                let w1 = k as f64 / steps as f64;
                let v = combo_norm(w1);
                if v < best.0 {
                    best = (v, w1);
                }
            }
            assert!((w[0] - best.1).abs() <= 1e-3, "closed {} vs grid {}", w[0], best.1);
        }
    }

    #[test]
    fn frank_wolfe_three_orthogonal_gradients() {
        let g = [
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let w = min_norm_weights(&g);
        for wj in &w {
            assert!((wj - 1.0 / 3.0).abs() < 1e-6, "{w:?}");
        }
    }

    #[test]
    fn frank_wolfe_finds_zero_in_hull() {
        let g = [vec![2.0, 0.0], vec![-1.0, 1.0], vec![-1.0, -1.0]];
        let w = min_norm_weights(&g);
        let agg = [
            w[0] * 2.0 - w[1] - w[2],
            w[1] - w[2],
        ];
        assert!(norm(&agg) < 1e-5, "aggregated {agg:?} with weights {w:?}");
    }

    #[test]
    fn frank_wolfe_handles_parallel_gradients() {
        // Two gradients share a direction; the optimum puts zero weight on
        // the longer one and splits the rest orthogonally. A plain toward-step
        // iteration zig-zags here and misses the optimum by ~1e-2 within its
        // round cap; the corrective solve settles it exactly.
        let a = 3.816215511785254;
        let b = 4.5192207622785014;
        let c = 3.606705068382414;
        let g = [vec![0.0, a], vec![b, 0.0], vec![0.0, c]];
        let w = min_norm_weights(&g);
        let agg = [w[1] * b, w[0] * a + w[2] * c];
        let best = b * c / (b * b + c * c).sqrt();
        assert!(norm(&agg) <= best + 1e-9, "norm {} vs best {best}", norm(&agg));
        assert!(w[0] < 1e-9, "weight on the dominated parallel gradient: {w:?}");
    }

    #[test]
    fn frank_wolfe_handles_thin_triangles() {
        // The hull is a sliver (widths ~0.1 against lengths ~7) that contains
        // the origin; gradient-descent-flavoured iterations stall on such
        // conditioning, while the corrective solve reaches the interior zero.
        let g = [
            vec![3.6274024274621457, -0.8963105180657264],
            vec![-0.6878502015439939, 0.22532664922384926],
            vec![-3.6554889468766305, 0.7963362411160559],
        ];
        let w = min_norm_weights(&g);
        let agg = [
            w[0] * g[0][0] + w[1] * g[1][0] + w[2] * g[2][0],
            w[0] * g[0][1] + w[1] * g[1][1] + w[2] * g[2][1],
        ];
        assert!(norm(&agg) < 1e-6, "aggregated {agg:?} with weights {w:?}");
    }

    #[test]
    fn direction_opposed_picks_larger_norm() {
        let g = vec![vec![1.0, 0.0], vec![-2.0, 0.0]];
        let w = min_norm_weights(&g);
        let out = direction(&g, &w, &cfg());
        assert_eq!(out.case_tag, CaseTag::Stationary);
        assert_eq!(out.u, vec![-2.0, 0.0]);
    }

    #[test]
    fn direction_near_parallel_picks_smaller_norm() {
        let g = vec![vec![1.0, 0.0], vec![1.0, 0.01]];
        let w = min_norm_weights(&g);
        let out = direction(&g, &w, &cfg());
        assert_eq!(out.case_tag, CaseTag::NearParallel);
        assert_eq!(out.u, vec![1.0, 0.0]);
    }

    #[test]
    fn direction_general_position_aggregates() {
        let g = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let w = min_norm_weights(&g);
        let out = direction(&g, &w, &cfg());
        assert_eq!(out.case_tag, CaseTag::Aggregated);
        assert!((out.u[0] - 0.5).abs() < 1e-15 && (out.u[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn direction_all_zero_gradients() {
        let g = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let w = min_norm_weights(&g);
        let out = direction(&g, &w, &cfg());
        assert_eq!(out.case_tag, CaseTag::Stationary);
        assert_eq!(out.u, vec![0.0, 0.0]);
    }

    #[test]
    fn direction_ties_resolve_to_lowest_index() {
        // Equal norms, opposed: the aggregated combination is zero, and the
        // "largest norm" tie must go to index 0.
        let g = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let w = min_norm_weights(&g);
        let out = direction(&g, &w, &cfg());
        assert_eq!(out.case_tag, CaseTag::Stationary);
        assert_eq!(out.u, vec![1.0, 0.0]);
    }

    #[test]
    fn step_examples() {
        let b = Bounds::unit(1);
        let zero = DirectionOutcome {
            u: vec![0.0],
            case_tag: CaseTag::Stationary,
            weights: vec![0.5, 0.5],
        };
        assert_eq!(mgd_step(&[0.5], &zero, 0.7, &b), vec![0.5]);
        let unit = DirectionOutcome {
            u: vec![1.0],
            case_tag: CaseTag::Aggregated,
            weights: vec![0.5, 0.5],
        };
        assert_eq!(mgd_step(&[0.5], &unit, 0.25, &b), vec![0.25]);
        assert_eq!(mgd_step(&[0.1], &unit, 0.5, &b), vec![0.0]);
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        assert!(matches!(
            MgdConfig { n_candidates: 1, ..cfg() }.validate(),
            Err(MgdError::TooFewCandidates(1))
        ));
        assert!(matches!(
            MgdConfig { iterations: 0, ..cfg() }.validate(),
            Err(MgdError::NoIterations)
        ));
        assert!(matches!(
            MgdConfig { parallel_cos_threshold: 1.0, ..cfg() }.validate(),
            Err(MgdError::BadThreshold(_))
        ));
        assert!(matches!(MgdConfig { cap: 0, ..cfg() }.validate(), Err(MgdError::ZeroCap)));
    }

    #[test]
    fn search_concentrates_on_surrogate_pareto_set() {
        let (models, bounds) = quadratic_pair_models(20);
        let config = MgdConfig { seed: 7, ..cfg() };
        let set = mgd_search(&models, &bounds, &config).unwrap();
        assert!(!set.is_empty());
        let inside = set
            .solutions
            .iter()
            .filter(|s| s.x[0] >= -0.05 && s.x[0] <= 1.05)
            .count();
        assert!(
            inside as f64 >= 0.95 * set.len() as f64,
            "{inside}/{} candidates near the Pareto set",
            set.len()
        );
    }

    #[test]
    fn search_growth_bound_and_cap() {
        let (models, bounds) = quadratic_pair_models(8);
        let config =
            MgdConfig { n_candidates: 2, iterations: 1, cap: 200, seed: 1, ..cfg() };
        let set = mgd_search(&models, &bounds, &config).unwrap();
        // One iteration from two points appends at most two more.
        assert!(set.len() <= 4, "|P| = {}", set.len());

        let tight = MgdConfig { cap: 3, iterations: 4, seed: 1, ..cfg() };
        let set = mgd_search(&models, &bounds, &tight).unwrap();
        assert!(set.len() <= 3);
    }

    #[test]
    fn search_output_is_predicted_nondominated() {
        let (models, bounds) = quadratic_pair_models(12);
        let config = MgdConfig { n_candidates: 30, iterations: 10, seed: 3, ..cfg() };
        let set = mgd_search(&models, &bounds, &config).unwrap();
        let preds = set.predicted();
        let keep = nondominated_filter(&preds);
        assert_eq!(keep.len(), preds.len(), "dominated candidate survived");
        for s in &set.solutions {
            assert!(bounds.contains(&s.x));
        }
    }

    #[test]
    fn search_is_deterministic_in_seed() {
        let (models, bounds) = quadratic_pair_models(12);
        let config = MgdConfig { n_candidates: 20, iterations: 5, seed: 11, ..cfg() };
        let a = mgd_search(&models, &bounds, &config).unwrap();
        let b = mgd_search(&models, &bounds, &config).unwrap();
        assert_eq!(a.solutions, b.solutions);
        let other = MgdConfig { seed: 12, ..config };
        let c = mgd_search(&models, &bounds, &other).unwrap();
        assert_ne!(a.solutions, c.solutions);
    }

    #[test]
    fn seeded_search_validates_and_uses_seeds() {
        let (models, bounds) = quadratic_pair_models(12);
        let config = MgdConfig { n_candidates: 5, iterations: 2, seed: 2, ..cfg() };
        assert!(matches!(
            mgd_search_seeded(&models, &bounds, &config, &[vec![5.0]]),
            Err(MgdError::SeedOutOfBounds(0))
        ));
        let seeded = mgd_search_seeded(&models, &bounds, &config, &[vec![0.5]]).unwrap();
        assert!(!seeded.is_empty());
    }

    #[test]
    fn search_rejects_mismatched_models() {
        let (models, _) = quadratic_pair_models(8);
        let wrong = Bounds::unit(2);
        assert!(matches!(
            mgd_search(&models, &wrong, &cfg()),
            Err(MgdError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            mgd_search(&models[..1], &Bounds::new(vec![0.0], vec![2.0]).unwrap(), &cfg()),
            Err(MgdError::TooFewModels(1))
        ));
    }

    #[test]
    fn small_steps_descend_every_objective() {
        // Away from stationarity, a small enough step along the aggregated
        // direction must improve all predicted objectives at once. The step
        // length shrinks with the aggregated norm so "small enough" holds
        // uniformly across the sampled points.
        let (models, bounds) = quadratic_pair_models_2d(8);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(123);
        let mut eligible = 0;
        let mut improved = 0;
        let diag = bounds.diagonal();
        for _ in 0..100_000 {
            if eligible == 1000 {
                break;
            }
            let x: Vec<f64> =
                (0..2).map(|_| rand::Rng::gen_range(&mut rng, 0.02..1.98)).collect();
            let gradients: Vec<Vec<f64>> = models.iter().map(|m| m.grad_mean(&x)).collect();
            let weights = min_norm_weights(&gradients);
            let out = direction(&gradients, &weights, &cfg());
            if out.case_tag != CaseTag::Aggregated || norm(&out.u) <= 1e-6 {
                continue;
            }
            eligible += 1;
            let u_norm = norm(&out.u);
            let eta = (1e-3 * diag / u_norm).min(0.1);
            let stepped = mgd_step(&x, &out, eta, &bounds);
            let before: Vec<f64> = models.iter().map(|m| m.predict_mean(&x)).collect();
            let after: Vec<f64> = models.iter().map(|m| m.predict_mean(&stepped)).collect();
            if after.iter().zip(&before).all(|(a, b)| a < b) {
                improved += 1;
            }
        }
        assert_eq!(eligible, 1000, "aggregated-case samples are too rare");
        assert!(improved >= 990, "only {improved}/1000 strictly improved");
    }

    #[test]
    fn stationary_steps_stay_near_pareto_set() {
        // On the quadratic pair the analytic Pareto set is [0, 1]. For
        // stationary points the rule follows the larger gradient, which
        // traverses the set without leaving it as long as the step scale
        // stays at or below 1/2.
        let (models, bounds) = quadratic_pair_models(20);
        let mut checked = 0;
        for i in 0..200 {
            let x = vec![0.05 + 0.9 * i as f64 / 199.0];
            let gradients: Vec<Vec<f64>> = models.iter().map(|m| m.grad_mean(&x)).collect();
            let weights = min_norm_weights(&gradients);
            let out = direction(&gradients, &weights, &cfg());
            if out.case_tag != CaseTag::Stationary || out.u.iter().all(|&v| v == 0.0) {
                continue;
            }
            for eta in [0.1, 0.3, 0.5] {
                let stepped = mgd_step(&x, &out, eta, &bounds);
                assert!(
                    stepped[0] >= -1e-2 && stepped[0] <= 1.0 + 1e-2,
                    "stepped to {} from {} (eta {eta})",
                    stepped[0],
                    x[0]
                );
            }
            checked += 1;
        }
        assert!(checked >= 100, "only {checked} stationary points found");
    }

    proptest! {
        #[test]
        fn weights_are_simplex_and_minimal(
            m in 2usize..4,
            dim in 1usize..4,
            flat in prop::collection::vec(-5.0..5.0f64, 12),
        ) {
            let gradients: Vec<Vec<f64>> =
                (0..m).map(|i| flat[i * dim..(i + 1) * dim].to_vec()).collect();
            let w = min_norm_weights(&gradients);
            prop_assert_eq!(w.len(), m);
            prop_assert!(w.iter().all(|&wj| wj >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);

            let combo = |weights: &[f64]| -> f64 {
                let mut agg = vec![0.0; dim];
                for (g, wj) in gradients.iter().zip(weights) {
                    for d in 0..dim {
                        agg[d] += wj * g[d];
                    }
                }
                norm(&agg)
            };
            let achieved = combo(&w);
            // Never worse than any single gradient...
            for g in &gradients {
                prop_assert!(achieved <= norm(g) + 1e-7);
            }
            // ...nor than any simplex grid point (step 1e-2).
            let tol = 1e-6;
            let steps = 100usize;
            if m == 2 {
                for a in 0..=steps {
                    let v = [a as f64 / steps as f64, 1.0 - a as f64 / steps as f64];
                    prop_assert!(achieved <= combo(&v) + tol);
                }
            } else {
                for a in 0..=steps {
                    for b in 0..=(steps - a) {
                        let v = [
                            a as f64 / steps as f64,
                            b as f64 / steps as f64,
                            (steps - a - b) as f64 / steps as f64,
                        ];
                        prop_assert!(achieved <= combo(&v) + tol);
                    }
                }
            }
        }

        #[test]
        fn direction_tag_matches_predicates(
            flat in prop::collection::vec(-3.0..3.0f64, 4),
        ) {
            let gradients = vec![flat[0..2].to_vec(), flat[2..4].to_vec()];
            let w = min_norm_weights(&gradients);
            let out = direction(&gradients, &w, &cfg());

            let norms: Vec<f64> = gradients.iter().map(|g| norm(g)).collect();
            let max_norm = norms.iter().fold(0.0f64, |a, &b| a.max(b));
            let agg: Vec<f64> = (0..2)
                .map(|d| w[0] * gradients[0][d] + w[1] * gradients[1][d])
                .collect();
            let expected = if max_norm == 0.0 || norm(&agg) < STATIONARY_REL_TOL * max_norm {
                CaseTag::Stationary
            } else if dot(&gradients[0], &gradients[1]) / (norms[0] * norms[1]) > 0.95 {
                CaseTag::NearParallel
            } else {
                CaseTag::Aggregated
            };
            prop_assert_eq!(out.case_tag, expected);
        }

        #[test]
        fn step_never_leaves_bounds(
            x in prop::collection::vec(0.0..1.0f64, 3),
            u in prop::collection::vec(-10.0..10.0f64, 3),
            eta in 0.0001..1.0f64,
        ) {
            let b = Bounds::unit(3);
            let out = DirectionOutcome {
                u,
                case_tag: CaseTag::Aggregated,
                weights: vec![0.5, 0.5],
            };
            let stepped = mgd_step(&x, &out, eta, &b);
            prop_assert!(b.contains(&stepped));
        }
    }
}
