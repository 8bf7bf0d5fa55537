//! Latin hypercube sampling for initial designs and search restarts.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::core::Bounds;

/// A Latin hypercube design: `n_points` equal-width strata per dimension, one
/// sample per stratum, stratum order shuffled independently per dimension.
#[derive(Debug, Clone)]
pub struct LhsPlan {
    pub n_points: usize,
    pub bounds: Bounds,
    pub seed: u64,
}

/// Draw the design described by `plan`. Placement within a stratum is uniform
/// random; the whole sample is a pure function of `(plan.seed, plan)`.
pub fn lhs_sample(plan: &LhsPlan) -> Vec<Vec<f64>> {
    assert!(plan.n_points >= 1, "a Latin hypercube needs at least one point");
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let n = plan.bounds.n();
    let p = plan.n_points;

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n);
    for dim in 0..n {
        let mut strata: Vec<usize> = (0..p).collect();
        strata.shuffle(&mut rng);
        let lo = plan.bounds.lower()[dim];
        let span = plan.bounds.span(dim);
        let column = strata
            .iter()
            .map(|&s| {
                let u: f64 = rng.gen();
                lo + (s as f64 + u) / p as f64 * span
            })
            .collect();
        columns.push(column);
    }

    (0..p).map(|i| (0..n).map(|dim| columns[dim][i]).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stratified(points: &[Vec<f64>], bounds: &Bounds) -> bool {
        let p = points.len();
        (0..bounds.n()).all(|dim| {
            let mut seen = vec![false; p];
            for point in points {
                let t = (point[dim] - bounds.lower()[dim]) / bounds.span(dim);
                let stratum = ((t * p as f64) as usize).min(p - 1);
                if seen[stratum] {
                    return false;
                }
                seen[stratum] = true;
            }
            seen.iter().all(|&s| s)
        })
    }

    #[test]
    fn four_points_occupy_four_strata() {
        let plan = LhsPlan { n_points: 4, bounds: Bounds::unit(1), seed: 9 };
        let pts = lhs_sample(&plan);
        assert_eq!(pts.len(), 4);
        assert!(stratified(&pts, &plan.bounds));
    }

    #[test]
    fn single_point_lies_inside_bounds() {
        let bounds = Bounds::new(vec![-2.0, 0.0], vec![2.0, 10.0]).unwrap();
        let pts = lhs_sample(&LhsPlan { n_points: 1, bounds: bounds.clone(), seed: 3 });
        assert_eq!(pts.len(), 1);
        assert!(bounds.contains(&pts[0]));
    }

    #[test]
    fn thirty_two_points_three_dims_stratified() {
        let bounds = Bounds::new(vec![0.0, -1.0, 5.0], vec![1.0, 1.0, 6.0]).unwrap();
        let pts = lhs_sample(&LhsPlan { n_points: 32, bounds: bounds.clone(), seed: 42 });
        assert!(stratified(&pts, &bounds));
        assert!(pts.iter().all(|x| bounds.contains(x)));
    }

    #[test]
    fn same_seed_reproduces_different_seed_differs() {
        let plan = LhsPlan { n_points: 16, bounds: Bounds::unit(3), seed: 7 };
        let a = lhs_sample(&plan);
        let b = lhs_sample(&plan);
        assert_eq!(a, b);
        let c = lhs_sample(&LhsPlan { seed: 8, ..plan });
        assert_ne!(a, c);
    }

    proptest! {
        #[test]
        fn stratification_holds(p in 1usize..40, seed in 0u64..1000, n in 1usize..5) {
            let bounds = Bounds::unit(n);
            let pts = lhs_sample(&LhsPlan { n_points: p, bounds: bounds.clone(), seed });
            prop_assert!(stratified(&pts, &bounds));
        }
    }
}
