//! Two-objective benchmark problems with disconnected Pareto fronts — ZDT3,
//! DTLZ7, WFG2 — plus frequency-scaled variants that increase the number of
//! front segments, and dense analytic front samplers for oracle hypervolume.
//!
//! Variants: the `disconnect_param` k scales the disconnection-inducing
//! frequency of each problem (ZDT3's `sin(10πf1)` becomes `sin(10kπf1)`,
//! DTLZ7's `sin(3πf1)` becomes `sin(3kπf1)`, WFG2's shape constant 5 becomes
//! 5k). k = 1 is the standard form; larger k never produces fewer segments.

use crate::core::{nondominated_filter, Bounds};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

/// WFG position parameters (fixed for two objectives).
const WFG_K_POS: usize = 2;
/// Sweep resolution of the first (segment-finding) pass of the front sampler.
const PF_COARSE_SWEEP: usize = 8192;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("unknown problem '{0}' (expected zdt3, dtlz7 or wfg2, optionally with -k2/-k3)")]
    UnknownName(String),
    #[error("{name} needs at least {min} variables, got {n}")]
    TooFewVariables { name: &'static str, n: usize, min: usize },
    #[error("disconnection parameter must be at least 1")]
    BadDisconnect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Zdt3,
    Dtlz7,
    Wfg2,
}

/// A benchmark instance: a pure evaluator over box bounds.
#[derive(Debug, Clone)]
pub struct Problem {
    name: String,
    family: Family,
    n: usize,
    bounds: Bounds,
    disconnect_param: u32,
}

impl Problem {
    pub fn zdt3(n: usize, disconnect_param: u32) -> Result<Self, ProblemError> {
        Self::build(Family::Zdt3, n, disconnect_param)
    }

    pub fn dtlz7(n: usize, disconnect_param: u32) -> Result<Self, ProblemError> {
        Self::build(Family::Dtlz7, n, disconnect_param)
    }

    pub fn wfg2(n: usize, disconnect_param: u32) -> Result<Self, ProblemError> {
        Self::build(Family::Wfg2, n, disconnect_param)
    }

    /// Registry lookup: `"zdt3"`, `"dtlz7-k2"`, `"wfg2-k3"`, ...
    pub fn by_name(name: &str, n: usize) -> Result<Self, ProblemError> {
        let lower = name.to_ascii_lowercase();
        let (base, k) = match lower.split_once("-k") {
            Some((base, suffix)) => {
                let k: u32 = suffix.parse().map_err(|_| ProblemError::UnknownName(lower.clone()))?;
                (base.to_string(), k)
            }
            None => (lower.clone(), 1),
        };
        match base.as_str() {
            "zdt3" => Self::zdt3(n, k),
            "dtlz7" => Self::dtlz7(n, k),
            "wfg2" => Self::wfg2(n, k),
            _ => Err(ProblemError::UnknownName(lower)),
        }
    }

    fn build(family: Family, n: usize, disconnect_param: u32) -> Result<Self, ProblemError> {
        if disconnect_param == 0 {
            return Err(ProblemError::BadDisconnect);
        }
        let (base, min_n) = match family {
            Family::Zdt3 => ("zdt3", 2),
            Family::Dtlz7 => ("dtlz7", 2),
            // Two position parameters plus at least one distance parameter.
            Family::Wfg2 => ("wfg2", WFG_K_POS + 1),
        };
        if n < min_n {
            return Err(ProblemError::TooFewVariables { name: base, n, min: min_n });
        }
        let bounds = match family {
            Family::Zdt3 | Family::Dtlz7 => Bounds::unit(n),
            Family::Wfg2 => Bounds::new(
                vec![0.0; n],
                (1..=n).map(|i| 2.0 * i as f64).collect(),
            )
            .expect("wfg bounds are valid"),
        };
        let name = if disconnect_param == 1 {
            base.to_string()
        } else {
            format!("{base}-k{disconnect_param}")
        };
        Ok(Self { name, family, n, bounds, disconnect_param })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Objective count (this suite is two-objective throughout).
    pub fn m(&self) -> usize {
        2
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn disconnect_param(&self) -> u32 {
        self.disconnect_param
    }

    /// Evaluate the objectives at an in-bounds point.
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        assert!(
            self.bounds.contains(x),
            "{}: point outside bounds or wrong dimension",
            self.name
        );
        match self.family {
            Family::Zdt3 => self.eval_zdt3(x),
            Family::Dtlz7 => self.eval_dtlz7(x),
            Family::Wfg2 => self.eval_wfg2(x),
        }
    }

    fn eval_zdt3(&self, x: &[f64]) -> Vec<f64> {
        let f1 = x[0];
        let g = 1.0 + 9.0 * x[1..].iter().sum::<f64>() / (self.n - 1) as f64;
        let ratio = f1 / g;
        let freq = 10.0 * self.disconnect_param as f64 * PI;
        let h = 1.0 - ratio.sqrt() - ratio * (freq * f1).sin();
        vec![f1, g * h]
    }

    fn eval_dtlz7(&self, x: &[f64]) -> Vec<f64> {
        let f1 = x[0];
        let g = 1.0 + 9.0 * x[1..].iter().sum::<f64>() / (self.n - 1) as f64;
        let freq = 3.0 * self.disconnect_param as f64 * PI;
        let h = 2.0 - f1 / (1.0 + g) * (1.0 + (freq * f1).sin());
        vec![f1, (1.0 + g) * h]
    }

    /// WFG2 composition: normalize, shift the distance parameters linearly
    /// (A = 0.35), reduce them pairwise non-separably, average each group,
    /// then apply the convex and disconnected shape functions.
    fn eval_wfg2(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        let y: Vec<f64> =
            z.iter().enumerate().map(|(i, zi)| zi / (2.0 * (i + 1) as f64)).collect();

        let mut t1 = y;
        for v in t1.iter_mut().skip(WFG_K_POS) {
            *v = s_linear(*v, 0.35);
        }

        let mut t2: Vec<f64> = t1[..WFG_K_POS].to_vec();
        let l = n - WFG_K_POS;
        for p in 0..l / 2 {
            let a = t1[WFG_K_POS + 2 * p];
            let b = t1[WFG_K_POS + 2 * p + 1];
            t2.push((a + b + 2.0 * (a - b).abs()) / 3.0);
        }
        if l % 2 == 1 {
            // A leftover group of one: degree-one non-separability is the
            // identity, so the value passes through.
            t2.push(t1[n - 1]);
        }

        let u1 = t2[..WFG_K_POS].iter().sum::<f64>() / WFG_K_POS as f64;
        let dist = &t2[WFG_K_POS..];
        let u2 = dist.iter().sum::<f64>() / dist.len() as f64;

        let x1 = u2.max(1.0) * (u1 - 0.5) + 0.5;
        let freq = 5.0 * self.disconnect_param as f64 * PI;
        let f1 = u2 + 2.0 * (1.0 - (x1 * FRAC_PI_2).cos());
        let f2 = u2 + 4.0 * (1.0 - x1 * (freq * x1).cos().powi(2));
        vec![f1, f2]
    }

    /// The analytic objective-space curve whose nondominated portion is the
    /// Pareto front, parameterized by t in [0, 1] (distance components at
    /// their optima).
    fn front_curve(&self, t: f64) -> Vec<f64> {
        let k = self.disconnect_param as f64;
        match self.family {
            Family::Zdt3 => {
                vec![t, 1.0 - t.sqrt() - t * (10.0 * k * PI * t).sin()]
            }
            Family::Dtlz7 => vec![t, 4.0 - t * (1.0 + (3.0 * k * PI * t).sin())],
            Family::Wfg2 => vec![
                2.0 * (1.0 - (t * FRAC_PI_2).cos()),
                4.0 * (1.0 - t * (5.0 * k * PI * t).cos().powi(2)),
            ],
        }
    }

    /// Dense sample of the true Pareto front, roughly `density` points per
    /// disconnected segment, sorted by the first objective.
    ///
    /// Two passes: a coarse parameter sweep plus nondominated filtering finds
    /// the surviving parameter windows; each window is then resampled at the
    /// requested density and the union is filtered once more to trim window
    /// edges.
    pub fn true_pf_sample(&self, density: usize) -> Vec<Vec<f64>> {
        assert!(density >= 2, "need at least two points per segment");

        let ts: Vec<f64> =
            (0..PF_COARSE_SWEEP).map(|i| i as f64 / (PF_COARSE_SWEEP - 1) as f64).collect();
        let coarse: Vec<Vec<f64>> = ts.iter().map(|&t| self.front_curve(t)).collect();
        let survivors: Vec<f64> =
            nondominated_filter(&coarse).into_iter().map(|i| ts[i]).collect();

        // Consecutive survivors sit one sweep step apart inside a segment; a
        // larger jump marks a gap between segments.
        let step = 1.0 / (PF_COARSE_SWEEP - 1) as f64;
        let mut windows: Vec<(f64, f64)> = Vec::new();
        let mut start = survivors[0];
        let mut prev = survivors[0];
        for &t in &survivors[1..] {
            if t - prev > 2.5 * step {
                windows.push((start, prev));
                start = t;
            }
            prev = t;
        }
        windows.push((start, prev));

        let mut points: Vec<Vec<f64>> = Vec::new();
        for (lo, hi) in windows {
            for i in 0..density {
                let t = lo + (hi - lo) * i as f64 / (density - 1) as f64;
                points.push(self.front_curve(t));
            }
        }
        let mut front: Vec<Vec<f64>> =
            nondominated_filter(&points).into_iter().map(|i| points[i].clone()).collect();
        front.sort_by(|a, b| a[0].total_cmp(&b[0]));
        front.dedup();
        front
    }
}

/// WFG linear shift: distance 0 at `a`, scaled back to [0, 1] on both sides.
fn s_linear(y: f64, a: f64) -> f64 {
    (y - a).abs() / ((a - y).floor() + a).abs()
}

/// Number of disconnected stretches in a front, sorted by the first
/// objective: a consecutive gap larger than five times the median gap
/// separates segments.
pub fn count_segments(front: &[Vec<f64>]) -> usize {
    if front.len() < 3 {
        return front.len().min(1);
    }
    let mut f1: Vec<f64> = front.iter().map(|p| p[0]).collect();
    f1.sort_by(f64::total_cmp);
    let gaps: Vec<f64> = f1.windows(2).map(|w| w[1] - w[0]).collect();
    let mut sorted = gaps.clone();
    sorted.sort_by(f64::total_cmp);
    let mut median = sorted[sorted.len() / 2];
    if median <= 0.0 {
        median = (f1[f1.len() - 1] - f1[0]).max(f64::MIN_POSITIVE) / gaps.len() as f64;
    }
    1 + gaps.iter().filter(|g| **g > 5.0 * median).count()
}

/// True when `f` dominates some point of `front` beyond numerical noise —
/// i.e. the front sample is beatable. `front` must be sorted by the first
/// objective (as returned by [`Problem::true_pf_sample`]).
pub fn beats_front(f: &[f64], front: &[Vec<f64>]) -> bool {
    const EPS: f64 = 1e-9;
    let from = front.partition_point(|p| p[0] < f[0] - EPS);
    // Along the sorted front the second objective decreases, so only the
    // first couple of points at or beyond f[0] can still lose on both axes.
    front[from..].iter().take(2).any(|p| {
        f[0] <= p[0] + EPS && f[1] <= p[1] + EPS && (f[0] < p[0] - EPS || f[1] < p[1] - EPS)
    })
}
