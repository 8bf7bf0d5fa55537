//! Per-objective Gaussian-process regression.
//!
//! The kernel is `k(x, x') = gamma * exp(-||x - x'||^2 / ell)` (note: `ell`
//! divides the squared distance directly, so it has squared-distance units).
//! Targets are standardized to zero mean / unit variance before fitting and
//! the prior mean is zero in standardized space. Observations are noiseless:
//! the diagonal jitter exists only to keep factorizations numerically
//! meaningful, and when the noiseless correlation system is solvable at
//! double precision the posterior-mean weights come from solving it directly,
//! so the model interpolates training targets to well below 1e-6. When
//! training rows are nearly coincident that system stops being solvable; the
//! fit then keeps the jitter-regularized weights, which are exactly the model
//! the likelihood scored, instead of amplifying rounding noise into huge
//! oscillations between the near-duplicate rows.
//!
//! Hyperparameters are chosen by maximizing the log marginal likelihood over
//! the box `[1e-5, 1e5]^2` with coordinate-wise golden-section refinement
//! from eight log-uniformly spaced starts (well under 200 likelihood
//! evaluations per start). The search only scores cells whose unregularized
//! correlation matrix is numerically positive definite — elsewhere the
//! log-determinant term is a rounding artifact that can dwarf every honest
//! value — and because the jitter is proportional to `gamma`, each distinct
//! `ell` costs one Cholesky factorization while a whole `gamma` sweep reuses
//! it at O(1) per evaluation.

use std::cell::RefCell;
use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

type Cholesky = nalgebra::linalg::Cholesky<f64, Dyn>;

/// Lower edge of the hyperparameter search box.
pub const HYPER_MIN: f64 = 1e-5;
/// Upper edge of the hyperparameter search box.
pub const HYPER_MAX: f64 = 1e5;
/// First relative jitter added to the covariance diagonal.
pub const JITTER_START: f64 = 1e-8;
/// Largest relative jitter tried (escalating x10) before giving up.
pub const JITTER_MAX: f64 = 1e-2;
/// Targets with a standard deviation below this are modeled as constant.
const CONST_STD_TOL: f64 = 1e-12;
/// Largest residual (standardized units) at which the noiseless weight solve
/// is trusted. Past this the noiseless system is declared unsolvable at
/// double precision and the regularized weights are kept.
const REFINE_ACCEPT: f64 = 1e-7;
/// Reciprocal-condition floor shared by the hyperparameter search and the
/// noiseless weight solve: eigenvalues (or squared Cholesky pivots) of the
/// unregularized covariance below this fraction of its trace are treated as
/// numerically zero, since solving through them is dominated by rounding
/// error. Since the correlation matrix has unit diagonal, its trace is the
/// number of training points.
const RCOND_FLOOR: f64 = 1e-10;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("gaussian process needs at least two training points, got {0}")]
    TooFewPoints(usize),
    #[error("training data contains a non-finite value")]
    NonFiniteData,
    #[error("training rows have inconsistent dimensions")]
    RaggedInputs,
    #[error("targets and inputs differ in length ({targets} vs {inputs})")]
    LengthMismatch { targets: usize, inputs: usize },
    #[error("covariance not positive definite up to relative jitter {0:e}")]
    IllConditioned(f64),
    #[error("hyperparameters outside [{HYPER_MIN:e}, {HYPER_MAX:e}]: gamma={gamma}, ell={ell}")]
    ParamsOutOfRange { gamma: f64, ell: f64 },
    #[error("model dump rejected: {0}")]
    BadDump(String),
}

/// RBF kernel hyperparameters. `sigma_n` is the observation-noise standard
/// deviation and stays zero throughout this crate; conditioning is handled by
/// diagonal jitter instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub gamma: f64,
    pub ell: f64,
    pub sigma_n: f64,
}

impl KernelParams {
    pub fn new(gamma: f64, ell: f64) -> Result<Self, SurrogateError> {
        if !(HYPER_MIN..=HYPER_MAX).contains(&gamma) || !(HYPER_MIN..=HYPER_MAX).contains(&ell) {
            return Err(SurrogateError::ParamsOutOfRange { gamma, ell });
        }
        Ok(Self { gamma, ell, sigma_n: 0.0 })
    }
}

/// `k(a, b) = gamma * exp(-||a - b||^2 / ell)`.
pub fn kernel(a: &[f64], b: &[f64], params: &KernelParams) -> f64 {
    assert_eq!(a.len(), b.len(), "kernel arguments must have equal length");
    params.gamma * (-sq_dist(a, b) / params.ell).exp()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A fitted GP for one objective. Constant-target models keep `y_std == 0`
/// and skip the linear algebra entirely.
#[derive(Debug, Clone)]
pub struct GpSurrogate {
    params: KernelParams,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    y_mean: f64,
    y_std: f64,
    alpha: Vec<f64>,
    chol: Option<Cholesky>,
    jitter: f64,
}

/// Serializable snapshot of a fitted model: hyperparameters, training data,
/// and the standardization constants. Everything else is recomputed on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDump {
    pub params: KernelParams,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub y_mean: f64,
    pub y_std: f64,
}

impl GpSurrogate {
    /// Fit hyperparameters by log-marginal-likelihood maximization.
    ///
    /// Callers must not pass duplicate rows (the archive enforces this); a
    /// duplicated row usually surfaces as an ill-conditioning error.
    pub fn fit(x: &[Vec<f64>], y: &[f64]) -> Result<Self, SurrogateError> {
        validate_data(x, y)?;
        if x.len() < 2 {
            return Err(SurrogateError::TooFewPoints(x.len()));
        }
        let (y_mean, y_std) = standardization(y);
        if y_std < CONST_STD_TOL {
            return Ok(Self::constant(x, y, y_mean));
        }
        let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_std).collect();
        let ys_v = DVector::from_vec(ys);
        let d2 = pairwise_sq_dists(x);

        // Search the noiseless-representable cells first; only data that
        // admits no noiseless model anywhere (e.g. near-coincident rows with
        // differing targets) falls back to the repaired likelihood.
        let best = search_hypers(&d2, &ys_v, &ell_factor)
            .or_else(|| search_hypers(&d2, &ys_v, &ell_factor_repaired));
        let Some((_, lg_gamma, lg_ell)) = best else {
            return Err(SurrogateError::IllConditioned(JITTER_MAX));
        };
        let gamma = 10f64.powf(lg_gamma).clamp(HYPER_MIN, HYPER_MAX);
        let ell = 10f64.powf(lg_ell).clamp(HYPER_MIN, HYPER_MAX);
        Self::assemble(KernelParams { gamma, ell, sigma_n: 0.0 }, x.to_vec(), y.to_vec(), y_mean, y_std)
    }

    /// Rebuild a model from its dump, reusing the stored standardization
    /// constants. Accepts single-point training sets (unlike `fit`).
    pub fn from_dump(dump: ModelDump) -> Result<Self, SurrogateError> {
        validate_data(&dump.x, &dump.y)?;
        if dump.x.is_empty() {
            return Err(SurrogateError::TooFewPoints(0));
        }
        if !dump.y_mean.is_finite() || !dump.y_std.is_finite() || dump.y_std < 0.0 {
            return Err(SurrogateError::BadDump("bad standardization constants".into()));
        }
        KernelParams::new(dump.params.gamma, dump.params.ell)?;
        if dump.y_std < CONST_STD_TOL {
            return Ok(Self::constant(&dump.x, &dump.y, dump.y_mean));
        }
        Self::assemble(dump.params, dump.x, dump.y, dump.y_mean, dump.y_std)
    }

    pub fn to_dump(&self) -> ModelDump {
        ModelDump {
            params: self.params,
            x: self.x.clone(),
            y: self.y.clone(),
            y_mean: self.y_mean,
            y_std: self.y_std,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_dump()).expect("dump serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SurrogateError> {
        let dump: ModelDump =
            serde_json::from_str(text).map_err(|e| SurrogateError::BadDump(e.to_string()))?;
        Self::from_dump(dump)
    }

    fn constant(x: &[Vec<f64>], y: &[f64], y_mean: f64) -> Self {
        Self {
            params: KernelParams { gamma: 1.0, ell: 1.0, sigma_n: 0.0 },
            x: x.to_vec(),
            y: y.to_vec(),
            y_mean,
            y_std: 0.0,
            alpha: vec![0.0; x.len()],
            chol: None,
            jitter: 0.0,
        }
    }

    fn assemble(
        params: KernelParams,
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        y_mean: f64,
        y_std: f64,
    ) -> Result<Self, SurrogateError> {
        let n = y.len();
        let d2 = pairwise_sq_dists(&x);
        let (chol, jitter) = chol_covariance(&d2, params.gamma, params.ell)?;
        let ys = DVector::from_iterator(n, y.iter().map(|v| (v - y_mean) / y_std));

        // The weights solve the *noiseless* correlation system
        // `C beta = y_s` (so `alpha = beta / gamma`), which strips the
        // jitter's effect from the posterior mean and makes the interpolation
        // guarantee hold even when the fitted length scale leaves the system
        // barely positive definite: the solve is backward stable, so its
        // training residual stays near machine precision regardless of
        // conditioning as long as the weights themselves stay sane. They are
        // trusted only when that residual is small. Near-duplicate rows with
        // differing targets make the noiseless system unsolvable at double
        // precision — the weights explode and the residual grows with them —
        // and chasing those targets anyway would inject enormous oscillations
        // between the duplicates, so there the jittered weights (the model
        // the likelihood actually scored) win.
        let c = DMatrix::from_fn(n, n, |i, j| (-d2[(i, j)] / params.ell).exp());
        let noiseless = Cholesky::new(c.clone()).and_then(|cc| {
            let beta = cc.solve(&ys);
            let residual = (&c * &beta - &ys).amax();
            (residual <= REFINE_ACCEPT).then(|| beta / params.gamma)
        });
        let alpha = noiseless.unwrap_or_else(|| chol.solve(&ys)).iter().copied().collect();
        Ok(Self { params, x, y, y_mean, y_std, alpha, chol: Some(chol), jitter })
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn input_dim(&self) -> usize {
        self.x[0].len()
    }

    pub fn training_len(&self) -> usize {
        self.x.len()
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn y_std(&self) -> f64 {
        self.y_std
    }

    /// Relative diagonal jitter the factorization actually needed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// De-standardized predictive mean at `z`.
    pub fn predict_mean(&self, z: &[f64]) -> f64 {
        assert_eq!(z.len(), self.input_dim(), "query dimension mismatch");
        if self.y_std == 0.0 {
            return self.y_mean;
        }
        let mut acc = 0.0;
        for (xi, a) in self.x.iter().zip(&self.alpha) {
            acc += a * kernel(z, xi, &self.params);
        }
        self.y_mean + self.y_std * acc
    }

    /// De-standardized predictive variance at `z`; clamped at zero.
    pub fn predict_variance(&self, z: &[f64]) -> f64 {
        assert_eq!(z.len(), self.input_dim(), "query dimension mismatch");
        let Some(chol) = &self.chol else { return 0.0 };
        let kstar = DVector::from_iterator(
            self.x.len(),
            self.x.iter().map(|xi| kernel(z, xi, &self.params)),
        );
        let v = self.params.gamma - kstar.dot(&chol.solve(&kstar));
        v.max(0.0) * self.y_std * self.y_std
    }

    /// Analytic gradient of [`Self::predict_mean`] at `z`:
    /// `sum_i alpha_i * (-2/ell) * (z - x_i) * k(z, x_i)`, de-standardized.
    pub fn grad_mean(&self, z: &[f64]) -> Vec<f64> {
        let dim = self.input_dim();
        assert_eq!(z.len(), dim, "query dimension mismatch");
        let mut grad = vec![0.0; dim];
        if self.y_std == 0.0 {
            return grad;
        }
        let scale = -2.0 / self.params.ell;
        for (xi, a) in self.x.iter().zip(&self.alpha) {
            let w = a * kernel(z, xi, &self.params) * scale;
            for d in 0..dim {
                grad[d] += w * (z[d] - xi[d]);
            }
        }
        for g in &mut grad {
            *g *= self.y_std;
        }
        grad
    }
}

/// Log marginal likelihood of the standardized targets under `params`,
/// using the same jitter escalation as fitting.
pub fn log_marginal_likelihood(
    params: &KernelParams,
    x: &[Vec<f64>],
    y: &[f64],
) -> Result<f64, SurrogateError> {
    validate_data(x, y)?;
    if x.len() < 2 {
        return Err(SurrogateError::TooFewPoints(x.len()));
    }
    KernelParams::new(params.gamma, params.ell)?;
    let (y_mean, y_std) = standardization(y);
    let ys = if y_std < CONST_STD_TOL {
        DVector::zeros(y.len())
    } else {
        DVector::from_iterator(y.len(), y.iter().map(|v| (v - y_mean) / y_std))
    };
    let d2 = pairwise_sq_dists(x);
    let (chol, _) = chol_covariance(&d2, params.gamma, params.ell)?;
    let alpha = chol.solve(&ys);
    let n = y.len() as f64;
    let logdet_half: f64 = (0..y.len()).map(|i| chol.l_dirty()[(i, i)].ln()).sum();
    Ok(-0.5 * ys.dot(&alpha) - logdet_half - 0.5 * n * LN_2PI)
}

fn validate_data(x: &[Vec<f64>], y: &[f64]) -> Result<(), SurrogateError> {
    if x.len() != y.len() {
        return Err(SurrogateError::LengthMismatch { targets: y.len(), inputs: x.len() });
    }
    let dim = x.first().map_or(0, |r| r.len());
    for row in x {
        if row.len() != dim || dim == 0 {
            return Err(SurrogateError::RaggedInputs);
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(SurrogateError::NonFiniteData);
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SurrogateError::NonFiniteData);
    }
    Ok(())
}

/// Population mean and standard deviation of the targets.
fn standardization(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn pairwise_sq_dists(x: &[Vec<f64>]) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| sq_dist(&x[i], &x[j]))
}

/// Maximize the log marginal likelihood over the box
/// `[HYPER_MIN, HYPER_MAX]^2` by coordinate-wise golden-section refinement of
/// (log10 gamma, log10 ell) from eight log-uniformly spaced starts, each
/// confined to its own ell tile so the starts stay distinct. Factorizations
/// depend on `ell` alone, so the cache makes every gamma evaluation O(1); the
/// five rounds below spend the ~200-likelihood-evaluation budget of each
/// start. Returns `(lml, lg_gamma, lg_ell)` of the best finite cell, or
/// `None` when `factor` rejected every cell the search visited.
fn search_hypers(
    d2: &DMatrix<f64>,
    ys: &DVector<f64>,
    factor: &dyn Fn(&DMatrix<f64>, &DVector<f64>, f64) -> Option<EllFactor>,
) -> Option<(f64, f64, f64)> {
    let nf = ys.len() as f64;
    let cache: RefCell<BTreeMap<u64, Option<EllFactor>>> = RefCell::new(BTreeMap::new());
    let lml = |lg_gamma: f64, lg_ell: f64| -> f64 {
        let mut cache = cache.borrow_mut();
        let fac = cache
            .entry(lg_ell.to_bits())
            .or_insert_with(|| factor(d2, ys, 10f64.powf(lg_ell)));
        match fac {
            Some(f) => {
                let gamma = 10f64.powf(lg_gamma);
                -0.5 * (f.q / gamma + nf * gamma.ln() + f.logdet + nf * LN_2PI)
            }
            None => f64::NEG_INFINITY,
        }
    };
    let lg_min = HYPER_MIN.log10();
    let lg_max = HYPER_MAX.log10();
    let starts = 8;
    let tile = (lg_max - lg_min) / starts as f64;
    let mut best: Option<(f64, f64, f64)> = None;
    for s in 0..starts {
        let lo = lg_min + tile * s as f64;
        let hi = lo + tile;
        let mut lg_gamma = 0.0;
        let mut lg_ell = 0.5 * (lo + hi);
        let mut value = f64::NEG_INFINITY;
        for _round in 0..5 {
            let (g, _) = golden_max(&|lg| lml(lg, lg_ell), lg_min, lg_max, 20);
            lg_gamma = g;
            let (l, v) = golden_max(&|lg| lml(lg_gamma, lg), lo, hi, 16);
            lg_ell = l;
            value = v;
        }
        if best.map_or(true, |(bv, _, _)| value > bv) {
            best = Some((value, lg_gamma, lg_ell));
        }
    }
    best.filter(|(value, _, _)| value.is_finite())
}

/// The two data-dependent numbers the log marginal likelihood needs at a
/// fixed `ell`: the quadratic form `q = y_s' C^{-1} y_s` and `log|C|` of the
/// correlation matrix the tier factored (unregularized in the noiseless
/// search, jittered in the repaired fallback). Scaling by any `gamma` then
/// costs O(1), because the relative jitter scales with `gamma` too.
struct EllFactor {
    q: f64,
    logdet: f64,
}

/// Likelihood pieces at one `ell`, or `None` when no noiseless model exists
/// there: the unregularized correlation matrix must factor with every
/// Cholesky pivot above the conditioning floor. Where it cannot, no
/// interpolating posterior exists at double precision, and evaluating the
/// likelihood anyway would hand the search values that are numerically
/// meaningless — and occasionally enormous, because the log-determinant of a
/// nearly singular covariance diverges. (A jittered factorization cannot
/// stand in here: adding `j*I` floors every pivot near `sqrt(j)`, hiding
/// exactly the degeneracy this fence exists to detect.)
fn ell_factor(d2: &DMatrix<f64>, ys: &DVector<f64>, ell: f64) -> Option<EllFactor> {
    let n = ys.len();
    let c = DMatrix::from_fn(n, n, |i, j| (-d2[(i, j)] / ell).exp());
    let chol = Cholesky::new(c)?;
    let min_pivot = (0..n).fold(f64::INFINITY, |acc, i| acc.min(chol.l_dirty()[(i, i)]));
    if min_pivot * min_pivot < RCOND_FLOOR * n as f64 {
        return None;
    }
    finish_factor(&chol, ys)
}

/// Likelihood pieces at one `ell` for data on which no length scale admits a
/// noiseless model (for example near-coincident rows with differing
/// targets). The jitter starts high enough that the factorization is
/// trustworthy and the likelihood honestly scores the regularized model.
fn ell_factor_repaired(d2: &DMatrix<f64>, ys: &DVector<f64>, ell: f64) -> Option<EllFactor> {
    let n = d2.nrows();
    let mut jitter = JITTER_START;
    while jitter < RCOND_FLOOR * n as f64 {
        jitter *= 10.0;
    }
    while jitter <= JITTER_MAX * (1.0 + 1e-12) {
        let mut m = DMatrix::from_fn(n, n, |i, j| (-d2[(i, j)] / ell).exp());
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            return finish_factor(&chol, ys);
        }
        jitter *= 10.0;
    }
    None
}

fn finish_factor(chol: &Cholesky, ys: &DVector<f64>) -> Option<EllFactor> {
    let n = ys.len();
    let q = ys.dot(&chol.solve(ys)).max(f64::MIN_POSITIVE);
    let logdet_m: f64 = (0..n).map(|i| chol.l_dirty()[(i, i)].ln()).sum::<f64>() * 2.0;
    Some(EllFactor { q, logdet: logdet_m })
}

/// Cholesky of `gamma * (C(ell) + j*I)`, escalating the relative jitter `j`
/// from [`JITTER_START`] by factors of ten while the factorization fails.
fn chol_covariance(
    d2: &DMatrix<f64>,
    gamma: f64,
    ell: f64,
) -> Result<(Cholesky, f64), SurrogateError> {
    let n = d2.nrows();
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * (1.0 + 1e-12) {
        let mut k = DMatrix::from_fn(n, n, |i, j| gamma * (-d2[(i, j)] / ell).exp());
        for i in 0..n {
            k[(i, i)] += gamma * jitter;
        }
        if let Some(chol) = Cholesky::new(k) {
            return Ok((chol, jitter));
        }
        jitter *= 10.0;
    }
    Err(SurrogateError::IllConditioned(JITTER_MAX))
}

/// Deterministic golden-section maximization on `[a, b]`.
fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
