//! Experiment orchestration: the initialize → model → search → infill →
//! evaluate loop, repeated runs, run-record persistence, and report files.
//!
//! One run is sequential: each infill iteration refits the per-objective GPs on
//! the full archive, searches candidates on the surrogate means, selects a
//! batch by hypervolume contribution, and spends expensive evaluations on it.
//! All randomness derives from the run seed (iteration-local seeds are mixed from
//! it), so a record can be reproduced bit-for-bit. Wall-clock time is kept on
//! the record for CLI summaries but stays out of the serialized form so that
//! identical runs serialize identically.

use crate::core::{nondominated_filter, Archive, Bounds, CoreError, Solution};
use crate::doe::{lhs_sample, LhsPlan};
use crate::hv::{hv2d, select_batch, RefPoint};
use crate::mgd::{mgd_search, MgdConfig, MgdError};
use crate::problems::{Problem, ProblemError};
use crate::stats::{
    a12, effect_size_class, mad, mean, median, scott_knott, std_dev, wilcoxon_signed_rank,
    EffectSize, SampleGroup,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

/// Density (points per front segment) of the true-front sample behind the
/// recorded metric reference point and the pf_*.csv files.
const PF_REPORT_DENSITY: usize = 2000;
/// Significance level for the report's pairwise-test dagger.
const REPORT_ALPHA: f64 = 0.05;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("initial design needs at least 2 points, got {0}")]
    InitTooSmall(usize),
    #[error("evaluation budget {budget} is below the initial design size {init}")]
    BudgetTooSmall { budget: usize, init: usize },
    #[error("infill batch size must be at least 1")]
    ZeroBatch,
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("surrogate fit failed in iteration {iteration}: {source}")]
    Surrogate {
        iteration: usize,
        #[source]
        source: crate::surrogate::SurrogateError,
    },
    #[error(transparent)]
    Search(#[from] MgdError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("report: {0}")]
    Report(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("run record: {0}")]
    Json(#[from] serde_json::Error),
}

/// Which sampler proposes infill batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Mgd,
    Random,
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Mgd => "mgd",
            Algo::Random => "random",
        })
    }
}

impl std::str::FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mgd" => Ok(Algo::Mgd),
            "random" => Ok(Algo::Random),
            other => Err(format!("unknown algorithm '{other}' (expected mgd or random)")),
        }
    }
}

/// Whether a benchmark invocation also runs the comparison baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    None,
    #[default]
    Random,
}

fn default_disconnect() -> u32 {
    1
}

fn default_fe_budget() -> usize {
    250
}

fn default_xi() -> usize {
    10
}

fn default_seeds() -> Vec<u64> {
    (0..11).collect()
}

/// Full protocol description of one experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Problem family, optionally with a `-k<j>` disconnection suffix.
    pub problem: String,
    /// Decision-space dimension.
    pub n: usize,
    #[serde(default = "default_disconnect")]
    pub disconnect_param: u32,
    /// Initial design size; `None` means the 11n − 1 default.
    #[serde(default)]
    pub init_size: Option<usize>,
    #[serde(default = "default_fe_budget")]
    pub fe_budget: usize,
    /// Infill batch size.
    #[serde(default = "default_xi")]
    pub xi: usize,
    /// Candidate-search knobs; its `seed` field is ignored (iteration seeds are
    /// derived from the run seed).
    #[serde(default)]
    pub mgd: MgdConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub baseline: Baseline,
}

impl ExperimentConfig {
    pub fn new(problem: &str, n: usize) -> Self {
        Self {
            problem: problem.to_ascii_lowercase(),
            n,
            disconnect_param: 1,
            init_size: None,
            fe_budget: default_fe_budget(),
            xi: default_xi(),
            mgd: MgdConfig::default(),
            seeds: default_seeds(),
            baseline: Baseline::default(),
        }
    }

    /// Registry name including the disconnection suffix. A suffix already
    /// embedded in `problem` wins over `disconnect_param`.
    pub fn full_name(&self) -> String {
        let base = self.problem.to_ascii_lowercase();
        if base.contains("-k") || self.disconnect_param <= 1 {
            base
        } else {
            format!("{base}-k{}", self.disconnect_param)
        }
    }

    pub fn problem_instance(&self) -> Result<Problem, ProblemError> {
        Problem::by_name(&self.full_name(), self.n)
    }

    /// Initial design size with the 11n − 1 default applied.
    pub fn effective_init_size(&self) -> usize {
        self.init_size.unwrap_or(11 * self.n - 1)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let init = self.effective_init_size();
        if init < 2 {
            return Err(RunError::InitTooSmall(init));
        }
        if self.fe_budget < init {
            return Err(RunError::BudgetTooSmall { budget: self.fe_budget, init });
        }
        if self.xi == 0 {
            return Err(RunError::ZeroBatch);
        }
        self.mgd.validate()?;
        self.problem_instance()?;
        Ok(())
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// The evaluation budget was spent.
    Completed,
    /// Every candidate duplicated the archive; no batch could be formed.
    StoppedEmptyBatch,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Completed => "completed",
            RunStatus::StoppedEmptyBatch => "stopped_empty_batch",
        })
    }
}

/// One infill iteration (iteration 0 is the initial design).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Expensive evaluations spent so far.
    pub evaluations: usize,
    /// Archive hypervolume against the recorded metric reference.
    pub hv: f64,
    /// Candidate pool size the batch was drawn from.
    pub candidate_pool: usize,
    /// Points actually evaluated this iteration.
    pub batch: usize,
}

/// Everything needed to audit or reproduce one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub algo: Algo,
    pub seed: u64,
    /// Fixed reporting reference (true-front nadir × 1.1).
    pub metric_ref: Vec<f64>,
    pub status: RunStatus,
    /// Every evaluated solution, in evaluation order.
    pub archive: Vec<Solution>,
    pub trace: Vec<TraceEntry>,
    /// Measured duration; excluded from serialization so identical runs
    /// produce identical records.
    #[serde(skip)]
    pub wall_clock_ms: u64,
}

impl RunRecord {
    pub fn final_hv(&self) -> f64 {
        self.trace.last().expect("trace has the initial iteration").hv
    }

    pub fn evaluations(&self) -> usize {
        self.trace.last().expect("trace has the initial iteration").evaluations
    }

    /// Nondominated true-objective front of the archive, sorted by the first
    /// objective.
    pub fn front(&self) -> Vec<Vec<f64>> {
        let objs: Vec<Vec<f64>> = self
            .archive
            .iter()
            .map(|s| s.objectives.clone().expect("archived solutions are evaluated"))
            .collect();
        let mut front: Vec<Vec<f64>> =
            nondominated_filter(&objs).into_iter().map(|i| objs[i].clone()).collect();
        front.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        front
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("record serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, RunError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn file_name(&self) -> String {
        format!(
            "{}_{}_n{}_seed{}.json",
            self.algo,
            self.config.full_name(),
            self.config.n,
            self.seed
        )
    }

    /// Write the record as JSON under `dir`, returning the path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf, RunError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(self.file_name());
        fs::write(&path, self.to_json())?;
        Ok(path)
    }
}

/// Load every `*.json` run record under `dir`, sorted by file name.
pub fn load_runs(dir: &Path) -> Result<Vec<RunRecord>, RunError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| RunRecord::from_json(&fs::read_to_string(p)?)).collect()
}

/// Deterministic per-iteration seed derivation (splitmix64 finalizer).
fn mix(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Execute one gradient-guided run.
pub fn run(config: &ExperimentConfig, seed: u64) -> Result<RunRecord, RunError> {
    run_algo(config, seed, Algo::Mgd)
}

/// Execute one run whose batches are plain space-filling samples
/// (deduplicated against the archive) — the sanity baseline.
pub fn run_baseline_random(config: &ExperimentConfig, seed: u64) -> Result<RunRecord, RunError> {
    run_algo(config, seed, Algo::Random)
}

pub fn run_algo(config: &ExperimentConfig, seed: u64, algo: Algo) -> Result<RunRecord, RunError> {
    config.validate()?;
    let started = Instant::now();
    let problem = config.problem_instance()?;
    let bounds = problem.bounds().clone();

    let pf = problem.true_pf_sample(PF_REPORT_DENSITY);
    let nadir: Vec<f64> = (0..problem.m())
        .map(|j| pf.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let metric_ref = RefPoint::metric_from_nadir(&nadir);

    let mut archive = Archive::new(bounds.clone());
    let init = lhs_sample(&LhsPlan {
        n_points: config.effective_init_size(),
        bounds: bounds.clone(),
        seed: mix(seed, 0),
    });
    let mut evaluations = 0usize;
    for x in init {
        let f = problem.evaluate(&x);
        evaluations += 1;
        archive.push(Solution::with_objectives(x, f))?;
    }

    let mut trace = vec![TraceEntry {
        iteration: 0,
        evaluations,
        hv: hv2d(&archive.objectives(), &metric_ref),
        candidate_pool: 0,
        batch: 0,
    }];
    let mut status = RunStatus::Completed;

    let mut iteration = 0usize;
    while evaluations < config.fe_budget {
        iteration += 1;
        let want = config.xi.min(config.fe_budget - evaluations);

        let (pool_size, batch) = match algo {
            Algo::Mgd => {
                let xs = archive.xs();
                let models: Vec<_> = (0..problem.m())
                    .map(|j| {
                        crate::surrogate::GpSurrogate::fit(&xs, &archive.objective_column(j))
                            .map_err(|source| RunError::Surrogate { iteration, source })
                    })
                    .collect::<Result<_, _>>()?;
                let search_cfg = MgdConfig { seed: mix(seed, iteration as u64), ..config.mgd };
                let pool = mgd_search(&models, &bounds, &search_cfg)?;
                let infill_ref = RefPoint::infill_from(&pool.predicted());
                (pool.len(), select_batch(&pool, want, &archive, &infill_ref))
            }
            Algo::Random => {
                let batch = random_batch(&bounds, want, &archive, mix(seed, iteration as u64));
                (want, batch)
            }
        };

        if batch.is_empty() {
            status = RunStatus::StoppedEmptyBatch;
            break;
        }
        let batch_size = batch.len();
        for mut solution in batch {
            let f = problem.evaluate(&solution.x);
            evaluations += 1;
            solution.objectives = Some(f);
            archive.push(solution)?;
        }
        trace.push(TraceEntry {
            iteration,
            evaluations,
            hv: hv2d(&archive.objectives(), &metric_ref),
            candidate_pool: pool_size,
            batch: batch_size,
        });
    }

    Ok(RunRecord {
        config: config.clone(),
        algo,
        seed,
        metric_ref: metric_ref.values().to_vec(),
        status,
        archive: archive.entries().to_vec(),
        trace,
        wall_clock_ms: started.elapsed().as_millis() as u64,
    })
}

/// Space-filling batch proposal: a fresh Latin hypercube sample with
/// anything duplicating the archive (or the batch itself) dropped.
fn random_batch(bounds: &Bounds, want: usize, archive: &Archive, seed: u64) -> Vec<Solution> {
    let xs = lhs_sample(&LhsPlan { n_points: want, bounds: bounds.clone(), seed });
    let mut batch: Vec<Solution> = Vec::new();
    for x in xs {
        if archive.contains(&x) || batch.iter().any(|s| bounds.is_duplicate(&s.x, &x)) {
            continue;
        }
        batch.push(Solution::new(x));
    }
    batch
}

/// Write the aggregate report for a set of run records into `out`:
/// `results.csv` (one row per run), `table.csv` / `table.txt` (per-cell
/// summary statistics, pairwise-test daggers against the gradient-guided
/// algorithm, Scott-Knott ranks), `front_*.csv` (nondominated front of each
/// cell's median-hypervolume run), and `pf_*.csv` (true-front samples).
/// Returns the written paths. Output is a pure function of the records, so
/// regenerating from persisted records reproduces the files byte-for-byte.
pub fn emit_report(records: &[RunRecord], out: &Path) -> Result<Vec<PathBuf>, RunError> {
    if records.is_empty() {
        return Err(RunError::Report("no run records given".into()));
    }
    let m = records[0].metric_ref.len();
    if records.iter().any(|r| r.metric_ref.len() != m) {
        return Err(RunError::Report("records mix objective counts".into()));
    }
    fs::create_dir_all(out)?;
    let mut written = Vec::new();

    // One row per run, in a canonical order.
    let mut rows: Vec<&RunRecord> = records.iter().collect();
    rows.sort_by_key(|r| (r.config.full_name(), r.config.n, r.algo, r.seed));
    let mut results = String::from("algo,problem,n,seed,status,evaluations,hv\n");
    for r in &rows {
        results.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.algo,
            r.config.full_name(),
            r.config.n,
            r.seed,
            r.status,
            r.evaluations(),
            r.final_hv()
        ));
    }
    written.push(write_file(out, "results.csv", &results)?);

    // Cell = (problem, n); each holds per-algorithm runs sorted by seed.
    let mut cells: BTreeMap<(String, usize), BTreeMap<Algo, Vec<&RunRecord>>> = BTreeMap::new();
    for r in &rows {
        cells
            .entry((r.config.full_name(), r.config.n))
            .or_default()
            .entry(r.algo)
            .or_default()
            .push(r);
    }

    let mut table_csv =
        String::from("problem,n,algo,repeats,median,mad,mean,std,sk_rank,significant,best\n");
    let mut table_txt = String::new();
    for ((problem, n), by_algo) in &cells {
        let hvs: BTreeMap<Algo, Vec<f64>> = by_algo
            .iter()
            .map(|(algo, runs)| (*algo, runs.iter().map(|r| r.final_hv()).collect()))
            .collect();

        let ranks = scott_knott(
            &hvs.iter()
                .map(|(algo, values)| SampleGroup::new(algo.to_string(), values.clone()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| RunError::Report(e.to_string()))?,
        )
        .ok();

        let best_median = hvs
            .values()
            .map(|v| median(v))
            .fold(f64::NEG_INFINITY, f64::max);
        // Seed-paired comparison against the gradient-guided runs, when both
        // sides cover the same seeds.
        let mgd_seeds: Option<Vec<u64>> = by_algo
            .get(&Algo::Mgd)
            .map(|runs| runs.iter().map(|r| r.seed).collect());

        table_txt.push_str(&format!("== {problem} n={n} ==\n"));
        table_txt.push_str(&format!(
            "{:<8} {:<26} {:<26} {:<5} {}\n",
            "algo", "median(mad)", "mean(std)", "rank", "sig"
        ));
        for (idx, (algo, values)) in hvs.iter().enumerate() {
            let med = median(values);
            let seeds: Vec<u64> = by_algo[algo].iter().map(|r| r.seed).collect();
            let dagger = if *algo != Algo::Mgd
                && mgd_seeds.as_ref() == Some(&seeds)
                && wilcoxon_signed_rank(values, &hvs[&Algo::Mgd], REPORT_ALPHA)
                    .map(|w| w.significant)
                    .unwrap_or(false)
            {
                "†"
            } else {
                ""
            };
            let best = if med == best_median { "*" } else { "" };
            let rank = ranks
                .as_ref()
                .map(|r| r[idx].to_string())
                .unwrap_or_else(|| "-".into());
            table_csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                problem,
                n,
                algo,
                values.len(),
                med,
                mad(values),
                mean(values),
                std_dev(values),
                rank,
                dagger,
                best
            ));
            table_txt.push_str(&format!(
                "{:<8} {:<26} {:<26} {:<5} {}\n",
                algo.to_string(),
                format!("{:.6}({:.6}){best}", med, mad(values)),
                format!("{:.6}({:.6})", mean(values), std_dev(values)),
                rank,
                dagger
            ));
        }
        table_txt.push('\n');
    }
    written.push(write_file(out, "table.csv", &table_csv)?);
    written.push(write_file(out, "table.txt", &table_txt)?);

    // Median-hypervolume run's front per (problem, n, algo).
    for ((problem, n), by_algo) in &cells {
        for (algo, runs) in by_algo {
            let mut order: Vec<usize> = (0..runs.len()).collect();
            order.sort_by(|&a, &b| {
                runs[a]
                    .final_hv()
                    .total_cmp(&runs[b].final_hv())
                    .then(runs[a].seed.cmp(&runs[b].seed))
            });
            let median_run = runs[order[order.len() / 2]];
            let mut text = String::from("f1,f2\n");
            for p in median_run.front() {
                text.push_str(&format!("{},{}\n", p[0], p[1]));
            }
            written.push(write_file(out, &format!("front_{problem}_n{n}_{algo}.csv"), &text)?);
        }
    }

    // True-front samples, one per problem family seen.
    let mut pf_cells: BTreeMap<String, usize> = BTreeMap::new();
    for ((problem, n), _) in &cells {
        pf_cells
            .entry(problem.clone())
            .and_modify(|existing| *existing = (*existing).min(*n))
            .or_insert(*n);
    }
    for (problem, n) in pf_cells {
        let sample = Problem::by_name(&problem, n)?.true_pf_sample(PF_REPORT_DENSITY);
        let mut text = String::from("f1,f2\n");
        for p in sample {
            text.push_str(&format!("{},{}\n", p[0], p[1]));
        }
        written.push(write_file(out, &format!("pf_{problem}.csv"), &text)?);
    }

    Ok(written)
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf, RunError> {
    let path = dir.join(name);
    fs::write(&path, content)?;
    Ok(path)
}

/// Pairwise comparison summary used by the CLI's bench output.
pub fn compare_final_hv(a: &[f64], b: &[f64]) -> Result<(f64, EffectSize), RunError> {
    let w = wilcoxon_signed_rank(a, b, REPORT_ALPHA).map_err(|e| RunError::Report(e.to_string()))?;
    Ok((w.p_value, effect_size_class(a12(a, b))))
}
