//! Command-line front end: single runs, benchmark sweeps, report
//! regeneration, and true-front sampling.

use clap::{Args, Parser, Subcommand};
use mogd::runner::{
    compare_final_hv, emit_report, load_runs, run_algo, Algo, Baseline, ExperimentConfig,
    RunRecord,
};
use std::fs;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "mogd", version, about = "Surrogate-assisted multi-objective optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a single run and save its record under <out>/runs/.
    Run {
        #[command(flatten)]
        common: CommonOpts,
        /// Run seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Batch proposer: mgd or random.
        #[arg(long, default_value = "mgd")]
        algo: Algo,
    },
    /// Run every configured algorithm over repeated seeds, then write the
    /// report files.
    Bench {
        #[command(flatten)]
        common: CommonOpts,
        /// Number of repeats; runs use seeds 0..N. Overrides the config list.
        #[arg(long)]
        seeds: Option<usize>,
        /// Comma-separated algorithms (default: mgd plus the configured
        /// baseline).
        #[arg(long, value_delimiter = ',')]
        algos: Option<Vec<Algo>>,
    },
    /// Rebuild the report files from the records under <out>/runs/.
    Report {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Sample the analytic optimal front and write pf_<problem>.csv.
    Pf {
        #[command(flatten)]
        common: CommonOpts,
        /// Points per front segment.
        #[arg(long, default_value_t = 2000)]
        density: usize,
    },
}

/// Flags shared by all subcommands. Precedence: flag, then config file,
/// then built-in default.
#[derive(Args)]
struct CommonOpts {
    /// Problem name (zdt3, dtlz7, wfg2), optionally suffixed -k<j>.
    #[arg(long)]
    problem: Option<String>,
    /// Decision-space dimension.
    #[arg(long)]
    n: Option<usize>,
    /// Front-disconnection multiplier.
    #[arg(long)]
    k: Option<u32>,
    /// Expensive-evaluation budget (initial design included).
    #[arg(long)]
    budget: Option<usize>,
    /// Infill batch size.
    #[arg(long)]
    xi: Option<usize>,
    /// JSON file with experiment settings; must name `problem` and `n`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl CommonOpts {
    fn build_config(&self) -> Result<ExperimentConfig, Box<dyn std::error::Error>> {
        let mut cfg: ExperimentConfig = match &self.config {
            Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
            None => ExperimentConfig::new("zdt3", 3),
        };
        if let Some(problem) = &self.problem {
            cfg.problem = problem.to_ascii_lowercase();
        }
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(k) = self.k {
            cfg.disconnect_param = k;
        }
        if let Some(budget) = self.budget {
            cfg.fe_budget = budget;
        }
        if let Some(xi) = self.xi {
            cfg.xi = xi;
        }
        Ok(cfg)
    }
}

fn main() {
    if let Err(e) = real_main() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn real_main() -> Result<(), Box<dyn std::error::Error>> {
    match Cli::parse().command {
        Command::Run { common, seed, algo } => {
            let cfg = common.build_config()?;
            cfg.validate()?;
            let record = run_algo(&cfg, seed, algo)?;
            let path = record.save(&common.out.join("runs"))?;
            println!(
                "{} {} n={} seed={} evaluations={} hv={:.6} status={} ({} ms) -> {}",
                record.algo,
                record.config.full_name(),
                record.config.n,
                record.seed,
                record.evaluations(),
                record.final_hv(),
                record.status,
                record.wall_clock_ms,
                path.display()
            );
        }
        Command::Bench { common, seeds, algos } => {
            let cfg = common.build_config()?;
            cfg.validate()?;
            let seed_list: Vec<u64> = match seeds {
                Some(count) => (0..count as u64).collect(),
                None => cfg.seeds.clone(),
            };
            let algo_list = algos.unwrap_or_else(|| match cfg.baseline {
                Baseline::None => vec![Algo::Mgd],
                Baseline::Random => vec![Algo::Mgd, Algo::Random],
            });

            let runs_dir = common.out.join("runs");
            let mut records: Vec<RunRecord> = Vec::new();
            for &algo in &algo_list {
                for &seed in &seed_list {
                    let record = run_algo(&cfg, seed, algo)?;
                    println!(
                        "{} {} n={} seed={} hv={:.6} ({} ms)",
                        algo,
                        record.config.full_name(),
                        record.config.n,
                        seed,
                        record.final_hv(),
                        record.wall_clock_ms
                    );
                    record.save(&runs_dir)?;
                    records.push(record);
                }
            }
            let written = emit_report(&records, &common.out)?;
            for path in written {
                println!("wrote {}", path.display());
            }
            if algo_list.contains(&Algo::Mgd) && algo_list.contains(&Algo::Random) {
                let pick = |algo: Algo| -> Vec<f64> {
                    records
                        .iter()
                        .filter(|r| r.algo == algo)
                        .map(|r| r.final_hv())
                        .collect()
                };
                let (mgd_hv, random_hv) = (pick(Algo::Mgd), pick(Algo::Random));
                let (p, effect) = compare_final_hv(&mgd_hv, &random_hv)?;
                println!("mgd vs random: wilcoxon p={p:.4}, effect={}", effect.label());
            }
        }
        Command::Report { common } => {
            let records = load_runs(&common.out.join("runs"))?;
            let written = emit_report(&records, &common.out)?;
            for path in written {
                println!("wrote {}", path.display());
            }
        }
        Command::Pf { common, density } => {
            let cfg = common.build_config()?;
            let problem = cfg.problem_instance()?;
            let sample = problem.true_pf_sample(density);
            let mut text = String::from("f1,f2\n");
            for p in &sample {
                text.push_str(&format!("{},{}\n", p[0], p[1]));
            }
            fs::create_dir_all(&common.out)?;
            let path = common.out.join(format!("pf_{}.csv", problem.name()));
            fs::write(&path, text)?;
            println!("wrote {} ({} points)", path.display(), sample.len());
        }
    }
    Ok(())
}
