//! Command-line front end: count one instance in competition-style output,
//! or batch-run a directory of instances to CSV.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::Parser;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use pmc_core::counter::{count_with, BceMode, CountError, CountStats, CounterOptions};
use pmc_core::oracle;
use pmc_core::ProjectedFormula;

const TIMEOUT_EXIT: u8 = 124;

/// Exact projected model counter with dynamic blocked-clause elimination.
///
/// Reads DIMACS CNF with optional `c p show v… 0` lines naming the
/// variables to count over; everything else is projected away.
#[derive(Parser)]
#[command(name = "pmc", version)]
struct Cli {
    /// Instance to count.
    #[arg(value_name = "INSTANCE")]
    input: Option<PathBuf>,

    /// Elimination mode: off, pre or dyn. With --bench, a comma-separated
    /// list runs every listed mode per instance.
    #[arg(long, default_value = "dyn", value_name = "MODES")]
    bce: String,

    /// Print run statistics as `c stat …` comment lines.
    #[arg(long)]
    stats: bool,

    /// Recount with the brute-force oracle and fail on mismatch (skipped
    /// when the instance exceeds the enumeration bound).
    #[arg(long)]
    oracle_check: bool,

    /// Component-cache entry cap; reaching it resets the cache.
    #[arg(long, value_name = "N")]
    cache_cap: Option<usize>,

    /// Per-run time limit in seconds, checked at each decision.
    #[arg(long, value_name = "S")]
    timeout: Option<u64>,

    /// Batch mode: run every file in DIR and write CSV to standard output.
    #[arg(long, value_name = "DIR")]
    bench: Option<PathBuf>,
}

fn main() -> ExitCode {
    // Die silently when a downstream pipe closes, like other stream tools.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("c error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let modes = parse_modes(&cli.bce)?;
    match (&cli.input, &cli.bench) {
        (Some(_), Some(_)) => bail!("give either an instance or --bench, not both"),
        (None, None) => bail!("nothing to do: give an instance path or --bench DIR"),
        (Some(path), None) => {
            if modes.len() != 1 {
                bail!("single runs take exactly one --bce mode");
            }
            run_single(path, modes[0], cli)
        }
        (None, Some(dir)) => {
            benchmark(dir, &modes, cli)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn parse_modes(list: &str) -> Result<Vec<BceMode>> {
    list.split(',')
        .map(|part| part.trim().parse().map_err(anyhow::Error::msg))
        .collect()
}

fn load(path: &Path) -> Result<ProjectedFormula> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    ProjectedFormula::parse_dimacs(&text)
        .with_context(|| format!("cannot parse {}", path.display()))
}

fn options(mode: BceMode, cli: &Cli) -> CounterOptions {
    CounterOptions {
        mode,
        cache_cap: cli.cache_cap,
        deadline: cli
            .timeout
            .map(|secs| Instant::now() + Duration::from_secs(secs)),
        ..CounterOptions::default()
    }
}

fn run_single(path: &Path, mode: BceMode, cli: &Cli) -> Result<ExitCode> {
    let formula = load(path)?;
    println!("c s type pmc");
    let result = match count_with(&formula, &options(mode, cli)) {
        Err(CountError::Timeout { stats }) => {
            eprintln!("c timeout after {} decisions", stats.decisions);
            return Ok(ExitCode::from(TIMEOUT_EXIT));
        }
        Ok(result) => result,
    };
    if cli.oracle_check {
        match oracle::brute_force_projected_count(&formula) {
            Ok(expected) if expected == result.count => eprintln!("c oracle check passed"),
            Ok(expected) => bail!(
                "oracle mismatch: engine counted {}, oracle counted {expected}",
                result.count
            ),
            Err(err) => eprintln!("c oracle check skipped: {err}"),
        }
    }
    println!("c s exact arb int {}", result.count);
    if cli.stats {
        println!("c stat decisions {}", result.stats.decisions);
        println!("c stat blocked_removed {}", result.stats.blocked_removed);
        println!("c stat cache_hits {}", result.stats.cache_hits);
        println!("c stat max_depth {}", result.stats.max_depth);
    }
    Ok(ExitCode::SUCCESS)
}

struct Row {
    instance: String,
    mode: BceMode,
    status: &'static str,
    count: String,
    wall: f64,
    stats: CountStats,
}

impl Row {
    fn emit(&self) -> String {
        let per_decision = if self.stats.decisions > 0 {
            self.stats.blocked_removed as f64 / self.stats.decisions as f64
        } else {
            0.0
        };
        format!(
            "{},{},{},{},{:.3},{},{},{:.3},{}",
            self.instance,
            self.mode,
            self.status,
            self.count,
            self.wall,
            self.stats.decisions,
            self.stats.blocked_removed,
            per_decision,
            self.stats.cache_hits
        )
    }
}

fn benchmark(dir: &Path, modes: &[BceMode], cli: &Cli) -> Result<()> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read directory {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();

    let jobs: Vec<(PathBuf, BceMode)> = files
        .iter()
        .flat_map(|f| modes.iter().map(move |&m| (f.clone(), m)))
        .collect();

    println!(
        "instance,mode,status,count,wall_s,decisions,blocked_removed,blocked_per_decision,cache_hits"
    );

    // Independent engines per job; rows come back in input order.
    #[cfg(feature = "parallel")]
    let rows: Vec<Row> = jobs
        .par_iter()
        .map(|(path, mode)| bench_one(path, *mode, cli))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Row> = jobs
        .iter()
        .map(|(path, mode)| bench_one(path, *mode, cli))
        .collect();

    for row in rows {
        println!("{}", row.emit());
    }
    Ok(())
}

fn bench_one(path: &Path, mode: BceMode, cli: &Cli) -> Row {
    let instance = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let started = Instant::now();
    let outcome = load(path).map(|formula| count_with(&formula, &options(mode, cli)));
    let wall = started.elapsed().as_secs_f64();
    match outcome {
        Err(_) => Row {
            instance,
            mode,
            status: "ERROR",
            count: String::new(),
            wall,
            stats: CountStats::default(),
        },
        Ok(Err(CountError::Timeout { stats })) => Row {
            instance,
            mode,
            status: "TIMEOUT",
            count: String::new(),
            wall,
            stats,
        },
        Ok(Ok(result)) => Row {
            instance,
            mode,
            status: "OK",
            count: result.count.to_string(),
            wall,
            stats: result.stats,
        },
    }
}
