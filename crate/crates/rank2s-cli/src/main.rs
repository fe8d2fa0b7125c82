//! Command-line front end: run two-sample tests on data files, build and
//! cache null distributions, compute critical values, and drive power
//! studies.
//!
//! Exit codes: 0 the command ran (regardless of the test decision),
//! 2 input error, 3 infeasible request (e.g. an enumeration over the cap).

mod io;

use clap::{Parser, Subcommand, ValueEnum};
use io::{read_points, read_univariate, resolve_cache_dir, write_output, CliError, CliResult};
use rank2s::cache::{null_cache_filename, read_null, write_null, QuantileEntry, QuantileTable};
use rank2s::{
    attained_size, critical_value_from_null, exact_null, mc_null, moments_t, permutation_test,
    pool_and_rank, pvalue_from_null, quantile_zd, rank_statistic_value, sample_zd,
    statistic_energy, NullDistribution, NullKind, PointSample, PowerStudyConfig, RankedPool,
    Sample, StatisticKind, TiePolicy,
};
use serde::Serialize;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "rank2s",
    version,
    about = "Rank-based Cramér–von Mises-type two-sample tests"
)]
struct Cli {
    /// Cap the worker thread count; results are identical for any value
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Univariate two-sample test on single-column data files
    Test(TestArgs),
    /// Multivariate spatial-rank permutation test on CSV point files
    Mtest(MtestArgs),
    /// Build a null distribution and store it in the cache
    Null(NullArgs),
    /// Critical value of T at a given level
    Critval(CritvalArgs),
    /// Run a power study from a TOML config file
    Power(PowerArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NullModelArg {
    Exact,
    Mc,
    Asymptotic,
    Permutation,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CritvalMethod {
    Exact,
    Mc,
    Asymptotic,
}

#[derive(clap::Args)]
struct TestArgs {
    /// File with the X sample, one number per line
    #[arg(long)]
    x: PathBuf,
    /// File with the Y sample, one number per line
    #[arg(long)]
    y: PathBuf,
    /// Statistic: T, Tprime, Dhat, CvM, Energy, KS, Wilcoxon or Mood
    #[arg(long, default_value = "T")]
    statistic: String,
    /// Null model for the p-value
    #[arg(long, value_enum, default_value = "exact")]
    null: NullModelArg,
    /// Monte-Carlo replicates for --null mc
    #[arg(long, default_value_t = 200_000)]
    reps: u64,
    /// Mixture truncation order for --null asymptotic
    #[arg(long, default_value_t = 4)]
    d: usize,
    /// Monte-Carlo samples behind the asymptotic p-value
    #[arg(long, default_value_t = 1_000_000)]
    zd_samples: u64,
    /// Permutation replicates for --null permutation
    #[arg(long, default_value_t = 499)]
    b: u32,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Average tied observations instead of rejecting them
    #[arg(long)]
    midrank: bool,
    /// Write the JSON result here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(clap::Args)]
struct MtestArgs {
    /// CSV file with the X points, d numeric columns
    #[arg(long)]
    x: PathBuf,
    /// CSV file with the Y points, d numeric columns
    #[arg(long)]
    y: PathBuf,
    /// Permutation replicates
    #[arg(long, default_value_t = 499)]
    b: u32,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON result here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct NullArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "T")]
    statistic: String,
    /// exact or mc
    #[arg(long, value_enum, default_value = "exact")]
    model: NullModelArg,
    #[arg(long, default_value_t = 200_000)]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CritvalArgs {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value = "exact")]
    method: CritvalMethod,
    /// Mixture truncation order for --method asymptotic
    #[arg(long, default_value_t = 4)]
    d: usize,
    /// Monte-Carlo samples behind the mixture quantile
    #[arg(long, default_value_t = 1_000_000)]
    zd_samples: u64,
    /// Monte-Carlo replicates for --method mc
    #[arg(long, default_value_t = 200_000)]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(clap::Args)]
struct PowerArgs {
    /// TOML power-study configuration
    #[arg(long)]
    config: PathBuf,
    /// Write the CSV here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct TestReport {
    schema_version: u32,
    statistic_value: f64,
    p_value: f64,
    method: String,
    null_model: String,
    m: usize,
    n: usize,
    seed: Option<u64>,
    alpha: f64,
    decision: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    tie_policy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ties_present: Option<bool>,
}

#[derive(Serialize)]
struct NullReport {
    schema_version: u32,
    statistic: String,
    kind: String,
    m: usize,
    n: usize,
    support_values: usize,
    outcomes: u64,
    file: String,
    cache: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
    let result = match cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Mtest(args) => cmd_mtest(args),
        Command::Null(args) => cmd_null(args),
        Command::Critval(args) => cmd_critval(args),
        Command::Power(args) => cmd_power(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}

/// Loads a null distribution from the cache or builds and stores it.
fn cached_null(
    cache_dir: &Path,
    statistic: StatisticKind,
    m: usize,
    n: usize,
    kind: NullKind,
    reps: u64,
    seed: u64,
) -> CliResult<(NullDistribution, &'static str, PathBuf)> {
    let (seed_opt, reps_opt) = match kind {
        NullKind::Exact => (None, None),
        NullKind::MonteCarlo => (Some(seed), Some(reps)),
    };
    let path = cache_dir.join(null_cache_filename(
        statistic, m, n, kind, seed_opt, reps_opt,
    ));
    if path.is_file() {
        match std::fs::File::open(&path)
            .map_err(rank2s::Error::from)
            .and_then(|f| read_null(BufReader::new(f)))
        {
            Ok(null) => return Ok((null, "hit", path)),
            Err(err) => eprintln!(
                "warning: ignoring unreadable cache file {}: {err}",
                path.display()
            ),
        }
    }
    let null = match kind {
        NullKind::Exact => exact_null(m, n, statistic)?,
        NullKind::MonteCarlo => mc_null(m, n, statistic, reps, seed)?,
    };
    std::fs::create_dir_all(cache_dir)?;
    let mut file = std::fs::File::create(&path)?;
    write_null(&null, &mut file).map_err(|e| CliError::Input(e.to_string()))?;
    Ok((null, "miss", path))
}

fn decision_str(p: f64, alpha: f64) -> String {
    if p <= alpha {
        "reject"
    } else {
        "fail_to_reject"
    }
    .to_string()
}

fn emit_report(out: Option<&Path>, report: &TestReport) -> CliResult<()> {
    let mut json = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Input(format!("serialization failed: {e}")))?;
    json.push('\n');
    write_output(out, &json)
}

fn cmd_test(args: TestArgs) -> CliResult<()> {
    let statistic = StatisticKind::parse(&args.statistic)?;
    if statistic == StatisticKind::TM {
        return Err(CliError::Input(
            "TM works on point samples; use the mtest subcommand".into(),
        ));
    }
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(rank2s::Error::InvalidAlpha(args.alpha).into());
    }
    let x = read_univariate(&args.x)?;
    let y = read_univariate(&args.y)?;
    let policy = if args.midrank {
        TiePolicy::Midrank
    } else {
        TiePolicy::Reject
    };
    let pool = pool_and_rank(&x, &y, policy)?;
    if pool.had_ties() {
        eprintln!(
            "warning: ties were averaged (midrank); the null distribution is no longer exactly distribution free"
        );
    }

    let (value, p_value, null_model, seed) = match args.null {
        NullModelArg::Exact | NullModelArg::Mc => {
            let value = rank_statistic_value(statistic, &pool)?;
            let kind = if args.null == NullModelArg::Exact {
                NullKind::Exact
            } else {
                NullKind::MonteCarlo
            };
            let cache_dir = resolve_cache_dir(args.cache_dir.as_deref());
            let (null, _, _) = cached_null(
                &cache_dir,
                statistic,
                pool.m(),
                pool.n(),
                kind,
                args.reps,
                args.seed,
            )?;
            let descriptor = match kind {
                NullKind::Exact => "exact".to_string(),
                NullKind::MonteCarlo => format!("mc:reps={}:seed={}", args.reps, args.seed),
            };
            let seed = matches!(kind, NullKind::MonteCarlo).then_some(args.seed);
            (value, pvalue_from_null(value, &null), descriptor, seed)
        }
        NullModelArg::Asymptotic => {
            asymptotic_test(statistic, &pool, args.d, args.zd_samples, args.seed)?
        }
        NullModelArg::Permutation => {
            let (value, p) = permutation_univariate(statistic, &x, &y, policy, args.b, args.seed)?;
            (
                value,
                p,
                format!("permutation:B={}", args.b),
                Some(args.seed),
            )
        }
    };

    emit_report(
        args.out.as_deref(),
        &TestReport {
            schema_version: SCHEMA_VERSION,
            statistic_value: value,
            p_value,
            method: statistic.name().to_string(),
            null_model,
            m: pool.m(),
            n: pool.n(),
            seed,
            alpha: args.alpha,
            decision: decision_str(p_value, args.alpha),
            tie_policy: Some(
                match policy {
                    TiePolicy::Reject => "reject",
                    TiePolicy::Midrank => "midrank",
                }
                .to_string(),
            ),
            ties_present: Some(pool.had_ties()),
        },
    )
}

fn asymptotic_test(
    statistic: StatisticKind,
    pool: &RankedPool,
    d: usize,
    zd_samples: u64,
    seed: u64,
) -> CliResult<(f64, f64, String, Option<u64>)> {
    match statistic {
        StatisticKind::T => {
            let t = rank_statistic_value(StatisticKind::T, pool)?;
            let moments = moments_t(pool.m(), pool.n());
            let z = (t - moments.mean) / moments.variance.sqrt();
            let mut samples = sample_zd(d, zd_samples as usize, seed);
            samples.sort_by(f64::total_cmp);
            let ge = samples.len() - samples.partition_point(|&v| v < z);
            let p = (1.0 + ge as f64) / (samples.len() as f64 + 1.0);
            Ok((t, p, format!("asymptotic:d={d}"), Some(seed)))
        }
        StatisticKind::KS => {
            let value = rank_statistic_value(StatisticKind::KS, pool)?;
            Ok((
                value,
                rank2s::ks_pvalue(pool),
                "asymptotic:kolmogorov".into(),
                None,
            ))
        }
        StatisticKind::Wilcoxon => Ok((
            rank_statistic_value(StatisticKind::Wilcoxon, pool)?,
            rank2s::wilcoxon_pvalue(pool),
            "asymptotic:normal".into(),
            None,
        )),
        StatisticKind::Mood => Ok((
            rank_statistic_value(StatisticKind::Mood, pool)?,
            rank2s::mood_pvalue(pool),
            "asymptotic:normal".into(),
            None,
        )),
        other => Err(CliError::Input(format!(
            "no asymptotic null model for {other}; use exact, mc or permutation"
        ))),
    }
}

fn permutation_univariate(
    statistic: StatisticKind,
    x: &Sample,
    y: &Sample,
    policy: TiePolicy,
    b: u32,
    seed: u64,
) -> CliResult<(f64, f64)> {
    if statistic == StatisticKind::Energy {
        let px = PointSample::from_univariate(x);
        let py = PointSample::from_univariate(y);
        let value = statistic_energy(&px, &py)?;
        let stat = |a: &[f64], b_vals: &[f64]| {
            let pa = PointSample::new(a.iter().map(|&v| vec![v]).collect()).unwrap();
            let pb = PointSample::new(b_vals.iter().map(|&v| vec![v]).collect()).unwrap();
            statistic_energy(&pa, &pb).unwrap()
        };
        let outcome = permutation_test(statistic, stat, x.values(), y.values(), b, seed)?;
        return Ok((value, outcome.p_value));
    }
    let stat = move |a: &[f64], b_vals: &[f64]| {
        let sa = Sample::new(a.to_vec()).unwrap();
        let sb = Sample::new(b_vals.to_vec()).unwrap();
        let pool = pool_and_rank(&sa, &sb, policy).unwrap();
        rank_statistic_value(statistic, &pool).unwrap()
    };
    let outcome = permutation_test(statistic, stat, x.values(), y.values(), b, seed)?;
    Ok((outcome.statistic_value, outcome.p_value))
}

fn cmd_mtest(args: MtestArgs) -> CliResult<()> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(rank2s::Error::InvalidAlpha(args.alpha).into());
    }
    let x = read_points(&args.x)?;
    let y = read_points(&args.y)?;
    if x.dim() != y.dim() {
        return Err(CliError::Input(format!(
            "dimension mismatch: {} has {} columns, {} has {}",
            args.x.display(),
            x.dim(),
            args.y.display(),
            y.dim()
        )));
    }
    let outcome = rank2s::permutation_pvalue_tm(&x, &y, args.b, args.seed)?;
    emit_report(
        args.out.as_deref(),
        &TestReport {
            schema_version: SCHEMA_VERSION,
            statistic_value: outcome.statistic_value,
            p_value: outcome.p_value,
            method: outcome.method.name().to_string(),
            null_model: outcome.null_model,
            m: outcome.m,
            n: outcome.n,
            seed: outcome.seed,
            alpha: args.alpha,
            decision: decision_str(outcome.p_value, args.alpha),
            tie_policy: None,
            ties_present: None,
        },
    )
}

fn cmd_null(args: NullArgs) -> CliResult<()> {
    let statistic = StatisticKind::parse(&args.statistic)?;
    let kind = match args.model {
        NullModelArg::Exact => NullKind::Exact,
        NullModelArg::Mc => NullKind::MonteCarlo,
        _ => {
            return Err(CliError::Input(
                "null models are built with --model exact or --model mc".into(),
            ))
        }
    };
    let cache_dir = resolve_cache_dir(args.cache_dir.as_deref());
    let (null, cache, path) = cached_null(
        &cache_dir, statistic, args.m, args.n, kind, args.reps, args.seed,
    )?;
    let report = NullReport {
        schema_version: SCHEMA_VERSION,
        statistic: statistic.name().to_string(),
        kind: match kind {
            NullKind::Exact => "exact".into(),
            NullKind::MonteCarlo => "mc".into(),
        },
        m: args.m,
        n: args.n,
        support_values: null.support_len(),
        outcomes: null.total(),
        file: path.display().to_string(),
        cache: cache.to_string(),
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Input(format!("serialization failed: {e}")))?;
    println!("{json}");
    Ok(())
}

fn cmd_critval(args: CritvalArgs) -> CliResult<()> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(rank2s::Error::InvalidAlpha(args.alpha).into());
    }
    let cache_dir = resolve_cache_dir(args.cache_dir.as_deref());
    let critical = match args.method {
        CritvalMethod::Exact | CritvalMethod::Mc => {
            let kind = if args.method == CritvalMethod::Exact {
                NullKind::Exact
            } else {
                NullKind::MonteCarlo
            };
            let (null, cache, path) = cached_null(
                &cache_dir,
                StatisticKind::T,
                args.m,
                args.n,
                kind,
                args.reps,
                args.seed,
            )?;
            let critical = critical_value_from_null(args.alpha, &null)?;
            eprintln!(
                "null cache {cache}: {} (attained size {:.6})",
                path.display(),
                attained_size(critical, &null)
            );
            critical
        }
        CritvalMethod::Asymptotic => {
            let table_path = cache_dir.join("zd_quantiles.csv");
            let mut table = if table_path.is_file() {
                let file = std::fs::File::open(&table_path).map_err(CliError::from)?;
                QuantileTable::read(BufReader::new(file))
                    .map_err(|e| CliError::Input(e.to_string()))?
            } else {
                QuantileTable::new()
            };
            let quantile = match table.lookup(args.d, args.alpha, args.zd_samples, args.seed) {
                Some(q) => {
                    eprintln!("quantile cache hit: {}", table_path.display());
                    q
                }
                None => {
                    let q = quantile_zd(args.d, args.alpha, args.zd_samples, args.seed)?;
                    table.insert(QuantileEntry {
                        d: args.d,
                        alpha: args.alpha,
                        sample_count: args.zd_samples,
                        seed: args.seed,
                        quantile: q,
                    });
                    std::fs::create_dir_all(&cache_dir)?;
                    let mut file = std::fs::File::create(&table_path)?;
                    table
                        .write(&mut file)
                        .map_err(|e| CliError::Input(e.to_string()))?;
                    eprintln!("quantile cache miss: {}", table_path.display());
                    q
                }
            };
            let moments = moments_t(args.m, args.n);
            moments.mean + moments.variance.sqrt() * quantile
        }
    };
    println!("{critical}");
    Ok(())
}

fn cmd_power(args: PowerArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.config.display())))?;
    let config = PowerStudyConfig::from_toml_str(&text)?;
    let result = rank2s::run_power_study(&config)?;
    eprintln!(
        "power study: seed {} with {} iterations per scenario; se column is sqrt(p(1-p)/M)",
        result.seed, result.iterations
    );
    write_output(args.out.as_deref(), &result.to_csv())
}
