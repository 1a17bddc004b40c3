//! `swapout` command-line tool.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 when a
//! certification check fails. Relative output paths are resolved against
//! `SWAPOUT_OUT_DIR` when it is set.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use swapout::analysis::{default_alpha, run_trials, PolicyKind, SolutionSource, TrialConfig, Variant};
use swapout::sweep::{run_sweep, Rho, SweepConfig, SweepProblem};
use swapout::{
    canonical, evaluate, gen_kmed_gap, gen_ufl_gap, load_instance, local_search, save_instance, solve_exact,
    verify_gap, CenterId, GapInstance, Instance, KMedGapParams, PivotRule, ProblemKind, SearchConfig, SeedPolicy,
    SolutionDoc, UflGapParams,
};

const OUT_DIR_VAR: &str = "SWAPOUT_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "swapout",
    version,
    about = "Multiswap local search for clustering with outliers"
)]
struct Cli {
    /// Worker threads for parallel scans and sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run rho-swap local search on an instance.
    Solve(SolveArgs),
    /// Compute the optimum by exhaustive enumeration.
    Exact(ExactArgs),
    /// Generate a locality-gap instance with its stated solutions.
    GapGen(GapGenArgs),
    /// Certify a stated local optimum and report the gap ratio.
    GapVerify(GapVerifyArgs),
    /// Check the pairing and grouping lemmas on random solution pairs.
    PairVerify(PairVerifyArgs),
    /// Compare local search with the exact optimum over random instances.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 1)]
    rho: usize,
    #[arg(long, default_value_t = 1e-6)]
    epsilon_stop: f64,
    #[arg(long, value_enum, default_value_t = Pivot::First)]
    pivot: Pivot,
    /// Seed set: `greedy`, `random:<u64>`, or comma-separated center ids.
    #[arg(long, default_value = "greedy")]
    seed: String,
    #[arg(long, default_value_t = 100_000)]
    max_iterations: usize,
    /// Solution output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Full search trace output.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pivot {
    First,
    Best,
}

#[derive(Args)]
struct ExactArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Largest subset size for UFL instances with more than 20 candidates.
    #[arg(long)]
    size_cap: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Ufl,
    Kmed,
}

#[derive(Args)]
struct GapGenArgs {
    #[arg(long, value_enum)]
    family: Family,
    /// Swap size the UFL instance defeats.
    #[arg(long)]
    rho: Option<usize>,
    #[arg(long)]
    z: usize,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Ring radius of E; defaults to `(u - 1) beta / 2 + beta / 4` raised to `1/q`.
    #[arg(long)]
    gamma: Option<f64>,
    /// Total point count (default 5z).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Instance output.
    #[arg(long)]
    out: PathBuf,
    /// Stated local optimum (default: `<out>.local.json`).
    #[arg(long)]
    local_out: Option<PathBuf>,
    /// Stated optimum (default: `<out>.opt.json`).
    #[arg(long)]
    opt_out: Option<PathBuf>,
}

#[derive(Args)]
struct GapVerifyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    local: PathBuf,
    #[arg(long)]
    opt: PathBuf,
    #[arg(long)]
    rho: usize,
    /// Confirm the stated optimum with the exact oracle when within budget.
    #[arg(long)]
    confirm_opt: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Singleton,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    /// Two random open sets per trial.
    Random,
    /// Local search against the exact optimum.
    Search,
}

#[derive(Args)]
struct PairVerifyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 2)]
    rho: usize,
    /// Group size (default: ceil(4 rho / epsilon) for UFL, 2 rho + 3 otherwise).
    #[arg(long)]
    alpha: Option<usize>,
    /// Used only for the UFL default group size.
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = Policy::Random)]
    policy: Policy,
    #[arg(long, value_enum, default_value_t = Source::Random)]
    source: Source,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 50)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    n_min: usize,
    #[arg(long, default_value_t = 14)]
    n_max: usize,
    #[arg(long, default_value_t = 3)]
    m_min: usize,
    #[arg(long, default_value_t = 7)]
    m_max: usize,
    #[arg(long, default_value_t = 3)]
    z_max: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Exponents to draw from.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    q: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    k_max: usize,
    /// Budget widening for k-cluster instances.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Run UFL-out with this uniform opening cost instead of k-cluster.
    #[arg(long)]
    ufl_opening: Option<f64>,
    /// Swap size, or `all` for every candidate.
    #[arg(long, default_value = "1")]
    rho: String,
    #[arg(long, default_value_t = 1e-6)]
    epsilon_stop: f64,
    #[arg(long, value_enum, default_value_t = Pivot::First)]
    pivot: Pivot,
    /// JSON report (no timings, reproducible byte for byte).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-row CSV including wall time.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn out_path(p: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_VAR) {
        Some(dir) if p.is_relative() => Path::new(&dir).join(p),
        _ => p.to_path_buf(),
    }
}

fn write_out(p: &Path, text: &str) -> Result<()> {
    let path = out_path(p);
    if let Some(parent) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Writes to `out` when given, otherwise prints.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_out(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_instance(p: &Path) -> Result<Instance> {
    let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
    load_instance(&bytes).with_context(|| format!("loading instance {}", p.display()))
}

fn read_solution(p: &Path) -> Result<Vec<CenterId>> {
    let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
    Ok(SolutionDoc::from_json(&bytes)
        .with_context(|| format!("loading solution {}", p.display()))?
        .open_centers())
}

fn parse_seed(s: &str) -> Result<SeedPolicy> {
    if s == "greedy" {
        return Ok(SeedPolicy::GreedyFarthest);
    }
    if let Some(n) = s.strip_prefix("random:") {
        return Ok(SeedPolicy::Random(n.parse().context("random seed must be a u64")?));
    }
    let ids = s
        .split(',')
        .map(|t| t.trim().parse().map(CenterId))
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("seed must be `greedy`, `random:<n>` or center ids, got `{s}`"))?;
    Ok(SeedPolicy::Explicit(ids))
}

fn pivot(p: Pivot) -> PivotRule {
    match p {
        Pivot::First => PivotRule::FirstImprovement,
        Pivot::Best => PivotRule::BestImprovement,
    }
}

fn solve(a: SolveArgs) -> Result<ExitCode> {
    let inst = read_instance(&a.instance)?;
    let cfg = SearchConfig {
        rho: a.rho,
        epsilon_stop: a.epsilon_stop,
        pivot: pivot(a.pivot),
        max_iterations: a.max_iterations,
        seed: parse_seed(&a.seed)?,
    };
    let trace = local_search(&inst, &cfg)?;
    eprintln!(
        "cost {} after {} iterations ({:?})",
        canonical::format_float(trace.final_cost()),
        trace.iterations(),
        trace.termination
    );
    if let Some(t) = &a.trace {
        write_out(t, &trace.to_json())?;
    }
    emit(a.out.as_deref(), &trace.solution.to_doc().to_json())?;
    Ok(ExitCode::SUCCESS)
}

fn exact(a: ExactArgs) -> Result<ExitCode> {
    let inst = read_instance(&a.instance)?;
    let res = solve_exact(&inst, a.size_cap)?;
    emit(a.out.as_deref(), &res.to_json())?;
    Ok(ExitCode::SUCCESS)
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}.{suffix}.json"))
}

fn gap_gen(a: GapGenArgs) -> Result<ExitCode> {
    let g: GapInstance = match a.family {
        Family::Ufl => {
            let Some(rho) = a.rho else {
                bail!("--family ufl requires --rho")
            };
            gen_ufl_gap(UflGapParams { rho, z: a.z })?
        }
        Family::Kmed => {
            let Some(k) = a.k else {
                bail!("--family kmed requires --k")
            };
            if k < 2 || !a.z.is_multiple_of(k - 1) {
                bail!("--z must be a multiple of k - 1 with k >= 2");
            }
            let u = a.z / (k - 1);
            let gamma = a
                .gamma
                .unwrap_or_else(|| (((u as f64 - 1.0) / 2.0 + 0.25) * a.beta.powf(a.q)).powf(1.0 / a.q));
            gen_kmed_gap(KMedGapParams {
                k,
                z: a.z,
                beta: a.beta,
                gamma,
                n: a.n,
                q: a.q,
            })?
        }
    };
    let local = evaluate(&g.instance, &g.stated_local)?;
    let opt = evaluate(&g.instance, &g.stated_opt)?;
    write_out(&a.out, &save_instance(&g.instance))?;
    write_out(
        &a.local_out.unwrap_or_else(|| sibling(&a.out, "local")),
        &local.to_doc().to_json(),
    )?;
    write_out(
        &a.opt_out.unwrap_or_else(|| sibling(&a.out, "opt")),
        &opt.to_doc().to_json(),
    )?;
    eprintln!(
        "stated local cost {}, stated optimum cost {}",
        canonical::format_float(local.cost()),
        canonical::format_float(opt.cost())
    );
    Ok(ExitCode::SUCCESS)
}

fn gap_verify(a: GapVerifyArgs) -> Result<ExitCode> {
    let inst = read_instance(&a.instance)?;
    let local = read_solution(&a.local)?;
    let opt = read_solution(&a.opt)?;
    let report = verify_gap(&inst, &local, &opt, a.rho, a.confirm_opt)?;
    emit(a.out.as_deref(), &canonical::to_string(&report))?;
    if !report.local_certified {
        eprintln!("stated local solution is not a {}-swap local optimum", a.rho);
        return Ok(ExitCode::from(2));
    }
    if report.opt_confirmed == Some(false) {
        eprintln!("stated optimum is not optimal");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn pair_verify(a: PairVerifyArgs) -> Result<ExitCode> {
    let inst = read_instance(&a.instance)?;
    let variant = match inst.kind() {
        ProblemKind::UflOut { .. } => Variant::Ufl,
        ProblemKind::KClusterOut { .. } => Variant::KCluster,
    };
    if a.alpha.is_none() && variant == Variant::Ufl && (a.epsilon.is_nan() || a.epsilon <= 0.0) {
        bail!("--epsilon must be > 0");
    }
    let cfg = TrialConfig {
        trials: a.trials,
        rho: a.rho,
        alpha: a.alpha.unwrap_or_else(|| default_alpha(variant, a.rho, a.epsilon)),
        policy: match a.policy {
            Policy::Singleton => PolicyKind::Singleton,
            Policy::Random => PolicyKind::Random,
        },
        source: match a.source {
            Source::Random => SolutionSource::Random,
            Source::Search => SolutionSource::SearchVsOracle,
        },
        seed: a.seed,
    };
    let summary = run_trials(&inst, &cfg)?;
    emit(a.out.as_deref(), &canonical::to_string(&summary))?;
    eprintln!("{} of {} trials passed", summary.passed, cfg.trials);
    Ok(if summary.failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

#[derive(Serialize)]
struct CsvRow {
    index: usize,
    seed: u64,
    n: usize,
    m: usize,
    k: usize,
    budget: usize,
    z: usize,
    q: f64,
    rho: usize,
    ls_cost: f64,
    opt_cost: f64,
    ratio: f64,
    iterations: usize,
    wall_seconds: f64,
}

fn bench(a: BenchArgs) -> Result<ExitCode> {
    let rho = match a.rho.as_str() {
        "all" => Rho::AllCenters,
        r => Rho::Fixed(r.parse().context("--rho must be a positive integer or `all`")?),
    };
    let cfg = SweepConfig {
        instances: a.instances,
        seed: a.seed,
        n: a.n_min..=a.n_max,
        m: a.m_min..=a.m_max,
        z_max: a.z_max,
        dim: a.dim,
        qs: a.q,
        problem: match a.ufl_opening {
            Some(opening) => SweepProblem::Ufl { opening },
            None => SweepProblem::KCluster {
                k_max: a.k_max,
                epsilon: a.epsilon,
            },
        },
        rho,
        epsilon_stop: a.epsilon_stop,
        pivot: pivot(a.pivot),
    };
    let report = run_sweep(&cfg)?;
    if let Some(p) = &a.csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &report.rows {
            w.serialize(CsvRow {
                index: r.index,
                seed: r.seed,
                n: r.n,
                m: r.m,
                k: r.k,
                budget: r.budget,
                z: r.z,
                q: r.q,
                rho: r.rho,
                ls_cost: r.ls_cost,
                opt_cost: r.opt_cost,
                ratio: r.ratio,
                iterations: r.iterations,
                wall_seconds: r.wall_seconds,
            })?;
        }
        write_out(p, &String::from_utf8(w.into_inner()?)?)?;
    }
    emit(a.out.as_deref(), &report.to_json())?;
    let s = &report.summary;
    eprintln!(
        "{} rows, mean ratio {:.6}, max ratio {:.6}",
        s.rows, s.mean_ratio, s.max_ratio
    );
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be >= 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Solve(a) => solve(a),
        Command::Exact(a) => exact(a),
        Command::GapGen(a) => gap_gen(a),
        Command::GapVerify(a) => gap_verify(a),
        Command::PairVerify(a) => pair_verify(a),
        Command::Bench(a) => bench(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
