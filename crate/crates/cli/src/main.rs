use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use arclp::mps::fmt_f64;
use arclp::verify::{check_rate_identities, scaling_experiment, RateQuantity};
use arclp::{
    generate_random_lp, parse_mps, read_iteration_log, solve, to_standard_form,
    write_iteration_log, write_standard_mps, InitScale, LogFormat, ObjectiveSense, RecordStatus,
    SolveStatus, SolverOptions, THETA_MAX,
};
use clap::{ArgAction, Args, Parser, Subcommand};
use log::LevelFilter;

/// Exit code for input, parse and usage errors.
const EXIT_INPUT: u8 = 2;
/// Exit code for a non-optimal solve or failed log checks.
const EXIT_NOT_OPTIMAL: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "arclp", version, about = "Arc-search interior-point LP solver")]
struct Cli {
    /// More diagnostics on stderr (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,

    /// Only report errors on stderr.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve an MPS file.
    Solve(SolveArgs),
    /// Write a random instance with a planted optimum as MPS.
    Generate(GenerateArgs),
    /// Run the iteration-growth experiment on generated instances.
    Bench(BenchArgs),
    /// Check an iteration log for the per-step rate identities and the
    /// neighborhood bound.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct SolverFlags {
    /// Neighborhood radius, in (0, 1/(2+√2)].
    #[arg(long, default_value_t = THETA_MAX)]
    theta: f64,

    /// Termination tolerance on μ, ‖r_b‖ and ‖r_c‖.
    #[arg(long, default_value_t = 1e-8)]
    epsilon: f64,

    /// Initial point scale ζ (x = s = ζe), or "auto".
    #[arg(long, default_value = "auto", value_parser = parse_init_scale)]
    init_scale: InitScale,
}

impl SolverFlags {
    fn options(&self, max_iterations: usize) -> SolverOptions {
        SolverOptions {
            theta: self.theta,
            epsilon: self.epsilon,
            max_iterations,
            init_scale: self.init_scale,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// MPS file to solve.
    input: PathBuf,

    #[command(flatten)]
    solver: SolverFlags,

    /// Iteration limit (at least 1).
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
    max_iters: u64,

    /// Maximize the objective instead of minimizing it.
    #[arg(long)]
    maximize: bool,

    /// Scale the residual tolerances by 1 + ‖b‖ and 1 + ‖c‖.
    #[arg(long)]
    relative: bool,

    /// Write the iteration log to this file.
    #[arg(long)]
    log: Option<PathBuf>,

    /// Log format; defaults to json for *.json paths and csv otherwise.
    #[arg(long, value_parser = LogFormat::from_str)]
    log_format: Option<LogFormat>,

    /// Also print the value of every original variable.
    #[arg(long)]
    solution: bool,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Number of rows.
    #[arg(long)]
    m: usize,

    /// Number of columns (at least m).
    #[arg(long)]
    n: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output file; stdout if omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Comma-separated sizes as MxN.
    #[arg(long, default_value = "5x10,10x20,20x40,40x80,80x160", value_parser = parse_sizes)]
    sizes: Sizes,

    /// First seed; each size uses seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Instances per size.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    seeds_per_size: u64,

    #[command(flatten)]
    solver: SolverFlags,

    /// Human-readable table instead of CSV.
    #[arg(long)]
    table: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Iteration log written by `solve --log`.
    log: PathBuf,

    /// Log format; defaults to json for *.json paths and csv otherwise.
    #[arg(long, value_parser = LogFormat::from_str)]
    log_format: Option<LogFormat>,

    /// Neighborhood radius the log is checked against.
    #[arg(long, default_value_t = THETA_MAX)]
    theta: f64,
}

/// Error carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

fn parse_init_scale(s: &str) -> Result<InitScale, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(InitScale::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(InitScale::Fixed(v)),
        _ => Err(format!("expected a positive number or `auto`, got `{s}`")),
    }
}

/// `(m, n)` pairs for `bench`.
#[derive(Debug, Clone)]
struct Sizes(Vec<(usize, usize)>);

fn parse_sizes(s: &str) -> Result<Sizes, String> {
    s.split(',')
        .map(|part| {
            let (m, n) = part
                .trim()
                .split_once(['x', 'X'])
                .ok_or_else(|| format!("size `{part}` is not of the form MxN"))?;
            let m: usize = m.parse().map_err(|_| format!("invalid row count in `{part}`"))?;
            let n: usize = n.parse().map_err(|_| format!("invalid column count in `{part}`"))?;
            if m == 0 || n < m {
                return Err(format!("size `{part}` needs 1 <= m <= n"));
            }
            Ok((m, n))
        })
        .collect::<Result<_, _>>()
        .map(Sizes)
}

fn log_format_for(path: &Path, explicit: Option<LogFormat>) -> LogFormat {
    explicit.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("json") => LogFormat::Json,
        _ => LogFormat::Csv,
    })
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn run_solve(args: &SolveArgs, out: &mut dyn Write) -> Result<u8, Failure> {
    let text = read_input(&args.input)?;
    let mut lp =
        parse_mps(&text).map_err(|e| Failure::input(format!("{}: {e}", args.input.display())))?;
    if args.maximize {
        lp.sense = ObjectiveSense::Maximize;
    }
    let (problem, mapping) =
        to_standard_form(&lp).map_err(|e| Failure::input(format!("{}: {e}", args.input.display())))?;
    let mut opts = args.solver.options(args.max_iters as usize);
    opts.relative_tolerance = args.relative;
    let result = solve(&problem, &opts).map_err(|e| Failure::input(e.to_string()))?;

    if let Some(path) = &args.log {
        let format = log_format_for(path, args.log_format);
        fs::write(path, write_iteration_log(&result.records, format))
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
    }

    let z = &result.iterate;
    let objective = mapping.original_objective(result.objective);
    let _ = writeln!(out, "status {}", result.status);
    let _ = writeln!(out, "objective {}", fmt_f64(objective));
    let _ = writeln!(out, "iterations {}", result.iterations);
    let _ = writeln!(out, "mu {}", fmt_f64(z.mu()));
    let _ = writeln!(out, "norm_rb {}", fmt_f64(z.norm_rb()));
    let _ = writeln!(out, "norm_rc {}", fmt_f64(z.norm_rc()));
    if args.solution {
        for (col, v) in lp.columns.iter().zip(mapping.recover_x(z.x())) {
            let _ = writeln!(out, "x {} {}", col.name, fmt_f64(v));
        }
    }
    if let Some(note) = &result.note {
        log::warn!("{note}");
    }
    Ok(if result.status == SolveStatus::Optimal {
        0
    } else {
        EXIT_NOT_OPTIMAL
    })
}

fn run_generate(args: &GenerateArgs, out: &mut dyn Write) -> Result<u8, Failure> {
    let g = generate_random_lp(args.m, args.n, args.seed).map_err(|e| Failure::input(e.to_string()))?;
    let comments = [
        format!("random instance m={} n={} seed={}", args.m, args.n, args.seed),
        format!("planted optimal objective {}", fmt_f64(g.optimal_objective())),
    ];
    let name = format!("RAND_{}_{}_{}", args.m, args.n, args.seed);
    let text = write_standard_mps(&g.problem, &name, &comments);
    match &args.output {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?,
        None => {
            let _ = out.write_all(text.as_bytes());
        }
    }
    Ok(0)
}

fn run_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<u8, Failure> {
    let opts = args.solver.options(usize::MAX);
    opts.validate().map_err(|e| Failure::input(e.to_string()))?;
    let seeds: Vec<u64> = (0..args.seeds_per_size).map(|i| args.seed + i).collect();
    let report = scaling_experiment(&args.sizes.0, &seeds, args.solver.epsilon, &opts);
    let text = if args.table {
        let mut t = report.to_table();
        t.push_str(&format!(
            "trend of iters/(nL) against ln n: slope {}\n",
            fmt_f64(report.ratio_trend_slope())
        ));
        t
    } else {
        report.to_csv()
    };
    let _ = out.write_all(text.as_bytes());
    for row in report.rows.iter().filter(|r| r.note.is_some()) {
        log::warn!(
            "n={} m={} seed={}: {}",
            row.n,
            row.m,
            row.seed,
            row.note.as_deref().unwrap_or_default()
        );
    }
    Ok(0)
}

fn run_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<u8, Failure> {
    let text = read_input(&args.log)?;
    let format = log_format_for(&args.log, args.log_format);
    let records = read_iteration_log(&text, format)
        .map_err(|e| Failure::input(format!("{}: {e}", args.log.display())))?;
    if records.len() < 2 {
        return Err(Failure::input(format!(
            "{}: need at least 2 records, found {}",
            args.log.display(),
            records.len()
        )));
    }
    let rates = check_rate_identities(&records);
    let _ = writeln!(
        out,
        "rate identities: {} ({} steps, max deviation {})",
        if rates.passed() { "pass" } else { "fail" },
        rates.pairs_checked,
        fmt_f64(rates.max_deviation)
    );
    for f in &rates.failures {
        let what = match f.quantity {
            RateQuantity::Mu => "mu",
            RateQuantity::PrimalResidual => "norm_rb",
            RateQuantity::DualResidual => "norm_rc",
        };
        let _ = writeln!(out, "  iteration {}: {what} deviates by {}", f.k, fmt_f64(f.deviation));
    }
    // The log carries ‖x∘s − μe‖/μ per iterate; μ = 0 rows store 0.
    let outside: Vec<usize> = records
        .iter()
        .filter(|r| !(r.neigh_dist <= args.theta))
        .map(|r| r.k)
        .collect();
    let worst = records.iter().map(|r| r.neigh_dist).fold(0.0, f64::max);
    let _ = writeln!(
        out,
        "neighborhood: {} ({} iterates, max distance {}, theta {})",
        if outside.is_empty() { "pass" } else { "fail" },
        records.len(),
        fmt_f64(worst),
        fmt_f64(args.theta)
    );
    for k in &outside {
        let _ = writeln!(out, "  iteration {k}: outside the neighborhood");
    }
    let final_status = match records.last().map(|r| r.status) {
        Some(RecordStatus::Final(s)) => s.as_str(),
        _ => "missing",
    };
    let _ = writeln!(out, "final status: {final_status}");
    Ok(if rates.passed() && outside.is_empty() {
        0
    } else {
        EXIT_NOT_OPTIMAL
    })
}

fn init_logging(cli: &Cli) {
    let level = if cli.quiet {
        LevelFilter::Error
    } else {
        match cli.verbose {
            0 => LevelFilter::Warn,
            1 => LevelFilter::Info,
            2 => LevelFilter::Debug,
            _ => LevelFilter::Trace,
        }
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    init_logging(&cli);
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = match &cli.command {
        Command::Solve(a) => run_solve(a, &mut out),
        Command::Generate(a) => run_generate(a, &mut out),
        Command::Bench(a) => run_bench(a, &mut out),
        Command::Verify(a) => run_verify(a, &mut out),
    };
    let _ = out.flush();
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
