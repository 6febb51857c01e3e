//! `mockrad` command-line interface.
//!
//! Exit codes: 0 success, 1 cache i/o, 2 usage, 3 numerical failure,
//! 4 horizon exceeded, 5 verification or table mismatch.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use mockrad::multipliers::KloostermanCache;
use mockrad::qseries::{format_ratio, oracle_alpha3, ratio_decimal, FluxClass};
use mockrad::quadrature::QuadConfig;
use mockrad::rademacher::{alpha3_rademacher_with, format_sig, round_sig, RademacherConfig};
use mockrad::tables::{reference_tables, reproduce_table, TableReport, TABLE_TOL};
use mockrad::verify::{run_suite, Record, Suite};
use mockrad::{ComplexValue, Error};

const EXIT_CACHE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_HORIZON: u8 = 4;
const EXIT_MISMATCH: u8 = 5;

#[derive(Parser, Debug)]
#[command(name = "mockrad", version, about = "Fourier coefficients of the U(3) Vafa-Witten partition function on P2")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Tsv)]
    format: Format,

    /// TOML file with an optional [quad] section and `threads`, `cache` keys.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(flatten)]
    quad: QuadFlags,
}

#[derive(Args, Debug, Default)]
struct QuadFlags {
    #[arg(long, global = true)]
    quad_interval_order: Option<usize>,
    #[arg(long, global = true)]
    quad_radial_order: Option<usize>,
    #[arg(long, global = true)]
    quad_angular_order: Option<usize>,
    #[arg(long, global = true)]
    quad_mordell_order: Option<usize>,
    #[arg(long, global = true)]
    quad_tail_eps: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Truncated Rademacher series for α₃,μ(n).
    Compute {
        #[command(flatten)]
        series: SeriesArgs,
        /// Kloosterman cache file, created if missing.
        #[arg(long, value_name = "PATH")]
        cache: Option<PathBuf>,
    },
    /// Exact coefficients α₃,μ(0..=n_max) from the q-series.
    Oracle {
        #[arg(long, allow_hyphen_values = true, value_parser = parse_flux)]
        mu: FluxClass,
        #[arg(long)]
        n_max: usize,
    },
    /// Numerical checks of the modular identities.
    Verify {
        #[arg(value_parser = parse_suite)]
        suite: Suite,
    },
    /// Recomputes both reference tables and diffs every cell.
    Tables {
        /// Absolute tolerance per cell.
        #[arg(long, default_value_t = TABLE_TOL)]
        tol: f64,
        #[arg(long, value_name = "PATH")]
        cache: Option<PathBuf>,
    },
    /// Times repeated evaluations of the series.
    Bench {
        #[command(flatten)]
        series: SeriesArgs,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
        repeat: u32,
    },
}

#[derive(Args, Debug)]
struct SeriesArgs {
    #[arg(long, allow_hyphen_values = true, value_parser = parse_flux)]
    mu: FluxClass,
    #[arg(long, value_parser = clap::value_parser!(i64).range(0..))]
    n: i64,
    /// Number of levels k = 1..=N.
    #[arg(long = "N", value_parser = clap::value_parser!(u64).range(1..))]
    big_n: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    quad: Option<QuadConfig>,
    threads: Option<usize>,
    cache: Option<PathBuf>,
}

fn parse_flux(s: &str) -> Result<FluxClass, String> {
    let mu: i64 = s.parse().map_err(|_| format!("'{s}' is not an integer"))?;
    FluxClass::new(mu).map_err(|e| e.to_string())
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::HorizonExceeded { .. } => EXIT_HORIZON,
            Error::Config(_) | Error::InvalidFlux(_) | Error::InvalidMatrix { .. } => EXIT_USAGE,
            Error::Cache(_) => EXIT_CACHE,
            _ => EXIT_NUMERICAL,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: String) -> Failure {
    Failure { code: EXIT_USAGE, message }
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig, Failure> {
    let Some(path) = path else { return Ok(FileConfig::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn quad_config(file: &FileConfig, flags: &QuadFlags) -> Result<QuadConfig, Failure> {
    let mut q = file.quad.unwrap_or_default();
    if let Some(v) = flags.quad_interval_order {
        q.interval_order = v;
    }
    if let Some(v) = flags.quad_radial_order {
        q.radial_order = v;
    }
    if let Some(v) = flags.quad_angular_order {
        q.angular_order = v;
    }
    if let Some(v) = flags.quad_mordell_order {
        q.mordell_order = v;
    }
    if let Some(v) = flags.quad_tail_eps {
        q.tail_eps = v;
    }
    q.validate()?;
    Ok(q)
}

/// MOCKRAD_THREADS takes precedence over the config file.
fn init_threads(file: &FileConfig) -> Result<(), Failure> {
    let threads = match std::env::var("MOCKRAD_THREADS") {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&t| t > 0)
                .ok_or_else(|| usage(format!("MOCKRAD_THREADS = '{v}' is not a positive integer")))?,
        ),
        Err(_) => file.threads,
    };
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure { code: EXIT_NUMERICAL, message: e.to_string() })?;
    }
    Ok(())
}

fn open_cache(path: Option<&Path>) -> Result<Option<KloostermanCache>, Failure> {
    Ok(path.map(KloostermanCache::open).transpose()?)
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json renders"));
}

fn compute(cfg: &RademacherConfig, cache: Option<&KloostermanCache>, format: Format) -> Result<(), Failure> {
    let b = alpha3_rademacher_with(cfg, cache)?;
    if let Some(c) = cache {
        c.save()?;
    }
    match format {
        Format::Tsv => print!("{}", b.to_tsv()),
        Format::Json => print_json(&b.to_json()),
    }
    Ok(())
}

fn oracle(mu: FluxClass, n_max: usize, format: Format) -> Result<(), Failure> {
    let rows = (0..=n_max)
        .map(|n| oracle_alpha3(mu, n).map(|r| (n, format_ratio(&r), ratio_decimal(&r, 6))))
        .collect::<Result<Vec<_>, _>>()?;
    match format {
        Format::Tsv => {
            println!("n\texact\tdecimal");
            for (n, exact, dec) in rows {
                println!("{n}\t{exact}\t{dec}");
            }
        }
        Format::Json => {
            let v: Vec<Value> =
                rows.into_iter().map(|(n, exact, dec)| json!({ "n": n, "exact": exact, "decimal": dec })).collect();
            print_json(&json!({ "mu": mu.mu(), "coefficients": v }));
        }
    }
    Ok(())
}

fn rounded(r: &Record) -> Record {
    let c = |z: ComplexValue| ComplexValue::new(round_sig(z.re), round_sig(z.im));
    Record { lhs: c(r.lhs), rhs: c(r.rhs), residual: round_sig(r.residual), ..r.clone() }
}

fn complex_sig(z: ComplexValue) -> String {
    let im = format_sig(z.im);
    let sign = if im.starts_with('-') { "" } else { "+" };
    format!("{}{sign}{im}i", format_sig(z.re))
}

fn verify(suite: Suite, quad: &QuadConfig, format: Format) -> Result<(), Failure> {
    let report = run_suite(suite, quad)?;
    let records: Vec<Record> = report.records.iter().map(rounded).collect();
    match format {
        Format::Tsv => {
            println!("identity\tparameters\tlhs\trhs\tresidual\ttolerance\tpass");
            for r in &records {
                println!(
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    r.identity,
                    r.parameters,
                    complex_sig(r.lhs),
                    complex_sig(r.rhs),
                    format_sig(r.residual),
                    r.tolerance,
                    r.pass
                );
            }
        }
        Format::Json => print_json(&json!({ "suite": suite, "pass": report.pass, "records": records })),
    }
    if report.pass {
        Ok(())
    } else {
        Err(Failure { code: EXIT_MISMATCH, message: format!("failing identities: {}", report.failing_identities().join(", ")) })
    }
}

fn tables(quad: &QuadConfig, tol: f64, cache: Option<&KloostermanCache>, format: Format) -> Result<(), Failure> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(usage(format!("--tol {tol} must be a nonnegative number")));
    }
    let reports = reference_tables()
        .iter()
        .map(|t| reproduce_table(t, quad, cache).map(|r| r.with_tolerance(tol)))
        .collect::<Result<Vec<TableReport>, _>>()?;
    if let Some(c) = cache {
        c.save()?;
    }
    match format {
        Format::Tsv => {
            println!("table\trow\tN\texpected\tdisplay\tcomputed\tdiff\tpass");
            for r in &reports {
                for c in &r.cells {
                    println!(
                        "{}\t{}\t{}\t{:.prec$}\t{}\t{}\t{}\t{}",
                        r.name,
                        c.row,
                        c.big_n,
                        c.expected,
                        c.display,
                        format_sig(c.computed),
                        format_sig(c.diff),
                        c.pass,
                        prec = r.decimals
                    );
                }
            }
        }
        Format::Json => print_json(&serde_json::to_value(&reports).expect("reports serialize")),
    }
    let failures: Vec<String> = reports
        .iter()
        .flat_map(|r| {
            r.failures().map(move |c| {
                format!(
                    "{} {} N={}: expected {:.prec$} got {} (diff {:.3e})",
                    r.name,
                    c.row,
                    c.big_n,
                    c.expected,
                    c.display,
                    c.diff,
                    prec = r.decimals
                )
            })
        })
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure { code: EXIT_MISMATCH, message: format!("table mismatch:\n{}", failures.join("\n")) })
    }
}

fn bench(cfg: &RademacherConfig, repeat: u32, format: Format) -> Result<(), Failure> {
    let mut times = Vec::with_capacity(repeat as usize);
    let mut total = 0.0;
    for _ in 0..repeat {
        let t = Instant::now();
        total = alpha3_rademacher_with(cfg, None)?.total;
        times.push(t.elapsed().as_secs_f64());
    }
    let min = times.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    match format {
        Format::Tsv => {
            println!("mu\tn\tN\trepeat\tmin_s\tmean_s\ttotal");
            println!(
                "{}\t{}\t{}\t{repeat}\t{}\t{}\t{}",
                cfg.flux.mu(),
                cfg.n,
                cfg.big_n,
                format_sig(min),
                format_sig(mean),
                format_sig(total)
            );
        }
        Format::Json => print_json(&json!({
            "mu": cfg.flux.mu(), "n": cfg.n, "N": cfg.big_n, "repeat": repeat,
            "min_s": round_sig(min), "mean_s": round_sig(mean), "total": round_sig(total),
            "threads": rayon::current_num_threads(),
        })),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = load_file_config(cli.config.as_deref())?;
    init_threads(&file)?;
    let quad = quad_config(&file, &cli.quad)?;
    let series = |s: &SeriesArgs| RademacherConfig { quad, ..RademacherConfig::new(s.mu, s.n, s.big_n) };
    match &cli.command {
        Command::Compute { series: s, cache } => {
            let cache = open_cache(cache.as_deref().or(file.cache.as_deref()))?;
            compute(&series(s), cache.as_ref(), cli.format)
        }
        Command::Oracle { mu, n_max } => oracle(*mu, *n_max, cli.format),
        Command::Verify { suite } => verify(*suite, &quad, cli.format),
        Command::Tables { tol, cache } => {
            let cache = open_cache(cache.as_deref().or(file.cache.as_deref()))?;
            tables(&quad, *tol, cache.as_ref(), cli.format)
        }
        Command::Bench { series: s, repeat } => bench(&series(s), *repeat, cli.format),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
