//! Command-line driver: fan inspection, series dumps, counting runs and the
//! verification suites.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 validation or criterion
//! failure, 3 oracle mismatch, 4 budget exhaustion.

mod config;
mod pretty;

use campana::curve::CurveModel;
use campana::error::Error;
use campana::euler::{
    campana_admissible_local, campana_moebius, classical_moebius, euler_product_counting,
};
use campana::fan::resolve_fan;
use campana::ffcount::CountOptions;
use campana::predict::{convergence_report, CountReport};
use campana::verify::{run_suite, Budget};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_ORACLE: u8 = 3;
const EXIT_BUDGET: u8 = 4;

#[derive(Parser)]
#[command(
    name = "campana",
    about = "Exact counting of rational and Campana curves on split toric varieties over finite fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FanAction {
    Validate,
    Invariants,
    Collections,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeriesAction {
    Moebius,
    CampanaMoebius,
    Admissible,
    Euler,
}

#[derive(Clone, Copy, ValueEnum)]
enum BudgetArg {
    Small,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a fan or print its derived invariants
    Fan {
        #[arg(value_enum)]
        action: FanAction,
        /// library name (p1, p2, p1xp1, hirzebruch:a, dp6) or file path
        fan: String,
        /// write the normalised fan document here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a local or Euler-product series in the dump format
    Series {
        #[arg(value_enum)]
        action: SeriesAction,
        /// library name or file path
        fan: String,
        /// multiplicities, comma-separated (defaults to all 1)
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<u32>>,
        /// truncation bound (total degree)
        #[arg(long, default_value_t = 8)]
        bound: u32,
        /// curve preset for the euler action
        #[arg(long, default_value = "p1")]
        curve: String,
        /// field size for the euler action
        #[arg(long, default_value_t = 2)]
        q: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run counters and predictions, emitting a CountReport
    Count {
        /// load an experiment config file (flags override it)
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        fan: Option<String>,
        #[arg(long)]
        curve: Option<String>,
        /// field sizes, comma-separated
        #[arg(long, value_delimiter = ',')]
        q: Option<Vec<u64>>,
        /// multiplicities, comma-separated
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<u32>>,
        /// a multidegree, comma-separated; repeatable
        #[arg(long = "deg", action = clap::ArgAction::Append)]
        deg: Vec<String>,
        /// also take degrees a*(1,...,1) for a = 1..=DIAG
        #[arg(long)]
        diag: Option<u32>,
        /// series truncation bound (defaults to the largest degree + 1)
        #[arg(long)]
        bound: Option<u32>,
        /// tuple-space budget for the brute-force counters
        #[arg(long)]
        budget: Option<u128>,
        /// wall-clock budget in seconds for the brute-force counters
        #[arg(long)]
        time_limit: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// directory for report.csv / report.txt (stdout otherwise)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an acceptance suite and print one verdict per criterion
    Verify {
        /// suite name or `all`
        suite: String,
        #[arg(long, value_enum, default_value = "full")]
        budget: BudgetArg,
        #[arg(long)]
        workers: Option<usize>,
        /// directory for any attached reports
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e);
            let code = match e {
                Error::OracleMismatch { .. } => EXIT_ORACLE,
                Error::BudgetExceeded(_, _) | Error::TimeBudgetExceeded(_) => EXIT_BUDGET,
                _ => EXIT_CONFIG,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Fan { action, fan, out } => cmd_fan(action, &fan, out),
        Command::Series {
            action,
            fan,
            m,
            bound,
            curve,
            q,
            out,
        } => cmd_series(action, &fan, m, bound, &curve, q, out),
        Command::Count {
            config,
            fan,
            curve,
            q,
            m,
            deg,
            diag,
            bound,
            budget,
            time_limit,
            workers,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => config::ExperimentConfig::load(&path)?,
                None => config::ExperimentConfig::default(),
            };
            cfg.merge_flags(
                fan, curve, q, m, &deg, diag, bound, budget, time_limit, workers, out,
            )?;
            cmd_count(cfg)
        }
        Command::Verify {
            suite,
            budget,
            workers,
            out,
        } => cmd_verify(&suite, budget, workers, out),
    }
}

fn cmd_fan(action: FanAction, name: &str, out: Option<PathBuf>) -> Result<ExitCode, Error> {
    let fan = resolve_fan(name)?;
    if let Some(path) = &out {
        std::fs::write(path, fan.to_document())
            .map_err(|e| Error::Config(format!("cannot write {}: {}", path.display(), e)))?;
    }
    match action {
        FanAction::Validate => {
            let report = fan.validate();
            println!(
                "fan {}: smooth={} complete={}",
                fan.label(),
                report.smooth,
                report.complete
            );
            for v in &report.violations {
                println!("  violation: {}", v);
            }
            if !report.is_valid() {
                return Ok(ExitCode::from(EXIT_VALIDATION));
            }
        }
        FanAction::Invariants => {
            let report = fan.validate();
            let pic = fan.picard_lattice()?;
            println!("fan {}: dim={} rays={}", fan.label(), fan.dim(), fan.num_rays());
            println!("smooth={} complete={}", report.smooth, report.complete);
            println!("picard rank = {}", pic.rank);
            println!("ray pairing = {:?}", pic.ray_pairing);
            println!("degree matrix = {:?}", pic.degree_matrix);
            println!("section matrix = {:?}", pic.section_matrix);
            if !report.is_valid() {
                return Ok(ExitCode::from(EXIT_VALIDATION));
            }
        }
        FanAction::Collections => {
            let pc = fan.primitive_collections();
            for c in &pc.minimal_collections {
                let parts: Vec<String> = c.iter().map(|i| i.to_string()).collect();
                println!("{{{}}}", parts.join(","));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_series(
    action: SeriesAction,
    fan_name: &str,
    m: Option<Vec<u32>>,
    bound: u32,
    curve_name: &str,
    q: u64,
    out: Option<PathBuf>,
) -> Result<ExitCode, Error> {
    let fan = resolve_fan(fan_name)?;
    let m = m.unwrap_or_else(|| vec![1; fan.num_rays()]);
    if m.len() != fan.num_rays() {
        return Err(Error::DegreeLength(m.len(), fan.num_rays()));
    }
    let text = match action {
        SeriesAction::Moebius => {
            let mu = classical_moebius(&fan);
            format!(
                "# series = {}\n{}",
                pretty::render(&mu.series),
                mu.series.dump()
            )
        }
        SeriesAction::CampanaMoebius => {
            let mu = campana_moebius(&fan, &m, bound)?;
            format!(
                "# series = {}\n{}",
                pretty::render(&mu.series),
                mu.series.dump()
            )
        }
        SeriesAction::Admissible => {
            let adm = campana_admissible_local(&fan, &m, bound)?;
            adm.series.dump()
        }
        SeriesAction::Euler => {
            let curve = config::resolve_curve_name(curve_name)?;
            let adm = campana_admissible_local(&fan, &m, bound)?;
            let ep = euler_product_counting(&adm, &curve, q, bound)?;
            ep.dump()
        }
    };
    match out {
        Some(path) => std::fs::write(&path, text)
            .map_err(|e| Error::Config(format!("cannot write {}: {}", path.display(), e)))?,
        None => print!("{}", text),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_count(cfg: config::ExperimentConfig) -> Result<ExitCode, Error> {
    let fan = resolve_fan(&cfg.fan)?;
    let report = fan.validate();
    if !report.is_valid() {
        eprintln!("fan {} fails validation:", fan.label());
        for v in &report.violations {
            eprintln!("  {}", v);
        }
        return Ok(ExitCode::from(EXIT_VALIDATION));
    }
    let curve = cfg.resolve_curve()?;
    let m = cfg.resolve_mults(&fan)?;
    let degrees = cfg.resolve_degrees(&fan)?;
    if degrees.is_empty() {
        return Err(Error::Config("no degrees requested".into()));
    }
    let bound = cfg.resolve_bound(&degrees);
    let opts = CountOptions {
        max_tuples: cfg.max_tuples.unwrap_or(100_000_000),
        time_limit: cfg.time_limit_secs.map(std::time::Duration::from_secs),
        workers: cfg.workers,
    };
    let mut admissible = Vec::new();
    let mut inadmissible = Vec::new();
    for d in degrees {
        if fan.degree_admissible(&d)? {
            admissible.push(d);
        } else {
            inadmissible.push(d);
        }
    }

    let mut rows = Vec::new();
    let mut meta = None;
    for &q in &cfg.q {
        if !admissible.is_empty() {
            let report = convergence_report(&fan, &curve, q, &m, &admissible, bound, &opts)?;
            meta = Some(report.meta.clone());
            rows.extend(report.rows);
        }
        // non-admissible degrees count zero by contract
        for d in &inadmissible {
            rows.push(zero_row(&fan, &curve, q, &m, d, bound)?);
        }
        rows.sort_by(|a, b| {
            (a.q, a.d.iter().sum::<u32>(), &a.d).cmp(&(b.q, b.d.iter().sum::<u32>(), &b.d))
        });
    }
    let meta = match meta {
        Some(m) => m,
        None => campana::predict::ReportMeta {
            config_hash: "0".into(),
            bound,
            max_tuples: opts.max_tuples,
            workers: opts.workers,
            runtime_ms: 0,
        },
    };
    let report = CountReport { rows, meta };

    let budget_hit = report.rows.iter().any(|r| r.budget_exhausted);
    match &cfg.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| Error::Config(format!("cannot create {}: {}", dir.display(), e)))?;
            std::fs::write(dir.join("report.csv"), report.to_csv())
                .map_err(|e| Error::Config(format!("cannot write report.csv: {}", e)))?;
            std::fs::write(dir.join("report.txt"), report.to_text())
                .map_err(|e| Error::Config(format!("cannot write report.txt: {}", e)))?;
            println!("wrote {} rows to {}", report.rows.len(), dir.display());
        }
        None => print!("{}", report.to_csv()),
    }
    if budget_hit {
        return Ok(ExitCode::from(EXIT_BUDGET));
    }
    Ok(ExitCode::SUCCESS)
}

/// Report row for a non-admissible multidegree: every count is zero.
fn zero_row(
    fan: &campana::fan::Fan,
    curve: &CurveModel,
    q: u64,
    m: &[u32],
    d: &[u32],
    bound: u32,
) -> Result<campana::predict::ReportRow, Error> {
    use campana::predict::{normalised_count, tamagawa_constant};
    let zero = campana::rat_int(0);
    let tam = tamagawa_constant(fan, curve, q, m, bound)?;
    let min_ratio = d
        .iter()
        .zip(m)
        .map(|(di, mi)| campana::rat(i64::from(*di), i64::from(*mi)))
        .fold(None::<campana::Rat>, |acc, x| {
            Some(acc.map_or(x.clone(), |a| a.min(x)))
        })
        .unwrap_or_else(|| campana::rat_int(0));
    Ok(campana::predict::ReportRow {
        fan: fan.label().to_string(),
        curve: curve.label().to_string(),
        q,
        m: m.to_vec(),
        d: d.to_vec(),
        brute_count: Some(0),
        predicted_count: zero.clone(),
        normalised_value: normalised_count(&zero, fan, curve, q, d, m)?,
        limit_constant: tam.value,
        limit_error_bound: campana::rat_int(0),
        theorem_error_exponent: -min_ratio / campana::rat_int(4),
        budget_exhausted: false,
        asymptotic: curve.genus() >= 1,
    })
}

fn cmd_verify(
    suite: &str,
    budget: BudgetArg,
    workers: Option<usize>,
    out: Option<PathBuf>,
) -> Result<ExitCode, Error> {
    let budget = match budget {
        BudgetArg::Small => Budget::Small,
        BudgetArg::Full => Budget::Full,
    };
    let results = run_suite(suite, budget, workers)?;
    let mut all_pass = true;
    for r in &results {
        println!("{}", r.verdict_line());
        all_pass &= r.pass;
        if let (Some(report), Some(dir)) = (&r.report, &out) {
            std::fs::create_dir_all(dir)
                .map_err(|e| Error::Config(format!("cannot create {}: {}", dir.display(), e)))?;
            let base = dir.join(r.name);
            std::fs::write(base.with_extension("csv"), report.to_csv())
                .map_err(|e| Error::Config(format!("cannot write report: {}", e)))?;
            std::fs::write(base.with_extension("txt"), report.to_text())
                .map_err(|e| Error::Config(format!("cannot write report: {}", e)))?;
        }
    }
    let passed = results.iter().filter(|r| r.pass).count();
    println!("{}/{} criteria passed", passed, results.len());
    if all_pass {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_VALIDATION))
    }
}
