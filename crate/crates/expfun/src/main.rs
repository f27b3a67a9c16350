//! Command-line front end. Every analysis in the library is exposed as a
//! subcommand emitting CSV or JSON; identical command line + seed produces
//! byte-identical output. Exit codes: 0 success, 2 validation error,
//! 3 tolerance failure from `verify`.

use clap::{Args, Parser, Subcommand, ValueEnum};
use expfun::error::{Error, Result};
use expfun::export::{fmt_float, write_output, Csv};
use expfun::fit::{gamma_compare, MomentZScore};
use expfun::hierarchy::{discrete_functional, estimate_i, sup_distance, TwistedHierarchy};
use expfun::ifs::{build_ifs, is_singular};
use expfun::law::{Atom, StepLaw};
use expfun::moments::{
    bm_moment, lattice_moment_limit, lattice_moments, moment_bound, positive_moments, MomentSign,
};
use expfun::rng::RngStream;
use expfun::sample::sample_y;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "expfun",
    version,
    about = "Exponential functionals of random walks: moments, fractal law, Brownian limit"
)]
struct Cli {
    /// Output format; each subcommand has a natural default (tables CSV,
    /// reports JSON).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Base seed for every random stream (default: $EXPFUN_SEED, else 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: logical cores). Results are identical for
    /// any value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Flat key=value file mirroring the flags; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect a step law: atoms, log-moment, convergence.
    Law(LawArgs),
    /// Exact moment table E(Y^p) with bounds and limits.
    Moments(MomentsArgs),
    /// Integer coefficient rows of the moment recursion numerator.
    Coeffs(CoeffsArgs),
    /// Attractor analysis: cdf enclosures, cylinders, dimension, singularity.
    Fractal(FractalArgs),
    /// Draw independent samples of the functional.
    Simulate(SimulateArgs),
    /// Couple lattice levels on shared seeds and track convergence.
    Converge(ConvergeArgs),
    /// Fit simulated functionals against the reciprocal-gamma limit law.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct LawArgs {
    /// Drift of the two-atom walk law.
    #[arg(long)]
    nu: Option<f64>,
    /// Lattice refinement level (0 = the plain walk law).
    #[arg(long)]
    m: Option<u32>,
    /// Explicit atoms "gamma:p,gamma:p,..." overriding --nu/--m.
    #[arg(long)]
    atoms: Option<String>,
}

#[derive(Args)]
struct MomentsArgs {
    #[arg(long)]
    nu: Option<f64>,
    /// Highest moment order.
    #[arg(long)]
    pmax: Option<usize>,
    /// Lattice level; when given the table is for Y_m with its scale.
    #[arg(long)]
    m: Option<u32>,
}

#[derive(Args)]
struct CoeffsArgs {
    /// Row index.
    p: Option<u32>,
    /// Cross-check the row against exhaustive descent-set enumeration.
    #[arg(long)]
    verify_descent: bool,
    /// Validate rows 2..=p against the digit-deletion recursion.
    #[arg(long)]
    verify_deletion: bool,
}

#[derive(Args)]
struct FractalArgs {
    #[arg(long, global = true)]
    nu: Option<f64>,
    #[command(subcommand)]
    action: FractalAction,
}

#[derive(Subcommand)]
enum FractalAction {
    /// Rigorous cdf enclosures on an even probe grid over the support.
    Cdf {
        #[arg(long)]
        depth: Option<u32>,
        #[arg(long)]
        probes: Option<usize>,
    },
    /// All depth-k cylinder intervals covering the attractor.
    Cylinders {
        #[arg(long)]
        k: Option<u32>,
        /// Refuse to emit more than this many intervals.
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Moran dimension and Hausdorff measure of the attractor.
    Dimension,
    /// Entropy singularity criterion verdict.
    Singular,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    nu: Option<f64>,
    /// Lattice level of the sampled functional Y_m.
    #[arg(long)]
    m: Option<u32>,
    /// Number of samples.
    #[arg(long)]
    n: Option<usize>,
    /// Truncation tolerance per sample.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long)]
    nu: Option<f64>,
    /// Lattice levels to couple, e.g. 3,4,5,6.
    #[arg(long, value_delimiter = ',')]
    m: Vec<u32>,
    /// Number of independent shared-seed hierarchies.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Time horizon of the path-distance table.
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    nu: Option<f64>,
    /// Lattice level of the simulated functionals (at least 6).
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    /// KS statistic tolerance.
    #[arg(long)]
    tol_ks: Option<f64>,
    /// Relative tolerance on the first positive and negative moments.
    #[arg(long)]
    tol_mean: Option<f64>,
    /// Cap on |z| for the order-1,2 moment z-scores.
    #[arg(long)]
    tol_z: Option<f64>,
}

/// Everything a dispatch needs after flags, config file, environment, and
/// defaults are merged.
struct RunConfig {
    format: Option<Format>,
    output: Option<PathBuf>,
    seed: u64,
    file: HashMap<String, String>,
}

impl RunConfig {
    /// CLI flag if present, else the config-file key, else None.
    fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::InvalidArgument(format!("config key {key}: cannot parse {raw:?}"))
            }),
        }
    }

    fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T> {
        self.get(flag, key)?
            .ok_or_else(|| Error::InvalidArgument(format!("missing required parameter --{key}")))
    }

    fn or_default<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    fn format_or(&self, natural: Format) -> Format {
        self.format.unwrap_or(natural)
    }

    fn emit(&self, content: String) -> Result<()> {
        write_output(self.output.as_deref(), &content)
    }
}

fn load_config(path: &PathBuf) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::InvalidArgument(format!(
                "config {} line {}: expected key=value",
                path.display(),
                lineno + 1
            )));
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let file = match &cli.config {
        Some(p) => load_config(p)?,
        None => HashMap::new(),
    };
    let mut cfg = RunConfig {
        format: cli.format,
        output: cli.output,
        seed: 0,
        file,
    };
    if cfg.format.is_none() {
        if let Some(f) = cfg.file.get("format") {
            cfg.format = Some(match f.as_str() {
                "csv" => Format::Csv,
                "json" => Format::Json,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "config format {other:?} is not csv or json"
                    )))
                }
            });
        }
    }
    if cfg.output.is_none() {
        cfg.output = cfg.file.get("output").map(PathBuf::from);
    }
    cfg.seed = match cfg.get(cli.seed, "seed")? {
        Some(s) => s,
        None => match std::env::var("EXPFUN_SEED") {
            Ok(v) => v.parse().map_err(|_| {
                Error::InvalidArgument(format!("EXPFUN_SEED={v:?} is not an unsigned integer"))
            })?,
            Err(_) => 0,
        },
    };
    let threads = cfg.get(cli.threads, "threads")?;
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::InvalidArgument("--threads must be positive".into()));
        }
        // Ignore the error from setting the pool twice (tests call run()
        // repeatedly in one process).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match cli.command {
        Command::Law(a) => cmd_law(&cfg, a),
        Command::Moments(a) => cmd_moments(&cfg, a),
        Command::Coeffs(a) => cmd_coeffs(&cfg, a),
        Command::Fractal(a) => cmd_fractal(&cfg, a),
        Command::Simulate(a) => cmd_simulate(&cfg, a),
        Command::Converge(a) => cmd_converge(&cfg, a),
        Command::Verify(a) => cmd_verify(&cfg, a),
    }
}

fn parse_atoms(text: &str) -> Result<StepLaw> {
    let mut pairs = Vec::new();
    for part in text.split(',') {
        let Some((g, p)) = part.split_once(':') else {
            return Err(Error::InvalidArgument(format!(
                "atom {part:?}: expected gamma:probability"
            )));
        };
        let g: f64 = g.trim().parse().map_err(|_| {
            Error::InvalidArgument(format!("atom multiplier {g:?} is not a number"))
        })?;
        let p: f64 = p.trim().parse().map_err(|_| {
            Error::InvalidArgument(format!("atom probability {p:?} is not a number"))
        })?;
        pairs.push((g, p));
    }
    StepLaw::new(&pairs)
}

fn resolve_law(cfg: &RunConfig, nu: Option<f64>, m: Option<u32>, atoms: Option<String>) -> Result<(StepLaw, Option<f64>, Option<u32>)> {
    let atoms = cfg.get(atoms, "atoms")?;
    if let Some(text) = atoms {
        return Ok((parse_atoms(&text)?, None, None));
    }
    let nu = cfg.require(nu, "nu")?;
    let m = cfg.get(m, "m")?;
    let law = match m {
        Some(level) => StepLaw::lattice(nu, level)?,
        None => StepLaw::basic(nu)?,
    };
    Ok((law, Some(nu), m))
}

#[derive(Serialize)]
struct LawReport {
    nu: Option<f64>,
    m: Option<u32>,
    atoms: Vec<Atom>,
    log_moment: f64,
    converges: bool,
    symmetric_binary: bool,
}

fn cmd_law(cfg: &RunConfig, a: LawArgs) -> Result<u8> {
    let (law, nu, m) = resolve_law(cfg, a.nu, a.m, a.atoms)?;
    let report = LawReport {
        nu,
        m,
        atoms: law.atoms().to_vec(),
        log_moment: law.log_moment(),
        converges: law.converges(),
        symmetric_binary: law.is_symmetric_binary(),
    };
    let content = match cfg.format_or(Format::Csv) {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut t = Csv::new(&["index", "gamma", "p", "log_moment", "converges"]);
            for (i, atom) in report.atoms.iter().enumerate() {
                t.row(&[
                    i.to_string(),
                    fmt_float(atom.gamma),
                    fmt_float(atom.p),
                    fmt_float(report.log_moment),
                    report.converges.to_string(),
                ]);
            }
            t.finish()
        }
    };
    cfg.emit(content)?;
    Ok(0)
}

#[derive(Serialize)]
struct MomentRow {
    p: usize,
    mu: f64,
    ey: Option<f64>,
    bound: Option<f64>,
    limit: Option<f64>,
    bm: Option<f64>,
}

#[derive(Serialize)]
struct MomentsReport {
    nu: f64,
    m: Option<u32>,
    p_max: usize,
    scale: f64,
    rows: Vec<MomentRow>,
}

fn cmd_moments(cfg: &RunConfig, a: MomentsArgs) -> Result<u8> {
    let nu = cfg.require(a.nu, "nu")?;
    let p_max = cfg.require(a.pmax, "pmax")?;
    if p_max < 1 || p_max > 64 {
        return Err(Error::InvalidArgument(format!(
            "--pmax {p_max} out of range 1..=64"
        )));
    }
    let m = cfg.get(a.m, "m")?;
    let table = match m {
        Some(level) => lattice_moments(nu, level, p_max)?,
        None => positive_moments(&StepLaw::basic(nu)?, p_max),
    };
    let mut rows = Vec::with_capacity(p_max);
    for p in 1..=p_max {
        let bound = moment_bound(&table.law, p as f64)
            .ok()
            .map(|b| b * table.scale.powi(p as i32));
        let limit = match m {
            Some(_) => lattice_moment_limit(nu, p as u32).ok(),
            None => None,
        };
        rows.push(MomentRow {
            p,
            mu: table.mu[p],
            ey: table.ey[p],
            bound,
            limit,
            bm: bm_moment(nu, p as u32, MomentSign::Positive).ok(),
        });
    }
    let report = MomentsReport {
        nu,
        m,
        p_max,
        scale: table.scale,
        rows,
    };
    let content = match cfg.format_or(Format::Csv) {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut t = Csv::new(&["p", "mu", "ey", "bound", "limit", "bm"]);
            for r in &report.rows {
                t.row(&[
                    r.p.to_string(),
                    fmt_float(r.mu),
                    opt_inf(r.ey),
                    opt_inf(r.bound),
                    match m {
                        Some(_) => opt_inf(r.limit),
                        None => String::new(),
                    },
                    r.bm.map(fmt_float).unwrap_or_default(),
                ]);
            }
            t.finish()
        }
    };
    cfg.emit(content)?;
    Ok(0)
}

fn opt_inf(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_else(|| "INF".into())
}

#[derive(Serialize)]
struct Verdict {
    checked: Vec<u32>,
    matches: bool,
    mismatches: Vec<String>,
}

#[derive(Serialize)]
struct CoeffsReport {
    p: u32,
    coefficients: Vec<u64>,
    row_sum: u64,
    row_sum_is_factorial: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    verify_descent: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verify_deletion: Option<Verdict>,
}

fn cmd_coeffs(cfg: &RunConfig, a: CoeffsArgs) -> Result<u8> {
    use expfun::descent::{check_deletion_recursion, coefficient_row, descent_counts};
    use num_traits::ToPrimitive;

    let p = cfg.require(a.p, "p")?;
    let row = coefficient_row(p)?;
    let coefficients: Vec<u64> = row
        .coefficients
        .iter()
        .map(|c| c.to_u64().expect("row coefficients fit u64 below the cap"))
        .collect();
    let row_sum: u64 = coefficients.iter().sum();
    let factorial: u64 = (1..=p as u64).product();
    let mut report = CoeffsReport {
        p,
        row_sum,
        row_sum_is_factorial: row_sum == factorial,
        coefficients,
        verify_descent: None,
        verify_deletion: None,
    };
    if a.verify_descent {
        let counts = descent_counts(p)?;
        let mut mismatches = Vec::new();
        for (mask, &c) in report.coefficients.iter().enumerate() {
            let expect = counts.get(&(mask as u64)).copied().unwrap_or(0);
            if expect != c {
                mismatches.push(format!("mask {mask}: row {c} vs enumeration {expect}"));
            }
        }
        report.verify_descent = Some(Verdict {
            checked: vec![p],
            matches: mismatches.is_empty(),
            mismatches,
        });
    }
    if a.verify_deletion {
        let mut checked = Vec::new();
        let mut mismatches = Vec::new();
        for q in 1..p {
            checked.push(q + 1);
            if let Err(e) = check_deletion_recursion(q) {
                mismatches.push(e.to_string());
            }
        }
        report.verify_deletion = Some(Verdict {
            checked,
            matches: mismatches.is_empty(),
            mismatches,
        });
    }
    let verifying = report.verify_descent.is_some() || report.verify_deletion.is_some();
    let natural = if verifying { Format::Json } else { Format::Csv };
    let content = match cfg.format_or(natural) {
        Format::Json => to_json(&report)?,
        Format::Csv => expfun::descent::row_to_csv(&row),
    };
    cfg.emit(content)?;
    Ok(0)
}

#[derive(Serialize)]
#[serde(tag = "action", rename_all = "lowercase")]
enum FractalReport {
    Cdf {
        nu: f64,
        depth: u32,
        probes: Vec<CdfProbe>,
    },
    Cylinders {
        nu: f64,
        k: u32,
        total_length: f64,
        expected_length: f64,
        intervals: Vec<CylinderRow>,
    },
    Dimension {
        nu: f64,
        s: f64,
        measure: f64,
        interval: [f64; 2],
    },
    Singular {
        nu: f64,
        singular_proven: bool,
        not_applicable: bool,
        reason: String,
    },
}

#[derive(Serialize)]
struct CdfProbe {
    y: f64,
    lower: f64,
    upper: f64,
}

#[derive(Serialize)]
struct CylinderRow {
    word: Vec<u8>,
    lo: f64,
    hi: f64,
}

fn cmd_fractal(cfg: &RunConfig, a: FractalArgs) -> Result<u8> {
    let nu = cfg.require(a.nu, "nu")?;
    let law = StepLaw::basic(nu)?;
    if let FractalAction::Singular = a.action {
        let v = is_singular(&law);
        let report = FractalReport::Singular {
            nu,
            singular_proven: v.singular_proven,
            not_applicable: v.not_applicable,
            reason: v.reason.clone(),
        };
        let content = match cfg.format_or(Format::Json) {
            Format::Json => to_json(&report)?,
            Format::Csv => {
                let mut t = Csv::new(&["nu", "singular_proven", "not_applicable", "reason"]);
                t.row(&[
                    fmt_float(nu),
                    v.singular_proven.to_string(),
                    v.not_applicable.to_string(),
                    v.reason.replace(',', ";"),
                ]);
                t.finish()
            }
        };
        cfg.emit(content)?;
        return Ok(0);
    }
    let ifs = build_ifs(&law).map_err(|e| match e {
        Error::NonContractive { index, gamma } => Error::InvalidArgument(format!(
            "atom {index} has multiplier {gamma} >= 1; the walk law contracts only for nu > 1"
        )),
        other => other,
    })?;
    let (report, csv) = match a.action {
        FractalAction::Singular => unreachable!("handled above"),
        FractalAction::Cdf { depth, probes } => {
            let depth = cfg.or_default(depth, "depth", 40)?;
            let probes = cfg.or_default(probes, "probes", 101)?;
            if depth > 2000 || probes < 2 || probes > 1_000_000 {
                return Err(Error::InvalidArgument(
                    "need 2 <= probes <= 1e6 and depth <= 2000".into(),
                ));
            }
            let (y1, y2) = ifs.interval();
            let mut rows = Vec::with_capacity(probes);
            for j in 0..probes {
                let y = y1 + (y2 - y1) * j as f64 / (probes - 1) as f64;
                let e = ifs.cdf(y, depth);
                rows.push(CdfProbe {
                    y,
                    lower: e.lower,
                    upper: e.upper,
                });
            }
            let mut t = Csv::new(&["y", "lower", "upper", "width"]);
            for r in &rows {
                t.row(&[
                    fmt_float(r.y),
                    fmt_float(r.lower),
                    fmt_float(r.upper),
                    fmt_float(r.upper - r.lower),
                ]);
            }
            (
                FractalReport::Cdf {
                    nu,
                    depth,
                    probes: rows,
                },
                t.finish(),
            )
        }
        FractalAction::Cylinders { k, cap } => {
            let k = cfg.or_default(k, "k", 4)?;
            let cap = cfg.or_default(cap, "cap", 1 << 20)?;
            let cylinders = ifs.covering_intervals(k, cap)?;
            let total: f64 = cylinders.iter().map(|c| c.hi - c.lo).sum();
            let expected = ifs.interval_length()
                * law.atoms().iter().map(|a| a.gamma).sum::<f64>().powi(k as i32);
            let rows: Vec<CylinderRow> = cylinders
                .into_iter()
                .map(|c| CylinderRow {
                    word: c.word,
                    lo: c.lo,
                    hi: c.hi,
                })
                .collect();
            let mut t = Csv::new(&["word", "lo", "hi", "length"]);
            for r in &rows {
                t.row(&[
                    word_string(&r.word),
                    fmt_float(r.lo),
                    fmt_float(r.hi),
                    fmt_float(r.hi - r.lo),
                ]);
            }
            (
                FractalReport::Cylinders {
                    nu,
                    k,
                    total_length: total,
                    expected_length: expected,
                    intervals: rows,
                },
                t.finish(),
            )
        }
        FractalAction::Dimension => {
            let s = expfun::ifs::hausdorff_dimension(&ifs)?;
            let measure = expfun::ifs::hausdorff_measure(&ifs)?;
            let (y1, y2) = ifs.interval();
            let mut t = Csv::new(&["nu", "s", "measure", "y1", "y2"]);
            t.row(&[
                fmt_float(nu),
                fmt_float(s),
                fmt_float(measure),
                fmt_float(y1),
                fmt_float(y2),
            ]);
            (
                FractalReport::Dimension {
                    nu,
                    s,
                    measure,
                    interval: [y1, y2],
                },
                t.finish(),
            )
        }
    };
    let natural = match a.action {
        FractalAction::Dimension => Format::Json,
        _ => Format::Csv,
    };
    let content = match cfg.format_or(natural) {
        Format::Json => to_json(&report)?,
        Format::Csv => csv,
    };
    cfg.emit(content)?;
    Ok(0)
}

fn word_string(word: &[u8]) -> String {
    word.iter()
        .map(|w| w.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

#[derive(Serialize)]
struct SimulateReport {
    nu: f64,
    m: u32,
    n: usize,
    seed: u64,
    eps: f64,
    mean: f64,
    stderr: f64,
    exact_mean: Option<f64>,
    values: Vec<f64>,
}

/// Stream offset for i.i.d. law-level sampling; hierarchy families use
/// offsets 0..=30, so per-sample draws live on a disjoint lane.
const SAMPLE_LANE: u64 = 31;

fn cmd_simulate(cfg: &RunConfig, a: SimulateArgs) -> Result<u8> {
    let nu = cfg.require(a.nu, "nu")?;
    let m = cfg.or_default(a.m, "m", 0)?;
    let n = cfg.require(a.n, "n")?;
    let eps = cfg.or_default(a.eps, "eps", 1e-9)?;
    if n == 0 {
        return Err(Error::InvalidArgument("--n must be positive".into()));
    }
    let law = StepLaw::lattice(nu, m)?;
    let scale = 4f64.powi(-(m as i32));
    let base = RngStream::new(cfg.seed, 0);
    let values: Result<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = base.substream(i * 32 + SAMPLE_LANE);
            Ok(sample_y(&law, eps, &mut rng)?.value * scale)
        })
        .collect();
    let values = values?;
    let (mean, stderr) = expfun::numeric::mean_stderr(&values);
    let exact_mean = lattice_moments(nu, m, 1)?.ey[1];
    let report = SimulateReport {
        nu,
        m,
        n,
        seed: cfg.seed,
        eps,
        mean,
        stderr,
        exact_mean,
        values,
    };
    let content = match cfg.format_or(Format::Csv) {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut t = Csv::new(&["value"]);
            for v in &report.values {
                t.row(&[fmt_float(*v)]);
            }
            t.finish()
        }
    };
    cfg.emit(content)?;
    Ok(0)
}

#[derive(Serialize)]
struct ConvergeRow {
    seed_index: u64,
    m: u32,
    y: f64,
}

#[derive(Serialize)]
struct SupRow {
    seed_index: u64,
    m_coarse: u32,
    m_fine: u32,
    sup: f64,
}

#[derive(Serialize)]
struct Trend {
    improved: u64,
    seeds: u64,
    fraction: f64,
}

#[derive(Serialize)]
struct ConvergeReport {
    nu: f64,
    m_list: Vec<u32>,
    seeds: u64,
    seed: u64,
    eps: f64,
    horizon: f64,
    rows: Vec<ConvergeRow>,
    sup_rows: Vec<SupRow>,
    trend: Trend,
}

fn cmd_converge(cfg: &RunConfig, a: ConvergeArgs) -> Result<u8> {
    let nu = cfg.require(a.nu, "nu")?;
    let m_list = if a.m.is_empty() {
        match cfg.file.get("m") {
            Some(raw) => raw
                .split(',')
                .map(|s| s.trim().parse::<u32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::InvalidArgument(format!("config m: cannot parse {raw:?}")))?,
            None => return Err(Error::InvalidArgument("missing required parameter --m".into())),
        }
    } else {
        a.m
    };
    if m_list.len() < 2 || m_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "--m needs at least two strictly increasing levels".into(),
        ));
    }
    let seeds = cfg.or_default(a.seeds, "seeds", 50)?;
    if seeds == 0 {
        return Err(Error::InvalidArgument("--seeds must be positive".into()));
    }
    let eps = cfg.or_default(a.eps, "eps", 1e-6)?;
    let horizon = cfg.or_default(a.horizon, "horizon", 1.0)?;
    let base = RngStream::new(cfg.seed, 0);
    let m_max = *m_list.last().unwrap();
    let per_seed: Result<Vec<(Vec<ConvergeRow>, Vec<SupRow>, bool)>> = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let mut h = TwistedHierarchy::new(m_max, nu, &base, s)?;
            let mut ys = Vec::with_capacity(m_list.len());
            for &m in &m_list {
                ys.push(discrete_functional(&mut h, m, eps)?.i_estimate);
            }
            let rows: Vec<ConvergeRow> = m_list
                .iter()
                .zip(&ys)
                .map(|(&m, &y)| ConvergeRow {
                    seed_index: s,
                    m,
                    y,
                })
                .collect();
            let mut sup_rows = Vec::with_capacity(m_list.len() - 1);
            for w in m_list.windows(2) {
                sup_rows.push(SupRow {
                    seed_index: s,
                    m_coarse: w[0],
                    m_fine: w[1],
                    sup: sup_distance(&h, w[0], w[1], horizon)?,
                });
            }
            let first_gap = (ys[1] - ys[0]).abs();
            let last_gap = (ys[ys.len() - 1] - ys[ys.len() - 2]).abs();
            Ok((rows, sup_rows, last_gap < first_gap))
        })
        .collect();
    let per_seed = per_seed?;
    let improved = per_seed.iter().filter(|(_, _, t)| *t).count() as u64;
    let rows: Vec<ConvergeRow> = per_seed.iter().flat_map(|(r, _, _)| r.iter())
        .map(|r| ConvergeRow { seed_index: r.seed_index, m: r.m, y: r.y })
        .collect();
    let sup_rows: Vec<SupRow> = per_seed
        .iter()
        .flat_map(|(_, s, _)| s.iter())
        .map(|r| SupRow {
            seed_index: r.seed_index,
            m_coarse: r.m_coarse,
            m_fine: r.m_fine,
            sup: r.sup,
        })
        .collect();
    let report = ConvergeReport {
        nu,
        m_list,
        seeds,
        seed: cfg.seed,
        eps,
        horizon,
        rows,
        sup_rows,
        trend: Trend {
            improved,
            seeds,
            fraction: improved as f64 / seeds as f64,
        },
    };
    let content = match cfg.format_or(Format::Csv) {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut t = Csv::new(&["seed_index", "m", "y", "sup_to_next"]);
            for r in &report.rows {
                let sup = report
                    .sup_rows
                    .iter()
                    .find(|s| s.seed_index == r.seed_index && s.m_coarse == r.m)
                    .map(|s| fmt_float(s.sup))
                    .unwrap_or_default();
                t.row(&[
                    r.seed_index.to_string(),
                    r.m.to_string(),
                    fmt_float(r.y),
                    sup,
                ]);
            }
            t.finish()
        }
    };
    cfg.emit(content)?;
    Ok(0)
}

#[derive(Serialize)]
struct Check {
    name: String,
    value: f64,
    limit: f64,
    pass: bool,
}

#[derive(Serialize)]
struct VerifyReport {
    nu: f64,
    m: u32,
    n: usize,
    seed: u64,
    eps: f64,
    ks: f64,
    ks_critical_1pct: f64,
    moment_zscores: Vec<MomentZScore>,
    mean: f64,
    mean_reference: f64,
    recip_mean: f64,
    recip_mean_reference: f64,
    tol_ks: f64,
    tol_mean: f64,
    tol_z: f64,
    checks: Vec<Check>,
    pass: bool,
}

fn cmd_verify(cfg: &RunConfig, a: VerifyArgs) -> Result<u8> {
    let nu = cfg.require(a.nu, "nu")?;
    let m = cfg.require(a.m, "m")?;
    let n = cfg.require(a.n, "n")?;
    let eps = cfg.or_default(a.eps, "eps", 1e-6)?;
    let tol_ks = cfg.or_default(a.tol_ks, "tol-ks", 0.03)?;
    let tol_mean = cfg.or_default(a.tol_mean, "tol-mean", 0.02)?;
    let tol_z = cfg.or_default(a.tol_z, "tol-z", 4.0)?;
    let base = RngStream::new(cfg.seed, 0);
    let samples = estimate_i(m, nu, n, eps, &base)?;
    let fit = gamma_compare(&samples.values, nu)?;
    let (mean, _) = expfun::numeric::mean_stderr(&samples.values);
    let recip: Vec<f64> = samples.values.iter().map(|v| 1.0 / v).collect();
    let (recip_mean, _) = expfun::numeric::mean_stderr(&recip);
    let mean_reference = bm_moment(nu, 1, MomentSign::Positive)?;
    let recip_mean_reference = nu;
    let mut checks = vec![
        Check {
            name: "ks".into(),
            value: fit.ks,
            limit: tol_ks,
            pass: fit.ks <= tol_ks,
        },
        Check {
            name: "mean_rel_err".into(),
            value: (mean / mean_reference - 1.0).abs(),
            limit: tol_mean,
            pass: (mean / mean_reference - 1.0).abs() <= tol_mean,
        },
        Check {
            name: "recip_mean_rel_err".into(),
            value: (recip_mean / recip_mean_reference - 1.0).abs(),
            limit: tol_mean,
            pass: (recip_mean / recip_mean_reference - 1.0).abs() <= tol_mean,
        },
    ];
    for zs in fit.moment_zscores.iter().filter(|z| z.p <= 2) {
        let tag = match zs.sign {
            MomentSign::Positive => "pos",
            MomentSign::Negative => "neg",
        };
        checks.push(Check {
            name: format!("z_{tag}_{}", zs.p),
            value: zs.z.abs(),
            limit: tol_z,
            pass: zs.z.abs() <= tol_z,
        });
    }
    let pass = checks.iter().all(|c| c.pass);
    let report = VerifyReport {
        nu,
        m,
        n,
        seed: cfg.seed,
        eps,
        ks: fit.ks,
        ks_critical_1pct: fit.ks_critical_1pct,
        moment_zscores: fit.moment_zscores,
        mean,
        mean_reference,
        recip_mean,
        recip_mean_reference,
        tol_ks,
        tol_mean,
        tol_z,
        checks,
        pass,
    };
    let content = match cfg.format_or(Format::Json) {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut t = Csv::new(&["check", "value", "limit", "pass"]);
            for c in &report.checks {
                t.row(&[
                    c.name.clone(),
                    fmt_float(c.value),
                    fmt_float(c.limit),
                    c.pass.to_string(),
                ]);
            }
            t.finish()
        }
    };
    cfg.emit(content)?;
    Ok(if report.pass { 0 } else { 3 })
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}
