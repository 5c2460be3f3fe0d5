//! Command-line front end. Every command prints JSON (or CSV with a leading
//! manifest comment) to the given writer and returns the process exit code.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 solver or suite failure,
//! 3 distance bracketed but not attained.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bessel::{q_k, r_k, zero_ladder};
use crate::error::{Error, Result};
use crate::geodesics::{classify_gm, cut_locus_test, solve_geodesics, RecordSource};
use crate::group::{builtin_group, parse_group_json, GroupPoint, GroupSpec, StepTwoGroup};
use crate::heatkernel::{heat_kernel, p_k_h, varadhan_estimate, QuadConfig};
use crate::optimize::{distance, SolverConfig};
use crate::oracle::{direct_distance, shooting_distance};
use crate::verify::{run_suite, SuiteReport, SUITES};

type Group = StepTwoGroup<f64>;
type Point = GroupPoint<f64>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;
pub const EXIT_BRACKET: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ccdist",
    version,
    about = "Carnot-Caratheodory distances, geodesics and heat kernels on step-two Carnot groups"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Target {
    /// Builtin fixture name (e.g. `heisenberg`, `n32`) or path to a group JSON file.
    #[arg(long)]
    pub group: String,
    /// Point as "x1,...,xq;t1,...,tm".
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMethod {
    Direct,
    Shoot,
}

#[derive(Debug, Subcommand)]
pub enum BesselCommand {
    /// Zeros Z_{k,l} for k <= k_max and l <= count, as CSV.
    Zeros {
        #[arg(long, default_value_t = 3)]
        k_max: usize,
        #[arg(long, default_value_t = 5)]
        count: usize,
    },
    /// Q_k(w) and R_k(w).
    Eval {
        #[arg(long)]
        k: usize,
        #[arg(long, allow_hyphen_values = true)]
        w: f64,
    },
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Squared distance with certificate.
    Distance {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        max_k: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Accepted for compatibility; output is always JSON.
        #[arg(long)]
        json: bool,
    },
    /// Normal geodesics reaching the point, as CSV.
    Geodesics {
        #[command(flatten)]
        target: Target,
        /// Level of the reference function; defaults to the level attaining d².
        #[arg(long)]
        k: Option<usize>,
    },
    /// Cut-locus verdict.
    Cutlocus {
        #[command(flatten)]
        target: Target,
    },
    /// Sampling heuristic for the GM property.
    Classify {
        #[arg(long)]
        group: String,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Heat kernel p_h, or P_{k,h}(X, T) with `--k`.
    Heat {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        k: Option<usize>,
    },
    /// −4h ln p_h along a decreasing list of h, as CSV plus a JSON summary.
    Varadhan {
        #[command(flatten)]
        target: Target,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.03,0.01,0.003")]
        h_list: Vec<f64>,
    },
    /// Bessel zeros and kernels.
    Bessel {
        #[command(subcommand)]
        command: BesselCommand,
    },
    /// Brute-force distance by direct transcription or shooting.
    Oracle {
        #[command(flatten)]
        target: Target,
        #[arg(long, value_enum, default_value_t = OracleMethod::Direct)]
        method: OracleMethod,
        #[arg(long, default_value_t = 64)]
        segments: usize,
        #[arg(long, default_value_t = 4)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Runs a verification suite.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Distances over a grid of points, or Varadhan estimates over h, as CSV.
    Sweep {
        #[arg(long)]
        group: String,
        /// One `lo:hi:n` range or single value per coordinate, separated by ';'.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Point for an h sweep.
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
        #[arg(long, value_delimiter = ',')]
        h_list: Vec<f64>,
        #[arg(long)]
        max_k: Option<usize>,
    },
}

/// Loads a builtin fixture or a JSON group file.
pub fn load_group(spec: &str) -> Result<Group> {
    if Path::new(spec).is_file() {
        let text = std::fs::read_to_string(spec)?;
        return parse_group_json(&text);
    }
    builtin_group(spec)
}

/// Parses "x1,...,xq;t1,...,tm".
pub fn parse_point(text: &str) -> Result<Point> {
    let (x, t) = text
        .split_once(';')
        .ok_or_else(|| Error::Parse(format!("point `{text}` lacks ';' between x and t")))?;
    let nums = |s: &str| -> Result<Vec<f64>> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<f64>().map_err(|_| Error::Parse(format!("`{p}` is not a number"))))
            .collect()
    };
    Ok(GroupPoint::new(nums(x)?, nums(t)?))
}

fn parse_range(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Parse(format!("grid axis `{text}` is not `lo:hi:n` or a number"));
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [v] => Ok(vec![v.parse().map_err(|_| bad())?]),
        [lo, hi, n] => {
            let (lo, hi): (f64, f64) = (lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?);
            let n: usize = n.parse().map_err(|_| bad())?;
            Ok(match n {
                0 => vec![],
                1 => vec![lo],
                _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
            })
        }
        _ => Err(bad()),
    }
}

/// Cartesian product of the axes, first axis varying slowest.
pub fn parse_grid(text: &str) -> Result<Vec<Vec<f64>>> {
    let axes = text.split(';').map(parse_range).collect::<Result<Vec<_>>>()?;
    let mut points = vec![vec![]];
    for axis in &axes {
        points = points
            .iter()
            .flat_map(|p: &Vec<f64>| axis.iter().map(move |v| [p.clone(), vec![*v]].concat()))
            .collect();
    }
    Ok(points)
}

/// Provenance embedded in every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub group_digest: Option<String>,
    pub config: Value,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub wall_time_s: f64,
}

/// FNV-1a digest of the canonical group JSON.
pub fn group_digest(group: &Group) -> String {
    let text = serde_json::to_string(&GroupSpec::from_group(group)).expect("group spec serializes");
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

struct Session<'a> {
    command: &'static str,
    started: Instant,
    group: Option<String>,
    config: Value,
    seed: Option<u64>,
    out: &'a mut dyn Write,
}

impl Session<'_> {
    fn manifest(&self) -> RunManifest {
        RunManifest {
            command: self.command.into(),
            group_digest: self.group.clone(),
            config: self.config.clone(),
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION"),
            wall_time_s: self.started.elapsed().as_secs_f64(),
        }
    }

    fn json(&mut self, result: impl Serialize) -> Result<()> {
        let doc = json!({ "schema": 1, "manifest": self.manifest(), "result": result });
        writeln!(self.out, "{}", serde_json::to_string_pretty(&doc)?)?;
        Ok(())
    }

    fn csv_header(&mut self, header: &str) -> Result<()> {
        let manifest = serde_json::to_string(&json!({ "schema": 1, "manifest": self.manifest() }))?;
        writeln!(self.out, "# {manifest}")?;
        writeln!(self.out, "{header}")?;
        Ok(())
    }

    fn line(&mut self, text: &str) -> Result<()> {
        writeln!(self.out, "{text}")?;
        Ok(())
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Exit code for a library error: input problems are usage errors.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_)
        | Error::Json(_)
        | Error::Io(_)
        | Error::UnknownFixture(_)
        | Error::InvalidArgument(_)
        | Error::DimensionMismatch { .. }
        | Error::NotSkewSymmetric(_)
        | Error::LinearlyDependent
        | Error::NonPositiveScale(_)
        | Error::UnsupportedDimension(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("CCDIST_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|n| *n > 0) {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Diagnostics go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_USAGE;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    configure_threads();
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn session<'a>(started: Instant, command: &'static str, group: Option<&Group>, config: Value, seed: Option<u64>, out: &'a mut dyn Write) -> Session<'a> {
    Session {
        command,
        started,
        group: group.map(group_digest),
        config,
        seed,
        out,
    }
}

fn target(t: &Target) -> Result<(Group, Point)> {
    let group = load_group(&t.group)?;
    let point = parse_point(&t.point)?;
    group.check_point(&point)?;
    Ok((group, point))
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32> {
    let started = Instant::now();
    match command {
        Command::Distance {
            target: t,
            max_k,
            seed,
            json: _,
        } => {
            let (group, g) = target(&t)?;
            let config = SolverConfig {
                max_k: max_k.unwrap_or(SolverConfig::default().max_k),
                seed,
                ..SolverConfig::default()
            };
            let cert = distance(&group, &g, &config)?;
            session(started, "distance", Some(&group), serde_json::to_value(&config)?, Some(seed), out).json(&cert)?;
            Ok(if cert.attained { EXIT_OK } else { EXIT_BRACKET })
        }
        Command::Geodesics { target: t, k } => {
            let (group, g) = target(&t)?;
            let config = SolverConfig::default();
            let k = match k {
                Some(k) => k,
                None => distance(&group, &g, &config)?.k_used,
            };
            let records = solve_geodesics(&group, &g, k, &config)?;
            let mut s = session(started, "geodesics", Some(&group), json!({ "k": k, "solver": config }), Some(config.seed), out);
            s.csv_header("index,energy,endpoint_residual,source,zeta,tau")?;
            for (i, r) in records.iter().enumerate() {
                let source = match r.source {
                    RecordSource::CriticalPoint(j) => format!("critical:{j}"),
                    RecordSource::Shooting => "shooting".to_string(),
                };
                s.line(&format!(
                    "{i},{},{},{source},{},{}",
                    r.energy,
                    r.endpoint_residual,
                    join(&r.covector.zeta),
                    join(&r.covector.tau)
                ))?;
            }
            Ok(if records.is_empty() { EXIT_FAILURE } else { EXIT_OK })
        }
        Command::Cutlocus { target: t } => {
            let (group, g) = target(&t)?;
            let config = SolverConfig::default();
            let verdict = cut_locus_test(&group, &g, &config);
            session(started, "cutlocus", Some(&group), serde_json::to_value(&config)?, Some(config.seed), out).json(&verdict)?;
            Ok(EXIT_OK)
        }
        Command::Classify { group, samples, seed } => {
            let group = load_group(&group)?;
            let c = classify_gm(&group, samples, seed)?;
            session(started, "classify", Some(&group), json!({ "samples": samples }), Some(seed), out).json(&c)?;
            Ok(EXIT_OK)
        }
        Command::Heat { target: t, h, k } => {
            let (group, g) = target(&t)?;
            let quad = QuadConfig::default();
            let est = match k {
                Some(k) => p_k_h(&group, k, &g.x, &g.t, h, &quad)?,
                None => heat_kernel(&group, &g, h, &quad)?,
            };
            session(started, "heat", Some(&group), json!({ "k": k, "quadrature": quad }), None, out).json(&est)?;
            Ok(if est.converged { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Varadhan { target: t, h_list } => {
            let (group, g) = target(&t)?;
            let quad = QuadConfig::default();
            let report = varadhan_estimate(&group, &g, &h_list, &quad)?;
            let mut s = session(started, "varadhan", Some(&group), json!({ "quadrature": quad }), None, out);
            s.csv_header("h,estimate")?;
            for (h, e) in report.h.iter().zip(&report.estimates) {
                s.line(&format!("{h},{e}"))?;
            }
            let summary = json!({ "extrapolated": report.extrapolated, "monotone": report.monotone });
            s.line(&format!("# summary: {}", serde_json::to_string(&summary)?))?;
            Ok(EXIT_OK)
        }
        Command::Bessel { command } => match command {
            BesselCommand::Zeros { k_max, count } => {
                let ladder = zero_ladder(k_max, count)?;
                let mut s = session(started, "bessel zeros", None, json!({ "k_max": k_max, "count": count }), None, out);
                s.csv_header("k,l,zero")?;
                for (k, row) in ladder.iter().enumerate() {
                    for (l, z) in row.iter().enumerate() {
                        s.line(&format!("{k},{},{z}", l + 1))?;
                    }
                }
                Ok(EXIT_OK)
            }
            BesselCommand::Eval { k, w } => {
                let result = json!({ "k": k, "w": w, "q_k": q_k(k, w)?, "r_k": r_k(k, w)? });
                session(started, "bessel eval", None, Value::Null, None, out).json(result)?;
                Ok(EXIT_OK)
            }
        },
        Command::Oracle {
            target: t,
            method,
            segments,
            restarts,
            seed,
        } => {
            let (group, g) = target(&t)?;
            let config = json!({ "method": method, "segments": segments, "restarts": restarts });
            let result = match method {
                OracleMethod::Direct => {
                    let r = direct_distance(&group, &g, segments, restarts, seed)?;
                    json!({ "energy": r.energy, "residual": r.residual, "restarts": r.restarts, "controls": r.path.u })
                }
                OracleMethod::Shoot => serde_json::to_value(shooting_distance(&group, &g, restarts.max(1), seed)?)?,
            };
            session(started, "oracle", Some(&group), config, Some(seed), out).json(result)?;
            Ok(EXIT_OK)
        }
        Command::Verify { suite, seed } => {
            if !SUITES.contains(&suite.as_str()) {
                return Err(Error::InvalidArgument(format!("unknown suite `{suite}`; available: {}", SUITES.join(", "))));
            }
            let report = run_suite(&suite, seed)?;
            write_suite(out, &report)?;
            Ok(if report.passed() { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Sweep {
            group,
            grid,
            point,
            h_list,
            max_k,
        } => {
            let group = load_group(&group)?;
            match (grid, point) {
                (Some(grid), None) => sweep_grid(started, &group, &grid, max_k, out),
                (None, Some(point)) => sweep_h(started, &group, &parse_point(&point)?, &h_list, out),
                _ => Err(Error::InvalidArgument("sweep needs exactly one of --grid or --point".into())),
            }
        }
    }
}

/// Pass/fail table of a suite.
pub fn write_suite(out: &mut dyn Write, report: &SuiteReport) -> Result<()> {
    writeln!(out, "suite {}", report.suite)?;
    for c in &report.criteria {
        writeln!(
            out,
            "criterion {:>2}  {}  {} ({:.1} s)",
            c.id,
            if c.passed() { "PASS" } else { "FAIL" },
            c.title,
            c.seconds
        )?;
        for check in &c.checks {
            let note = if check.note.is_empty() {
                String::new()
            } else {
                format!("  [{}]", check.note)
            };
            writeln!(
                out,
                "    {}  {}: measured {:.3e}, tolerance {:.1e}, samples {}{note}",
                if check.passed { "ok  " } else { "FAIL" },
                check.name,
                check.measured,
                check.tolerance,
                check.samples
            )?;
        }
    }
    Ok(())
}

fn sweep_grid(started: Instant, group: &Group, grid: &str, max_k: Option<usize>, out: &mut dyn Write) -> Result<i32> {
    let points = parse_grid(grid)?;
    let (q, m) = (group.q(), group.m());
    if let Some(p) = points.first() {
        if p.len() != q + m {
            return Err(Error::DimensionMismatch {
                what: "grid axes",
                expected: q + m,
                found: p.len(),
            });
        }
    }
    let config = SolverConfig {
        max_k: max_k.unwrap_or(SolverConfig::default().max_k),
        ..SolverConfig::default()
    };
    let mut s = session(started, "sweep", Some(group), serde_json::to_value(&config)?, Some(config.seed), out);
    let names: Vec<String> = (1..=q).map(|i| format!("x{i}")).chain((1..=m).map(|j| format!("t{j}"))).collect();
    s.csv_header(&format!("{},d2,k_used,lower,upper,error", names.join(",")))?;
    for p in points {
        let g = GroupPoint::new(p[..q].to_vec(), p[q..].to_vec());
        let coords = p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        let row = match distance(group, &g, &config) {
            Ok(c) => format!("{coords},{},{},{},{},", c.d2, c.k_used, c.lower, c.upper),
            Err(e) => format!("{coords},,,,,{}", e.to_string().replace(',', ";")),
        };
        s.line(&row)?;
    }
    Ok(EXIT_OK)
}

fn sweep_h(started: Instant, group: &Group, g: &Point, h_list: &[f64], out: &mut dyn Write) -> Result<i32> {
    group.check_point(g)?;
    let quad = QuadConfig::default();
    let mut s = session(started, "sweep", Some(group), json!({ "quadrature": quad }), None, out);
    s.csv_header("h,estimate,error")?;
    for &h in h_list {
        let row = match heat_kernel(group, g, h, &quad) {
            Ok(p) if p.converged => format!("{h},{},", -4.0 * h * p.ln_value),
            Ok(p) => format!("{h},{},unconverged", -4.0 * h * p.ln_value),
            Err(e) => format!("{h},,{}", e.to_string().replace(',', ";")),
        };
        s.line(&row)?;
    }
    Ok(EXIT_OK)
}
