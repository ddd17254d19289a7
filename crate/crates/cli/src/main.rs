use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qlc_core::cycles::{find_cycles, find_cycles_in, CycleConfig, LimitCycleRecord};
use qlc_core::flow::{IntegratorConfig, Section};
use qlc_core::isocline::{classify_conic, nullcline_conics, IsoclineClass};
use qlc_core::numfmt::{g17, to_json_line, to_json_pretty};
use qlc_core::portrait::{portrait, PortraitConfig};
use qlc_core::rotation::{delta, RotationParam};
use qlc_core::scenario::{run_two_cycle_scenario, summarize, sweep_points, GridSpec, Order, ScenarioConfig};
use qlc_core::separatrix::{find_loop_parameter_eps, SeparatrixTag, DEFAULT_EPSILON, DEFAULT_LOOP_TOL};
use qlc_core::singular::{check_gamma_window, check_trace_window, finite_singular_points, SingularKind};
use qlc_core::vectorfield::{CanonicalParamsII, Point, QuadraticCoefficients};
use qlc_core::QlcError;

/// Limit cycles of planar quadratic systems with two parallel line-isoclines.
#[derive(Parser)]
#[command(name = "qlc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Finite singular points of the canonical system, as JSON.
    #[command(allow_negative_numbers = true)]
    Singular {
        #[command(flatten)]
        system: SystemArgs,
    },
    /// The gamma window and the trace window, as JSON booleans.
    #[command(allow_negative_numbers = true)]
    CheckConditions {
        #[arg(long)]
        c: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
    },
    /// Classification of both isocline conics, as JSON.
    #[command(allow_negative_numbers = true)]
    Isoclines {
        #[command(flatten)]
        system: SystemArgs,
    },
    /// Rotation determinants on a grid, as CSV.
    #[command(allow_negative_numbers = true)]
    Rotation {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Orbits from a grid of seeds, as CSV and SVG.
    #[command(allow_negative_numbers = true)]
    Portrait {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        integrator: IntegratorArgs,
        /// Integration time in each direction.
        #[arg(long, default_value_t = 20.0)]
        duration: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Displacement samples (CSV) and limit cycles (JSON) around the origin.
    #[command(allow_negative_numbers = true)]
    Cycles {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        integrator: IntegratorArgs,
        #[arg(long, default_value_t = 256)]
        samples: usize,
        #[arg(long, default_value_t = 1e-3)]
        section_min: f64,
        #[arg(long, default_value_t = 0.95)]
        section_max: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parameter value of a separatrix loop by outcome bisection.
    #[command(name = "loop", allow_negative_numbers = true)]
    Loop {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        integrator: IntegratorArgs,
        #[arg(long)]
        param: RotationParam,
        #[arg(long)]
        lo: f64,
        #[arg(long)]
        hi: f64,
        #[arg(long, default_value_t = DEFAULT_LOOP_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
    },
    /// Staged construction of two limit cycles.
    #[command(allow_negative_numbers = true)]
    Scenario {
        #[arg(long)]
        c: f64,
        #[arg(long, default_value = "gamma-first")]
        order: Order,
        /// Scenario configuration as JSON; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cycle counts over a parameter grid, one JSON line per point.
    Sweep {
        /// Grid specification as JSON; the built-in grid when absent.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Cycle search configuration as JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SystemArgs {
    #[arg(long, default_value_t = 1)]
    nu: u8,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 2.0)]
    c: f64,
    /// Raw coefficients a00,a10,a01,a20,a11,a02,b00,b10,b01,b20,b11,b02
    /// instead of canonical parameters.
    #[arg(
        long,
        value_delimiter = ',',
        num_args = 1,
        conflicts_with_all = ["nu", "lambda", "beta", "gamma", "a", "c"]
    )]
    coeffs: Option<Vec<f64>>,
}

enum System {
    Canonical(CanonicalParamsII),
    Raw(QuadraticCoefficients),
}

impl SystemArgs {
    fn resolve(&self) -> Result<System, Failure> {
        match &self.coeffs {
            Some(c) => {
                let arr: [f64; 12] = c
                    .as_slice()
                    .try_into()
                    .map_err(|_| Failure::Usage(format!("--coeffs needs 12 values, got {}", c.len())))?;
                let q = QuadraticCoefficients::from_array(arr);
                q.validate()?;
                Ok(System::Raw(q))
            }
            None => Ok(System::Canonical(CanonicalParamsII::new(
                self.nu, self.lambda, self.beta, self.gamma, self.a, self.c,
            )?)),
        }
    }

    fn canonical(&self, what: &str) -> Result<CanonicalParamsII, Failure> {
        match self.resolve()? {
            System::Canonical(p) => Ok(p),
            System::Raw(_) => Err(Failure::Usage(format!("{what} needs canonical parameters, not --coeffs"))),
        }
    }
}

impl System {
    fn general(&self) -> QuadraticCoefficients {
        match self {
            System::Canonical(p) => p.to_general(),
            System::Raw(q) => *q,
        }
    }
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = -2.0)]
    x_min: f64,
    #[arg(long, default_value_t = 1.0)]
    x_max: f64,
    #[arg(long, default_value_t = -2.0)]
    y_min: f64,
    #[arg(long, default_value_t = 1.0)]
    y_max: f64,
    #[arg(long, default_value_t = 7)]
    nx: usize,
    #[arg(long, default_value_t = 7)]
    ny: usize,
}

#[derive(Args)]
struct IntegratorArgs {
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    max_step: Option<f64>,
    #[arg(long)]
    max_time: Option<f64>,
    /// Half-width of the integration box.
    #[arg(long)]
    domain: Option<f64>,
}

impl IntegratorArgs {
    fn apply(&self, base: IntegratorConfig) -> Result<IntegratorConfig, Failure> {
        let cfg = IntegratorConfig {
            rtol: self.rtol.unwrap_or(base.rtol),
            atol: self.atol.unwrap_or(base.atol),
            max_step: self.max_step.unwrap_or(base.max_step),
            max_time: self.max_time.unwrap_or(base.max_time),
            domain: self.domain.unwrap_or(base.domain),
            ..base
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

enum Failure {
    Usage(String),
    Domain(String),
}

impl From<QlcError> for Failure {
    fn from(e: QlcError) -> Self {
        match e {
            QlcError::InvalidConfig(m) => Failure::Usage(format!("invalid configuration: {m}")),
            e => Failure::Domain(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Domain(format!("{}: {e}", path.display()))
}

fn json_err(e: serde_json::Error) -> Failure {
    Failure::Domain(format!("JSON output: {e}"))
}

/// Write via a sibling temporary file and a rename, so readers never see a
/// partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Failure::Usage(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = res {
        let _ = fs::remove_file(&tmp);
        return Err(io_err(path, e));
    }
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::Domain(format!("stdout: {e}")))
        }
    }
}

fn pretty<T: Serialize + ?Sized>(v: &T) -> Result<String, Failure> {
    let mut s = to_json_pretty(v).map_err(json_err)?;
    s.push('\n');
    Ok(s)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn tag_name(t: SeparatrixTag) -> &'static str {
    match t {
        SeparatrixTag::SpiralsToFocusRegion => "SpiralsToFocusRegion",
        SeparatrixTag::EscapesDomain => "EscapesDomain",
        SeparatrixTag::ReturnsNearSaddle => "ReturnsNearSaddle",
    }
}

#[derive(Serialize)]
struct ConditionReport {
    c3_3: bool,
    c3_6: bool,
}

#[derive(Serialize)]
struct IsoclineReport {
    vertical: IsoclineClass,
    horizontal: IsoclineClass,
}

#[derive(Serialize)]
struct CyclesReport {
    origin: SingularKind,
    center_annulus: Option<(f64, f64)>,
    escape_boundaries: Vec<f64>,
    records: Vec<LimitCycleRecord>,
}

#[derive(Serialize)]
struct LoopReport {
    param: &'static str,
    value: f64,
    lo_outcome: &'static str,
    hi_outcome: &'static str,
}

fn grid_axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Singular { system } => {
            let p = system.canonical("singular")?;
            emit(None, &pretty(&finite_singular_points(&p)?)?)
        }
        Command::CheckConditions { c, gamma, beta, lambda } => {
            let report = ConditionReport {
                c3_3: check_gamma_window(c, gamma)?,
                c3_6: check_trace_window(c, gamma, beta, lambda)?,
            };
            let mut s = to_json_line(&report).map_err(json_err)?;
            s.push('\n');
            emit(None, &s)
        }
        Command::Isoclines { system } => {
            let (v, h) = nullcline_conics(&system.resolve()?.general());
            emit(
                None,
                &pretty(&IsoclineReport {
                    vertical: classify_conic(&v),
                    horizontal: classify_conic(&h),
                })?,
            )
        }
        Command::Rotation { system, grid, out } => {
            let p = system.canonical("rotation")?;
            if !(grid.x_max >= grid.x_min && grid.y_max >= grid.y_min) {
                return Err(Failure::Usage("grid needs min <= max".into()));
            }
            let mut csv = String::from("x,y,delta_lambda,delta_beta,delta_gamma\n");
            for y in grid_axis(grid.y_min, grid.y_max, grid.ny) {
                for x in grid_axis(grid.x_min, grid.x_max, grid.nx) {
                    let pt = Point::new(x, y);
                    csv.push_str(&format!(
                        "{},{},{},{},{}\n",
                        g17(x),
                        g17(y),
                        g17(delta(RotationParam::Lambda, &p, pt)),
                        g17(delta(RotationParam::Beta, &p, pt)),
                        g17(delta(RotationParam::Gamma, &p, pt))
                    ));
                }
            }
            emit(out.as_deref(), &csv)
        }
        Command::Portrait {
            system,
            grid,
            integrator,
            duration,
            csv,
            svg,
        } => {
            let sys = system.resolve()?;
            let base = PortraitConfig::default();
            let cfg = PortraitConfig {
                x_range: (grid.x_min, grid.x_max),
                y_range: (grid.y_min, grid.y_max),
                nx: grid.nx,
                ny: grid.ny,
                duration,
                integrator: integrator.apply(base.integrator)?,
                ..base
            };
            let marks: Vec<Point> = match &sys {
                System::Canonical(p) => finite_singular_points(p)?.into_iter().map(|s| s.location).collect(),
                System::Raw(_) => Vec::new(),
            };
            let pic = portrait(&sys.general(), &marks, &cfg)?;
            if let Some(path) = &svg {
                write_atomic(path, pic.to_svg().as_bytes())?;
            }
            match (&csv, &svg) {
                (Some(path), _) => write_atomic(path, pic.to_csv().as_bytes()),
                (None, Some(_)) => Ok(()),
                (None, None) => emit(None, &pic.to_csv()),
            }
        }
        Command::Cycles {
            system,
            integrator,
            samples,
            section_min,
            section_max,
            csv,
            out,
        } => {
            let cfg = CycleConfig {
                integrator: integrator.apply(IntegratorConfig::default())?,
                samples,
                ..CycleConfig::default()
            };
            let section = Section::positive_x_axis(section_min, section_max)?;
            let search = match system.resolve()? {
                System::Canonical(p) => find_cycles(&p, &section, &cfg)?,
                System::Raw(q) => find_cycles_in(&q, &[], &section, &cfg)?,
            };
            if let Some(path) = &csv {
                let mut text = String::from("x,Px,dx\n");
                for s in &search.samples.samples {
                    let opt = |v: Option<f64>| v.map(g17).unwrap_or_default();
                    text.push_str(&format!("{},{},{}\n", g17(s.x), opt(s.px), opt(s.d)));
                }
                write_atomic(path, text.as_bytes())?;
            }
            let report = CyclesReport {
                origin: search.origin,
                center_annulus: search.center_annulus,
                escape_boundaries: search.samples.escape_boundaries.clone(),
                records: search.records,
            };
            emit(out.as_deref(), &pretty(&report)?)
        }
        Command::Loop {
            system,
            integrator,
            param,
            lo,
            hi,
            tol,
            epsilon,
        } => {
            let p = system.canonical("loop")?;
            let cfg = integrator.apply(IntegratorConfig::default())?;
            let v = find_loop_parameter_eps(&p, param, (lo, hi), tol, epsilon, &cfg)?;
            let report = LoopReport {
                param: param.name(),
                value: v.value,
                lo_outcome: tag_name(v.lo_outcome),
                hi_outcome: tag_name(v.hi_outcome),
            };
            emit(None, &pretty(&report)?)
        }
        Command::Scenario { c, order, config, out } => {
            let cfg: ScenarioConfig = match &config {
                Some(path) => read_json(path)?,
                None => ScenarioConfig::default(),
            };
            let report = run_two_cycle_scenario(c, order, &cfg)?;
            emit(out.as_deref(), &pretty(&report)?)
        }
        Command::Sweep { grid, config, out } => {
            let grid: GridSpec = match &grid {
                Some(path) => read_json(path)?,
                None => GridSpec::default(),
            };
            let cfg: CycleConfig = match &config {
                Some(path) => read_json(path)?,
                None => CycleConfig::default(),
            };
            cfg.validate()?;
            let (points, rejected) = sweep_points(&grid, &cfg)?;
            let mut lines = String::new();
            for p in &points {
                lines.push_str(&to_json_line(p).map_err(json_err)?);
                lines.push('\n');
            }
            let summary = summarize(&points, rejected);
            for p in &summary.inconclusive {
                eprintln!(
                    "inconclusive point {}: {}",
                    p.index,
                    p.error.as_deref().unwrap_or("no count")
                );
            }
            match &out {
                Some(path) => {
                    write_atomic(path, lines.as_bytes())?;
                    emit(None, &pretty(&summary)?)
                }
                None => emit(None, &lines),
            }
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("QLC_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("QLC_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Domain(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match configure_threads().and_then(|_| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
