//! rayforge command line: trace periodic dynamic rays, verify their
//! landing points, render escape-time rasters with overlays, and iterate
//! the leg map.
//!
//! Exit codes: 0 success, 2 trace did not converge, 3 usage error,
//! 4 no periodic point matched, 5 ambiguous inverse-branch continuation.

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rayforge::legs::{self, LegError};
use rayforge::map::MapSpec;
use rayforge::parallel;
use rayforge::periodic::{find_periodic_points, PeriodicPointRecord};
use rayforge::rays::{self, Curve, CurveKind, LandingReport, RayError};
use rayforge::render::{render, Overlay, RenderConfig};
use rayforge::symbolic::{build_partition, ExternalAddress};
use rayforge::Rect;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_USAGE: u8 = 3;
const EXIT_NO_MATCH: u8 = 4;
const EXIT_AMBIGUOUS: u8 = 5;

#[derive(Parser)]
#[command(name = "rayforge", version, about = "Dynamic rays of transcendental entire maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace the periodic (or preperiodic) ray of an external address and
    /// emit it as CSV (t,re,im).
    Trace(TraceArgs),
    /// Trace a ray, extrapolate its landing point, and verify it against
    /// periodic points found by Newton search. Emits a JSON report.
    VerifyLanding(VerifyArgs),
    /// Escape-time raster as binary PGM (P5), or PPM (P6) with overlays.
    Render(RenderArgs),
    /// Iterate the leg map from a fixed point and report the tail-symbol
    /// and head-gap sequence as JSON.
    Pullback(PullbackArgs),
}

#[derive(Args, Clone)]
struct MapArgs {
    /// Map family: exp | cosine | scaled-bf
    #[arg(long)]
    family: Option<String>,
    /// λ for the exp family, as "re,im"
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// a for the cosine family, as "re,im"
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    /// b for the cosine family, as "re,im"
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    /// α ≥ 1 for the scaled example family
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    map: MapArgs,
    /// External address, e.g. "[| 0]" or "[2 | 0 1]"
    #[arg(long)]
    address: Option<String>,
    /// Partition radius R (default 10)
    #[arg(long)]
    radius: Option<String>,
    /// Pullback depth (default 64)
    #[arg(long)]
    depth: Option<String>,
    /// Interleaved pullback chains per dyadic level (default 4)
    #[arg(long = "samples-per-level")]
    samples_per_level: Option<String>,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config whose keys mirror the long flags
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    map: MapArgs,
    #[arg(long)]
    address: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    /// Newton search box "reMin,reMax,imMin,imMax" for periodic points
    #[arg(long = "period-search-box", allow_hyphen_values = true)]
    period_search_box: Option<String>,
    /// Seeds per box side (default 40)
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    map: MapArgs,
    /// Viewport "reMin,reMax,imMin,imMax"
    #[arg(long, allow_hyphen_values = true)]
    viewport: Option<String>,
    #[arg(long)]
    width: Option<String>,
    #[arg(long)]
    height: Option<String>,
    #[arg(long = "max-iter")]
    max_iter: Option<String>,
    #[arg(long = "escape-radius")]
    escape_radius: Option<String>,
    /// Ray CSV overlay (repeatable, drawn red)
    #[arg(long = "overlay-ray")]
    overlay_ray: Vec<PathBuf>,
    /// Periodic-point JSON overlay (repeatable, drawn green)
    #[arg(long = "overlay-points")]
    overlay_points: Vec<PathBuf>,
    /// Output path (required: the payload is binary)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PullbackArgs {
    #[command(flatten)]
    map: MapArgs,
    /// The repelling fixed point "re,im" anchoring the legs
    #[arg(long, allow_hyphen_values = true)]
    z0: Option<String>,
    /// Initial leg as a ray CSV
    #[arg(long)]
    leg: Option<PathBuf>,
    /// Or: straight initial leg in direction "re,im"
    #[arg(long, allow_hyphen_values = true)]
    straight: Option<String>,
    /// Leg-map iterations (default 30)
    #[arg(long)]
    iterations: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

struct Usage(String);

impl<T: std::fmt::Display> From<T> for Usage {
    fn from(e: T) -> Self {
        Usage(e.to_string())
    }
}

/// Values from a JSON config file whose keys mirror the long flag names.
/// Explicit command-line flags win.
struct ConfigMap(serde_json::Map<String, serde_json::Value>);

impl ConfigMap {
    fn load(path: Option<&Path>) -> Result<Self, Usage> {
        let map = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Usage(format!("cannot read config {}: {e}", p.display())))?;
                match serde_json::from_str(&text)
                    .map_err(|e| Usage(format!("bad config JSON: {e}")))?
                {
                    serde_json::Value::Object(m) => m,
                    _ => return Err(Usage("config must be a JSON object".into())),
                }
            }
            None => serde_json::Map::new(),
        };
        Ok(ConfigMap(map))
    }

    fn resolve(&self, flag: Option<String>, key: &str) -> Option<String> {
        flag.or_else(|| {
            self.0.get(key).map(|v| match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            })
        })
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64, Usage> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Usage(format!("bad {what} {s:?}: {e}")))
}

fn parse_usize(s: &str, what: &str) -> Result<usize, Usage> {
    s.trim()
        .parse::<usize>()
        .map_err(|e| Usage(format!("bad {what} {s:?}: {e}")))
}

/// "re,im" with full 17-digit precision.
fn parse_complex(s: &str, what: &str) -> Result<Complex64, Usage> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(Usage(format!("{what} must be \"re,im\", got {s:?}")));
    }
    Ok(Complex64::new(
        parse_f64(parts[0], what)?,
        parse_f64(parts[1], what)?,
    ))
}

fn parse_rect(s: &str, what: &str) -> Result<Rect, Usage> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err(Usage(format!(
            "{what} must be \"reMin,reMax,imMin,imMax\", got {s:?}"
        )));
    }
    let rect = Rect::new(
        parse_f64(parts[0], what)?,
        parse_f64(parts[1], what)?,
        parse_f64(parts[2], what)?,
        parse_f64(parts[3], what)?,
    );
    if rect.is_degenerate() {
        return Err(Usage(format!("{what} is degenerate")));
    }
    Ok(rect)
}

fn build_map(args: &MapArgs, cfg: &ConfigMap) -> Result<MapSpec, Usage> {
    let family = cfg
        .resolve(args.family.clone(), "family")
        .ok_or(Usage("--family is required".into()))?;
    let spec = match family.as_str() {
        "exp" => {
            let l = cfg
                .resolve(args.lambda.clone(), "lambda")
                .ok_or(Usage("--lambda is required for exp".into()))?;
            MapSpec::exp(parse_complex(&l, "lambda")?)?
        }
        "cosine" => {
            let a = cfg
                .resolve(args.a.clone(), "a")
                .ok_or(Usage("--a is required for cosine".into()))?;
            let b = cfg
                .resolve(args.b.clone(), "b")
                .ok_or(Usage("--b is required for cosine".into()))?;
            MapSpec::cosine(parse_complex(&a, "a")?, parse_complex(&b, "b")?)?
        }
        "scaled-bf" => {
            let alpha = cfg
                .resolve(args.alpha.clone(), "alpha")
                .ok_or(Usage("--alpha is required for scaled-bf".into()))?;
            MapSpec::scaled_bf(parse_f64(&alpha, "alpha")?)?
        }
        other => return Err(Usage(format!("unknown family {other:?}"))),
    };
    Ok(spec)
}

/// Write to the path or stdout. Called only after the computation has
/// fully succeeded, so usage errors never leave partial files.
fn emit(out: Option<&Path>, content: &[u8]) -> Result<(), Usage> {
    match out {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(content)
                .map_err(|e| Usage(format!("stdout: {e}")))
        }
    }
}

fn cmd_trace(args: TraceArgs) -> Result<u8, Usage> {
    let cfg = ConfigMap::load(args.config.as_deref())?;
    let map = build_map(&args.map, &cfg)?;
    let address = ExternalAddress::parse(
        &cfg.resolve(args.address.clone(), "address")
            .ok_or(Usage("--address is required".into()))?,
    )?;
    let radius = parse_f64(
        &cfg.resolve(args.radius.clone(), "radius").unwrap_or("10".into()),
        "radius",
    )?;
    let depth = parse_usize(
        &cfg.resolve(args.depth.clone(), "depth").unwrap_or("64".into()),
        "depth",
    )?;
    let spl = parse_usize(
        &cfg.resolve(args.samples_per_level.clone(), "samples-per-level")
            .unwrap_or("4".into()),
        "samples-per-level",
    )?;
    if !(10..=900).contains(&depth) || !(1..=128).contains(&spl) {
        return Err(Usage(
            "depth must be in 10..=900 and samples-per-level in 1..=128".into(),
        ));
    }
    let partition = build_partition(&map, radius)?;

    let traced = parallel::with_thread_cap(parallel::env_thread_cap(), || {
        rays::trace_preperiodic_ray(&partition, &address, depth, spl)
    });
    match traced {
        Ok(curve) => {
            emit(args.out.as_deref(), rays::write_ray_csv(&curve).as_bytes())?;
            Ok(EXIT_OK)
        }
        Err(
            e @ (RayError::DepthOutOfRange(_)
            | RayError::SamplesPerLevelOutOfRange(_)
            | RayError::NotPeriodic(_)),
        ) => Err(Usage(e.to_string())),
        Err(e) => {
            eprintln!("trace did not converge: {e}");
            Ok(EXIT_NOT_CONVERGED)
        }
    }
}

fn cmd_verify_landing(args: VerifyArgs) -> Result<u8, Usage> {
    let cfg = ConfigMap::load(args.config.as_deref())?;
    let map = build_map(&args.map, &cfg)?;
    let address = ExternalAddress::parse(
        &cfg.resolve(args.address.clone(), "address")
            .ok_or(Usage("--address is required".into()))?,
    )?;
    if !address.is_periodic() {
        return Err(Usage("verify-landing needs a periodic address".into()));
    }
    let radius = parse_f64(
        &cfg.resolve(args.radius.clone(), "radius").unwrap_or("10".into()),
        "radius",
    )?;
    let search_box = parse_rect(
        &cfg.resolve(args.period_search_box.clone(), "period-search-box")
            .ok_or(Usage("--period-search-box is required".into()))?,
        "period-search-box",
    )?;
    let grid = parse_usize(
        &cfg.resolve(args.grid.clone(), "grid").unwrap_or("40".into()),
        "grid",
    )?;
    let partition = build_partition(&map, radius)?;
    let period = address.period().len();

    let report = parallel::with_thread_cap(parallel::env_thread_cap(), || {
        let points = find_periodic_points(&map, period, search_box, grid);
        rays::verify_landing(&partition, &address, &points)
    });
    match report {
        Ok(report) => {
            let mut json = report.to_json();
            json.push('\n');
            emit(args.out.as_deref(), json.as_bytes())?;
            Ok(if report.converged { EXIT_OK } else { EXIT_NO_MATCH })
        }
        Err(e) => {
            eprintln!("trace did not converge: {e}");
            Ok(EXIT_NOT_CONVERGED)
        }
    }
}

fn load_overlay_points(path: &Path) -> Result<Vec<PeriodicPointRecord>, Usage> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Usage(format!("cannot read {}: {e}", path.display())))?;
    // either a verify-landing report (take its matched point) or a bare
    // JSON array of periodic point records
    if let Ok(report) = LandingReport::from_json(&text) {
        return Ok(report.matched.into_iter().collect());
    }
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Usage(format!("bad points JSON: {e}")))?;
    let arr = value
        .as_array()
        .ok_or(Usage("points JSON must be an array or a landing report".into()))?;
    let mut out = Vec::with_capacity(arr.len());
    for item in arr {
        let gx = |k: &str, f: &str| -> Result<f64, Usage> {
            item.get(k)
                .and_then(|v| v.get(f))
                .and_then(|v| v.as_f64())
                .ok_or(Usage(format!("points JSON entry missing {k}.{f}")))
        };
        let period = item.get("period").and_then(|v| v.as_u64()).unwrap_or(1) as usize;
        let class = item
            .get("class")
            .and_then(|v| serde_json::from_value(v.clone()).ok())
            .unwrap_or(rayforge::PointClass::Repelling);
        let residual = item.get("residual").and_then(|v| v.as_f64()).unwrap_or(0.0);
        out.push(PeriodicPointRecord {
            point: Complex64::new(gx("point", "re")?, gx("point", "im")?),
            period,
            multiplier: Complex64::new(
                gx("multiplier", "re").unwrap_or(0.0),
                gx("multiplier", "im").unwrap_or(0.0),
            ),
            class,
            residual,
        });
    }
    Ok(out)
}

fn cmd_render(args: RenderArgs) -> Result<u8, Usage> {
    let cfg = ConfigMap::load(args.config.as_deref())?;
    let map = build_map(&args.map, &cfg)?;
    let viewport = parse_rect(
        &cfg.resolve(args.viewport.clone(), "viewport")
            .ok_or(Usage("--viewport is required".into()))?,
        "viewport",
    )?;
    let width = parse_usize(
        &cfg.resolve(args.width.clone(), "width")
            .ok_or(Usage("--width is required".into()))?,
        "width",
    )?;
    let height = parse_usize(
        &cfg.resolve(args.height.clone(), "height")
            .ok_or(Usage("--height is required".into()))?,
        "height",
    )?;
    let max_iter = parse_usize(
        &cfg.resolve(args.max_iter.clone(), "max-iter").unwrap_or("50".into()),
        "max-iter",
    )?;
    let escape_radius = parse_f64(
        &cfg.resolve(args.escape_radius.clone(), "escape-radius")
            .unwrap_or("50".into()),
        "escape-radius",
    )?;
    let out = args
        .out
        .clone()
        .ok_or(Usage("--out is required (binary output)".into()))?;

    let mut overlays = Vec::new();
    for p in &args.overlay_ray {
        let text = std::fs::read_to_string(p)
            .map_err(|e| Usage(format!("cannot read {}: {e}", p.display())))?;
        let curve = rays::parse_ray_csv(&text)?;
        overlays.push(Overlay::Ray(curve.points()));
    }
    for p in &args.overlay_points {
        overlays.push(Overlay::Points(load_overlay_points(p)?));
    }

    let config = RenderConfig { viewport, width, height, max_iter, escape_radius, overlays };
    config.validate()?;
    let bytes = parallel::with_thread_cap(parallel::env_thread_cap(), || render(&map, &config))?;
    emit(Some(&out), &bytes)?;
    Ok(EXIT_OK)
}

#[derive(serde::Serialize, serde::Deserialize)]
struct PullbackStepJson {
    #[serde(rename = "tailSymbol")]
    tail_symbol: Option<i64>,
    #[serde(rename = "headGap")]
    head_gap: f64,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct PullbackJson {
    steps: Vec<PullbackStepJson>,
    #[serde(rename = "tailPeriodic")]
    tail_periodic: bool,
}

fn cmd_pullback(args: PullbackArgs) -> Result<u8, Usage> {
    let cfg = ConfigMap::load(args.config.as_deref())?;
    let map = build_map(&args.map, &cfg)?;
    let z0 = parse_complex(
        &cfg.resolve(args.z0.clone(), "z0")
            .ok_or(Usage("--z0 is required".into()))?,
        "z0",
    )?;
    let radius = parse_f64(
        &cfg.resolve(args.radius.clone(), "radius").unwrap_or("10".into()),
        "radius",
    )?;
    let iterations = parse_usize(
        &cfg.resolve(args.iterations.clone(), "iterations").unwrap_or("30".into()),
        "iterations",
    )?;
    let partition = build_partition(&map, radius)?;

    let leg = match (&args.leg, cfg.resolve(args.straight.clone(), "straight")) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Usage(format!("cannot read {}: {e}", path.display())))?;
            let parsed = rays::parse_ray_csv(&text)?;
            if (parsed.first().1 - z0).norm() > 1e-9 {
                return Err(Usage("leg CSV must start at z0".into()));
            }
            Curve::new(CurveKind::Leg, parsed.samples, Some(z0), None)
                .map_err(|e| Usage(format!("leg CSV: {e}")))?
        }
        (None, Some(dir)) => {
            let d = parse_complex(&dir, "straight")?;
            if d.norm() == 0.0 {
                return Err(Usage("direction must be nonzero".into()));
            }
            legs::straight_leg(z0, d, 1e-4, 1.05)
        }
        (None, None) => return Err(Usage("one of --leg or --straight is required".into())),
    };

    let steps = parallel::with_thread_cap(parallel::env_thread_cap(), || {
        legs::pullback_sequence(&partition, z0, &leg, iterations)
    });
    match steps {
        Ok(steps) => {
            let symbols: Vec<Option<i64>> = steps.iter().map(|s| s.tail_symbol).collect();
            let tail_periodic = legs::tail_symbols_eventually_periodic(&symbols);
            let dto = PullbackJson {
                steps: steps
                    .iter()
                    .map(|s| PullbackStepJson {
                        tail_symbol: s.tail_symbol,
                        head_gap: s.head_gap,
                    })
                    .collect(),
                tail_periodic,
            };
            let mut json = serde_json::to_string_pretty(&dto).expect("serializable");
            json.push('\n');
            emit(args.out.as_deref(), json.as_bytes())?;
            Ok(if tail_periodic { EXIT_OK } else { EXIT_NOT_CONVERGED })
        }
        Err(LegError::ContinuationAmbiguous) => {
            eprintln!("{}", LegError::ContinuationAmbiguous);
            Ok(EXIT_AMBIGUOUS)
        }
        Err(e) => Err(Usage(e.to_string())),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Trace(args) => cmd_trace(args),
        Command::VerifyLanding(args) => cmd_verify_landing(args),
        Command::Render(args) => cmd_render(args),
        Command::Pullback(args) => cmd_pullback(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
