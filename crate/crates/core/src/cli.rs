//! `gestalt` command line: `sweep`, `baseline` and `report`.
//!
//! Exit codes: 0 success, 1 output write failure, 2 configuration or data
//! error, 3 classifier failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::dataset::{load_idx, load_manifest, save_perturbed};
use crate::engine::{
    evaluate, fit_centroid, perturb_set, run_sweep, Classifier, Item, ValidationSet, DEFAULT_TAU,
};
use crate::error::Error;
use crate::perturb::{AffineParams, GestaltParam, Half, PerturbOptions, Principle};
use crate::protocol::{ProtocolOptions, RemotePool};
use crate::report::{merge_reports, read_report, render_report, DEFAULT_MM_PER_PX};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CLASSIFIER: i32 = 3;

/// Largest number of values a range grid may expand to.
const MAX_GRID: usize = 100_000;

#[derive(Debug, Parser)]
#[command(name = "gestalt", version, about = "Probe image classifiers with Gestalt-principle perturbation sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure accuracy over a grid of perturbation strengths and write a report.
    Sweep(SweepArgs),
    /// Print the accuracy on the unperturbed set.
    Baseline(BaselineArgs),
    /// Merge sweep reports into plot-ready series and a g* summary.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// IDX image and label files (gzip allowed).
    #[arg(long, num_args = 2, value_names = ["IMAGES", "LABELS"], conflicts_with = "manifest", required_unless_present = "manifest")]
    pub idx: Option<Vec<PathBuf>>,
    /// Dataset manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Use only the first N items.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ClassifierArgs {
    /// `builtin` (nearest centroid) or `external` (command after `--`).
    #[arg(long, default_value = "builtin")]
    pub classifier: String,
    /// Training data for the builtin classifier; defaults to the items
    /// left over after `--limit`.
    #[arg(long, num_args = 2, value_names = ["IMAGES", "LABELS"], conflicts_with = "train_manifest")]
    pub train_idx: Option<Vec<PathBuf>>,
    #[arg(long)]
    pub train_manifest: Option<PathBuf>,
    #[arg(long)]
    pub train_limit: Option<usize>,
    /// Softmax temperature of the builtin classifier.
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// External classifier processes to run in parallel.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value_t = 10.0)]
    pub handshake_timeout: f64,
    #[arg(long, default_value_t = 60.0)]
    pub inference_timeout: f64,
    /// External classifier command line.
    #[arg(last = true)]
    pub command: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// closure, proximity, continuation, similarity, figure-ground or symmetry.
    #[arg(long)]
    pub principle: Principle,
    /// `start:stop:step` (inclusive) or a comma list. Continuation takes
    /// six-vectors separated by `|` (entries by `,` or `;`), or a scalar
    /// grid combined with `--affine-basis`.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,
    /// Continuation direction scaled by each scalar grid value.
    #[arg(long, allow_hyphen_values = true)]
    pub affine_basis: Option<String>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ClassifierArgs,
    /// Seed for the closure patch placement.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Φ threshold for the knee detector.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    /// Pixel pitch for the proximity axis.
    #[arg(long, default_value_t = DEFAULT_MM_PER_PX)]
    pub mm_per_px: f64,
    /// Image half warped by continuation.
    #[arg(long, default_value = "right")]
    pub half: Half,
    /// Foreground threshold.
    #[arg(long, default_value_t = 128)]
    pub threshold: u8,
    /// Foreground threshold used to measure closure occlusion.
    #[arg(long, default_value_t = 1)]
    pub ink_threshold: u8,
    /// Write each perturbed set under this directory.
    #[arg(long)]
    pub save_dir: Option<PathBuf>,
    /// Report file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ClassifierArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Override the pixel pitch recorded in the reports.
    #[arg(long)]
    pub mm_per_px: Option<f64>,
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Classifier { .. } | Error::Protocol(_) => EXIT_CLASSIFIER,
            _ => EXIT_CONFIG,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn round9(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

/// Expand a scalar grid spec.
pub fn parse_scalar_grid(spec: &str) -> Result<Vec<f64>, String> {
    let spec = spec.trim();
    if spec.contains(':') {
        let parts: Vec<f64> = spec
            .split(':')
            .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad number `{t}` in grid `{spec}`")))
            .collect::<Result<_, _>>()?;
        let [start, stop, step] = parts[..] else {
            return Err(format!("range grid `{spec}` must be start:stop:step"));
        };
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
            return Err(format!("grid `{spec}` has non-finite values"));
        }
        if step <= 0.0 {
            return Err(format!("grid step must be positive, got {step}"));
        }
        if stop < start {
            return Err(format!("grid stop {stop} is below start {start}"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if n > MAX_GRID {
            return Err(format!("grid `{spec}` expands to {n} values"));
        }
        Ok((0..n).map(|k| round9(start + k as f64 * step)).collect())
    } else {
        let vals: Vec<f64> = spec
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad number `{t}` in grid `{spec}`")))
            .collect::<Result<_, _>>()?;
        if vals.is_empty() {
            return Err("empty grid".into());
        }
        Ok(vals)
    }
}

/// Grid values for `principle`, validated.
pub fn parse_grid(principle: Principle, spec: &str, basis: Option<&str>) -> Result<Vec<GestaltParam>, String> {
    let grid: Vec<GestaltParam> = match (principle, basis) {
        (Principle::Continuation, Some(b)) => {
            let b: AffineParams = b.parse().map_err(|e: Error| e.to_string())?;
            parse_scalar_grid(spec)?
                .into_iter()
                .map(|s| GestaltParam::Continuation(b.scaled(s)))
                .collect()
        }
        (Principle::Continuation, None) => spec
            .split('|')
            .map(|v| v.parse::<AffineParams>().map(GestaltParam::Continuation))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?,
        (_, Some(_)) => return Err("--affine-basis only applies to continuation".into()),
        (p, None) => parse_scalar_grid(spec)?
            .into_iter()
            .map(|v| GestaltParam::from_scalar(p, v))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?,
    };
    for g in &grid {
        g.validate().map_err(|e| e.to_string())?;
    }
    Ok(grid)
}

fn limit(set: ValidationSet, n: Option<usize>) -> (ValidationSet, Option<ValidationSet>) {
    match n {
        Some(n) if n < set.len() => {
            let (head, tail) = set.split_at(n);
            (head.expect("limit ≥ 1"), tail)
        }
        _ => (set, None),
    }
}

fn load_data(args: &DataArgs) -> Result<(ValidationSet, Option<ValidationSet>), Failure> {
    if args.limit == Some(0) {
        return Err(Failure::config("--limit must be at least 1"));
    }
    let set = match (&args.idx, &args.manifest) {
        (Some(p), _) => load_idx(&p[0], &p[1])?,
        (None, Some(m)) => load_manifest(m)?,
        (None, None) => return Err(Failure::config("give --idx or --manifest")),
    };
    Ok(limit(set, args.limit))
}

fn describe_data(args: &DataArgs) -> String {
    let src = match (&args.idx, &args.manifest) {
        (Some(p), _) => format!("idx {} {}", p[0].display(), p[1].display()),
        (None, Some(m)) => format!("manifest {}", m.display()),
        _ => String::new(),
    };
    match args.limit {
        Some(n) => format!("{src} limit {n}"),
        None => src,
    }
}

fn build_classifier(
    args: &ClassifierArgs,
    leftover: Option<ValidationSet>,
    eval: &ValidationSet,
) -> Result<Box<dyn Classifier>, Failure> {
    match args.classifier.as_str() {
        "builtin" => {
            let train = match (&args.train_idx, &args.train_manifest) {
                (Some(p), _) => Some(load_idx(&p[0], &p[1])?),
                (None, Some(m)) => Some(load_manifest(m)?),
                (None, None) => leftover,
            };
            let train = train.ok_or_else(|| {
                Failure::config(
                    "builtin classifier needs training data: pass --train-idx/--train-manifest or a --limit below the set size",
                )
            })?;
            let train = limit(train, args.train_limit).0;
            if train.class_count() != eval.class_count() {
                return Err(Failure::config(format!(
                    "training data has {} classes, evaluation data has {}",
                    train.class_count(),
                    eval.class_count()
                )));
            }
            Ok(Box::new(fit_centroid(&train, args.temperature)?))
        }
        "external" => {
            if args.command.is_empty() {
                return Err(Failure::config("external classifier needs a command after `--`"));
            }
            let secs = |v: f64, name: &str| {
                if v > 0.0 && v.is_finite() {
                    Ok(Duration::from_secs_f64(v))
                } else {
                    Err(Failure::config(format!("--{name} must be positive")))
                }
            };
            let opts = ProtocolOptions {
                handshake_timeout: secs(args.handshake_timeout, "handshake-timeout")?,
                inference_timeout: secs(args.inference_timeout, "inference-timeout")?,
            };
            let pool = RemotePool::spawn(&args.command, args.workers, opts)?;
            if pool.class_count() != eval.class_count() {
                return Err(Failure {
                    code: EXIT_CLASSIFIER,
                    message: format!(
                        "classifier announces {} classes, data has {}",
                        pool.class_count(),
                        eval.class_count()
                    ),
                });
            }
            Ok(Box::new(pool))
        }
        other => Err(Failure::config(format!(
            "unknown classifier `{other}` (builtin or external)"
        ))),
    }
}

fn describe_classifier(args: &ClassifierArgs) -> String {
    match args.classifier.as_str() {
        "external" => format!("external {}", args.command.join(" ")),
        _ => {
            let train = match (&args.train_idx, &args.train_manifest) {
                (Some(p), _) => format!("idx {} {}", p[0].display(), p[1].display()),
                (None, Some(m)) => format!("manifest {}", m.display()),
                _ => "held-out remainder".into(),
            };
            let lim = args.train_limit.map(|n| format!(" limit {n}")).unwrap_or_default();
            format!("builtin centroid T={} train {train}{lim}", args.temperature)
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    })
}

fn save_sets(dir: &Path, set: &ValidationSet, grid: &[GestaltParam], seed: u64, opts: &PerturbOptions) -> Result<(), Failure> {
    for (k, g) in grid.iter().enumerate() {
        let Ok(images) = perturb_set(set, g, seed, opts) else { continue };
        let items: Vec<Item> = set
            .items()
            .iter()
            .zip(images)
            .map(|(it, image)| Item::new(image, it.label, it.source.clone()))
            .collect();
        save_perturbed(&dir.join(format!("g{k:03}")), &items, set.class_count(), Some(g)).map_err(|e| Failure {
            code: EXIT_IO,
            message: e.to_string(),
        })?;
    }
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<String, Failure> {
    let grid = parse_grid(args.principle, &args.grid, args.affine_basis.as_deref()).map_err(Failure::config)?;
    if !(args.tau.is_finite()) {
        return Err(Failure::config("--tau must be finite"));
    }
    if !(args.mm_per_px > 0.0 && args.mm_per_px.is_finite()) {
        return Err(Failure::config("--mm-per-px must be positive"));
    }
    let (set, leftover) = load_data(&args.data)?;
    let opts = PerturbOptions {
        threshold: args.threshold,
        occlusion_threshold: args.ink_threshold,
        half: args.half,
        ..PerturbOptions::default()
    };
    // reject unusable data before paying for classifier start-up
    if args.principle == Principle::Similarity && !set.is_rgb() {
        return Err(Error::ChannelMismatch {
            expected: "3 (similarity recolors hue)",
            found: 1,
        }
        .into());
    }
    let clf = build_classifier(&args.model, leftover, &set)?;
    let result = run_sweep(clf.as_ref(), &set, args.principle, &grid, args.seed, &opts)?;

    let mut config = vec![
        ("grid".to_string(), args.grid.clone()),
        ("dataset".to_string(), describe_data(&args.data)),
        ("items".to_string(), set.len().to_string()),
        ("classifier".to_string(), describe_classifier(&args.model)),
        ("seed".to_string(), args.seed.to_string()),
        ("tau".to_string(), args.tau.to_string()),
        ("mm_per_px".to_string(), args.mm_per_px.to_string()),
        ("threshold".to_string(), args.threshold.to_string()),
    ];
    if args.principle == Principle::Closure {
        config.push(("ink_threshold".into(), args.ink_threshold.to_string()));
    }
    if let Some(b) = &args.affine_basis {
        config.push(("affine_basis".into(), b.clone()));
    }
    if args.principle == Principle::Continuation {
        config.push(("half".into(), format!("{:?}", args.half).to_lowercase()));
    }
    let text = render_report(&result, &config, args.tau);
    if let Some(dir) = &args.save_dir {
        save_sets(dir, &set, &grid, args.seed, &opts)?;
    }
    write_file(&args.out, &text)?;
    let g_star = result.g_star_argmax().map(|g| g.to_string()).unwrap_or_else(|_| "none".into());
    let knee = result.g_knee(args.tau).map(|g| g.to_string()).unwrap_or_else(|| "none".into());
    Ok(format!(
        "{}: h_base={} g*={g_star} g_knee={knee} -> {}",
        args.principle,
        result.h_base,
        args.out.display()
    ))
}

pub fn cmd_baseline(args: &BaselineArgs) -> Result<String, Failure> {
    let (set, leftover) = load_data(&args.data)?;
    let clf = build_classifier(&args.model, leftover, &set)?;
    let e = evaluate(clf.as_ref(), &set)?;
    Ok(format!("h_base={} p_true={} items={}", e.accuracy, e.mean_true_prob, set.len()))
}

pub fn cmd_report(args: &ReportArgs) -> Result<String, Failure> {
    if let Some(s) = args.mm_per_px {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Failure::config("--mm-per-px must be positive"));
        }
    }
    let reports = args
        .reports
        .iter()
        .map(|p| Ok((p.display().to_string(), read_report(p)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    let merged = merge_reports(&reports, args.mm_per_px);
    match &args.out {
        Some(path) => {
            write_file(path, &merged)?;
            Ok(format!("{} series -> {}", reports.len(), path.display()))
        }
        None => Ok(merged.trim_end().to_string()),
    }
}

/// Parse `argv` and run; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let out = match &cli.command {
        Command::Sweep(a) => cmd_sweep(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Report(a) => cmd_report(a),
    };
    match out {
        Ok(msg) => {
            println!("{msg}");
            EXIT_OK
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_grids() {
        assert_eq!(parse_scalar_grid("0:90:10").unwrap().len(), 10);
        assert_eq!(parse_scalar_grid("0:1:0.1").unwrap()[3], 0.3);
        assert_eq!(parse_scalar_grid("5:5:1").unwrap(), vec![5.0]);
        assert!(parse_scalar_grid("50:10:10").is_err());
        assert!(parse_scalar_grid("0:10:0").is_err());
        assert!(parse_scalar_grid("0:10").is_err());
        assert_eq!(parse_scalar_grid("0, 10,30").unwrap(), vec![0.0, 10.0, 30.0]);
    }

    #[test]
    fn principle_grids() {
        assert!(parse_grid(Principle::Closure, "0:110:10", None).is_err());
        assert!(parse_grid(Principle::Similarity, "0:360:90", None).is_err());
        assert_eq!(
            parse_grid(Principle::FigureGround, "1:3:1", None).unwrap(),
            vec![GestaltParam::FigureGround(1), GestaltParam::FigureGround(2), GestaltParam::FigureGround(3)]
        );
        let c = parse_grid(Principle::Continuation, "0:1:0.5", Some("0,0.1,0,0,0,0.1")).unwrap();
        assert_eq!(c[2], GestaltParam::Continuation(AffineParams([0.0, 0.1, 0.0, 0.0, 0.0, 0.1])));
        let v = parse_grid(Principle::Continuation, "0,0,0,0,0,0|1;0;0;0;0;0", None).unwrap();
        assert_eq!(v.len(), 2);
        assert!(parse_grid(Principle::Closure, "0:10:5", Some("1,0,0,0,0,0")).is_err());
    }
}
