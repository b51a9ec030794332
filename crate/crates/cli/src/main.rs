//! `shapematch` command line. Exit codes: 0 ok, 1 input error, 2 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use shapematch::descriptors::{load_external_features, FeatureMatrix};
use shapematch::eval::{aggregate, default_thresholds, MatchReport};
use shapematch::fmap::PointMap;
use shapematch::geometry::{load_shape, Shape, ShapeFormat, TriangleMesh};
use shapematch::pipeline::{
    cmd_eval, cmd_losses, cmd_match, cmd_refine, cmd_synth, dump_features, BasisCache, FeatureOverride,
    PipelineConfig, SynthKind, SynthParams, TrainingPair,
};
use shapematch::{Error, Result};

#[derive(Parser)]
#[command(name = "shapematch", version, about = "Spectral shape correspondence for meshes and point clouds")]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Overrides one configuration key; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Directory for cached eigenbases.
    #[arg(long, global = true, value_name = "DIR")]
    cache: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Match a source shape to a target shape.
    Match(MatchArgs),
    /// Score predicted point maps against ground truth.
    Eval(EvalArgs),
    /// Report the self-supervised loss terms of a mesh pair.
    Losses(PairArgs),
    /// Refine descriptors of a mesh pair by descending the total loss.
    Refine(RefineArgs),
    /// Generate a synthetic pair with known correspondence.
    Synth(SynthArgs),
    /// Write the configured descriptors of one shape.
    DumpFeatures(DumpArgs),
}

#[derive(Args)]
struct PairArgs {
    /// Source shape X (.off or .ply).
    source: PathBuf,
    /// Target shape Y; the partial shape in partial mode.
    target: PathBuf,
    /// Precomputed features of the source, one row per vertex.
    #[arg(long, value_name = "FILE")]
    source_features: Option<PathBuf>,
    /// Precomputed features of the target.
    #[arg(long, value_name = "FILE")]
    target_features: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MatchArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Ground truth (source index per target vertex); adds a report.
    #[arg(long, value_name = "FILE")]
    gt: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted map, one source index per target vertex; may be repeated.
    #[arg(long, required = true, value_name = "FILE")]
    pred: Vec<PathBuf>,
    /// Ground-truth map, one per `--pred`.
    #[arg(long, required = true, value_name = "FILE")]
    gt: Vec<PathBuf>,
    /// Source mesh the maps index into; once for all pairs or once per pair.
    #[arg(long, required = true, value_name = "FILE")]
    mesh: Vec<PathBuf>,
    /// Comma-separated ascending PCK thresholds (default 0 to 0.25 by 0.01).
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RefineArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Ground truth; adds before/after reports.
    #[arg(long, value_name = "FILE")]
    gt: Option<PathBuf>,
    /// Number of descent steps; overrides `refine_steps`.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    /// isosphere_pair, bent_plane_pair or partial_cut_pair.
    kind: String,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Defaults to the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    level: Option<u32>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    deformation: Option<f64>,
    #[arg(long)]
    cut_fraction: Option<f64>,
}

#[derive(Args)]
struct DumpArgs {
    shape: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let base = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let config = base.with_overrides(&cli.set)?;
    let cache = BasisCache(cli.cache.clone());
    match cli.command {
        Command::Match(args) => run_match(args, &config, &cache),
        Command::Eval(args) => run_eval(args, &config),
        Command::Losses(args) => run_losses(args, &config, &cache),
        Command::Refine(args) => run_refine(args, config, &cache),
        Command::Synth(args) => run_synth(args, &config),
        Command::DumpFeatures(args) => run_dump(args, &config, &cache),
    }
}

fn load(path: &Path) -> Result<Shape> {
    load_shape(path, ShapeFormat::from_path(path)?)
}

fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    match load(path)? {
        Shape::Mesh(m) => Ok(m),
        Shape::Cloud(_) => Err(Error::InvalidArgument(format!("{} has no faces", path.display()))),
    }
}

fn load_features(path: Option<&PathBuf>, n: usize) -> Result<Option<FeatureMatrix>> {
    path.map(|p| load_external_features(p, n)).transpose()
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

fn write_summary(dir: Option<&Path>, summary: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).expect("json values serialize") + "\n";
    match dir {
        Some(dir) => write(dir, "summary.json", &text),
        None => Ok(()),
    }
}

fn report_json(report: &MatchReport) -> Value {
    json!({
        "pair_id": report.pair_id,
        "mean_error": report.mean_error,
        "scored": report.errors.len(),
        "skipped": report.skipped_count,
        "pck": report.pck,
    })
}

fn run_match(args: MatchArgs, config: &PipelineConfig, cache: &BasisCache) -> Result<()> {
    let source = load(&args.pair.source)?;
    let target = load(&args.pair.target)?;
    let fx = load_features(args.pair.source_features.as_ref(), source.len())?;
    let fy = load_features(args.pair.target_features.as_ref(), target.len())?;
    let features = FeatureOverride {
        source: fx.as_ref(),
        target: fy.as_ref(),
    };
    let out = cmd_match(&source, &target, config, features, cache)?;
    let report = match &args.gt {
        Some(gt) => {
            let mesh = source
                .as_mesh()
                .ok_or_else(|| Error::InvalidArgument("evaluation needs the source to be a mesh".into()))?;
            let gt = PointMap::load(gt, source.len())?;
            let id = format!("{} -> {}", source.shape_id(), target.shape_id());
            Some(cmd_eval(&id, &out.pointmap, &gt, mesh, None)?)
        }
        None => None,
    };
    if let Some(dir) = &args.pair.out {
        write(dir, "pointmap.txt", &out.pointmap.to_text())?;
        write(dir, "fmap.txt", &out.fmap.to_text())?;
        if let Some(r) = &report {
            write(dir, "report.txt", &r.to_text())?;
        }
    }
    let summary = json!({
        "command": "match",
        "source": source.shape_id(),
        "target": target.shape_id(),
        "route": out.route,
        "n_source": source.len(),
        "n_target": target.len(),
        "k": out.fmap.c.ncols(),
        "report": report.as_ref().map(report_json),
        "config": config.to_json(),
    });
    write_summary(args.pair.out.as_deref(), &summary)?;
    println!("route = {}", summary["route"].as_str().unwrap_or_default());
    match &report {
        Some(r) => print!("{}", r.to_text()),
        None if args.pair.out.is_none() => print!("{}", out.pointmap.to_text()),
        None => {}
    }
    Ok(())
}

fn run_eval(args: EvalArgs, config: &PipelineConfig) -> Result<()> {
    if args.pred.len() != args.gt.len() {
        return Err(Error::InvalidArgument(format!(
            "{} --pred files but {} --gt files",
            args.pred.len(),
            args.gt.len()
        )));
    }
    if args.mesh.len() != 1 && args.mesh.len() != args.pred.len() {
        return Err(Error::InvalidArgument("give --mesh once or once per --pred".into()));
    }
    let thresholds = args.thresholds.unwrap_or_else(default_thresholds);
    let mut reports = Vec::new();
    for (i, (pred, gt)) in args.pred.iter().zip(&args.gt).enumerate() {
        let mesh = load_mesh(&args.mesh[i.min(args.mesh.len() - 1)])?;
        let n = mesh.n_vertices();
        let id = pred.file_stem().and_then(|s| s.to_str()).unwrap_or("pair");
        let pred = PointMap::load(pred, n)?;
        let gt = PointMap::load(gt, n)?;
        reports.push(cmd_eval(id, &pred, &gt, &mesh, Some(&thresholds))?);
    }
    let text: String = reports.iter().map(|r| r.to_text() + "\n").collect();
    let aggregate_x100 = aggregate(&reports)?;
    if let Some(dir) = &args.out {
        write(dir, "report.txt", &text)?;
    }
    write_summary(
        args.out.as_deref(),
        &json!({
            "command": "eval",
            "pairs": reports.iter().map(report_json).collect::<Vec<_>>(),
            "aggregate_mean_error_x100": aggregate_x100,
            "config": config.to_json(),
        }),
    )?;
    print!("{text}");
    println!("aggregate_mean_error_x100 = {aggregate_x100}");
    Ok(())
}

fn training_pair(args: &PairArgs, config: &PipelineConfig, cache: &BasisCache) -> Result<TrainingPair> {
    let x = load_mesh(&args.source)?;
    let y = load_mesh(&args.target)?;
    let fx = load_features(args.source_features.as_ref(), x.n_vertices())?;
    let fy = load_features(args.target_features.as_ref(), y.n_vertices())?;
    let features = FeatureOverride {
        source: fx.as_ref(),
        target: fy.as_ref(),
    };
    TrainingPair::build(&x, &y, config, features, cache)
}

const TRACE_HEADER: &str = "# step e_bij e_orth e_align e_nce e_total\n";

fn run_losses(args: PairArgs, config: &PipelineConfig, cache: &BasisCache) -> Result<()> {
    let pair = training_pair(&args, config, cache)?;
    let report = cmd_losses(&pair, config)?;
    let text = format!("{TRACE_HEADER}{}\n", report.trace_line(0));
    if let Some(dir) = &args.out {
        write(dir, "losses.txt", &text)?;
    }
    write_summary(
        args.out.as_deref(),
        &json!({ "command": "losses", "losses": report, "config": config.to_json() }),
    )?;
    print!("{text}");
    Ok(())
}

fn run_refine(args: RefineArgs, mut config: PipelineConfig, cache: &BasisCache) -> Result<()> {
    if let Some(steps) = args.steps {
        config.refine.steps = steps;
    }
    let out = args
        .pair
        .out
        .clone()
        .ok_or_else(|| Error::InvalidArgument("refine needs --out".into()))?;
    let pair = training_pair(&args.pair, &config, cache)?;
    let gt = match &args.gt {
        Some(path) => Some((PointMap::load(path, pair.mesh_x.n())?, load_mesh(&args.pair.source)?)),
        None => None,
    };
    let result = cmd_refine(&pair, &config, gt.as_ref().map(|(g, m)| (g, m)))?;

    let trace: String = std::iter::once(TRACE_HEADER.to_string())
        .chain(
            result
                .outcome
                .trace
                .iter()
                .enumerate()
                .map(|(i, r)| r.trace_line(i) + "\n"),
        )
        .collect();
    write(&out, "trace.txt", &trace)?;
    for (name, f) in ["mesh_x", "mesh_y", "cloud_x", "cloud_y"].iter().zip(&result.refined) {
        write(&out, &format!("{name}.txt"), &f.to_text())?;
    }
    let w = FeatureMatrix {
        values: result.outcome.transform.clone(),
        kind: shapematch::descriptors::FeatureKind::External,
    };
    write(&out, "transform.txt", &w.to_text())?;

    let routes = [("fmap", &result.fmap_route), ("similarity", &result.similarity_route)];
    let mut text = String::new();
    let mut route_json = serde_json::Map::new();
    for (name, cmp) in routes {
        if let Some(cmp) = cmp {
            text += &cmp.before.to_text();
            text += "\n";
            text += &cmp.after.to_text();
            text += "\n";
            route_json.insert(
                name.to_string(),
                json!({ "before": report_json(&cmp.before), "after": report_json(&cmp.after) }),
            );
        }
    }
    if !text.is_empty() {
        write(&out, "report.txt", &text)?;
    }
    let initial = &result.outcome.trace[0];
    let last = result.outcome.final_loss();
    write_summary(
        Some(&out),
        &json!({
            "command": "refine",
            "steps_taken": result.outcome.trace.len() - 1,
            "stalled_at": result.outcome.stalled_at,
            "aborted": result.outcome.aborted,
            "initial": initial,
            "final": last,
            "routes": route_json,
            "config": config.to_json(),
        }),
    )?;
    print!("{trace}");
    for (name, cmp) in routes {
        if let Some(cmp) = cmp {
            println!(
                "{name}: mean_error before = {} after = {}",
                cmp.before.mean_error, cmp.after.mean_error
            );
        }
    }
    if let Some(reason) = &result.outcome.aborted {
        eprintln!("warning: refinement aborted: {reason}");
    }
    Ok(())
}

fn run_synth(args: SynthArgs, config: &PipelineConfig) -> Result<()> {
    let kind: SynthKind = args.kind.parse()?;
    let defaults = SynthParams::default();
    let params = SynthParams {
        level: args.level.unwrap_or(defaults.level),
        nx: args.nx.unwrap_or(defaults.nx),
        ny: args.ny.unwrap_or(defaults.ny),
        deformation: args.deformation.unwrap_or(defaults.deformation),
        cut_fraction: args.cut_fraction.unwrap_or(defaults.cut_fraction),
        seed: args.seed.unwrap_or(config.seed),
    };
    let pair = cmd_synth(kind, &params, Some(&args.out))?;
    println!(
        "wrote {} (source {} vertices, target {} vertices, area ratio {})",
        args.out.display(),
        pair.source.n_vertices(),
        pair.target.n_vertices(),
        pair.area_ratio
    );
    Ok(())
}

fn run_dump(args: DumpArgs, config: &PipelineConfig, cache: &BasisCache) -> Result<()> {
    let shape = load(&args.shape)?;
    let features = dump_features(&shape, config, cache)?;
    match &args.out {
        Some(path) => features.save(path),
        None => {
            print!("{}", features.to_text());
            Ok(())
        }
    }
}
