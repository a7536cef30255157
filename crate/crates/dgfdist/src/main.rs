use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use dgfdist::analyze::analyze_logs;
use dgfdist::csvio::{log_to_string, read_log, write_distance_csv};
use dgfdist::experiment::{load_subject_and_targets, run_experiment, workers_from_env, Deadline};
use dgfdist::fsutil::write_atomic;
use dgfdist::manifest::ExperimentManifest;
use dgfdist::text::{parse_subject_decl, parse_targets};
use dgfdist_core::campaign::{run_campaign_with, CampaignConfig, ScheduleParams};
use dgfdist_core::distance::DEFAULT_MAGNIFIER;
use dgfdist_core::lineage::first_poc_tick;
use dgfdist_core::subject::DEFAULT_STEP_LIMIT;
use dgfdist_core::{distance_map, DistanceConfig, Granularity, Method, ProgramGraph, TargetSpec};

/// Distance-metric laboratory for directed grey-box fuzzing.
#[derive(Parser)]
#[command(name = "dgfdist", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute a per-block distance map and write it as CSV.
    Distance {
        /// Graph or subject file.
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        targets: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[arg(long, value_parser = parse_granularity)]
        granularity: Granularity,
        /// Magnifier for `appr` granularity.
        #[arg(long = "c", default_value_t = DEFAULT_MAGNIFIER)]
        magnifier: f64,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one distance-guided campaign and write its log.
    Fuzz(FuzzArgs),
    /// Run every configuration of a manifest repeatedly and summarize.
    Experiment {
        manifest: PathBuf,
    },
    /// Lineage, Decrease, and series artifacts for a set of logs.
    Analyze {
        /// Glob of campaign log CSV files.
        logs: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Graph file utilities.
    Graph {
        #[command(subcommand)]
        cmd: GraphCmd,
    },
}

#[derive(Subcommand)]
enum GraphCmd {
    /// Report every invariant violation in a graph or subject file.
    Validate { file: PathBuf },
}

#[derive(clap::Args)]
struct FuzzArgs {
    #[arg(long)]
    subject: PathBuf,
    #[arg(long)]
    targets: PathBuf,
    #[arg(long, value_parser = parse_method, default_value = "harmonic")]
    method: Method,
    #[arg(long, value_parser = parse_granularity, default_value = "appr")]
    granularity: Granularity,
    #[arg(long = "c", default_value_t = DEFAULT_MAGNIFIER)]
    magnifier: f64,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Maximum number of executed testcases.
    #[arg(long)]
    budget: u64,
    /// Wall-clock safety cap in seconds.
    #[arg(long)]
    max_seconds: Option<u64>,
    #[arg(long, default_value_t = ScheduleParams::default().exploration_fraction)]
    exploration_fraction: f64,
    #[arg(long, default_value_t = ScheduleParams::default().max_power_exponent)]
    max_power: f64,
    #[arg(long, default_value_t = ScheduleParams::default().base_energy)]
    base_energy: u32,
    #[arg(long, default_value_t = DEFAULT_STEP_LIMIT)]
    step_limit: usize,
    /// Initial seed file (repeatable); a single empty input when absent.
    #[arg(long = "seed")]
    seeds: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_granularity(s: &str) -> Result<Granularity, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn cmd_distance(
    graph: &Path,
    targets: &Path,
    config: DistanceConfig,
    out: Option<&Path>,
) -> Result<()> {
    // subject files are graph files with extra directives
    let decl = parse_subject_decl(&read(graph)?).with_context(|| format!("in {}", graph.display()))?;
    let g = ProgramGraph::build(&decl.graph).with_context(|| format!("in {}", graph.display()))?;
    let names = parse_targets(&read(targets)?).with_context(|| format!("in {}", targets.display()))?;
    let ts = TargetSpec::from_names(&g, names.iter().map(String::as_str))
        .with_context(|| format!("in {}", targets.display()))?;
    let map = distance_map(&g, &ts, config);
    let mut buf = Vec::new();
    write_distance_csv(&g, &map, &mut buf)?;
    match out {
        Some(p) => write_atomic(p, &buf)?,
        None => print!("{}", String::from_utf8(buf)?),
    }
    Ok(())
}

fn cmd_fuzz(a: &FuzzArgs) -> Result<()> {
    let (subject, targets) = load_subject_and_targets(&a.subject, &a.targets)?;
    let distance = DistanceConfig::new(a.method, a.granularity).with_magnifier(a.magnifier)?;
    let dmap = distance_map(subject.graph(), &targets, distance);
    let initial_seeds = if a.seeds.is_empty() {
        vec![Vec::new()]
    } else {
        a.seeds
            .iter()
            .map(|p| fs::read(p).with_context(|| format!("reading {}", p.display())))
            .collect::<Result<_>>()?
    };
    let config = CampaignConfig {
        rng_seed: a.rng_seed,
        budget: a.budget,
        distance,
        schedule: ScheduleParams {
            exploration_fraction: a.exploration_fraction,
            max_power_exponent: a.max_power,
            base_energy: a.base_energy,
        },
        step_limit: a.step_limit,
        initial_seeds,
    };
    let mut deadline = Deadline::after(a.max_seconds.map(Duration::from_secs));
    let log = run_campaign_with(&subject, &targets, &dmap, &config, &mut deadline)?;
    write_atomic(&a.out, log_to_string(&log).as_bytes())?;
    match first_poc_tick(&log) {
        Some(t) => println!("TTE {t}"),
        None => println!("TIMEOUT"),
    }
    Ok(())
}

fn cmd_experiment(manifest: &Path) -> Result<()> {
    let base = manifest.parent().unwrap_or(Path::new("."));
    let m = ExperimentManifest::parse(&read(manifest)?, base)
        .with_context(|| format!("in {}", manifest.display()))?;
    let report = run_experiment(&m, workers_from_env())?;
    println!(
        "{} runs written; summary at {}",
        report.logs.len(),
        m.output.join("summary.csv").display()
    );
    Ok(())
}

fn cmd_analyze(pattern: &str, out: &Path) -> Result<()> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .with_context(|| format!("bad glob `{pattern}`"))?
        .filter_map(Result::ok)
        .collect();
    paths.sort();
    let mut logs = Vec::new();
    for p in &paths {
        match fs::File::open(p).map_err(anyhow::Error::from).and_then(|f| Ok(read_log(f)?)) {
            Ok(log) => logs.push((p.display().to_string(), log)),
            Err(e) => eprintln!("{}: {e}", p.display()),
        }
    }
    if logs.is_empty() {
        bail!("no parseable logs match `{pattern}`");
    }
    let s = analyze_logs(&logs, out)?;
    println!("logs: {}", s.logs);
    println!("pocs: {}", s.pocs);
    println!("decrease samples: {} (skipped {})", s.decrease.samples.len(), s.decrease.skipped);
    if let (Some(mean), Some(median)) = (s.decrease.mean, s.decrease.median) {
        println!("decrease mean: {mean:.4} median: {median:.4}");
    }
    Ok(())
}

fn cmd_graph_validate(file: &Path) -> Result<bool> {
    let decl = parse_subject_decl(&read(file)?).with_context(|| format!("in {}", file.display()))?;
    let violations = decl.graph.validate();
    for v in &violations {
        eprintln!("{}: {v}", file.display());
    }
    if violations.is_empty() {
        println!("ok");
    }
    Ok(violations.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Distance {
            graph,
            targets,
            method,
            granularity,
            magnifier,
            out,
        } => DistanceConfig::new(*method, *granularity)
            .with_magnifier(*magnifier)
            .map_err(anyhow::Error::from)
            .and_then(|c| cmd_distance(graph, targets, c, out.as_deref())),
        Cmd::Fuzz(a) => cmd_fuzz(a),
        Cmd::Experiment { manifest } => cmd_experiment(manifest),
        Cmd::Analyze { logs, out } => cmd_analyze(logs, out),
        Cmd::Graph {
            cmd: GraphCmd::Validate { file },
        } => match cmd_graph_validate(file) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
