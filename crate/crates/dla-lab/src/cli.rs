//! Command-line front end: simulate | measure | couple | verify | report.
//!
//! Exit codes: 0 success, 1 criterion/runtime failure, 2 usage error.
//! A config file (`--config`, flat `key = <json>` lines) supplies defaults;
//! explicit flags win. DLA_LAB_SEED provides the default seed and
//! DLA_LAB_THREADS caps the worker pool.

use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::coupling::{run_coupled, CoupledConfig};
use crate::error::{Error, Result};
use crate::export::{
    export_ledger, export_report, export_table, export_trajectory, resolve_output_path,
};
use crate::growth::{run_process, ProcessConfig, ProcessKind, SeedSpec};
use crate::harmonic::{
    estimate_scaling_constant, exact_edge_harmonic, mc_edge_harmonic,
};
use crate::lattice::{Rect, Site, WindowSpec};
use crate::rng::RngStream;
use crate::solver::SolverConfig;
use crate::verify::{run_suite, suite_ids, VerifyOptions};
use crate::walk::{AccelerationPolicy, LaunchDistribution, LaunchSpec};
use crate::with_thread_pool;

#[derive(Parser, Debug)]
#[command(name = "dla-lab", version, about = "Lattice aggregation laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct CommonIo {
    /// Output path (JSON lines).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace an existing output file instead of moving it aside.
    #[arg(long)]
    overwrite: bool,
    /// Base seed; defaults to DLA_LAB_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Stream id under the seed.
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Flat key = <json> config file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a growth process and export its trajectory.
    Simulate {
        #[command(flatten)]
        io: CommonIo,
        /// Process kind: edla | intermediate.
        #[arg(long, default_value = "intermediate")]
        kind: String,
        /// Seed half-length m (segment D_m).
        #[arg(long, default_value_t = 2)]
        m: u64,
        /// Boundary half-length N (intermediate only).
        #[arg(long = "N", default_value_t = 8)]
        n: u64,
        /// Step horizon; intermediate defaults to 2N.
        #[arg(long)]
        horizon: Option<u64>,
        /// Launch distribution: uniform | exact.
        #[arg(long, default_value = "uniform")]
        launch: String,
        /// Disable square-jump acceleration.
        #[arg(long)]
        no_accel: bool,
        /// Record the first exit from F(m).
        #[arg(long)]
        track_envelope: bool,
        /// Comma-separated snapshot step indices.
        #[arg(long)]
        snapshots: Option<String>,
    },
    /// Compute harmonic-measure tables (exact solver and/or Monte Carlo).
    Measure {
        #[command(flatten)]
        io: CommonIo,
        /// Target set: D<n> shorthand or "(x,y);(x,y);...".
        #[arg(long)]
        set: Option<String>,
        /// Absorber set: same grammar, or "D<outer>\D<inner>".
        #[arg(long)]
        absorber: Option<String>,
        /// exact | mc | both.
        #[arg(long, default_value = "exact")]
        method: String,
        #[arg(long, default_value_t = 100_000)]
        walkers: u64,
        /// Launch ring radius for MC (default: fitted to the target).
        #[arg(long)]
        launch_radius: Option<i64>,
        /// Launch distribution for MC: uniform | exact.
        #[arg(long, default_value = "uniform")]
        launch: String,
        /// Estimate the scaling constant instead of a table.
        #[arg(long)]
        estimate_c: bool,
        /// Comma-separated n values for --estimate-c.
        #[arg(long, default_value = "8,16,32,64")]
        n_list: String,
    },
    /// Run the two-process coupling and export its discrepancy ledger.
    Couple {
        #[command(flatten)]
        io: CommonIo,
        #[arg(long)]
        m1: u64,
        #[arg(long)]
        m2: u64,
        #[arg(long = "N")]
        n: u64,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long)]
        horizon: Option<u64>,
        /// Window rect "x_min,x_max,y_min,y_max" for agreement flags.
        #[arg(long)]
        window: Option<String>,
    },
    /// Run acceptance criteria.
    Verify {
        #[command(flatten)]
        io: CommonIo,
        /// Suite name: oracle | acceleration | scaling | process | coupling
        /// | envelope | determinism | structure | all.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Reduced replica counts and widened thresholds.
        #[arg(long)]
        quick: bool,
    },
    /// Summarize an exported JSON-lines file.
    Report {
        #[command(flatten)]
        io: CommonIo,
        #[arg(long)]
        input: PathBuf,
    },
}

fn default_seed(explicit: Option<u64>) -> u64 {
    explicit
        .or_else(|| std::env::var("DLA_LAB_SEED").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(0)
}

/// "D3" or "(0,0);(1,0)".
fn parse_site_set(text: &str) -> Result<BTreeSet<Site>> {
    let text = text.trim();
    if let Some(rest) = text.strip_prefix('D') {
        let n: u64 = rest
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad D_n shorthand: {text}")))?;
        return Ok(crate::lattice::SegmentSpec::new(n).sites().into_iter().collect());
    }
    let mut set = BTreeSet::new();
    for part in text.split(';') {
        let p = part.trim().trim_start_matches('(').trim_end_matches(')');
        let mut it = p.split(',');
        let (x, y) = (it.next(), it.next());
        match (x, y, it.next()) {
            (Some(x), Some(y), None) => {
                let x = x.trim().parse().map_err(|_| bad_site(part))?;
                let y = y.trim().parse().map_err(|_| bad_site(part))?;
                set.insert(Site::new(x, y));
            }
            _ => return Err(bad_site(part)),
        }
    }
    if set.is_empty() {
        return Err(Error::InvalidConfig("empty site set".into()));
    }
    Ok(set)
}

fn bad_site(part: &str) -> Error {
    Error::InvalidConfig(format!("bad site spec: {part}"))
}

fn parse_absorber(text: &str) -> Result<BTreeSet<Site>> {
    if let Some((outer, inner)) = text.split_once('\\') {
        let o = parse_site_set(outer.trim())?;
        let i = parse_site_set(inner.trim())?;
        return Ok(o.difference(&i).copied().collect());
    }
    parse_site_set(text)
}

fn parse_launch(text: &str) -> Result<LaunchDistribution> {
    match text {
        "uniform" => Ok(LaunchDistribution::UniformOnRing),
        "exact" => Ok(LaunchDistribution::ExactHarmonicFromInfinity),
        other => Err(Error::InvalidConfig(format!("unknown launch distribution: {other}"))),
    }
}

fn parse_window(text: &str) -> Result<WindowSpec> {
    let vals: Vec<i64> = text
        .split(',')
        .map(|v| v.trim().parse::<i64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidConfig(format!("bad window rect: {text}")))?;
    if vals.len() != 4 || vals[0] > vals[1] || vals[2] > vals[3] {
        return Err(Error::InvalidConfig(format!("bad window rect: {text}")));
    }
    Ok(WindowSpec::from_rect(Rect { x_min: vals[0], x_max: vals[1], y_min: vals[2], y_max: vals[3] }))
}

/// Merge `key = <json>` config-file defaults into argv: a key becomes
/// `--key value` unless that flag already appears.
fn apply_config_file(mut argv: Vec<String>) -> Result<Vec<String>> {
    let pos = argv.iter().position(|a| a == "--config");
    let Some(pos) = pos else { return Ok(argv) };
    let path = argv
        .get(pos + 1)
        .cloned()
        .ok_or_else(|| Error::InvalidConfig("--config needs a path".into()))?;
    let text = std::fs::read_to_string(&path)?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, raw) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("{path}:{}: expected key = value", lineno + 1))
        })?;
        let key = key.trim();
        let flag = format!("--{key}");
        if argv.contains(&flag) {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(raw.trim()).map_err(|e| {
            Error::InvalidConfig(format!("{path}:{}: bad JSON value: {e}", lineno + 1))
        })?;
        match value {
            serde_json::Value::Bool(true) => argv.push(flag),
            serde_json::Value::Bool(false) => {}
            serde_json::Value::String(s) => {
                argv.push(flag);
                argv.push(s);
            }
            other => {
                argv.push(flag);
                argv.push(other.to_string());
            }
        }
    }
    Ok(argv)
}

pub fn run_cli(argv: Vec<String>) -> Result<i32> {
    let argv = apply_config_file(argv)?;
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            // help/version requests are successes, everything else is usage
            let code = if e.use_stderr() { 2 } else { 0 };
            e.print().ok();
            return Ok(code);
        }
    };
    match cli.command {
        Command::Simulate { io, kind, m, n, horizon, launch, no_accel, track_envelope, snapshots } => {
            let seed = default_seed(io.seed);
            let stream = RngStream::new(seed, io.stream);
            let mut cfg = match kind.as_str() {
                "edla" => ProcessConfig::edla(SeedSpec::Segment(m)),
                "intermediate" => ProcessConfig::intermediate(m, n),
                other => return Err(Error::InvalidConfig(format!("unknown kind: {other}"))),
            };
            cfg.launch_distribution = parse_launch(&launch)?;
            if no_accel {
                cfg.policy = AccelerationPolicy::None;
            }
            cfg.horizon_steps = horizon;
            if track_envelope {
                cfg.envelope = Some(crate::lattice::EnvelopeSpec::F { m });
            }
            if let Some(s) = snapshots {
                cfg.snapshot_steps = s
                    .split(',')
                    .map(|v| v.trim().parse::<u64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::InvalidConfig(format!("bad snapshot list: {s}")))?;
            }
            if matches!(cfg.kind, ProcessKind::Edla { .. }) && cfg.horizon_steps.is_none() {
                return Err(Error::InvalidConfig("edla needs --horizon".into()));
            }
            let traj = with_thread_pool(|| run_process(cfg.clone(), stream))?;
            let out = resolve_output_path(
                io.out.as_deref().unwrap_or_else(|| std::path::Path::new("trajectory.jsonl")),
                io.overwrite,
            )?;
            export_trajectory(&out, &traj, serde_json::to_value(&cfg)?, stream)?;
            println!(
                "wrote {} ({} events, {} dropped, envelope exit {:?})",
                out.display(),
                traj.events.len(),
                traj.dropped,
                traj.first_envelope_exit
            );
            Ok(0)
        }
        Command::Measure {
            io,
            set,
            absorber,
            method,
            walkers,
            launch_radius,
            launch,
            estimate_c,
            n_list,
        } => {
            let seed = default_seed(io.seed);
            let stream = RngStream::new(seed, io.stream);
            let out_default;
            if estimate_c {
                let ns: Vec<u64> = n_list
                    .split(',')
                    .map(|v| v.trim().parse::<u64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::InvalidConfig(format!("bad n list: {n_list}")))?;
                let est = with_thread_pool(|| estimate_scaling_constant(&ns))?;
                let out = resolve_output_path(
                    io.out.as_deref().unwrap_or_else(|| std::path::Path::new("scaling.json")),
                    io.overwrite,
                )?;
                export_report(&out, &est)?;
                println!(
                    "wrote {} (limit {:.6}, c {:.6}, warning {})",
                    out.display(),
                    est.extrapolated_limit,
                    est.extrapolated_c,
                    est.convergence_warning
                );
                return Ok(0);
            }
            let set = set.ok_or_else(|| Error::InvalidConfig("--set is required".into()))?;
            let a = parse_site_set(&set)?;
            let abs = absorber.as_deref().map(parse_absorber).transpose()?.unwrap_or_default();
            let union: BTreeSet<Site> = a.union(&abs).copied().collect();
            let cfg = SolverConfig::for_target(&union);
            let config_json = json!({
                "set": set,
                "absorber": absorber,
                "method": method,
                "walkers": walkers,
            });
            out_default = PathBuf::from("table.jsonl");
            let out_base = io.out.clone().unwrap_or(out_default);
            match method.as_str() {
                "exact" | "mc" | "both" => {}
                other => return Err(Error::InvalidConfig(format!("unknown method: {other}"))),
            }
            if method == "exact" || method == "both" {
                let table = with_thread_pool(|| exact_edge_harmonic(&a, &abs, &cfg))?;
                let out = resolve_output_path(&out_base, io.overwrite)?;
                export_table(&out, &table, config_json.clone(), stream)?;
                println!("wrote {} ({} edges, mass {:.9})", out.display(), table.entries.len(), table.total_mass());
            }
            if method == "mc" || method == "both" {
                let max_norm =
                    union.iter().map(|s| s.norm2()).fold(0.0f64, f64::max);
                let radius = launch_radius.unwrap_or(((4.0 * max_norm).ceil() as i64).max(16));
                let spec = LaunchSpec { radius, distribution: parse_launch(&launch)? };
                let table = with_thread_pool(|| {
                    mc_edge_harmonic(&a, &abs, walkers, spec, AccelerationPolicy::default_jump(), true, stream)
                })?;
                let out_mc = if method == "both" {
                    out_base.with_extension("mc.jsonl")
                } else {
                    out_base.clone()
                };
                let out = resolve_output_path(&out_mc, io.overwrite)?;
                export_table(&out, &table, config_json, stream)?;
                println!("wrote {} ({} edges, mass {:.9})", out.display(), table.entries.len(), table.total_mass());
            }
            Ok(0)
        }
        Command::Couple { io, m1, m2, n, alpha, horizon, window } => {
            let seed = default_seed(io.seed);
            let stream = RngStream::new(seed, io.stream);
            let mut cfg = CoupledConfig::new(m1, m2, n);
            cfg.alpha = alpha;
            cfg.horizon = horizon;
            cfg.window = window.as_deref().map(parse_window).transpose()?;
            let run = with_thread_pool(|| run_coupled(cfg.clone(), stream))?;
            let out = resolve_output_path(
                io.out.as_deref().unwrap_or_else(|| std::path::Path::new("ledger.jsonl")),
                io.overwrite,
            )?;
            export_ledger(&out, &run, serde_json::to_value(&cfg)?, stream)?;
            println!(
                "wrote {} ({} deltas, {} edge discrepancies, cases {:?})",
                out.display(),
                run.ledger.deltas.len(),
                run.ledger.edge_disc.len(),
                run.ledger.case_counts
            );
            Ok(0)
        }
        Command::Verify { io, suite, quick } => {
            let ids = suite_ids(&suite)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown suite: {suite}")))?;
            let opts = VerifyOptions { quick, seed: default_seed(io.seed).max(1) };
            let results = with_thread_pool(|| run_suite(ids, &opts));
            for r in &results {
                println!("{}", r.summary_line());
            }
            if let Some(out) = io.out {
                let out = resolve_output_path(&out, io.overwrite)?;
                export_report(&out, &results)?;
                println!("report written to {}", out.display());
            }
            Ok(if results.iter().all(|r| r.pass) { 0 } else { 1 })
        }
        Command::Report { io, input } => {
            let text = std::fs::read_to_string(&input)?;
            let mut lines = text.lines();
            let header: serde_json::Value = lines
                .next()
                .map(serde_json::from_str)
                .transpose()?
                .ok_or_else(|| Error::InvalidConfig("empty input file".into()))?;
            let records = lines.count();
            let summary = json!({
                "input": input.display().to_string(),
                "kind": header.get("kind"),
                "seed": header.get("seed"),
                "stream": header.get("stream"),
                "version": header.get("version"),
                "content_hash": header.get("content_hash"),
                "records": records,
            });
            if let Some(out) = io.out {
                let out = resolve_output_path(&out, io.overwrite)?;
                export_report(&out, &summary)?;
            }
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(0)
        }
    }
}
