//! Command-line surface: `run`, `sweep`, `oracle`, `contraction`, and
//! `topology`, all writing CSV with a reproducibility header.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 1 on runtime errors.
//! `COGMESH_THREADS` caps episode parallelism.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{parse_config, RunConfig};
use crate::error::{Error, Result};
use crate::harness::{run_experiment, sweep, Scenario, SweepParam};
use crate::oracle::{
    check_pure_ne, contraction_probe, kappa_averaged_optimum, q_box_upper, JointRewardTable,
    PuModel,
};
use crate::output::{
    fmt_float, rows_from_series, write_csv_records, write_results_csv, Metadata,
};
use crate::radio::generate_topology;

#[derive(Parser)]
#[command(
    name = "cogmesh",
    version,
    about = "Non-cooperative power-allocation learning simulator for cognitive mesh networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment (episode-averaged metrics to CSV).
    Run(CommonArgs),
    /// Run one experiment per value of a swept parameter (tau, alpha0, kappa).
    Sweep(SweepArgs),
    /// Emit the exhaustive joint-action reward table, equilibrium check, and
    /// per-agent optimum for the seed's topology.
    Oracle(CommonArgs),
    /// Probe the contraction ratio of the learning backup over random
    /// Q-table pairs across a temperature grid.
    Contraction(ContractionArgs),
    /// Generate the seed's topology and emit it as CSV.
    Topology(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Base seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (overrides `out` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Episode-count override.
    #[arg(long)]
    episodes: Option<usize>,
    /// Episode-length override, in slots.
    #[arg(long)]
    slots: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Swept parameter: tau, alpha0, or kappa (falls back to the config).
    #[arg(long)]
    param: Option<String>,
    /// Comma-separated list of swept values (falls back to the config).
    #[arg(long)]
    values: Option<String>,
}

#[derive(Args)]
struct ContractionArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated temperature list; defaults to a grid of multiples of
    /// the Q-box width.
    #[arg(long)]
    taus: Option<String>,
    /// Number of random Q pairs per temperature.
    #[arg(long, default_value_t = 200)]
    pairs: usize,
}

/// Entry point used by both the binary and the tests. Never panics on bad
/// input; returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Contraction(args) => cmd_contraction(args),
        Command::Topology(args) => cmd_topology(args),
    }
}

struct Prepared {
    config: RunConfig,
    scenario: Scenario,
    seed: u64,
    out: PathBuf,
    threads: usize,
}

fn prepare(common: &CommonArgs) -> Result<Prepared> {
    let path = &common.config;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut config = parse_config(&text)?;
    if let Some(episodes) = common.episodes {
        config.num_episodes = episodes;
    }
    if let Some(slots) = common.slots {
        config.episode_length = slots;
    }
    if let Some(seed) = common.seed {
        config.base_seed = seed;
    }
    config.validate()?;
    let scenario = config.to_scenario()?;
    let out = common
        .out
        .clone()
        .or_else(|| config.out.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::config("out", "no output path given (--out or `out` in config)"))?;
    let seed = config.base_seed;
    Ok(Prepared {
        config,
        scenario,
        seed,
        out,
        threads: resolve_threads()?,
    })
}

fn resolve_threads() -> Result<usize> {
    match std::env::var("COGMESH_THREADS") {
        Ok(raw) => {
            let n: usize = raw.parse().map_err(|_| {
                Error::config("COGMESH_THREADS", format!("not a thread count: `{raw}`"))
            })?;
            if n == 0 {
                return Err(Error::config("COGMESH_THREADS", "must be >= 1"));
            }
            Ok(n)
        }
        Err(_) => Ok(std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)),
    }
}

fn base_metadata(p: &Prepared) -> Metadata {
    Metadata::new(p.seed, p.config.canonical_json())
        .with("episodes", p.config.num_episodes.to_string())
        .with("episode_length", p.config.episode_length.to_string())
        .with("num_su", p.config.num_su.to_string())
        .with("num_pu", p.config.num_pu.to_string())
}

fn cmd_run(args: CommonArgs) -> Result<()> {
    let p = prepare(&args)?;
    let series = run_experiment(&p.scenario, p.seed, p.threads)?;
    let mut meta = base_metadata(&p).with("clamp_events", series.clamp_events.to_string());
    for (i, opt) in series.optimum.iter().enumerate() {
        meta = meta.with(format!("optimum_agent_{i}"), fmt_float(*opt));
    }
    let rows = rows_from_series(&p.config.experiment_id, None, &series);
    write_results_csv(&p.out, &meta, &rows)?;
    println!(
        "wrote {} rows ({} episodes x {} slots x {} agents) to {}",
        rows.len(),
        series.episodes,
        series.episode_length,
        series.num_agents,
        p.out.display()
    );
    Ok(())
}

fn parse_value_list(raw: &str, field: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(field, format!("not a number: `{s}`")))
        })
        .collect()
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let p = prepare(&args.common)?;
    let param_name = args
        .param
        .or_else(|| p.config.sweep.as_ref().map(|s| s.param.clone()))
        .ok_or_else(|| Error::config("sweep.param", "no swept parameter (--param or config)"))?;
    let param = SweepParam::parse(&param_name)?;
    let values = match args.values {
        Some(raw) => parse_value_list(&raw, "sweep.values")?,
        None => p
            .config
            .sweep
            .as_ref()
            .map(|s| s.values.clone())
            .ok_or_else(|| Error::config("sweep.values", "no values (--values or config)"))?,
    };
    let points = sweep(&p.scenario, param, &values, p.seed, p.threads)?;
    let meta = base_metadata(&p)
        .with("sweep_param", param.name())
        .with(
            "sweep_values",
            values
                .iter()
                .map(|v| fmt_float(*v))
                .collect::<Vec<_>>()
                .join(";"),
        );
    let mut rows = Vec::new();
    for point in &points {
        rows.extend(rows_from_series(
            &p.config.experiment_id,
            Some(point.value),
            &point.series,
        ));
    }
    write_results_csv(&p.out, &meta, &rows)?;
    println!(
        "wrote {} rows ({} sweep values) to {}",
        rows.len(),
        points.len(),
        p.out.display()
    );
    Ok(())
}

const ORACLE_COLUMNS: [&str; 8] = [
    "row_kind",
    "joint_index",
    "agent",
    "action",
    "reward",
    "is_ne",
    "best_dev_action",
    "best_dev_gain",
];

fn cmd_oracle(args: CommonArgs) -> Result<()> {
    let p = prepare(&args)?;
    let scenario = &p.scenario;
    let topo = generate_topology(
        scenario.num_su,
        scenario.num_pu,
        p.seed,
        &scenario.channel,
        &scenario.geometry,
    )?;
    let table = JointRewardTable::build(&topo, &scenario.radio)?;
    let optimum = kappa_averaged_optimum(&topo, &scenario.radio)?;

    let mut rows: Vec<Vec<String>> = Vec::new();
    for joint in 0..table.num_joints() {
        let actions = table.joint_actions(joint);
        let ne = check_pure_ne(&topo, &scenario.radio, &actions, &PuModel::KappaAveraged)?;
        let rewards = table.kappa_avg_rewards(joint);
        for (agent, reward) in rewards.iter().enumerate() {
            let dev = &ne.best_deviations[agent];
            rows.push(vec![
                "reward".into(),
                joint.to_string(),
                agent.to_string(),
                actions[agent].to_string(),
                fmt_float(*reward),
                ne.is_ne.to_string(),
                dev.as_ref().map(|d| d.action.to_string()).unwrap_or_default(),
                dev.as_ref().map(|d| fmt_float(d.gain)).unwrap_or_default(),
            ]);
        }
    }
    for (agent, opt) in optimum.iter().enumerate() {
        rows.push(vec![
            "optimum".into(),
            String::new(),
            agent.to_string(),
            String::new(),
            fmt_float(*opt),
            String::new(),
            String::new(),
            String::new(),
        ]);
    }
    let meta = base_metadata(&p).with("joint_actions", table.num_joints().to_string());
    write_csv_records(&p.out, &meta, &ORACLE_COLUMNS, rows)?;
    println!(
        "wrote oracle table for {} joint actions to {}",
        table.num_joints(),
        p.out.display()
    );
    Ok(())
}

const CONTRACTION_COLUMNS: [&str; 4] = ["tau", "max_ratio", "pairs_evaluated", "pairs_skipped"];

fn cmd_contraction(args: ContractionArgs) -> Result<()> {
    let p = prepare(&args.common)?;
    let scenario = &p.scenario;
    let topo = generate_topology(
        scenario.num_su,
        scenario.num_pu,
        p.seed,
        &scenario.channel,
        &scenario.geometry,
    )?;
    let beta = scenario.learn.beta;
    let box_upper = q_box_upper(&topo, &scenario.radio, beta)?;
    let taus = match args.taus {
        Some(raw) => parse_value_list(&raw, "taus")?,
        None => [0.1, 1.0, 10.0, 100.0]
            .iter()
            .map(|f| f * box_upper)
            .collect(),
    };
    let mut rows = Vec::new();
    for tau in &taus {
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let report = contraction_probe(
            &topo,
            &scenario.radio,
            *tau,
            beta,
            scenario.conjecture_omega,
            args.pairs,
            &mut rng,
        )?;
        rows.push(vec![
            fmt_float(*tau),
            fmt_float(report.max_ratio),
            report.pairs_evaluated.to_string(),
            report.pairs_skipped.to_string(),
        ]);
    }
    let meta = base_metadata(&p)
        .with("beta", fmt_float(beta))
        .with("omega", fmt_float(scenario.conjecture_omega))
        .with("q_box_upper", fmt_float(box_upper))
        .with("pairs", args.pairs.to_string());
    write_csv_records(&p.out, &meta, &CONTRACTION_COLUMNS, rows)?;
    println!(
        "wrote contraction probe over {} temperatures to {}",
        taus.len(),
        p.out.display()
    );
    Ok(())
}

const TOPOLOGY_COLUMNS: [&str; 8] = [
    "kind", "i", "j", "tx_x", "tx_y", "rx_x", "rx_y", "gain",
];

fn cmd_topology(args: CommonArgs) -> Result<()> {
    let p = prepare(&args)?;
    let scenario = &p.scenario;
    let topo = generate_topology(
        scenario.num_su,
        scenario.num_pu,
        p.seed,
        &scenario.channel,
        &scenario.geometry,
    )?;
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, (tx, rx)) in topo.su_links.iter().enumerate() {
        rows.push(vec![
            "su_link".into(),
            i.to_string(),
            String::new(),
            fmt_float(tx.x),
            fmt_float(tx.y),
            fmt_float(rx.x),
            fmt_float(rx.y),
            String::new(),
        ]);
    }
    for (m, (tx, rx)) in topo.pu_links.iter().enumerate() {
        rows.push(vec![
            "pu_link".into(),
            m.to_string(),
            String::new(),
            fmt_float(tx.x),
            fmt_float(tx.y),
            fmt_float(rx.x),
            fmt_float(rx.y),
            String::new(),
        ]);
    }
    for j in 0..topo.num_su() {
        for i in 0..topo.num_su() {
            rows.push(vec![
                "gain_su".into(),
                j.to_string(),
                i.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                fmt_float(topo.gains_su.get(j, i)),
            ]);
        }
    }
    for m in 0..topo.num_pu() {
        for i in 0..topo.num_su() {
            rows.push(vec![
                "gain_pu".into(),
                m.to_string(),
                i.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                fmt_float(topo.gains_pu_to_su.get(m, i)),
            ]);
        }
    }
    let meta = base_metadata(&p);
    write_csv_records(&p.out, &meta, &TOPOLOGY_COLUMNS, rows)?;
    println!("wrote topology to {}", p.out.display());
    Ok(())
}

/// Convenience for tests: runs the CLI against a prepared argv of &str.
pub fn run_from<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    cli_main(args.into_iter().map(|s| s.as_ref().to_string()))
}

#[allow(dead_code)]
fn _path_helper(_: &Path) {}
