use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use pimsim::archconfig::SimConfig;
use pimsim::energy::run_energy;
use pimsim::error::{Result, SimError};
use pimsim::mapping::{place, plan};
use pimsim::matrix::{emit_reports, run_matrix, MatrixSelection};
use pimsim::noc::{FlowControl, NocParams};
use pimsim::pipeline::{simulate, ScenarioId, SimOptions, SimStats};
use pimsim::traffic::{sweep, SweepOptions, TrafficPattern};
use pimsim::workload::{build_vgg, NetworkSpec, VggVariant};

#[derive(Parser)]
#[command(
    name = "pimsim",
    about = "ReRAM PIM CNN-inference node simulator: pipelining, NoC, traffic, energy"
)]
struct Cli {
    /// Architecture config JSON; omitted = embedded default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed (synthetic traffic; architecture runs are deterministic).
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Worker threads for matrix runs.
    #[arg(long, global = true, default_value_t = 4)]
    jobs: usize,

    /// Output directory for reports and run records.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Processing-side simulations.
    Sim {
        #[command(subcommand)]
        command: SimCommand,
    },
    /// Interconnect studies.
    Noc {
        #[command(subcommand)]
        command: NocCommand,
    },
    /// Mapping plans.
    Plan {
        #[command(subcommand)]
        command: PlanCommand,
    },
    /// Post-processing reports.
    Report {
        #[command(subcommand)]
        command: ReportCommand,
    },
}

#[derive(Args)]
struct NocFlags {
    /// ideal | smart | wormhole
    #[arg(long, default_value = "smart")]
    noc: String,

    #[arg(long, default_value_t = 14)]
    hpcmax: usize,

    #[arg(long, default_value_t = 4)]
    buffer_depth: usize,

    #[arg(long, default_value_t = 1)]
    router_delay: u64,

    #[arg(long, default_value_t = 1)]
    link_delay: u64,
}

#[derive(Subcommand)]
enum SimCommand {
    /// Simulate one (network, scenario, NoC) cell.
    Run {
        /// vgg-a..vgg-e, or a path to a custom JSON layer list.
        #[arg(long)]
        network: String,

        /// Pipelining scenario 1..4.
        #[arg(long, default_value_t = 4)]
        scenario: u8,

        #[command(flatten)]
        noc: NocFlags,

        #[arg(long, default_value_t = 4)]
        images: u64,

        /// Per-cycle NoC trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the full network x NoC x scenario benchmark matrix.
    Matrix {
        /// Comma-separated nets (default: all of vgg-a..vgg-e).
        #[arg(long)]
        nets: Option<String>,

        /// Comma-separated flow controls (default: ideal,smart,wormhole).
        #[arg(long)]
        nocs: Option<String>,

        /// Comma-separated scenario indices (default: 1,2,3,4).
        #[arg(long)]
        scenarios: Option<String>,

        #[arg(long, default_value_t = 4)]
        images: u64,
    },
}

#[derive(Subcommand)]
enum NocCommand {
    /// Injection-rate sweep with synthetic traffic.
    Sweep {
        /// uniform_random | transpose | tornado | shuffle | neighbor | bit_complement
        #[arg(long)]
        pattern: String,

        /// ideal | smart | wormhole
        #[arg(long)]
        flow: String,

        /// Either start:end:step or a comma-separated list.
        #[arg(long, default_value = "0.01:0.5:0.01")]
        rates: String,

        /// Mesh as ROWSxCOLS.
        #[arg(long, default_value = "8x8")]
        mesh: String,

        #[arg(long, default_value_t = 14)]
        hpcmax: usize,

        #[arg(long, default_value_t = 4)]
        buffer_depth: usize,

        #[arg(long, default_value_t = 10_000)]
        warmup: u64,

        #[arg(long, default_value_t = 50_000)]
        measure: u64,

        #[arg(long, default_value_t = 5)]
        packet_len: u32,

        /// Output CSV; default out-dir/curves/<pattern>_<flow>.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PlanCommand {
    /// Dump a mapping plan (footprints, replication, placement) as JSON.
    Dump {
        #[arg(long)]
        network: String,

        /// on | off
        #[arg(long, default_value = "on")]
        replication: String,

        #[arg(long, default_value_t = false)]
        strict_budget: bool,

        /// Output path; default stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ReportCommand {
    /// Energy/efficiency report from a stored run record.
    Energy {
        /// Path to a run JSON produced by `sim run` or `sim matrix`.
        #[arg(long)]
        run: PathBuf,

        /// Output path; default stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_network(spec: &str) -> Result<NetworkSpec> {
    if let Ok(v) = VggVariant::parse(spec) {
        return Ok(build_vgg(v));
    }
    NetworkSpec::load(Path::new(spec))
}

fn parse_list<T, F: Fn(&str) -> Result<T>>(s: &str, f: F) -> Result<Vec<T>> {
    s.split(',').map(|p| f(p.trim())).collect()
}

fn parse_rates(s: &str) -> Result<Vec<f64>> {
    let bad = |m: &str| SimError::Precondition(format!("bad rates '{s}': {m}"));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:end:step"));
        }
        let start: f64 = parts[0].parse().map_err(|_| bad("start"))?;
        let end: f64 = parts[1].parse().map_err(|_| bad("end"))?;
        let step: f64 = parts[2].parse().map_err(|_| bad("step"))?;
        if step <= 0.0 || end < start {
            return Err(bad("need step > 0 and end >= start"));
        }
        let mut rates = Vec::new();
        let mut r = start;
        while r <= end + 1e-12 {
            rates.push((r * 1e9).round() / 1e9);
            r += step;
        }
        Ok(rates)
    } else {
        parse_list(s, |p| p.parse::<f64>().map_err(|_| bad("not a number")))
    }
}

fn parse_mesh(s: &str) -> Result<(usize, usize)> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| SimError::Precondition(format!("bad mesh '{s}', expected ROWSxCOLS")))?;
    Ok((
        r.parse()
            .map_err(|_| SimError::Precondition(format!("bad mesh rows in '{s}'")))?,
        c.parse()
            .map_err(|_| SimError::Precondition(format!("bad mesh cols in '{s}'")))?,
    ))
}

fn append_csv_row(path: &Path, header: &str, row: &str) -> Result<()> {
    use std::io::Write;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let fresh = !path.exists();
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    if fresh {
        writeln!(file, "{header}")?;
    }
    writeln!(file, "{row}")?;
    Ok(())
}

fn write_or_print(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, contents)?;
        }
        None => println!("{contents}"),
    }
    Ok(())
}

fn cmd_sim_run(
    config: &SimConfig,
    out_dir: &Path,
    network: &str,
    scenario_idx: u8,
    noc: &NocFlags,
    images: u64,
    trace: Option<PathBuf>,
) -> Result<()> {
    let net = load_network(network)?;
    let scenario = ScenarioId::from_index(scenario_idx)?;
    let flow = FlowControl::parse(&noc.noc)?;
    let mut p = plan(&net, config, scenario.replication, false)?;
    for w in &p.warnings {
        eprintln!("warning: {w}");
    }
    place(&mut p, config)?;
    let mut opts = SimOptions::new(flow);
    opts.hpcmax = noc.hpcmax;
    opts.buffer_depth = noc.buffer_depth;
    opts.router_delay = noc.router_delay;
    opts.link_delay = noc.link_delay;
    opts.trace = trace;
    let stats = simulate(&net, &p, scenario, &opts, images, config)?;
    std::fs::create_dir_all(out_dir)?;
    let json_path = out_dir.join(format!(
        "run_{}_{}_s{}.json",
        stats.network,
        flow.name(),
        scenario_idx
    ));
    std::fs::write(&json_path, serde_json::to_string_pretty(&stats)?)?;
    append_csv_row(
        &out_dir.join("runs.csv"),
        "net,noc,scenario,cycles,images,fps,tops",
        &format!(
            "{},{},{},{},{},{:.4},{:.6}",
            stats.network,
            flow.name(),
            scenario_idx,
            stats.cycles_total,
            stats.images_completed,
            stats.fps,
            stats.tops
        ),
    )?;
    println!(
        "{} scenario {} on {}: {} cycles for {} images, {:.1} FPS, {:.4} TOPS",
        stats.network,
        scenario_idx,
        flow.name(),
        stats.cycles_total,
        stats.images_completed,
        stats.fps,
        stats.tops
    );
    println!("run record: {}", json_path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    out_dir: &Path,
    pattern: &str,
    flow: &str,
    rates: &str,
    mesh: &str,
    hpcmax: usize,
    buffer_depth: usize,
    warmup: u64,
    measure: u64,
    packet_len: u32,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<()> {
    let pattern = TrafficPattern::parse(pattern)?;
    let flow = FlowControl::parse(flow)?;
    let rates = parse_rates(rates)?;
    let (rows, cols) = parse_mesh(mesh)?;
    let mut params = NocParams::new(rows, cols, flow);
    params.hpcmax = hpcmax;
    params.buffer_depth = buffer_depth;
    let opts = SweepOptions {
        warmup_cycles: warmup,
        measure_cycles: measure,
        packet_length: packet_len,
        seed,
    };
    let curve = sweep(pattern, &params, &rates, &opts)?;
    let mut csv = String::from("injection_rate,avg_latency_cycles,reception_rate\n");
    for p in &curve.points {
        csv.push_str(&format!(
            "{:.4},{:.3},{:.5}\n",
            p.injection_rate, p.avg_latency, p.reception_rate
        ));
    }
    let path = out.unwrap_or_else(|| {
        out_dir
            .join("curves")
            .join(format!("{}_{}.csv", pattern.name(), flow.name()))
    });
    write_or_print(Some(&path), &csv)?;
    match curve.saturation_rate {
        Some(r) => println!(
            "{} / {}: saturation at {:.4} flits/node/cycle -> {}",
            pattern.name(),
            flow.name(),
            r,
            path.display()
        ),
        None => println!(
            "{} / {}: no saturation within swept rates -> {}",
            pattern.name(),
            flow.name(),
            path.display()
        ),
    }
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => SimConfig::load(path)?,
        None => SimConfig::default_config(),
    };
    match cli.command {
        Command::Sim { command } => match command {
            SimCommand::Run {
                network,
                scenario,
                noc,
                images,
                trace,
            } => cmd_sim_run(&config, &cli.out_dir, &network, scenario, &noc, images, trace),
            SimCommand::Matrix {
                nets,
                nocs,
                scenarios,
                images,
            } => {
                let mut selection = MatrixSelection::default();
                if let Some(s) = nets {
                    selection.nets = parse_list(&s, VggVariant::parse)?;
                }
                if let Some(s) = nocs {
                    selection.nocs = parse_list(&s, FlowControl::parse)?;
                }
                if let Some(s) = scenarios {
                    selection.scenarios = parse_list(&s, |p| {
                        let idx: u8 = p
                            .parse()
                            .map_err(|_| SimError::Precondition(format!("bad scenario '{p}'")))?;
                        ScenarioId::from_index(idx)
                    })?;
                }
                let cells =
                    selection.nets.len() * selection.nocs.len() * selection.scenarios.len();
                eprintln!(
                    "running {cells} benchmark cells with {} workers...",
                    cli.jobs
                );
                let matrix = run_matrix(&config, &selection, images, cli.jobs)?;
                let files = emit_reports(&matrix, &config, &cli.out_dir)?;
                println!("wrote {} result rows:", matrix.cells.len());
                for f in files.iter().take(5) {
                    println!("  {}", f.display());
                }
                if files.len() > 5 {
                    println!("  ... and {} run records", files.len() - 5);
                }
                Ok(())
            }
        },
        Command::Noc { command } => match command {
            NocCommand::Sweep {
                pattern,
                flow,
                rates,
                mesh,
                hpcmax,
                buffer_depth,
                warmup,
                measure,
                packet_len,
                out,
            } => cmd_sweep(
                &cli.out_dir,
                &pattern,
                &flow,
                &rates,
                &mesh,
                hpcmax,
                buffer_depth,
                warmup,
                measure,
                packet_len,
                cli.seed,
                out,
            ),
        },
        Command::Plan { command } => match command {
            PlanCommand::Dump {
                network,
                replication,
                strict_budget,
                out,
            } => {
                let net = load_network(&network)?;
                let enabled = match replication.as_str() {
                    "on" => true,
                    "off" => false,
                    other => {
                        return Err(SimError::Precondition(format!(
                            "--replication must be on|off, got '{other}'"
                        )))
                    }
                };
                let mut p = plan(&net, &config, enabled, strict_budget)?;
                place(&mut p, &config)?;
                write_or_print(out.as_deref(), &serde_json::to_string_pretty(&p)?)
            }
        },
        Command::Report { command } => match command {
            ReportCommand::Energy { run, out } => {
                let text = std::fs::read_to_string(&run)?;
                let stats: SimStats = serde_json::from_str(&text)?;
                let report = run_energy(&stats, &config)?;
                append_csv_row(
                    &cli.out_dir.join("energy_runs.csv"),
                    "net,noc,scenario,energy_per_image_j,avg_power_w,tops_per_watt",
                    &format!(
                        "{},{},{},{:.6},{:.4},{:.4}",
                        report.network,
                        report.noc,
                        report.scenario_index,
                        report.energy_per_image_j,
                        report.avg_power_w,
                        report.tops_per_watt
                    ),
                )?;
                write_or_print(out.as_deref(), &serde_json::to_string_pretty(&report)?)
            }
        },
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
