//! `lf`: run KPZ and KMC experiments, benchmarks and the quick check suite.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use lf_core::harness::{
    measure_efficiency, run_experiment, ExperimentConfig, ExperimentResult, ModelConfig, OuterConfig,
    SampleSchedule, SchedulerConfig,
};
use lf_core::rng::{RngKind, DEFAULT_STRIDE};

mod output;

#[derive(Parser, Debug)]
#[command(name = "lf", version, about = "Parallel stochastic lattice simulations")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Octahedron KPZ growth from a flat surface; records W^2.
    Kpz {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        kpz: KpzArgs,
    },
    /// Binary alloy quench on the fcc lattice; records open bonds per particle.
    Kmc {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        kmc: KmcArgs,
    },
    /// Throughput of one configuration, optionally over several worker counts.
    Bench {
        #[arg(long, value_enum, default_value_t = Model::Kpz)]
        model: Model,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        kpz: KpzArgs,
        #[command(flatten)]
        kmc: KmcArgs,
        /// Comma-separated worker counts for an efficiency table.
        #[arg(long, value_delimiter = ',')]
        sweep_workers: Vec<usize>,
    },
    /// Run the invariant and oracle checks.
    Verify,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Model {
    Kpz,
    Kmc,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SchedulerKind {
    Seq,
    Cache,
    Deadborder,
    Doubletile,
    Twolayer,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum OuterKind {
    Deadborder,
    Doubletile,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Lattice edge (power of two).
    #[arg(long, default_value_t = 256)]
    size: usize,
    /// Monte Carlo steps.
    #[arg(long, default_value_t = 100)]
    mcs: u64,
    /// 64-bit seed, decimal or 0x-prefixed hex.
    #[arg(long, default_value = "1", value_parser = parse_seed)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = SchedulerKind::Seq)]
    scheduler: SchedulerKind,
    /// One attempt per domain and set activation (double tiling).
    #[arg(long)]
    single_hit: bool,
    /// Cache block edge, dead-border cell edge, or outer two-layer edge.
    #[arg(long)]
    block_edge: Option<usize>,
    /// Dead-border width; defaults to the kernel interaction range.
    #[arg(long)]
    border: Option<usize>,
    /// Double-tiling tile edge (inner tile edge for two-layer).
    #[arg(long)]
    tile_edge: Option<usize>,
    /// Number of decomposed axes for dead border.
    #[arg(long)]
    dims: Option<usize>,
    /// Outer decomposition of the two-layer scheduler.
    #[arg(long, value_enum, default_value_t = OuterKind::Deadborder)]
    outer: OuterKind,
    #[arg(long, default_value = "lcg64", value_parser = parse_rng)]
    rng: RngKind,
    /// Skip-ahead distance between LCG64 worker streams.
    #[arg(long, default_value_t = DEFAULT_STRIDE)]
    stride: u64,
    #[arg(long, default_value_t = 1)]
    realizations: u32,
    /// Sample every N steps instead of the exponential schedule.
    #[arg(long)]
    sample_every: Option<u64>,
    /// CSV output file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct KpzArgs {
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 0.0)]
    q: f64,
}

#[derive(Args, Debug)]
struct KmcArgs {
    #[arg(long, default_value_t = 0.325)]
    conc: f64,
    #[arg(long, default_value_t = 1.5)]
    eps: f64,
    #[arg(long)]
    both_active: bool,
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let r = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    r.map_err(|e| format!("invalid seed {s:?}: {e}"))
}

fn parse_rng(s: &str) -> Result<RngKind, String> {
    s.parse::<RngKind>().map_err(|e| e.to_string())
}

/// Smaller KPZ tiles update a larger share of the lattice per barrier
/// interval and measurably lower early-time W^2. Inner two-layer tiles stay
/// small so that one outer cell holds several of them.
fn default_tile_edge(model: &ModelConfig, size: usize, inner: bool) -> usize {
    match model {
        ModelConfig::Kpz { .. } if inner => 4,
        ModelConfig::Kpz { .. } => size.min(16),
        ModelConfig::Kmc { .. } => 8,
    }
}

fn build_config(run: &RunArgs, model: ModelConfig) -> ExperimentConfig {
    let half = (run.size / 2).max(1);
    let border = run.border.unwrap_or_else(|| model.default_border());
    let dims = run.dims.unwrap_or_else(|| model.dims());
    let tile = run.tile_edge.unwrap_or_else(|| default_tile_edge(&model, run.size, run.scheduler == SchedulerKind::Twolayer));
    let scheduler = match run.scheduler {
        SchedulerKind::Seq => SchedulerConfig::Sequential,
        SchedulerKind::Cache => SchedulerConfig::CacheBlocked {
            block_edge: run.block_edge,
            cache_bytes: None,
        },
        SchedulerKind::Deadborder => SchedulerConfig::DeadBorder {
            dims,
            cell_edge: run.block_edge.unwrap_or(half),
            border,
        },
        SchedulerKind::Doubletile => SchedulerConfig::DoubleTiling {
            tile_edge: tile,
            single_hit: run.single_hit,
        },
        SchedulerKind::Twolayer => SchedulerConfig::TwoLayer {
            outer: match run.outer {
                OuterKind::Deadborder => OuterConfig::DeadBorder {
                    dims,
                    cell_edge: run.block_edge.unwrap_or(half),
                    border,
                },
                OuterKind::Doubletile => OuterConfig::DoubleTiling {
                    tile_edge: run.block_edge.unwrap_or(half),
                },
            },
            inner_tile_edge: tile,
        },
    };
    ExperimentConfig {
        model,
        size: run.size,
        scheduler,
        workers: run.workers,
        seed: run.seed,
        rng: run.rng,
        stride: run.stride,
        mcs: run.mcs,
        samples: match run.sample_every {
            Some(interval) => SampleSchedule::Every { interval },
            None => SampleSchedule::default(),
        },
        realizations: run.realizations,
    }
}

fn usage_error(sub: &str, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    let mut cmd = Cli::command();
    let usage = match cmd.find_subcommand_mut(sub) {
        Some(s) => s.render_usage(),
        None => cmd.render_usage(),
    };
    eprintln!("{usage}");
    ExitCode::from(2)
}

fn subcommand_name(cfg: &ExperimentConfig) -> &'static str {
    match cfg.model {
        ModelConfig::Kpz { .. } => "kpz",
        ModelConfig::Kmc { .. } => "kmc",
    }
}

fn summary(cfg: &ExperimentConfig, r: &ExperimentResult) {
    eprintln!(
        "{} {} L={} workers={}: {} attempts in {:.3} s, {:.3e} updates/s",
        subcommand_name(cfg),
        cfg.scheduler.name(),
        cfg.size,
        cfg.workers,
        r.throughput.attempts,
        r.throughput.wall_seconds,
        r.throughput.updates_per_second
    );
}

fn run_and_write(cfg: &ExperimentConfig, out: Option<&PathBuf>) -> ExitCode {
    if let Err(e) = cfg.validate() {
        return usage_error(subcommand_name(cfg), e);
    }
    let result = match run_experiment(cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let written = match out {
        Some(path) => std::fs::File::create(path)
            .map_err(|e| e.to_string())
            .and_then(|f| output::write_csv(f, cfg, &result)),
        None => output::write_csv(std::io::stdout().lock(), cfg, &result),
    };
    if let Err(e) = written {
        eprintln!("error: writing output: {e}");
        return ExitCode::from(1);
    }
    summary(cfg, &result);
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Kpz { run, kpz } => {
            let cfg = build_config(&run, ModelConfig::Kpz { p: kpz.p, q: kpz.q });
            run_and_write(&cfg, run.out.as_ref())
        }
        Cmd::Kmc { run, kmc } => {
            let model = ModelConfig::Kmc {
                conc: kmc.conc,
                eps: kmc.eps,
                both_active: kmc.both_active,
            };
            run_and_write(&build_config(&run, model), run.out.as_ref())
        }
        Cmd::Bench {
            model,
            run,
            kpz,
            kmc,
            sweep_workers,
        } => {
            let model = match model {
                Model::Kpz => ModelConfig::Kpz { p: kpz.p, q: kpz.q },
                Model::Kmc => ModelConfig::Kmc {
                    conc: kmc.conc,
                    eps: kmc.eps,
                    both_active: kmc.both_active,
                },
            };
            let mut cfg = build_config(&run, model);
            cfg.samples = SampleSchedule::Explicit { times: vec![] };
            if let Err(e) = cfg.validate() {
                return usage_error("bench", e);
            }
            if sweep_workers.is_empty() {
                match run_experiment(&cfg) {
                    Ok(r) => {
                        summary(&cfg, &r);
                        println!("{:.6e}", r.throughput.updates_per_second);
                        ExitCode::SUCCESS
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        ExitCode::from(1)
                    }
                }
            } else {
                match measure_efficiency(&cfg, &sweep_workers) {
                    Ok(rows) => {
                        let mut so = std::io::stdout().lock();
                        let _ = writeln!(so, "workers,updates_per_second,speedup,efficiency,oversubscribed");
                        for r in rows {
                            let _ = writeln!(
                                so,
                                "{},{:.6e},{:.4},{:.4},{}",
                                r.workers, r.updates_per_second, r.speedup, r.efficiency, r.oversubscribed
                            );
                        }
                        ExitCode::SUCCESS
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        ExitCode::from(1)
                    }
                }
            }
        }
        Cmd::Verify => {
            let results = lf_core::verify::run_all();
            let mut ok = true;
            for r in &results {
                ok &= r.passed;
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
    }
}
