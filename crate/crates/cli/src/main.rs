use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use blocksched::analysis::{
    counterexample_search, optimal_schedule_oracle_with, rows_to_csv, vulnerability_study, OracleMode, OracleOptions,
    PathOrder, SearchOptions, StudyConfig, DEFAULT_ORACLE_CAP,
};
use blocksched::asmr::{
    run_main_loop, runner_by_name, BlockRunner, Constraints, MainLoopOptions, Partitioner, Runner, RunnerOptions,
};
use blocksched::coloring::{DEFAULT_EXACT_CAP, DEFAULT_WEIGHTED_CAP};
use blocksched::executor::{execute_schedule_with, simulate_execution, ExecOptions, Workers};
use blocksched::model::{read_stream, write_stream, ObjectKey, TxResult};
use blocksched::par::Parallelism;
use blocksched::schedule::{dump_levels, latency_stats, ColorOrder};
use blocksched::workload::{gen_block, gen_stream, WorkloadSpec};
use blocksched::{Block, Error, ErrorClass, GlobalState};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Conflict-aware transaction scheduling for blocks.
#[derive(Parser, Debug)]
#[command(name = "blocksched", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a block's schedule and report its latency.
    Schedule {
        /// Block file (JSON).
        block: PathBuf,
        #[command(flatten)]
        runner: RunnerArgs,
    },
    /// Execute a block and print the final state and per-transaction results.
    Execute {
        /// Block file (JSON).
        block: PathBuf,
        #[command(flatten)]
        runner: RunnerArgs,
        /// Initial state file (JSON object of key to integer).
        #[arg(long)]
        state: Option<PathBuf>,
        /// Also run the discrete-event simulation and check its makespan
        /// against the schedule latency.
        #[arg(long)]
        simulate: bool,
        /// Write per-transaction execution intervals to this file.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
    },
    /// Run the block-processing loop over a block stream.
    Asmr {
        /// Block stream file (JSON Lines).
        stream: PathBuf,
        #[command(flatten)]
        runner: RunnerArgs,
        /// Initial state file (JSON object of key to integer).
        #[arg(long)]
        state: Option<PathBuf>,
        /// Ledger file recording one entry per processed block.
        #[arg(long)]
        ledger: Option<PathBuf>,
        /// Continue a non-empty ledger.
        #[arg(long, requires = "ledger")]
        resume: bool,
        /// Stop after this many new blocks.
        #[arg(long)]
        max_blocks: Option<usize>,
    },
    /// Compare estimated longest paths with estimated chromatic numbers on random graphs.
    Analyze {
        /// Graph sizes, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        ns: Vec<usize>,
        /// Edge probabilities, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        ps: Vec<f64>,
        /// Samples per (n, p) cell.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Vertex order fed to the path estimate.
        #[arg(long, value_enum, default_value_t = PathOrderArg::Ascending)]
        order: PathOrderArg,
        /// CSV output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run on one thread.
        #[arg(long)]
        serial: bool,
    },
    /// Find the minimum achievable latency of a small block.
    Oracle {
        /// Block file (JSON).
        block: PathBuf,
        /// Largest block size accepted.
        #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
        cap: usize,
        /// Enumerate every conflict orientation instead of level partitions.
        #[arg(long)]
        orientations: bool,
    },
    /// Search small random blocks for color-order counterexamples.
    Search {
        #[arg(long, default_value_t = 7)]
        n_max: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use unit lengths instead of {1, 10, 100, 1000}.
        #[arg(long)]
        homogeneous: bool,
        /// Run on one thread.
        #[arg(long)]
        serial: bool,
    },
    /// Generate a block from a workload spec.
    GenBlock {
        /// Workload spec file (JSON).
        spec: PathBuf,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a block stream from a list of workload specs.
    GenStream {
        /// Workload spec file (JSON object or array).
        specs: PathBuf,
        /// Hex `prev_hash` of the first block.
        #[arg(long, default_value = "")]
        prev_hash: String,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct RunnerArgs {
    /// One of: order, level-greedy, min-coloring, weighted, auto, batch.
    #[arg(long, default_value = "min-coloring")]
    runner: String,
    /// Coloring behind the batch runner; level runners only accept their own.
    #[arg(long, value_enum)]
    coloring: Option<ColoringMode>,
    #[arg(long, value_enum, default_value_t = ColorOrderArg::SizeDesc)]
    color_order: ColorOrderArg,
    /// Largest block colored exactly.
    #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
    exact_cap: usize,
    /// Largest block colored with exact minimum weight.
    #[arg(long, default_value_t = DEFAULT_WEIGHTED_CAP)]
    weighted_cap: usize,
    /// Length spread the auto runner treats as homogeneous.
    #[arg(long, value_name = "EPSILON")]
    treat_epsilon_homogeneous: Option<u64>,
    /// Worker threads; one per transaction when absent.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ColoringMode {
    Greedy,
    Exact,
    WeightedExact,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ColorOrderArg {
    Ascending,
    SizeDesc,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PathOrderArg {
    Ascending,
    Random,
}

impl RunnerArgs {
    fn build(&self) -> Result<Runner> {
        let mut opts = RunnerOptions {
            exact_cap: self.exact_cap,
            weighted_cap: self.weighted_cap,
            color_order: match self.color_order {
                ColorOrderArg::Ascending => ColorOrder::Ascending,
                ColorOrderArg::SizeDesc => ColorOrder::SizeDescending,
            },
            batch_partitioner: Partitioner::MinColoring { cap: self.exact_cap },
            treat_epsilon_homogeneous: self.treat_epsilon_homogeneous,
            ..RunnerOptions::default()
        };
        if let Some(mode) = self.coloring {
            let implied = match self.runner.as_str() {
                "level-greedy" => Some(ColoringMode::Greedy),
                "min-coloring" => Some(ColoringMode::Exact),
                "weighted" => Some(ColoringMode::WeightedExact),
                "batch" => None,
                other => return Err(usage(format!("--coloring does not apply to runner {other:?}"))),
            };
            if implied.is_some_and(|m| m != mode) {
                return Err(usage(format!(
                    "--coloring {mode:?} conflicts with runner {:?}",
                    self.runner
                )));
            }
            opts.batch_partitioner = match mode {
                ColoringMode::Greedy => Partitioner::Greedy,
                ColoringMode::Exact => Partitioner::MinColoring { cap: self.exact_cap },
                ColoringMode::WeightedExact => Partitioner::MinWeighted { cap: self.weighted_cap },
            };
        }
        if self.treat_epsilon_homogeneous.is_some() && self.runner != "auto" {
            return Err(usage(
                "--treat-epsilon-homogeneous only applies to the auto runner".into(),
            ));
        }
        if let Some(w) = self.workers {
            if w == 0 {
                return Err(usage("--workers must be at least 1".into()));
            }
            opts.workers = Workers::Bounded(w);
        }
        Ok(runner_by_name(&self.runner, &opts)?)
    }
}

fn usage(msg: String) -> anyhow::Error {
    Error::Domain(msg).into()
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn read_block(path: &Path) -> Result<Block> {
    let block = Block::from_json(&read_text(path)?).with_context(|| format!("in {}", path.display()))?;
    block.validate().with_context(|| format!("in {}", path.display()))?;
    Ok(block)
}

fn read_state(path: Option<&Path>) -> Result<GlobalState> {
    match path {
        Some(p) => Ok(GlobalState::from_json(&read_text(p)?).with_context(|| format!("in {}", p.display()))?),
        None => Ok(GlobalState::new()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fmt_values(m: &BTreeMap<ObjectKey, i64>) -> String {
    if m.is_empty() {
        return "-".into();
    }
    m.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
}

fn fmt_result(r: &TxResult) -> String {
    match &r.error {
        Some(e) => format!("tx {}: error {e}", r.tx_id),
        None => format!(
            "tx {}: reads {} writes {}",
            r.tx_id,
            fmt_values(&r.read_values),
            fmt_values(&r.written_values)
        ),
    }
}

fn cmd_schedule(block: &Path, args: &RunnerArgs) -> Result<()> {
    let runner = args.build()?;
    let block = read_block(block)?;
    let planned = runner.make_schedule(&block, &Constraints::prepare(&block)?)?;
    let graph = planned.schedule.to_graph();
    let report = latency_stats(&graph, &block.lengths())?;
    println!("runner: {}", planned.meta.runner);
    for note in &planned.meta.notes {
        println!("note: {note}");
    }
    if let Some(p) = &planned.meta.partition {
        print!("levels:\n{}", dump_levels(p));
    }
    print!("schedule:\n{}", graph.dump());
    println!("block latency: {}", report.block_latency);
    println!("mean latency: {} ({:.4})", report.mean_latency, report.mean_f64());
    println!("p95 latency: {}", report.p95_latency);
    Ok(())
}

fn cmd_execute(
    block: &Path,
    args: &RunnerArgs,
    state: Option<&Path>,
    simulate: bool,
    trace: Option<&Path>,
) -> Result<()> {
    let runner = args.build()?;
    let block = read_block(block)?;
    let state = read_state(state)?;
    let constraints = Constraints::prepare(&block)?;
    let planned = runner.make_schedule(&block, &constraints)?;
    if !runner.validate_schedule(&planned.schedule, &constraints)? {
        return Err(Error::RunnerInvalidSchedule {
            runner: runner.name().into(),
        }
        .into());
    }
    let opts = ExecOptions {
        trace: trace.is_some(),
        ..runner.exec_options().clone()
    };
    let outcome = execute_schedule_with(&block, &planned.schedule, &state, &opts, None)?;
    println!("runner: {}", planned.meta.runner);
    println!("results:");
    for r in outcome.results_by_id() {
        println!("{}", fmt_result(r));
    }
    let mut final_state = state.clone();
    final_state.apply(&outcome.state_changes);
    println!("final state:");
    for (k, v) in &final_state.entries {
        println!("{k} = {v}");
    }
    println!("state digest: {}", hex::encode(final_state.digest()));
    if simulate {
        let graph = planned.schedule.to_graph();
        let (sim, makespan) = simulate_execution(&block, &graph, &state)?;
        let lat = planned.schedule.latency(&block.lengths())?;
        if makespan != lat {
            return Err(Error::Invariant(format!("makespan {makespan} differs from latency {lat}")).into());
        }
        if !sim.equivalent(&outcome) {
            return Err(
                Error::Invariant(format!("simulation disagrees with execution: {:?}", sim.diff(&outcome))).into(),
            );
        }
        println!("makespan: {makespan}");
        println!("latency: {lat}");
    }
    if let Some(path) = trace {
        let mut text = String::from("tx_id,start_ns,end_ns\n");
        for t in &outcome.trace {
            text.push_str(&format!("{},{},{}\n", t.tx_id, t.start_ns, t.end_ns));
        }
        fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn cmd_asmr(
    stream: &Path,
    args: &RunnerArgs,
    state: Option<&Path>,
    ledger: Option<PathBuf>,
    resume: bool,
    max_blocks: Option<usize>,
) -> Result<()> {
    let mut runner = args.build()?;
    let blocks = read_stream(&read_text(stream)?).with_context(|| format!("in {}", stream.display()))?;
    let initial = read_state(state)?;
    let opts = MainLoopOptions {
        ledger,
        resume,
        max_blocks,
    };
    let report = run_main_loop(&mut runner, &blocks, &initial, &opts)?;
    println!("runner: {}", runner.name());
    println!("blocks replayed: {}", report.replayed);
    println!("blocks processed: {}", report.processed);
    println!("state digest: {}", hex::encode(report.state.digest()));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Schedule { block, runner } => cmd_schedule(&block, &runner),
        Command::Execute {
            block,
            runner,
            state,
            simulate,
            trace,
        } => cmd_execute(&block, &runner, state.as_deref(), simulate, trace.as_deref()),
        Command::Asmr {
            stream,
            runner,
            state,
            ledger,
            resume,
            max_blocks,
        } => cmd_asmr(&stream, &runner, state.as_deref(), ledger, resume, max_blocks),
        Command::Analyze {
            ns,
            ps,
            samples,
            seed,
            order,
            out,
            serial,
        } => (|| {
            let mut cfg = StudyConfig::new(ns, ps, samples, seed);
            cfg.order = match order {
                PathOrderArg::Ascending => PathOrder::Ascending,
                PathOrderArg::Random => PathOrder::Random,
            };
            if serial {
                cfg.parallelism = Parallelism::Serial;
            }
            emit(out.as_deref(), &rows_to_csv(&vulnerability_study(&cfg)?))
        })(),
        Command::Oracle {
            block,
            cap,
            orientations,
        } => (|| {
            let block = read_block(&block)?;
            let mode = if orientations {
                OracleMode::Orientations
            } else {
                OracleMode::Partitions
            };
            let result = optimal_schedule_oracle_with(&block, OracleOptions { cap, mode })?;
            println!("optimal latency: {}", result.optimal_latency);
            print!("levels:\n{}", dump_levels(&result.partition));
            print!("schedule:\n{}", result.schedule.dump());
            Ok(())
        })(),
        Command::Search {
            n_max,
            trials,
            seed,
            homogeneous,
            serial,
        } => (|| {
            let mut opts = if homogeneous {
                SearchOptions::homogeneous(n_max, trials, seed)
            } else {
                SearchOptions::heterogeneous(n_max, trials, seed)
            };
            if serial {
                opts.parallelism = Parallelism::Serial;
            }
            print!("{}", counterexample_search(&opts)?.render());
            Ok(())
        })(),
        Command::GenBlock { spec, out } => (|| {
            let spec = WorkloadSpec::from_json(&read_text(&spec)?)?;
            emit(out.as_deref(), &gen_block(&spec)?.to_json())
        })(),
        Command::GenStream { specs, prev_hash, out } => (|| {
            let specs = WorkloadSpec::list_from_json(&read_text(&specs)?)?;
            let prev = hex::decode(&prev_hash).map_err(|e| usage(format!("--prev-hash: {e}")))?;
            emit(out.as_deref(), &write_stream(&gen_stream(&specs, &prev)?))
        })(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>().map(Error::class) {
        Some(ErrorClass::Validation) => 2,
        Some(ErrorClass::Capacity) => 3,
        Some(ErrorClass::Invariant) => 4,
        Some(ErrorClass::Io) | None => 1,
    }
}
