use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use contracting::methods::InexactnessMode;
use contracting::newton::choose_c;
use contracting::smoothness::{check_inequality_chain, estimate_constants, var_softmax_simplex_bound, ChainReport, SamplingPlan, SmoothnessConstants};
use contracting_bench::{generate_instance, reference_solution, run_experiment, run_sweep, BenchError, ExperimentConfig, MethodKind, OutputFormat};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "bench", about = "Frank-Wolfe vs. inexact contracting Newton on SoftMax over the simplex")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write per-method traces plus summary.json.
    Run(RunArgs),
    /// Run a JSON array of experiment configs in parallel.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print estimated smoothness constants of an instance as JSON.
    Smoothness {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Random sample points on top of the vertices.
        #[arg(long, default_value_t = 50)]
        samples: usize,
    },
    /// Bracket the optimal value of an instance with long certified runs.
    Reference {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long)]
        budget: usize,
    },
}

#[derive(Debug, Args)]
struct InstanceArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    mu: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExitTest {
    Value,
    Stationarity,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long = "method", value_enum, value_delimiter = ',', default_values_t = [MethodKind::Fw, MethodKind::Icn])]
    methods: Vec<MethodKind>,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 500)]
    max_outer: usize,
    #[arg(long)]
    inner_cap: Option<usize>,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    certificate: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    /// Inner exit test of the Newton method.
    #[arg(long, value_enum, default_value_t = ExitTest::Stationarity)]
    inner_exit: ExitTest,
    /// Leave the wall_ms column empty (reproducible output).
    #[arg(long)]
    no_wall_time: bool,
}

impl RunArgs {
    fn config(self) -> ExperimentConfig {
        let InstanceArgs { n, m, mu, seed } = self.instance;
        ExperimentConfig {
            methods: self.methods,
            c: self.c,
            max_outer: self.max_outer,
            inner_cap: self.inner_cap,
            certificate: self.certificate,
            out: self.out,
            format: self.format,
            inexactness: match self.inner_exit {
                ExitTest::Value => InexactnessMode::ValueResidual,
                ExitTest::Stationarity => InexactnessMode::Stationarity,
            },
            wall_time: !self.no_wall_time,
            ..ExperimentConfig::new(n, m, mu, seed)
        }
    }
}

#[derive(Serialize)]
struct OrderReport {
    constants: SmoothnessConstants,
    chain: ChainReport,
}

#[derive(Serialize)]
struct SmoothnessReport {
    n: usize,
    m: usize,
    mu: f64,
    seed: u64,
    plan: SamplingPlan,
    orders: Vec<OrderReport>,
    /// Closed-form upper bounds on the second and third order variation.
    variation_bounds: (f64, f64),
    /// `2√(𝒱^(2) Δ^(2))` from the sampled constants.
    suggested_c: f64,
}

const CHAIN_TOL: f64 = 1e-8;

fn smoothness(args: InstanceArgs, samples: usize) -> Result<(), BenchError> {
    let inst = generate_instance(args.n, args.m, args.mu, args.seed)?;
    let problem = inst.problem();
    let plan = SamplingPlan { random_points: samples, seed: args.seed, ..SamplingPlan::default() };
    let mut orders = Vec::new();
    for p in [1, 2] {
        let constants = estimate_constants(&problem, p, &plan)?;
        orders.push(OrderReport { constants, chain: check_inequality_chain(&constants, CHAIN_TOL) });
    }
    let second = &orders[1].constants;
    let report = SmoothnessReport {
        n: args.n,
        m: args.m,
        mu: args.mu,
        seed: args.seed,
        suggested_c: choose_c(Some(second.variation), Some(second.delta))?,
        plan,
        orders,
        variation_bounds: var_softmax_simplex_bound(&inst.function()),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, BenchError> {
    match cli.command {
        Command::Run(args) => {
            let report = run_experiment(&args.config())?;
            println!("{}", serde_json::to_string_pretty(&report.summary.runs)?);
            if report.icn_exhausted() {
                eprintln!("every icn iteration hit the inner cap");
                return Ok(ExitCode::from(3));
            }
        }
        Command::Sweep { config } => {
            let text = std::fs::read_to_string(&config).map_err(|source| BenchError::Io { path: config.clone(), source })?;
            let configs: Vec<ExperimentConfig> =
                serde_json::from_str(&text).map_err(|e| BenchError::Config(format!("{}: {e}", config.display())))?;
            let mut exhausted = !configs.is_empty();
            let mut failed = None;
            for (cfg, res) in configs.iter().zip(run_sweep(&configs)?) {
                match res {
                    Ok(report) => {
                        exhausted &= report.icn_exhausted();
                        println!("{}", serde_json::to_string(&report.summary.runs)?);
                    }
                    Err(e) => {
                        eprintln!("{}: {e}", cfg.out.display());
                        failed.get_or_insert(e);
                    }
                }
            }
            if let Some(e) = failed {
                return Err(e);
            }
            if exhausted {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Smoothness { instance, samples } => smoothness(instance, samples)?,
        Command::Reference { instance, budget } => {
            let inst = generate_instance(instance.n, instance.m, instance.mu, instance.seed)?;
            let r = reference_solution(&inst.problem(), budget)?;
            println!("{}", serde_json::json!({ "upper": r.upper, "lower": r.lower, "gap": r.gap() }));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
