//! `mvtsp`: solve, verify, reduce, generate and benchmark many-visits TSP
//! and fixed-degree connected subgraph instances.
//!
//! Exit codes: 0 solved or verified, 1 unreadable input, 2 invalid instance,
//! 3 infeasible, 4 budget exceeded, 5 verification failed, 6 engine gave up
//! or does not support the instance.

mod files;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mvtsp::engine::{solve, Engine, EngineOptions, SolveError};
use mvtsp::generate::random_instance;
use mvtsp::kernel::kernelize;
use mvtsp::multiplicity::reconstruct_tour;
use mvtsp::verify::verify_solution;
use mvtsp::{Instance, RawInstance, Tour};

use files::{load_instance, read_json, CostField, KernelFile, LoadError, SolutionFile};

const EXIT_PARSE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_BUDGET: u8 = 4;
const EXIT_VERIFY: u8 = 5;
const EXIT_ENGINE: u8 = 6;

#[derive(Parser)]
#[command(name = "mvtsp", version, about = "Many Visits TSP and fixed-degree connected subgraph solvers")]
struct Cli {
    /// Worker threads for parallel engines (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and print a solution document.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
        /// Include an explicit closed walk (many-visits instances only).
        #[arg(long)]
        tour: bool,
    },
    /// Check a solution document against its instance.
    Verify { instance: PathBuf, solution: PathBuf },
    /// Print the demand-reduced instance and the edge copies fixed in advance.
    Kernelize { instance: PathBuf },
    /// Print a reproducible random many-visits instance.
    Gen {
        n: usize,
        k_max: u64,
        cost_max: u64,
        /// Probability that an off-diagonal edge has finite cost.
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run engines over generated instances and print CSV.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct EngineArgs {
    /// auto, algebraic, expspace, polyspace, approx or brute.
    #[arg(long = "alg", default_value = "auto")]
    alg: Engine,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Approximation slack.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Leaf layers for the polyspace engine.
    #[arg(long, default_value_t = mvtsp::polyspace::DEFAULT_LAYERS)]
    layers: usize,
    /// Extraction attempts for the algebraic engine.
    #[arg(long, default_value_t = 8)]
    trials: u32,
    #[arg(long, default_value_t = 0.99)]
    confidence: f64,
    /// Skip demand reduction before the exact engines.
    #[arg(long)]
    no_kernel: bool,
    /// Report dynamic-programming states in the output.
    #[arg(long)]
    count_states: bool,
}

impl EngineArgs {
    fn options(&self) -> EngineOptions {
        EngineOptions {
            seed: self.seed,
            eps: self.eps,
            layers: self.layers.max(1),
            trials: self.trials,
            confidence: self.confidence,
            kernelize: !self.no_kernel,
            ..EngineOptions::default()
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated engine names.
    #[arg(long, value_delimiter = ',', default_value = "brute,expspace,polyspace,algebraic")]
    engines: Vec<Engine>,
    #[arg(long, default_value_t = 2)]
    n_min: usize,
    #[arg(long, default_value_t = 4)]
    n_max: usize,
    /// Instances per size, with seeds `0..seeds`.
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long, default_value_t = 3)]
    k_max: u64,
    #[arg(long, default_value_t = 9)]
    cost_max: u64,
    #[arg(long, default_value_t = 0.8)]
    density: f64,
    /// Use `k(v) = n` for every vertex instead of random visits.
    #[arg(long)]
    visits_equal_n: bool,
    #[command(flatten)]
    engine: EngineArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        // fails only if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    let code = match cli.command {
        Command::Solve { instance, engine, tour } => cmd_solve(&instance, &engine, tour),
        Command::Verify { instance, solution } => cmd_verify(&instance, &solution),
        Command::Kernelize { instance } => cmd_kernelize(&instance),
        Command::Gen { n, k_max, cost_max, density, seed } => cmd_gen(n, k_max, cost_max, density, seed),
        Command::Bench(args) => cmd_bench(&args),
    };
    ExitCode::from(code)
}

fn load_or_exit(path: &Path) -> Result<Instance, u8> {
    load_instance(path).map_err(|e| {
        eprintln!("error: {e}");
        match e {
            LoadError::Parse(_) => EXIT_PARSE,
            LoadError::Invalid(_) => EXIT_INVALID,
        }
    })
}

fn print_json<T: serde::Serialize>(value: &T) {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value).expect("stdout is writable");
    writeln!(out).expect("stdout is writable");
}

fn error_code(e: &SolveError) -> u8 {
    match e {
        SolveError::NoSolution => EXIT_INFEASIBLE,
        SolveError::BudgetExceeded(_) => EXIT_BUDGET,
        SolveError::RetriesExhausted(_) | SolveError::Unsupported(_) => EXIT_ENGINE,
    }
}

fn cmd_solve(path: &Path, args: &EngineArgs, want_tour: bool) -> u8 {
    let inst = match load_or_exit(path) {
        Ok(i) => i,
        Err(code) => return code,
    };
    let start = Instant::now();
    let result = solve(&inst, args.alg, &args.options());
    let wall_ms = start.elapsed().as_millis() as u64;
    match result {
        Ok((ran, s)) => {
            let tour = match (&inst, want_tour) {
                (Instance::Mvtsp(i), true) => {
                    Some(reconstruct_tour(i, &s.multiplicity).expect("solutions are verified").0)
                }
                (Instance::Fdcs(_), true) => {
                    eprintln!("warning: tours exist only for many-visits instances");
                    None
                }
                _ => None,
            };
            print_json(&SolutionFile {
                cost: CostField::Finite(s.cost),
                multiplicity: Some(s.multiplicity.rows()),
                tour,
                engine: ran.name().to_string(),
                seed: args.seed,
                wall_ms,
                memo_states: if args.count_states { s.memo_states } else { None },
            });
            0
        }
        Err(SolveError::NoSolution) => {
            print_json(&SolutionFile {
                cost: CostField::Infeasible,
                multiplicity: None,
                tour: None,
                engine: args.alg.name().to_string(),
                seed: args.seed,
                wall_ms,
                memo_states: None,
            });
            EXIT_INFEASIBLE
        }
        Err(e) => {
            eprintln!("error: {e}");
            error_code(&e)
        }
    }
}

fn fail_verify(reason: &str, detail: impl std::fmt::Display) -> u8 {
    println!("FAIL {reason}: {detail}");
    EXIT_VERIFY
}

fn cmd_verify(instance: &Path, solution: &Path) -> u8 {
    let inst = match load_or_exit(instance) {
        Ok(i) => i,
        Err(code) => return code,
    };
    let sol: SolutionFile = match read_json(solution) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_PARSE;
        }
    };
    match sol.cost {
        CostField::Infeasible => {
            // confirm with an exact engine
            let exact = match solve(&inst, Engine::Brute, &EngineOptions::default()) {
                Err(SolveError::BudgetExceeded(_)) => solve(&inst, Engine::Expspace, &EngineOptions::default()),
                other => other,
            };
            match exact {
                Err(SolveError::NoSolution) => {
                    println!("PASS infeasible");
                    0
                }
                Ok((_, s)) => fail_verify("missed-solution", format!("a solution of cost {} exists", s.cost)),
                Err(e) => fail_verify("unverifiable", e),
            }
        }
        CostField::Finite(claimed) => {
            let Some(m) = sol.matrix() else {
                return fail_verify("shape-mismatch", "multiplicity is missing or not square");
            };
            let tour = sol.tour.clone().map(Tour);
            match verify_solution(&inst, &m, claimed, tour.as_ref()) {
                Ok(cost) => {
                    println!("PASS cost {cost}");
                    0
                }
                Err(e) => fail_verify(e.reason(), e),
            }
        }
    }
}

fn cmd_kernelize(path: &Path) -> u8 {
    let inst = match load_or_exit(path) {
        Ok(i) => i,
        Err(code) => return code,
    };
    let fdcs = match &inst {
        Instance::Mvtsp(i) => i.to_fdcs(mvtsp::Family::OrientedTrees),
        Instance::Fdcs(i) => i.clone(),
    };
    match kernelize(&fdcs) {
        Some(k) => {
            print_json(&KernelFile {
                reduced: RawInstance::from(&Instance::Fdcs(k.reduced)),
                offset: k.offset.rows(),
            });
            0
        }
        None => {
            eprintln!("error: {}", SolveError::NoSolution);
            EXIT_INFEASIBLE
        }
    }
}

fn cmd_gen(n: usize, k_max: u64, cost_max: u64, density: f64, seed: u64) -> u8 {
    if n == 0 || k_max == 0 {
        eprintln!("error: n and k-max must be positive");
        return EXIT_INVALID;
    }
    let inst = random_instance(n, k_max, cost_max, density, seed);
    print_json(&RawInstance::from(&Instance::Mvtsp(inst)));
    0
}

fn cmd_bench(args: &BenchArgs) -> u8 {
    let mut out = std::io::stdout().lock();
    writeln!(out, "engine,n,seed,cost,wall_ms,memo_states").expect("stdout is writable");
    if args.k_max == 0 {
        return 0;
    }
    let opts = args.engine.options();
    for n in args.n_min.max(1)..=args.n_max {
        for seed in 0..args.seeds {
            let mut inst = random_instance(n, args.k_max, args.cost_max, args.density, seed);
            if args.visits_equal_n {
                inst = mvtsp::MvtspInstance::new(inst.costs().clone(), vec![n as u64; n]).expect("valid visits");
            }
            let inst = Instance::Mvtsp(inst);
            for &engine in &args.engines {
                let start = Instant::now();
                let result = solve(&inst, engine, &EngineOptions { seed, ..opts.clone() });
                let wall_ms = start.elapsed().as_millis();
                let (cost, states) = match result {
                    Ok((_, s)) => (s.cost.to_string(), s.memo_states.map(|m| m.to_string()).unwrap_or_default()),
                    Err(SolveError::NoSolution) => ("infeasible".to_string(), String::new()),
                    Err(e) => (format!("error:{}", error_code(&e)), String::new()),
                };
                writeln!(out, "{},{n},{seed},{cost},{wall_ms},{states}", engine.name()).expect("stdout is writable");
            }
        }
    }
    0
}
