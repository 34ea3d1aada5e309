//! `nary-schema`: ingest tuples, factorize back-off tensors, mine schemata.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use nary_schema::factorization::InitStrategy;
use nary_schema::model_selection::GridSpec;
use nary_schema::synth::SyntheticSpec;
use nary_schema::{Error, ErrorKind, Ranks, Regularizers, Result};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "nary-schema", version, about = "Induce n-ary relation schemata from OpenIE tuples")]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads for grid search.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse tuples and build the three back-off tensors.
    Ingest {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Coupled factorization at fixed ranks.
    Factorize {
        #[command(flatten)]
        tensors: TensorArgs,
        #[command(flatten)]
        out: OutArgs,
        /// Ranks for subjects, objects and other arguments.
        #[arg(long, value_name = "R1,R2,R3", value_parser = parse_ranks)]
        ranks: Option<Ranks>,
        /// Same regularizer on all three factors.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        lambda_a: Option<f64>,
        #[arg(long)]
        lambda_b: Option<f64>,
        #[arg(long)]
        lambda_c: Option<f64>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Grid search over ranks and regularizers by average FIT.
    Gridsearch {
        #[command(flatten)]
        tensors: TensorArgs,
        #[command(flatten)]
        out: OutArgs,
        /// Rank values for every axis.
        #[arg(long, value_delimiter = ',')]
        rank_values: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        r1_values: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        r2_values: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        r3_values: Option<Vec<usize>>,
        /// Regularizer values for every factor.
        #[arg(long, value_delimiter = ',')]
        lambda_values: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        lambda_a_values: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        lambda_b_values: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        lambda_c_values: Option<Vec<f64>>,
        /// Add per-cell wall time to grid.csv.
        #[arg(long)]
        timings: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Mine ranked schemata from a factor set.
    Mine {
        #[command(flatten)]
        tensors: TensorArgs,
        /// Factor set (.bin or .json); defaults to <out>/factors.bin.
        #[arg(long)]
        factors: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
        /// Core cells kept per slice.
        #[arg(long)]
        top_n: Option<usize>,
        /// Noun phrases per column label.
        #[arg(long)]
        label_k: Option<usize>,
        /// Schemata kept after ranking.
        #[arg(long)]
        top_s: Option<usize>,
        /// Ignore core cells at or below this fraction of the slice maximum.
        #[arg(long)]
        min_ratio: Option<f64>,
    },
    /// Frequency baseline: one schema per relation.
    Hardclust {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        out: OutArgs,
        /// Representatives per argument slot.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Generate a corpus with planted schemata.
    Synth {
        #[command(flatten)]
        out: OutArgs,
        /// Synthetic corpus description (JSON); defaults to the standard layout.
        #[arg(long, value_name = "FILE")]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Noise tuples as a fraction of planted tuples.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Print schema files as tables.
    Report {
        /// Schema JSON-lines files.
        files: Vec<PathBuf>,
        /// Show only the first N schemata of each file.
        #[arg(long)]
        top: Option<usize>,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Tab-separated tuples.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Keep only the K most frequent relations.
    #[arg(long, value_name = "K")]
    top_relations: Option<usize>,
    /// Case-fold all fields.
    #[arg(long)]
    lowercase: bool,
    /// Fail on the first malformed line.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct OutArgs {
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TensorArgs {
    /// Back-off tensors; defaults to <out>/backoff.jsonl.
    #[arg(long)]
    tensors: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long)]
    max_iters: Option<usize>,
    /// Stop when a sweep improves the objective by less than this fraction.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplicative iterations per single-tensor initialisation.
    #[arg(long)]
    init_iters: Option<usize>,
    /// How the single-tensor initialisations start.
    #[arg(long, value_parser = parse_init)]
    init: Option<InitStrategy>,
}

fn parse_ranks(s: &str) -> std::result::Result<Ranks, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts[..] {
        [r1, r2, r3] => Ok(Ranks::new(r1, r2, r3)),
        _ => Err(format!("expected three comma-separated ranks, got {s:?}")),
    }
}

fn parse_init(s: &str) -> std::result::Result<InitStrategy, String> {
    match s {
        "svd" => Ok(InitStrategy::Svd),
        "uniform" => Ok(InitStrategy::Uniform),
        _ => Err(format!("unknown init {s:?}; expected svd or uniform")),
    }
}

impl InputArgs {
    fn apply(self, cfg: &mut RunConfig) {
        set(&mut cfg.input, self.input);
        if let Some(k) = self.top_relations {
            cfg.top_relations = k;
        }
        cfg.lowercase |= self.lowercase;
        cfg.strict |= self.strict;
    }
}

impl SolverArgs {
    fn apply(self, cfg: &mut RunConfig) {
        let s = &mut cfg.solver;
        s.max_iters = self.max_iters.unwrap_or(s.max_iters);
        s.tol = self.tol.unwrap_or(s.tol);
        s.seed = self.seed.unwrap_or(s.seed);
        s.init_iters = self.init_iters.unwrap_or(s.init_iters);
        s.init = self.init.unwrap_or(s.init);
    }
}

fn set<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

enum Action {
    Run(fn(&RunConfig) -> Result<()>),
    Report(Vec<PathBuf>, Option<usize>),
}

/// Folds subcommand flags into the configuration and picks the command.
fn resolve(command: Command, cfg: &mut RunConfig) -> Result<Action> {
    let action = match command {
        Command::Ingest { input, out } => {
            input.apply(cfg);
            set(&mut cfg.out_dir, out.out);
            Action::Run(commands::ingest)
        }
        Command::Factorize { tensors, out, ranks, lambda, lambda_a, lambda_b, lambda_c, solver } => {
            set(&mut cfg.tensors, tensors.tensors);
            set(&mut cfg.out_dir, out.out);
            set(&mut cfg.ranks, ranks);
            if let Some(l) = lambda {
                cfg.reg = Regularizers::new(l, l, l);
            }
            cfg.reg.lambda_a = lambda_a.unwrap_or(cfg.reg.lambda_a);
            cfg.reg.lambda_b = lambda_b.unwrap_or(cfg.reg.lambda_b);
            cfg.reg.lambda_c = lambda_c.unwrap_or(cfg.reg.lambda_c);
            solver.apply(cfg);
            Action::Run(commands::factorize_cmd)
        }
        Command::Gridsearch {
            tensors,
            out,
            rank_values,
            r1_values,
            r2_values,
            r3_values,
            lambda_values,
            lambda_a_values,
            lambda_b_values,
            lambda_c_values,
            timings,
            solver,
        } => {
            set(&mut cfg.tensors, tensors.tensors);
            set(&mut cfg.out_dir, out.out);
            let flags_given = [&rank_values, &r1_values, &r2_values, &r3_values].iter().any(|v| v.is_some())
                || [&lambda_values, &lambda_a_values, &lambda_b_values, &lambda_c_values].iter().any(|v| v.is_some());
            if flags_given {
                let g = cfg.grid.get_or_insert_with(GridSpec::default);
                if let Some(v) = rank_values {
                    g.rank_values = v;
                }
                if let Some(v) = lambda_values {
                    g.lambda_values = v;
                }
                set(&mut g.r1_values, r1_values);
                set(&mut g.r2_values, r2_values);
                set(&mut g.r3_values, r3_values);
                set(&mut g.lambda_a_values, lambda_a_values);
                set(&mut g.lambda_b_values, lambda_b_values);
                set(&mut g.lambda_c_values, lambda_c_values);
            }
            cfg.timings |= timings;
            solver.apply(cfg);
            Action::Run(commands::gridsearch)
        }
        Command::Mine { tensors, factors, out, top_n, label_k, top_s, min_ratio } => {
            set(&mut cfg.tensors, tensors.tensors);
            set(&mut cfg.factors, factors);
            set(&mut cfg.out_dir, out.out);
            let m = &mut cfg.miner;
            m.top_n = top_n.unwrap_or(m.top_n);
            m.label_k = label_k.unwrap_or(m.label_k);
            m.top_s = top_s.unwrap_or(m.top_s);
            m.min_ratio = min_ratio.unwrap_or(m.min_ratio);
            Action::Run(commands::mine)
        }
        Command::Hardclust { input, out, k } => {
            input.apply(cfg);
            set(&mut cfg.out_dir, out.out);
            cfg.hardclust_k = k.unwrap_or(cfg.hardclust_k);
            Action::Run(commands::hardclust_cmd)
        }
        Command::Synth { out, spec, seed, noise } => {
            set(&mut cfg.out_dir, out.out);
            if let Some(path) = spec {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                let parsed: SyntheticSpec = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                cfg.synth = Some(parsed);
            }
            let s = cfg.synth.get_or_insert_with(|| SyntheticSpec::standard(0, 0.0));
            s.seed = seed.unwrap_or(s.seed);
            s.noise_rate = noise.unwrap_or(s.noise_rate);
            Action::Run(commands::synth)
        }
        Command::Report { files, top } => Action::Report(files, top),
    };
    Ok(action)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.threads, cli.threads);
    let action = resolve(cli.command, &mut cfg)?;
    cfg.validate()?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match action {
        Action::Run(f) => f(&cfg),
        Action::Report(files, top) => commands::report(&files, top),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numeric => 4,
            })
        }
    }
}
