use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use findex_core::corpus::{
    parse_check_list, parse_scenario, random_scenario, run_batch, BatchReport, CheckId, RunOptions, Scenario,
    Status,
};
use findex_core::hilbert::DEFAULT_DIM_BUDGET;

#[derive(Parser)]
#[command(name = "findex", version, about = "Finite-index conditional expectations: constants, index, tower, theorem suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the expectation axioms.
    Check(Common),
    /// Certify K(E) and L(E).
    Constants(Common),
    /// Compute the index element from a quasi-basis.
    Index(Common),
    /// Iterate the basic construction.
    Tower(Common),
    /// Run the theorem suite.
    Suite(Common),
    /// Write seeded random scenarios.
    Gen(GenArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file, or a directory of `.json` scenarios.
    #[arg(long)]
    input: PathBuf,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Absolute comparison tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    levels: Option<usize>,
    /// Largest algebra dimension the tower may build.
    #[arg(long)]
    dim_budget: Option<usize>,
    /// Comma-separated check ids; only used by `suite`.
    #[arg(long)]
    checks: Option<String>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    seed: u64,
    /// Number of consecutive seeds; more than one writes a directory.
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, default_value_t = 3)]
    max_blocks: usize,
    #[arg(long, default_value_t = 4)]
    max_block_dim: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("findex: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<u8, Failure> {
    let (common, fixed): (Common, Option<Vec<CheckId>>) = match command {
        Command::Gen(args) => return generate(&args),
        Command::Check(c) => (c, Some(vec![CheckId::Validate])),
        Command::Constants(c) => (
            c,
            Some(vec![CheckId::KCertificate, CheckId::LCertificate, CheckId::Sandwich]),
        ),
        Command::Index(c) => (c, Some(vec![CheckId::QuasiBasis, CheckId::LEqualsIndexNorm])),
        Command::Tower(c) => (c, Some(vec![CheckId::Tower])),
        Command::Suite(c) => {
            let checks = c
                .checks
                .as_deref()
                .map(parse_check_list)
                .transpose()
                .map_err(|e| usage(e.to_string()))?;
            (c, checks)
        }
    };
    let (scenarios, is_dir) = load(&common.input)?;
    let options = |s: &Scenario| {
        let mut o = RunOptions::for_scenario(s);
        if let Some(t) = common.tol {
            o.tol.abs = t;
        }
        if let Some(seed) = common.seed {
            o.seed = seed;
        }
        if let Some(r) = common.restarts {
            o.restarts = r;
        }
        if let Some(l) = common.levels {
            o.tower_levels = l;
        }
        o.dim_budget = common.dim_budget.unwrap_or(DEFAULT_DIM_BUDGET);
        o
    };
    let batch = run_batch(&scenarios, fixed.as_deref(), options);
    let text = if is_dir {
        batch.to_json()
    } else {
        batch.reports[0].to_json()
    };
    emit(common.out.as_deref(), &text)?;
    Ok(exit_code(&batch))
}

fn exit_code(batch: &BatchReport) -> u8 {
    u8::from(batch.status == Status::Fail)
}

fn load(path: &Path) -> Result<(Vec<Scenario>, bool), Failure> {
    let read = |p: &Path| -> Result<Scenario, Failure> {
        let text = fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
        parse_scenario(&text).map_err(|e| usage(format!("{}: {e}", p.display())))
    };
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(usage(format!("{}: no .json scenarios", path.display())));
        }
        Ok((files.iter().map(|p| read(p)).collect::<Result<_, _>>()?, true))
    } else {
        Ok((vec![read(path)?], false))
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn generate(args: &GenArgs) -> Result<u8, Failure> {
    if args.count == 0 {
        return Err(usage("--count must be at least 1"));
    }
    let seeds = args.seed..args.seed + args.count;
    if args.count == 1 {
        let s = random_scenario(args.seed, args.max_blocks, args.max_block_dim);
        emit(args.out.as_deref(), &s.to_json())?;
        return Ok(0);
    }
    let dir = args
        .out
        .as_deref()
        .ok_or_else(|| usage("--out DIR is required with --count > 1"))?;
    fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    for seed in seeds {
        let s = random_scenario(seed, args.max_blocks, args.max_block_dim);
        emit(Some(&dir.join(format!("{}.json", s.name))), &s.to_json())?;
    }
    Ok(0)
}
