use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hyperinv_cli::commands::{example_config, run, run_example, ExampleName, ExampleOverrides, Outcome, Status};
use hyperinv_cli::config::{BaselineCommand, Overrides, ScenarioConfig};
use hyperinv_cli::corpus::{self, EntryStatus};
use hyperinv_cli::output::{resolve_out_dir, write_outcome, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "hyperinv", version, about = "Contour-integrated invariant subspaces of perturbed multiplication operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the existence hypotheses
    Check(RunArgs),
    /// Assemble P, L, P + L and the subspace basis
    Build(RunArgs),
    /// Build, then run the full residual suite against the oracle
    Verify(RunArgs),
    /// Oracle gap and coefficient tails over the truncation and node ladders
    Sweep(RunArgs),
    /// Generate and verify one of the worked examples
    Example(ExampleArgs),
    /// Re-run the regression corpus
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Output directory [default: $HYPERINV_OUT_DIR, then hyperinv-out]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Quadrature nodes per contour segment
    #[arg(long)]
    nodes: Option<usize>,
    /// Seed for generators, commutant samples and x0 candidates
    #[arg(long)]
    seed: Option<u64>,
    /// Do not print the report
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Construct even when hypotheses fail
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleArg {
    Ex1,
    Ex2,
}

#[derive(Args)]
struct ExampleArgs {
    name: ExampleArg,
    /// Rings of the disk grid
    #[arg(long)]
    radial: Option<usize>,
    /// Sectors of the disk grid
    #[arg(long)]
    angular: Option<usize>,
    /// Coefficient of the single term (ex1)
    #[arg(long)]
    coupling: Option<f64>,
    /// Number of terms (ex2)
    #[arg(long)]
    terms: Option<usize>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Subcommand)]
enum CorpusAction {
    /// Compare every entry with its baseline
    Check {
        #[arg(default_value = "corpus")]
        dir: PathBuf,
    },
    /// Rewrite drifted or missing baselines and list them
    Regenerate {
        #[arg(default_value = "corpus")]
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Check(args) => run_config(BaselineCommand::Check, args),
        Command::Build(args) => run_config(BaselineCommand::Build, args),
        Command::Verify(args) => run_config(BaselineCommand::Verify, args),
        Command::Sweep(args) => run_config(BaselineCommand::Sweep, args),
        Command::Example(args) => example(args),
        Command::Corpus { action } => match action {
            CorpusAction::Check { dir } => corpus_command(&dir, false),
            CorpusAction::Regenerate { dir } => corpus_command(&dir, true),
        },
    };
    ExitCode::from(code as u8)
}

fn run_config(command: BaselineCommand, args: RunArgs) -> i32 {
    let mut config = match ScenarioConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Status::Config.code();
        }
    };
    config.apply(Overrides {
        nodes: args.common.nodes,
        seed: args.common.seed,
    });
    let outcome = run(command, &config, args.force);
    let dir = resolve_out_dir(args.common.out.as_deref(), config.outputs.dir.as_deref());
    emit(&outcome, &dir, config.outputs.matrices, args.common.quiet, None)
}

fn example(args: ExampleArgs) -> i32 {
    let name = match args.name {
        ExampleArg::Ex1 => ExampleName::Ex1,
        ExampleArg::Ex2 => ExampleName::Ex2,
    };
    let overrides = ExampleOverrides {
        radial: args.radial,
        angular: args.angular,
        coupling: args.coupling,
        terms: args.terms,
        seed: args.common.seed,
        nodes: args.common.nodes,
    };
    let config = match example_config(name, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Status::Config.code();
        }
    };
    let outcome = run_example(name, &config);
    let dir = resolve_out_dir(args.common.out.as_deref(), None);
    let config_text = toml::to_string(&config).expect("example config serializes");
    emit(&outcome, &dir, true, args.common.quiet, Some(&config_text))
}

fn emit(outcome: &Outcome, dir: &Path, matrices: bool, quiet: bool, config_text: Option<&str>) -> i32 {
    if !quiet {
        print!("{}", outcome.report.render());
    }
    let written = write_outcome(dir, outcome, matrices).and_then(|mut paths| {
        if let Some(text) = config_text {
            let path = dir.join("config.toml");
            std::fs::write(&path, text)?;
            paths.push(path);
        }
        Ok(paths)
    });
    match written {
        Ok(paths) => {
            if !quiet {
                println!("\nwrote {} files to {}", paths.len(), dir.display());
            }
            outcome.status.code()
        }
        Err(e) => {
            eprintln!("error: cannot write to {} ({e}); set --out or {OUT_DIR_ENV}", dir.display());
            Status::Config.code()
        }
    }
}

fn corpus_command(dir: &Path, write: bool) -> i32 {
    let results = match if write { corpus::regenerate(dir) } else { corpus::check(dir) } {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {}: {e}", dir.display());
            return Status::Config.code();
        }
    };
    let mut code = Status::Pass;
    for r in &results {
        match &r.status {
            EntryStatus::Match => println!("{:<32} match", r.name),
            EntryStatus::Created => println!("{:<32} baseline created", r.name),
            EntryStatus::Drift(diffs) => {
                println!("{:<32} drift ({} differences)", r.name, diffs.len());
                for d in diffs.iter().take(8) {
                    println!("    {d}");
                }
                code = code.max(Status::Drift);
            }
            EntryStatus::ConfigError(e) => {
                println!("{:<32} config error: {e}", r.name);
                code = code.max(Status::Config);
            }
            EntryStatus::Broken(e) => {
                println!("{:<32} broken: {e}", r.name);
                code = code.max(Status::Config);
            }
        }
    }
    if results.is_empty() {
        eprintln!("error: no entries under {}", dir.display());
        return Status::Config.code();
    }
    code.code()
}
