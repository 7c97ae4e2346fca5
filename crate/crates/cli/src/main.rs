//! Command-line interface for validating correspondence diagrams, emitting
//! colimit presentations and checking representations.

mod commands;
mod dsl;
mod lower;

use clap::{Parser, Subcommand};
use commands::Options;

#[derive(Parser)]
#[command(name = "corrlim", version, about = "finite-dimensional correspondence diagram engine")]
struct Cli {
    /// Validation tolerance for all defect checks.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Coherence truncation depth for preset infinite shapes.
    #[arg(long, global = true, default_value_t = 3)]
    depth: usize,
    /// Seed for the numerical decomposition.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the report to a file instead of stdout.
    #[arg(long, global = true)]
    out: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a diagram against the coherence laws.
    Validate { file: String },
    /// Emit the colimit presentation of a diagram.
    Colimit { file: String },
    /// Recognize a closed form for the colimit.
    Recognize { file: String },
    /// Concretely evaluate the colimit of a discrete, finite-group or
    /// chain diagram.
    Eval { file: String },
    /// Check a matrix representation of a presentation.
    Repcheck {
        presentation: String,
        assignment: String,
    },
    /// Validate a cone or transformation block declared in a file.
    ValidateCone {
        file: String,
        /// Name of the cone or transformation block.
        name: String,
    },
    /// Compose two transformation or cone blocks and validate the result.
    Compose {
        file: String,
        first: String,
        second: String,
    },
}

fn main() {
    let cli = Cli::parse();
    let opts = Options {
        tol: cli.tol,
        depth: cli.depth,
        seed: cli.seed,
    };
    let result = match &cli.command {
        Command::Validate { file } => commands::cmd_validate(file, &opts),
        Command::Colimit { file } => commands::cmd_colimit(file, &opts),
        Command::Recognize { file } => commands::cmd_recognize(file, &opts),
        Command::Eval { file } => commands::cmd_eval(file, &opts),
        Command::Repcheck {
            presentation,
            assignment,
        } => commands::cmd_repcheck(presentation, assignment, &opts),
        Command::ValidateCone { file, name } => commands::cmd_validate_cone(file, name, &opts),
        Command::Compose {
            file,
            first,
            second,
        } => commands::cmd_compose(file, first, second, &opts),
    };
    match result {
        Ok((value, code)) => {
            let text = format!("{}\n", serde_json::to_string_pretty(&value).unwrap());
            match &cli.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, &text) {
                        eprintln!("error: cannot write {path}: {e}");
                        std::process::exit(2);
                    }
                }
                None => print!("{text}"),
            }
            std::process::exit(code);
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
    }
}
