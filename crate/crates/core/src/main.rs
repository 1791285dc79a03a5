use clap::{Parser, Subcommand};
use pvadirac::cli::{
    cmd_bracket, cmd_check, cmd_dirac, cmd_hierarchy, cmd_sl3, load_model, RunConfig,
};

/// Dirac reduction for local and non-local Poisson vertex algebras:
/// lambda-brackets, PVA axiom checks, constraint reduction, and the
/// Lenard-Magri recursion, in exact rational arithmetic.
#[derive(Parser)]
#[command(name = "pvadirac", version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify skewsymmetry, Jacobi, and pairwise compatibility.
    Check {
        /// Model file path, or `sl3min` for the built-in model.
        file: String,
        /// Restrict to one named structure.
        #[arg(long)]
        structure: Option<String>,
        /// Jacobi truncation depth (both lambda and mu).
        #[arg(long)]
        depth: Option<i64>,
        /// Emission mode.
        #[arg(long, value_parser = ["json", "text"])]
        emit: Option<String>,
    },
    /// Evaluate a lambda-bracket of two expressions.
    Bracket {
        file: String,
        #[arg(long)]
        structure: String,
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        /// Use the Dirac-modified bracket for this constraint set.
        #[arg(long)]
        dirac: Option<String>,
        #[arg(long, value_parser = ["json", "text"])]
        emit: Option<String>,
    },
    /// Dirac-modify a structure by constraints, optionally reducing to the
    /// quotient algebra.
    Dirac {
        file: String,
        #[arg(long)]
        structure: String,
        #[arg(long)]
        constraints: String,
        #[arg(long)]
        reduce: bool,
        #[arg(long, value_parser = ["json", "text"])]
        emit: Option<String>,
    },
    /// Run the Lenard-Magri recursion from a seed density.
    Hierarchy {
        file: String,
        #[arg(long)]
        h0: String,
        #[arg(long)]
        h1: String,
        #[arg(long)]
        seed: String,
        #[arg(long)]
        steps: usize,
        #[arg(long, value_parser = ["json", "text"])]
        emit: Option<String>,
    },
    /// Reproduce the built-in sl3 worked example end to end.
    Sl3 {
        #[arg(long, value_parser = ["json", "text"])]
        emit: Option<String>,
    },
}

fn main() {
    let args = Args::parse();
    let mut cfg = RunConfig::from_env();
    let code = match args.command {
        Command::Check {
            file,
            structure,
            depth,
            emit,
        } => {
            cfg.emit_json = emit.as_deref() == Some("json");
            if let Some(k) = depth {
                cfg.depth_l = k.max(2);
                cfg.depth_m = k.max(2);
                cfg.depth_d = cfg.depth_d.max(k + 2);
            }
            run(&cfg, |cfg| {
                let model = load_model(&file)?;
                cmd_check(&model, structure.as_deref(), cfg)
            })
        }
        Command::Bracket {
            file,
            structure,
            left,
            right,
            dirac,
            emit,
        } => {
            cfg.emit_json = emit.as_deref() == Some("json");
            run(&cfg, |cfg| {
                let model = load_model(&file)?;
                cmd_bracket(&model, &structure, &left, &right, dirac.as_deref(), cfg)
            })
        }
        Command::Dirac {
            file,
            structure,
            constraints,
            reduce,
            emit,
        } => {
            cfg.emit_json = emit.as_deref() == Some("json");
            run(&cfg, |cfg| {
                let model = load_model(&file)?;
                cmd_dirac(&model, &structure, &constraints, reduce, cfg)
            })
        }
        Command::Hierarchy {
            file,
            h0,
            h1,
            seed,
            steps,
            emit,
        } => {
            cfg.emit_json = emit.as_deref() == Some("json");
            run(&cfg, |cfg| {
                let model = load_model(&file)?;
                cmd_hierarchy(&model, &h0, &h1, &seed, steps, cfg)
            })
        }
        Command::Sl3 { emit } => {
            cfg.emit_json = emit.as_deref() == Some("json");
            run(&cfg, |cfg| cmd_sl3(cfg))
        }
    };
    std::process::exit(code);
}

fn run(
    cfg: &RunConfig,
    f: impl FnOnce(&RunConfig) -> Result<pvadirac::cli::CommandOutput, pvadirac::cli::CliError>,
) -> i32 {
    match f(cfg) {
        Ok(out) => {
            println!("{}", out.render(cfg));
            out.code
        }
        Err(e) => {
            eprintln!("error: {}", e);
            e.code()
        }
    }
}
