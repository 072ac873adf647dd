use std::path::PathBuf;
use std::process::ExitCode;

use cerfkit::run::{map_cells, map_csv};
use cerfkit::scenario::Mode;
use cerfkit::{builtins, run_scenario, CliError, Overrides, Scenario};
use cerfkit_core::Exec;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cerfkit", version, about = "Critical points and bifurcations of reflection-symmetric fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or builtin name.
    Run {
        scenario: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        eig_tol: Option<f64>,
        #[arg(long)]
        seed_density: Option<usize>,
        #[arg(long)]
        sigma_step: Option<f64>,
        /// Disable the data-parallel solver.
        #[arg(long)]
        sequential: bool,
    },
    /// List builtin scenarios.
    List,
    /// Census map over the two free parameters of a scenario.
    Map {
        scenario: String,
        #[arg(long)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
}

fn exec(sequential: bool) -> Exec {
    if sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

fn out_dir(out: Option<PathBuf>, s: &Scenario) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from("out").join(&s.name))
}

fn main_inner(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::List => {
            for name in builtins::NAMES {
                println!("{name}");
            }
            Ok(0)
        }
        Command::Run {
            scenario,
            out,
            order,
            eig_tol,
            seed_density,
            sigma_step,
            sequential,
        } => {
            let ov = Overrides {
                order,
                eig_tol,
                seed_density,
                sigma_step,
                grid: None,
            };
            let s = Scenario::load(&scenario, &ov)?;
            let dir = out_dir(out, &s);
            let r = run_scenario(&s, &dir, exec(sequential))?;
            for f in &r.files {
                println!("wrote {}", f.display());
            }
            eprintln!("elapsed {:.3} s", r.elapsed);
            match r.passed {
                Some(true) => println!("{}: expected results reproduced", s.name),
                Some(false) => {
                    for m in &r.mismatches {
                        eprintln!("mismatch: {m}");
                    }
                }
                None => {}
            }
            for d in r.report["diagnostics"].as_array().into_iter().flatten() {
                eprintln!("diagnostic: {}", d["message"].as_str().unwrap_or_default());
            }
            Ok(r.exit_code())
        }
        Command::Map {
            scenario,
            grid,
            out,
            sequential,
        } => {
            let ov = Overrides {
                grid: Some(grid),
                ..Overrides::default()
            };
            let s = Scenario::load(&scenario, &ov)?;
            let Mode::Map(plan) = &s.mode else {
                return Err(CliError::Schema(
                    "map needs a scenario with a `map` block and exactly two free parameters".into(),
                ));
            };
            let dir = out_dir(out, &s);
            std::fs::create_dir_all(&dir).map_err(|e| CliError::Io {
                path: dir.display().to_string(),
                source: e,
            })?;
            let cells = map_cells(&s, plan, exec(sequential))?;
            let path = dir.join("map.csv");
            std::fs::write(&path, map_csv(plan, &cells)).map_err(|e| CliError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            println!("wrote {}", path.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
