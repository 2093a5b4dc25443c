use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coolsim::config::{load_config_file, validate_config};
use coolsim::{Recipe, RunError};
use coolsim_core::instances;

#[derive(Parser)]
#[command(name = "coolsim", version, about = "Exact simulation of cooling by repeated bath collisions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Overrides `global_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `output_dir`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a config file and report every problem found.
    Validate { config: PathBuf },
    /// Create or solve problem instances.
    #[command(subcommand)]
    Instance(InstanceCommand),
    /// List the available recipes.
    #[command(subcommand)]
    Recipes(RecipesCommand),
}

#[derive(Subcommand)]
enum InstanceCommand {
    /// Sample a Gaussian instance.
    New {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record the exact ground energy in the file.
        #[arg(long)]
        solve: bool,
    },
    /// Print the exact ground state of an instance file.
    Solve { file: PathBuf },
}

#[derive(Subcommand)]
enum RecipesCommand {
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn read(path: &std::path::Path) -> Result<String, RunError> {
    std::fs::read_to_string(path).map_err(|source| RunError::Io { path: path.to_path_buf(), source })
}

fn dispatch(command: Command) -> Result<(), RunError> {
    match command {
        Command::Run { config, seed, output } => {
            let mut cfg = load_config_file(&config, seed).map_err(RunError::Config)?;
            if let Some(dir) = output {
                cfg.output_dir = dir;
            }
            let report = coolsim::run_experiment(&cfg, coolsim::worker_count())?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}: wrote {} files to {}", cfg.experiment.name(), report.files.len(), cfg.output_dir.display());
            Ok(())
        }
        Command::Validate { config } => {
            let text = read(&config)?;
            let base = config.parent().map(PathBuf::from).unwrap_or_default();
            let diagnostics = validate_config(&text, &base);
            if diagnostics.is_empty() {
                println!("{}: ok", config.display());
                Ok(())
            } else {
                Err(RunError::Config(diagnostics))
            }
        }
        Command::Instance(InstanceCommand::New { n, seed, out, solve }) => {
            let inst = instances::sample_sk(n, seed)?;
            let ground = if solve { Some(instances::brute_force_ground(&inst)?.energy) } else { None };
            match out {
                Some(path) => {
                    coolsim::output::write_atomic(&path, instances::instance_to_toml(&inst, ground).as_bytes())
                }
                None => {
                    print!("{}", instances::instance_to_toml(&inst, ground));
                    Ok(())
                }
            }
        }
        Command::Instance(InstanceCommand::Solve { file }) => {
            let inst = instances::load_instance_file(&file)?.instance;
            let g = instances::brute_force_ground(&inst)?;
            let spins: Vec<String> = g.configuration.iter().map(|s| s.to_string()).collect();
            println!("ground_energy = {}", g.energy);
            println!("configuration = [{}]", spins.join(", "));
            println!("index = {}", g.index);
            println!("second_energy = {}", g.second_energy);
            println!("degenerate = {}", g.degenerate);
            Ok(())
        }
        Command::Recipes(RecipesCommand::List) => {
            for r in Recipe::ALL {
                println!("{:<18} {}", r.name(), r.description());
            }
            Ok(())
        }
    }
}
