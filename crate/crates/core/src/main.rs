use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rotor_activation::cli::{cmd_mesh_info, cmd_optimize, cmd_simulate, exit_code, CliError, ScheduleSource};
use rotor_activation::config::RunConfig;

#[derive(Parser)]
#[command(version, about = "Thermo-mechanical rotor start-up simulation and schedule optimization")]
struct Args {
    /// Run configuration (TOML).
    #[arg(short, long, global = true, default_value = "rotor.toml")]
    config: PathBuf,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Worker threads for concurrent forward evaluations.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print mesh counts, volume and patch areas.
    MeshInfo,
    /// Run the forward model for one schedule.
    Simulate {
        /// linear-ramp, heat-first or zero.
        #[arg(long, conflicts_with = "schedule", default_value = "linear-ramp")]
        guess: ScheduleSource,
        /// Controls CSV (step,time_s,T_e_C,omega_Hz,...).
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Optimize the start-up schedule.
    Optimize,
}

fn run(args: Args) -> Result<i32, CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(dir) = args.output {
        cfg.output.dir = dir;
    }
    if let Some(w) = args.workers {
        cfg.sqp.workers = Some(w);
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match args.command {
        Command::MeshInfo => {
            print!("{}", cmd_mesh_info(&cfg)?);
            Ok(0)
        }
        Command::Simulate { guess, schedule } => {
            let source = schedule.map_or(guess, ScheduleSource::Csv);
            let r = cmd_simulate(&cfg, &source)?;
            println!("J_MPa: {:.6}", r.record.j);
            println!("max_violation: {:.3e}", r.record.constraints.max_violation());
            println!("output: {}", r.out_dir.display());
            Ok(0)
        }
        Command::Optimize => {
            let r = cmd_optimize(&cfg)?;
            println!("status: {:?}", r.status);
            println!("iterations: {}", r.iterations);
            println!("evaluations: {}", r.evaluations);
            println!("J_initial_MPa: {:.6}", r.initial.j);
            if let Some(b) = &r.baseline {
                println!("J_linear_ramp_MPa: {:.6}", b.j);
            }
            println!("J_final_MPa: {:.6}", r.optimum.j);
            println!("max_violation: {:.3e}", r.optimum.constraints.max_violation());
            println!("output: {}", r.out_dir.display());
            Ok(exit_code(r.status))
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = match args.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(1)
        }
    }
}
