use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qswitch_cli::{execute, preset_text, write_outputs, ConfigError, ConfigLayers, RunError, RunSpec};

#[derive(Parser)]
#[command(name = "qswitch", version, about = "Cavity-QED Q-switch simulations")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Eigenvalue sweep over the gate detuning.
    Spectra(Common),
    /// Population maps from a bare cavity photon.
    Transient(Common),
    /// Adiabatic gate sweep that releases the stored excitation.
    Switch(Common),
    /// Leakage of the stored state with the gate off resonance.
    Quiescent(Common),
    /// Coupling and quality-factor estimates from device inputs.
    Estimate(Common),
    /// Check the parameters and print derived scales.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// Named preset: fig2, fig3, fig5, table1.
    #[arg(long)]
    preset: Option<String>,
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a single key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "qswitch-out")]
    out: PathBuf,
    /// Worker threads for grid workloads.
    #[arg(long)]
    threads: Option<usize>,
}

impl Sub {
    fn split(&self) -> (&'static str, &Common) {
        match self {
            Sub::Spectra(c) => ("spectra", c),
            Sub::Transient(c) => ("transient", c),
            Sub::Switch(c) => ("switch", c),
            Sub::Quiescent(c) => ("quiescent", c),
            Sub::Estimate(c) => ("estimate", c),
            Sub::Validate(c) => ("validate", c),
        }
    }
}

fn resolve(command: &str, args: &Common) -> Result<RunSpec, RunError> {
    let mut layers = ConfigLayers::new();
    if let Some(name) = &args.preset {
        layers.apply_text(&format!("preset {name}"), preset_text(name)?)?;
    }
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|source| RunError::Io { path: path.clone(), source })?;
        layers.apply_text(&path.display().to_string(), &text)?;
    }
    layers.set("command line", 0, "command", command)?;
    for assignment in &args.set {
        layers.apply_assignment(assignment)?;
    }
    Ok(layers.resolve()?)
}

fn run(cli: &Cli) -> Result<(), RunError> {
    let (command, args) = cli.command.split();
    let spec = resolve(command, args)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(ConfigError::Invalid("--threads must be at least 1".into()).into());
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| RunError::Numerical(format!("thread pool: {e}")))?;

    let start = Instant::now();
    let output = pool.install(|| execute(&spec))?;
    let wall = start.elapsed();
    for line in &output.diagnostics {
        eprintln!("{line}");
    }
    for line in &output.summary {
        println!("{line}");
    }
    write_outputs(&args.out, &spec, &output, wall)?;
    println!("wrote {} ({:.2} s)", args.out.display(), wall.as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
