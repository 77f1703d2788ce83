use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spinsim::scenario::{
    compare, entropy::ENTROPY_FILE, entropy_report, run, Preset, RunKind, ScenarioConfig, SpinTable,
};
use spinsim::Error;

#[derive(Parser)]
#[command(name = "spinsim", version, about = "Damped quantum and classical spin-chain dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write its trajectory dataset.
    Run(RunArgs),
    /// Compare the normalized spin trajectories of two datasets.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Report path; defaults to comparison.json next to the first file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Site-1 entropy table of a quantum dataset directory.
    Entropy { dir: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// fig1, fig2 or fig3.
    #[arg(long)]
    preset: Option<String>,
    /// Classical LL/LLG instead of the quantum propagator.
    #[arg(long)]
    classical: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn run_command(args: &RunArgs) -> Result<(), Error> {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), _) => ScenarioConfig::load(path)?,
        (None, Some(name)) => ScenarioConfig::from_preset(name.parse::<Preset>()?),
        (None, None) => return Err(Error::Config("either --config or --preset is required".into())),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let kind = if args.classical { RunKind::Classical } else { RunKind::Quantum };
    log::info!("running {} scenario: N = {}, S = {}", kind.name(), config.sites, config.spin);
    let dataset = run(&config, kind)?;
    for path in dataset.write_dir(&args.out)? {
        println!("wrote {}", path.display());
    }
    if let Some(last) = dataset.final_sample() {
        let s = config.spin.value();
        let sz: Vec<String> = last.sites.iter().map(|o| format!("{:.6}", o.sz / s)).collect();
        println!("t = {}: Sz/S = [{}]", last.t, sz.join(", "));
    }
    Ok(())
}

fn compare_command(a: &Path, b: &Path, out: Option<&Path>) -> Result<(), Error> {
    let report = compare(&SpinTable::read(a)?, &SpinTable::read(b)?)?;
    for s in &report.sites {
        println!(
            "site {}: max deviation {:.6e} at t = {}, rms [{:.3e}, {:.3e}, {:.3e}]",
            s.site, s.max_deviation, s.time_of_max, s.rms[0], s.rms[1], s.rms[2]
        );
    }
    println!("max deviation {:.6e} at t = {}", report.max_deviation, report.time_of_max);
    let path = match out {
        Some(p) => p.to_path_buf(),
        None => a.parent().unwrap_or(Path::new(".")).join("comparison.json"),
    };
    std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
    println!("wrote {}", path.display());
    Ok(())
}

fn entropy_command(dir: &Path) -> Result<(), Error> {
    let report = entropy_report(dir)?;
    let path = dir.join(ENTROPY_FILE);
    report.write_file(&path)?;
    println!("max entropy {:.6} bits at t = {}", report.max_entropy, report.argmax_time);
    println!(
        "min spin length {:.6} at t = {} (site {})",
        report.min_length, report.min_length_time, report.min_length_site
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run_command(args),
        Command::Compare { a, b, out } => compare_command(a, b, out.as_deref()),
        Command::Entropy { dir } => entropy_command(dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
