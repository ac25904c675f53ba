use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dicke_sim::{presets, resolve, run_scenario, CliError};

#[derive(Parser)]
#[command(name = "dicke-sim", version, about = "Superradiance and phase multistability scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset, optionally merged with a config file and overrides.
    Run {
        scenario: String,
        /// TOML file applied on top of the preset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `key=value` override, e.g. `numerics.truncation=30`; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory (overrides `output.directory`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for sweep points and grids.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// List the presets.
    List,
    /// Parse and check a config file, printing the merged result.
    Validate { config: PathBuf },
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::List => {
            for p in presets::CATALOG {
                println!("{:<28} {:<20} {}", p.name, format!("{:?}", p.analysis), p.description);
            }
            Ok(0)
        }
        Command::Validate { config } => {
            let text = read(&config)?;
            let cfg = resolve(None, Some(&text), &[])?;
            print!("{}", cfg.to_toml());
            Ok(0)
        }
        Command::Run { scenario, config, mut set, out, jobs } => {
            let text = config.as_ref().map(read).transpose()?;
            if let Some(dir) = out {
                let dir = dir.to_str().ok_or_else(|| CliError::Config("output path is not UTF-8".into()))?.to_owned();
                set.push(format!("output.directory={}", toml::Value::String(dir)));
            }
            let cfg = resolve(Some(&scenario), text.as_deref(), &set)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.max(1))
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            let summary = pool.install(|| run_scenario(&cfg))?;
            for c in &summary.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("wrote {} files to {}", summary.files.len(), cfg.output.directory);
            Ok(if summary.passed { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
