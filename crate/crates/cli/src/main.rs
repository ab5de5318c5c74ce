//! Command-line front end: run sweep presets or JSON configurations, list
//! presets, fit a trace file, or run the engine cross-check.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use eitxpm_cli::{config, runner};

use config::{EngineKind, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "eitxpm",
    about = "EIT cross-phase modulation simulator: sweeps, detection emulation and fitting",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a JSON scenario configuration.
    Run {
        /// Preset name (see `list`) or path to a config JSON file.
        scenario: String,
        /// Output directory (default: ./out/<scenario id>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the random seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the trace engine.
        #[arg(long)]
        engine: Option<EngineKind>,
        /// Override the number of averaged shots.
        #[arg(long)]
        shots: Option<usize>,
    },
    /// List the built-in presets.
    List,
    /// Fit the temporal-profile model to a trace CSV and print the results.
    Fit {
        /// Path to a trace CSV (time_s, phase_rad, stderr_rad).
        trace: PathBuf,
    },
    /// Run the closed-form versus master-equation cross-check.
    Validate {
        /// Output directory (default: ./out/validation-lti-vs-bloch).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the random seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_scenario(name: &str) -> anyhow::Result<ScenarioConfig> {
    if let Some(preset) = config::preset(name) {
        return Ok(preset);
    }
    let path = PathBuf::from(name);
    if path.exists() {
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        let cfg: ScenarioConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        return Ok(cfg);
    }
    anyhow::bail!(
        "`{name}` is neither a preset ({}) nor a config file",
        config::PRESET_NAMES.join(", ")
    )
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            engine,
            shots,
        } => {
            let mut cfg = load_scenario(&scenario)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(engine) = engine {
                cfg.engine = engine;
            }
            if let Some(shots) = shots {
                cfg.detection.n_shots = shots;
            }
            let out_dir = out.unwrap_or_else(|| PathBuf::from("out").join(&cfg.id));
            let report = runner::run_scenario(&cfg, &out_dir)?;
            println!(
                "{}: {} points, {} failed -> {}",
                cfg.id,
                report.n_points,
                report.n_failed,
                report.out_dir.display()
            );
            if report.n_failed > 0 {
                std::process::exit(1);
            }
            Ok(())
        }
        Command::List => {
            for (name, description, derived) in config::list_presets() {
                match derived {
                    Some(parent) => {
                        println!("{name:24} {description} [derived-from: {parent}]")
                    }
                    None => println!("{name:24} {description}"),
                }
            }
            Ok(())
        }
        Command::Fit { trace } => {
            let file = std::fs::File::open(&trace)
                .with_context(|| format!("opening {}", trace.display()))?;
            let parsed = eitxpm::PhaseTrace::read_csv(std::io::BufReader::new(file))?;
            let fitted = eitxpm::fit::fit_phase_profile(&parsed, None, None)?;
            let ((rise, rise_sigma), (fall, fall_sigma)) = eitxpm::fit::rise_fall_times(&fitted)?;
            println!("converged      : {} ({} iterations)", fitted.converged, fitted.n_iterations);
            println!("amplitude      : {:.6e} rad s", fitted.amplitude);
            println!("tau_s (rise)   : {:.4e} s +- {:.2e}", rise, rise_sigma);
            println!("tau (fall)     : {:.4e} s +- {:.2e}", fall, fall_sigma);
            println!("t0             : {:.6e} s", fitted.t0);
            println!("baseline       : {:.6e} rad", fitted.baseline);
            println!("residual rms   : {:.3e} rad", fitted.residual_rms);
            if let Some(direct) = eitxpm::fit::one_over_e_time(&parsed) {
                println!("1/e crossing   : {:.4e} s", direct);
            }
            for w in &fitted.warnings {
                println!("warning        : {w}");
            }
            Ok(())
        }
        Command::Validate { out, seed } => {
            let mut cfg = config::preset("validation-lti-vs-bloch").expect("preset exists");
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let out_dir = out.unwrap_or_else(|| PathBuf::from("out").join(&cfg.id));
            std::fs::create_dir_all(&out_dir)?;
            let report = runner::run_scenario(&cfg, &out_dir)?;
            if report.n_failed > 0 {
                std::process::exit(1);
            }
            Ok(())
        }
    }
}
