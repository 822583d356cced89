use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use keyhole::specfun::FitMode;
use keyhole_cli::fits::{cached_fit, fit_json};
use keyhole_cli::{csv_bytes, load_preset, output_path, preset_names, preset_text, run_experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "keyhole", version, about = "Connectivity through boundary gaps: analytic sweeps and Monte Carlo checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write its CSV.
    Run {
        /// JSON config file.
        config: Option<PathBuf>,
        /// Use a bundled preset instead of a file.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Output file; overrides the config's `output`.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the Monte Carlo trial count.
        #[arg(long)]
        trials: Option<u64>,
        /// Skip the Monte Carlo columns.
        #[arg(long)]
        no_mc: bool,
    },
    /// Fit exp(-e^nu b^mu) to the Marcum Q curve for a Rice factor.
    FitMarcum {
        #[arg(long)]
        k: f64,
        /// Pin the exponent to 2.
        #[arg(long)]
        fixed_two: bool,
        /// Fit cache file.
        #[arg(long, default_value = "marcum_fits.json")]
        cache: PathBuf,
    },
    /// List or print the bundled presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Trace one ray through an escape geometry and print its path as JSON.
    Trace {
        /// Config file or preset name.
        #[arg(long)]
        geometry: String,
        /// Comma-separated start point; node 0 if omitted.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        origin: Option<Vec<f64>>,
        /// Inclination from the wall normal in radians, positive towards +x.
        #[arg(long, allow_hyphen_values = true)]
        angle: f64,
        /// Azimuth in radians (3-D only).
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        azimuth: f64,
        #[arg(long, default_value_t = 6)]
        max_reflections: usize,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Show { name: String },
}

fn load(config: Option<PathBuf>, preset: Option<String>) -> anyhow::Result<ExperimentConfig> {
    match (config, preset) {
        (Some(path), _) => Ok(ExperimentConfig::load(&path)?),
        (None, Some(name)) => Ok(load_preset(&name)?),
        (None, None) => anyhow::bail!("give a config file or --preset"),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            config,
            preset,
            output,
            trials,
            no_mc,
        } => {
            let mut cfg = load(config, preset)?;
            if let Some(mc) = cfg.mc.as_mut() {
                if let Some(t) = trials {
                    anyhow::ensure!(t > 0, "--trials must be at least 1");
                    mc.trials = t;
                }
                if no_mc {
                    mc.enabled = false;
                }
            }
            let rows = run_experiment(&cfg)?;
            let bytes = csv_bytes(&cfg, &rows)?;
            let path = match output {
                Some(p) => p,
                None => output_path(cfg.output.as_deref().unwrap_or(&format!("{}.csv", cfg.name))),
            };
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            let flagged = rows.iter().filter(|r| r.status != "ok").count();
            eprintln!("wrote {} rows to {} ({flagged} flagged)", rows.len(), path.display());
        }
        Command::FitMarcum { k, fixed_two, cache } => {
            let mode = if fixed_two { FitMode::FixedTwo } else { FitMode::Free };
            let cache = output_path(&cache.to_string_lossy());
            let (fit, hit) = cached_fit(&cache, k, mode)?;
            eprintln!("{} {}", if hit { "cache hit in" } else { "fitted and stored in" }, cache.display());
            println!("{}", fit_json(k, &fit));
        }
        Command::Presets { action } => match action {
            PresetAction::List => {
                for name in preset_names() {
                    println!("{name}");
                }
            }
            PresetAction::Show { name } => {
                let text = preset_text(&name).with_context(|| format!("unknown preset {name}"))?;
                print!("{text}");
            }
        },
        Command::Trace {
            geometry,
            origin,
            angle,
            azimuth,
            max_reflections,
        } => {
            let cfg = if preset_text(&geometry).is_some() {
                load_preset(&geometry)?
            } else {
                ExperimentConfig::load(geometry.as_ref())?
            };
            let v = keyhole_cli::trace::trace_json(&cfg, origin.as_deref(), angle, azimuth, max_reflections)?;
            println!("{}", serde_json::to_string_pretty(&v)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
