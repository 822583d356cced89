//! Experiment runner: JSON configs in, deterministic CSV out.

pub mod config;
pub mod fits;
pub mod presets;
pub mod run;
pub mod trace;

pub use config::{ConfigError, ExperimentConfig, PointGeometry, ScenarioKind, SweepParam};
pub use presets::{load_preset, preset_names, preset_text};
pub use run::{csv_bytes, run_experiment, write_csv, Row};

/// Environment variable that redirects relative output paths.
pub const OUTPUT_DIR_ENV: &str = "KEYHOLE_OUTPUT_DIR";

/// Resolves `relative` against the output directory override, if set.
pub fn output_path(relative: &str) -> std::path::PathBuf {
    let p = std::path::Path::new(relative);
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if p.is_relative() => std::path::Path::new(&dir).join(p),
        _ => p.to_path_buf(),
    }
}
