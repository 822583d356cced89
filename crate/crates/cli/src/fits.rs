//! On-disk cache of Marcum approximation fits keyed by Rice factor and mode.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use keyhole::specfun::{fit_exponential_approx, ApproxFit, FitMode};
use serde::{Deserialize, Serialize};

use crate::config::SCHEMA_VERSION;

#[derive(Debug, Default, Serialize, Deserialize)]
struct FitTable {
    schema_version: u32,
    fits: BTreeMap<String, ApproxFit>,
}

fn key(k: f64, mode: FitMode) -> String {
    let mode = match mode {
        FitMode::Free => "free",
        FitMode::FixedTwo => "fixed_two",
    };
    format!("k={k}/{mode}")
}

/// Returns the cached fit or computes and stores it. The flag is true on a cache hit.
pub fn cached_fit(cache: &Path, k: f64, mode: FitMode) -> anyhow::Result<(ApproxFit, bool)> {
    let mut table = if cache.exists() {
        let text = std::fs::read_to_string(cache).with_context(|| format!("reading {}", cache.display()))?;
        serde_json::from_str::<FitTable>(&text).with_context(|| format!("parsing fit cache {}", cache.display()))?
    } else {
        FitTable {
            schema_version: SCHEMA_VERSION,
            fits: BTreeMap::new(),
        }
    };
    let key = key(k, mode);
    if let Some(fit) = table.fits.get(&key) {
        return Ok((*fit, true));
    }
    let fit = fit_exponential_approx(k, mode)?;
    table.fits.insert(key, fit);
    if let Some(dir) = cache.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(cache, serde_json::to_string_pretty(&table)? + "\n").with_context(|| format!("writing {}", cache.display()))?;
    Ok((fit, false))
}

/// Printed form of a fit.
pub fn fit_json(k: f64, fit: &ApproxFit) -> String {
    let doc = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "k": k,
        "mode": fit.mode,
        "nu": fit.nu,
        "mu": fit.mu,
        "nu2": fit.nu2,
        "sup_error": fit.sup_error,
    });
    serde_json::to_string_pretty(&doc).expect("plain JSON")
}
