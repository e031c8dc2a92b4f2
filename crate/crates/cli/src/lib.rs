//! Library surface of the `gapforge` binary: config loading, analysis
//! execution with report emission, and report comparison. Kept as a library
//! so integration tests can drive runs in-process.

pub mod analyses;
pub mod compare;
pub mod config;

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::json;

use config::RunConfig;

/// Process exit codes: 0 = analysis complete (including fail certificates),
/// 2 = configuration error, 3 = numerical non-convergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    ConfigError = 2,
    NoConvergence = 3,
}

pub fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let cfg: RunConfig = serde_json::from_str(&text).context("parsing config")?;
    if cfg.schema != gapforge_core::report::SCHEMA_VERSION {
        anyhow::bail!("unsupported schema version {}", cfg.schema);
    }
    Ok(cfg)
}

/// Run a resolved config and write report.json, CSV tables and summary.txt
/// under the output directory. Nothing is written until the analysis has
/// completed.
pub fn run_config(cfg: &RunConfig, out_override: Option<&Path>) -> anyhow::Result<PathBuf> {
    let out = resolve_out_dir(cfg, out_override);
    let output = analyses::run_analysis(cfg)?;
    std::fs::create_dir_all(&out)
        .with_context(|| format!("creating output dir {}", out.display()))?;
    let report = json!({
        "schema": gapforge_core::report::SCHEMA_VERSION,
        "analysis": cfg.analysis.kind_name(),
        "config": cfg,
        "results": output.results,
    });
    std::fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    for t in &output.tables {
        std::fs::write(out.join(format!("{}.csv", t.name)), t.to_csv())?;
    }
    std::fs::write(out.join("summary.txt"), &output.summary)?;
    Ok(out)
}

/// Output directory resolution: CLI flag beats the `GAPFORGE_OUT`
/// environment variable beats the config value.
pub fn resolve_out_dir(cfg: &RunConfig, out_override: Option<&Path>) -> PathBuf {
    if let Some(p) = out_override {
        return p.to_path_buf();
    }
    if let Ok(env) = std::env::var("GAPFORGE_OUT") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    PathBuf::from(&cfg.output_dir)
}

/// Classify an error chain into an exit code: domain/config problems are
/// configuration errors, iteration failures are non-convergence.
pub fn classify_error(err: &anyhow::Error) -> ExitCode {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<gapforge_core::Error>() {
            return match core {
                gapforge_core::Error::NoConvergence { .. } | gapforge_core::Error::Solver(_) => {
                    ExitCode::NoConvergence
                }
                _ => ExitCode::ConfigError,
            };
        }
    }
    ExitCode::ConfigError
}
