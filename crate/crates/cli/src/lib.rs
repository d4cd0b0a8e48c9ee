//! Batch driver for the laboratory: runs one experiment from a config and writes
//! `manifest.json` plus plot-ready CSV and JSON files into the output directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
mod experiments;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

pub use config::{Experiment, ExperimentConfig, Overrides};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub target: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Versions {
    pub smtlab: &'static str,
    pub os: &'static str,
    pub arch: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub versions: Versions,
    pub threads: usize,
    pub timings: Vec<Timing>,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub outputs: Vec<String>,
}

/// Output directory, checks and timings collected while an experiment runs.
pub(crate) struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    dir: PathBuf,
    outputs: Vec<String>,
    checks: Vec<Check>,
    timings: Vec<Timing>,
}

impl<'a> Ctx<'a> {
    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, &s)
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool, value: f64, target: impl Into<String>) {
        self.checks.push(Check { name: name.into(), pass, value, target: target.into() });
    }

    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let v = f();
        self.timings.push(Timing { stage: stage.into(), seconds: t.elapsed().as_secs_f64() });
        v
    }
}

/// Seventeen significant digits, so values round-trip exactly.
pub(crate) fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn csv(header: &str, rows: &[Vec<String>]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{header}");
    for r in rows {
        let _ = writeln!(s, "{}", r.join(","));
    }
    s
}

/// Runs the configured experiment and writes every artifact, `manifest.json` last.
pub fn run(cfg: &ExperimentConfig) -> Result<Manifest> {
    let experiment = cfg.experiment.context("experiment: not set")?;
    std::fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("output_dir: cannot create {}", cfg.output_dir.display()))?;
    let mut ctx = Ctx { cfg, dir: cfg.output_dir.clone(), outputs: Vec::new(), checks: Vec::new(), timings: Vec::new() };
    experiments::dispatch(&mut ctx, experiment)?;
    let pass = ctx.checks.iter().all(|c| c.pass);
    let manifest = Manifest {
        experiment,
        config: cfg.clone(),
        versions: Versions { smtlab: env!("CARGO_PKG_VERSION"), os: std::env::consts::OS, arch: std::env::consts::ARCH },
        threads: rayon::current_num_threads(),
        timings: ctx.timings,
        checks: ctx.checks,
        pass,
        outputs: ctx.outputs,
    };
    let mut s = serde_json::to_string_pretty(&manifest)?;
    s.push('\n');
    let path = cfg.output_dir.join("manifest.json");
    std::fs::write(&path, s).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(manifest)
}

/// Loads a config file, applies the overrides and validates the result.
pub fn load_config(path: &Path, experiment: Experiment, overrides: &Overrides) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path)?.resolve(experiment, overrides)
}
