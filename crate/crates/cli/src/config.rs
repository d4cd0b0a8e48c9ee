//! Experiment configuration read from a TOML file and overridden from the command line.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use smtlab_core::{A0Source, DomainSpec, Shape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Experiment {
    Sharpness,
    SubcriticalSweep,
    Green,
    BubbleCheck,
    TestFamily,
    FullPipeline,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sharpness => "sharpness",
            Experiment::SubcriticalSweep => "subcritical_sweep",
            Experiment::Green => "green",
            Experiment::BubbleCheck => "bubble_check",
            Experiment::TestFamily => "test_family",
            Experiment::FullPipeline => "full_pipeline",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    HalfDisc,
    Rectangle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub shape: ShapeKind,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub width: Option<f64>,
    #[serde(default)]
    pub height: Option<f64>,
    pub level: u32,
    #[serde(default)]
    pub grading_exponent: Option<f64>,
    #[serde(default)]
    pub core_radius: Option<f64>,
    #[serde(default)]
    pub node_budget: Option<usize>,
}

impl DomainConfig {
    pub fn spec(&self) -> Result<DomainSpec> {
        let shape = match self.shape {
            ShapeKind::HalfDisc => Shape::HalfDisc { radius: self.radius.context("domain.radius is required for a half_disc")? },
            ShapeKind::Rectangle => Shape::Rectangle {
                width: self.width.context("domain.width is required for a rectangle")?,
                height: self.height.context("domain.height is required for a rectangle")?,
            },
        };
        let mut spec = DomainSpec::new(shape, self.level);
        if let Some(g) = self.grading_exponent {
            spec = spec.with_grading(g);
        }
        if let Some(c) = self.core_radius {
            spec = spec.with_core_radius(c);
        }
        if let Some(b) = self.node_budget {
            spec = spec.with_node_budget(b);
        }
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SharpnessConfig {
    pub delta: f64,
    pub ls: Vec<f64>,
    pub factors: Vec<f64>,
}

impl Default for SharpnessConfig {
    fn default() -> Self {
        Self { delta: 0.4, ls: vec![1e-2, 1e-3, 1e-4], factors: vec![0.8, 1.2] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub eps_list: Vec<f64>,
    pub damping: f64,
    pub max_iterations: usize,
    pub random_restarts: usize,
    /// Window radius for the bubble comparison.
    pub window_r: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { eps_list: vec![0.3, 0.2, 0.1], damping: 0.5, max_iterations: 5000, random_restarts: 0, window_r: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestFamilyConfig {
    pub eps_list: Vec<f64>,
    pub delta: f64,
    pub a0_source: A0Source,
}

impl Default for TestFamilyConfig {
    fn default() -> Self {
        Self { eps_list: vec![1e-3, 1e-4], delta: 1.0, a0_source: A0Source::Fitted }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BubbleConfig {
    pub radii: Vec<f64>,
}

impl Default for BubbleConfig {
    fn default() -> Self {
        Self { radii: vec![1e1, 1e2, 1e3, 1e4] }
    }
}

/// Pass/fail thresholds of the built-in checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub green_a0_rel: f64,
    pub green_log_coefficient_rel: f64,
    pub bubble_mass_abs: f64,
    pub bubble_energy_abs: f64,
    pub el_residual: f64,
    pub constraint_abs: f64,
    pub test_energy_abs: f64,
    pub threshold_slack: f64,
    pub sharpness_growth: f64,
    pub sharpness_flat: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            green_a0_rel: 0.02,
            green_log_coefficient_rel: 0.05,
            bubble_mass_abs: 1e-6,
            bubble_energy_abs: 5e-3,
            el_residual: 1e-8,
            constraint_abs: 1e-10,
            test_energy_abs: 0.02,
            threshold_slack: 0.05,
            sharpness_growth: 10.0,
            sharpness_flat: 1.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<Experiment>,
    pub domain: DomainConfig,
    pub beta: OneOrMany,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sharpness: SharpnessConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub test_family: TestFamilyConfig,
    #[serde(default)]
    pub bubble: BubbleConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("smtlab-out")
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub level: Option<u32>,
    pub beta: Option<f64>,
    pub eps_list: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow::anyhow!("invalid config: {e}"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_toml(&text)
    }

    /// Applies the overrides for `experiment` and validates the result.
    pub fn resolve(mut self, experiment: Experiment, o: &Overrides) -> Result<Self> {
        if let Some(e) = self.experiment {
            if e != experiment {
                bail!("experiment: config names `{}` but the command line asks for `{}`", e.name(), experiment.name());
            }
        }
        self.experiment = Some(experiment);
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        if let Some(l) = o.level {
            self.domain.level = l;
        }
        if let Some(b) = o.beta {
            self.beta = OneOrMany::One(b);
        }
        if let Some(list) = &o.eps_list {
            match experiment {
                Experiment::TestFamily => self.test_family.eps_list = list.clone(),
                _ => self.sweep.eps_list = list.clone(),
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn betas(&self) -> Vec<f64> {
        let mut b = self.beta.values();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    pub fn validate(&self) -> Result<()> {
        let betas = self.beta.values();
        if betas.is_empty() {
            bail!("beta: at least one value is required");
        }
        for b in &betas {
            if !(*b > 0.0 && *b < 1.0) {
                bail!("beta: value {b} lies outside (0, 1)");
            }
        }
        self.domain.spec()?;
        positive_list("sharpness.ls", &self.sharpness.ls)?;
        positive_list("sharpness.factors", &self.sharpness.factors)?;
        positive("sharpness.delta", self.sharpness.delta)?;
        positive_list("sweep.eps_list", &self.sweep.eps_list)?;
        let sweeps = matches!(self.experiment, Some(Experiment::SubcriticalSweep | Experiment::FullPipeline));
        for b in betas.iter().filter(|_| sweeps) {
            if let Some(e) = self.sweep.eps_list.iter().find(|&&e| e >= 1.0 - b) {
                bail!("sweep.eps_list: ε = {e} is not below 1 - β = {}", 1.0 - b);
            }
        }
        if !(self.sweep.damping > 0.0 && self.sweep.damping <= 1.0) {
            bail!("sweep.damping: {} lies outside (0, 1]", self.sweep.damping);
        }
        if self.sweep.max_iterations == 0 {
            bail!("sweep.max_iterations: must be positive");
        }
        positive("sweep.window_r", self.sweep.window_r)?;
        positive_list("test_family.eps_list", &self.test_family.eps_list)?;
        if self.test_family.eps_list.iter().any(|&e| e >= 1.0) {
            bail!("test_family.eps_list: values must lie in (0, 1)");
        }
        positive("test_family.delta", self.test_family.delta)?;
        positive_list("bubble.radii", &self.bubble.radii)?;
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.green_a0_rel", t.green_a0_rel),
            ("tolerances.green_log_coefficient_rel", t.green_log_coefficient_rel),
            ("tolerances.bubble_mass_abs", t.bubble_mass_abs),
            ("tolerances.bubble_energy_abs", t.bubble_energy_abs),
            ("tolerances.el_residual", t.el_residual),
            ("tolerances.constraint_abs", t.constraint_abs),
            ("tolerances.test_energy_abs", t.test_energy_abs),
            ("tolerances.sharpness_growth", t.sharpness_growth),
            ("tolerances.sharpness_flat", t.sharpness_flat),
        ] {
            positive(name, v)?;
        }
        if !(t.threshold_slack >= 0.0) {
            bail!("tolerances.threshold_slack: must be non-negative");
        }
        Ok(())
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        bail!("{name}: {v} is not a positive number")
    }
}

fn positive_list(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        bail!("{name}: at least one value is required");
    }
    v.iter().try_for_each(|&x| positive(name, x))
}

