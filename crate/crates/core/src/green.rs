//! Neumann Green function with its pole at the boundary origin.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SmtError};
use crate::field::ScalarField;
use crate::functional::Lab;
use crate::geometry::norm;

/// Minimum number of vertices in the fit window.
pub const MIN_FIT_VERTICES: usize = 20;

#[derive(Clone, Debug)]
pub struct GreenReport {
    pub field: ScalarField,
    pub a0: f64,
    pub log_coefficient: f64,
    pub fit_window: (f64, f64),
    pub fit_vertices: usize,
    /// Root-mean-square misfit of `a log r + b` over the window.
    pub fit_rms: f64,
    pub residual_norm: f64,
    pub mean_value: f64,
}

/// Serializable summary of a [`GreenReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenSummary {
    #[serde(rename = "A0")]
    pub a0: f64,
    pub log_coefficient: f64,
    pub fit_window: [f64; 2],
    pub residual_norm: f64,
    pub mean: f64,
    pub field_csv: String,
}

impl GreenReport {
    pub fn summary(&self, field_csv: &str) -> GreenSummary {
        GreenSummary {
            a0: self.a0,
            log_coefficient: self.log_coefficient,
            fit_window: [self.fit_window.0, self.fit_window.1],
            residual_norm: self.residual_norm,
            mean: self.mean_value,
            field_csv: field_csv.to_owned(),
        }
    }
}

/// Default fit window `[3h, ρ/4]`, with `h` the mesh size at the origin and ρ the clearance.
pub fn default_fit_window(lab: &Lab) -> (f64, f64) {
    let mesh = lab.mesh();
    (3.0 * mesh.origin_mesh_size(), 0.25 * mesh.clearance())
}

/// Solves `stiffness(G, v) = v(0) - mass(1, v)/|Ω|` with zero mean and fits the expansion.
pub fn solve_green(lab: &Lab) -> Result<GreenReport> {
    solve_green_with_window(lab, default_fit_window(lab))
}

pub fn solve_green_with_window(lab: &Lab, window: (f64, f64)) -> Result<GreenReport> {
    let mesh = lab.mesh();
    let ops = &lab.disc.ops;
    let mut rhs: Vec<f64> = ops.load_one.iter().map(|m| -m / ops.area).collect();
    rhs[mesh.origin_vertex] += 1.0;
    let sol = lab.disc.solve_neumann(&rhs)?;
    if !(sol.relative_residual <= 1e-10) {
        return Err(SmtError::LinearSolve(format!(
            "Green solve residual {:.2e} exceeds 1e-10",
            sol.relative_residual
        )));
    }
    let field = lab.field(sol.values)?;
    let mean_value = lab.disc.mean(&field.values);
    let mut report = GreenReport {
        field,
        a0: f64::NAN,
        log_coefficient: f64::NAN,
        fit_window: window,
        fit_vertices: 0,
        fit_rms: f64::NAN,
        residual_norm: sol.relative_residual,
        mean_value,
    };
    extract_a0(&mut report, window)?;
    Ok(report)
}

/// Least-squares fit of `G ≈ a log r + b` over vertices with `r` in the window.
/// Stores `b` as A₀ and `a` as the log coefficient, and returns A₀.
pub fn extract_a0(report: &mut GreenReport, window: (f64, f64)) -> Result<f64> {
    let (r_min, r_max) = window;
    let mesh = &report.field.mesh;
    let samples: Vec<(f64, f64)> = mesh
        .vertices
        .iter()
        .zip(&report.field.values)
        .filter_map(|(&p, &g)| {
            let r = norm(p);
            (r >= r_min && r <= r_max && r > 0.0).then(|| (r.ln(), g))
        })
        .collect();
    if samples.len() < MIN_FIT_VERTICES {
        return Err(SmtError::FitWindow {
            count: samples.len(),
            required: MIN_FIT_VERTICES,
        });
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(SmtError::FitWindow {
            count: samples.len(),
            required: MIN_FIT_VERTICES,
        });
    }
    let a = sxy / sxx;
    let b = my - a * mx;
    let rms = (samples.iter().map(|s| (s.1 - a * s.0 - b).powi(2)).sum::<f64>() / n).sqrt();
    report.a0 = b;
    report.log_coefficient = a;
    report.fit_window = window;
    report.fit_vertices = samples.len();
    report.fit_rms = rms;
    Ok(b)
}

/// Regular part `ψ = G + (1/π) log r - A₀`, set to zero at the origin.
pub fn regular_part(report: &GreenReport) -> ScalarField {
    let mesh = report.field.mesh.clone();
    let values = mesh
        .vertices
        .iter()
        .zip(&report.field.values)
        .map(|(&p, &g)| {
            let r = norm(p);
            if r > 0.0 {
                g + r.ln() / PI - report.a0
            } else {
                0.0
            }
        })
        .collect();
    ScalarField { mesh, values }
}

/// Closed-form constant term of the Green function on a half-disc of radius δ.
pub fn half_disc_robin_constant(delta: f64) -> f64 {
    (delta.ln() - 0.75) / PI
}

/// Which value of A₀ enters the threshold and the test family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum A0Source {
    Fitted,
    /// Closed form, available for half-disc meshes only.
    HalfDiscClosedForm,
}

pub fn select_a0(lab: &Lab, report: &GreenReport, source: A0Source) -> Result<f64> {
    match source {
        A0Source::Fitted => Ok(report.a0),
        A0Source::HalfDiscClosedForm => match lab.mesh().spec.map(|s| s.shape) {
            Some(crate::mesh::Shape::HalfDisc { radius }) => Ok(half_disc_robin_constant(radius)),
            _ => Err(SmtError::Precondition(
                "the closed-form A₀ exists only for half-disc meshes".into(),
            )),
        },
    }
}
