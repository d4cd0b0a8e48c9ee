//! Subcritical maximizers via a damped fixed point on the Euler-Lagrange system,
//! and the blow-up diagnostics computed from them.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmtError};
use crate::fem::p1_gradients;
use crate::field::{Locator, ScalarField};
use crate::functional::{normalize, subcritical_alpha, Lab, SATURATION_EXPONENT};
use crate::geometry::{disc_clip_weighted_measure, sublevel_area};
use crate::profiles::{bubble_value, moser_function, MoserParams, ThresholdReport};
use crate::quadrature::QuadratureRule;
use crate::sum::ordered_sum;

/// Starting field for one run of the iteration.
#[derive(Clone, Debug)]
pub enum Init {
    /// Moser function with the given `l`; δ is half the mesh clearance.
    Moser { l: f64 },
    PreviousSolution(ScalarField),
    Custom(ScalarField),
}

impl Init {
    fn label(&self) -> String {
        match self {
            Init::Moser { l } => format!("moser(l={l:e})"),
            Init::PreviousSolution(_) => "previous_solution".into(),
            Init::Custom(_) => "custom".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub damping: f64,
    pub max_iterations: usize,
    pub el_tolerance: f64,
    /// Starting fields; empty means a Moser field with `l = 10 h` at the origin.
    pub inits: Vec<Init>,
    /// Extra Moser starts with `l` drawn log-uniformly from the seeded generator.
    pub random_restarts: usize,
    pub seed: u64,
    pub concentration_radii: Vec<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            max_iterations: 5000,
            el_tolerance: 1e-8,
            inits: Vec::new(),
            random_restarts: 0,
            seed: 0,
            concentration_radii: vec![1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.25, 0.5, 1.0],
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(SmtError::InvalidParameter(format!("damping {} outside (0, 1]", self.damping)));
        }
        if !(self.el_tolerance > 0.0) {
            return Err(SmtError::InvalidParameter("el_tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(SmtError::InvalidParameter("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of one started run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub init: String,
    pub functional: f64,
    pub el_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct ExtremalReport {
    pub u: ScalarField,
    pub summary: ExtremalSummary,
    pub residual_history: Vec<f64>,
}

/// Scalar content of an [`ExtremalReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalSummary {
    pub beta: f64,
    pub eps: f64,
    pub alpha: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub c_eps: f64,
    pub x_eps: [f64; 2],
    pub lambda_eps: f64,
    pub mean_f: f64,
    pub r_eps: f64,
    pub t_eps: f64,
    pub lambda_over_c2: f64,
    pub el_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub energy: f64,
    pub mean: f64,
    pub concentration: Vec<(f64, f64)>,
    pub runs: Vec<RunRecord>,
}

/// `(r_ε, t_ε)` from `λ_ε`, `c_ε`, β and ε.
pub fn blow_up_scales(lambda: f64, c: f64, beta: f64, eps: f64) -> (f64, f64) {
    let r = lambda.sqrt() / c * (-PI * (1.0 - beta - eps) * c * c).exp();
    (r, r.powf(1.0 / (1.0 - beta)))
}

struct Step {
    j: f64,
    lambda: f64,
    mean_f: f64,
    w: Vec<f64>,
    residual: f64,
}

/// Load vector `F_i = ∫|x|^(-2β) u e^(αu²) φ_i`, and `J = ∫|x|^(-2β) e^(αu²)`.
fn load_and_functional(lab: &Lab, rule: &QuadratureRule, u: &[f64], alpha: f64) -> (Vec<f64>, f64) {
    let mesh = lab.mesh();
    let local: Vec<([f64; 3], f64)> = (0..mesh.num_triangles())
        .into_par_iter()
        .with_min_len(512)
        .map(|t| {
            let [a, b, c] = mesh.triangles[t];
            let (ua, ub, uc) = (u[a], u[b], u[c]);
            let mut f = [0.0; 3];
            let mut j = 0.0;
            for p in &rule.points[rule.offsets[t]..rule.offsets[t + 1]] {
                let uq = p.bary[0] * ua + p.bary[1] * ub + p.bary[2] * uc;
                let e = p.weight * (alpha * uq * uq).exp();
                j += e;
                let g = e * uq;
                f[0] += g * p.bary[0];
                f[1] += g * p.bary[1];
                f[2] += g * p.bary[2];
            }
            (f, j)
        })
        .collect();
    let mut load = vec![0.0; mesh.num_vertices()];
    let mut js = Vec::with_capacity(local.len());
    for (t, (f, j)) in local.into_iter().enumerate() {
        let tri = mesh.triangles[t];
        for k in 0..3 {
            load[tri[k]] += f[k];
        }
        js.push(j);
    }
    (load, ordered_sum(&js))
}

fn check_saturation(u: &[f64], alpha: f64) -> Result<()> {
    let peak = u.iter().fold(0.0f64, |m, v| m.max(v * v));
    if alpha * peak > SATURATION_EXPONENT {
        return Err(SmtError::Saturated { exponent: alpha * peak });
    }
    Ok(())
}

fn el_step(lab: &Lab, rule: &QuadratureRule, u: &[f64], alpha: f64) -> Result<Step> {
    check_saturation(u, alpha)?;
    let (load, j) = load_and_functional(lab, rule, u, alpha);
    let lambda = ordered_sum(&u.iter().zip(&load).map(|(a, b)| a * b).collect::<Vec<_>>());
    if !(lambda > 0.0) {
        return Err(SmtError::DegenerateInput(format!("λ = {lambda} is not positive")));
    }
    let ops = &lab.disc.ops;
    let mean_f = ordered_sum(&load) / ops.area;
    let rhs: Vec<f64> = load
        .iter()
        .zip(&ops.load_one)
        .map(|(f, m)| (f - mean_f * m) / lambda)
        .collect();
    let w = lab.disc.solve_neumann(&rhs)?.values;
    let d: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a - b).collect();
    let residual = lab.disc.energy(&d).max(0.0).sqrt();
    Ok(Step { j, lambda, mean_f, w, residual })
}

/// Energy norm of the Euler-Lagrange defect, i.e. the dual norm of
/// `stiffness(u,·) - λ⁻¹(⟨f,·⟩ - f̄⟨1,·⟩)`.
pub fn el_residual(lab: &Lab, u: &ScalarField, beta: f64, eps: f64) -> Result<f64> {
    let alpha = subcritical_alpha(beta, eps);
    let rule = lab.rule(beta)?;
    Ok(el_step(lab, &rule, &u.values, alpha)?.residual)
}

struct Run {
    u: Vec<f64>,
    j: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

fn iterate(lab: &Lab, rule: &QuadratureRule, start: Vec<f64>, alpha: f64, opts: &SolverOptions) -> Result<Run> {
    let mut u = start;
    let mut history = Vec::new();
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let d = opts.damping;
    for it in 0..=opts.max_iterations {
        let step = el_step(lab, rule, &u, alpha)?;
        history.push(step.residual);
        if best.as_ref().is_none_or(|b| step.j > b.0) {
            best = Some((step.j, u.clone(), step.residual));
        }
        if step.residual < opts.el_tolerance || it == opts.max_iterations {
            let converged = step.residual < opts.el_tolerance;
            let (j, bu, br) = best.expect("at least one iterate");
            let (u, j, residual) = if converged || step.j >= j { (u, step.j, step.residual) } else { (bu, j, br) };
            return Ok(Run { u, j, residual, iterations: it, converged, history });
        }
        let mix: Vec<f64> = u.iter().zip(&step.w).map(|(a, b)| (1.0 - d) * a + d * b).collect();
        let f = lab.field(mix)?;
        u = normalize(lab, &f)?.values;
    }
    unreachable!("loop returns on the last iteration")
}

fn initial_fields(lab: &Lab, opts: &SolverOptions) -> Result<Vec<(String, Vec<f64>)>> {
    let h0 = lab.mesh().origin_mesh_size();
    let delta = 0.5 * lab.mesh().clearance();
    let mut inits = opts.inits.clone();
    if inits.is_empty() {
        inits.push(Init::Moser { l: 10.0 * h0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_restarts {
        let lo = (10.0 * h0).ln();
        let hi = (0.5 * delta).ln();
        inits.push(Init::Moser { l: rng.random_range(lo..hi).exp() });
    }
    inits
        .iter()
        .map(|init| {
            let field = match init {
                Init::Moser { l } => moser_function(lab, &MoserParams { l: *l, delta })?.field,
                Init::PreviousSolution(f) | Init::Custom(f) => f.clone(),
            };
            Ok((init.label(), normalize(lab, &field)?.values))
        })
        .collect()
}

/// Maximizes `∫|x|^(-2β) e^(2π(1-β-ε)u²)` over mean-zero fields of unit energy.
pub fn maximize_subcritical(lab: &Lab, beta: f64, eps: f64, opts: &SolverOptions) -> Result<ExtremalReport> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(SmtError::InvalidParameter(format!("β = {beta} lies outside (0, 1)")));
    }
    if !(eps > 0.0 && eps < 1.0 - beta) {
        return Err(SmtError::InvalidParameter(format!("ε = {eps} lies outside (0, {})", 1.0 - beta)));
    }
    opts.validate()?;
    let alpha = subcritical_alpha(beta, eps);
    let rule = lab.rule(beta)?;
    let mut runs = Vec::new();
    let mut best: Option<Run> = None;
    for (label, start) in initial_fields(lab, opts)? {
        let run = iterate(lab, &rule, start, alpha, opts)?;
        runs.push(RunRecord {
            init: label,
            functional: run.j,
            el_residual: run.residual,
            iterations: run.iterations,
            converged: run.converged,
        });
        if best.as_ref().is_none_or(|b| run.j > b.j) {
            best = Some(run);
        }
    }
    let run = best.expect("at least one start");
    let mut u = run.u;
    let (imax, _) = u
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
    if u[imax] < 0.0 {
        for v in &mut u {
            *v = -*v;
        }
    }
    let c = u[imax];
    let step = el_step(lab, &rule, &u, alpha)?;
    let (r_eps, t_eps) = blow_up_scales(step.lambda, c, beta, eps);
    let field = lab.field(u)?;
    let concentration = concentration_profile(lab, &field, &opts.concentration_radii)?;
    let summary = ExtremalSummary {
        beta,
        eps,
        alpha,
        j: step.j,
        c_eps: c,
        x_eps: lab.mesh().vertices[imax],
        lambda_eps: step.lambda,
        mean_f: step.mean_f,
        r_eps,
        t_eps,
        lambda_over_c2: step.lambda / (c * c),
        el_residual: step.residual,
        iterations: run.iterations,
        converged: run.converged,
        energy: lab.disc.energy(&field.values),
        mean: lab.disc.mean(&field.values),
        concentration,
        runs,
    };
    Ok(ExtremalReport { u: field, summary, residual_history: run.history })
}

/// Sweep over decreasing ε, each solve also started from the previous maximizer.
pub fn subcritical_sweep(lab: &Lab, beta: f64, eps_list: &[f64], opts: &SolverOptions) -> Result<Vec<ExtremalReport>> {
    let mut order: Vec<f64> = eps_list.to_vec();
    order.sort_by(|a, b| b.total_cmp(a));
    let mut out: Vec<ExtremalReport> = Vec::with_capacity(order.len());
    for eps in order {
        let mut o = opts.clone();
        if o.inits.is_empty() {
            o.inits.push(Init::Moser { l: 10.0 * lab.mesh().origin_mesh_size() });
        }
        if let Some(prev) = out.last() {
            o.inits.push(Init::PreviousSolution(prev.u.clone()));
        }
        out.push(maximize_subcritical(lab, beta, eps, &o)?);
    }
    Ok(out)
}

fn gradient_energy_density(lab: &Lab, u: &[f64], t: usize) -> f64 {
    let (g, _) = p1_gradients(lab.mesh(), t);
    let tri = lab.mesh().triangles[t];
    let gx = g[0][0] * u[tri[0]] + g[1][0] * u[tri[1]] + g[2][0] * u[tri[2]];
    let gy = g[0][1] * u[tri[0]] + g[1][1] * u[tri[1]] + g[2][1] * u[tri[2]];
    gx * gx + gy * gy
}

/// `(ρ, ∫_{B_ρ} |∇u|²)` for each radius, exact for piecewise-linear fields.
pub fn concentration_profile(lab: &Lab, u: &ScalarField, radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    if radii.iter().any(|&r| !(r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SmtError::InvalidParameter("radii must be positive and increasing".into()));
    }
    let mesh = lab.mesh();
    let dens: Vec<f64> = (0..mesh.num_triangles())
        .map(|t| gradient_energy_density(lab, &u.values, t))
        .collect();
    Ok(radii
        .iter()
        .map(|&rho| {
            let parts: Vec<f64> = (0..mesh.num_triangles())
                .into_par_iter()
                .with_min_len(1024)
                .map(|t| dens[t] * disc_clip_weighted_measure(&mesh.triangle_points(t), rho, 0.0))
                .collect();
            (rho, ordered_sum(&parts))
        })
        .collect())
}

/// Energies of `min(u, γc)` and `(u - γc)⁺`, exact for piecewise-linear `u`.
pub fn truncation_energy_split(lab: &Lab, u: &ScalarField, gamma: f64, c: f64) -> Result<(f64, f64)> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(SmtError::InvalidParameter(format!("γ = {gamma} lies outside (0, 1)")));
    }
    let mesh = lab.mesh();
    let level = gamma * c;
    let parts: Vec<(f64, f64)> = (0..mesh.num_triangles())
        .map(|t| {
            let dens = gradient_energy_density(lab, &u.values, t);
            let tri = mesh.triangles[t];
            let vals = [u.values[tri[0]], u.values[tri[1]], u.values[tri[2]]];
            let area = mesh.triangle_area(t);
            let below = sublevel_area(&mesh.triangle_points(t), vals, level).min(area);
            (dens * below, dens * (area - below))
        })
        .collect();
    let low = ordered_sum(&parts.iter().map(|p| p.0).collect::<Vec<_>>());
    let high = ordered_sum(&parts.iter().map(|p| p.1).collect::<Vec<_>>());
    Ok((low, high))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BubbleComparison {
    pub sup_error: f64,
    pub window_r: f64,
    pub samples: usize,
    pub clipped: usize,
    /// Energy fraction in `B_0.1`, expected to be at least 1/2 for a concentrated solve.
    pub fraction_01: f64,
    pub warnings: Vec<String>,
}

/// Sup-distance between `c(ũ(x_ε + t_ε x) - c)` and φ₀ over a polar sample grid in `|x| ≤ R`.
pub fn compare_bubble(lab: &Lab, report: &ExtremalReport, beta: f64, window_r: f64) -> Result<BubbleComparison> {
    if !(window_r > 0.0) {
        return Err(SmtError::InvalidParameter(format!("window radius {window_r}")));
    }
    let s = &report.summary;
    let mesh = lab.mesh();
    let locator = Locator::new(mesh);
    let hint = mesh
        .vertices
        .iter()
        .position(|&p| p == s.x_eps)
        .unwrap_or(mesh.origin_vertex);
    let (nr, na) = (24usize, 32usize);
    let mut points = vec![[0.0, 0.0]];
    for i in 1..=nr {
        let r = window_r * i as f64 / nr as f64;
        for j in 0..na {
            let th = 2.0 * PI * j as f64 / na as f64;
            points.push([r * th.cos(), r * th.sin()]);
        }
    }
    let mut sup: f64 = 0.0;
    let mut clipped = 0;
    for x in &points {
        let mut y = [s.x_eps[0] + s.t_eps * x[0], s.x_eps[1] + s.t_eps * x[1]];
        y[1] = y[1].abs();
        match locator.eval(&report.u.values, y, hint) {
            Some(v) => {
                let phi = s.c_eps * (v - s.c_eps);
                sup = sup.max((phi - bubble_value(beta, *x)).abs());
            }
            None => clipped += 1,
        }
    }
    let mut warnings = Vec::new();
    if clipped > 0 {
        warnings.push(format!("{clipped} sample points fell outside the domain and were skipped"));
    }
    let fraction_01 = concentration_profile(lab, &report.u, &[0.1])?[0].1;
    if fraction_01 < 0.5 {
        warnings.push(format!(
            "solve is not visibly concentrated: energy fraction in B_0.1 is {fraction_01:.3}"
        ));
    }
    Ok(BubbleComparison {
        sup_error: sup,
        window_r,
        samples: points.len() - clipped,
        clipped,
        fraction_01,
        warnings,
    })
}

/// `λ_ε/c_ε² - bubble_term`, expected to be non-positive in the limit.
pub fn surplus_check(report: &ExtremalReport, thresh: &ThresholdReport) -> f64 {
    report.summary.lambda_over_c2 - thresh.bubble_term
}

/// Largest ordinate of the u-field on the mesh, used by callers that need `c = max u`.
pub fn field_max(u: &ScalarField) -> f64 {
    u.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
