//! Glued Green-plus-bubble test fields and their margin over the blow-up threshold.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SmtError};
use crate::field::ScalarField;
use crate::functional::{dirichlet_energy, functional_with_rule, mean_zero_project, normalize, Lab};
use crate::geometry::norm;
use crate::green::{regular_part, GreenReport};
use crate::profiles::{bubble_k, bubble_radial, smoothstep, threshold, ThresholdReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionParams {
    pub eps: f64,
    pub beta: f64,
    pub delta: f64,
    /// `R = (-log ε)^(1/(1-β))`.
    pub r: f64,
    /// Inner gluing radius `Rε`.
    pub r_eps: f64,
    pub c: f64,
    pub c2: f64,
    pub b: f64,
    /// Leading-order value `1/(2π(1-β))` of `b`.
    pub b_leading: f64,
    pub a0: f64,
    /// Difference of the inner and outer pieces at `|x| = Rε`.
    pub jump: f64,
    /// Dirichlet energy of the projected field.
    pub energy: f64,
    /// Mean removed by the final projection.
    pub mean_removed: f64,
}

#[derive(Clone, Debug)]
pub struct TestFunction {
    pub field: ScalarField,
    /// Regular part ψ of the Green function used in the gluing.
    pub psi: ScalarField,
    pub params: TestFunctionParams,
}

/// `c²` with the lower-order terms dropped:
/// `-(1/π) log ε + (log k)/(2π(1-β)) - 1/(2π(1-β)) + A₀`.
pub fn test_c2(eps: f64, beta: f64, a0: f64) -> f64 {
    let a = 1.0 / (2.0 * PI * (1.0 - beta));
    -eps.ln() / PI + a * bubble_k(beta).ln() - a + a0
}

/// `R = (-log ε)^(1/(1-β))`.
pub fn test_radius(eps: f64, beta: f64) -> f64 {
    (-eps.ln()).powf(1.0 / (1.0 - beta))
}

/// Builds the three-piece field: bubble on `B_Rε`, Green function outside `B_2Rε`,
/// and a cubic blend of `G` with its singular part in between.
pub fn test_function(lab: &Lab, eps: f64, beta: f64, delta: f64, green: &GreenReport, a0: f64) -> Result<TestFunction> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(SmtError::InvalidParameter(format!("β = {beta} lies outside (0, 1)")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(SmtError::InvalidParameter(format!("ε = {eps} lies outside (0, 1)")));
    }
    let r = test_radius(eps, beta);
    let r_eps = r * eps;
    if r_eps >= 0.5 * delta {
        return Err(SmtError::InvalidParameter(format!(
            "Rε = {r_eps:.4} is not below δ/2 = {}; use a smaller ε",
            0.5 * delta
        )));
    }
    let c2 = test_c2(eps, beta, a0);
    if !(c2 > 0.0) {
        return Err(SmtError::InvalidParameter(format!("c² = {c2} is not positive; use a smaller ε")));
    }
    let c = c2.sqrt();
    let outer_at = |rad: f64| -rad.ln() / PI + a0;
    // b makes the inner and outer pieces agree at |x| = Rε.
    let b = outer_at(r_eps) - c2 - bubble_radial(beta, r);
    let inner = c + (bubble_radial(beta, r) + b) / c;
    let jump = inner - outer_at(r_eps) / c;

    let mesh = lab.mesh();
    let g = &green.field.values;
    let values: Vec<f64> = mesh
        .vertices
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let rad = norm(p);
            if rad < r_eps {
                c + (bubble_radial(beta, rad / eps) + b) / c
            } else if rad < 2.0 * r_eps {
                let eta = 1.0 - smoothstep((rad - r_eps) / r_eps);
                ((1.0 - eta) * g[i] + eta * outer_at(rad)) / c
            } else {
                g[i] / c
            }
        })
        .collect();
    let raw = lab.field(values)?;
    let mean_removed = lab.disc.mean(&raw.values);
    let field = mean_zero_project(lab, &raw);
    let energy = dirichlet_energy(lab, &field);
    let params = TestFunctionParams {
        eps,
        beta,
        delta,
        r,
        r_eps,
        c,
        c2,
        b,
        b_leading: 1.0 / (2.0 * PI * (1.0 - beta)),
        a0,
        jump,
        energy,
        mean_removed,
    };
    Ok(TestFunction { field, psi: regular_part(green), params })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub params: TestFunctionParams,
    pub threshold: ThresholdReport,
    /// Functional of the normalized test field minus the threshold.
    pub margin: f64,
    /// Functional of the unnormalized test field minus the threshold.
    pub margin_raw: f64,
    pub functional: f64,
    pub functional_raw: f64,
    /// `∫|x|^(-2β) G² dx`.
    pub weighted_green_l2: f64,
    /// Leading surplus `(2π(1-β)/c²) ∫|x|^(-2β) G²`.
    pub predicted_surplus: f64,
}

/// Margin of the test field over the threshold at the critical exponent `α = 2π(1-β)`.
pub fn test_family_margin(lab: &Lab, eps: f64, beta: f64, delta: f64, green: &GreenReport, a0: f64) -> Result<MarginReport> {
    let tf = test_function(lab, eps, beta, delta, green, a0)?;
    let thr = threshold(lab, beta, a0)?;
    let rule = lab.rule(beta)?;
    let alpha = 2.0 * PI * (1.0 - beta);
    let unit = normalize(lab, &tf.field)?;
    let functional = functional_with_rule(lab, &rule, &unit.values, alpha).value()?;
    let functional_raw = functional_with_rule(lab, &rule, &tf.field.values, alpha).value()?;
    let weighted_green_l2 = rule.integrate_field(lab.mesh(), &green.field.values, |x| x * x);
    let predicted_surplus = alpha / tf.params.c2 * weighted_green_l2;
    Ok(MarginReport {
        margin: functional - thr.total,
        margin_raw: functional_raw - thr.total,
        functional,
        functional_raw,
        weighted_green_l2,
        predicted_surplus,
        params: tf.params,
        threshold: thr,
    })
}
