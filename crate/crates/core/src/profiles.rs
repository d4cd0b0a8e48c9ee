//! Closed-form profiles: the Moser family, the bubble φ₀ and the blow-up threshold.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SmtError};
use crate::field::ScalarField;
use crate::functional::{dirichlet_energy, mt_functional, normalize, FunctionalParams, Lab};
use crate::geometry::norm;
use crate::quadrature::gauss_legendre;

/// Cubic smoothstep: 0 for `s ≤ 0`, 1 for `s ≥ 1`, `3s² - 2s³` in between.
pub fn smoothstep(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        s * s * (3.0 - 2.0 * s)
    }
}

/// Radial cutoff vanishing on `B_δ` and equal to one outside `B_2δ`, `|∇φ| ≤ 1.5/δ`.
pub fn moser_cutoff(r: f64, delta: f64) -> f64 {
    smoothstep((r - delta) / delta)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoserParams {
    pub l: f64,
    pub delta: f64,
}

#[derive(Clone, Debug)]
pub struct MoserField {
    pub field: ScalarField,
    /// Mean-zero normalizer multiplying the cutoff.
    pub c_l: f64,
    pub energy: f64,
    /// `1 + C_l²/π ∫|∇φ|²`, using the discrete cutoff energy.
    pub predicted_energy: f64,
}

/// Unnormalized Moser profile without the cutoff term.
pub fn moser_core(r: f64, l: f64, delta: f64) -> f64 {
    let ll = (delta / l).ln();
    if r < l {
        (ll / PI).sqrt()
    } else if r < delta {
        (delta / r).ln() / (PI * ll).sqrt()
    } else {
        0.0
    }
}

/// Moser function on the mesh, with the cutoff coefficient chosen so the discrete mean vanishes.
pub fn moser_function(lab: &Lab, p: &MoserParams) -> Result<MoserField> {
    let MoserParams { l, delta } = *p;
    if !(l > 0.0 && delta > 0.0 && l < delta) {
        return Err(SmtError::Precondition(format!(
            "Moser parameters need 0 < l < δ, got l = {l}, δ = {delta}"
        )));
    }
    let clearance = lab.mesh().clearance();
    if 2.0 * delta > clearance * (1.0 + 1e-12) {
        return Err(SmtError::Precondition(format!(
            "B_2δ with δ = {delta} leaves the domain (clearance {clearance})"
        )));
    }
    let mesh = lab.mesh();
    let core: Vec<f64> = mesh.vertices.iter().map(|&x| moser_core(norm(x), l, delta)).collect();
    let cut: Vec<f64> = mesh.vertices.iter().map(|&x| moser_cutoff(norm(x), delta)).collect();
    let cut_int = lab.disc.integral(&cut);
    if !(cut_int > 0.0) {
        return Err(SmtError::Precondition("cutoff has no support in the domain".into()));
    }
    let c_l = -PI.sqrt() * lab.disc.integral(&core) / cut_int;
    let values: Vec<f64> = core
        .iter()
        .zip(&cut)
        .map(|(a, b)| a + c_l * b / PI.sqrt())
        .collect();
    let field = lab.field(values)?;
    let energy = dirichlet_energy(lab, &field);
    let predicted_energy = 1.0 + c_l * c_l / PI * lab.disc.energy(&cut);
    Ok(MoserField { field, c_l, energy, predicted_energy })
}

/// `π / (2(1 - β))`.
pub fn bubble_k(beta: f64) -> f64 {
    PI / (2.0 * (1.0 - beta))
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(SmtError::InvalidParameter(format!("β = {beta} lies outside (0, 1)")))
    }
}

/// `φ₀(x) = -(1/(2π(1-β))) log(1 + k|x|^(2(1-β)))`.
pub fn bubble_value(beta: f64, x: [f64; 2]) -> f64 {
    bubble_radial(beta, norm(x))
}

pub fn bubble_radial(beta: f64, r: f64) -> f64 {
    -(bubble_k(beta) * r.powf(2.0 * (1.0 - beta))).ln_1p() / (2.0 * PI * (1.0 - beta))
}

/// Whether an integral over the bubble is taken over the plane or the upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    FullPlane,
    HalfPlane,
}

impl Normalization {
    fn factor(self) -> f64 {
        match self {
            Normalization::FullPlane => 1.0,
            Normalization::HalfPlane => 0.5,
        }
    }
}

/// Composite Gauss-Legendre over `[a, b]` in panels no wider than `width`.
fn composite<F: Fn(f64) -> f64>(a: f64, b: f64, width: f64, f: F) -> f64 {
    let gl = gauss_legendre(20);
    let panels = (((b - a) / width).ceil() as usize).max(1);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let s: f64 = gl
            .0
            .iter()
            .zip(&gl.1)
            .map(|(x, w)| w * f(lo + 0.5 * h * (x + 1.0)))
            .sum();
        total += 0.5 * h * s;
    }
    total
}

/// Tail target used to choose the default truncation radius.
const MASS_TAIL_S: f64 = 1e4;

/// `∫ |x|^(-2β) e^(4π(1-β)φ₀) dx` over the plane (value 2) or half-plane (value 1).
pub fn bubble_mass(beta: f64, norm: Normalization) -> Result<f64> {
    check_beta(beta)?;
    let k = bubble_k(beta);
    let r_max = (MASS_TAIL_S / k).powf(1.0 / (2.0 - 2.0 * beta));
    bubble_mass_truncated(beta, r_max, norm)
}

/// As [`bubble_mass`] with an explicit truncation radius for the numerical part.
pub fn bubble_mass_truncated(beta: f64, r_max: f64, norm: Normalization) -> Result<f64> {
    check_beta(beta)?;
    let k = bubble_k(beta);
    let q = 2.0 - 2.0 * beta;
    let s_hi = k * r_max.powf(q);
    // The tail is replaced by its leading term 2/S, whose error is below 2/S².
    if 2.0 / (s_hi * s_hi) > 1e-7 {
        return Err(SmtError::Accuracy(format!(
            "truncation radius {r_max} leaves a tail error of {:.1e}",
            2.0 / (s_hi * s_hi)
        )));
    }
    let s_lo = 1e-10;
    let sigma_lo = (s_lo / k).ln() / q;
    let sigma_hi = r_max.ln();
    // In σ = log r the integrand is 2π r^(2-2β) (1 + k r^(2-2β))^(-2).
    let body = composite(sigma_lo, sigma_hi, 0.25 / q, |sigma| {
        let r = sigma.exp();
        let s = k * r.powf(q);
        2.0 * PI * r.powf(q) / ((1.0 + s) * (1.0 + s))
    });
    let head = 2.0 * s_lo;
    let tail = 2.0 / s_hi;
    Ok(norm.factor() * (head + body + tail))
}

/// `∫_{B_R} |∇φ₀|² dx` by radial quadrature.
pub fn bubble_energy(beta: f64, r: f64, norm: Normalization) -> Result<f64> {
    check_beta(beta)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(SmtError::InvalidParameter(format!("radius {r}")));
    }
    let k = bubble_k(beta);
    let q = 2.0 - 2.0 * beta;
    // r²|φ₀'|² = S²/(π²(1+S)²) with S = k r^(2-2β); the head below S = 1e-12 is negligible.
    let sigma_lo = (1e-12 / k).ln() / q;
    let sigma_hi = r.ln();
    let body = if sigma_hi > sigma_lo {
        composite(sigma_lo, sigma_hi, 0.25 / q, |sigma| {
            let s = k * (q * sigma).exp();
            2.0 * PI * s * s / (PI * PI * (1.0 + s) * (1.0 + s))
        })
    } else {
        0.0
    };
    Ok(norm.factor() * body)
}

/// The half-ball energy expansion `(1/π) log R + (log k)/(2π(1-β)) - 1/(2π(1-β))`.
pub fn energy_in_expansion(beta: f64, r: f64) -> f64 {
    let a = 1.0 / (2.0 * PI * (1.0 - beta));
    r.ln() / PI + a * bubble_k(beta).ln() - a
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub beta: f64,
    pub a0: f64,
    pub weighted_volume: f64,
    pub bubble_term: f64,
    pub total: f64,
}

/// `(π/(2(1-β))) e^(1 + 2π(1-β) A₀)`.
pub fn bubble_term(beta: f64, a0: f64) -> f64 {
    bubble_k(beta) * (1.0 + 2.0 * PI * (1.0 - beta) * a0).exp()
}

/// The upper bound for the supremum under blow-up.
pub fn threshold(lab: &Lab, beta: f64, a0: f64) -> Result<ThresholdReport> {
    check_beta(beta)?;
    let weighted_volume = lab.weighted_volume(beta)?;
    let bubble_term = bubble_term(beta, a0);
    Ok(ThresholdReport {
        beta,
        a0,
        weighted_volume,
        bubble_term,
        total: weighted_volume + bubble_term,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpnessRow {
    /// α as a multiple of the critical exponent `2π(1-β)`.
    pub alpha_factor: f64,
    pub alpha: f64,
    pub l: f64,
    #[serde(rename = "J")]
    pub functional: f64,
}

/// `J(normalize(u_l))` for every pair of `l` and α factor, rows ordered by factor then `l`.
pub fn sharpness_scan(lab: &Lab, beta: f64, delta: f64, ls: &[f64], factors: &[f64]) -> Result<Vec<SharpnessRow>> {
    check_beta(beta)?;
    let fields = ls
        .iter()
        .map(|&l| normalize(lab, &moser_function(lab, &MoserParams { l, delta })?.field))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(ls.len() * factors.len());
    for &f in factors {
        let alpha = f * 2.0 * PI * (1.0 - beta);
        for (&l, u) in ls.iter().zip(&fields) {
            let functional = mt_functional(lab, u, &FunctionalParams::explicit(beta, alpha))?.value()?;
            rows.push(SharpnessRow { alpha_factor: f, alpha, l, functional });
        }
    }
    Ok(rows)
}
