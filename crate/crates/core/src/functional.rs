//! The singular Moser-Trudinger functional and the constraint operations.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SmtError};
use crate::fem::Discretization;
use crate::field::ScalarField;
use crate::mesh::{build_mesh, DomainSpec, Mesh};
use crate::quadrature::{weighted_measure, QuadratureOptions, QuadratureRule, Region};

/// Largest admissible value of `α u²` before the functional is reported as saturated.
pub const SATURATION_EXPONENT: f64 = 700.0;

/// A mesh, its operators, and quadrature rules cached per β.
#[derive(Debug)]
pub struct Lab {
    pub disc: Discretization,
    pub quad: QuadratureOptions,
    rules: Mutex<BTreeMap<u64, Arc<QuadratureRule>>>,
}

impl Lab {
    pub fn new(mesh: Mesh) -> Result<Self> {
        Self::with_options(mesh, QuadratureOptions::default())
    }

    pub fn with_options(mesh: Mesh, quad: QuadratureOptions) -> Result<Self> {
        Ok(Self {
            disc: Discretization::new(Arc::new(mesh))?,
            quad,
            rules: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn from_spec(spec: &DomainSpec) -> Result<Self> {
        Self::new(build_mesh(spec)?)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.disc.mesh
    }

    /// Quadrature rule for `|x|^(-2β)`; β = 0 gives the unweighted rule.
    pub fn rule(&self, beta: f64) -> Result<Arc<QuadratureRule>> {
        if !(0.0..1.0).contains(&beta) {
            return Err(SmtError::InvalidParameter(format!("β = {beta} lies outside [0, 1)")));
        }
        let key = beta.to_bits();
        if let Some(r) = self.rules.lock().expect("rule cache poisoned").get(&key) {
            return Ok(r.clone());
        }
        let rule = Arc::new(QuadratureRule::build_unchecked(self.mesh(), beta, self.quad));
        self.rules
            .lock()
            .expect("rule cache poisoned")
            .insert(key, rule.clone());
        Ok(rule)
    }

    pub fn field(&self, values: Vec<f64>) -> Result<ScalarField> {
        ScalarField::new(self.mesh().clone(), values)
    }

    pub fn field_from_fn<F: Fn([f64; 2]) -> f64>(&self, f: F) -> ScalarField {
        ScalarField::from_fn(self.mesh().clone(), f)
    }

    /// `∫_Ω |x|^(-2β) dx`.
    pub fn weighted_volume(&self, beta: f64) -> Result<f64> {
        let rule = self.rule(beta)?;
        weighted_measure(self.mesh(), &rule, Region::Whole)
    }

    fn check_field(&self, u: &ScalarField) -> Result<()> {
        if !Arc::ptr_eq(&u.mesh, self.mesh()) && u.values.len() != self.mesh().num_vertices() {
            return Err(SmtError::InvalidParameter("field lives on a different mesh".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Mode {
    ExplicitAlpha { alpha: f64 },
    Subcritical { eps: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalParams {
    pub beta: f64,
    pub mode: Mode,
}

impl FunctionalParams {
    pub fn explicit(beta: f64, alpha: f64) -> Self {
        Self { beta, mode: Mode::ExplicitAlpha { alpha } }
    }

    pub fn subcritical(beta: f64, eps: f64) -> Self {
        Self { beta, mode: Mode::Subcritical { eps } }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(SmtError::InvalidParameter(format!("β = {} lies outside (0, 1)", self.beta)));
        }
        match self.mode {
            Mode::ExplicitAlpha { alpha } if !(alpha > 0.0 && alpha.is_finite()) => Err(
                SmtError::InvalidParameter(format!("α = {alpha} must be positive")),
            ),
            Mode::Subcritical { eps } if !(eps > 0.0 && eps < 1.0 - self.beta) => {
                Err(SmtError::InvalidParameter(format!(
                    "ε = {eps} lies outside (0, {})",
                    1.0 - self.beta
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn alpha(&self) -> f64 {
        match self.mode {
            Mode::ExplicitAlpha { alpha } => alpha,
            Mode::Subcritical { eps } => subcritical_alpha(self.beta, eps),
        }
    }
}

/// `2π(1 - β - ε)`.
pub fn subcritical_alpha(beta: f64, eps: f64) -> f64 {
    2.0 * std::f64::consts::PI * (1.0 - beta - eps)
}

/// Value of the functional, or a saturation tag when `α u²` leaves the safe range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FunctionalValue {
    Finite(f64),
    Saturated { exponent: f64 },
}

impl FunctionalValue {
    pub fn value(self) -> Result<f64> {
        match self {
            FunctionalValue::Finite(v) => Ok(v),
            FunctionalValue::Saturated { exponent } => Err(SmtError::Saturated { exponent }),
        }
    }

    pub fn is_saturated(self) -> bool {
        matches!(self, FunctionalValue::Saturated { .. })
    }
}

/// `∫_Ω |x|^(-2β) e^(α u²) dx`, with the exponential taken at quadrature points.
pub fn mt_functional(lab: &Lab, u: &ScalarField, p: &FunctionalParams) -> Result<FunctionalValue> {
    p.validate()?;
    lab.check_field(u)?;
    let rule = lab.rule(p.beta)?;
    Ok(functional_with_rule(lab, &rule, &u.values, p.alpha()))
}

pub(crate) fn functional_with_rule(lab: &Lab, rule: &QuadratureRule, u: &[f64], alpha: f64) -> FunctionalValue {
    let peak = u.iter().fold(0.0f64, |m, v| m.max(v * v));
    let exponent = alpha * peak;
    if exponent > SATURATION_EXPONENT {
        return FunctionalValue::Saturated { exponent };
    }
    FunctionalValue::Finite(rule.integrate_field(lab.mesh(), u, |x| (alpha * x * x).exp()))
}

/// `∫_Ω |∇u|² dx`.
pub fn dirichlet_energy(lab: &Lab, u: &ScalarField) -> f64 {
    lab.disc.energy(&u.values)
}

/// `(1/|Ω|) ∫_Ω u dx`.
pub fn mean(lab: &Lab, u: &ScalarField) -> f64 {
    lab.disc.mean(&u.values)
}

pub fn mean_zero_project(lab: &Lab, u: &ScalarField) -> ScalarField {
    let m = lab.disc.mean(&u.values);
    ScalarField {
        mesh: u.mesh.clone(),
        values: u.values.iter().map(|v| v - m).collect(),
    }
}

/// Mean-zero field of unit Dirichlet energy, positively proportional to the projection of `u`.
pub fn normalize(lab: &Lab, u: &ScalarField) -> Result<ScalarField> {
    let mut v = mean_zero_project(lab, u);
    let scale = u.max_abs();
    let e = lab.disc.energy(&v.values);
    if v.max_abs() <= 1e-12 * scale || !(e > 0.0) {
        return Err(SmtError::DegenerateInput(
            "field is constant, its mean-zero projection vanishes".into(),
        ));
    }
    let s = e.sqrt();
    for x in &mut v.values {
        *x /= s;
    }
    Ok(v)
}
