//! Shared fixtures for the kernel benchmarks in `benches/`.

use smtlab_core::{normalize, DomainSpec, Lab, MoserParams, ScalarField};

pub fn half_disc(level: u32) -> Lab {
    Lab::from_spec(&DomainSpec::half_disc(1.0, level)).expect("valid half-disc")
}

/// Normalized Moser field concentrated at the origin.
pub fn moser_field(lab: &Lab, l: f64) -> ScalarField {
    let m = smtlab_core::moser_function(lab, &MoserParams { l, delta: 0.4 }).expect("valid Moser parameters");
    normalize(lab, &m.field).expect("non-constant field")
}
