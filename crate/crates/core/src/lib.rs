//! Finite element laboratory for the singular mean-zero Moser-Trudinger functional
//! `∫_Ω |x|^(-2β) e^(α u²) dx` on planar domains with the origin on the boundary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod extremal;
pub mod fem;
pub mod field;
pub mod functional;
pub mod geometry;
pub mod green;
pub mod mesh;
pub mod profiles;
pub mod quadrature;
pub mod sparse;
pub mod sum;
pub mod test_family;

pub use error::{Result, SmtError};
pub use fem::{assemble_operators, Discretization, Operators};
pub use field::{Locator, ScalarField};
pub use functional::{
    dirichlet_energy, mean, mean_zero_project, mt_functional, normalize, FunctionalParams,
    FunctionalValue, Lab, Mode,
};
pub use geometry::Point;
pub use mesh::{build_mesh, BoundaryEdge, DomainSpec, Mesh, Shape};
pub use quadrature::{
    singular_quadrature, weighted_measure, QuadResult, QuadratureOptions, QuadratureRule, Region,
};
pub use extremal::{
    compare_bubble, concentration_profile, el_residual, maximize_subcritical, subcritical_sweep,
    surplus_check, truncation_energy_split, BubbleComparison, ExtremalReport, ExtremalSummary,
    Init, SolverOptions,
};
pub use green::{solve_green, A0Source, GreenReport, GreenSummary};
pub use profiles::{bubble_mass, moser_function, threshold, MoserParams, Normalization, ThresholdReport};
pub use test_family::{test_family_margin, test_function, MarginReport, TestFunction, TestFunctionParams};
