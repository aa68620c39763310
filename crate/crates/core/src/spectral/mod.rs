//! Self-adjoint operators built from the phase projections and the Helmholtz
//! projections, their eigendecompositions, and the spectral measures they
//! induce.

pub mod eigen;
pub mod operator;
pub mod relation;
pub mod sobolev;

pub use eigen::{measures_from_eigen, eigendecompose, operator_moments, spectral_measures, Eigen};
pub use operator::{OperatorKind, Projection, Representation, SymmetricOperator, DENSE_CAP};
pub use relation::measure_relation_residual;
pub use sobolev::SobolevOperator;
