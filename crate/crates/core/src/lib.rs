pub mod bounds;
pub mod effective;
pub mod error;
pub mod io;
pub mod lattice;
pub mod measure;
pub mod microgeometry;
pub mod oracle;
pub mod scalar;
pub mod spectral;

pub use bounds::{first_order_region, second_order_region, BoundsRegion};
pub use effective::{effective_tensor, ContrastSet, EffectiveTensor, MeasureSet, Route};
pub use error::{Error, Result};
pub use lattice::{Field, FourierSymbols, Lattice, ScalarField, VectorField, C64};
pub use measure::{MeasureInfo, SpectralMeasure};
pub use microgeometry::{Medium, Phase};
pub use oracle::{effective_from_cell, SigmaField, SolverChoice};
pub use scalar::Real;

pub type Measure64 = SpectralMeasure<f64>;
pub type Measure32 = SpectralMeasure<f32>;
pub type Contrast64 = ContrastSet<f64>;
pub type Contrast32 = ContrastSet<f32>;
pub type Region64 = BoundsRegion<f64>;
pub type Tensor64 = EffectiveTensor<f64>;
