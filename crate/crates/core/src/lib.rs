//! Densities of states for periodic Hamiltonians.
//!
//! Four integrators share one [`model::Model`] interface:
//!
//! * [`ptr`]: Lorentzian-smeared periodic trapezoidal rule,
//! * [`iai`]: iterated adaptive Gauss-Kronrod quadrature of the smeared DOS,
//! * [`lt`]: linear tetrahedron method,
//! * [`bcd`]: Brillouin complex deformation, plus its failure diagnostic.
//!
//! Wavevectors are fractional coordinates on `[-1/2, 1/2)^d`.

pub mod bcd;
pub mod dos;
pub mod grid;
pub mod iai;
pub mod linalg;
pub mod lt;
pub mod model;
pub mod ptr;
pub mod systems;
pub mod wannier;

pub use dos::{DosError, DosEstimate, Method, MethodParams, SmearingParams};
pub use linalg::{ComplexMatrix, C64};
pub use model::{AnalyticBandModel, KPoint, Model, TightBindingModel};
