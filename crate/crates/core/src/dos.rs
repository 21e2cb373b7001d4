//! Result and parameter types shared by all DOS methods.

use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

use crate::linalg::LinalgError;
use crate::model::ModelError;

/// Lorentzian smearing width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmearingParams {
    eta: f64,
}

impl SmearingParams {
    pub fn new(eta: f64) -> Result<Self, DosError> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(DosError::InvalidParameter(format!("eta must be positive and finite, got {eta}")));
        }
        Ok(Self { eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `K_eta(x) = (1/pi) eta / (x^2 + eta^2)`.
    #[inline]
    pub fn kernel(&self, x: f64) -> f64 {
        self.eta / (PI * (x * x + self.eta * self.eta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ptr,
    PtrResolvent,
    Iai,
    Lt,
    Bcd,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::Ptr => "ptr",
            Method::PtrResolvent => "ptr-resolvent",
            Method::Iai => "iai",
            Method::Lt => "lt",
            Method::Bcd => "bcd",
        };
        f.write_str(s)
    }
}

/// Parameters a DOS value was computed with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodParams {
    Ptr { eta: f64, n: usize },
    Iai { eta: f64, abs_tol: f64, rel_tol: f64 },
    Lt { n: usize },
    /// `alpha` against fractional-coordinate gradients.
    Bcd { alpha: f64, delta_e: f64, eta: f64, n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DosEstimate {
    pub value: f64,
    /// Hamiltonian evaluations (matrix builds or band-set evaluations).
    pub n_evals: u64,
    /// Seconds spent inside the method.
    pub wall_time: f64,
    pub method: Method,
    pub params: MethodParams,
    /// Error estimate, for methods that produce one.
    pub error_estimate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DosError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("singular deformed resolvent at k={k:?}: {source}")]
    SingularShift {
        k: Vec<f64>,
        #[source]
        source: LinalgError,
    },
    #[error("subdivision budget exhausted; partial value {}", partial.value)]
    BudgetExceeded { partial: Box<DosEstimate> },
    #[error("method does not support this model: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub(crate) fn check_n(n: usize, min: usize) -> Result<(), DosError> {
    if n < min {
        return Err(DosError::InvalidParameter(format!("grid size N={n} below minimum {min}")));
    }
    Ok(())
}

pub(crate) fn check_energy(e: f64) -> Result<(), DosError> {
    if !e.is_finite() {
        return Err(DosError::InvalidParameter(format!("energy {e} is not finite")));
    }
    Ok(())
}
