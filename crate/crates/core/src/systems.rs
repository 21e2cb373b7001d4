//! Benchmark systems with exact or reference densities of states.

use std::f64::consts::PI;

use thiserror::Error;

use crate::bcd::{BcdParams, GradientCoords};
use crate::linalg::{ComplexMatrix, LinalgError, C64};
use crate::lt::lt_dos;
use crate::model::{
    AnalyticBandModel, BandFn, Closure, DeformedSpectrum, Domain, HoppingTerm, LocalSpectrum, Model,
    ModelError, TightBindingModel,
};

/// Grid size of the tetrahedron reference used for graphene.
pub const GRAPHENE_REFERENCE_N: usize = 3000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("elliptic parameter m={0} outside [0, 1)")]
    Domain(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dos(#[from] crate::dos::DosError),
}

/// Either kind of model, behind the common interface.
#[derive(Debug, Clone)]
pub enum SystemModel {
    TightBinding(TightBindingModel),
    Bands(AnalyticBandModel),
}

impl SystemModel {
    fn inner(&self) -> &dyn Model {
        match self {
            SystemModel::TightBinding(m) => m,
            SystemModel::Bands(m) => m,
        }
    }
}

impl Model for SystemModel {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn num_bands(&self) -> usize {
        self.inner().num_bands()
    }
    fn domain(&self) -> Domain {
        self.inner().domain()
    }
    fn energies(&self, k: &[f64]) -> Vec<f64> {
        self.inner().energies(k)
    }
    fn local_spectrum(&self, k: &[f64], with_curvature: bool) -> LocalSpectrum {
        self.inner().local_spectrum(k, with_curvature)
    }
    fn deformed_resolvent_trace(&self, k: &[f64], h: &[f64], z: C64) -> Result<C64, LinalgError> {
        self.inner().deformed_resolvent_trace(k, h, z)
    }
    fn deformed_spectrum(&self, k: &[f64], h: &[f64]) -> Result<DeformedSpectrum, LinalgError> {
        self.inner().deformed_spectrum(k, h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

/// Source of the reference DOS of a system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactDos {
    Chain { t: f64 },
    /// Converged tetrahedron run at [`GRAPHENE_REFERENCE_N`].
    Graphene { t: f64 },
    FreeGas { d: usize, g_max: u32 },
    TwoBlock { gamma: f64, delta: f64, window: f64 },
}

#[derive(Debug, Clone)]
pub struct ReferenceSystem {
    pub name: String,
    pub model: SystemModel,
    pub exact: ExactDos,
    pub van_hove: Vec<f64>,
    pub benchmark: Vec<(Difficulty, f64)>,
    /// Contour-deformation parameters tuned for this system.
    pub bcd: BcdParams,
}

impl ReferenceSystem {
    /// Reference DOS at `e`, or `None` where no reference is available.
    ///
    /// For graphene this runs the tetrahedron method, several seconds per
    /// energy on one core.
    pub fn exact_dos(&self, e: f64) -> Option<f64> {
        match self.exact {
            ExactDos::Chain { t } => Some(chain_dos(e, t)),
            ExactDos::Graphene { .. } => lt_dos(&self.model, e, GRAPHENE_REFERENCE_N).ok().map(|r| r.value),
            ExactDos::FreeGas { d, g_max } => free_gas_dos(d, g_max, e),
            ExactDos::TwoBlock { gamma, delta, window } => {
                let mut v = 0.0;
                for s in [gamma, delta] {
                    if e.abs() < s * window {
                        v += 1.0 / s;
                    }
                }
                Some(v)
            }
        }
    }

    /// Whether [`exact_dos`](Self::exact_dos) is a closed form.
    pub fn has_closed_form(&self) -> bool {
        !matches!(self.exact, ExactDos::Graphene { .. })
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), SystemError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(SystemError::InvalidParameter(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn real(v: f64) -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[vec![v]]).expect("finite scalar")
}

/// `1 / (pi sqrt(4t^2 - E^2))` inside the band, zero outside.
pub fn chain_dos(e: f64, t: f64) -> f64 {
    let w = 2.0 * t;
    if e.abs() < w {
        1.0 / (PI * (w * w - e * e).sqrt())
    } else {
        0.0
    }
}

/// Monatomic chain `H_k = 2t cos(2 pi k)`.
pub fn make_chain(t: f64) -> Result<ReferenceSystem, SystemError> {
    check_positive("t", t)?;
    let model = TightBindingModel::new(
        1,
        1,
        vec![HoppingTerm::new([1, 0, 0], real(t)), HoppingTerm::new([-1, 0, 0], real(t))],
        Closure::Strict,
    )?;
    Ok(ReferenceSystem {
        name: "chain".into(),
        model: SystemModel::TightBinding(model),
        exact: ExactDos::Chain { t },
        van_hove: vec![-2.0 * t, 2.0 * t],
        benchmark: vec![
            (Difficulty::Easy, 0.0),
            (Difficulty::Medium, 1.9 * t),
            (Difficulty::Hard, 1.99 * t),
        ],
        bcd: BcdParams::new(0.1 / t, 0.3 * t)?.with_coords(GradientCoords::Radians),
    })
}

/// Two-band graphene, `H_12 = -t (1 + e^{2 pi i k_1} + e^{2 pi i k_2})`.
pub fn make_graphene(t: f64) -> Result<ReferenceSystem, SystemError> {
    check_positive("t", t)?;
    let hop = ComplexMatrix::from_real_rows(&[vec![0.0, -t], vec![0.0, 0.0]]).expect("finite");
    let onsite = ComplexMatrix::from_real_rows(&[vec![0.0, -t], vec![-t, 0.0]]).expect("finite");
    let model = TightBindingModel::new(
        2,
        2,
        vec![
            HoppingTerm::new([0, 0, 0], onsite),
            HoppingTerm::new([1, 0, 0], hop.clone()),
            HoppingTerm::new([0, 1, 0], hop),
        ],
        Closure::Complete,
    )?;
    Ok(ReferenceSystem {
        name: "graphene".into(),
        model: SystemModel::TightBinding(model),
        exact: ExactDos::Graphene { t },
        van_hove: vec![-3.0 * t, -t, 0.0, t, 3.0 * t],
        benchmark: vec![
            (Difficulty::Easy, 2.0 * t),
            (Difficulty::Medium, 0.1 * t),
            (Difficulty::Hard, 0.99 * t),
        ],
        // a wider window lets the deformation push the Dirac-cone states the wrong way
        bcd: BcdParams::new(0.1 / t, 0.1 * t)?.with_coords(GradientCoords::Radians),
    })
}

/// Variant of the closed-form graphene DOS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrapheneFormula {
    /// `F(x) = (1 + x)^2 - (x^2 - 1)^2 / 4`, the form found in the literature.
    Published,
    /// `F(x) = (1 + x)^2 - (x^2 - 1) / 4`.
    Alternate,
}

/// Closed-form two-band graphene DOS per cell (integrates to 2), in terms of
/// `K(m)` with parameter `m = Z_1 / Z_0`.
pub fn graphene_dos_closed_form(e: f64, t: f64, formula: GrapheneFormula) -> Option<f64> {
    let x = (e / t).abs();
    if x == 0.0 || x == 1.0 {
        return None;
    }
    if x >= 3.0 {
        return Some(0.0);
    }
    let f = match formula {
        GrapheneFormula::Published => (1.0 + x).powi(2) - (x * x - 1.0).powi(2) / 4.0,
        GrapheneFormula::Alternate => (1.0 + x).powi(2) - (x * x - 1.0) / 4.0,
    };
    let (z0, z1) = if x < 1.0 { (f, 4.0 * x) } else { (4.0 * x, f) };
    // 1 - z1/z0 cancels near |E| = t; the published form factors exactly
    let gap = match formula {
        GrapheneFormula::Published => {
            let d2 = (1.0 - x) * (1.0 - x);
            let c = 1.0 - (1.0 + x).powi(2) / 4.0;
            if x < 1.0 {
                d2 * c
            } else {
                -d2 * c
            }
        }
        GrapheneFormula::Alternate => z0 - z1,
    };
    let k = elliptic_k_complement(gap / z0).ok()?;
    Some(2.0 / (PI * PI) * x / t / z0.sqrt() * k)
}

/// Complete elliptic integral of the first kind, `K(m)` with parameter
/// `m = k^2`, by the arithmetic-geometric mean.
pub fn elliptic_k(m: f64) -> Result<f64, SystemError> {
    if !(0.0..1.0).contains(&m) {
        return Err(SystemError::Domain(m));
    }
    elliptic_k_complement(1.0 - m)
}

/// `K` as a function of the complementary parameter `1 - m`, which keeps
/// full precision close to the logarithmic singularity at `m = 1`.
pub fn elliptic_k_complement(mc: f64) -> Result<f64, SystemError> {
    if !(mc > 0.0 && mc <= 1.0) {
        return Err(SystemError::Domain(1.0 - mc));
    }
    let mut a = 1.0_f64;
    let mut b = mc.sqrt();
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    Ok(PI / (2.0 * a))
}

/// Free electron gas folded into the unit cell: bands `|k + G|^2` for all
/// integer `G` with `max |G_j| <= g_max`.
pub fn make_free_gas(d: usize, g_max: u32) -> Result<ReferenceSystem, SystemError> {
    if !(1..=3).contains(&d) {
        return Err(SystemError::InvalidParameter(format!("dimension {d} not in 1..=3")));
    }
    if g_max < 1 {
        return Err(SystemError::InvalidParameter("g_max must be at least 1".into()));
    }
    let g = g_max as i64;
    let side = (2 * g + 1) as usize;
    let mut bands = Vec::with_capacity(side.pow(d as u32));
    for idx in 0..side.pow(d as u32) {
        let mut rest = idx;
        let mut offset = vec![0.0; d];
        for o in offset.iter_mut().rev() {
            *o = ((rest % side) as i64 - g) as f64;
            rest /= side;
        }
        bands.push(BandFn::Parabolic { offset, scale: 1.0 });
    }
    let model = AnalyticBandModel::new(d, bands, Domain::Periodic)?;
    Ok(ReferenceSystem {
        name: format!("free-gas-{d}d"),
        model: SystemModel::Bands(model),
        exact: ExactDos::FreeGas { d, g_max },
        van_hove: vec![0.0, 0.25],
        benchmark: vec![(Difficulty::Easy, 0.1), (Difficulty::Hard, if d == 3 { 1.2 } else { 25.0 / 18.0 })],
        bcd: BcdParams::new(0.1, if d == 1 { 0.3 } else { 0.1 })?,
    })
}

/// Unfolded free-electron DOS: `1/sqrt(E)`, `pi`, `2 pi sqrt(E)` in 1/2/3D.
///
/// Folding into the cell does not change the DOS as long as the energy
/// sphere stays inside the cube of retained `G`, i.e. for
/// `E <= (g_max + 1/2)^2`. Beyond that the truncated model has no closed form.
pub fn free_gas_dos(d: usize, g_max: u32, e: f64) -> Option<f64> {
    if e < 0.0 {
        return Some(0.0);
    }
    let limit = (g_max as f64 + 0.5).powi(2);
    if e == 0.0 || e > limit {
        return None;
    }
    match d {
        1 => Some(1.0 / e.sqrt()),
        2 => Some(PI),
        3 => Some(2.0 * PI * e.sqrt()),
        _ => None,
    }
}

/// Half-width of the toy-model domain that makes truncation effects
/// negligible for energy window `delta_e`.
pub fn two_block_window(gamma: f64, delta: f64, delta_e: f64) -> f64 {
    10.0 * delta_e / gamma.min(delta)
}

/// `H(k) = diag(gamma k, -delta k)` on `[-window, window]`.
pub fn make_two_block_toy(gamma: f64, delta: f64, window: f64) -> Result<ReferenceSystem, SystemError> {
    check_positive("gamma", gamma)?;
    check_positive("delta", delta)?;
    check_positive("window", window)?;
    if gamma == delta {
        return Err(SystemError::InvalidParameter("gamma and delta must differ".into()));
    }
    let model = AnalyticBandModel::new(
        1,
        vec![
            BandFn::Linear {
                slope: vec![gamma],
                constant: 0.0,
            },
            BandFn::Linear {
                slope: vec![-delta],
                constant: 0.0,
            },
        ],
        Domain::Interval { half_width: window },
    )?;
    Ok(ReferenceSystem {
        name: "two-block".into(),
        model: SystemModel::Bands(model),
        exact: ExactDos::TwoBlock { gamma, delta, window },
        van_hove: vec![],
        benchmark: vec![(Difficulty::Hard, 0.0)],
        bcd: BcdParams::new(0.1, 0.3)?,
    })
}
