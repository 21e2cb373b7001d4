//! Periodic Hamiltonians evaluable at real and complex wavevectors.
//!
//! All wavevectors are fractional coordinates on the cube `[-1/2, 1/2)^d` and
//! Fourier phases are `exp(2 pi i k.R)`. A complex wavevector is written
//! `k + i h` with `h` the imaginary shift.
//!
//! Both [`TightBindingModel`] and [`AnalyticBandModel`] implement [`Model`],
//! the interface every integrator is written against.

use std::f64::consts::PI;

use thiserror::Error;

use crate::linalg::{general_eigvals, hermitian_eig, resolvent_trace, ComplexMatrix, LinalgError, C64};

/// Default cap on `|h_j|` for [`KPoint::with_shift`].
pub const DEFAULT_SHIFT_CAP: f64 = 0.25;

/// Default tolerance for `H_{-R} = H_R^H` checks, in energy units.
pub const HERMITICITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension {0} not in 1..=3")]
    Dimension(usize),
    #[error("model needs at least one orbital")]
    NoOrbitals,
    #[error("hopping matrix for R={r:?} is {rows}x{cols}, expected {norb}x{norb}")]
    Shape {
        r: [i32; 3],
        rows: usize,
        cols: usize,
        norb: usize,
    },
    #[error("R vector {0:?} appears more than once")]
    DuplicateR([i32; 3]),
    #[error("R vector {0:?} has nonzero components beyond the model dimension")]
    ExtraComponents([i32; 3]),
    #[error("degeneracy weight {weight} for R={r:?} is not positive")]
    Weight { r: [i32; 3], weight: f64 },
    #[error("strict closure: no term for -R with R={0:?}")]
    MissingPartner([i32; 3]),
    #[error("Hermiticity violated at R={r:?}, element ({m}, {n}): deviation {deviation:e}")]
    HermiticityViolation {
        r: [i32; 3],
        m: usize,
        n: usize,
        deviation: f64,
    },
    #[error("wavevector has {got} components, model dimension is {expected}")]
    KDimension { expected: usize, got: usize },
    #[error("non-finite wavevector component")]
    NonFinite,
    #[error("imaginary shift {shift} exceeds the cap {cap}")]
    ShiftCap { shift: f64, cap: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A point of the Brillouin zone, optionally with an imaginary shift.
#[derive(Debug, Clone, PartialEq)]
pub struct KPoint {
    frac: Vec<f64>,
    shift: Option<Vec<f64>>,
}

impl KPoint {
    pub fn new(frac: &[f64]) -> Result<Self, ModelError> {
        check_components(frac)?;
        Ok(Self {
            frac: frac.to_vec(),
            shift: None,
        })
    }

    /// Complex point `frac + i shift`, with `|shift_j| <= DEFAULT_SHIFT_CAP`.
    pub fn with_shift(frac: &[f64], shift: &[f64]) -> Result<Self, ModelError> {
        Self::with_shift_capped(frac, shift, DEFAULT_SHIFT_CAP)
    }

    pub fn with_shift_capped(frac: &[f64], shift: &[f64], cap: f64) -> Result<Self, ModelError> {
        check_components(frac)?;
        check_components(shift)?;
        if shift.len() != frac.len() {
            return Err(ModelError::KDimension {
                expected: frac.len(),
                got: shift.len(),
            });
        }
        if let Some(&big) = shift.iter().find(|h| h.abs() > cap) {
            return Err(ModelError::ShiftCap { shift: big, cap });
        }
        Ok(Self {
            frac: frac.to_vec(),
            shift: Some(shift.to_vec()),
        })
    }

    pub fn frac(&self) -> &[f64] {
        &self.frac
    }

    pub fn shift(&self) -> Option<&[f64]> {
        self.shift.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.frac.len()
    }
}

fn check_components(v: &[f64]) -> Result<(), ModelError> {
    if v.is_empty() || v.len() > 3 {
        return Err(ModelError::Dimension(v.len()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    Ok(())
}

/// Integration domain of a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// Unit cube `[-1/2, 1/2)^d`, normalized by its (unit) volume.
    Periodic,
    /// Non-periodic interval `[-half_width, half_width]` (1D only),
    /// unnormalized measure `dk`.
    Interval { half_width: f64 },
}

/// Spectral data at a real wavevector.
#[derive(Debug, Clone)]
pub struct LocalSpectrum {
    /// Band energies.
    pub energies: Vec<f64>,
    /// `<psi_m| d_j H |psi_n>` for each direction `j`.
    pub velocity: Vec<ComplexMatrix>,
    /// `<psi_n| d_i d_j H |psi_n>` per band, `d x d` row-major. Empty unless
    /// curvature was requested.
    pub curvature: Vec<Vec<f64>>,
}

/// Eigenvalues of the Hamiltonian at a complex wavevector.
#[derive(Debug, Clone)]
pub enum DeformedSpectrum {
    /// Entry `n` continues band `n` of the real spectrum.
    Indexed(Vec<C64>),
    /// No band identity available; callers pair by proximity.
    Unordered(Vec<C64>),
}

/// The interface every DOS method is written against.
pub trait Model: Send + Sync {
    fn dim(&self) -> usize;

    fn num_bands(&self) -> usize;

    fn domain(&self) -> Domain {
        Domain::Periodic
    }

    /// Band energies at a real wavevector. Matrix models return them sorted;
    /// band models keep band order.
    fn energies(&self, k: &[f64]) -> Vec<f64>;

    fn local_spectrum(&self, k: &[f64], with_curvature: bool) -> LocalSpectrum;

    /// `Tr (z - H_{k + i h})^{-1}`.
    fn deformed_resolvent_trace(&self, k: &[f64], h: &[f64], z: C64) -> Result<C64, LinalgError>;

    fn deformed_spectrum(&self, k: &[f64], h: &[f64]) -> Result<DeformedSpectrum, LinalgError>;
}

impl<M: Model + ?Sized> Model for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn num_bands(&self) -> usize {
        (**self).num_bands()
    }
    fn domain(&self) -> Domain {
        (**self).domain()
    }
    fn energies(&self, k: &[f64]) -> Vec<f64> {
        (**self).energies(k)
    }
    fn local_spectrum(&self, k: &[f64], with_curvature: bool) -> LocalSpectrum {
        (**self).local_spectrum(k, with_curvature)
    }
    fn deformed_resolvent_trace(&self, k: &[f64], h: &[f64], z: C64) -> Result<C64, LinalgError> {
        (**self).deformed_resolvent_trace(k, h, z)
    }
    fn deformed_spectrum(&self, k: &[f64], h: &[f64]) -> Result<DeformedSpectrum, LinalgError> {
        (**self).deformed_spectrum(k, h)
    }
}

impl<M: Model + ?Sized> Model for Box<M> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn num_bands(&self) -> usize {
        (**self).num_bands()
    }
    fn domain(&self) -> Domain {
        (**self).domain()
    }
    fn energies(&self, k: &[f64]) -> Vec<f64> {
        (**self).energies(k)
    }
    fn local_spectrum(&self, k: &[f64], with_curvature: bool) -> LocalSpectrum {
        (**self).local_spectrum(k, with_curvature)
    }
    fn deformed_resolvent_trace(&self, k: &[f64], h: &[f64], z: C64) -> Result<C64, LinalgError> {
        (**self).deformed_resolvent_trace(k, h, z)
    }
    fn deformed_spectrum(&self, k: &[f64], h: &[f64]) -> Result<DeformedSpectrum, LinalgError> {
        (**self).deformed_spectrum(k, h)
    }
}

/// One Fourier term `H_R`, divided by its degeneracy weight at evaluation.
#[derive(Debug, Clone)]
pub struct HoppingTerm {
    pub r: [i32; 3],
    pub matrix: ComplexMatrix,
    pub weight: f64,
}

impl HoppingTerm {
    pub fn new(r: [i32; 3], matrix: ComplexMatrix) -> Self {
        Self {
            r,
            matrix,
            weight: 1.0,
        }
    }

    pub fn with_weight(r: [i32; 3], matrix: ComplexMatrix, weight: f64) -> Self {
        Self { r, matrix, weight }
    }
}

/// How missing `-R` partners are handled at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Closure {
    /// Add `H_{-R} = H_R^H` when absent.
    #[default]
    Complete,
    /// Reject models that do not list every partner.
    Strict,
}

/// Finite Fourier sum `H_k = sum_R exp(2 pi i k.R) H_R / w_R`.
#[derive(Debug, Clone)]
pub struct TightBindingModel {
    dim: usize,
    norb: usize,
    terms: Vec<HoppingTerm>,
    // H_R / w_R, and R as floats, aligned with `terms`
    effective: Vec<ComplexMatrix>,
    r_float: Vec<[f64; 3]>,
}

impl TightBindingModel {
    pub fn new(
        dim: usize,
        norb: usize,
        terms: Vec<HoppingTerm>,
        closure: Closure,
    ) -> Result<Self, ModelError> {
        Self::with_tolerance(dim, norb, terms, closure, HERMITICITY_TOL)
    }

    pub fn with_tolerance(
        dim: usize,
        norb: usize,
        mut terms: Vec<HoppingTerm>,
        closure: Closure,
        tol: f64,
    ) -> Result<Self, ModelError> {
        if !(1..=3).contains(&dim) {
            return Err(ModelError::Dimension(dim));
        }
        if norb == 0 {
            return Err(ModelError::NoOrbitals);
        }
        for t in &terms {
            if t.matrix.rows() != norb || t.matrix.cols() != norb {
                return Err(ModelError::Shape {
                    r: t.r,
                    rows: t.matrix.rows(),
                    cols: t.matrix.cols(),
                    norb,
                });
            }
            if t.r[dim..].iter().any(|&c| c != 0) {
                return Err(ModelError::ExtraComponents(t.r));
            }
            if !(t.weight > 0.0 && t.weight.is_finite()) {
                return Err(ModelError::Weight {
                    r: t.r,
                    weight: t.weight,
                });
            }
        }
        let mut seen = std::collections::HashSet::new();
        for t in &terms {
            if !seen.insert(t.r) {
                return Err(ModelError::DuplicateR(t.r));
            }
        }

        let neg = |r: [i32; 3]| [-r[0], -r[1], -r[2]];
        let mut added = Vec::new();
        for t in &terms {
            if !seen.contains(&neg(t.r)) {
                match closure {
                    Closure::Strict => return Err(ModelError::MissingPartner(t.r)),
                    Closure::Complete => {
                        added.push(HoppingTerm::with_weight(neg(t.r), t.matrix.adjoint(), t.weight))
                    }
                }
            }
        }
        terms.extend(added);

        let effective: Vec<ComplexMatrix> = terms
            .iter()
            .map(|t| t.matrix.scale(C64::new(1.0 / t.weight, 0.0)))
            .collect();

        // Worst violation of H_{-R} = H_R^H over all pairs.
        let index: std::collections::HashMap<[i32; 3], usize> =
            terms.iter().enumerate().map(|(i, t)| (t.r, i)).collect();
        let mut worst: Option<ModelError> = None;
        let mut worst_dev = tol;
        for (i, t) in terms.iter().enumerate() {
            let j = index[&neg(t.r)];
            for m in 0..norb {
                for n in 0..norb {
                    let dev = (effective[j][(m, n)] - effective[i][(n, m)].conj()).norm();
                    if dev > worst_dev {
                        worst_dev = dev;
                        worst = Some(ModelError::HermiticityViolation {
                            r: t.r,
                            m,
                            n,
                            deviation: dev,
                        });
                    }
                }
            }
        }
        if let Some(err) = worst {
            return Err(err);
        }

        let r_float = terms
            .iter()
            .map(|t| [t.r[0] as f64, t.r[1] as f64, t.r[2] as f64])
            .collect();
        Ok(Self {
            dim,
            norb,
            terms,
            effective,
            r_float,
        })
    }

    pub fn norb(&self) -> usize {
        self.norb
    }

    pub fn terms(&self) -> &[HoppingTerm] {
        &self.terms
    }

    fn phases(&self, k: &[f64], h: Option<&[f64]>) -> Vec<C64> {
        self.r_float
            .iter()
            .map(|r| {
                let mut re_arg = 0.0;
                let mut decay = 0.0;
                for j in 0..self.dim {
                    re_arg += k[j] * r[j];
                    if let Some(h) = h {
                        decay += h[j] * r[j];
                    }
                }
                let mag = (-2.0 * PI * decay).exp();
                let (s, c) = (2.0 * PI * re_arg).sin_cos();
                C64::new(mag * c, mag * s)
            })
            .collect()
    }

    /// `H` at `k + i h` (`h = None` for a real wavevector).
    pub fn hamiltonian(&self, k: &[f64], h: Option<&[f64]>) -> ComplexMatrix {
        let phases = self.phases(k, h);
        let mut out = ComplexMatrix::zeros(self.norb, self.norb);
        for (p, m) in phases.iter().zip(&self.effective) {
            out.add_scaled(*p, m);
        }
        out
    }

    /// `d_j H` at `k + i h`, one matrix per direction.
    pub fn gradient(&self, k: &[f64], h: Option<&[f64]>) -> Vec<ComplexMatrix> {
        let phases = self.phases(k, h);
        (0..self.dim)
            .map(|j| {
                let mut out = ComplexMatrix::zeros(self.norb, self.norb);
                for ((p, m), r) in phases.iter().zip(&self.effective).zip(&self.r_float) {
                    if r[j] != 0.0 {
                        out.add_scaled(p * C64::new(0.0, 2.0 * PI * r[j]), m);
                    }
                }
                out
            })
            .collect()
    }

    /// `d_i d_j H` at `k + i h`, `d x d` row-major.
    pub fn hessian(&self, k: &[f64], h: Option<&[f64]>) -> Vec<ComplexMatrix> {
        let phases = self.phases(k, h);
        let d = self.dim;
        let mut out = vec![ComplexMatrix::zeros(self.norb, self.norb); d * d];
        for i in 0..d {
            for j in i..d {
                let mut acc = ComplexMatrix::zeros(self.norb, self.norb);
                for ((p, m), r) in phases.iter().zip(&self.effective).zip(&self.r_float) {
                    let f = -4.0 * PI * PI * r[i] * r[j];
                    if f != 0.0 {
                        acc.add_scaled(p * f, m);
                    }
                }
                out[j * d + i] = acc.clone();
                out[i * d + j] = acc;
            }
        }
        out
    }
}

fn check_k(model_dim: usize, k: &KPoint) -> Result<(), ModelError> {
    if k.dim() != model_dim {
        return Err(ModelError::KDimension {
            expected: model_dim,
            got: k.dim(),
        });
    }
    Ok(())
}

/// Bloch Hamiltonian at a (possibly complex) wavevector.
pub fn bloch_hamiltonian(model: &TightBindingModel, k: &KPoint) -> Result<ComplexMatrix, ModelError> {
    check_k(model.dim, k)?;
    Ok(model.hamiltonian(k.frac(), k.shift()))
}

pub fn bloch_gradient(model: &TightBindingModel, k: &KPoint) -> Result<Vec<ComplexMatrix>, ModelError> {
    check_k(model.dim, k)?;
    Ok(model.gradient(k.frac(), k.shift()))
}

pub fn bloch_hessian(model: &TightBindingModel, k: &KPoint) -> Result<Vec<ComplexMatrix>, ModelError> {
    check_k(model.dim, k)?;
    Ok(model.hessian(k.frac(), k.shift()))
}

impl Model for TightBindingModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_bands(&self) -> usize {
        self.norb
    }

    fn energies(&self, k: &[f64]) -> Vec<f64> {
        let hk = self.hamiltonian(k, None);
        if self.norb == 1 {
            return vec![hk[(0, 0)].re];
        }
        if self.norb == 2 {
            // closed form for the 2x2 Hermitian case
            let a = hk[(0, 0)].re;
            let d = hk[(1, 1)].re;
            let b = hk[(0, 1)];
            let mid = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
            return vec![mid - rad, mid + rad];
        }
        hermitian_eig(&hk)
            .expect("Bloch Hamiltonian is Hermitian at real k")
            .values
    }

    fn local_spectrum(&self, k: &[f64], with_curvature: bool) -> LocalSpectrum {
        let hk = self.hamiltonian(k, None);
        let eig = hermitian_eig(&hk).expect("Bloch Hamiltonian is Hermitian at real k");
        let v = &eig.vectors;
        let vh = v.adjoint();
        let velocity = self
            .gradient(k, None)
            .iter()
            .map(|g| &(&vh * g) * v)
            .collect();
        let curvature = if with_curvature {
            let hess = self.hessian(k, None);
            let d = self.dim;
            (0..self.norb)
                .map(|n| {
                    let mut c = vec![0.0; d * d];
                    for (idx, hm) in hess.iter().enumerate() {
                        let mut acc = C64::new(0.0, 0.0);
                        for a in 0..self.norb {
                            let mut row = C64::new(0.0, 0.0);
                            for b in 0..self.norb {
                                row += hm[(a, b)] * v[(b, n)];
                            }
                            acc += v[(a, n)].conj() * row;
                        }
                        c[idx] = acc.re;
                    }
                    c
                })
                .collect()
        } else {
            Vec::new()
        };
        LocalSpectrum {
            energies: eig.values,
            velocity,
            curvature,
        }
    }

    fn deformed_resolvent_trace(&self, k: &[f64], h: &[f64], z: C64) -> Result<C64, LinalgError> {
        resolvent_trace(&self.hamiltonian(k, Some(h)), z)
    }

    fn deformed_spectrum(&self, k: &[f64], h: &[f64]) -> Result<DeformedSpectrum, LinalgError> {
        general_eigvals(&self.hamiltonian(k, Some(h))).map(DeformedSpectrum::Unordered)
    }
}

/// A scalar band with a closed-form entire extension.
#[derive(Debug, Clone, PartialEq)]
pub enum BandFn {
    /// `scale * |k + offset|^2`.
    Parabolic { offset: Vec<f64>, scale: f64 },
    /// `constant + slope . k`.
    Linear { slope: Vec<f64>, constant: f64 },
}

impl BandFn {
    pub fn eval_complex(&self, k: &[f64], h: &[f64]) -> C64 {
        match self {
            BandFn::Parabolic { offset, scale } => {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..offset.len() {
                    let q = C64::new(k[j] + offset[j], h.get(j).copied().unwrap_or(0.0));
                    acc += q * q;
                }
                acc * *scale
            }
            BandFn::Linear { slope, constant } => {
                let mut acc = C64::new(*constant, 0.0);
                for j in 0..slope.len() {
                    acc += slope[j] * C64::new(k[j], h.get(j).copied().unwrap_or(0.0));
                }
                acc
            }
        }
    }

    pub fn eval(&self, k: &[f64]) -> f64 {
        match self {
            BandFn::Parabolic { offset, scale } => {
                scale * offset.iter().zip(k).map(|(g, k)| (k + g) * (k + g)).sum::<f64>()
            }
            BandFn::Linear { slope, constant } => {
                constant + slope.iter().zip(k).map(|(s, k)| s * k).sum::<f64>()
            }
        }
    }

    pub fn gradient(&self, k: &[f64]) -> Vec<f64> {
        match self {
            BandFn::Parabolic { offset, scale } => offset
                .iter()
                .zip(k)
                .map(|(g, k)| 2.0 * scale * (k + g))
                .collect(),
            BandFn::Linear { slope, .. } => slope.clone(),
        }
    }

    /// `d x d` row-major.
    pub fn hessian(&self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d * d];
        if let BandFn::Parabolic { scale, .. } = self {
            for j in 0..d {
                out[j * d + j] = 2.0 * scale;
            }
        }
        out
    }
}

/// Model given by explicit band functions.
#[derive(Debug, Clone)]
pub struct AnalyticBandModel {
    dim: usize,
    bands: Vec<BandFn>,
    domain: Domain,
}

impl AnalyticBandModel {
    pub fn new(dim: usize, bands: Vec<BandFn>, domain: Domain) -> Result<Self, ModelError> {
        if !(1..=3).contains(&dim) {
            return Err(ModelError::Dimension(dim));
        }
        if bands.is_empty() {
            return Err(ModelError::NoOrbitals);
        }
        for b in &bands {
            let len = match b {
                BandFn::Parabolic { offset, .. } => offset.len(),
                BandFn::Linear { slope, .. } => slope.len(),
            };
            if len != dim {
                return Err(ModelError::KDimension {
                    expected: dim,
                    got: len,
                });
            }
        }
        if matches!(domain, Domain::Interval { .. }) && dim != 1 {
            return Err(ModelError::Dimension(dim));
        }
        Ok(Self { dim, bands, domain })
    }

    pub fn bands(&self) -> &[BandFn] {
        &self.bands
    }
}

/// Band `n` of an analytic model at a (possibly complex) wavevector.
pub fn band_eval(model: &AnalyticBandModel, n: usize, k: &KPoint) -> Result<C64, ModelError> {
    check_k(model.dim, k)?;
    let band = model.bands.get(n).ok_or(ModelError::NoOrbitals)?;
    let zero = vec![0.0; model.dim];
    Ok(band.eval_complex(k.frac(), k.shift().unwrap_or(&zero)))
}

impl Model for AnalyticBandModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_bands(&self) -> usize {
        self.bands.len()
    }

    fn domain(&self) -> Domain {
        self.domain
    }

    fn energies(&self, k: &[f64]) -> Vec<f64> {
        self.bands.iter().map(|b| b.eval(k)).collect()
    }

    fn local_spectrum(&self, k: &[f64], with_curvature: bool) -> LocalSpectrum {
        let nb = self.bands.len();
        let grads: Vec<Vec<f64>> = self.bands.iter().map(|b| b.gradient(k)).collect();
        let velocity = (0..self.dim)
            .map(|j| {
                let diag: Vec<C64> = grads.iter().map(|g| C64::new(g[j], 0.0)).collect();
                ComplexMatrix::from_diag(&diag)
            })
            .collect();
        let curvature = if with_curvature {
            self.bands.iter().map(|b| b.hessian(self.dim)).collect()
        } else {
            Vec::new()
        };
        debug_assert_eq!(grads.len(), nb);
        LocalSpectrum {
            energies: self.energies(k),
            velocity,
            curvature,
        }
    }

    fn deformed_resolvent_trace(&self, k: &[f64], h: &[f64], z: C64) -> Result<C64, LinalgError> {
        let mut acc = C64::new(0.0, 0.0);
        for (n, b) in self.bands.iter().enumerate() {
            let den = z - b.eval_complex(k, h);
            if !(den.norm() >= 1e-300) {
                return Err(LinalgError::SingularShift {
                    column: n,
                    pivot: den.norm(),
                });
            }
            acc += 1.0 / den;
        }
        Ok(acc)
    }

    fn deformed_spectrum(&self, k: &[f64], h: &[f64]) -> Result<DeformedSpectrum, LinalgError> {
        Ok(DeformedSpectrum::Indexed(
            self.bands.iter().map(|b| b.eval_complex(k, h)).collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(t: f64) -> TightBindingModel {
        let m = ComplexMatrix::from_real_rows(&[vec![t]]).unwrap();
        TightBindingModel::new(1, 1, vec![HoppingTerm::new([1, 0, 0], m)], Closure::Complete).unwrap()
    }

    #[test]
    fn chain_values() {
        let m = chain(1.0);
        let h0 = bloch_hamiltonian(&m, &KPoint::new(&[0.0]).unwrap()).unwrap();
        assert!((h0[(0, 0)] - C64::new(2.0, 0.0)).norm() < 1e-15);
        let hq = bloch_hamiltonian(&m, &KPoint::new(&[0.25]).unwrap()).unwrap();
        assert!(hq[(0, 0)].norm() < 1e-15);
        let hc = bloch_hamiltonian(&m, &KPoint::with_shift(&[0.0], &[0.1]).unwrap()).unwrap();
        let want = 2.0 * (0.2 * PI).cosh();
        assert!((hc[(0, 0)] - C64::new(want, 0.0)).norm() < 1e-14);
        assert!((want - 2.4079).abs() < 1e-4);
    }

    #[test]
    fn chain_derivatives() {
        let m = chain(1.0);
        let g = bloch_gradient(&m, &KPoint::new(&[0.25]).unwrap()).unwrap();
        assert!((g[0][(0, 0)] - C64::new(-4.0 * PI, 0.0)).norm() < 1e-13);
        let hs = bloch_hessian(&m, &KPoint::new(&[0.0]).unwrap()).unwrap();
        assert!((hs[0][(0, 0)] - C64::new(-8.0 * PI * PI, 0.0)).norm() < 1e-12);
        assert!((hs[0][(0, 0)].re + 78.957).abs() < 1e-3);
    }

    #[test]
    fn constant_model_has_zero_derivatives() {
        let h0 = ComplexMatrix::from_real_rows(&[vec![1.0, 0.5], vec![0.5, -1.0]]).unwrap();
        let m = TightBindingModel::new(2, 2, vec![HoppingTerm::new([0, 0, 0], h0)], Closure::Strict)
            .unwrap();
        let k = KPoint::new(&[0.1, -0.3]).unwrap();
        assert!(bloch_gradient(&m, &k).unwrap().iter().all(|g| g.max_abs() == 0.0));
        assert!(bloch_hessian(&m, &k).unwrap().iter().all(|g| g.max_abs() == 0.0));
    }

    #[test]
    fn closure_modes() {
        let m = ComplexMatrix::from_rows(&[vec![C64::new(0.0, 1.0)]]).unwrap();
        let strict = TightBindingModel::new(
            1,
            1,
            vec![HoppingTerm::new([1, 0, 0], m.clone())],
            Closure::Strict,
        );
        assert_eq!(strict.unwrap_err(), ModelError::MissingPartner([1, 0, 0]));
        let done = TightBindingModel::new(1, 1, vec![HoppingTerm::new([1, 0, 0], m)], Closure::Complete)
            .unwrap();
        assert_eq!(done.terms().len(), 2);
        let neg = done.terms().iter().find(|t| t.r == [-1, 0, 0]).unwrap();
        assert_eq!(neg.matrix[(0, 0)], C64::new(0.0, -1.0));
    }

    #[test]
    fn inconsistent_partner_rejected() {
        let a = ComplexMatrix::from_real_rows(&[vec![1.0]]).unwrap();
        let b = ComplexMatrix::from_real_rows(&[vec![1.001]]).unwrap();
        let err = TightBindingModel::new(
            1,
            1,
            vec![HoppingTerm::new([1, 0, 0], a), HoppingTerm::new([-1, 0, 0], b)],
            Closure::Complete,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::HermiticityViolation { .. }));
    }

    #[test]
    fn duplicate_and_extra_components() {
        let a = ComplexMatrix::from_real_rows(&[vec![1.0]]).unwrap();
        let dup = TightBindingModel::new(
            1,
            1,
            vec![HoppingTerm::new([1, 0, 0], a.clone()), HoppingTerm::new([1, 0, 0], a.clone())],
            Closure::Complete,
        );
        assert_eq!(dup.unwrap_err(), ModelError::DuplicateR([1, 0, 0]));
        let extra = TightBindingModel::new(1, 1, vec![HoppingTerm::new([0, 1, 0], a)], Closure::Complete);
        assert_eq!(extra.unwrap_err(), ModelError::ExtraComponents([0, 1, 0]));
    }

    #[test]
    fn shift_cap() {
        assert!(KPoint::with_shift(&[0.0], &[0.3]).is_err());
        assert!(KPoint::with_shift_capped(&[0.0], &[0.3], 1.0).is_ok());
        assert_eq!(KPoint::new(&[f64::NAN]).unwrap_err(), ModelError::NonFinite);
    }

    #[test]
    fn free_gas_band_eval() {
        let m = AnalyticBandModel::new(
            1,
            vec![BandFn::Parabolic {
                offset: vec![0.0],
                scale: 1.0,
            }],
            Domain::Periodic,
        )
        .unwrap();
        let real = band_eval(&m, 0, &KPoint::new(&[0.3]).unwrap()).unwrap();
        assert!((real - C64::new(0.09, 0.0)).norm() < 1e-15);
        let cplx = band_eval(&m, 0, &KPoint::with_shift(&[0.3], &[0.1]).unwrap()).unwrap();
        assert!((cplx - C64::new(0.08, 0.06)).norm() < 1e-15);
    }

    #[test]
    fn two_by_two_closed_form_matches_jacobi() {
        let h0 = ComplexMatrix::from_real_rows(&[vec![0.3, 0.0], vec![0.0, -0.2]]).unwrap();
        let h1 = ComplexMatrix::from_rows(&[
            vec![C64::new(0.1, 0.0), C64::new(0.4, 0.2)],
            vec![C64::new(-0.3, 0.1), C64::new(0.05, 0.0)],
        ])
        .unwrap();
        let m = TightBindingModel::new(
            2,
            2,
            vec![HoppingTerm::new([0, 0, 0], h0), HoppingTerm::new([1, -1, 0], h1)],
            Closure::Complete,
        )
        .unwrap();
        let k = [0.17, -0.41];
        let fast = m.energies(&k);
        let slow = hermitian_eig(&m.hamiltonian(&k, None)).unwrap().values;
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
