//! Brillouin complex deformation.
//!
//! The DOS is written as `-(1/pi) Im (1/N^d) sum_k Tr (E - H_{k + i h(k)})^{-1}
//! det(1 + i h'(k))` with a deformation `h` that pushes every band near `E`
//! into the lower half plane. The integrand is then smooth and the periodic
//! trapezoidal rule converges exponentially without smearing.

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;

use crate::dos::{check_energy, check_n, DosError, DosEstimate, Method, MethodParams};
use crate::grid::{try_ordered_sum, QuadGrid};
use crate::linalg::{complex_det, ComplexMatrix, C64};
use crate::model::{DeformedSpectrum, Model};

/// Coordinates the deformation amplitude refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientCoords {
    /// Gradients and shifts in fractional units (zone of length 1).
    #[default]
    Fractional,
    /// Gradients and shifts in radians (zone of length `2 pi`); the
    /// fractional amplitude is `alpha / (2 pi)^2`.
    Radians,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcdParams {
    /// Deformation amplitude, inverse energy.
    pub alpha: f64,
    pub coords: GradientCoords,
    /// Width of the Gaussian energy window.
    pub delta_e: f64,
    /// Largest imaginary part the diagnostic tolerates.
    pub diag_tol: f64,
    /// Optional Lorentzian width; zero gives the unsmeared DOS.
    pub eta: f64,
}

impl Default for BcdParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            coords: GradientCoords::Fractional,
            delta_e: 0.3,
            diag_tol: 1e-6,
            eta: 0.0,
        }
    }
}

impl BcdParams {
    pub fn new(alpha: f64, delta_e: f64) -> Result<Self, DosError> {
        let p = Self {
            alpha,
            delta_e,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_coords(self, coords: GradientCoords) -> Self {
        Self { coords, ..self }
    }

    /// Amplitude against fractional-coordinate gradients.
    pub fn fractional_alpha(&self) -> f64 {
        match self.coords {
            GradientCoords::Fractional => self.alpha,
            GradientCoords::Radians => self.alpha / (4.0 * PI * PI),
        }
    }

    pub fn with_eta(self, eta: f64) -> Self {
        Self { eta, ..self }
    }

    pub fn with_diag_tol(self, diag_tol: f64) -> Self {
        Self { diag_tol, ..self }
    }

    pub fn validate(&self) -> Result<(), DosError> {
        let ok = self.alpha > 0.0
            && self.alpha.is_finite()
            && self.delta_e > 0.0
            && self.delta_e.is_finite()
            && self.diag_tol >= 0.0
            && self.eta >= 0.0
            && self.eta.is_finite();
        if !ok {
            return Err(DosError::InvalidParameter(format!("invalid BCD parameters {self:?}")));
        }
        Ok(())
    }
}

#[inline]
pub fn gaussian(x: f64) -> f64 {
    (-x * x).exp()
}

/// `(e^{-x^2} - e^{-y^2}) / (x - y)`, with limit `-2x e^{-x^2}` at `x = y`.
pub fn divided_difference_gaussian(x: f64, y: f64) -> f64 {
    let d = x - y;
    if d == 0.0 {
        return -2.0 * x * gaussian(x);
    }
    if d.abs() > 0.5 {
        // no cancellation here, and expm1 below could overflow
        return (gaussian(x) - gaussian(y)) / d;
    }
    gaussian(y) * (-d * (x + y)).exp_m1() / d
}

/// Deformation and its Jacobian at one real wavevector.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformedPoint {
    pub k: Vec<f64>,
    pub h: Vec<f64>,
    /// `d x d` row-major, entry `(i, j)` is `d h_i / d k_j`.
    pub jac: Vec<f64>,
    /// `det(1 + i jac)`.
    pub det_factor: C64,
}

fn deform<M: Model + ?Sized>(model: &M, k: &[f64], e: f64, p: &BcdParams, with_jac: bool) -> DeformedPoint {
    let d = model.dim();
    let spec = model.local_spectrum(k, with_jac);
    let x: Vec<f64> = spec.energies.iter().map(|en| (en - e) / p.delta_e).collect();
    let chi: Vec<f64> = x.iter().map(|&x| gaussian(x)).collect();
    let nb = x.len();
    let alpha = p.fractional_alpha();

    // Equal energies get equal weights, so within a degenerate block this is
    // a trace and does not depend on the eigenbasis.
    let h: Vec<f64> = (0..d)
        .map(|j| {
            let v = &spec.velocity[j];
            -alpha * (0..nb).map(|n| chi[n] * v[(n, n)].re).sum::<f64>()
        })
        .collect();

    let mut jac = vec![0.0; d * d];
    if with_jac {
        let dd: Vec<f64> = (0..nb * nb)
            .map(|idx| divided_difference_gaussian(x[idx / nb], x[idx % nb]))
            .collect();
        for i in 0..d {
            for j in 0..d {
                let mut curv = 0.0;
                for n in 0..nb {
                    curv += chi[n] * spec.curvature[n][j * d + i];
                }
                let (vi, vj) = (&spec.velocity[i], &spec.velocity[j]);
                let mut mixed = 0.0;
                for n in 0..nb {
                    for m in 0..nb {
                        let w = dd[n * nb + m];
                        if w != 0.0 {
                            mixed += w * (vi[(n, m)] * vj[(m, n)]).re;
                        }
                    }
                }
                jac[i * d + j] = -alpha * (curv + mixed / p.delta_e);
            }
        }
    }

    let mut m = ComplexMatrix::identity(d);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] += C64::new(0.0, jac[i * d + j]);
        }
    }
    DeformedPoint {
        k: k.to_vec(),
        h,
        jac,
        det_factor: complex_det(&m).expect("identity plus a square matrix"),
    }
}

/// `h_j = -alpha sum_n <psi_n| d_j H |psi_n> chi((eps_n - E) / dE)`.
pub fn deformation<M: Model + ?Sized>(model: &M, k: &[f64], e: f64, p: &BcdParams) -> Vec<f64> {
    deform(model, k, e, p, false).h
}

/// `d h_i / d k_j`, row-major, from first-order perturbation theory.
pub fn deformation_jacobian<M: Model + ?Sized>(model: &M, k: &[f64], e: f64, p: &BcdParams) -> Vec<f64> {
    deform(model, k, e, p, true).jac
}

pub fn deformed_point<M: Model + ?Sized>(model: &M, k: &[f64], e: f64, p: &BcdParams) -> DeformedPoint {
    deform(model, k, e, p, true)
}

/// Deformed-contour DOS on the uniform grid of size `N`.
pub fn bcd_dos<M: Model + ?Sized>(model: &M, e: f64, p: &BcdParams, n: usize) -> Result<DosEstimate, DosError> {
    check_n(n, 2)?;
    check_energy(e)?;
    p.validate()?;
    let start = Instant::now();
    let d = model.dim();
    let grid = QuadGrid::new(model.domain(), d, n);
    let z = C64::new(e, p.eta);
    let sum = try_ordered_sum(grid.len(), |i| {
        let (k, w) = grid.node(i);
        let pt = deform(model, &k[..d], e, p, true);
        let tr = model
            .deformed_resolvent_trace(&k[..d], &pt.h, z)
            .map_err(|source| DosError::SingularShift {
                k: k[..d].to_vec(),
                source,
            })?;
        Ok::<C64, DosError>(tr * pt.det_factor * w)
    })?;
    Ok(DosEstimate {
        value: -sum.im / PI,
        n_evals: grid.len() as u64,
        wall_time: start.elapsed().as_secs_f64(),
        method: Method::Bcd,
        params: MethodParams::Bcd {
            alpha: p.fractional_alpha(),
            delta_e: p.delta_e,
            eta: p.eta,
            n,
        },
        error_estimate: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailureEntry {
    pub k: Vec<f64>,
    pub band: usize,
    /// Undeformed band energy.
    pub energy: f64,
    /// Imaginary part of the matched deformed eigenvalue.
    pub im_shift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailureReport {
    /// Inspected bands whose deformed eigenvalue has `Im > diag_tol`, in grid order.
    pub entries: Vec<FailureEntry>,
    /// Largest imaginary part over all inspected bands; `-inf` if none was inspected.
    pub worst_im: f64,
    pub failed: bool,
    /// Number of (k, band) pairs inspected.
    pub inspected: usize,
}

impl FailureReport {
    /// Entries sorted by decreasing imaginary part.
    pub fn worst_offenders(&self, count: usize) -> Vec<&FailureEntry> {
        let mut v: Vec<&FailureEntry> = self.entries.iter().collect();
        v.sort_by(|a, b| b.im_shift.total_cmp(&a.im_shift));
        v.truncate(count);
        v
    }
}

/// Pair deformed eigenvalues with real ones greedily by `|Re lambda - eps|`.
fn match_greedy(real: &[f64], deformed: &[C64]) -> Vec<usize> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(real.len() * deformed.len());
    for (n, e) in real.iter().enumerate() {
        for (m, l) in deformed.iter().enumerate() {
            pairs.push(((l.re - e).abs(), n, m));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assign = vec![usize::MAX; real.len()];
    let mut used = vec![false; deformed.len()];
    for (_, n, m) in pairs {
        if assign[n] == usize::MAX && !used[m] {
            assign[n] = m;
            used[m] = true;
        }
    }
    assign
}

/// Check that every band within `dE/2` of `E` moves into the lower half plane.
pub fn bcd_diagnose<M: Model + ?Sized>(model: &M, e: f64, p: &BcdParams, n: usize) -> FailureReport {
    let d = model.dim();
    let grid = QuadGrid::new(model.domain(), d, n.max(1));
    let per_point: Vec<Vec<FailureEntry>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let k = &grid.node(i).0[..d];
            let energies = model.energies(k);
            let near: Vec<usize> = (0..energies.len())
                .filter(|&b| (energies[b] - e).abs() < 0.5 * p.delta_e)
                .collect();
            if near.is_empty() {
                return Vec::new();
            }
            let h = deformation(model, k, e, p);
            let ims: Vec<f64> = match model.deformed_spectrum(k, &h) {
                Ok(DeformedSpectrum::Indexed(l)) => near.iter().map(|&b| l[b].im).collect(),
                Ok(DeformedSpectrum::Unordered(l)) => {
                    let assign = match_greedy(&energies, &l);
                    near.iter().map(|&b| l[assign[b]].im).collect()
                }
                // an unresolvable deformed spectrum counts as a failure
                Err(_) => vec![f64::INFINITY; near.len()],
            };
            near.iter()
                .zip(ims)
                .map(|(&b, im)| FailureEntry {
                    k: k.to_vec(),
                    band: b,
                    energy: energies[b],
                    im_shift: im,
                })
                .collect()
        })
        .collect();

    let mut worst_im = f64::NEG_INFINITY;
    let mut inspected = 0;
    let mut entries = Vec::new();
    for e in per_point.into_iter().flatten() {
        inspected += 1;
        worst_im = worst_im.max(e.im_shift);
        if e.im_shift > p.diag_tol {
            entries.push(e);
        }
    }
    FailureReport {
        failed: worst_im > p.diag_tol,
        entries,
        worst_im,
        inspected,
    }
}
