//! Lorentzian-smeared DOS on a uniform Monkhorst-Pack grid.

use std::f64::consts::PI;
use std::time::Instant;

use crate::dos::{check_energy, check_n, DosError, DosEstimate, Method, MethodParams, SmearingParams};
use crate::grid::{ordered_sum, try_ordered_sum, QuadGrid};
use crate::linalg::C64;
use crate::model::Model;

/// `(1/N^d) sum_k sum_n K_eta(eps_nk - E)`.
pub fn ptr_dos<M: Model + ?Sized>(
    model: &M,
    energy: f64,
    p: SmearingParams,
    n: usize,
) -> Result<DosEstimate, DosError> {
    check_n(n, 1)?;
    check_energy(energy)?;
    let start = Instant::now();
    let grid = QuadGrid::new(model.domain(), model.dim(), n);
    let d = model.dim();
    let value = ordered_sum(grid.len(), |i| {
        let (k, w) = grid.node(i);
        let s: f64 = model.energies(&k[..d]).iter().map(|e| p.kernel(e - energy)).sum();
        w * s
    });
    Ok(DosEstimate {
        value,
        n_evals: grid.len() as u64,
        wall_time: start.elapsed().as_secs_f64(),
        method: Method::Ptr,
        params: MethodParams::Ptr { eta: p.eta(), n },
        error_estimate: None,
    })
}

/// `-(1/pi) Im (1/N^d) sum_k Tr (E + i eta - H_k)^{-1}`.
pub fn ptr_dos_resolvent<M: Model + ?Sized>(
    model: &M,
    energy: f64,
    p: SmearingParams,
    n: usize,
) -> Result<DosEstimate, DosError> {
    check_n(n, 1)?;
    check_energy(energy)?;
    let start = Instant::now();
    let grid = QuadGrid::new(model.domain(), model.dim(), n);
    let d = model.dim();
    let zero = [0.0; 3];
    let z = C64::new(energy, p.eta());
    let sum = try_ordered_sum(grid.len(), |i| {
        let (k, w) = grid.node(i);
        model
            .deformed_resolvent_trace(&k[..d], &zero[..d], z)
            .map(|t| t * w)
            .map_err(|source| DosError::SingularShift {
                k: k[..d].to_vec(),
                source,
            })
    })?;
    Ok(DosEstimate {
        value: -sum.im / PI,
        n_evals: grid.len() as u64,
        wall_time: start.elapsed().as_secs_f64(),
        method: Method::PtrResolvent,
        params: MethodParams::Ptr { eta: p.eta(), n },
        error_estimate: None,
    })
}
