//! Linear tetrahedron method: exact DOS of the piecewise-linear interpolant
//! of the bands on a Kuhn simplex decomposition of the uniform grid.

use std::time::Instant;

use rayon::prelude::*;

use crate::dos::{check_energy, check_n, DosError, DosEstimate, Method, MethodParams};
use crate::grid::pairwise_sum;
use crate::model::{Domain, Model};

/// Energy points evaluated per parallel block, roughly.
const BLOCK_POINTS: usize = 4096;

/// DOS at `e` of the linear interpolant on one simplex of volume `volume`,
/// given the `d + 1` corner energies sorted ascending.
///
/// Regimes are half-open, `[e_i, e_{i+1})`, so coinciding corner energies
/// select the limiting form and never divide by zero.
pub fn simplex_dos(c: &[f64], e: f64, volume: f64) -> f64 {
    debug_assert!(c.windows(2).all(|w| w[0] <= w[1]), "corner energies must be sorted");
    match c.len() {
        2 => {
            if c[0] <= e && e < c[1] {
                volume / (c[1] - c[0])
            } else {
                0.0
            }
        }
        3 => {
            let (e0, e1, e2) = (c[0], c[1], c[2]);
            if e < e0 || e >= e2 {
                0.0
            } else if e < e1 {
                2.0 * volume * (e - e0) / ((e1 - e0) * (e2 - e0))
            } else {
                2.0 * volume * (e2 - e) / ((e2 - e0) * (e2 - e1))
            }
        }
        4 => {
            let (e0, e1, e2, e3) = (c[0], c[1], c[2], c[3]);
            if e < e0 || e >= e3 {
                0.0
            } else if e < e1 {
                3.0 * volume * (e - e0).powi(2) / ((e1 - e0) * (e2 - e0) * (e3 - e0))
            } else if e < e2 {
                let x = e - e1;
                volume / ((e2 - e0) * (e3 - e0))
                    * (3.0 * (e1 - e0) + 6.0 * x
                        - 3.0 * ((e2 - e0) + (e3 - e1)) * x * x / ((e2 - e1) * (e3 - e1)))
            } else {
                3.0 * volume * (e3 - e).powi(2) / ((e3 - e0) * (e3 - e1) * (e3 - e2))
            }
        }
        n => panic!("simplex with {n} corners"),
    }
}

/// Kuhn split of the unit cube: `d!` simplices, one per axis permutation.
/// Each vertex is a bitmask of unit offsets (bit `a` set means `+1` along
/// axis `a`); all simplices share the main diagonal.
pub fn kuhn_simplices(d: usize) -> Vec<Vec<usize>> {
    let mut perms: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..d {
        let mut next = Vec::new();
        for p in &perms {
            for a in 0..d {
                if !p.contains(&a) {
                    let mut q = p.clone();
                    q.push(a);
                    next.push(q);
                }
            }
        }
        perms = next;
    }
    perms
        .into_iter()
        .map(|p| {
            let mut v = vec![0usize];
            let mut mask = 0;
            for a in p {
                mask |= 1 << a;
                v.push(mask);
            }
            v
        })
        .collect()
}

fn factorial(d: usize) -> usize {
    (1..=d).product()
}

/// Tetrahedron DOS on the `N^d` grid with periodic wrap.
pub fn lt_dos<M: Model + ?Sized>(model: &M, e: f64, n: usize) -> Result<DosEstimate, DosError> {
    check_n(n, 2)?;
    check_energy(e)?;
    let start = Instant::now();
    let (value, n_evals) = match model.domain() {
        Domain::Periodic => periodic(model, e, n),
        Domain::Interval { half_width } => interval(model, e, n, half_width),
    };
    Ok(DosEstimate {
        value,
        n_evals,
        wall_time: start.elapsed().as_secs_f64(),
        method: Method::Lt,
        params: MethodParams::Lt { n },
        error_estimate: None,
    })
}

fn interval<M: Model + ?Sized>(model: &M, e: f64, n: usize, w: f64) -> (f64, u64) {
    let step = 2.0 * w / n as f64;
    let energies: Vec<Vec<f64>> = (0..=n).map(|i| model.energies(&[-w + i as f64 * step])).collect();
    let mut terms = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = 0.0;
        for b in 0..model.num_bands() {
            let (a, c) = (energies[i][b], energies[i + 1][b]);
            acc += simplex_dos(&[a.min(c), a.max(c)], e, step);
        }
        terms.push(acc);
    }
    (pairwise_sum(&terms), (n + 1) as u64)
}

fn periodic<M: Model + ?Sized>(model: &M, e: f64, n: usize) -> (f64, u64) {
    let d = model.dim();
    let nb = model.num_bands();
    let plane_len = n.pow(d as u32 - 1);
    let planes_per_block = (BLOCK_POINTS / plane_len).max(1);
    let n_blocks = n.div_ceil(planes_per_block);
    let simplices = kuhn_simplices(d);
    let volume = 1.0 / (n.pow(d as u32) as f64 * factorial(d) as f64);
    let nf = n as f64;

    let results: Vec<(f64, u64)> = (0..n_blocks)
        .into_par_iter()
        .map(|blk| {
            let p0 = blk * planes_per_block;
            let p1 = ((blk + 1) * planes_per_block).min(n);
            // energies for planes p0..=p1, the last one wrapped
            let mut cache = Vec::with_capacity((p1 - p0 + 1) * plane_len * nb);
            let mut k = [0.0; 3];
            for p in p0..=p1 {
                k[0] = (p % n) as f64 / nf - 0.5;
                for q in 0..plane_len {
                    let mut rest = q;
                    for j in (1..d).rev() {
                        k[j] = (rest % n) as f64 / nf - 0.5;
                        rest /= n;
                    }
                    cache.extend(model.energies(&k[..d]));
                }
            }
            let evals = ((p1 - p0 + 1) * plane_len) as u64;

            let lookup = |p: usize, idx: &[usize; 3], mask: usize| -> usize {
                let plane = p - p0 + (mask & 1);
                let mut q = 0;
                for j in 1..d {
                    q = q * n + (idx[j] + ((mask >> j) & 1)) % n;
                }
                (plane * plane_len + q) * nb
            };

            let mut acc = 0.0;
            let mut corners = [0.0; 4];
            let mut idx = [0usize; 3];
            for p in p0..p1 {
                for q in 0..plane_len {
                    let mut rest = q;
                    for j in (1..d).rev() {
                        idx[j] = rest % n;
                        rest /= n;
                    }
                    let mut offs = [0usize; 4];
                    for s in &simplices {
                        for (o, &m) in offs.iter_mut().zip(s) {
                            *o = lookup(p, &idx, m);
                        }
                        for b in 0..nb {
                            for (c, o) in corners[..=d].iter_mut().zip(&offs) {
                                *c = cache[o + b];
                            }
                            let c = &mut corners[..=d];
                            c.sort_by(f64::total_cmp);
                            acc += simplex_dos(c, e, volume);
                        }
                    }
                }
            }
            (acc, evals)
        })
        .collect();
    let sums: Vec<f64> = results.iter().map(|r| r.0).collect();
    (pairwise_sum(&sums), results.iter().map(|r| r.1).sum())
}
