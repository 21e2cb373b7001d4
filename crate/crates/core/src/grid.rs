//! Uniform grids and the deterministic parallel reduction used by every
//! grid-based method.

use std::ops::Add;

use rayon::prelude::*;

use crate::model::{Domain, KPoint};

/// Points per sequential block of the reduction. The block layout only
/// depends on the number of terms, so sums are identical for any thread count.
pub const BLOCK: usize = 1024;

/// The `N^d` points `n/N - 1/2`, first axis slowest.
pub fn ptr_grid(d: usize, n: usize) -> Vec<KPoint> {
    assert!((1..=3).contains(&d), "dimension must be 1, 2 or 3");
    let grid = QuadGrid::new(Domain::Periodic, d, n);
    (0..grid.len())
        .map(|i| KPoint::new(&grid.node(i).0[..d]).expect("grid points are finite"))
        .collect()
}

/// Quadrature nodes for a model domain: the periodic trapezoidal rule on the
/// unit cube, or the closed trapezoidal rule on an interval.
#[derive(Debug, Clone, Copy)]
pub struct QuadGrid {
    dim: usize,
    n: usize,
    domain: Domain,
}

impl QuadGrid {
    pub fn new(domain: Domain, dim: usize, n: usize) -> Self {
        assert!(n >= 1);
        Self { dim, n, domain }
    }

    pub fn len(&self) -> usize {
        match self.domain {
            Domain::Periodic => self.n.pow(self.dim as u32),
            Domain::Interval { .. } => self.n + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Node `idx` and its weight. Unused trailing coordinates are zero.
    pub fn node(&self, idx: usize) -> ([f64; 3], f64) {
        let mut k = [0.0; 3];
        match self.domain {
            Domain::Periodic => {
                let nf = self.n as f64;
                let mut rest = idx;
                for j in (0..self.dim).rev() {
                    k[j] = (rest % self.n) as f64 / nf - 0.5;
                    rest /= self.n;
                }
                (k, 1.0 / self.len() as f64)
            }
            Domain::Interval { half_width } => {
                let step = 2.0 * half_width / self.n as f64;
                k[0] = -half_width + idx as f64 * step;
                let w = if idx == 0 || idx == self.n { 0.5 * step } else { step };
                (k, w)
            }
        }
    }
}

/// Pairwise (tree) sum with a fixed shape.
pub fn pairwise_sum<T: Copy + Default + Add<Output = T>>(v: &[T]) -> T {
    match v.len() {
        0 => T::default(),
        1 => v[0],
        n => {
            let (a, b) = v.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// `sum_{i < len} f(i)` in parallel with a thread-count-independent result.
pub fn ordered_sum<T, F>(len: usize, f: F) -> T
where
    T: Copy + Default + Send + Add<Output = T>,
    F: Fn(usize) -> T + Sync,
{
    let blocks: Vec<T> = (0..len.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = T::default();
            for i in b * BLOCK..((b + 1) * BLOCK).min(len) {
                acc = acc + f(i);
            }
            acc
        })
        .collect();
    pairwise_sum(&blocks)
}

/// Fallible [`ordered_sum`]; the error reported is the one at the lowest index.
pub fn try_ordered_sum<T, E, F>(len: usize, f: F) -> Result<T, E>
where
    T: Copy + Default + Send + Add<Output = T>,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync,
{
    let blocks: Vec<Result<T, E>> = (0..len.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = T::default();
            for i in b * BLOCK..((b + 1) * BLOCK).min(len) {
                acc = acc + f(i)?;
            }
            Ok(acc)
        })
        .collect();
    let blocks = blocks.into_iter().collect::<Result<Vec<T>, E>>()?;
    Ok(pairwise_sum(&blocks))
}
