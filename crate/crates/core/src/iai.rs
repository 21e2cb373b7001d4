//! Iterated adaptive integration: nested 1D Gauss-Kronrod quadrature of the
//! smeared DOS, one level per dimension.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use thiserror::Error;

use crate::dos::{check_energy, DosError, DosEstimate, Method, MethodParams, SmearingParams};
use crate::model::{Domain, Model};

// Kronrod abscissae (descending, last is the centre); odd entries are Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl AdaptiveConfig {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self, DosError> {
        if !(abs_tol > 0.0 && rel_tol > 0.0 && abs_tol.is_finite() && rel_tol.is_finite()) {
            return Err(DosError::InvalidParameter(format!(
                "tolerances must be positive, got abs={abs_tol} rel={rel_tol}"
            )));
        }
        if max_subdivisions == 0 {
            return Err(DosError::InvalidParameter("max_subdivisions must be at least 1".into()));
        }
        Ok(Self {
            abs_tol,
            rel_tol,
            max_subdivisions,
        })
    }

    /// Absolute tolerance `tol`, negligible relative tolerance.
    pub fn with_tol(tol: f64) -> Result<Self, DosError> {
        Self::new(tol, 1e-14, 20_000)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub n_evals: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum QuadError {
    #[error("subdivision budget exhausted: value {} error {}", partial.value, partial.error)]
    BudgetExceeded { partial: QuadResult },
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Panel {
        a,
        b,
        value: kronrod * h,
        error: ((kronrod - gauss) * h).abs(),
    }
}

/// Globally adaptive GK(7,15) quadrature of `f` over `[a, b]`, refining the
/// panel with the largest error estimate first.
pub fn adaptive_1d<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    cfg: &AdaptiveConfig,
) -> Result<QuadResult, QuadError> {
    let mut heap = BinaryHeap::new();
    let first = gk15(&mut f, a, b);
    let mut n_evals = 15u64;
    let (mut value, mut error) = (first.value, first.error);
    heap.push(first);
    let mut subdivisions = 0;
    loop {
        if error <= cfg.abs_tol.max(cfg.rel_tol * value.abs()) {
            // running sums drift; confirm with a fresh sum
            value = heap.iter().map(|p| p.value).sum();
            error = heap.iter().map(|p| p.error).sum();
            if error <= cfg.abs_tol.max(cfg.rel_tol * value.abs()) {
                return Ok(QuadResult { value, error, n_evals });
            }
        }
        if subdivisions >= cfg.max_subdivisions {
            return Err(QuadError::BudgetExceeded {
                partial: QuadResult {
                    value: heap.iter().map(|p| p.value).sum(),
                    error: heap.iter().map(|p| p.error).sum(),
                    n_evals,
                },
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            // panel at floating-point resolution; accept it as is
            error -= worst.error;
            heap.push(Panel { error: 0.0, ..worst });
            continue;
        }
        let left = gk15(&mut f, worst.a, mid);
        let right = gk15(&mut f, mid, worst.b);
        n_evals += 30;
        subdivisions += 1;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
}

struct Nested<'a, M: ?Sized> {
    model: &'a M,
    energy: f64,
    p: SmearingParams,
    bounds: (f64, f64),
    dim: usize,
    evals: u64,
    exhausted: bool,
}

impl<M: Model + ?Sized> Nested<'_, M> {
    fn integrate(&mut self, level: usize, k: [f64; 3], cfg: AdaptiveConfig) -> QuadResult {
        let (a, b) = self.bounds;
        let inner_cfg = AdaptiveConfig {
            abs_tol: cfg.abs_tol / (2.0 * (b - a)),
            ..cfg
        };
        let res = adaptive_1d(
            |x| {
                let mut k = k;
                k[level] = x;
                if level + 1 == self.dim {
                    self.evals += 1;
                    self.model
                        .energies(&k[..self.dim])
                        .iter()
                        .map(|e| self.p.kernel(e - self.energy))
                        .sum()
                } else {
                    self.integrate(level + 1, k, inner_cfg).value
                }
            },
            a,
            b,
            &cfg,
        );
        match res {
            Ok(r) => r,
            Err(QuadError::BudgetExceeded { partial }) => {
                self.exhausted = true;
                partial
            }
        }
    }
}

/// Smeared DOS by iterated adaptive quadrature. `n_evals` counts innermost
/// integrand evaluations.
pub fn iai_dos<M: Model + ?Sized>(
    model: &M,
    energy: f64,
    p: SmearingParams,
    cfg: &AdaptiveConfig,
) -> Result<DosEstimate, DosError> {
    check_energy(energy)?;
    let start = Instant::now();
    let bounds = match model.domain() {
        Domain::Periodic => (-0.5, 0.5),
        Domain::Interval { half_width } => (-half_width, half_width),
    };
    let mut nested = Nested {
        model,
        energy,
        p,
        bounds,
        dim: model.dim(),
        evals: 0,
        exhausted: false,
    };
    let res = nested.integrate(0, [0.0; 3], *cfg);
    let est = DosEstimate {
        value: res.value,
        n_evals: nested.evals,
        wall_time: start.elapsed().as_secs_f64(),
        method: Method::Iai,
        params: MethodParams::Iai {
            eta: p.eta(),
            abs_tol: cfg.abs_tol,
            rel_tol: cfg.rel_tol,
        },
        error_estimate: Some(res.error),
    };
    if nested.exhausted {
        return Err(DosError::BudgetExceeded { partial: Box::new(est) });
    }
    Ok(est)
}
