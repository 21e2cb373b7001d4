//! Small dense complex linear algebra.
//!
//! Everything here is sized for Bloch Hamiltonians with a handful of orbitals
//! (up to a few hundred at most): Hermitian eigendecomposition by cyclic
//! Jacobi rotations, general eigenvalues by Hessenberg reduction followed by
//! single-shift complex QR, and LU-based resolvent traces and determinants.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

/// Largest dimension accepted by the eigensolvers.
pub const MAX_DIM: usize = 256;

const HERMITIAN_TOL: f64 = 1e-10;
const DEFLATION_TOL: f64 = 1e-14;
const PIVOT_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension {0} outside the supported range 1..=256")]
    Dimension(usize),
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("shape mismatch: expected {expected} entries, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("matrix is not Hermitian (max deviation {deviation:e}, scale {scale:e})")]
    NotHermitian { deviation: f64, scale: f64 },
    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("singular shift: pivot {pivot:e} in column {column}")]
    SingularShift { column: usize, pivot: f64 },
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::Shape {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(idx) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: idx / cols.max(1),
                col: idx % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self, LinalgError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(LinalgError::Shape {
                    expected: n_cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(n_rows, n_cols, data)
    }

    /// Real-valued convenience constructor.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    /// `self += s * other`, entrywise.
    pub fn add_scaled(&mut self, s: C64, other: &ComplexMatrix) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Largest deviation from Hermiticity, `max |A - A^H|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    fn square_dim(&self) -> Result<usize, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(self.rows)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut out = self.clone();
        out.add_scaled(C64::new(1.0, 0.0), rhs);
        out
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut out = self.clone();
        out.add_scaled(C64::new(-1.0, 0.0), rhs);
        out
    }
}

/// Eigendecomposition of a Hermitian matrix. Column `n` of `vectors` pairs
/// with `values[n]`; values ascend.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
pub fn hermitian_eig(a: &ComplexMatrix) -> Result<HermitianEigen, LinalgError> {
    let n = a.square_dim()?;
    if n == 0 || n > MAX_DIM {
        return Err(LinalgError::Dimension(n));
    }
    let scale = a.max_abs();
    let deviation = a.hermiticity_defect();
    if deviation > HERMITIAN_TOL * scale {
        return Err(LinalgError::NotHermitian { deviation, scale });
    }

    // Work on the exactly Hermitian part.
    let mut m = ComplexMatrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)].conj()));
    for i in 0..n {
        m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
    }
    let mut v = ComplexMatrix::identity(n);
    let frob = m.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

    let max_sweeps = 64 * n.max(1);
    let mut converged = n == 1;
    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-17 * frob || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                jacobi_rotate(&mut m, &mut v, p, q);
            }
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence {
            iterations: max_sweeps,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}

/// Annihilates `m[p][q]` with the unitary `diag(1, e^{-i phi})` followed by
/// a real plane rotation; accumulates the rotation into `v`.
fn jacobi_rotate(m: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let g = m[(p, q)];
    let g_abs = g.norm();
    if g_abs == 0.0 {
        return;
    }
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    if g_abs < 1e-18 * (app.abs() + aqq.abs()) {
        m[(p, q)] = C64::new(0.0, 0.0);
        m[(q, p)] = C64::new(0.0, 0.0);
        return;
    }
    let phase = g / g_abs;
    let theta = (aqq - app) / (2.0 * g_abs);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = m.rows;
    let pc = phase.conj();

    // A <- A J
    for r in 0..n {
        let x = m[(r, p)];
        let y = m[(r, q)];
        m[(r, p)] = c * x - s * pc * y;
        m[(r, q)] = s * x + c * pc * y;
    }
    // A <- J^H A
    for r in 0..n {
        let x = m[(p, r)];
        let y = m[(q, r)];
        m[(p, r)] = c * x - s * phase * y;
        m[(q, r)] = s * x + c * phase * y;
    }
    for r in 0..n {
        let x = v[(r, p)];
        let y = v[(r, q)];
        v[(r, p)] = c * x - s * pc * y;
        v[(r, q)] = s * x + c * pc * y;
    }
    m[(p, q)] = C64::new(0.0, 0.0);
    m[(q, p)] = C64::new(0.0, 0.0);
    m[(p, p)] = C64::new(app - t * g_abs, 0.0);
    m[(q, q)] = C64::new(aqq + t * g_abs, 0.0);
}

/// Eigenvalues of a general complex matrix (unordered).
///
/// Householder reduction to upper Hessenberg form, then explicit
/// single-shift QR sweeps with Wilkinson shifts on the active block.
pub fn general_eigvals(a: &ComplexMatrix) -> Result<Vec<C64>, LinalgError> {
    let n = a.square_dim()?;
    if n == 0 || n > MAX_DIM {
        return Err(LinalgError::Dimension(n));
    }
    let mut h = a.clone();
    reduce_to_hessenberg(&mut h);
    let norm = h.max_abs();

    let mut eig = vec![C64::new(0.0, 0.0); n];
    let mut hi = n - 1;
    let mut since_deflation = 0usize;
    let cap = 30 * n;
    loop {
        if hi == 0 {
            eig[0] = h[(0, 0)];
            break;
        }
        // Locate the start of the active unreduced block.
        let mut lo = hi;
        while lo > 0 {
            let diag = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            let thr = DEFLATION_TOL * if diag > 0.0 { diag } else { norm };
            if h[(lo, lo - 1)].norm() <= thr {
                h[(lo, lo - 1)] = C64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            eig[hi] = h[(hi, hi)];
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        since_deflation += 1;
        if since_deflation > cap {
            return Err(LinalgError::NoConvergence { iterations: cap });
        }
        let shift = if since_deflation % 11 == 10 {
            // exceptional shift to break cycles
            h[(hi, hi)] + C64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };
        qr_sweep(&mut h, lo, hi, shift);
    }
    Ok(eig)
}

fn reduce_to_hessenberg(h: &mut ComplexMatrix) {
    let n = h.rows;
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let xnorm = (k + 1..n).map(|i| h[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let alpha = -phase * xnorm;
        let mut v: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for z in &mut v {
            *z /= vnorm;
        }
        // H <- (I - 2 v v^H) H
        for j in 0..n {
            let dot: C64 = (k + 1..n).map(|i| v[i - k - 1].conj() * h[(i, j)]).sum();
            for i in k + 1..n {
                h[(i, j)] -= 2.0 * v[i - k - 1] * dot;
            }
        }
        // H <- H (I - 2 v v^H)
        for i in 0..n {
            let dot: C64 = (k + 1..n).map(|j| h[(i, j)] * v[j - k - 1]).sum();
            for j in k + 1..n {
                h[(i, j)] -= 2.0 * dot * v[j - k - 1].conj();
            }
        }
        for i in k + 2..n {
            h[(i, k)] = C64::new(0.0, 0.0);
        }
    }
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = 0.5 * (a - d);
    let disc = (half * half + b * c).sqrt();
    let mid = 0.5 * (a + d);
    let l1 = mid + disc;
    let l2 = mid - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// One explicit shifted QR step, `H - mu = QR`, `H <- RQ + mu`, restricted to
/// the diagonal block `lo..=hi`.
fn qr_sweep(h: &mut ComplexMatrix, lo: usize, hi: usize, shift: C64) {
    for j in lo..=hi {
        h[(j, j)] -= shift;
    }
    let mut rotations = Vec::with_capacity(hi - lo);
    for j in lo..hi {
        let a = h[(j, j)];
        let b = h[(j + 1, j)];
        let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let (c, s) = if norm == 0.0 {
            (1.0, C64::new(0.0, 0.0))
        } else if a.norm() == 0.0 {
            (0.0, b.conj() / b.norm())
        } else {
            (a.norm() / norm, a * b.conj() / (a.norm() * norm))
        };
        for col in j..=hi {
            let x = h[(j, col)];
            let y = h[(j + 1, col)];
            h[(j, col)] = c * x + s * y;
            h[(j + 1, col)] = -s.conj() * x + c * y;
        }
        rotations.push((c, s));
    }
    for (offset, &(c, s)) in rotations.iter().enumerate() {
        let j = lo + offset;
        for r in lo..=(j + 1).min(hi) {
            let x = h[(r, j)];
            let y = h[(r, j + 1)];
            h[(r, j)] = c * x + s.conj() * y;
            h[(r, j + 1)] = -s * x + c * y;
        }
    }
    for j in lo..=hi {
        h[(j, j)] += shift;
    }
}

/// LU factorization with partial pivoting, stored in place.
struct Lu {
    lu: ComplexMatrix,
    perm: Vec<usize>,
    parity: f64,
}

fn lu_factor(mut a: ComplexMatrix) -> Result<Lu, (usize, f64)> {
    let n = a.rows;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut parity = 1.0;
    for k in 0..n {
        let (piv_row, piv_abs) = (k..n)
            .map(|i| (i, a[(i, k)].norm()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(piv_abs >= PIVOT_FLOOR) {
            return Err((k, piv_abs.max(0.0)));
        }
        if piv_row != k {
            for j in 0..n {
                a.data.swap(k * n + j, piv_row * n + j);
            }
            perm.swap(k, piv_row);
            parity = -parity;
        }
        let pivot = a[(k, k)];
        for i in k + 1..n {
            let factor = a[(i, k)] / pivot;
            a[(i, k)] = factor;
            if factor == C64::new(0.0, 0.0) {
                continue;
            }
            for j in k + 1..n {
                let u = a[(k, j)];
                a[(i, j)] -= factor * u;
            }
        }
    }
    Ok(Lu {
        lu: a,
        perm,
        parity,
    })
}

impl Lu {
    fn solve_unit(&self, col: usize, x: &mut [C64]) {
        let n = self.lu.rows;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = if self.perm[i] == col {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            };
        }
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
    }
}

/// `Tr (z - A)^{-1}` from one LU factorization and `dim` column solves.
pub fn resolvent_trace(a: &ComplexMatrix, z: C64) -> Result<C64, LinalgError> {
    let n = a.square_dim()?;
    let mut m = a.scale(C64::new(-1.0, 0.0));
    for i in 0..n {
        m[(i, i)] += z;
    }
    if n == 1 {
        let d = m[(0, 0)];
        if !(d.norm() >= PIVOT_FLOOR) {
            return Err(LinalgError::SingularShift {
                column: 0,
                pivot: d.norm(),
            });
        }
        return Ok(1.0 / d);
    }
    let lu = lu_factor(m).map_err(|(column, pivot)| LinalgError::SingularShift { column, pivot })?;
    let mut x = vec![C64::new(0.0, 0.0); n];
    let mut tr = C64::new(0.0, 0.0);
    for j in 0..n {
        lu.solve_unit(j, &mut x);
        tr += x[j];
    }
    Ok(tr)
}

/// Determinant via LU with partial pivoting; singular input gives zero.
pub fn complex_det(a: &ComplexMatrix) -> Result<C64, LinalgError> {
    let n = a.square_dim()?;
    if a.data.iter().any(|z| !z.is_finite()) {
        // propagate rather than report a spurious singular matrix
        return Ok(C64::new(f64::NAN, f64::NAN));
    }
    match lu_factor(a.clone()) {
        Ok(lu) => {
            let mut det = C64::new(lu.parity, 0.0);
            for i in 0..n {
                det *= lu.lu[(i, i)];
            }
            Ok(det)
        }
        Err(_) => Ok(C64::new(0.0, 0.0)),
    }
}
