//! Reader and writer for Wannier90 `seedname_hr.dat` files.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;

use thiserror::Error;

use crate::linalg::{ComplexMatrix, C64};
use crate::model::{Closure, HoppingTerm, ModelError, TightBindingModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HrError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{what}: header says {expected}, found {got}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: duplicate record for R={r:?}, m={m}, n={n}")]
    DuplicateRecord { line: usize, r: [i32; 3], m: usize, n: usize },
    #[error("read error: {0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrRecord {
    pub r: [i32; 3],
    /// 1-based row index.
    pub m: usize,
    /// 1-based column index.
    pub n: usize,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HrFile {
    pub header: String,
    pub num_wann: usize,
    pub nrpts: usize,
    pub degeneracies: Vec<u32>,
    pub records: Vec<HrRecord>,
}

fn parse_err(line: usize, message: impl Into<String>) -> HrError {
    HrError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_int<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, HrError> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("expected integer {what}, found {tok:?}")))
}

fn parse_real(tok: &str, line: usize) -> Result<f64, HrError> {
    let v: f64 = tok
        .replace(['D', 'd'], "E")
        .parse()
        .map_err(|_| parse_err(line, format!("expected real number, found {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value {tok:?}")));
    }
    Ok(v)
}

/// Parse a Wannier90 v1 `hr.dat` stream.
pub fn parse_hr<R: BufRead>(reader: R) -> Result<HrFile, HrError> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next_line = |expect: usize| -> Result<Option<(usize, String)>, HrError> {
        match lines.next() {
            None => Ok(None),
            Some((no, Ok(text))) => Ok(Some((no, text))),
            Some((_, Err(e))) => Err(HrError::Io(format!("line {expect}: {e}"))),
        }
    };

    let header = next_line(1)?.map(|(_, t)| t.trim_end().to_string()).unwrap_or_default();

    let mut scalar = |no: usize, what: &str| -> Result<usize, HrError> {
        let (line, text) = next_line(no)?.ok_or_else(|| parse_err(no, format!("missing {what}")))?;
        let mut toks = text.split_whitespace();
        let tok = toks.next().ok_or_else(|| parse_err(line, format!("missing {what}")))?;
        let v: usize = parse_int(tok, line, what)?;
        if v == 0 {
            return Err(parse_err(line, format!("{what} must be positive")));
        }
        if toks.next().is_some() {
            return Err(parse_err(line, format!("trailing tokens after {what}")));
        }
        Ok(v)
    };
    let num_wann = scalar(2, "num_wann")?;
    let nrpts = scalar(3, "nrpts")?;

    let mut degeneracies = Vec::with_capacity(nrpts);
    let mut line_no = 3;
    while degeneracies.len() < nrpts {
        let (line, text) = next_line(line_no + 1)?.ok_or_else(|| {
            parse_err(line_no + 1, format!("expected {} more degeneracies", nrpts - degeneracies.len()))
        })?;
        line_no = line;
        let before = degeneracies.len();
        for tok in text.split_whitespace() {
            let v: u32 = parse_int(tok, line, "degeneracy")?;
            if v == 0 {
                return Err(parse_err(line, "degeneracy must be positive"));
            }
            degeneracies.push(v);
        }
        if degeneracies.len() == before {
            return Err(parse_err(line, "empty degeneracy line"));
        }
    }
    if degeneracies.len() != nrpts {
        return Err(HrError::CountMismatch {
            what: "degeneracies",
            expected: nrpts,
            got: degeneracies.len(),
        });
    }

    let mut records = Vec::with_capacity(nrpts * num_wann * num_wann);
    let mut seen = HashSet::new();
    let mut r_vectors = HashSet::new();
    while let Some((line, text)) = next_line(line_no + 1)? {
        line_no = line;
        let toks: Vec<&str> = text.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 7 {
            return Err(parse_err(line, format!("expected 7 fields, found {}", toks.len())));
        }
        let r = [
            parse_int(toks[0], line, "R1")?,
            parse_int(toks[1], line, "R2")?,
            parse_int(toks[2], line, "R3")?,
        ];
        let m: usize = parse_int(toks[3], line, "m")?;
        let n: usize = parse_int(toks[4], line, "n")?;
        if !(1..=num_wann).contains(&m) || !(1..=num_wann).contains(&n) {
            return Err(parse_err(line, format!("orbital index ({m}, {n}) outside 1..={num_wann}")));
        }
        let re = parse_real(toks[5], line)?;
        let im = parse_real(toks[6], line)?;
        if !seen.insert((r, m, n)) {
            return Err(HrError::DuplicateRecord { line, r, m, n });
        }
        r_vectors.insert(r);
        records.push(HrRecord { r, m, n, re, im });
    }
    if records.len() != nrpts * num_wann * num_wann {
        return Err(HrError::CountMismatch {
            what: "records",
            expected: nrpts * num_wann * num_wann,
            got: records.len(),
        });
    }
    if r_vectors.len() != nrpts {
        return Err(HrError::CountMismatch {
            what: "R vectors",
            expected: nrpts,
            got: r_vectors.len(),
        });
    }
    Ok(HrFile {
        header,
        num_wann,
        nrpts,
        degeneracies,
        records,
    })
}

impl HrFile {
    /// Distinct R vectors in order of first appearance; degeneracy `i`
    /// belongs to entry `i`.
    pub fn r_vectors(&self) -> Vec<[i32; 3]> {
        let mut seen = HashSet::new();
        self.records.iter().map(|r| r.r).filter(|r| seen.insert(*r)).collect()
    }

    /// Smallest dimension that holds every R vector (trailing components zero).
    pub fn inferred_dim(&self) -> usize {
        let mut dim = 1;
        for rec in &self.records {
            for j in (0..3).rev() {
                if rec.r[j] != 0 {
                    dim = dim.max(j + 1);
                    break;
                }
            }
        }
        dim
    }

    /// Describe a model in hr form. R vectors are written in lexicographic
    /// order; non-integer weights are folded into the matrices.
    pub fn from_model(model: &TightBindingModel, header: &str) -> Self {
        let nw = model.norb();
        let mut terms: Vec<&HoppingTerm> = model.terms().iter().collect();
        terms.sort_by_key(|t| t.r);
        let mut degeneracies = Vec::with_capacity(terms.len());
        let mut records = Vec::with_capacity(terms.len() * nw * nw);
        for t in terms {
            let (deg, scale) = if t.weight.fract() == 0.0 && t.weight >= 1.0 && t.weight <= u32::MAX as f64 {
                (t.weight as u32, 1.0)
            } else {
                (1, 1.0 / t.weight)
            };
            degeneracies.push(deg);
            for n in 0..nw {
                for m in 0..nw {
                    let v = t.matrix[(m, n)] * scale;
                    records.push(HrRecord {
                        r: t.r,
                        m: m + 1,
                        n: n + 1,
                        re: v.re,
                        im: v.im,
                    });
                }
            }
        }
        Self {
            header: header.to_string(),
            num_wann: nw,
            nrpts: degeneracies.len(),
            degeneracies,
            records,
        }
    }

    /// Serialize in canonical layout: R blocks in file order, column index
    /// slow and row index fast inside each block, full double precision.
    pub fn write(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header);
        let _ = writeln!(out, "{:12}", self.num_wann);
        let _ = writeln!(out, "{:12}", self.nrpts);
        for chunk in self.degeneracies.chunks(15) {
            for d in chunk {
                let _ = write!(out, "{d:5}");
            }
            out.push('\n');
        }
        let index: HashMap<([i32; 3], usize, usize), &HrRecord> =
            self.records.iter().map(|r| ((r.r, r.m, r.n), r)).collect();
        for r in self.r_vectors() {
            for n in 1..=self.num_wann {
                for m in 1..=self.num_wann {
                    let rec = index[&(r, m, n)];
                    let _ = writeln!(
                        out,
                        "{:5}{:5}{:5}{:5}{:5} {:>25.16e} {:>25.16e}",
                        r[0], r[1], r[2], m, n, rec.re, rec.im
                    );
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrOptions {
    /// Subtracted from the diagonal of `H_0`, so energies are relative to it.
    pub fermi_shift: f64,
    /// Reject missing `-R` partners instead of completing them.
    pub strict: bool,
    /// Model dimension; inferred from the R vectors when `None`.
    pub dim: Option<usize>,
}

impl Default for HrOptions {
    fn default() -> Self {
        Self {
            fermi_shift: 0.0,
            strict: false,
            dim: None,
        }
    }
}

/// Build a model with `H_R = (re + i im) / degeneracy(R)` and the Fermi
/// shift applied at `R = 0`.
pub fn to_model(hr: &HrFile, fermi_shift: f64) -> Result<TightBindingModel, HrError> {
    to_model_with(
        hr,
        &HrOptions {
            fermi_shift,
            ..HrOptions::default()
        },
    )
}

pub fn to_model_with(hr: &HrFile, opts: &HrOptions) -> Result<TightBindingModel, HrError> {
    let nw = hr.num_wann;
    let dim = opts.dim.unwrap_or_else(|| hr.inferred_dim());
    let order = hr.r_vectors();
    let mut blocks: HashMap<[i32; 3], ComplexMatrix> =
        order.iter().map(|r| (*r, ComplexMatrix::zeros(nw, nw))).collect();
    for rec in &hr.records {
        let b = blocks.get_mut(&rec.r).expect("R collected above");
        b[(rec.m - 1, rec.n - 1)] = C64::new(rec.re, rec.im);
    }
    let mut terms = Vec::with_capacity(order.len());
    for (r, deg) in order.iter().zip(&hr.degeneracies) {
        let mut matrix = blocks.remove(r).expect("R collected above");
        if *r == [0, 0, 0] {
            // stored values are divided by the weight at evaluation time
            for i in 0..nw {
                matrix[(i, i)] -= C64::new(opts.fermi_shift * *deg as f64, 0.0);
            }
        }
        terms.push(HoppingTerm::with_weight(*r, matrix, *deg as f64));
    }
    if opts.fermi_shift != 0.0 && !order.contains(&[0, 0, 0]) {
        let shift = ComplexMatrix::identity(nw).scale(C64::new(-opts.fermi_shift, 0.0));
        terms.push(HoppingTerm::new([0, 0, 0], shift));
    }
    let closure = if opts.strict { Closure::Strict } else { Closure::Complete };
    Ok(TightBindingModel::new(dim, nw, terms, closure)?)
}
