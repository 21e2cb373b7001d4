//! Study drivers. Wall times come from the methods themselves, so model
//! construction and reference evaluation are never counted.

use std::fmt::Write as _;
use std::path::Path;

use bzdos::bcd::{bcd_diagnose, bcd_dos};
use bzdos::iai::{iai_dos, AdaptiveConfig};
use bzdos::lt::lt_dos;
use bzdos::model::Model;
use bzdos::ptr::{ptr_dos, ptr_dos_resolvent};
use bzdos::{DosError, DosEstimate, SmearingParams};

use crate::config::{ConfigError, MethodKind, StudySpec};
use crate::reference::{exact_reference, smeared_reference};
use crate::system::LoadedSystem;
use crate::StudyError;

pub const CONVERGENCE_HEADER: &str = "n,nevals,wall_time_s,value,abs_error,rel_error";

/// Largest number of k-points a default schedule may reach.
const MAX_GRID_POINTS: f64 = 4.2e6;

/// Grid size or tolerance of one method run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Size {
    N(usize),
    Tol(f64),
}

impl Size {
    fn label(self) -> String {
        match self {
            Size::N(n) => n.to_string(),
            Size::Tol(t) => format!("{t:e}"),
        }
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, StudyError> {
    Err(StudyError::Config(ConfigError::Invalid(msg.into())))
}

/// One method call. `eta` is required by the smeared methods, optional for
/// the BCD and ignored by the tetrahedron method.
pub fn evaluate(
    sys: &LoadedSystem,
    kind: MethodKind,
    e: f64,
    eta: Option<f64>,
    size: Size,
) -> Result<DosEstimate, StudyError> {
    let model = &sys.model;
    let smear = || -> Result<SmearingParams, StudyError> {
        match eta {
            Some(h) => Ok(SmearingParams::new(h)?),
            None => config_err(format!("method {} needs eta", kind.name())),
        }
    };
    let r = match (kind, size) {
        (MethodKind::Ptr, Size::N(n)) => ptr_dos(model, e, smear()?, n)?,
        (MethodKind::PtrResolvent, Size::N(n)) => ptr_dos_resolvent(model, e, smear()?, n)?,
        (MethodKind::Iai, Size::Tol(t)) => iai_dos(model, e, smear()?, &AdaptiveConfig::with_tol(t)?)?,
        (MethodKind::Lt, Size::N(n)) => lt_dos(model, e, n)?,
        (MethodKind::Bcd, Size::N(n)) => {
            let p = match eta {
                Some(h) => sys.bcd.with_eta(h),
                None => sys.bcd,
            };
            bcd_dos(model, e, &p, n)?
        }
        (MethodKind::Iai, Size::N(_)) => return config_err("iai takes a tolerance, not a grid size"),
        (_, Size::Tol(_)) => return config_err(format!("{} takes a grid size, not a tolerance", kind.name())),
    };
    Ok(r)
}

/// Default grid size per dimension for single runs.
pub fn default_n(dim: usize) -> usize {
    match dim {
        1 => 400,
        2 => 100,
        _ => 30,
    }
}

fn size_for(spec: &StudySpec, kind: MethodKind, dim: usize) -> Size {
    match kind {
        MethodKind::Iai => Size::Tol(spec.tol.unwrap_or(1e-6)),
        _ => Size::N(spec.n.unwrap_or_else(|| default_n(dim))),
    }
}

fn eta_for(spec: &StudySpec, kind: MethodKind) -> Result<Option<f64>, StudyError> {
    if spec.eta.is_empty() && !kind.is_smeared() {
        return Ok(None);
    }
    if kind == MethodKind::Lt {
        return Ok(None);
    }
    Ok(Some(spec.single_eta()?))
}

fn wall(spec: &StudySpec, t: f64) -> f64 {
    if spec.fixed_wall_time {
        0.0
    } else {
        t
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:e}")).unwrap_or_default()
}

// ---- dos ----

#[derive(Debug, Clone, PartialEq)]
pub struct DosRow {
    pub energy: f64,
    pub estimate: DosEstimate,
}

pub fn run_dos(spec: &StudySpec, sys: &LoadedSystem) -> Result<Vec<DosRow>, StudyError> {
    let kind = spec.method()?;
    if spec.energies.is_empty() {
        return config_err("no energy given");
    }
    let eta = eta_for(spec, kind)?;
    let size = size_for(spec, kind, sys.model.dim());
    spec.energies
        .iter()
        .map(|&e| {
            let estimate = evaluate(sys, kind, e, eta, size)?;
            Ok(DosRow { energy: e, estimate })
        })
        .collect()
}

pub fn dos_csv(spec: &StudySpec, rows: &[DosRow]) -> String {
    let mut s = String::from("energy,method,value,nevals,wall_time_s,error_estimate\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:e},{},{:e},{},{:e},{}",
            r.energy,
            r.estimate.method,
            r.estimate.value,
            r.estimate.n_evals,
            wall(spec, r.estimate.wall_time),
            fmt_opt(r.estimate.error_estimate)
        );
    }
    s
}

// ---- converge ----

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub size: Size,
    pub n_evals: u64,
    pub wall_time_s: f64,
    pub value: f64,
    pub abs_error: Option<f64>,
    pub rel_error: Option<f64>,
}

/// The study schedule as method sizes: grid sizes, or tolerances for IAI.
pub fn schedule(spec: &StudySpec, kind: MethodKind) -> Result<Vec<Size>, StudyError> {
    if spec.schedule.is_empty() {
        return config_err("empty schedule");
    }
    Ok(match kind {
        MethodKind::Iai => spec.schedule.iter().map(|&t| Size::Tol(t)).collect(),
        _ => spec.n_schedule()?.into_iter().map(Size::N).collect(),
    })
}

pub fn run_convergence(spec: &StudySpec, sys: &LoadedSystem) -> Result<Vec<ConvergenceRow>, StudyError> {
    let kind = spec.method()?;
    let e = spec.single_energy()?;
    let eta = eta_for(spec, kind)?;
    let sizes = schedule(spec, kind)?;
    let exact = exact_reference(sys, &spec.reference(), &spec.cache_dir(), e)?;
    if exact.is_none() && spec.reference.is_some() {
        return Err(StudyError::ReferenceMissing(format!("{} at E={e}", sys.name)));
    }
    sizes
        .into_iter()
        .map(|size| {
            let r = evaluate(sys, kind, e, eta, size)?;
            let abs = exact.map(|x| (r.value - x).abs());
            let rel = exact.and_then(|x| abs.map(|a| if x != 0.0 { a / x.abs() } else { a }));
            Ok(ConvergenceRow {
                size,
                n_evals: r.n_evals,
                wall_time_s: wall(spec, r.wall_time),
                value: r.value,
                abs_error: abs,
                rel_error: rel,
            })
        })
        .collect()
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = format!("{CONVERGENCE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:e},{:e},{},{}",
            r.size.label(),
            r.n_evals,
            r.wall_time_s,
            r.value,
            fmt_opt(r.abs_error),
            fmt_opt(r.rel_error)
        );
    }
    s
}

// ---- eta sweep ----

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub budget: u64,
    pub eta: f64,
    pub n: usize,
    pub n_evals: u64,
    pub value: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestEta {
    pub budget: u64,
    pub eta: f64,
    pub abs_error: f64,
}

/// For each evaluation budget, the PTR grid that fits it is run at every
/// eta, and the eta with the smallest error against the unsmeared reference
/// is kept.
pub fn run_eta_sweep(spec: &StudySpec, sys: &LoadedSystem) -> Result<(Vec<SweepRow>, Vec<BestEta>), StudyError> {
    let kind = spec.method()?;
    if !matches!(kind, MethodKind::Ptr | MethodKind::PtrResolvent) {
        return config_err("eta-sweep runs the uniform-grid smeared methods (ptr, ptr-resolvent)");
    }
    if spec.eta.is_empty() {
        return config_err("eta-sweep needs an eta grid");
    }
    if spec.budgets.is_empty() {
        return config_err("eta-sweep needs evaluation budgets");
    }
    let e = spec.single_energy()?;
    let exact = exact_reference(sys, &spec.reference(), &spec.cache_dir(), e)?
        .ok_or_else(|| StudyError::ReferenceMissing(format!("{} at E={e}", sys.name)))?;
    let d = sys.model.dim() as i32;
    let mut rows = Vec::new();
    let mut best = Vec::new();
    for &budget in &spec.budgets {
        let mut n = (budget as f64).powf(1.0 / d as f64).floor() as usize;
        // guard against the root landing just below an exact power
        while ((n + 1) as u64).pow(d as u32) <= budget {
            n += 1;
        }
        let n = n.max(1);
        let mut pick: Option<BestEta> = None;
        for &eta in &spec.eta {
            let r = evaluate(sys, kind, e, Some(eta), Size::N(n))?;
            let err = (r.value - exact).abs();
            rows.push(SweepRow {
                budget,
                eta,
                n,
                n_evals: r.n_evals,
                value: r.value,
                abs_error: err,
            });
            if pick.as_ref().is_none_or(|p| err < p.abs_error) {
                pick = Some(BestEta {
                    budget,
                    eta,
                    abs_error: err,
                });
            }
        }
        best.push(pick.expect("eta grid is nonempty"));
    }
    Ok((rows, best))
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("budget,eta,n,nevals,value,abs_error\n");
    for r in rows {
        let _ = writeln!(s, "{},{:e},{},{},{:e},{:e}", r.budget, r.eta, r.n, r.n_evals, r.value, r.abs_error);
    }
    s
}

pub fn best_eta_csv(best: &[BestEta]) -> String {
    let mut s = String::from("budget,best_eta,abs_error\n");
    for b in best {
        let _ = writeln!(s, "{},{:e},{:e}", b.budget, b.eta, b.abs_error);
    }
    s
}

// ---- cost to accuracy ----

#[derive(Debug, Clone, PartialEq)]
pub struct CostRow {
    pub eta: f64,
    /// Cheapest size reaching the target, or the last one tried.
    pub size: Size,
    pub n_evals: u64,
    pub wall_time_s: f64,
    pub value: f64,
    pub abs_error: f64,
    pub reached: bool,
}

fn default_n_candidates(dim: usize) -> Vec<usize> {
    let cap = MAX_GRID_POINTS.powf(1.0 / dim as f64) as usize;
    let mut v = vec![];
    let mut n = 16;
    while n <= cap {
        v.push(n);
        n *= 2;
    }
    v
}

/// Cheapest run per eta whose error against the smeared reference is at most
/// `target`. Grid methods scan the schedule (default: doubling from 16) and
/// then bisect between the last failing and the first passing size; IAI
/// takes the loosest passing tolerance.
pub fn run_cost(spec: &StudySpec, sys: &LoadedSystem) -> Result<Vec<CostRow>, StudyError> {
    let kind = spec.method()?;
    if kind == MethodKind::Lt {
        return config_err("cost studies compare smeared targets; use ptr, ptr-resolvent, iai or bcd");
    }
    if spec.eta.is_empty() {
        return config_err("cost needs an eta grid");
    }
    let target = spec.target.ok_or_else(|| ConfigError::Invalid("cost needs a target error".into()))?;
    let e = spec.single_energy()?;
    let mut rows = Vec::new();
    for &eta in &spec.eta {
        let reference = smeared_reference(sys, e, eta)?;
        let run = |size: Size| -> Result<(DosEstimate, f64), StudyError> {
            let r = evaluate(sys, kind, e, Some(eta), size)?;
            let err = (r.value - reference).abs();
            Ok((r, err))
        };
        let row = |size: Size, r: &DosEstimate, err: f64, reached: bool| CostRow {
            eta,
            size,
            n_evals: r.n_evals,
            wall_time_s: wall(spec, r.wall_time),
            value: r.value,
            abs_error: err,
            reached,
        };
        if kind == MethodKind::Iai {
            let tols: Vec<f64> = if spec.schedule.is_empty() {
                (3..=12).map(|p| 10f64.powi(-p)).collect()
            } else {
                spec.schedule.iter().rev().copied().collect()
            };
            let mut last = None;
            for t in tols {
                match run(Size::Tol(t)) {
                    Ok((r, err)) => {
                        let ok = err <= target;
                        last = Some(row(Size::Tol(t), &r, err, ok));
                        if ok {
                            break;
                        }
                    }
                    Err(StudyError::Dos(DosError::BudgetExceeded { partial })) => {
                        let err = (partial.value - reference).abs();
                        last = Some(row(Size::Tol(t), &partial, err, false));
                        break;
                    }
                    Err(other) => return Err(other),
                }
            }
            rows.push(last.expect("tolerance list is nonempty"));
            continue;
        }
        let candidates = if spec.schedule.is_empty() {
            default_n_candidates(sys.model.dim())
        } else {
            spec.n_schedule()?
        };
        let mut prev_fail: Option<usize> = None;
        let mut found: Option<(usize, DosEstimate, f64)> = None;
        let mut last = None;
        for &n in &candidates {
            let (r, err) = run(Size::N(n))?;
            if err <= target {
                found = Some((n, r, err));
                break;
            }
            prev_fail = Some(n);
            last = Some((n, r, err));
        }
        match found {
            Some((mut hi, mut best, mut best_err)) => {
                let mut lo = prev_fail.unwrap_or(0);
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    if mid < 1 {
                        break;
                    }
                    let (r, err) = run(Size::N(mid))?;
                    if err <= target {
                        hi = mid;
                        best = r;
                        best_err = err;
                    } else {
                        lo = mid;
                    }
                }
                rows.push(row(Size::N(hi), &best, best_err, true));
            }
            None => {
                let (n, r, err) = last.expect("candidate list is nonempty");
                rows.push(row(Size::N(n), &r, err, false));
            }
        }
    }
    Ok(rows)
}

pub fn cost_csv(rows: &[CostRow]) -> String {
    let mut s = String::from("eta,n,nevals,wall_time_s,value,abs_error,reached\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:e},{},{},{:e},{:e},{:e},{}",
            r.eta,
            r.size.label(),
            r.n_evals,
            r.wall_time_s,
            r.value,
            r.abs_error,
            r.reached
        );
    }
    s
}

/// Least-squares `p` in `n_evals ~ eta^{-p}` over the rows that reached the target.
pub fn fit_cost_exponent(rows: &[CostRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.reached)
        .map(|r| (-r.eta.ln(), (r.n_evals as f64).ln()))
        .collect();
    fit_slope(&pts)
}

/// Least-squares slope through `(x, y)` points; `None` below two distinct x.
pub fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

// ---- diagnose ----

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnosis {
    pub failed: bool,
    pub report: String,
}

pub fn run_diagnose(spec: &StudySpec, sys: &LoadedSystem) -> Result<Diagnosis, StudyError> {
    if spec.energies.is_empty() {
        return config_err("no energy given");
    }
    let n = spec.n.unwrap_or_else(|| default_n(sys.model.dim()).min(64));
    let p = sys.bcd;
    let mut report = String::new();
    let mut failed = false;
    for &e in &spec.energies {
        let r = bcd_diagnose(&sys.model, e, &p, n);
        failed |= r.failed;
        let _ = writeln!(
            report,
            "{} E={e}: {} (worst Im {:e}, {} band states inspected, {} above tolerance {:e})",
            sys.name,
            if r.failed { "FAILED" } else { "ok" },
            r.worst_im,
            r.inspected,
            r.entries.len(),
            p.diag_tol
        );
        for w in r.worst_offenders(5) {
            let k: Vec<String> = w.k.iter().map(|x| format!("{x:.4}")).collect();
            let _ = writeln!(
                report,
                "  k=({}) band {} energy {:.6} Im {:e}",
                k.join(", "),
                w.band,
                w.energy,
                w.im_shift
            );
        }
    }
    Ok(Diagnosis { failed, report })
}

pub fn write_file(path: &Path, text: &str) -> Result<(), StudyError> {
    let io = |source| StudyError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
    }
    std::fs::write(path, text).map_err(io)
}
