//! Reference DOS values for the error columns.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use bzdos::iai::{iai_dos, AdaptiveConfig};
use bzdos::lt::lt_dos;
use bzdos::systems::{ExactDos, GRAPHENE_REFERENCE_N};
use bzdos::SmearingParams;

use crate::config::ReferenceSource;
use crate::system::LoadedSystem;
use crate::StudyError;

/// Unsmeared reference at `e`, or `None` if the source has no value there.
pub fn exact_reference(
    sys: &LoadedSystem,
    source: &ReferenceSource,
    cache_dir: &Path,
    e: f64,
) -> Result<Option<f64>, StudyError> {
    match source {
        ReferenceSource::File(path) => Ok(Some(value_from_csv(path, e)?)),
        ReferenceSource::Analytic => {
            let Some(r) = &sys.reference else {
                return Ok(None);
            };
            match r.exact {
                ExactDos::Graphene { .. } => {
                    cached_lt(sys, cache_dir, GRAPHENE_REFERENCE_N, e).map(Some)
                }
                _ => Ok(r.exact_dos(e)),
            }
        }
    }
}

/// Lorentzian-smeared reference by tight adaptive quadrature.
pub fn smeared_reference(sys: &LoadedSystem, e: f64, eta: f64) -> Result<f64, StudyError> {
    let cfg = AdaptiveConfig::new(1e-12, 1e-14, 500_000)?;
    Ok(iai_dos(&sys.model, e, SmearingParams::new(eta)?, &cfg)?.value)
}

fn cache_file(cache_dir: &Path, name: &str, n: usize) -> PathBuf {
    cache_dir.join(format!("{name}-lt-n{n}.txt"))
}

/// Tetrahedron value at `(system, N, E)`, computed once and kept on disk.
/// One `energy value` pair per line, both in round-trip notation.
pub fn cached_lt(sys: &LoadedSystem, cache_dir: &Path, n: usize, e: f64) -> Result<f64, StudyError> {
    let path = cache_file(cache_dir, &sys.name, n);
    let io = |source| StudyError::Io {
        path: path.clone(),
        source,
    };
    let mut table = BTreeMap::new();
    if let Ok(text) = fs::read_to_string(&path) {
        for line in text.lines() {
            let mut it = line.split_whitespace();
            if let (Some(a), Some(b)) = (it.next(), it.next()) {
                if let (Ok(a), Ok(b)) = (a.parse::<f64>(), b.parse::<f64>()) {
                    table.insert(a.to_bits(), b);
                }
            }
        }
    }
    if let Some(v) = table.get(&e.to_bits()) {
        return Ok(*v);
    }
    let v = lt_dos(&sys.model, e, n)?.value;
    fs::create_dir_all(cache_dir).map_err(io)?;
    let mut f = fs::OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
    writeln!(f, "{e:?} {v:?}").map_err(io)?;
    Ok(v)
}

/// A CSV with `energy` and `value` columns is looked up by energy; one with
/// only `value` (a convergence table) gives its last row.
pub fn value_from_csv(path: &Path, e: f64) -> Result<f64, StudyError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|err| StudyError::Csv {
        path: path.to_path_buf(),
        source: err,
    })?;
    let headers = rdr
        .headers()
        .map_err(|err| StudyError::Csv {
            path: path.to_path_buf(),
            source: err,
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let Some(vcol) = col("value") else {
        return Err(StudyError::ReferenceMissing(format!("{} has no value column", path.display())));
    };
    let ecol = col("energy");
    let mut last = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|err| StudyError::Csv {
            path: path.to_path_buf(),
            source: err,
        })?;
        let parse = |i: usize| rec.get(i).and_then(|s| s.trim().parse::<f64>().ok());
        let v = parse(vcol);
        match ecol {
            Some(ec) => {
                if let (Some(re), Some(v)) = (parse(ec), v) {
                    if (re - e).abs() <= 1e-12 * e.abs().max(1.0) {
                        return Ok(v);
                    }
                }
            }
            None => last = v.or(last),
        }
    }
    match (ecol, last) {
        (None, Some(v)) => Ok(v),
        _ => Err(StudyError::ReferenceMissing(format!("{} has no value for E={e}", path.display()))),
    }
}
