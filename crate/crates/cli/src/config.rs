//! Study configuration: a TOML file whose keys can be overridden by flags.
//!
//! ```toml
//! system = "chain"          # or hr = "wannier_hr.dat" with fermi = 5.2
//! method = "bcd"            # ptr | ptr-resolvent | iai | lt | bcd
//! energies = [0.0, 1.9]
//! alpha = 0.1               # BCD amplitude, default per system
//! delta_e = 0.3             # BCD window, default per system
//! coords = "radians"        # BCD gradient coordinates, default per system
//! eta = [0.05]              # smearing; several values for eta-sweep and cost
//! n = 200                   # grid size for dos and diagnose
//! tol = 1e-8                # IAI absolute tolerance for dos
//! schedule = [25, 50, 100]  # N values, or tolerances for iai
//! budgets = [100, 1000]     # evaluation budgets for eta-sweep
//! target = 1e-5             # target error for cost
//! reference = "analytic"    # or a CSV path with a value column
//! out = "out"
//! threads = 1
//! fixed_wall_time = false   # write 0 as wall time, for byte-stable CSVs
//! ```

use std::path::{Path, PathBuf};

use bzdos::bcd::GradientCoords;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Ptr,
    PtrResolvent,
    Iai,
    Lt,
    Bcd,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Ptr => "ptr",
            MethodKind::PtrResolvent => "ptr-resolvent",
            MethodKind::Iai => "iai",
            MethodKind::Lt => "lt",
            MethodKind::Bcd => "bcd",
        }
    }

    pub fn is_smeared(self) -> bool {
        matches!(self, MethodKind::Ptr | MethodKind::PtrResolvent | MethodKind::Iai)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Coords {
    Fractional,
    Radians,
}

impl From<Coords> for GradientCoords {
    fn from(c: Coords) -> Self {
        match c {
            Coords::Fractional => GradientCoords::Fractional,
            Coords::Radians => GradientCoords::Radians,
        }
    }
}

/// Reference values for error columns.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSource {
    Analytic,
    File(PathBuf),
}

impl ReferenceSource {
    pub fn parse(s: &str) -> Self {
        if s == "analytic" {
            ReferenceSource::Analytic
        } else {
            ReferenceSource::File(PathBuf::from(s))
        }
    }
}

/// Everything a study needs. Unset options fall back to per-system defaults
/// when the study runs.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub system: Option<String>,
    pub hr: Option<PathBuf>,
    #[serde(default)]
    pub fermi: f64,
    pub method: Option<MethodKind>,
    #[serde(default)]
    pub energies: Vec<f64>,
    pub alpha: Option<f64>,
    pub delta_e: Option<f64>,
    pub coords: Option<Coords>,
    #[serde(default)]
    pub eta: Vec<f64>,
    pub n: Option<usize>,
    pub tol: Option<f64>,
    #[serde(default)]
    pub schedule: Vec<f64>,
    #[serde(default)]
    pub budgets: Vec<u64>,
    pub target: Option<f64>,
    pub reference: Option<String>,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub fixed_wall_time: bool,
}

impl StudySpec {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Keys set in `over` replace those in `self`.
    pub fn merge(mut self, over: StudySpec) -> Self {
        macro_rules! take {
            ($($f:ident),*) => {$(if over.$f.is_some() { self.$f = over.$f; })*};
        }
        macro_rules! take_vec {
            ($($f:ident),*) => {$(if !over.$f.is_empty() { self.$f = over.$f; })*};
        }
        let (new_hr, new_system) = (over.hr.is_some(), over.system.is_some());
        take!(system, hr, method, alpha, delta_e, coords, n, tol, target, reference, out, cache_dir, threads);
        take_vec!(energies, eta, schedule, budgets);
        if over.fermi != 0.0 {
            self.fermi = over.fermi;
        }
        self.fixed_wall_time |= over.fixed_wall_time;
        // a system given on one side replaces the other kind of system
        if new_hr && !new_system {
            self.system = None;
        } else if new_system && !new_hr {
            self.hr = None;
        }
        self
    }

    pub fn method(&self) -> Result<MethodKind, ConfigError> {
        self.method.ok_or_else(|| ConfigError::Invalid("no method given".into()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.out_dir().join(".bzdos-cache"))
    }

    pub fn reference(&self) -> ReferenceSource {
        self.reference
            .as_deref()
            .map(ReferenceSource::parse)
            .unwrap_or(ReferenceSource::Analytic)
    }

    /// Checks that do not need the model.
    pub fn validate(&self) -> Result<(), ConfigError> {
        match (&self.system, &self.hr) {
            (None, None) => return invalid("no system given: use a reference system name or an hr file"),
            (Some(_), Some(_)) => return invalid("give either a system name or an hr file, not both"),
            (Some(name), None) => {
                crate::system::check_name(name)?;
            }
            _ => {}
        }
        if !self.fermi.is_finite() {
            return invalid("fermi shift must be finite");
        }
        if let Some(e) = self.energies.iter().find(|e| !e.is_finite()) {
            return invalid(format!("energy {e} is not finite"));
        }
        if self.eta.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return invalid("eta values must be positive");
        }
        for (name, v) in [("alpha", self.alpha), ("delta-e", self.delta_e), ("tol", self.tol), ("target", self.target)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return invalid(format!("{name} must be positive, got {v}"));
                }
            }
        }
        if self.schedule.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return invalid("schedule entries must be positive");
        }
        if self.schedule.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("schedule must be strictly increasing");
        }
        if self.budgets.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("budgets must be strictly increasing");
        }
        if self.threads == Some(0) {
            return invalid("threads must be at least 1");
        }
        Ok(())
    }

    /// The single energy of a one-energy study.
    pub fn single_energy(&self) -> Result<f64, ConfigError> {
        match self.energies.as_slice() {
            [e] => Ok(*e),
            [] => invalid("no energy given"),
            _ => invalid("this study takes exactly one energy"),
        }
    }

    /// The single smearing width, when the method needs one.
    pub fn single_eta(&self) -> Result<f64, ConfigError> {
        match self.eta.as_slice() {
            [h] => Ok(*h),
            [] => invalid("no eta given"),
            _ => invalid("this study takes exactly one eta"),
        }
    }

    /// Schedule entries as grid sizes.
    pub fn n_schedule(&self) -> Result<Vec<usize>, ConfigError> {
        self.schedule
            .iter()
            .map(|&s| {
                if s.fract() != 0.0 || s < 1.0 {
                    invalid(format!("grid size {s} is not a positive integer"))
                } else {
                    Ok(s as usize)
                }
            })
            .collect()
    }
}
