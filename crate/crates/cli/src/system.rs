//! Resolving a study's system: a named reference system or an hr.dat file.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use bzdos::bcd::{BcdParams, GradientCoords};
use bzdos::systems::{make_chain, make_free_gas, make_graphene, make_two_block_toy, ReferenceSystem, SystemModel};
use bzdos::wannier::{parse_hr, to_model};

use crate::config::{ConfigError, StudySpec};
use crate::StudyError;

pub const SYSTEM_NAMES: [&str; 6] = ["chain", "graphene", "free-gas-1d", "free-gas-2d", "free-gas-3d", "two-block"];

pub fn check_name(name: &str) -> Result<(), ConfigError> {
    if SYSTEM_NAMES.contains(&name) {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!(
            "unknown system '{name}', expected one of {}",
            SYSTEM_NAMES.join(", ")
        )))
    }
}

pub fn reference_system(name: &str) -> Result<ReferenceSystem, StudyError> {
    check_name(name)?;
    let sys = match name {
        "chain" => make_chain(1.0)?,
        "graphene" => make_graphene(1.0)?,
        "free-gas-1d" => make_free_gas(1, 1)?,
        "free-gas-2d" => make_free_gas(2, 1)?,
        "free-gas-3d" => make_free_gas(3, 1)?,
        "two-block" => make_two_block_toy(1.0, 2.0, 3.0)?,
        _ => unreachable!("name checked above"),
    };
    Ok(sys)
}

/// A model ready for study, with its reference data when it has any.
#[derive(Debug, Clone)]
pub struct LoadedSystem {
    pub name: String,
    pub model: SystemModel,
    pub reference: Option<ReferenceSystem>,
    /// BCD parameters after applying the study's overrides.
    pub bcd: BcdParams,
}

impl LoadedSystem {
    pub fn load(spec: &StudySpec) -> Result<Self, StudyError> {
        spec.validate()?;
        let (name, model, reference, base) = match (&spec.system, &spec.hr) {
            (Some(name), None) => {
                let sys = reference_system(name)?;
                (sys.name.clone(), sys.model.clone(), Some(sys.clone()), sys.bcd)
            }
            (None, Some(path)) => {
                let model = load_hr(path, spec.fermi)?;
                // Wannier Hamiltonians carry phases e^{ik.R} with k in radians
                let bcd = BcdParams::default().with_coords(GradientCoords::Radians);
                let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "hr".into());
                (name, SystemModel::TightBinding(model), None, bcd)
            }
            _ => unreachable!("validate rejects these"),
        };
        let bcd = BcdParams {
            alpha: spec.alpha.unwrap_or(base.alpha),
            delta_e: spec.delta_e.unwrap_or(base.delta_e),
            coords: spec.coords.map(Into::into).unwrap_or(base.coords),
            ..base
        };
        bcd.validate()?;
        Ok(Self {
            name,
            model,
            reference,
            bcd,
        })
    }
}

pub fn load_hr(path: &Path, fermi: f64) -> Result<bzdos::TightBindingModel, StudyError> {
    let file = File::open(path).map_err(|source| StudyError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let hr = parse_hr(BufReader::new(file))?;
    Ok(to_model(&hr, fermi)?)
}
