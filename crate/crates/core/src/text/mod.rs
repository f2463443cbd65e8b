//! Text codecs: the space-group string (SGS) and XYZ formats exchanged
//! with language models, and a CIF subset for on-disk structures.

pub mod cif;
mod lines;
mod sgs;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::crystal::Crystal;
use crate::num::Real;
use crate::symmetry::SpaceGroup;

pub use lines::normalize_model_text;
pub use sgs::{
    format_angle, format_coordinate, format_length, parse_sgs, parse_xyz, serialize_sgs, serialize_xyz,
    sgs_to_crystal, SgsRecord, TEXT_EPS,
};

/// Crystal string format used in prompts and responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CrystalFormat {
    #[default]
    Sgs,
    Xyz,
}

impl fmt::Display for CrystalFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CrystalFormat::Sgs => "sgs",
            CrystalFormat::Xyz => "xyz",
        })
    }
}

impl FromStr for CrystalFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "sgs" => Ok(CrystalFormat::Sgs),
            "xyz" => Ok(CrystalFormat::Xyz),
            other => Err(format!("unknown format {other:?} (expected sgs or xyz)")),
        }
    }
}

/// Serializes in `format`; SGS output requires the crystal's group.
pub fn serialize_crystal<T: Real>(
    c: &Crystal<T>,
    group: &SpaceGroup,
    format: CrystalFormat,
    eps: T,
) -> crate::error::Result<String> {
    match format {
        CrystalFormat::Sgs => serialize_sgs(c, group, eps),
        CrystalFormat::Xyz => Ok(serialize_xyz(c)),
    }
}

/// Parses model or dataset text; the group is only known for SGS input.
pub fn parse_crystal<T: Real>(
    text: &str,
    format: CrystalFormat,
    eps: T,
) -> crate::error::Result<(Crystal<T>, Option<&'static SpaceGroup>)> {
    match format {
        CrystalFormat::Sgs => {
            let r = parse_sgs(text)?;
            Ok((sgs_to_crystal(&r, eps)?, Some(r.group()?)))
        }
        CrystalFormat::Xyz => Ok((parse_xyz(text)?, None)),
    }
}
