//! Per-structure properties used as generation conditions and prediction
//! targets, and the CSV property table they are read from.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyName {
    PrettyFormula,
    EAboveHull,
    SpacegroupNumber,
    FormationEnergy,
    BandGap,
}

impl PropertyName {
    /// Rendering order of condition sentences.
    pub const ALL: [PropertyName; 5] = [
        PropertyName::PrettyFormula,
        PropertyName::EAboveHull,
        PropertyName::SpacegroupNumber,
        PropertyName::FormationEnergy,
        PropertyName::BandGap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PropertyName::PrettyFormula => "pretty_formula",
            PropertyName::EAboveHull => "e_above_hull",
            PropertyName::SpacegroupNumber => "spacegroup_number",
            PropertyName::FormationEnergy => "formation_energy",
            PropertyName::BandGap => "band_gap",
        }
    }

    /// Noun phrase used in prompts.
    pub fn description(self) -> &'static str {
        match self {
            PropertyName::PrettyFormula => "chemical formula",
            PropertyName::EAboveHull => "energy above the convex hull",
            PropertyName::SpacegroupNumber => "spacegroup number",
            PropertyName::FormationEnergy => "formation energy per atom",
            PropertyName::BandGap => "band gap",
        }
    }

    pub fn is_continuous(self) -> bool {
        matches!(
            self,
            PropertyName::EAboveHull | PropertyName::FormationEnergy | PropertyName::BandGap
        )
    }
}

impl fmt::Display for PropertyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PropertyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PropertyName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::MissingProperty(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropertyValue {
    Text(String),
    Integer(i64),
    Real(f64),
}

/// A sparse set of the five known properties.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PropertyValues {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pretty_formula: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_above_hull: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacegroup_number: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formation_energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_gap: Option<f64>,
}

/// Conditions share the property record's shape; an empty condition means
/// unconditional generation.
pub type GenerationCondition = PropertyValues;

impl PropertyValues {
    pub fn get(&self, name: PropertyName) -> Option<PropertyValue> {
        match name {
            PropertyName::PrettyFormula => self.pretty_formula.clone().map(PropertyValue::Text),
            PropertyName::SpacegroupNumber => self.spacegroup_number.map(|v| PropertyValue::Integer(v.into())),
            _ => self.real(name).map(PropertyValue::Real),
        }
    }

    pub fn real(&self, name: PropertyName) -> Option<f64> {
        match name {
            PropertyName::EAboveHull => self.e_above_hull,
            PropertyName::FormationEnergy => self.formation_energy,
            PropertyName::BandGap => self.band_gap,
            _ => None,
        }
    }

    pub fn present(&self) -> Vec<PropertyName> {
        PropertyName::ALL
            .into_iter()
            .filter(|p| self.get(*p).is_some())
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.present().is_empty()
    }

    /// Keeps only the listed properties.
    pub fn restricted_to(&self, names: &[PropertyName]) -> PropertyValues {
        let keep = |p: PropertyName| names.contains(&p);
        PropertyValues {
            pretty_formula: self.pretty_formula.clone().filter(|_| keep(PropertyName::PrettyFormula)),
            e_above_hull: self.e_above_hull.filter(|_| keep(PropertyName::EAboveHull)),
            spacegroup_number: self.spacegroup_number.filter(|_| keep(PropertyName::SpacegroupNumber)),
            formation_energy: self.formation_energy.filter(|_| keep(PropertyName::FormationEnergy)),
            band_gap: self.band_gap.filter(|_| keep(PropertyName::BandGap)),
        }
    }

    /// A usable condition: non-empty with finite numeric targets.
    pub fn validate_condition(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Condition("condition has no fields".into()));
        }
        for p in [PropertyName::EAboveHull, PropertyName::FormationEnergy, PropertyName::BandGap] {
            if self.real(p).is_some_and(|v| !v.is_finite()) {
                return Err(Error::Condition(format!("{p} target is not finite")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct PropertyRow {
    id: String,
    #[serde(default)]
    pretty_formula: Option<String>,
    #[serde(default)]
    spacegroup_number: Option<u16>,
    #[serde(default)]
    formation_energy: Option<f64>,
    #[serde(default)]
    band_gap: Option<f64>,
    #[serde(default)]
    e_above_hull: Option<f64>,
}

/// Reads `id,pretty_formula,spacegroup_number,formation_energy,band_gap,e_above_hull`.
/// Empty cells are absent properties.
pub fn read_property_table<R: Read>(reader: R) -> Result<Vec<(String, PropertyValues)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<PropertyRow>().enumerate() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(i + 2, |p| p.line() as usize);
            Error::parse(line, 1, e.to_string())
        })?;
        out.push((
            row.id,
            PropertyValues {
                pretty_formula: row.pretty_formula.filter(|s| !s.is_empty()),
                e_above_hull: row.e_above_hull,
                spacegroup_number: row.spacegroup_number,
                formation_energy: row.formation_energy,
                band_gap: row.band_gap,
            },
        ));
    }
    Ok(out)
}
