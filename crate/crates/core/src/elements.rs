//! Embedded element data: atomic number, mass, covalent radius,
//! electronegativity and common oxidation states.
//!
//! The table ships as `data/elements.dat`, one element per line:
//! `symbol Z mass_amu covalent_radius_angstrom electronegativity ox_states`,
//! where `ox_states` is a comma-separated list of signed integers and `#`
//! starts a comment line.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use once_cell::sync::Lazy;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ElementData {
    pub symbol: String,
    pub number: u8,
    /// Standard atomic weight in amu.
    pub mass: f64,
    /// Covalent radius in Å.
    pub covalent_radius: f64,
    /// Pauling electronegativity, 0.0 when undefined.
    pub electronegativity: f64,
    pub oxidation_states: Vec<i32>,
}

#[derive(Debug, Clone)]
pub struct ElementTable {
    entries: Vec<ElementData>,
    by_symbol: HashMap<String, usize>,
    by_number: HashMap<u8, usize>,
}

impl ElementTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut by_symbol = HashMap::new();
        let mut by_number = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::parse(lineno + 1, 1, msg.to_string());
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(bad("expected 6 fields"));
            }
            let symbol = fields[0].to_string();
            if !is_symbol_shaped(&symbol) {
                return Err(bad("malformed element symbol"));
            }
            let number: u8 = fields[1].parse().map_err(|_| bad("bad atomic number"))?;
            let mass: f64 = fields[2].parse().map_err(|_| bad("bad mass"))?;
            let covalent_radius: f64 = fields[3].parse().map_err(|_| bad("bad radius"))?;
            let electronegativity: f64 =
                fields[4].parse().map_err(|_| bad("bad electronegativity"))?;
            let oxidation_states = fields[5]
                .split(',')
                .map(|s| s.parse::<i32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("bad oxidation state list"))?;
            if by_symbol.contains_key(&symbol) || by_number.contains_key(&number) {
                return Err(bad("duplicate element"));
            }
            by_symbol.insert(symbol.clone(), entries.len());
            by_number.insert(number, entries.len());
            entries.push(ElementData {
                symbol,
                number,
                mass,
                covalent_radius,
                electronegativity,
                oxidation_states,
            });
        }
        Ok(ElementTable {
            entries,
            by_symbol,
            by_number,
        })
    }

    pub fn get(&self, symbol: &str) -> Option<&ElementData> {
        self.by_symbol.get(symbol).map(|&i| &self.entries[i])
    }

    pub fn by_number(&self, z: u8) -> Option<&ElementData> {
        self.by_number.get(&z).map(|&i| &self.entries[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &ElementData> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn is_symbol_shaped(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && chars.all(|c| c.is_ascii_lowercase())
        && s.len() <= 3
}

static TABLE: Lazy<ElementTable> = Lazy::new(|| {
    ElementTable::parse(include_str!("../data/elements.dat")).expect("embedded element table")
});

/// The shipped element table.
pub fn element_table() -> &'static ElementTable {
    &TABLE
}

/// A chemical element present in the shipped table, identified by atomic number.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element(u8);

impl Element {
    /// Case-sensitive symbol lookup ("Co" is cobalt, "CO" is rejected).
    pub fn from_symbol(symbol: &str) -> Result<Self> {
        TABLE
            .get(symbol)
            .map(|d| Element(d.number))
            .ok_or_else(|| Error::MissingElementData(symbol.to_string()))
    }

    pub fn from_number(z: u8) -> Result<Self> {
        TABLE
            .by_number(z)
            .map(|d| Element(d.number))
            .ok_or_else(|| Error::MissingElementData(format!("Z={z}")))
    }

    pub fn number(self) -> u8 {
        self.0
    }

    pub fn data(self) -> &'static ElementData {
        TABLE.by_number(self.0).expect("element constructed from table")
    }

    pub fn symbol(self) -> &'static str {
        &self.data().symbol
    }
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Element {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Element::from_symbol(s)
    }
}

impl Serialize for Element {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for Element {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Element::from_symbol(&s).map_err(serde::de::Error::custom)
    }
}
