//! Periodic crystals: a lattice plus an ordered list of species at
//! fractional positions.

use std::collections::BTreeMap;
use std::fmt;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::elements::Element;
use crate::error::{Error, Result};
use crate::lattice::{wrap_fractional, LatticeMatrix, LatticeParameters};
use crate::num::{cast3, torus_max_separation, Real, Vec3};

/// Two sites closer than this (per axis, fractional) are the same point.
pub const DUPLICATE_SITE_TOL: f64 = 1e-6;

/// 1 amu in grams.
const AMU_GRAMS: f64 = 1.660_539_066_60e-24;
/// 1 Å³ in cm³.
const CUBIC_ANGSTROM_CM3: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site<T = f64> {
    pub element: Element,
    pub frac: Vec3<T>,
}

impl<T: Real> Site<T> {
    /// Builds a site with its coordinates wrapped into `[0, 1)`.
    pub fn new(element: Element, frac: Vec3<T>) -> Self {
        Site {
            element,
            frac: wrap_fractional(frac),
        }
    }

    pub fn parse(symbol: &str, frac: Vec3<T>) -> Result<Self> {
        Ok(Site::new(Element::from_symbol(symbol)?, frac))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crystal<T = f64> {
    lattice: LatticeMatrix<T>,
    sites: Vec<Site<T>>,
}

impl<T: Real> Crystal<T> {
    /// Wraps every site and rejects empty or self-overlapping site lists.
    pub fn new(lattice: LatticeMatrix<T>, sites: Vec<Site<T>>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidStructure("crystal has no sites".into()));
        }
        let sites: Vec<Site<T>> = sites
            .into_iter()
            .map(|s| Site::new(s.element, s.frac))
            .collect();
        for s in &sites {
            if s.frac.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidStructure("non-finite coordinate".into()));
            }
        }
        let tol = T::lit(DUPLICATE_SITE_TOL);
        for i in 0..sites.len() {
            for j in i + 1..sites.len() {
                if torus_max_separation(sites[i].frac, sites[j].frac) < tol {
                    return Err(Error::InvalidStructure(format!(
                        "sites {i} and {j} occupy the same position"
                    )));
                }
            }
        }
        Ok(Crystal { lattice, sites })
    }

    pub fn from_parameters(p: &LatticeParameters<T>, sites: Vec<Site<T>>) -> Result<Self> {
        Self::new(LatticeMatrix::from_parameters(p)?, sites)
    }

    pub fn lattice(&self) -> &LatticeMatrix<T> {
        &self.lattice
    }

    pub fn sites(&self) -> &[Site<T>] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn parameters(&self) -> LatticeParameters<T> {
        self.lattice
            .parameters()
            .expect("validated lattice has non-zero rows")
    }

    pub fn composition(&self) -> Composition {
        Composition::from_elements(self.sites.iter().map(|s| s.element))
    }

    /// Mass density in g/cm³.
    pub fn density(&self) -> T {
        let mass: f64 = self.sites.iter().map(|s| s.element.data().mass).sum();
        let volume = self.lattice.volume().as_f64();
        T::lit(mass * AMU_GRAMS / (volume * CUBIC_ANGSTROM_CM3))
    }

    /// Same sites, lattice scaled uniformly by `factor`.
    pub fn scaled(&self, factor: T) -> Result<Self> {
        Ok(Crystal {
            lattice: self.lattice.scaled(factor)?,
            sites: self.sites.clone(),
        })
    }

    pub fn cast<U: Real>(&self) -> Crystal<U> {
        Crystal {
            lattice: self.lattice.cast(),
            sites: self
                .sites
                .iter()
                .map(|s| Site::new(s.element, cast3::<T, U>(s.frac)))
                .collect(),
        }
    }
}

/// Element counts of a structure.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Composition {
    counts: BTreeMap<Element, u32>,
}

impl Composition {
    pub fn from_elements(elements: impl IntoIterator<Item = Element>) -> Self {
        let mut counts = BTreeMap::new();
        for e in elements {
            *counts.entry(e).or_insert(0) += 1;
        }
        Composition { counts }
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (Element, u32)>) -> Self {
        let mut out = BTreeMap::new();
        for (e, n) in counts {
            if n > 0 {
                *out.entry(e).or_insert(0) += n;
            }
        }
        Composition { counts: out }
    }

    /// Parses formulas such as `MgAgO2F`, `Ca(OH)2` or `Li2 Cu2 C2 O6`.
    pub fn parse_formula(formula: &str) -> Result<Self> {
        let chars: Vec<char> = formula.chars().filter(|c| !c.is_whitespace()).collect();
        let mut pos = 0;
        let counts = parse_group(&chars, &mut pos, 0)?;
        if pos != chars.len() {
            return Err(Error::Condition(format!("unbalanced formula {formula:?}")));
        }
        let comp = Composition::from_counts(counts);
        if comp.is_empty() {
            return Err(Error::Condition(format!("empty formula {formula:?}")));
        }
        Ok(comp)
    }

    pub fn get(&self, e: Element) -> u32 {
        self.counts.get(&e).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Element, u32)> + '_ {
        self.counts.iter().map(|(e, n)| (*e, *n))
    }

    pub fn num_elements(&self) -> usize {
        self.counts.len()
    }

    pub fn num_atoms(&self) -> u32 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Counts divided by their greatest common divisor.
    pub fn reduced(&self) -> Composition {
        let g = self.counts.values().fold(0u32, |acc, &n| acc.gcd(&n));
        if g <= 1 {
            return self.clone();
        }
        Composition {
            counts: self.counts.iter().map(|(e, n)| (*e, n / g)).collect(),
        }
    }

    pub fn fractions(&self) -> impl Iterator<Item = (Element, f64)> + '_ {
        let total = f64::from(self.num_atoms());
        self.iter().map(move |(e, n)| (e, f64::from(n) / total))
    }

    /// Reduced formula with elements ordered by electronegativity, then symbol.
    pub fn reduced_formula(&self) -> String {
        let mut items: Vec<(Element, u32)> = self.reduced().iter().collect();
        items.sort_by(|(a, _), (b, _)| {
            let (xa, xb) = (a.data().electronegativity, b.data().electronegativity);
            xa.total_cmp(&xb).then_with(|| a.symbol().cmp(b.symbol()))
        });
        items
            .into_iter()
            .map(|(e, n)| format_term(e.symbol(), n))
            .collect()
    }

    /// Element identities replaced by letters: `CaTiO3` becomes `ABC3`.
    ///
    /// Counts are GCD-reduced, then elements are ordered by count and
    /// alphabetically by symbol among equal counts.
    pub fn anonymized_formula(&self) -> String {
        let mut items: Vec<(Element, u32)> = self.reduced().iter().collect();
        items.sort_by(|(ea, na), (eb, nb)| na.cmp(nb).then_with(|| ea.symbol().cmp(eb.symbol())));
        items
            .into_iter()
            .enumerate()
            .map(|(i, (_, n))| format_term(&letter_label(i), n))
            .collect()
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (e, n) in self.iter() {
            f.write_str(&format_term(e.symbol(), n))?;
        }
        Ok(())
    }
}

fn format_term(label: &str, n: u32) -> String {
    if n == 1 {
        label.to_string()
    } else {
        format!("{label}{n}")
    }
}

/// A, B, ..., Z, AA, AB, ...
fn letter_label(mut i: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'A' + (i % 26) as u8);
        if i < 26 {
            break;
        }
        i = i / 26 - 1;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

fn parse_group(chars: &[char], pos: &mut usize, depth: usize) -> Result<Vec<(Element, u32)>> {
    let mut out = Vec::new();
    while *pos < chars.len() {
        let c = chars[*pos];
        if c == '(' {
            *pos += 1;
            let inner = parse_group(chars, pos, depth + 1)?;
            if *pos >= chars.len() || chars[*pos] != ')' {
                return Err(Error::Condition("missing ')' in formula".into()));
            }
            *pos += 1;
            let mult = parse_count(chars, pos)?;
            out.extend(inner.into_iter().map(|(e, n)| (e, n * mult)));
        } else if c == ')' {
            if depth == 0 {
                return Err(Error::Condition("unexpected ')' in formula".into()));
            }
            return Ok(out);
        } else if c.is_ascii_uppercase() {
            let start = *pos;
            *pos += 1;
            while *pos < chars.len() && chars[*pos].is_ascii_lowercase() {
                *pos += 1;
            }
            let symbol: String = chars[start..*pos].iter().collect();
            let element = Element::from_symbol(&symbol)
                .map_err(|_| Error::Condition(format!("unknown element {symbol:?} in formula")))?;
            out.push((element, parse_count(chars, pos)?));
        } else {
            return Err(Error::Condition(format!("unexpected character {c:?} in formula")));
        }
    }
    Ok(out)
}

fn parse_count(chars: &[char], pos: &mut usize) -> Result<u32> {
    let start = *pos;
    while *pos < chars.len() && chars[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if start == *pos {
        return Ok(1);
    }
    let digits: String = chars[start..*pos].iter().collect();
    match digits.parse::<u32>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(Error::Condition(format!("bad count {digits:?} in formula"))),
    }
}
