//! SGS: space-group symbol, lattice lengths, lattice angles, then one
//! element/coordinate line pair per occupied Wyckoff orbit. XYZ is the same
//! grammar without the symbol line and with every site listed.
//!
//! ```text
//! P4/mmm
//! 4.2 4.2 4.2
//! 90 90 90
//! Mg
//! 0.00 0.00 0.00
//! ```

use super::lines::{content_lines, Line};
use crate::crystal::{Crystal, Site};
use crate::elements::Element;
use crate::error::{Error, Result};
use crate::lattice::{wrap_component, LatticeParameters};
use crate::num::Real;
use crate::symmetry::{load_space_group, SpaceGroup};

/// Orbit tolerance for structures read back from 2-decimal text.
pub const TEXT_EPS: f64 = 2e-2;

/// A parsed SGS document, values exactly as written.
#[derive(Debug, Clone, PartialEq)]
pub struct SgsRecord {
    pub hm_symbol: String,
    pub lattice: LatticeParameters<f64>,
    pub representatives: Vec<Site<f64>>,
}

impl SgsRecord {
    pub fn group(&self) -> Result<&'static SpaceGroup> {
        load_space_group(self.hm_symbol.as_str())
    }
}

pub fn format_length<T: Real>(x: T) -> String {
    format!("{:.1}", x.as_f64())
}

/// Integer when within 1e-6 of one, else one decimal.
pub fn format_angle<T: Real>(x: T) -> String {
    let v = x.as_f64();
    if (v - v.round()).abs() < 1e-6 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.1}")
    }
}

/// Wrapped into `[0, 1)` first, two decimals, `1.00` folded to `0.00`.
pub fn format_coordinate<T: Real>(x: T) -> String {
    let s = format!("{:.2}", wrap_component(x).as_f64());
    if s == "1.00" {
        "0.00".to_string()
    } else {
        s
    }
}

fn lattice_lines<T: Real>(p: &LatticeParameters<T>) -> [String; 2] {
    [
        p.lengths().map(format_length).join(" "),
        p.angles().map(format_angle).join(" "),
    ]
}

fn push_site<T: Real>(out: &mut Vec<String>, site: &Site<T>) {
    out.push(site.element.symbol().to_string());
    out.push(site.frac.map(format_coordinate).join(" "));
}

/// Serializes a crystal that is symmetric under `g`, one line pair per orbit.
pub fn serialize_sgs<T: Real>(c: &Crystal<T>, g: &SpaceGroup, eps: T) -> Result<String> {
    let decomposition = g.decompose(c, eps)?;
    let mut out = vec![g.hm_symbol().to_string()];
    out.extend(lattice_lines(&c.parameters()));
    for orbit in &decomposition.orbits {
        push_site(&mut out, &orbit.representative);
    }
    Ok(out.join("\n"))
}

pub fn serialize_xyz<T: Real>(c: &Crystal<T>) -> String {
    let mut out = lattice_lines(&c.parameters()).to_vec();
    for site in c.sites() {
        push_site(&mut out, site);
    }
    out.join("\n")
}

pub fn parse_sgs(text: &str) -> Result<SgsRecord> {
    let lines = content_lines(text);
    let Some(first) = lines.first() else {
        return Err(Error::parse(1, 1, "empty input"));
    };
    let tokens = first.tokens();
    if tokens.len() != 1 {
        return Err(Error::parse(first.number, first.column, "expected a single space-group symbol"));
    }
    let (col, symbol) = tokens[0];
    let group = load_space_group(symbol)
        .map_err(|_| Error::parse(first.number, col, format!("unknown space group {symbol:?}")))?;
    let (lattice, representatives) = parse_body(&lines[1..], first.number)?;
    Ok(SgsRecord {
        hm_symbol: group.hm_symbol().to_string(),
        lattice,
        representatives,
    })
}

/// Expands the record's representatives under its group; `eps` defaults to [`TEXT_EPS`]
/// at call sites that read model output.
pub fn sgs_to_crystal<T: Real>(r: &SgsRecord, eps: T) -> Result<Crystal<T>> {
    let g = r.group()?;
    let reps: Vec<Site<T>> = r
        .representatives
        .iter()
        .map(|s| Site::new(s.element, crate::num::cast3(s.frac)))
        .collect();
    g.expand(&reps, &r.lattice.cast(), eps)
}

pub fn parse_xyz<T: Real>(text: &str) -> Result<Crystal<T>> {
    let lines = content_lines(text);
    let (lattice, sites) = parse_body(&lines, 0)?;
    let sites = sites
        .into_iter()
        .map(|s| Site::new(s.element, crate::num::cast3(s.frac)))
        .collect();
    Crystal::from_parameters(&lattice.cast(), sites)
}

fn parse_body(lines: &[Line<'_>], prev_line: usize) -> Result<(LatticeParameters<f64>, Vec<Site<f64>>)> {
    let missing = |what: &str| {
        let n = lines.last().map_or(prev_line, |l| l.number) + 1;
        Error::parse(n, 1, format!("missing {what}"))
    };
    let len_line = lines.first().ok_or_else(|| missing("lattice lengths"))?;
    let lengths = parse_triple(len_line, "lattice length")?;
    let ang_line = lines.get(1).ok_or_else(|| missing("lattice angles"))?;
    let angles = parse_triple(ang_line, "lattice angle")?;
    for (i, v) in lengths.iter().enumerate() {
        if *v <= 0.0 {
            let col = len_line.tokens()[i].0;
            return Err(Error::parse(len_line.number, col, "lattice length must be positive"));
        }
    }
    let lattice = LatticeParameters::new(lengths[0], lengths[1], lengths[2], angles[0], angles[1], angles[2])
        .map_err(|e| Error::parse(ang_line.number, ang_line.column, e.to_string()))?;

    let body = &lines[2..];
    if body.is_empty() {
        return Err(missing("atom lines"));
    }
    let mut sites = Vec::with_capacity(body.len() / 2);
    for pair in body.chunks(2) {
        let el_line = &pair[0];
        let tokens = el_line.tokens();
        if tokens.len() != 1 {
            return Err(Error::parse(el_line.number, el_line.column, "expected a single element symbol"));
        }
        let (col, symbol) = tokens[0];
        let element = Element::from_symbol(symbol)
            .map_err(|_| Error::parse(el_line.number, col, format!("unknown element {symbol:?}")))?;
        let Some(coord_line) = pair.get(1) else {
            return Err(Error::parse(
                el_line.number + 1,
                1,
                format!("element {symbol} has no coordinate line"),
            ));
        };
        let frac = parse_triple(coord_line, "coordinate")?;
        for (i, v) in frac.iter().enumerate() {
            if !(0.0..1.0).contains(v) {
                let col = coord_line.tokens()[i].0;
                return Err(Error::parse(coord_line.number, col, format!("coordinate {v} outside [0, 1)")));
            }
        }
        sites.push(Site { element, frac });
    }
    Ok((lattice, sites))
}

fn parse_triple(line: &Line<'_>, what: &str) -> Result<[f64; 3]> {
    let tokens = line.tokens();
    if tokens.len() != 3 {
        return Err(Error::parse(
            line.number,
            line.column,
            format!("expected 3 values ({what}), found {}", tokens.len()),
        ));
    }
    let mut out = [0.0; 3];
    for (slot, (col, tok)) in out.iter_mut().zip(tokens) {
        let ok = tok.bytes().all(|b| b.is_ascii_digit() || b == b'.' || b == b'-' || b == b'+');
        match tok.parse::<f64>() {
            Ok(v) if ok && v.is_finite() => *slot = v,
            _ => return Err(Error::parse(line.number, col, format!("non-numeric {what} {tok:?}"))),
        }
    }
    Ok(out)
}
