//! A CIF subset: one data block, cell tags, optional space-group tags, an
//! optional symmetry-operation loop and the atom-site loop.

use std::collections::BTreeMap;

use crate::crystal::{Crystal, Site};
use crate::elements::Element;
use crate::error::{Error, Result};
use crate::lattice::LatticeParameters;
use crate::num::{cast3, torus_distance, Real};
use crate::symmetry::{SpaceGroup, SymOp};

/// Merge tolerance when expanding sites by the symmetry loop.
const EXPAND_EPS: f64 = 1e-3;

const CELL_TAGS: [&str; 6] = [
    "_cell_length_a",
    "_cell_length_b",
    "_cell_length_c",
    "_cell_angle_alpha",
    "_cell_angle_beta",
    "_cell_angle_gamma",
];
const NUMBER_TAGS: [&str; 2] = ["_symmetry_int_tables_number", "_space_group_it_number"];
const SYMBOL_TAGS: [&str; 2] = ["_symmetry_space_group_name_h-m", "_space_group_name_h-m_alt"];
const SYMOP_TAGS: [&str; 2] = ["_symmetry_equiv_pos_as_xyz", "_space_group_symop_operation_xyz"];

#[derive(Debug, Clone, PartialEq)]
pub struct CifDocument {
    pub block_name: String,
    pub cell: LatticeParameters<f64>,
    pub declared_number: Option<u16>,
    pub declared_symbol: Option<String>,
    pub symop_strings: Vec<String>,
    /// Atom sites after expansion by the symmetry loop, if any.
    pub sites: Vec<Site<f64>>,
    /// Single-valued tags this reader does not interpret, keyed in lower case.
    pub extra_tags: BTreeMap<String, String>,
}

impl CifDocument {
    pub fn to_crystal<T: Real>(&self) -> Result<Crystal<T>> {
        let sites = self.sites.iter().map(|s| Site::new(s.element, cast3(s.frac))).collect();
        Crystal::from_parameters(&self.cell.cast(), sites)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Data(String),
    Loop,
    Tag(String),
    Value(String),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let lines: Vec<&str> = text.lines().collect();
    let mut li = 0;
    while li < lines.len() {
        let line = lines[li];
        let lineno = li + 1;
        if let Some(first) = line.strip_prefix(';') {
            // text field: runs to the next line starting with ';'
            let mut body = vec![first];
            let mut end = li + 1;
            while end < lines.len() && !lines[end].starts_with(';') {
                body.push(lines[end]);
                end += 1;
            }
            if end == lines.len() {
                return Err(Error::parse(lineno, 1, "unterminated text field"));
            }
            out.push(Token {
                tok: Tok::Value(body.join("\n").trim().to_string()),
                line: lineno,
                col: 1,
            });
            li = end + 1;
            continue;
        }
        let bytes = line.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            if c.is_ascii_whitespace() {
                i += 1;
                continue;
            }
            if c == b'#' {
                break;
            }
            let col = i + 1;
            if c == b'\'' || c == b'"' {
                // closing quote must be followed by whitespace or end of line
                let mut j = i + 1;
                loop {
                    if j >= bytes.len() {
                        return Err(Error::parse(lineno, col, "unterminated quoted string"));
                    }
                    if bytes[j] == c && (j + 1 == bytes.len() || bytes[j + 1].is_ascii_whitespace()) {
                        break;
                    }
                    j += 1;
                }
                out.push(Token {
                    tok: Tok::Value(line[i + 1..j].to_string()),
                    line: lineno,
                    col,
                });
                i = j + 1;
                continue;
            }
            let mut j = i;
            while j < bytes.len() && !bytes[j].is_ascii_whitespace() {
                j += 1;
            }
            let word = &line[i..j];
            let lower = word.to_ascii_lowercase();
            let tok = if lower == "loop_" {
                Tok::Loop
            } else if lower.starts_with("data_") {
                Tok::Data(word[5..].to_string())
            } else if lower.starts_with("save_") || lower == "global_" || lower == "stop_" {
                return Err(Error::parse(lineno, col, format!("unsupported CIF construct {word:?}")));
            } else if word.starts_with('_') {
                Tok::Tag(lower)
            } else {
                Tok::Value(word.to_string())
            };
            out.push(Token { tok, line: lineno, col });
            i = j;
        }
        li += 1;
    }
    Ok(out)
}

struct Loop {
    headers: Vec<String>,
    rows: Vec<Vec<Token>>,
    line: usize,
}

impl Loop {
    fn column(&self, names: &[&str]) -> Option<usize> {
        self.headers.iter().position(|h| names.contains(&h.as_str()))
    }
}

/// Parses a single-block CIF.
pub fn parse_cif(text: &str) -> Result<CifDocument> {
    let tokens = tokenize(text)?;
    let mut block_name = None;
    let mut tags: BTreeMap<String, Token> = BTreeMap::new();
    let mut loops: Vec<Loop> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        match &t.tok {
            Tok::Data(name) => {
                if block_name.is_some() {
                    return Err(Error::parse(t.line, t.col, "multiple data blocks are not supported"));
                }
                block_name = Some(name.clone());
                i += 1;
            }
            Tok::Tag(name) => {
                let Some(v) = tokens.get(i + 1).filter(|v| matches!(v.tok, Tok::Value(_))) else {
                    return Err(Error::parse(t.line, t.col, format!("tag {name} has no value")));
                };
                tags.insert(name.clone(), v.clone());
                i += 2;
            }
            Tok::Loop => {
                let mut headers = Vec::new();
                let mut j = i + 1;
                while let Some(Token { tok: Tok::Tag(name), .. }) = tokens.get(j) {
                    headers.push(name.clone());
                    j += 1;
                }
                if headers.is_empty() {
                    return Err(Error::parse(t.line, t.col, "loop_ without tags"));
                }
                let mut values = Vec::new();
                while let Some(v @ Token { tok: Tok::Value(_), .. }) = tokens.get(j) {
                    values.push(v.clone());
                    j += 1;
                }
                if values.is_empty() || values.len() % headers.len() != 0 {
                    return Err(Error::parse(
                        t.line,
                        t.col,
                        format!("loop has {} values for {} tags", values.len(), headers.len()),
                    ));
                }
                let rows = values.chunks(headers.len()).map(<[Token]>::to_vec).collect();
                loops.push(Loop {
                    headers,
                    rows,
                    line: t.line,
                });
                i = j;
            }
            Tok::Value(v) => {
                return Err(Error::parse(t.line, t.col, format!("value {v:?} without a tag")));
            }
        }
    }
    let block_name = block_name.ok_or_else(|| Error::parse(1, 1, "missing data_ block header"))?;

    let mut cell = [0.0; 6];
    for (slot, tag) in cell.iter_mut().zip(CELL_TAGS) {
        let tok = tags
            .get(tag)
            .ok_or_else(|| Error::parse(1, 1, format!("missing required tag {tag}")))?;
        *slot = number(tok)?;
    }
    let cell = LatticeParameters::new(cell[0], cell[1], cell[2], cell[3], cell[4], cell[5]).map_err(|e| {
        let t = &tags[CELL_TAGS[0]];
        Error::parse(t.line, t.col, e.to_string())
    })?;

    let declared_number = match NUMBER_TAGS.iter().find_map(|k| tags.get(*k)) {
        Some(t) => {
            let v = value(t);
            Some(v.parse::<u16>().map_err(|_| Error::parse(t.line, t.col, format!("bad group number {v:?}")))?)
        }
        None => None,
    };
    let declared_symbol = SYMBOL_TAGS
        .iter()
        .find_map(|k| tags.get(*k))
        .map(|t| value(t).trim().to_string());

    let mut symop_strings = Vec::new();
    let mut ops = Vec::new();
    let mut atom_loop = None;
    for lp in &loops {
        if let Some(col) = lp.column(&SYMOP_TAGS) {
            for row in &lp.rows {
                let t = &row[col];
                let s = value(t).to_string();
                ops.push(SymOp::parse(&s).map_err(|e| Error::parse(t.line, t.col, e.to_string()))?);
                symop_strings.push(s);
            }
        } else if lp.column(&["_atom_site_fract_x"]).is_some() {
            if atom_loop.is_some() {
                return Err(Error::parse(lp.line, 1, "more than one atom-site loop"));
            }
            atom_loop = Some(lp);
        }
    }
    let atom_loop = atom_loop.ok_or_else(|| Error::parse(1, 1, "missing _atom_site_ loop"))?;
    let raw_sites = read_sites(atom_loop)?;
    let sites = if ops.is_empty() {
        raw_sites
    } else {
        expand_by_ops(&raw_sites, &ops)?
    };

    let mut extra_tags = BTreeMap::new();
    for (k, t) in &tags {
        let known = CELL_TAGS.contains(&k.as_str()) || NUMBER_TAGS.contains(&k.as_str()) || SYMBOL_TAGS.contains(&k.as_str());
        if !known {
            extra_tags.insert(k.clone(), value(t).to_string());
        }
    }

    Ok(CifDocument {
        block_name,
        cell,
        declared_number,
        declared_symbol,
        symop_strings,
        sites,
        extra_tags,
    })
}

fn value(t: &Token) -> &str {
    match &t.tok {
        Tok::Value(v) => v,
        _ => "",
    }
}

/// Numeric value with an optional standard uncertainty suffix, e.g. `5.6402(3)`.
fn number(t: &Token) -> Result<f64> {
    let v = value(t);
    let core = match v.find('(') {
        Some(p) if v.ends_with(')') => &v[..p],
        _ => v,
    };
    core.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::parse(t.line, t.col, format!("malformed number {v:?}")))
}

/// Leading element symbol of a CIF type symbol or label: `Fe2+` -> `Fe`, `O1` -> `O`.
fn element_of(t: &Token) -> Result<Element> {
    let v = value(t);
    let mut end = 0;
    for (i, c) in v.char_indices() {
        let ok = if i == 0 { c.is_ascii_uppercase() } else { c.is_ascii_lowercase() };
        if !ok {
            break;
        }
        end = i + c.len_utf8();
    }
    Element::from_symbol(&v[..end]).map_err(|_| Error::parse(t.line, t.col, format!("unknown element in {v:?}")))
}

fn read_sites(lp: &Loop) -> Result<Vec<Site<f64>>> {
    let species = lp
        .column(&["_atom_site_type_symbol"])
        .or_else(|| lp.column(&["_atom_site_label"]))
        .ok_or_else(|| Error::parse(lp.line, 1, "atom-site loop has neither type_symbol nor label"))?;
    let mut xyz = [0; 3];
    for (slot, name) in xyz.iter_mut().zip(["_atom_site_fract_x", "_atom_site_fract_y", "_atom_site_fract_z"]) {
        *slot = lp
            .column(&[name])
            .ok_or_else(|| Error::parse(lp.line, 1, format!("atom-site loop lacks {name}")))?;
    }
    let occupancy = lp.column(&["_atom_site_occupancy"]);
    let mut sites = Vec::with_capacity(lp.rows.len());
    for row in &lp.rows {
        if let Some(col) = occupancy {
            let occ = number(&row[col])?;
            if (occ - 1.0).abs() > 1e-3 {
                return Err(Error::parse(row[col].line, row[col].col, format!("partial occupancy {occ} is not supported")));
            }
        }
        let element = element_of(&row[species])?;
        let frac = [number(&row[xyz[0]])?, number(&row[xyz[1]])?, number(&row[xyz[2]])?];
        sites.push(Site::new(element, frac));
    }
    Ok(sites)
}

fn expand_by_ops(raw: &[Site<f64>], ops: &[SymOp]) -> Result<Vec<Site<f64>>> {
    let mut out: Vec<Site<f64>> = Vec::new();
    for site in raw {
        for op in ops {
            let p = op.apply(site.frac);
            match out.iter().find(|s| torus_distance(s.frac, p) < EXPAND_EPS) {
                Some(s) if s.element == site.element => {}
                Some(s) => {
                    return Err(Error::InvalidStructure(format!(
                        "symmetry images of {} and {} coincide at {p:?}",
                        site.element, s.element
                    )))
                }
                None => out.push(Site { element: site.element, frac: p }),
            }
        }
    }
    Ok(out)
}

/// P1-setting CIF with every site explicit. When `declared` is given its
/// number and symbol are recorded, but only the identity operation is listed.
pub fn write_cif<T: Real>(c: &Crystal<T>, declared: Option<&SpaceGroup>) -> String {
    let p = c.parameters();
    let comp = c.composition();
    let mut out = String::new();
    out.push_str(&format!("data_{}\n", comp.reduced_formula()));
    match declared {
        Some(g) => {
            out.push_str(&format!("_symmetry_space_group_name_H-M   '{}'\n", g.hm_symbol()));
            out.push_str(&format!("_symmetry_Int_Tables_number   {}\n", g.number()));
        }
        None => out.push_str("_symmetry_space_group_name_H-M   'P 1'\n"),
    }
    let cell = [
        ("_cell_length_a", p.a),
        ("_cell_length_b", p.b),
        ("_cell_length_c", p.c),
        ("_cell_angle_alpha", p.alpha),
        ("_cell_angle_beta", p.beta),
        ("_cell_angle_gamma", p.gamma),
    ];
    for (tag, v) in cell {
        out.push_str(&format!("{tag}   {:.6}\n", v.as_f64()));
    }
    let formula_sum: Vec<String> = comp.iter().map(|(e, n)| format!("{e}{n}")).collect();
    out.push_str(&format!("_chemical_formula_sum   '{}'\n", formula_sum.join(" ")));
    out.push_str("loop_\n _symmetry_equiv_pos_site_id\n _symmetry_equiv_pos_as_xyz\n  1  'x, y, z'\n");
    out.push_str("loop_\n _atom_site_type_symbol\n _atom_site_label\n _atom_site_fract_x\n _atom_site_fract_y\n _atom_site_fract_z\n _atom_site_occupancy\n");
    for (i, s) in c.sites().iter().enumerate() {
        let [x, y, z] = s.frac.map(|v| v.as_f64());
        out.push_str(&format!("  {}  {}{}  {x:.6}  {y:.6}  {z:.6}  1\n", s.element, s.element, i));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::load_space_group;

    const DIAMOND_P1: &str = "data_C\n_cell_length_a 3.57\n_cell_length_b 3.57\n_cell_length_c 3.57\n_cell_angle_alpha 90\n_cell_angle_beta 90\n_cell_angle_gamma 90\nloop_\n_atom_site_type_symbol\n_atom_site_fract_x\n_atom_site_fract_y\n_atom_site_fract_z\nC 0 0 0\n";

    fn err_pos(e: Error) -> (usize, usize, String) {
        match e {
            Error::Parse { pos, message } => (pos.line, pos.column, message),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_p1() {
        let doc = parse_cif(DIAMOND_P1).unwrap();
        assert_eq!(doc.block_name, "C");
        assert_eq!(doc.sites.len(), 1);
        assert_eq!(doc.cell, LatticeParameters::cubic(3.57));
        assert_eq!(doc.declared_number, None);
    }

    #[test]
    fn symmetry_loop_expands() {
        let text = "data_x\n_cell_length_a 4\n_cell_length_b 4\n_cell_length_c 4\n_cell_angle_alpha 90\n_cell_angle_beta 90\n_cell_angle_gamma 90\n_symmetry_Int_Tables_number 2\n_symmetry_space_group_name_H-M 'P -1'\nloop_\n_symmetry_equiv_pos_site_id\n_symmetry_equiv_pos_as_xyz\n1 'x, y, z'\n2 '-x, -y, -z'\nloop_\n_atom_site_label\n_atom_site_type_symbol\n_atom_site_fract_x\n_atom_site_fract_y\n_atom_site_fract_z\n_atom_site_occupancy\nSi1 Si 0.25 0.25 0.25 1.0\n";
        let doc = parse_cif(text).unwrap();
        assert_eq!(doc.sites.len(), 2);
        assert_eq!(doc.sites[1].frac, [0.75, 0.75, 0.75]);
        assert_eq!(doc.declared_number, Some(2));
        assert_eq!(doc.declared_symbol.as_deref(), Some("P -1"));
        assert_eq!(doc.symop_strings, vec!["x, y, z", "-x, -y, -z"]);
    }

    #[test]
    fn missing_cell_tag_is_named() {
        let text = DIAMOND_P1.replace("_cell_length_a 3.57\n", "");
        let (_, _, msg) = err_pos(parse_cif(&text).unwrap_err());
        assert!(msg.contains("_cell_length_a"), "{msg}");
    }

    #[test]
    fn positioned_errors() {
        let bad_num = DIAMOND_P1.replace("_cell_length_b 3.57", "_cell_length_b 3.x7");
        let (line, col, _) = err_pos(parse_cif(&bad_num).unwrap_err());
        assert_eq!((line, col), (3, 16));

        let no_atoms = DIAMOND_P1.split("loop_").next().unwrap().to_string();
        let (_, _, msg) = err_pos(parse_cif(&no_atoms).unwrap_err());
        assert!(msg.contains("_atom_site_"), "{msg}");

        let ragged = format!("{DIAMOND_P1}C 0.5 0.5\n");
        let (line, _, msg) = err_pos(parse_cif(&ragged).unwrap_err());
        assert_eq!(line, 8);
        assert!(msg.contains("loop"), "{msg}");

        let two_blocks = format!("{DIAMOND_P1}data_other\n");
        assert!(parse_cif(&two_blocks).is_err());
        let partial = DIAMOND_P1.replace("_atom_site_fract_z\nC 0 0 0", "_atom_site_fract_z\n_atom_site_occupancy\nC 0 0 0 0.5");
        assert!(parse_cif(&partial).is_err());
        assert!(parse_cif("data_x\n_cell_length_a 'unterminated\n").is_err());
    }

    #[test]
    fn round_trip_through_writer() {
        let doc = parse_cif(DIAMOND_P1).unwrap();
        let c: Crystal = doc.to_crystal().unwrap();
        let written = write_cif(&c, None);
        let again = parse_cif(&written).unwrap();
        assert_eq!(again.sites, doc.sites);
        assert_eq!(again.cell, doc.cell);
        let g = load_space_group(123).unwrap();
        assert!(write_cif(&c, Some(g)).contains("_symmetry_Int_Tables_number   123"));
    }
}
