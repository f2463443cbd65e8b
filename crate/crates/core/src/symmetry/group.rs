//! The 230 space groups in one standard setting each.

use std::collections::{HashMap, HashSet};
use std::fmt;

use once_cell::sync::Lazy;

use super::symop::SymOp;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceGroup {
    number: u16,
    hm_symbol: String,
    ops: Vec<SymOp>,
}

impl SpaceGroup {
    /// Builds a group and checks the group axioms modulo lattice translations.
    pub fn new(number: u16, hm_symbol: impl Into<String>, ops: Vec<SymOp>) -> Result<Self> {
        let g = SpaceGroup {
            number,
            hm_symbol: hm_symbol.into(),
            ops,
        };
        g.check_axioms()?;
        Ok(g)
    }

    /// Builds a group checking identity, uniqueness and inverses but not
    /// closure; used for the shipped table, whose closure is covered by tests.
    pub(crate) fn from_table(number: u16, hm_symbol: &str, ops: Vec<SymOp>) -> Result<Self> {
        let g = SpaceGroup {
            number,
            hm_symbol: hm_symbol.to_string(),
            ops,
        };
        g.check_basic()?;
        Ok(g)
    }

    fn check_basic(&self) -> Result<HashSet<SymOp>> {
        let fail = |msg: String| Error::GroupTable(format!("group {} {}: {msg}", self.number, self.hm_symbol));
        if self.ops.is_empty() {
            return Err(fail("no operations".into()));
        }
        let set: HashSet<SymOp> = self.ops.iter().copied().collect();
        if set.len() != self.ops.len() {
            return Err(fail("duplicate operations".into()));
        }
        if !set.contains(&SymOp::identity()) {
            return Err(fail("identity missing".into()));
        }
        for a in &self.ops {
            if !set.contains(&a.inverse()) {
                return Err(fail(format!("inverse of {a} missing")));
            }
        }
        Ok(set)
    }

    pub fn number(&self) -> u16 {
        self.number
    }

    pub fn hm_symbol(&self) -> &str {
        &self.hm_symbol
    }

    pub fn ops(&self) -> &[SymOp] {
        &self.ops
    }

    /// Number of operations modulo integer lattice translations.
    pub fn order(&self) -> usize {
        self.ops.len()
    }

    /// Pure translations (centering vectors), including the identity.
    pub fn centering_count(&self) -> usize {
        self.ops.iter().filter(|op| op.is_pure_translation()).count()
    }

    /// Number of distinct rotation parts.
    pub fn point_group_order(&self) -> usize {
        self.ops
            .iter()
            .map(|op| *op.rotation())
            .collect::<HashSet<_>>()
            .len()
    }

    /// Identity present, no duplicates, closed under composition, inverses present.
    pub fn check_axioms(&self) -> Result<()> {
        let set = self.check_basic()?;
        let fail = |msg: String| Err(Error::GroupTable(format!("group {} {}: {msg}", self.number, self.hm_symbol)));
        for a in &self.ops {
            for b in &self.ops {
                let c = a.compose(b);
                if !set.contains(&c) {
                    return fail(format!("{a} * {b} = {c} not in group"));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for SpaceGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (#{})", self.hm_symbol, self.number)
    }
}

/// Lookup key for [`load_space_group`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKey<'a> {
    Number(u16),
    Symbol(&'a str),
}

impl From<u16> for GroupKey<'_> {
    fn from(n: u16) -> Self {
        GroupKey::Number(n)
    }
}

impl<'a> From<&'a str> for GroupKey<'a> {
    fn from(s: &'a str) -> Self {
        GroupKey::Symbol(s)
    }
}

impl<'a> From<&'a String> for GroupKey<'a> {
    fn from(s: &'a String) -> Self {
        GroupKey::Symbol(s)
    }
}

#[derive(Debug, Clone)]
pub struct SpaceGroupTable {
    groups: Vec<SpaceGroup>,
    by_number: HashMap<u16, usize>,
    by_symbol: HashMap<String, usize>,
}

impl SpaceGroupTable {
    /// Parses blocks of `#SG <number> <hm_symbol> <op_count>` followed by
    /// `op_count` triplet lines. Other `#` lines are comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut groups = Vec::new();
        let mut lines = text.lines().enumerate().peekable();
        while let Some((lineno, raw)) = lines.next() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let Some(header) = line.strip_prefix("#SG") else {
                if line.starts_with('#') {
                    continue;
                }
                return Err(Error::parse(lineno + 1, 1, "operation outside a #SG block"));
            };
            let fields: Vec<&str> = header.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::parse(lineno + 1, 1, "malformed #SG header"));
            }
            let number: u16 = fields[0]
                .parse()
                .map_err(|_| Error::parse(lineno + 1, 5, "bad group number"))?;
            let count: usize = fields[2]
                .parse()
                .map_err(|_| Error::parse(lineno + 1, 1, "bad operation count"))?;
            let mut ops = Vec::with_capacity(count);
            for _ in 0..count {
                let Some((opline, optext)) = lines.next() else {
                    return Err(Error::parse(lineno + 1, 1, "truncated operation list"));
                };
                let op = SymOp::parse(optext).map_err(|e| Error::parse(opline + 1, 1, e.to_string()))?;
                ops.push(op);
            }
            if let Some((extra, next)) = lines.peek() {
                if !next.trim().is_empty() && !next.trim().starts_with('#') {
                    return Err(Error::parse(extra + 1, 1, "more operations than declared"));
                }
            }
            groups.push(SpaceGroup::from_table(number, fields[1], ops)?);
        }
        let mut by_number = HashMap::new();
        let mut by_symbol = HashMap::new();
        for (i, g) in groups.iter().enumerate() {
            if by_number.insert(g.number, i).is_some() || by_symbol.insert(g.hm_symbol.clone(), i).is_some() {
                return Err(Error::GroupTable(format!("duplicate entry for {g}")));
            }
        }
        Ok(SpaceGroupTable {
            groups,
            by_number,
            by_symbol,
        })
    }

    pub fn get<'a>(&self, key: impl Into<GroupKey<'a>>) -> Result<&SpaceGroup> {
        let key = key.into();
        let idx = match key {
            GroupKey::Number(n) => self.by_number.get(&n),
            GroupKey::Symbol(s) => self.by_symbol.get(&normalize_symbol(s)),
        };
        idx.map(|&i| &self.groups[i]).ok_or_else(|| {
            Error::UnknownGroup(match key {
                GroupKey::Number(n) => n.to_string(),
                GroupKey::Symbol(s) => s.to_string(),
            })
        })
    }

    pub fn groups(&self) -> &[SpaceGroup] {
        &self.groups
    }
}

/// `P 2_1/c` and `P21/c` name the same standard setting.
fn normalize_symbol(s: &str) -> String {
    s.chars().filter(|c| *c != '_' && !c.is_whitespace()).collect()
}

static TABLE: Lazy<SpaceGroupTable> = Lazy::new(|| {
    SpaceGroupTable::parse(include_str!("../../data/spacegroups.dat")).expect("embedded space group table")
});

/// The shipped table of all 230 groups.
pub fn space_group_table() -> &'static SpaceGroupTable {
    &TABLE
}

/// Looks up a group by number (1–230) or standard-setting Hermann–Mauguin symbol.
pub fn load_space_group<'a>(key: impl Into<GroupKey<'a>>) -> Result<&'static SpaceGroup> {
    TABLE.get(key)
}
