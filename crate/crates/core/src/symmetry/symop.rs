//! Affine symmetry operations on fractional coordinates.

use std::fmt;
use std::str::FromStr;

use num_rational::Rational32;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::lattice::wrap_fractional;
use crate::num::{Real, Vec3};

const ALLOWED_DENOMINATORS: [i32; 5] = [1, 2, 3, 4, 6];

/// `x -> R x + t`, with `R` an integer matrix acting on column vectors of
/// fractional coordinates and `t` reduced to `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SymOp {
    rotation: [[i8; 3]; 3],
    translation: [Rational32; 3],
}

impl SymOp {
    pub fn new(rotation: [[i8; 3]; 3], translation: [Rational32; 3]) -> Result<Self> {
        let op = SymOp {
            rotation,
            translation: translation.map(wrap_rational),
        };
        let text = op.to_string();
        if rotation.iter().flatten().any(|v| !(-1..=1).contains(v)) {
            return Err(Error::SymOp {
                text,
                reason: "rotation entries must be -1, 0 or 1".into(),
            });
        }
        let det = det3(&rotation);
        if det.abs() != 1 {
            return Err(Error::SymOp {
                text,
                reason: format!("rotation determinant {det} is not +-1"),
            });
        }
        for t in &op.translation {
            if !ALLOWED_DENOMINATORS.contains(t.denom()) {
                return Err(Error::SymOp {
                    text,
                    reason: format!("unsupported translation denominator {}", t.denom()),
                });
            }
        }
        Ok(op)
    }

    pub fn identity() -> Self {
        SymOp {
            rotation: [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
            translation: [Rational32::zero(); 3],
        }
    }

    pub fn rotation(&self) -> &[[i8; 3]; 3] {
        &self.rotation
    }

    pub fn translation(&self) -> &[Rational32; 3] {
        &self.translation
    }

    pub fn is_identity(&self) -> bool {
        *self == SymOp::identity()
    }

    pub fn is_pure_translation(&self) -> bool {
        self.rotation == SymOp::identity().rotation
    }

    pub fn determinant(&self) -> i32 {
        det3(&self.rotation)
    }

    /// `R f + t` without wrapping.
    pub fn apply_unwrapped<T: Real>(&self, f: Vec3<T>) -> Vec3<T> {
        let mut out = [T::zero(); 3];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = T::from_ratio(self.translation[i]);
            for (j, fj) in f.iter().enumerate() {
                match self.rotation[i][j] {
                    1 => acc = acc + *fj,
                    -1 => acc = acc - *fj,
                    _ => {}
                }
            }
            *o = acc;
        }
        out
    }

    /// `wrap(R f + t)`.
    pub fn apply<T: Real>(&self, f: Vec3<T>) -> Vec3<T> {
        wrap_fractional(self.apply_unwrapped(f))
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    #[allow(clippy::needless_range_loop)]
    pub fn compose(&self, other: &SymOp) -> SymOp {
        let mut rotation = [[0i8; 3]; 3];
        let mut translation = self.translation;
        for i in 0..3 {
            for j in 0..3 {
                rotation[i][j] = (0..3)
                    .map(|k| self.rotation[i][k] * other.rotation[k][j])
                    .sum();
                translation[i] += Rational32::from(i32::from(self.rotation[i][j])) * other.translation[j];
            }
        }
        SymOp {
            rotation,
            translation: translation.map(wrap_rational),
        }
    }

    pub fn inverse(&self) -> SymOp {
        let inv = inverse_unimodular(&self.rotation);
        let mut translation = [Rational32::zero(); 3];
        for (t, row) in translation.iter_mut().zip(&inv) {
            for (r, s) in row.iter().zip(&self.translation) {
                *t -= Rational32::from(i32::from(*r)) * s;
            }
        }
        SymOp {
            rotation: inv,
            translation: translation.map(wrap_rational),
        }
    }

    /// Parses `x,y,z`-triplet notation such as `-y,x-y,z+1/3` or `'x, y+1/2, 1/2-z'`.
    pub fn parse(s: &str) -> Result<Self> {
        let err = |reason: &str| Error::SymOp {
            text: s.to_string(),
            reason: reason.to_string(),
        };
        let body = s.trim().trim_matches(|c| c == '\'' || c == '"').trim();
        let parts: Vec<&str> = body.split(',').collect();
        if parts.len() != 3 {
            return Err(err("expected three comma-separated expressions"));
        }
        let mut rotation = [[0i8; 3]; 3];
        let mut translation = [Rational32::zero(); 3];
        for (i, part) in parts.iter().enumerate() {
            let (coeffs, offset) = parse_expression(part).map_err(|r| err(&r))?;
            for (j, c) in coeffs.iter().enumerate() {
                if !(-1..=1).contains(c) {
                    return Err(err("coefficient outside -1..1"));
                }
                rotation[i][j] = *c as i8;
            }
            translation[i] = offset;
        }
        SymOp::new(rotation, translation).map_err(|e| match e {
            Error::SymOp { reason, .. } => err(&reason),
            other => other,
        })
    }
}

impl FromStr for SymOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SymOp::parse(s)
    }
}

impl fmt::Display for SymOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..3 {
            if i > 0 {
                f.write_str(",")?;
            }
            let mut expr = String::new();
            for (j, var) in ["x", "y", "z"].iter().enumerate() {
                match self.rotation[i][j] {
                    1 => {
                        if !expr.is_empty() {
                            expr.push('+');
                        }
                        expr.push_str(var);
                    }
                    -1 => {
                        expr.push('-');
                        expr.push_str(var);
                    }
                    0 => {}
                    other => expr.push_str(&format!("{other:+}{var}")),
                }
            }
            let t = self.translation[i];
            if !t.is_zero() {
                if !expr.is_empty() || t.is_negative() {
                    expr.push(if t.is_negative() { '-' } else { '+' });
                }
                expr.push_str(&format!("{}/{}", t.numer().abs(), t.denom()));
            }
            if expr.is_empty() {
                expr.push('0');
            }
            f.write_str(&expr)?;
        }
        Ok(())
    }
}

fn wrap_rational(r: Rational32) -> Rational32 {
    let w = r - r.floor();
    if w >= Rational32::one() {
        w - Rational32::one()
    } else {
        w
    }
}

fn det3(m: &[[i8; 3]; 3]) -> i32 {
    let m = m.map(|r| r.map(i32::from));
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse of an integer matrix with determinant +-1 (adjugate / det).
fn inverse_unimodular(m: &[[i8; 3]; 3]) -> [[i8; 3]; 3] {
    let d = det3(m);
    let a = m.map(|r| r.map(i32::from));
    let mut inv = [[0i8; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            let cof = a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
            *v = (cof * d) as i8;
        }
    }
    inv
}

/// One linear expression: integer coefficients of x, y, z plus a rational offset.
fn parse_expression(expr: &str) -> std::result::Result<([i32; 3], Rational32), String> {
    let chars: Vec<char> = expr.chars().filter(|c| !c.is_whitespace()).collect();
    if chars.is_empty() {
        return Err("empty expression".into());
    }
    let mut coeffs = [0i32; 3];
    let mut offset = Rational32::zero();
    let mut pos = 0;
    let mut first = true;
    while pos < chars.len() {
        let mut sign = 1;
        match chars[pos] {
            '+' => pos += 1,
            '-' => {
                sign = -1;
                pos += 1;
            }
            _ if first => {}
            c => return Err(format!("expected '+' or '-' before {c:?}")),
        }
        first = false;
        if pos >= chars.len() {
            return Err("dangling sign".into());
        }
        let number = if chars[pos].is_ascii_digit() || chars[pos] == '.' {
            let (value, next) = parse_number(&chars, pos)?;
            pos = next;
            if pos < chars.len() && chars[pos] == '*' {
                pos += 1;
            }
            Some(value)
        } else {
            None
        };
        let var = match chars.get(pos).map(|c| c.to_ascii_lowercase()) {
            Some('x') => Some(0),
            Some('y') => Some(1),
            Some('z') => Some(2),
            _ => None,
        };
        match (number, var) {
            (n, Some(v)) => {
                pos += 1;
                let c = n.unwrap_or_else(Rational32::one);
                if !c.is_integer() {
                    return Err("fractional coefficient".into());
                }
                coeffs[v] += sign * c.to_integer();
            }
            (Some(n), None) => offset += n * sign,
            (None, None) => {
                return Err(format!("unexpected {:?}", chars.get(pos).copied().unwrap_or(' ')))
            }
        }
    }
    Ok((coeffs, offset))
}

fn parse_number(chars: &[char], mut pos: usize) -> std::result::Result<(Rational32, usize), String> {
    let start = pos;
    while pos < chars.len() && (chars[pos].is_ascii_digit() || chars[pos] == '.') {
        pos += 1;
    }
    let head: String = chars[start..pos].iter().collect();
    if pos < chars.len() && chars[pos] == '/' {
        pos += 1;
        let dstart = pos;
        while pos < chars.len() && chars[pos].is_ascii_digit() {
            pos += 1;
        }
        let num: i32 = head.parse().map_err(|_| format!("bad numerator {head:?}"))?;
        let den: i32 = chars[dstart..pos]
            .iter()
            .collect::<String>()
            .parse()
            .map_err(|_| "bad denominator".to_string())?;
        if den == 0 {
            return Err("zero denominator".into());
        }
        return Ok((Rational32::new(num, den), pos));
    }
    if head.contains('.') {
        let v: f64 = head.parse().map_err(|_| format!("bad number {head:?}"))?;
        for den in ALLOWED_DENOMINATORS {
            let scaled = v * f64::from(den);
            if (scaled - scaled.round()).abs() < 1e-6 {
                return Ok((Rational32::new(scaled.round() as i32, den), pos));
            }
        }
        return Err(format!("decimal {head} is not a supported fraction"));
    }
    let v: i32 = head.parse().map_err(|_| format!("bad number {head:?}"))?;
    Ok((Rational32::from(v), pos))
}
