//! Lattice parameters, lattice matrices and periodic geometry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{add, cross, dot, norm, scale, sub, Real, Vec3};

/// Post-wrap snap: components this close to 1.0 become 0.0.
pub const WRAP_SNAP: f64 = 1e-6;

/// Cell lengths (Å) and angles (degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParameters<T = f64> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
}

impl<T: Real> LatticeParameters<T> {
    pub fn new(a: T, b: T, c: T, alpha: T, beta: T, gamma: T) -> Result<Self> {
        let p = LatticeParameters {
            a,
            b,
            c,
            alpha,
            beta,
            gamma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn cubic(a: T) -> Self {
        let right = T::lit(90.0);
        LatticeParameters {
            a,
            b: a,
            c: a,
            alpha: right,
            beta: right,
            gamma: right,
        }
    }

    pub fn lengths(&self) -> [T; 3] {
        [self.a, self.b, self.c]
    }

    pub fn angles(&self) -> [T; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c)] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::InvalidLattice(format!("length {name}={v} must be positive")));
            }
        }
        let straight = T::lit(180.0);
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v.is_finite() && v > T::zero() && v < straight) {
                return Err(Error::InvalidLattice(format!(
                    "angle {name}={v} outside (0, 180)"
                )));
            }
        }
        if self.volume_factor() <= T::epsilon() * T::lit(1e3) {
            return Err(Error::InvalidLattice(format!(
                "angles {}/{}/{} admit no positive cell volume",
                self.alpha, self.beta, self.gamma
            )));
        }
        Ok(())
    }

    /// `V / (abc)`, squared; positive iff the angles describe a real cell.
    fn volume_factor(&self) -> T {
        let (ca, cb, cg) = (cos_deg(self.alpha), cos_deg(self.beta), cos_deg(self.gamma));
        T::one() - ca * ca - cb * cb - cg * cg + T::lit(2.0) * ca * cb * cg
    }

    pub fn cast<U: Real>(&self) -> LatticeParameters<U> {
        let c = |v: T| U::lit(v.as_f64());
        LatticeParameters {
            a: c(self.a),
            b: c(self.b),
            c: c(self.c),
            alpha: c(self.alpha),
            beta: c(self.beta),
            gamma: c(self.gamma),
        }
    }
}

/// Cosine of an angle in degrees, exact at right angles.
fn cos_deg<T: Real>(deg: T) -> T {
    if deg == T::lit(90.0) {
        T::zero()
    } else {
        deg.to_radians().cos()
    }
}

fn sin_deg<T: Real>(deg: T) -> T {
    if deg == T::lit(90.0) {
        T::one()
    } else {
        deg.to_radians().sin()
    }
}

/// Lattice vectors as rows, in Å. Always right-handed and non-degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticeMatrix<T = f64> {
    rows: [[T; 3]; 3],
}

impl<T: Real> LatticeMatrix<T> {
    pub fn new(rows: [[T; 3]; 3]) -> Result<Self> {
        let m = LatticeMatrix { rows };
        let det = m.determinant();
        if !(det.is_finite() && det > T::zero()) {
            return Err(Error::InvalidLattice(format!(
                "determinant {det} is not positive"
            )));
        }
        Ok(m)
    }

    pub fn diagonal(a: T, b: T, c: T) -> Result<Self> {
        let z = T::zero();
        Self::new([[a, z, z], [z, b, z], [z, z, c]])
    }

    /// Standard orientation: `a` along x, `b` in the xy plane.
    pub fn from_parameters(p: &LatticeParameters<T>) -> Result<Self> {
        p.validate()?;
        let (ca, cb, cg) = (cos_deg(p.alpha), cos_deg(p.beta), cos_deg(p.gamma));
        let sg = sin_deg(p.gamma);
        let z = T::zero();
        let cy = (ca - cb * cg) / sg;
        let cz_sq = T::one() - cb * cb - cy * cy;
        if cz_sq <= z {
            return Err(Error::InvalidLattice("degenerate angle combination".into()));
        }
        let rows = [
            [p.a, z, z],
            [p.b * cg, p.b * sg, z],
            [p.c * cb, p.c * cy, p.c * cz_sq.sqrt()],
        ];
        Self::new(rows)
    }

    pub fn parameters(&self) -> Result<LatticeParameters<T>> {
        let [l1, l2, l3] = self.rows;
        let (a, b, c) = (norm(l1), norm(l2), norm(l3));
        if a <= T::zero() || b <= T::zero() || c <= T::zero() {
            return Err(Error::InvalidLattice("zero-length lattice vector".into()));
        }
        let angle = |u: Vec3<T>, v: Vec3<T>, lu: T, lv: T| {
            let cos = (dot(u, v) / (lu * lv)).max(-T::one()).min(T::one());
            cos.acos().to_degrees()
        };
        Ok(LatticeParameters {
            a,
            b,
            c,
            alpha: angle(l2, l3, b, c),
            beta: angle(l1, l3, a, c),
            gamma: angle(l1, l2, a, b),
        })
    }

    pub fn rows(&self) -> &[[T; 3]; 3] {
        &self.rows
    }

    pub fn determinant(&self) -> T {
        let [l1, l2, l3] = self.rows;
        dot(l1, cross(l2, l3))
    }

    /// Cell volume in Å³.
    pub fn volume(&self) -> T {
        self.determinant()
    }

    pub fn frac_to_cart(&self, f: Vec3<T>) -> Vec3<T> {
        let [l1, l2, l3] = self.rows;
        add(add(scale(l1, f[0]), scale(l2, f[1])), scale(l3, f[2]))
    }

    pub fn cart_to_frac(&self, x: Vec3<T>) -> Vec3<T> {
        // rows of the inverse transpose are the reciprocal vectors / V
        let [l1, l2, l3] = self.rows;
        let v = self.determinant();
        [
            dot(x, cross(l2, l3)) / v,
            dot(x, cross(l3, l1)) / v,
            dot(x, cross(l1, l2)) / v,
        ]
    }

    /// Spacings between adjacent lattice planes normal to each reciprocal axis.
    pub fn plane_spacings(&self) -> [T; 3] {
        let [l1, l2, l3] = self.rows;
        let v = self.determinant();
        [
            v / norm(cross(l2, l3)),
            v / norm(cross(l3, l1)),
            v / norm(cross(l1, l2)),
        ]
    }

    pub fn scaled(&self, factor: T) -> Result<Self> {
        let r = self.rows;
        Self::new([scale(r[0], factor), scale(r[1], factor), scale(r[2], factor)])
    }

    pub fn cast<U: Real>(&self) -> LatticeMatrix<U> {
        let c = |v: [T; 3]| crate::num::cast3::<T, U>(v);
        LatticeMatrix {
            rows: [c(self.rows[0]), c(self.rows[1]), c(self.rows[2])],
        }
    }
}

/// Canonical representative of a fractional coordinate in `[0, 1)`.
pub fn wrap_component<T: Real>(x: T) -> T {
    let w = x - x.floor();
    if w >= T::one() - T::lit(WRAP_SNAP) {
        T::zero()
    } else {
        w
    }
}

pub fn wrap_fractional<T: Real>(f: Vec3<T>) -> Vec3<T> {
    [wrap_component(f[0]), wrap_component(f[1]), wrap_component(f[2])]
}

/// Minimum-image distance using offsets in `{-1, 0, 1}³`.
pub fn min_image_distance<T: Real>(m: &LatticeMatrix<T>, f1: Vec3<T>, f2: Vec3<T>) -> T {
    min_image_distance_within(m, f1, f2, 1)
}

/// Minimum-image distance searching offsets in `{-radius..=radius}³`.
///
/// The separation is first reduced to `(-0.5, 0.5]` per axis so the result
/// does not depend on which periodic copy of either point was passed in.
pub fn min_image_distance_within<T: Real>(
    m: &LatticeMatrix<T>,
    f1: Vec3<T>,
    f2: Vec3<T>,
    radius: i32,
) -> T {
    let d = sub(f1, f2);
    let d = [d[0] - d[0].round(), d[1] - d[1].round(), d[2] - d[2].round()];
    let mut best = T::infinity();
    for i in -radius..=radius {
        for j in -radius..=radius {
            for k in -radius..=radius {
                let off = [
                    d[0] + T::lit(i as f64),
                    d[1] + T::lit(j as f64),
                    d[2] + T::lit(k as f64),
                ];
                best = best.min(norm(m.frac_to_cart(off)));
            }
        }
    }
    best
}

/// Exact minimum-image distance. With `skip_zero` the untranslated copy is
/// ignored, which yields the shortest self-image distance when `f1 == f2`.
pub fn shortest_image_distance<T: Real>(m: &LatticeMatrix<T>, f1: Vec3<T>, f2: Vec3<T>, skip_zero: bool) -> T {
    let d = sub(f1, f2);
    let d = [d[0] - d[0].round(), d[1] - d[1].round(), d[2] - d[2].round()];
    let spacing = m.plane_spacings().into_iter().fold(T::infinity(), T::min);
    let mut radius = 1i32;
    loop {
        let mut best = T::infinity();
        for i in -radius..=radius {
            for j in -radius..=radius {
                for k in -radius..=radius {
                    if skip_zero && (i, j, k) == (0, 0, 0) {
                        continue;
                    }
                    let off = [d[0] + T::lit(i as f64), d[1] + T::lit(j as f64), d[2] + T::lit(k as f64)];
                    best = best.min(norm(m.frac_to_cart(off)));
                }
            }
        }
        if best <= (T::lit(radius as f64) + T::lit(0.5)) * spacing {
            return best;
        }
        radius += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cubic_parameters_give_diagonal_matrix() {
        let m = LatticeMatrix::from_parameters(&LatticeParameters::cubic(4.0)).unwrap();
        assert_eq!(m.rows(), &[[4.0, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 4.0]]);
        let m = LatticeMatrix::from_parameters(&LatticeParameters::cubic(4.9)).unwrap();
        assert_eq!(m.rows(), &[[4.9, 0.0, 0.0], [0.0, 4.9, 0.0], [0.0, 0.0, 4.9]]);
    }

    #[test]
    fn gram_matrix_matches_metric_tensor() {
        let p = LatticeParameters::new(3.0, 4.0, 5.0, 80.0, 85.0, 95.0).unwrap();
        let m = LatticeMatrix::from_parameters(&p).unwrap();
        let [l1, l2, l3] = *m.rows();
        let c = |d: f64| d.to_radians().cos();
        assert_abs_diff_eq!(dot(l1, l1), 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dot(l2, l2), 16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dot(l3, l3), 25.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dot(l2, l3), 20.0 * c(80.0), epsilon = 1e-12);
        assert_abs_diff_eq!(dot(l1, l3), 15.0 * c(85.0), epsilon = 1e-12);
        assert_abs_diff_eq!(dot(l1, l2), 12.0 * c(95.0), epsilon = 1e-12);
        assert_eq!(l1[1], 0.0);
        assert_eq!(l1[2], 0.0);
        assert_eq!(l2[2], 0.0);
    }

    #[test]
    fn parameters_from_diagonal() {
        let p = LatticeMatrix::diagonal(4.0, 4.0, 10.1).unwrap().parameters().unwrap();
        assert_eq!((p.a, p.b, p.c), (4.0, 4.0, 10.1));
        assert_eq!((p.alpha, p.beta, p.gamma), (90.0, 90.0, 90.0));
    }

    #[test]
    fn degenerate_angles_rejected() {
        assert!(LatticeParameters::new(1.0, 1.0, 1.0, 120.0, 120.0, 120.0).is_err());
        assert!(LatticeParameters::new(1.0, 1.0, 1.0, 10.0, 10.0, 170.0).is_err());
        assert!(LatticeParameters::new(0.0, 1.0, 1.0, 90.0, 90.0, 90.0).is_err());
        assert!(LatticeParameters::new(1.0, 1.0, 1.0, 180.0, 90.0, 90.0).is_err());
        assert!(LatticeMatrix::new([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]]).is_err());
        assert!(LatticeMatrix::new([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
    }

    #[test]
    fn frac_to_cart_basics() {
        let m = LatticeMatrix::diagonal(4.0, 4.0, 4.0).unwrap();
        assert_eq!(m.frac_to_cart([0.0; 3]), [0.0; 3]);
        assert_eq!(m.frac_to_cart([0.5, 0.5, 0.5]), [2.0, 2.0, 2.0]);
        let p = LatticeParameters::new(3.0, 4.0, 5.0, 80.0, 85.0, 95.0).unwrap();
        let m = LatticeMatrix::from_parameters(&p).unwrap();
        assert_eq!(m.frac_to_cart([1.0, 0.0, 0.0]), m.rows()[0]);
        let x = m.frac_to_cart([0.1, 0.7, 0.3]);
        let f = m.cart_to_frac(x);
        for (a, b) in f.iter().zip([0.1, 0.7, 0.3]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn wrapping() {
        assert_eq!(wrap_fractional([1.25, -0.25, 0.0]), [0.25, 0.75, 0.0]);
        assert_eq!(wrap_fractional([0.9999999, 0.0, 0.0]), [0.0, 0.0, 0.0]);
        assert_eq!(wrap_fractional([0.3, 0.7, 0.5]), [0.3, 0.7, 0.5]);
        assert_eq!(wrap_fractional([-1e-18, 0.0, 0.0]), [0.0, 0.0, 0.0]);
        let w = wrap_fractional([3.7f32, -2.2, 0.99]);
        assert_eq!(wrap_fractional(w), w);
    }

    #[test]
    fn min_image_examples() {
        let m = LatticeMatrix::diagonal(10.0, 10.0, 10.0).unwrap();
        assert_abs_diff_eq!(
            min_image_distance(&m, [0.05, 0.0, 0.0], [0.95, 0.0, 0.0]),
            1.0,
            epsilon = 1e-12
        );
        assert_eq!(min_image_distance(&m, [0.3, 0.2, 0.1], [0.3, 0.2, 0.1]), 0.0);
    }

    #[test]
    fn generic_over_f32() {
        let p = LatticeParameters::<f32>::new(3.0, 4.0, 5.0, 80.0, 85.0, 95.0).unwrap();
        let back = LatticeMatrix::from_parameters(&p).unwrap().parameters().unwrap();
        assert!((back.alpha - 80.0).abs() < 1e-3);
        assert!((back.c - 5.0).abs() < 1e-5);
    }
}
