//! Wyckoff orbits: expanding representatives into full cells and reducing
//! full cells back to one representative per occupied orbit.

use super::group::SpaceGroup;
use crate::crystal::{Crystal, Site};
use crate::error::{Error, Result};
use crate::lattice::{wrap_fractional, LatticeParameters};
use crate::num::{add, scale, torus_distance, Real, Vec3};

/// Default orbit matching tolerance, fractional units.
pub const DEFAULT_EPS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct WyckoffOrbit<T = f64> {
    pub representative: Site<T>,
    pub members: Vec<Vec3<T>>,
}

impl<T: Real> WyckoffOrbit<T> {
    pub fn multiplicity(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone)]
pub struct WyckoffDecomposition<'g, T = f64> {
    pub group: &'g SpaceGroup,
    pub orbits: Vec<WyckoffOrbit<T>>,
    /// Source site indices covered by each orbit, aligned with `orbits[i].members`.
    pub assignments: Vec<Vec<usize>>,
}

impl<T: Real> WyckoffDecomposition<'_, T> {
    pub fn multiplicities(&self) -> Vec<usize> {
        self.orbits.iter().map(WyckoffOrbit::multiplicity).collect()
    }

    pub fn representatives(&self) -> Vec<Site<T>> {
        self.orbits.iter().map(|o| o.representative).collect()
    }
}

impl SpaceGroup {
    /// Images of `rep` under every operation, merged when closer than `eps`
    /// on the unit torus. The representative itself comes first.
    pub fn orbit<T: Real>(&self, rep: &Site<T>, eps: T) -> WyckoffOrbit<T> {
        let start = wrap_fractional(rep.frac);
        let mut members = vec![start];
        for op in self.ops() {
            let p = op.apply(start);
            if members.iter().all(|m| torus_distance(*m, p) >= eps) {
                members.push(p);
            }
        }
        WyckoffOrbit {
            representative: Site {
                element: rep.element,
                frac: start,
            },
            members,
        }
    }

    /// Moves `rep` onto the special position it approximates: the mean of
    /// its images under the operations that fix it to within `eps`.
    pub fn symmetrize_site<T: Real>(&self, rep: &Site<T>, eps: T) -> Site<T> {
        let start = wrap_fractional(rep.frac);
        let mut sum = [T::zero(); 3];
        let mut n = T::zero();
        for op in self.ops() {
            let p = op.apply_unwrapped(start);
            let near = [0, 1, 2].map(|d| p[d] - (p[d] - start[d]).round());
            if torus_distance(near, start) < eps {
                sum = add(sum, near);
                n = n + T::one();
            }
        }
        Site {
            element: rep.element,
            frac: wrap_fractional(scale(sum, T::one() / n)),
        }
    }

    /// Greedy orbit cover of the crystal's sites, first unassigned site first.
    pub fn decompose<'g, T: Real>(&'g self, c: &Crystal<T>, eps: T) -> Result<WyckoffDecomposition<'g, T>> {
        let sites = c.sites();
        let mut assigned = vec![false; sites.len()];
        let mut orbits = Vec::new();
        let mut assignments = Vec::new();
        for i in 0..sites.len() {
            if assigned[i] {
                continue;
            }
            let orbit = self.orbit(&sites[i], eps);
            let mut covered = Vec::with_capacity(orbit.members.len());
            for (m, member) in orbit.members.iter().enumerate() {
                let found = if m == 0 {
                    Some(i)
                } else {
                    nearest_unassigned(sites, &assigned, sites[i].element, *member, eps)
                };
                let Some(j) = found else {
                    return Err(Error::NotSymmetric {
                        group: self.hm_symbol().to_string(),
                        site: i,
                    });
                };
                assigned[j] = true;
                covered.push(j);
            }
            orbits.push(orbit);
            assignments.push(covered);
        }
        Ok(WyckoffDecomposition {
            group: self,
            orbits,
            assignments,
        })
    }

    /// Union of the orbits of `reps` in a cell with the given parameters.
    /// Each representative is first snapped onto its special position.
    ///
    /// Points shared by two orbits merge when the elements agree and are an
    /// error otherwise.
    pub fn expand<T: Real>(&self, reps: &[Site<T>], lattice: &LatticeParameters<T>, eps: T) -> Result<Crystal<T>> {
        if reps.is_empty() {
            return Err(Error::InvalidStructure("no representatives".into()));
        }
        lattice.validate()?;
        let mut sites: Vec<Site<T>> = Vec::new();
        for (r, rep) in reps.iter().enumerate() {
            let orbit = self.orbit(&self.symmetrize_site(rep, eps), eps);
            for member in orbit.members {
                match sites.iter().find(|s| torus_distance(s.frac, member) < eps) {
                    Some(s) if s.element == rep.element => {}
                    Some(s) => {
                        return Err(Error::InvalidStructure(format!(
                            "representative {r} ({}) collides with {} at {:?}",
                            rep.element, s.element, member
                        )))
                    }
                    None => sites.push(Site {
                        element: rep.element,
                        frac: member,
                    }),
                }
            }
        }
        Crystal::from_parameters(lattice, sites)
    }

    /// True iff every operation permutes the sites onto same-element sites.
    pub fn verify<T: Real>(&self, c: &Crystal<T>, eps: T) -> bool {
        self.decompose(c, eps).is_ok()
    }
}

fn nearest_unassigned<T: Real>(
    sites: &[Site<T>],
    assigned: &[bool],
    element: crate::elements::Element,
    point: Vec3<T>,
    eps: T,
) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (j, s) in sites.iter().enumerate() {
        if assigned[j] || s.element != element {
            continue;
        }
        let d = torus_distance(s.frac, point);
        if d < eps && best.is_none_or(|(_, bd)| d < bd) {
            best = Some((j, d));
        }
    }
    best.map(|(j, _)| j)
}
