//! Fixed-length descriptors used for similarity retrieval.
//!
//! The structure descriptor is built from sorted nearest-neighbor distances
//! normalized by the shortest one; the composition descriptor collects
//! fraction-weighted element statistics.

use serde::{Deserialize, Serialize};

use crate::crystal::{Composition, Crystal};
use crate::error::{Error, Result};
use crate::num::{add, norm, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FingerprintKind {
    Structure,
    Composition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintVector {
    pub values: Vec<f64>,
    pub kind: FingerprintKind,
    pub config_id: String,
}

impl FingerprintVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_comparable(&self, other: &FingerprintVector) -> bool {
        self.kind == other.kind && self.config_id == other.config_id && self.len() == other.len()
    }

    /// Euclidean distance; vectors must share kind and configuration.
    pub fn distance(&self, other: &FingerprintVector) -> Result<f64> {
        if !self.is_comparable(other) {
            return Err(Error::ConfigMismatch(
                format!("{:?}/{}", self.kind, self.config_id),
                format!("{:?}/{}", other.kind, other.config_id),
            ));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureFingerprintConfig {
    pub neighbors: usize,
}

impl Default for StructureFingerprintConfig {
    fn default() -> Self {
        StructureFingerprintConfig { neighbors: 12 }
    }
}

impl StructureFingerprintConfig {
    pub fn config_id(&self) -> String {
        format!("nn-dist/m{}", self.neighbors)
    }
}

/// Sorted distances from `site` to its `m` nearest periodic neighbors,
/// including images of the site itself.
pub fn neighbor_distances<T: Real>(c: &Crystal<T>, site: usize, m: usize) -> Vec<f64> {
    let lat = c.lattice().cast::<f64>();
    let spacing = lat
        .plane_spacings()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let origin = c.sites()[site].frac.map(|x| x.as_f64());
    let diffs: Vec<[f64; 3]> = c
        .sites()
        .iter()
        .map(|s| {
            let f = s.frac.map(|x| x.as_f64());
            [0, 1, 2].map(|k| {
                let d = f[k] - origin[k];
                d - d.round()
            })
        })
        .collect();
    let mut radius = 1i32;
    loop {
        let mut dists = Vec::with_capacity(diffs.len() * ((2 * radius + 1) as usize).pow(3));
        for (j, d) in diffs.iter().enumerate() {
            for i in -radius..=radius {
                for k in -radius..=radius {
                    for l in -radius..=radius {
                        if j == site && i == 0 && k == 0 && l == 0 {
                            continue;
                        }
                        let f = add(*d, [i as f64, k as f64, l as f64]);
                        dists.push(norm(lat.frac_to_cart(f)));
                    }
                }
            }
        }
        dists.sort_by(f64::total_cmp);
        // Any image outside the searched cube lies at least this far away.
        let bound = (f64::from(radius) + 0.5) * spacing;
        if dists.len() >= m && dists[m - 1] <= bound {
            dists.truncate(m);
            return dists;
        }
        radius += 1;
    }
}

pub fn structure_fingerprint<T: Real>(c: &Crystal<T>, cfg: &StructureFingerprintConfig) -> FingerprintVector {
    let m = cfg.neighbors.max(1);
    let n = c.len() as f64;
    let mut mean = vec![0.0; m];
    let mut sq = vec![0.0; m];
    let per_site: Vec<Vec<f64>> = (0..c.len())
        .map(|i| {
            let d = neighbor_distances(c, i, m);
            let first = d[0];
            d.into_iter().map(|x| x / first).collect()
        })
        .collect();
    for v in &per_site {
        for (k, x) in v.iter().enumerate() {
            mean[k] += x / n;
        }
    }
    for v in &per_site {
        for (k, x) in v.iter().enumerate() {
            sq[k] += (x - mean[k]).powi(2) / n;
        }
    }
    let mut values = mean;
    values.extend(sq.into_iter().map(f64::sqrt));
    FingerprintVector {
        values,
        kind: FingerprintKind::Structure,
        config_id: cfg.config_id(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementProperty {
    AtomicNumber,
    Mass,
    CovalentRadius,
    Electronegativity,
}

impl ElementProperty {
    pub fn value(self, e: crate::elements::Element) -> f64 {
        let d = e.data();
        match self {
            ElementProperty::AtomicNumber => f64::from(d.number),
            ElementProperty::Mass => d.mass,
            ElementProperty::CovalentRadius => d.covalent_radius,
            ElementProperty::Electronegativity => d.electronegativity,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            ElementProperty::AtomicNumber => "z",
            ElementProperty::Mass => "mass",
            ElementProperty::CovalentRadius => "rcov",
            ElementProperty::Electronegativity => "chi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionFingerprintConfig {
    pub properties: Vec<ElementProperty>,
    /// Per-dimension multipliers; empty means unscaled.
    #[serde(default)]
    pub scale: Vec<f64>,
}

impl Default for CompositionFingerprintConfig {
    fn default() -> Self {
        CompositionFingerprintConfig {
            properties: vec![
                ElementProperty::AtomicNumber,
                ElementProperty::Mass,
                ElementProperty::CovalentRadius,
                ElementProperty::Electronegativity,
            ],
            scale: Vec::new(),
        }
    }
}

impl CompositionFingerprintConfig {
    pub fn dimension(&self) -> usize {
        4 * self.properties.len()
    }

    pub fn config_id(&self) -> String {
        let tags: Vec<&str> = self.properties.iter().map(|p| p.tag()).collect();
        let mut id = format!("elem-stats/{}", tags.join(","));
        if !self.scale.is_empty() {
            // FNV-1a over the scale bits keeps ids short and stable.
            let mut h: u64 = 0xcbf2_9ce4_8422_2325;
            for s in &self.scale {
                for b in s.to_bits().to_le_bytes() {
                    h ^= u64::from(b);
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
            }
            id.push_str(&format!("/scaled-{h:016x}"));
        }
        id
    }

    /// Scales each dimension by the inverse of its standard deviation over
    /// `comps` (dimensions with zero spread keep scale 1).
    pub fn fitted<'a>(&self, comps: impl IntoIterator<Item = &'a Composition>) -> Result<Self> {
        let base = CompositionFingerprintConfig {
            properties: self.properties.clone(),
            scale: Vec::new(),
        };
        let rows: Vec<Vec<f64>> = comps
            .into_iter()
            .map(|c| composition_fingerprint(c, &base).map(|f| f.values))
            .collect::<Result<_>>()?;
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = rows.len() as f64;
        let scale = (0..base.dimension())
            .map(|k| {
                let mean = rows.iter().map(|r| r[k]).sum::<f64>() / n;
                let var = rows.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd > 1e-12 { 1.0 / sd } else { 1.0 }
            })
            .collect();
        Ok(CompositionFingerprintConfig { properties: base.properties, scale })
    }
}

pub fn composition_fingerprint(comp: &Composition, cfg: &CompositionFingerprintConfig) -> Result<FingerprintVector> {
    if comp.is_empty() {
        return Err(Error::InvalidStructure("empty composition".into()));
    }
    if !cfg.scale.is_empty() && cfg.scale.len() != cfg.dimension() {
        return Err(Error::InvalidArgument(format!(
            "scale has {} entries, expected {}",
            cfg.scale.len(),
            cfg.dimension()
        )));
    }
    let fractions: Vec<_> = comp.fractions().collect();
    let mut values = Vec::with_capacity(cfg.dimension());
    for p in &cfg.properties {
        let vals: Vec<(f64, f64)> = fractions.iter().map(|&(e, w)| (p.value(e), w)).collect();
        let mean: f64 = vals.iter().map(|(v, w)| v * w).sum();
        let mad: f64 = vals.iter().map(|(v, w)| (v - mean).abs() * w).sum();
        let min = vals.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
        let max = vals.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
        values.extend([mean, mad, min, max]);
    }
    if !cfg.scale.is_empty() {
        for (v, s) in values.iter_mut().zip(&cfg.scale) {
            *v *= s;
        }
    }
    Ok(FingerprintVector {
        values,
        kind: FingerprintKind::Composition,
        config_id: cfg.config_id(),
    })
}
