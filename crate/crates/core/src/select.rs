//! Dataset index and few-shot example selection.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crystal::{Composition, Crystal};
use crate::error::{Error, Result};
use crate::fingerprint::{
    composition_fingerprint, structure_fingerprint, CompositionFingerprintConfig, FingerprintVector,
    StructureFingerprintConfig,
};
use crate::properties::{GenerationCondition, PropertyName, PropertyValues};
use crate::rng::{derive_seed, seeded_rng};

const STREAM_ANCHOR: u64 = 1;
const STREAM_RANDOM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub crystal: Crystal,
    pub space_group: u16,
    pub properties: PropertyValues,
    pub structure_fp: FingerprintVector,
    pub composition_fp: FingerprintVector,
}

impl IndexEntry {
    pub fn spacegroup_number(&self) -> u16 {
        self.properties.spacegroup_number.unwrap_or(self.space_group)
    }

    pub fn composition(&self) -> Composition {
        self.crystal.composition()
    }
}

/// Input to [`DatasetIndex::build`].
#[derive(Debug, Clone)]
pub struct IndexInput {
    pub id: String,
    pub crystal: Crystal,
    pub space_group: u16,
    pub properties: PropertyValues,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IndexRepr {
    rng_seed: u64,
    structure_config: StructureFingerprintConfig,
    composition_config: CompositionFingerprintConfig,
    entries: Vec<IndexEntry>,
}

/// Read-only collection of structures with cached fingerprints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IndexRepr", into = "IndexRepr")]
pub struct DatasetIndex {
    rng_seed: u64,
    structure_config: StructureFingerprintConfig,
    composition_config: CompositionFingerprintConfig,
    entries: Vec<IndexEntry>,
    spreads: BTreeMap<PropertyName, f64>,
}

impl TryFrom<IndexRepr> for DatasetIndex {
    type Error = Error;

    fn try_from(r: IndexRepr) -> Result<Self> {
        DatasetIndex::from_entries(r.entries, r.structure_config, r.composition_config, r.rng_seed)
    }
}

impl From<DatasetIndex> for IndexRepr {
    fn from(d: DatasetIndex) -> Self {
        IndexRepr {
            rng_seed: d.rng_seed,
            structure_config: d.structure_config,
            composition_config: d.composition_config,
            entries: d.entries,
        }
    }
}

impl DatasetIndex {
    /// Computes fingerprints for every input. With `fit_composition` the
    /// composition descriptor is rescaled to unit spread over the inputs.
    pub fn build(
        inputs: Vec<IndexInput>,
        structure_config: StructureFingerprintConfig,
        composition_config: CompositionFingerprintConfig,
        fit_composition: bool,
        rng_seed: u64,
    ) -> Result<Self> {
        let composition_config = if fit_composition && !inputs.is_empty() {
            let comps: Vec<Composition> = inputs.iter().map(|i| i.crystal.composition()).collect();
            composition_config.fitted(&comps)?
        } else {
            composition_config
        };
        let entries = inputs
            .into_iter()
            .map(|i| {
                Ok(IndexEntry {
                    structure_fp: structure_fingerprint(&i.crystal, &structure_config),
                    composition_fp: composition_fingerprint(&i.crystal.composition(), &composition_config)?,
                    id: i.id,
                    crystal: i.crystal,
                    space_group: i.space_group,
                    properties: i.properties,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        DatasetIndex::from_entries(entries, structure_config, composition_config, rng_seed)
    }

    pub fn from_entries(
        entries: Vec<IndexEntry>,
        structure_config: StructureFingerprintConfig,
        composition_config: CompositionFingerprintConfig,
        rng_seed: u64,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate id {}", e.id)));
            }
            if e.structure_fp.config_id != structure_config.config_id() {
                return Err(Error::ConfigMismatch(e.structure_fp.config_id.clone(), structure_config.config_id()));
            }
            if e.composition_fp.config_id != composition_config.config_id() {
                return Err(Error::ConfigMismatch(
                    e.composition_fp.config_id.clone(),
                    composition_config.config_id(),
                ));
            }
        }
        let mut spreads = BTreeMap::new();
        for p in PropertyName::ALL.into_iter().filter(|p| p.is_continuous()) {
            let vals: Vec<f64> = entries.iter().filter_map(|e| e.properties.real(p)).collect();
            let sd = if vals.len() > 1 {
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / n;
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
            } else {
                0.0
            };
            spreads.insert(p, if sd.is_finite() && sd > 1e-12 { sd } else { 1.0 });
        }
        Ok(DatasetIndex {
            rng_seed,
            structure_config,
            composition_config,
            entries,
            spreads,
        })
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&IndexEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn structure_config(&self) -> &StructureFingerprintConfig {
        &self.structure_config
    }

    pub fn composition_config(&self) -> &CompositionFingerprintConfig {
        &self.composition_config
    }

    /// Normalization used when ranking a continuous property.
    pub fn spread(&self, p: PropertyName) -> f64 {
        self.spreads.get(&p).copied().unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Condition,
    Structure,
    ConditionStructure,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Condition,
        Strategy::Structure,
        Strategy::ConditionStructure,
        Strategy::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Condition => "condition",
            Strategy::Structure => "structure",
            Strategy::ConditionStructure => "condition-structure",
            Strategy::Random => "random",
        }
    }

    pub fn needs_condition(self) -> bool {
        matches!(self, Strategy::Condition | Strategy::ConditionStructure)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hybrid" => Ok(Strategy::ConditionStructure),
            _ => Strategy::ALL
                .into_iter()
                .find(|x| x.as_str() == s)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionSpec {
    pub strategy: Strategy,
    pub k: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub ids: Vec<String>,
    /// Set when the strategy could not be satisfied from matching entries
    /// alone.
    pub partial: bool,
}

/// Runs `spec` against `idx`, never returning any id in `exclude`.
pub fn select(
    idx: &DatasetIndex,
    spec: &SelectionSpec,
    cond: Option<&GenerationCondition>,
    exclude: &[&str],
) -> Result<Selection> {
    if idx.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if spec.k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if spec.k > idx.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {} exceeds dataset size {}",
            spec.k,
            idx.len()
        )));
    }
    let pool: Vec<&IndexEntry> = idx.entries.iter().filter(|e| !exclude.contains(&e.id.as_str())).collect();
    if pool.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let condition = |s: Strategy| -> Result<Matcher> {
        let c = cond.ok_or_else(|| Error::Condition(format!("strategy {s} needs a condition")))?;
        Matcher::new(idx, c)
    };
    match spec.strategy {
        Strategy::Condition => Ok(by_condition(&pool, &condition(spec.strategy)?, spec.k)),
        Strategy::Structure => by_structure(&pool, &pool, spec.k, spec.seed, false),
        Strategy::ConditionStructure => by_condition_structure(&pool, &condition(spec.strategy)?, spec.k, spec.seed),
        Strategy::Random => {
            let mut rng = seeded_rng(derive_seed(spec.seed, STREAM_RANDOM));
            let take = spec.k.min(pool.len());
            let mut picks = sample(&mut rng, pool.len(), take).into_vec();
            picks.sort_unstable();
            Ok(Selection {
                ids: picks.into_iter().map(|i| pool[i].id.clone()).collect(),
                partial: take < spec.k,
            })
        }
    }
}

pub fn select_condition(idx: &DatasetIndex, cond: &GenerationCondition, k: usize, seed: u64) -> Result<Selection> {
    let spec = SelectionSpec { strategy: Strategy::Condition, k, seed };
    select(idx, &spec, Some(cond), &[])
}

pub fn select_structure(idx: &DatasetIndex, k: usize, seed: u64) -> Result<Selection> {
    let spec = SelectionSpec { strategy: Strategy::Structure, k, seed };
    select(idx, &spec, None, &[])
}

pub fn select_condition_structure(
    idx: &DatasetIndex,
    cond: &GenerationCondition,
    k: usize,
    seed: u64,
) -> Result<Selection> {
    let spec = SelectionSpec { strategy: Strategy::ConditionStructure, k, seed };
    select(idx, &spec, Some(cond), &[])
}

pub fn select_random(idx: &DatasetIndex, k: usize, seed: u64) -> Result<Selection> {
    let spec = SelectionSpec { strategy: Strategy::Random, k, seed };
    select(idx, &spec, None, &[])
}

struct Matcher {
    spacegroup: Option<u16>,
    anonymized: Option<String>,
    reduced: Option<String>,
    continuous: Vec<(PropertyName, f64, f64)>,
}

impl Matcher {
    fn new(idx: &DatasetIndex, cond: &GenerationCondition) -> Result<Self> {
        cond.validate_condition()?;
        let comp = cond.pretty_formula.as_deref().map(Composition::parse_formula).transpose()?;
        Ok(Matcher {
            spacegroup: cond.spacegroup_number,
            anonymized: comp.as_ref().map(Composition::anonymized_formula),
            reduced: comp.as_ref().map(Composition::reduced_formula),
            continuous: PropertyName::ALL
                .into_iter()
                .filter_map(|p| cond.real(p).map(|t| (p, t, idx.spread(p))))
                .collect(),
        })
    }

    fn passes(&self, e: &IndexEntry) -> bool {
        if self.spacegroup.is_some_and(|sg| sg != e.spacegroup_number()) {
            return false;
        }
        match &self.anonymized {
            Some(a) => *a == e.composition().anonymized_formula(),
            None => true,
        }
    }

    fn score(&self, e: &IndexEntry) -> f64 {
        self.continuous
            .iter()
            .map(|&(p, t, s)| e.properties.real(p).map_or(f64::INFINITY, |v| (v - t).abs() / s))
            .sum()
    }

    /// Sort key: exact formula matches first, then score, then id.
    fn rank<'a>(&self, entries: &mut [&'a IndexEntry]) {
        let mut keyed: Vec<(bool, f64, &'a IndexEntry)> = entries
            .iter()
            .map(|e| {
                let exact = match &self.reduced {
                    Some(r) => *r == e.composition().reduced_formula(),
                    None => true,
                };
                (!exact, self.score(e), *e)
            })
            .collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then_with(|| a.2.id.cmp(&b.2.id)));
        for (slot, k) in entries.iter_mut().zip(keyed) {
            *slot = k.2;
        }
    }
}

fn by_condition(pool: &[&IndexEntry], m: &Matcher, k: usize) -> Selection {
    let (mut hits, mut rest): (Vec<&IndexEntry>, Vec<&IndexEntry>) = pool.iter().partition(|e| m.passes(e));
    m.rank(&mut hits);
    let mut ids: Vec<String> = hits.iter().take(k).map(|e| e.id.clone()).collect();
    let partial = ids.len() < k;
    if partial {
        m.rank(&mut rest);
        ids.extend(rest.iter().take(k - ids.len()).map(|e| e.id.clone()));
    }
    Selection { ids, partial }
}

fn by_condition_structure(pool: &[&IndexEntry], m: &Matcher, k: usize, seed: u64) -> Result<Selection> {
    let mut hits: Vec<&IndexEntry> = pool.iter().copied().filter(|e| m.passes(e)).collect();
    if !m.continuous.is_empty() {
        m.rank(&mut hits);
        hits.truncate((4 * k).max(32));
    }
    if hits.len() >= k {
        by_structure(&hits, &hits, k, seed, false)
    } else if hits.is_empty() {
        by_structure(pool, pool, k, seed, true)
    } else {
        by_structure(&hits, pool, k, seed, true)
    }
}

/// Seeded anchor from `anchors`, then its nearest neighbors in `neighbors`.
fn by_structure(
    anchors: &[&IndexEntry],
    neighbors: &[&IndexEntry],
    k: usize,
    seed: u64,
    partial: bool,
) -> Result<Selection> {
    let mut sorted = anchors.to_vec();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rng = seeded_rng(derive_seed(seed, STREAM_ANCHOR));
    let anchor = sorted[rng.random_range(0..sorted.len())];
    let mut near: Vec<(f64, &IndexEntry)> = neighbors
        .iter()
        .filter(|e| e.id != anchor.id)
        .map(|e| Ok((anchor.structure_fp.distance(&e.structure_fp)?, *e)))
        .collect::<Result<_>>()?;
    near.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
    let mut ids = vec![anchor.id.clone()];
    ids.extend(near.into_iter().take(k - 1).map(|(_, e)| e.id.clone()));
    let partial = partial || ids.len() < k;
    Ok(Selection { ids, partial })
}
