//! Validity checks, success rules, distribution distances, coverage and the
//! aggregated metrics report.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crystal::{Composition, Crystal};
use crate::error::{Error, Result};
use crate::fingerprint::{
    composition_fingerprint, structure_fingerprint, CompositionFingerprintConfig, FingerprintVector,
    StructureFingerprintConfig,
};
use crate::lattice::shortest_image_distance;
use crate::properties::{GenerationCondition, PropertyName, PropertyValues};
use crate::rng::{derive_seed, seeded_rng};
use crate::symmetry::{load_space_group, SpaceGroup, DEFAULT_EPS};

/// Upper bound on oxidation-state assignments tried per composition.
pub const OXIDATION_SEARCH_CAP: u64 = 1_000_000;

/// True iff no two atoms (or an atom and its own periodic image) sit closer
/// than half the sum of their covalent radii.
pub fn structural_validity(c: &Crystal) -> bool {
    let lat = c.lattice();
    let sites = c.sites();
    for (i, a) in sites.iter().enumerate() {
        let ra = a.element.data().covalent_radius;
        if shortest_image_distance(lat, a.frac, a.frac, true) < ra {
            return false;
        }
        for b in &sites[..i] {
            let limit = 0.5 * (ra + b.element.data().covalent_radius);
            if shortest_image_distance(lat, a.frac, b.frac, false) < limit {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChargeCheck {
    pub neutral: bool,
    /// The search hit [`OXIDATION_SEARCH_CAP`] before finding a solution.
    pub capped: bool,
}

/// Exhaustive search for one common oxidation state per element giving a
/// net charge of zero. Single-element compositions count as neutral.
pub fn charge_neutrality(comp: &Composition) -> ChargeCheck {
    let elems: Vec<(i64, &[i32])> = comp
        .reduced()
        .iter()
        .map(|(e, n)| (i64::from(n), e.data().oxidation_states.as_slice()))
        .collect();
    if elems.len() <= 1 {
        return ChargeCheck { neutral: !elems.is_empty(), capped: false };
    }
    let mut budget = OXIDATION_SEARCH_CAP;
    let neutral = search(&elems, 0, &mut budget);
    ChargeCheck { neutral, capped: !neutral && budget == 0 }
}

fn search(elems: &[(i64, &[i32])], acc: i64, budget: &mut u64) -> bool {
    let Some(((n, states), rest)) = elems.split_first() else {
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        return acc == 0;
    };
    states.iter().any(|&s| *budget > 0 && search(rest, acc + n * i64::from(s), budget))
}

pub fn compositional_validity(comp: &Composition) -> bool {
    charge_neutrality(comp).neutral
}

fn condition_composition(cond: &GenerationCondition) -> Result<Composition> {
    let f = cond
        .pretty_formula
        .as_deref()
        .ok_or_else(|| Error::Condition("condition has no formula".into()))?;
    Composition::parse_formula(f)
}

pub fn formula_success(c: &Crystal, cond: &GenerationCondition) -> Result<bool> {
    Ok(c.composition().reduced() == condition_composition(cond)?.reduced())
}

/// Space-group check by verification: a declared group (SGS output) must
/// match the target and the expanded structure must be symmetric under it.
pub fn spacegroup_success(c: &Crystal, declared: Option<&SpaceGroup>, target: u16, eps: f64) -> bool {
    match declared {
        Some(g) => g.number() == target && g.verify(c, eps),
        None => load_space_group(target).is_ok_and(|g| g.verify(c, eps)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SuccessRule {
    ExactFormula,
    SpacegroupVerify,
    SignMatch,
    AbsDiffBelow { threshold: f64 },
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Applies a numeric rule; structural rules never accept a number.
pub fn numeric_property_success(predicted: f64, target: f64, rule: SuccessRule) -> bool {
    if !predicted.is_finite() || !target.is_finite() {
        return false;
    }
    match rule {
        SuccessRule::SignMatch => sign(predicted) == sign(target),
        SuccessRule::AbsDiffBelow { threshold } => (predicted - target).abs() < threshold,
        SuccessRule::ExactFormula | SuccessRule::SpacegroupVerify => false,
    }
}

pub fn default_rules() -> BTreeMap<PropertyName, SuccessRule> {
    BTreeMap::from([
        (PropertyName::PrettyFormula, SuccessRule::ExactFormula),
        (PropertyName::SpacegroupNumber, SuccessRule::SpacegroupVerify),
        (PropertyName::FormationEnergy, SuccessRule::SignMatch),
        (PropertyName::BandGap, SuccessRule::AbsDiffBelow { threshold: 0.5 }),
    ])
}

/// First Wasserstein distance between two empirical distributions.
pub fn wasserstein1(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::EmptySample);
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("samples must be finite".into()));
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = a[0].min(b[0]);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (next - prev);
        while i < a.len() && a[i] == next {
            i += 1;
        }
        while j < b.len() && b[j] == next {
            j += 1;
        }
        prev = next;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageThresholds {
    pub structure: f64,
    pub composition: f64,
}

impl Default for CoverageThresholds {
    fn default() -> Self {
        CoverageThresholds { structure: 0.4, composition: 10.0 }
    }
}

/// Structure and composition fingerprints of one crystal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintPair {
    pub structure: FingerprintVector,
    pub composition: FingerprintVector,
}

impl FingerprintPair {
    pub fn of(c: &Crystal, s: &StructureFingerprintConfig, k: &CompositionFingerprintConfig) -> Result<Self> {
        Ok(FingerprintPair {
            structure: structure_fingerprint(c, s),
            composition: composition_fingerprint(&c.composition(), k)?,
        })
    }

    pub fn covers(&self, other: &FingerprintPair, t: &CoverageThresholds) -> Result<bool> {
        Ok(self.structure.distance(&other.structure)? < t.structure
            && self.composition.distance(&other.composition)? < t.composition)
    }
}

/// For each generated item, the reference indices it covers.
pub fn coverage_matrix(
    generated: &[FingerprintPair],
    reference: &[FingerprintPair],
    t: &CoverageThresholds,
) -> Result<Vec<Vec<usize>>> {
    generated
        .iter()
        .map(|g| {
            let mut hits = Vec::new();
            for (j, r) in reference.iter().enumerate() {
                if g.covers(r, t)? {
                    hits.push(j);
                }
            }
            Ok(hits)
        })
        .collect()
}

/// `(recall, precision)` of generated against reference fingerprints.
pub fn coverage(
    generated: &[FingerprintPair],
    reference: &[FingerprintPair],
    t: &CoverageThresholds,
) -> Result<(f64, f64)> {
    let m = coverage_matrix(generated, reference, t)?;
    Ok(coverage_from_matrix(&m, (0..generated.len()).collect::<Vec<_>>().as_slice(), reference.len()))
}

fn coverage_from_matrix(m: &[Vec<usize>], picks: &[usize], n_ref: usize) -> (f64, f64) {
    let mut covered = vec![false; n_ref];
    let mut useful = 0usize;
    for &g in picks {
        if !m[g].is_empty() {
            useful += 1;
        }
        for &r in &m[g] {
            covered[r] = true;
        }
    }
    let recall = if n_ref == 0 { 0.0 } else { covered.iter().filter(|c| **c).count() as f64 / n_ref as f64 };
    let precision = if picks.is_empty() { 0.0 } else { useful as f64 / picks.len() as f64 };
    (recall, precision)
}

/// Source of property estimates for generated structures.
pub trait PropertyPredictor: Send + Sync {
    fn predicts(&self) -> Vec<PropertyName>;

    /// Estimates for `c`; `space_group` is the declared or verified group
    /// when known.
    fn predict(&self, c: &Crystal, space_group: Option<u16>) -> BTreeMap<PropertyName, f64>;
}

#[derive(Debug, Clone, Default)]
pub struct ConstantPredictor {
    pub values: BTreeMap<PropertyName, f64>,
}

impl PropertyPredictor for ConstantPredictor {
    fn predicts(&self) -> Vec<PropertyName> {
        self.values.keys().copied().collect()
    }

    fn predict(&self, _: &Crystal, _: Option<u16>) -> BTreeMap<PropertyName, f64> {
        self.values.clone()
    }
}

/// Values keyed by `<reduced formula>_<space group number>`, or by the bare
/// reduced formula as a fallback.
#[derive(Debug, Clone, Default)]
pub struct LookupPredictor {
    table: HashMap<String, BTreeMap<PropertyName, f64>>,
}

#[derive(Deserialize)]
struct LookupRow {
    key: String,
    #[serde(default)]
    formation_energy: Option<f64>,
    #[serde(default)]
    band_gap: Option<f64>,
}

impl LookupPredictor {
    pub fn lookup_key(formula: &str, space_group: Option<u16>) -> String {
        match space_group {
            Some(n) => format!("{formula}_{n}"),
            None => formula.to_string(),
        }
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut table = HashMap::new();
        for (i, row) in rdr.deserialize::<LookupRow>().enumerate() {
            let row = row.map_err(|e| {
                let line = e.position().map_or(i + 2, |p| p.line() as usize);
                Error::parse(line, 1, e.to_string())
            })?;
            let mut v = BTreeMap::new();
            if let Some(x) = row.formation_energy {
                v.insert(PropertyName::FormationEnergy, x);
            }
            if let Some(x) = row.band_gap {
                v.insert(PropertyName::BandGap, x);
            }
            table.insert(row.key, v);
        }
        Ok(LookupPredictor { table })
    }

    pub fn insert(&mut self, key: impl Into<String>, values: BTreeMap<PropertyName, f64>) {
        self.table.insert(key.into(), values);
    }
}

impl PropertyPredictor for LookupPredictor {
    fn predicts(&self) -> Vec<PropertyName> {
        vec![PropertyName::FormationEnergy, PropertyName::BandGap]
    }

    fn predict(&self, c: &Crystal, space_group: Option<u16>) -> BTreeMap<PropertyName, f64> {
        let formula = c.composition().reduced_formula();
        space_group
            .and_then(|n| self.table.get(&Self::lookup_key(&formula, Some(n))))
            .or_else(|| self.table.get(&formula))
            .cloned()
            .unwrap_or_default()
    }
}

/// A generated structure after parsing; `crystal` is `None` when the text
/// was rejected.
#[derive(Debug, Clone)]
pub struct EvalSample {
    pub condition: GenerationCondition,
    pub crystal: Option<Crystal>,
    pub declared_group: Option<&'static SpaceGroup>,
}

#[derive(Debug, Clone)]
pub struct ReferenceItem {
    pub crystal: Crystal,
    pub properties: PropertyValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub repetitions: usize,
    pub seed: u64,
    pub eps: f64,
    pub thresholds: CoverageThresholds,
    pub structure_fingerprint: StructureFingerprintConfig,
    pub composition_fingerprint: CompositionFingerprintConfig,
    pub rules: BTreeMap<PropertyName, SuccessRule>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            repetitions: 1,
            seed: 0,
            eps: DEFAULT_EPS,
            thresholds: CoverageThresholds::default(),
            structure_fingerprint: StructureFingerprintConfig::default(),
            composition_fingerprint: CompositionFingerprintConfig::default(),
            rules: default_rules(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    fn of(xs: &[f64]) -> Stat {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Stat { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub total: usize,
    pub parsed: usize,
    pub rejected: usize,
    /// Compositions whose oxidation-state search was truncated.
    pub charge_search_capped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub structural: Stat,
    pub compositional: Stat,
    pub combined: Stat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub recall: Stat,
    pub precision: Stat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WassersteinReport {
    pub density: Option<Stat>,
    pub formation_energy: Option<Stat>,
    pub n_elements: Option<Stat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealismReport {
    pub atomic_overlap_rate: Stat,
    pub symmetry_adherence_rate: Option<Stat>,
    pub negative_formation_rate: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub counts: Counts,
    pub validity: ValidityReport,
    pub success: BTreeMap<PropertyName, Stat>,
    pub coverage: CoverageReport,
    pub wasserstein: WassersteinReport,
    pub realism: RealismReport,
    pub repetitions: usize,
    pub seed: u64,
}

impl MetricsReport {
    /// Flat `metric,mean,std` rows; absent metrics are written as `-`.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(String, Option<Stat>)> = vec![
            ("validity.structural".into(), Some(self.validity.structural)),
            ("validity.compositional".into(), Some(self.validity.compositional)),
            ("validity.combined".into(), Some(self.validity.combined)),
            ("coverage.recall".into(), Some(self.coverage.recall)),
            ("coverage.precision".into(), Some(self.coverage.precision)),
            ("wasserstein.density".into(), self.wasserstein.density),
            ("wasserstein.formation_energy".into(), self.wasserstein.formation_energy),
            ("wasserstein.n_elements".into(), self.wasserstein.n_elements),
        ];
        for (p, s) in &self.success {
            rows.push((format!("success.{p}"), Some(*s)));
        }
        rows.push(("realism.atomic_overlap_rate".into(), Some(self.realism.atomic_overlap_rate)));
        rows.push(("realism.symmetry_adherence_rate".into(), self.realism.symmetry_adherence_rate));
        rows.push(("realism.negative_formation_rate".into(), self.realism.negative_formation_rate));
        let mut out = String::from("metric,mean,std\n");
        for (name, s) in rows {
            match s {
                Some(s) => out.push_str(&format!("{name},{},{}\n", s.mean, s.std)),
                None => out.push_str(&format!("{name},-,-\n")),
            }
        }
        out
    }
}

struct SampleScore {
    structural: bool,
    compositional: bool,
    capped: bool,
    success: BTreeMap<PropertyName, bool>,
    symmetric: Option<bool>,
    formation: Option<f64>,
    density: Option<f64>,
    n_elements: Option<f64>,
}

fn score_sample(s: &EvalSample, predictor: &dyn PropertyPredictor, cfg: &EvalConfig) -> SampleScore {
    let mut out = SampleScore {
        structural: false,
        compositional: false,
        capped: false,
        success: BTreeMap::new(),
        symmetric: None,
        formation: None,
        density: None,
        n_elements: None,
    };
    let target_sg = s.condition.spacegroup_number;
    let Some(c) = &s.crystal else {
        for p in cfg.rules.keys() {
            if s.condition.get(*p).is_some() {
                out.success.insert(*p, false);
            }
        }
        if target_sg.is_some() {
            out.symmetric = Some(false);
        }
        return out;
    };
    out.structural = structural_validity(c);
    let charge = charge_neutrality(&c.composition());
    out.compositional = charge.neutral;
    out.capped = charge.capped;
    out.density = Some(c.density());
    out.n_elements = Some(c.composition().num_elements() as f64);
    let group = s.declared_group.map(|g| g.number()).or(target_sg);
    let predicted = predictor.predict(c, group);
    out.formation = predicted.get(&PropertyName::FormationEnergy).copied();
    let sym = target_sg.map(|t| spacegroup_success(c, s.declared_group, t, cfg.eps));
    out.symmetric = sym;
    for (p, rule) in &cfg.rules {
        let ok = match (rule, s.condition.get(*p)) {
            (_, None) => continue,
            (SuccessRule::ExactFormula, Some(_)) => formula_success(c, &s.condition).unwrap_or(false),
            (SuccessRule::SpacegroupVerify, Some(_)) => sym.unwrap_or(false),
            (rule, Some(_)) => match (predicted.get(p), s.condition.real(*p)) {
                (Some(v), Some(t)) => numeric_property_success(*v, t, *rule),
                _ => false,
            },
        };
        out.success.insert(*p, ok);
    }
    out
}

fn rate(picks: &[usize], f: impl Fn(usize) -> Option<bool>) -> Option<f64> {
    let vals: Vec<bool> = picks.iter().filter_map(|&i| f(i)).collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().filter(|v| **v).count() as f64 / vals.len() as f64)
    }
}

/// Scores a batch of generated samples against a reference set. With
/// `repetitions > 1`, statistics are taken over seeded bootstrap resamples.
pub fn evaluate_batch(
    samples: &[EvalSample],
    reference: &[ReferenceItem],
    predictor: &dyn PropertyPredictor,
    cfg: &EvalConfig,
) -> Result<MetricsReport> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if reference.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let scores: Vec<SampleScore> = samples.iter().map(|s| score_sample(s, predictor, cfg)).collect();
    let fp = |c: &Crystal| FingerprintPair::of(c, &cfg.structure_fingerprint, &cfg.composition_fingerprint);
    let gen_fps: Vec<Option<FingerprintPair>> = samples
        .iter()
        .map(|s| s.crystal.as_ref().map(fp).transpose())
        .collect::<Result<_>>()?;
    let ref_fps: Vec<FingerprintPair> = reference.iter().map(|r| fp(&r.crystal)).collect::<Result<_>>()?;
    let parsed_idx: Vec<usize> = (0..samples.len()).filter(|&i| gen_fps[i].is_some()).collect();
    let parsed_fps: Vec<FingerprintPair> = parsed_idx.iter().map(|&i| gen_fps[i].clone().expect("parsed")).collect();
    let matrix_parsed = coverage_matrix(&parsed_fps, &ref_fps, &cfg.thresholds)?;
    let mut matrix: Vec<Vec<usize>> = vec![Vec::new(); samples.len()];
    for (k, &i) in parsed_idx.iter().enumerate() {
        matrix[i] = matrix_parsed[k].clone();
    }

    let ref_density: Vec<f64> = reference.iter().map(|r| r.crystal.density()).collect();
    let ref_formation: Vec<f64> = reference
        .iter()
        .filter_map(|r| {
            r.properties.formation_energy.or_else(|| {
                let g = r.properties.spacegroup_number;
                predictor.predict(&r.crystal, g).get(&PropertyName::FormationEnergy).copied()
            })
        })
        .collect();
    let ref_nel: Vec<f64> = reference.iter().map(|r| r.crystal.composition().num_elements() as f64).collect();
    let single_element = ref_nel.iter().all(|n| *n <= 1.0);

    let reps = cfg.repetitions.max(1);
    let n = samples.len();
    let draws: Vec<Vec<usize>> = if reps == 1 {
        vec![(0..n).collect()]
    } else {
        (0..reps)
            .map(|r| {
                let mut rng = seeded_rng(derive_seed(cfg.seed, r as u64));
                (0..n).map(|_| rng.random_range(0..n)).collect()
            })
            .collect()
    };

    let mut acc: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
    let mut success: BTreeMap<PropertyName, Vec<f64>> = BTreeMap::new();
    let mut push = |k: &'static str, v: Option<f64>| {
        if let Some(v) = v {
            acc.entry(k).or_default().push(v);
        }
    };
    for picks in &draws {
        push("structural", rate(picks, |i| Some(scores[i].structural)));
        push("compositional", rate(picks, |i| Some(scores[i].compositional)));
        push("combined", rate(picks, |i| Some(scores[i].structural && scores[i].compositional)));
        push("overlap", rate(picks, |i| samples[i].crystal.as_ref().map(|_| !scores[i].structural)));
        push("symmetry", rate(picks, |i| scores[i].symmetric));
        push("negative_formation", rate(picks, |i| scores[i].formation.map(|e| e < 0.0)));
        let parsed: Vec<usize> = picks.iter().copied().filter(|&i| gen_fps[i].is_some()).collect();
        let (recall, precision) = coverage_from_matrix(&matrix, &parsed, ref_fps.len());
        push("recall", Some(recall));
        push("precision", Some(precision));
        let dens: Vec<f64> = parsed.iter().filter_map(|&i| scores[i].density).collect();
        push("w_density", wasserstein1(&dens, &ref_density).ok());
        let form: Vec<f64> = parsed.iter().filter_map(|&i| scores[i].formation).collect();
        push("w_formation", wasserstein1(&form, &ref_formation).ok());
        if !single_element {
            let nel: Vec<f64> = parsed.iter().filter_map(|&i| scores[i].n_elements).collect();
            push("w_nel", wasserstein1(&nel, &ref_nel).ok());
        }
        for p in cfg.rules.keys() {
            if let Some(r) = rate(picks, |i| scores[i].success.get(p).copied()) {
                success.entry(*p).or_default().push(r);
            }
        }
    }
    let stat = |k: &str| acc.get(k).map(|v| Stat::of(v));
    let zero = Stat { mean: 0.0, std: 0.0 };
    let parsed = parsed_idx.len();
    Ok(MetricsReport {
        counts: Counts {
            total: n,
            parsed,
            rejected: n - parsed,
            charge_search_capped: scores.iter().filter(|s| s.capped).count(),
        },
        validity: ValidityReport {
            structural: stat("structural").unwrap_or(zero),
            compositional: stat("compositional").unwrap_or(zero),
            combined: stat("combined").unwrap_or(zero),
        },
        success: success.into_iter().map(|(p, v)| (p, Stat::of(&v))).collect(),
        coverage: CoverageReport {
            recall: stat("recall").unwrap_or(zero),
            precision: stat("precision").unwrap_or(zero),
        },
        wasserstein: WassersteinReport {
            density: stat("w_density"),
            formation_energy: stat("w_formation"),
            n_elements: stat("w_nel"),
        },
        realism: RealismReport {
            atomic_overlap_rate: stat("overlap").unwrap_or(zero),
            symmetry_adherence_rate: stat("symmetry"),
            negative_formation_rate: stat("negative_formation"),
        },
        repetitions: reps,
        seed: cfg.seed,
    })
}
