//! Prompt templates and instruction dataset assembly.

use std::collections::BTreeMap;
use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::properties::{GenerationCondition, PropertyName, PropertyValue};
use crate::rng::{derive_seed, seeded_rng};
use crate::select::{select, DatasetIndex, IndexEntry, SelectionSpec, Strategy};
use crate::symmetry::load_space_group;
use crate::text::{serialize_crystal, CrystalFormat};

pub const MAX_SHOTS: usize = 5;
const COUNT_WORDS: [&str; MAX_SHOTS] = ["one", "two", "three", "four", "five"];
const ORDINALS: [&str; MAX_SHOTS] = ["First", "Second", "Third", "Fourth", "Fifth"];

/// Renders a real with at most four decimals, trailing zeros trimmed down
/// to a single decimal digit.
pub fn render_number(x: f64) -> String {
    let mut s = format!("{x:.4}");
    while s.ends_with('0') && !s.ends_with(".0") {
        s.pop();
    }
    if s == "-0.0" {
        s = "0.0".into();
    }
    s
}

pub fn render_value(v: &PropertyValue) -> String {
    match v {
        PropertyValue::Text(s) => s.clone(),
        PropertyValue::Integer(i) => i.to_string(),
        PropertyValue::Real(x) => render_number(*x),
    }
}

fn sentence(p: PropertyName, value: &str) -> String {
    format!("The {} is {}.", p.description(), value)
}

/// Condition sentences in canonical field order, space separated.
pub fn render_condition(cond: &GenerationCondition) -> String {
    PropertyName::ALL
        .into_iter()
        .filter_map(|p| cond.get(p).map(|v| sentence(p, &render_value(&v))))
        .collect::<Vec<_>>()
        .join(" ")
}

fn request_phrase(format: CrystalFormat) -> &'static str {
    match format {
        CrystalFormat::Sgs => "the space group symbol, a description of the lengths and angles of the lattice vectors",
        CrystalFormat::Xyz => "a description of the lengths and angles of the lattice vectors",
    }
}

pub fn zero_shot_prompt(cond: &GenerationCondition, format: CrystalFormat) -> String {
    let mut s = String::from("Below is a description of a bulk material. ");
    let c = render_condition(cond);
    if !c.is_empty() {
        s.push_str(&c);
        s.push(' ');
    }
    s.push_str(&format!(
        "Generate {} and then the element type and coordinates for each atom within the lattice:",
        request_phrase(format)
    ));
    s
}

pub fn few_shot_prompt(
    examples: &[(GenerationCondition, String)],
    cond: &GenerationCondition,
    format: CrystalFormat,
) -> Result<String> {
    let n = examples.len();
    if n == 0 || n > MAX_SHOTS {
        return Err(Error::InvalidArgument(format!("few-shot prompts take 1 to {MAX_SHOTS} examples, got {n}")));
    }
    let count = COUNT_WORDS[n - 1];
    let mut lines = vec![format!("Below is {count} description of bulk materials.")];
    for (i, (c, text)) in examples.iter().enumerate() {
        lines.push(format!("{} Example:", ORDINALS[i]));
        let c = render_condition(c);
        if !c.is_empty() {
            lines.push(c);
        }
        lines.push(text.trim_end().to_string());
    }
    let mut last = render_condition(cond);
    if !last.is_empty() {
        last.push(' ');
    }
    let noun = if n == 1 { "example" } else { "examples" };
    last.push_str(&format!(
        "Based on the {count} {noun} provided, generate {}, along with the element type and coordinates for each atom within the lattice:",
        request_phrase(format)
    ));
    lines.push(last);
    Ok(lines.join("\n"))
}

pub fn property_prompt(p: PropertyName, crystal_text: &str) -> String {
    let d = p.description();
    format!(
        "Below is a partial description of a bulk material where the {d} has been replaced with the string \"[MASK]\":\n{}\n{}\nGenerate the {d} that could replace [MASK] in the bulk material:",
        sentence(p, "[MASK]"),
        crystal_text.trim_end()
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Generation,
    PropertyPrediction,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordMetadata {
    pub target_id: String,
    pub format: CrystalFormat,
    pub condition: GenerationCondition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub source_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub partial: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub property: Option<PropertyName>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub id: String,
    pub task: Task,
    pub shots: usize,
    pub strategy: Option<Strategy>,
    pub prompt: String,
    pub response: String,
    pub metadata: RecordMetadata,
}

/// Crystal string of an index entry in `format`.
pub fn entry_text(entry: &IndexEntry, format: CrystalFormat, eps: f64) -> Result<String> {
    let g = load_space_group(entry.space_group)?;
    serialize_crystal(&entry.crystal, g, format, eps)
}

/// The entry's values for the given condition fields. The formula falls
/// back to the structure's reduced formula.
pub fn entry_condition(entry: &IndexEntry, fields: &[PropertyName]) -> GenerationCondition {
    let mut props = entry.properties.clone();
    if props.pretty_formula.is_none() {
        props.pretty_formula = Some(entry.composition().reduced_formula());
    }
    if props.spacegroup_number.is_none() {
        props.spacegroup_number = Some(entry.space_group);
    }
    props.restricted_to(fields)
}

pub fn build_zero_shot(
    entry: &IndexEntry,
    cond: &GenerationCondition,
    format: CrystalFormat,
    eps: f64,
) -> Result<InstructionRecord> {
    Ok(InstructionRecord {
        id: format!("{}/zero-shot", entry.id),
        task: Task::Generation,
        shots: 0,
        strategy: None,
        prompt: zero_shot_prompt(cond, format),
        response: entry_text(entry, format, eps)?,
        metadata: RecordMetadata {
            target_id: entry.id.clone(),
            format,
            condition: cond.clone(),
            ..Default::default()
        },
    })
}

pub fn build_few_shot(
    entry: &IndexEntry,
    cond: &GenerationCondition,
    examples: &[(GenerationCondition, String)],
    format: CrystalFormat,
    eps: f64,
) -> Result<InstructionRecord> {
    Ok(InstructionRecord {
        id: format!("{}/few-shot", entry.id),
        task: Task::Generation,
        shots: examples.len(),
        strategy: None,
        prompt: few_shot_prompt(examples, cond, format)?,
        response: entry_text(entry, format, eps)?,
        metadata: RecordMetadata {
            target_id: entry.id.clone(),
            format,
            condition: cond.clone(),
            ..Default::default()
        },
    })
}

pub fn build_property_prediction(
    entry: &IndexEntry,
    property: &str,
    format: CrystalFormat,
    eps: f64,
) -> Result<InstructionRecord> {
    let p: PropertyName = property.parse()?;
    let value = entry_condition(entry, &[p])
        .get(p)
        .ok_or_else(|| Error::MissingProperty(format!("{} has no {p}", entry.id)))?;
    let text = entry_text(entry, format, eps)?;
    Ok(InstructionRecord {
        id: format!("{}/predict/{p}", entry.id),
        task: Task::PropertyPrediction,
        shots: 0,
        strategy: None,
        prompt: property_prompt(p, &text),
        response: render_value(&value),
        metadata: RecordMetadata {
            target_id: entry.id.clone(),
            format,
            property: Some(p),
            ..Default::default()
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyWeights {
    #[serde(default)]
    pub condition: f64,
    #[serde(default)]
    pub structure: f64,
    #[serde(default, rename = "condition-structure", alias = "hybrid")]
    pub condition_structure: f64,
    #[serde(default)]
    pub random: f64,
}

impl Default for StrategyWeights {
    fn default() -> Self {
        StrategyWeights { condition: 1.0, structure: 1.0, condition_structure: 1.0, random: 1.0 }
    }
}

impl StrategyWeights {
    fn pairs(&self) -> [(Strategy, f64); 4] {
        [
            (Strategy::Condition, self.condition),
            (Strategy::Structure, self.structure),
            (Strategy::ConditionStructure, self.condition_structure),
            (Strategy::Random, self.random),
        ]
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<usize>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Shots {
        One(usize),
        Many(Vec<usize>),
    }
    Ok(match Shots::deserialize(d)? {
        Shots::One(n) => vec![n],
        Shots::Many(v) => v,
    })
}

fn default_shots() -> Vec<usize> {
    vec![3]
}

fn default_condition_fields() -> Vec<PropertyName> {
    PropertyName::ALL.to_vec()
}

fn default_eps() -> f64 {
    crate::symmetry::DEFAULT_EPS
}

/// Dataset build settings, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default)]
    pub format: CrystalFormat,
    /// Candidate shot counts; one is drawn per few-shot record.
    #[serde(default = "default_shots", deserialize_with = "one_or_many")]
    pub shots: Vec<usize>,
    #[serde(default)]
    pub strategy_weights: StrategyWeights,
    /// Properties that get a prediction record per entry.
    #[serde(default)]
    pub properties: Vec<PropertyName>,
    /// Properties used to describe generation conditions.
    #[serde(default = "default_condition_fields")]
    pub condition_fields: Vec<PropertyName>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            format: CrystalFormat::Sgs,
            shots: default_shots(),
            strategy_weights: StrategyWeights::default(),
            properties: Vec::new(),
            condition_fields: default_condition_fields(),
            seed: 0,
            eps: default_eps(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shots.is_empty() || self.shots.iter().any(|&k| k == 0 || k > MAX_SHOTS) {
            return Err(Error::InvalidArgument(format!("shots must lie in 1..={MAX_SHOTS}")));
        }
        let w = self.strategy_weights.pairs();
        if w.iter().any(|(_, x)| !x.is_finite() || *x < 0.0) || w.iter().all(|(_, x)| *x == 0.0) {
            return Err(Error::InvalidArgument("strategy weights must be non-negative with a positive sum".into()));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::InvalidArgument("eps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SkipCounts {
    pub serialization: usize,
    pub few_shot: usize,
    pub missing_property: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub records: usize,
    pub entries: usize,
    pub by_task: BTreeMap<Task, usize>,
    pub by_strategy: BTreeMap<Strategy, usize>,
    pub by_shots: BTreeMap<usize, usize>,
    pub skipped: SkipCounts,
    pub index_seed: u64,
    pub config: DatasetConfig,
}

impl DatasetManifest {
    fn count(records: &[InstructionRecord], entries: usize, skipped: SkipCounts, index_seed: u64, config: DatasetConfig) -> Self {
        let mut by_task = BTreeMap::new();
        let mut by_strategy = BTreeMap::new();
        let mut by_shots = BTreeMap::new();
        for r in records {
            *by_task.entry(r.task).or_insert(0) += 1;
            if let Some(s) = r.strategy {
                *by_strategy.entry(s).or_insert(0) += 1;
            }
            if r.task == Task::Generation {
                *by_shots.entry(r.shots).or_insert(0) += 1;
            }
        }
        DatasetManifest {
            records: records.len(),
            entries,
            by_task,
            by_strategy,
            by_shots,
            skipped,
            index_seed,
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstructionDataset {
    pub records: Vec<InstructionRecord>,
    pub manifest: DatasetManifest,
}

impl InstructionDataset {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn manifest_json(&self) -> String {
        serde_json::to_string_pretty(&self.manifest).expect("manifest serializes") + "\n"
    }
}

/// One zero-shot, one few-shot and the configured prediction records per
/// entry, in id order.
pub fn build_dataset(idx: &DatasetIndex, cfg: &DatasetConfig) -> Result<InstructionDataset> {
    cfg.validate()?;
    if idx.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let weights = cfg.strategy_weights.pairs();
    let mut order: Vec<&IndexEntry> = idx.entries().iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    let mut records = Vec::new();
    let mut skipped = SkipCounts::default();
    for (i, entry) in order.iter().enumerate() {
        let seed = derive_seed(cfg.seed, i as u64);
        let cond = entry_condition(entry, &cfg.condition_fields);
        let zero = match build_zero_shot(entry, &cond, cfg.format, cfg.eps) {
            Ok(r) => r,
            Err(_) => {
                skipped.serialization += 1;
                continue;
            }
        };
        records.push(zero);

        match few_shot_record(idx, entry, &cond, cfg, &weights, seed) {
            Ok(Some(r)) => records.push(r),
            Ok(None) | Err(_) => skipped.few_shot += 1,
        }

        for p in &cfg.properties {
            match build_property_prediction(entry, p.as_str(), cfg.format, cfg.eps) {
                Ok(r) => records.push(r),
                Err(Error::MissingProperty(_)) => skipped.missing_property += 1,
                Err(e) => return Err(e),
            }
        }
    }
    let manifest = DatasetManifest::count(&records, idx.len(), skipped, idx.rng_seed(), cfg.clone());
    Ok(InstructionDataset { records, manifest })
}

fn few_shot_record(
    idx: &DatasetIndex,
    entry: &IndexEntry,
    cond: &GenerationCondition,
    cfg: &DatasetConfig,
    weights: &[(Strategy, f64); 4],
    seed: u64,
) -> Result<Option<InstructionRecord>> {
    let others = idx.len() - 1;
    if others == 0 {
        return Ok(None);
    }
    let mut rng = seeded_rng(seed);
    let dist = WeightedIndex::new(weights.iter().map(|w| w.1))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut strategy = weights[dist.sample(&mut rng)].0;
    if strategy.needs_condition() && cond.is_empty() {
        strategy = Strategy::Structure;
    }
    let k = cfg.shots[rng.random_range(0..cfg.shots.len())].min(others);
    let spec = SelectionSpec { strategy, k, seed: rng.random() };
    let chosen = select(idx, &spec, Some(cond), &[entry.id.as_str()])?;
    let fields = cond.present();
    let examples = chosen
        .ids
        .iter()
        .map(|id| {
            let ex = idx.get(id).expect("selected id is indexed");
            Ok((entry_condition(ex, &fields), entry_text(ex, cfg.format, cfg.eps)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut r = build_few_shot(entry, cond, &examples, cfg.format, cfg.eps)?;
    r.strategy = Some(strategy);
    r.metadata.seed = Some(spec.seed);
    r.metadata.partial = chosen.partial;
    r.metadata.source_ids = chosen.ids;
    Ok(Some(r))
}
