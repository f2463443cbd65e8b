//! Sampling loop: prompt construction, completion, parse and re-sample.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spacegen_core::instruct::{entry_condition, entry_text, few_shot_prompt, zero_shot_prompt};
use spacegen_core::rng::derive_seed;
use spacegen_core::select::{select, DatasetIndex, SelectionSpec, Strategy};
use spacegen_core::text::{parse_crystal, TEXT_EPS};
use spacegen_core::{Crystal, CrystalFormat, GenerationCondition};

use crate::client::{CompletionClient, CompletionRequest};

pub const DEFAULT_MAX_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams { temperature: 0.9, top_p: 0.9, max_tokens: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationTask {
    pub id: String,
    pub condition: GenerationCondition,
    pub format: CrystalFormat,
    pub shots: usize,
    pub strategy: Strategy,
    pub seed: u64,
    pub sample_count: usize,
    pub max_attempts: usize,
}

impl GenerationTask {
    pub fn new(id: impl Into<String>, condition: GenerationCondition) -> Self {
        GenerationTask {
            id: id.into(),
            condition,
            format: CrystalFormat::Sgs,
            shots: 0,
            strategy: Strategy::Condition,
            seed: 0,
            sample_count: 1,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedAttempt {
    pub raw: Option<String>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub task_id: String,
    pub sample: usize,
    pub format: CrystalFormat,
    pub condition: GenerationCondition,
    pub shots: usize,
    pub strategy: Option<Strategy>,
    #[serde(default)]
    pub source_ids: Vec<String>,
    #[serde(default)]
    pub partial_selection: bool,
    pub seed: u64,
    pub prompt: String,
    pub attempts: usize,
    /// Text of the last completion received, verbatim.
    pub raw: Option<String>,
    #[serde(default)]
    pub rejected: Vec<FailedAttempt>,
    pub crystal: Option<Crystal>,
    pub space_group: Option<u16>,
    pub failure: Option<String>,
}

impl SampleOutcome {
    pub fn is_parsed(&self) -> bool {
        self.crystal.is_some()
    }
}

struct Prompt {
    text: String,
    strategy: Option<Strategy>,
    source_ids: Vec<String>,
    partial: bool,
}

fn build_prompt(task: &GenerationTask, idx: Option<&DatasetIndex>, seed: u64) -> Result<Prompt, String> {
    if task.shots == 0 {
        return Ok(Prompt {
            text: zero_shot_prompt(&task.condition, task.format),
            strategy: None,
            source_ids: Vec::new(),
            partial: false,
        });
    }
    let idx = idx.ok_or("few-shot generation needs a dataset index")?;
    let cond = (!task.condition.is_empty()).then_some(&task.condition);
    let spec = SelectionSpec { strategy: task.strategy, k: task.shots, seed };
    let chosen = select(idx, &spec, cond, &[]).map_err(|e| e.to_string())?;
    let fields = task.condition.present();
    let examples = chosen
        .ids
        .iter()
        .map(|id| {
            let e = idx.get(id).expect("selected id is indexed");
            Ok((entry_condition(e, &fields), entry_text(e, task.format, spacegen_core::symmetry::DEFAULT_EPS)?))
        })
        .collect::<spacegen_core::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let text = few_shot_prompt(&examples, &task.condition, task.format).map_err(|e| e.to_string())?;
    Ok(Prompt {
        text,
        strategy: Some(task.strategy),
        source_ids: chosen.ids,
        partial: chosen.partial,
    })
}

fn run_sample(
    task: &GenerationTask,
    sample: usize,
    client: &dyn CompletionClient,
    idx: Option<&DatasetIndex>,
    params: &SamplingParams,
) -> SampleOutcome {
    let seed = derive_seed(task.seed, sample as u64);
    let mut out = SampleOutcome {
        task_id: task.id.clone(),
        sample,
        format: task.format,
        condition: task.condition.clone(),
        shots: task.shots,
        strategy: None,
        source_ids: Vec::new(),
        partial_selection: false,
        seed,
        prompt: String::new(),
        attempts: 0,
        raw: None,
        rejected: Vec::new(),
        crystal: None,
        space_group: None,
        failure: None,
    };
    let prompt = match build_prompt(task, idx, derive_seed(seed, 0)) {
        Ok(p) => p,
        Err(e) => {
            out.failure = Some(format!("prompt: {e}"));
            return out;
        }
    };
    out.prompt = prompt.text;
    out.strategy = prompt.strategy;
    out.source_ids = prompt.source_ids;
    out.partial_selection = prompt.partial;
    for attempt in 0..task.max_attempts.max(1) {
        out.attempts = attempt + 1;
        let req = CompletionRequest {
            prompt: out.prompt.clone(),
            temperature: params.temperature,
            top_p: params.top_p,
            max_tokens: params.max_tokens,
            stop: Vec::new(),
            seed: Some(derive_seed(seed, 1 + attempt as u64)),
        };
        let raw = match client.complete(&req) {
            Ok(r) => r,
            Err(e) => {
                out.rejected.push(FailedAttempt { raw: None, error: e.to_string() });
                continue;
            }
        };
        match parse_crystal::<f64>(&raw, task.format, TEXT_EPS) {
            Ok((c, g)) => {
                out.raw = Some(raw);
                out.crystal = Some(c);
                out.space_group = g.map(|g| g.number());
                return out;
            }
            Err(e) => out.rejected.push(FailedAttempt { raw: Some(raw), error: e.to_string() }),
        }
    }
    out.raw = out.rejected.last().and_then(|a| a.raw.clone());
    out.failure = Some(format!("no parseable response after {} attempts", out.attempts));
    out
}

fn pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool")
}

/// All samples of all tasks, ordered by (task, sample) regardless of
/// completion order.
pub fn generate_batch(
    tasks: &[GenerationTask],
    client: &dyn CompletionClient,
    idx: Option<&DatasetIndex>,
    params: &SamplingParams,
    workers: usize,
) -> Vec<SampleOutcome> {
    let jobs: Vec<(usize, usize)> = tasks
        .iter()
        .enumerate()
        .flat_map(|(t, task)| (0..task.sample_count).map(move |s| (t, s)))
        .collect();
    pool(workers).install(|| {
        jobs.par_iter()
            .map(|&(t, s)| run_sample(&tasks[t], s, client, idx, params))
            .collect()
    })
}

pub fn generate_structures(
    task: &GenerationTask,
    client: &dyn CompletionClient,
    idx: Option<&DatasetIndex>,
    params: &SamplingParams,
    workers: usize,
) -> Vec<SampleOutcome> {
    generate_batch(std::slice::from_ref(task), client, idx, params, workers)
}

pub fn write_outcomes<W: std::io::Write>(outcomes: &[SampleOutcome], mut w: W) -> std::io::Result<()> {
    for o in outcomes {
        serde_json::to_writer(&mut w, o)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_outcomes(text: &str) -> Result<Vec<SampleOutcome>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}
