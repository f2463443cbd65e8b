//! `spacegen` command line front end.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use spacegen_core::instruct::{build_dataset, DatasetConfig};
use spacegen_core::metrics::{evaluate_batch, ConstantPredictor, EvalConfig, EvalSample, LookupPredictor, PropertyPredictor, ReferenceItem};
use spacegen_core::properties::read_property_table;
use spacegen_core::rng::derive_seed;
use spacegen_core::select::{select, SelectionSpec, Strategy};
use spacegen_core::symmetry::DEFAULT_EPS;
use spacegen_core::text::cif::write_cif;
use spacegen_core::text::{parse_crystal, serialize_xyz, TEXT_EPS};
use spacegen_core::{load_space_group, CrystalFormat, GenerationCondition, PropertyName, PropertyValues};

use crate::client::{CompletionClient, HttpClient};
use crate::config::PipelineConfig;
use crate::generate::{generate_batch, read_outcomes, write_outcomes, GenerationTask};
use crate::mock::{MockClient, MockMode};
use crate::preprocess::{convert_cif, load_index, preprocess, PreprocessOptions};
use crate::PipelineError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "spacegen", version, about = "Crystal structure text pipeline for LLM generation")]
pub struct Cli {
    /// JSON configuration. `build-dataset` reads a dataset config; the other
    /// commands read a pipeline config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub format: Option<CrystalFormat>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a directory of CIF files into SGS strings and a dataset index.
    Preprocess {
        #[arg(long)]
        cif_dir: Option<PathBuf>,
        #[arg(long)]
        properties: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print one CIF file as an SGS or XYZ string.
    Tokenize {
        input: PathBuf,
        /// Space group to verify against when the file declares none.
        #[arg(long)]
        group: Option<u16>,
    },
    /// Expand an SGS (or XYZ) string into a CIF; `-` reads stdin.
    Expand {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the instruction dataset as JSON lines plus a manifest.
    BuildDataset {
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Print the example ids chosen for a condition.
    Select {
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long, default_value = "condition")]
        strategy: Strategy,
        #[arg(short, long, default_value_t = 3)]
        k: usize,
        /// Condition field as `name=value`; repeatable.
        #[arg(long = "condition", value_name = "NAME=VALUE")]
        conditions: Vec<String>,
        #[arg(long)]
        exclude: Vec<String>,
    },
    /// Sample structures from a completion endpoint or a mock.
    Generate {
        #[arg(long)]
        index: Option<PathBuf>,
        /// Property table whose rows become generation conditions.
        #[arg(long)]
        conditions: Option<PathBuf>,
        /// Condition fields to keep from each row (default: all present).
        #[arg(long, value_delimiter = ',')]
        fields: Vec<PropertyName>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        shots: Option<usize>,
        #[arg(long)]
        strategy: Option<Strategy>,
        #[arg(long)]
        max_attempts: Option<usize>,
        /// `echo`, `corrupt:<p>` or `fixture:<file>` instead of the endpoint.
        #[arg(long)]
        mock: Option<MockMode>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score generated outcomes against a reference index.
    Evaluate {
        #[arg(long)]
        outcomes: Option<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Lookup CSV `key,formation_energy,band_gap`.
        #[arg(long)]
        predictor: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        repetitions: Option<usize>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<spacegen_core::Error> for CliError {
    fn from(e: spacegen_core::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn required(v: Option<PathBuf>, flag: &str) -> Result<PathBuf, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("missing {flag} (or the matching paths entry in --config)")))
}

fn read_input(path: &Path) -> Result<String, CliError> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn parse_condition(pairs: &[String]) -> Result<GenerationCondition, CliError> {
    let mut c = PropertyValues::default();
    for pair in pairs {
        let (name, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--condition {pair:?}: expected NAME=VALUE")))?;
        let bad = || CliError::Usage(format!("--condition {pair:?}: bad value"));
        match name.trim().parse::<PropertyName>().map_err(|_| CliError::Usage(format!("--condition {pair:?}: unknown property")))? {
            PropertyName::PrettyFormula => c.pretty_formula = Some(value.trim().to_string()),
            PropertyName::SpacegroupNumber => c.spacegroup_number = Some(value.trim().parse().map_err(|_| bad())?),
            PropertyName::EAboveHull => c.e_above_hull = Some(value.trim().parse().map_err(|_| bad())?),
            PropertyName::FormationEnergy => c.formation_energy = Some(value.trim().parse().map_err(|_| bad())?),
            PropertyName::BandGap => c.band_gap = Some(value.trim().parse().map_err(|_| bad())?),
        }
    }
    Ok(c)
}

fn pipeline_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    match &cli.config {
        Some(p) => PipelineConfig::load(p).map_err(|e| CliError::Usage(e.to_string())),
        None => Ok(PipelineConfig::default()),
    }
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(CliError::Data(m)) => {
            eprintln!("error: {m}");
            EXIT_DATA
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    if cli.command_needs_pipeline_config() {
        let cfg = pipeline_config(cli)?;
        execute_pipeline(cli, &cfg)
    } else {
        execute_dataset(cli)
    }
}

impl Cli {
    fn command_needs_pipeline_config(&self) -> bool {
        !matches!(self.command, Command::BuildDataset { .. })
    }
}

fn execute_dataset(cli: &Cli) -> Result<(), CliError> {
    let Command::BuildDataset { index, out, manifest } = &cli.command else {
        unreachable!("dataset command");
    };
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Usage(format!("--config {}: {e}", p.display())))?;
            serde_json::from_str::<DatasetConfig>(&text).map_err(|e| CliError::Usage(format!("--config {}: {e}", p.display())))?
        }
        None => DatasetConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let idx = load_index(&required(index.clone(), "--index")?)?;
    let ds = build_dataset(&idx, &cfg)?;
    let mut buf = Vec::new();
    ds.write_jsonl(&mut buf)?;
    write_output(Some(out), std::str::from_utf8(&buf).expect("utf-8 json"))?;
    let manifest = manifest.clone().unwrap_or_else(|| out.with_extension("manifest.json"));
    write_output(Some(&manifest), &ds.manifest_json())?;
    log::info!("{} records written to {}", ds.records.len(), out.display());
    Ok(())
}

fn execute_pipeline(cli: &Cli, cfg: &PipelineConfig) -> Result<(), CliError> {
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let format = cli.format.or(cfg.format).unwrap_or_default();
    let workers = cli.workers.or(cfg.workers).unwrap_or(1);
    if workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let paths = &cfg.paths;
    match &cli.command {
        Command::Preprocess { cif_dir, properties, out } => {
            let mut opts = PreprocessOptions::new(
                required(cif_dir.clone().or(paths.cif_dir.clone()), "--cif-dir")?,
                required(out.clone().or(paths.out_dir.clone()), "--out")?,
            );
            opts.properties = properties.clone().or(paths.properties.clone());
            opts.workers = workers;
            opts.seed = seed;
            let r = preprocess(&opts)?;
            eprintln!(
                "{} of {} structures converted, {} recorded as P1, {} failed",
                r.manifest.converted,
                r.manifest.files,
                r.manifest.p1_fallbacks.len(),
                r.manifest.failures.len()
            );
            Ok(())
        }
        Command::Tokenize { input, group } => {
            let c = convert_cif(&read_input(input)?, *group, DEFAULT_EPS)?;
            if let Some(reason) = &c.fallback {
                log::warn!("recorded as P1: {reason}");
            }
            let text = match format {
                CrystalFormat::Sgs => c.sgs,
                CrystalFormat::Xyz => serialize_xyz(&c.crystal),
            };
            write_output(None, &(text + "\n"))
        }
        Command::Expand { input, out } => {
            let (c, g) = parse_crystal::<f64>(&read_input(input)?, format, TEXT_EPS)?;
            write_output(out.as_deref(), &write_cif(&c, g))
        }
        Command::Select { index, strategy, k, conditions, exclude } => {
            let idx = load_index(&required(index.clone().or(paths.index.clone()), "--index")?)?;
            let cond = parse_condition(conditions)?;
            let cond = (!cond.is_empty()).then_some(&cond);
            let spec = SelectionSpec { strategy: *strategy, k: *k, seed };
            let ex: Vec<&str> = exclude.iter().map(String::as_str).collect();
            let chosen = select(&idx, &spec, cond, &ex)?;
            if chosen.partial {
                eprintln!("warning: selection is partial");
            }
            write_output(None, &(chosen.ids.join("\n") + "\n"))
        }
        Command::Generate { index, conditions, fields, samples, shots, strategy, max_attempts, mock, out } => {
            let gen = &cfg.generation;
            let shots = shots.unwrap_or(gen.shots);
            let index = index.clone().or(paths.index.clone());
            let idx = match (&index, shots) {
                (Some(p), _) => Some(load_index(p)?),
                (None, 0) => None,
                (None, _) => return Err(CliError::Usage("--shots > 0 requires --index".into())),
            };
            let per = samples.unwrap_or(gen.samples_per_condition);
            if per == 0 {
                return Err(CliError::Usage("--samples must be at least 1".into()));
            }
            let rows: Vec<(String, GenerationCondition)> = match conditions.clone().or(paths.conditions.clone()) {
                Some(p) => {
                    let f = fs::File::open(&p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
                    read_property_table(f)?
                        .into_iter()
                        .map(|(id, v)| {
                            let c = if fields.is_empty() { v } else { v.restricted_to(fields) };
                            (id, c)
                        })
                        .collect()
                }
                None => vec![("unconditional".to_string(), GenerationCondition::default())],
            };
            let tasks: Vec<GenerationTask> = rows
                .into_iter()
                .enumerate()
                .map(|(i, (id, condition))| GenerationTask {
                    id,
                    condition,
                    format,
                    shots,
                    strategy: strategy.unwrap_or(gen.strategy),
                    seed: derive_seed(seed, i as u64),
                    sample_count: per,
                    max_attempts: max_attempts.unwrap_or(gen.max_attempts),
                })
                .collect();
            let client: Box<dyn CompletionClient> = match mock {
                Some(MockMode::Corrupt { p, .. }) => Box::new(MockClient::new(MockMode::Corrupt { p: *p, seed })),
                Some(m) => Box::new(MockClient::new(m.clone())),
                None => {
                    let ep = cfg
                        .endpoint
                        .as_ref()
                        .ok_or_else(|| CliError::Usage("no endpoint in --config and no --mock given".into()))?;
                    Box::new(HttpClient::new(ep).map_err(|e| CliError::Usage(e.to_string()))?)
                }
            };
            let outcomes = generate_batch(&tasks, client.as_ref(), idx.as_ref(), &cfg.sampling, workers);
            let mut buf = Vec::new();
            write_outcomes(&outcomes, &mut buf)?;
            let out = out.clone().or(paths.outcomes.clone());
            write_output(out.as_deref(), std::str::from_utf8(&buf).expect("utf-8 json"))?;
            let parsed = outcomes.iter().filter(|o| o.is_parsed()).count();
            eprintln!("{parsed} of {} samples parsed", outcomes.len());
            Ok(())
        }
        Command::Evaluate { outcomes, reference, predictor, out, csv, repetitions } => {
            let outcomes_path = required(outcomes.clone().or(paths.outcomes.clone()), "--outcomes")?;
            let outcomes = read_outcomes(&read_input(&outcomes_path)?).map_err(CliError::Data)?;
            let idx = load_index(&required(reference.clone().or(paths.index.clone()), "--reference")?)?;
            let predictor: Box<dyn PropertyPredictor> = match predictor.clone().or(paths.predictor.clone()) {
                Some(p) => {
                    let f = fs::File::open(&p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
                    Box::new(LookupPredictor::from_csv(f)?)
                }
                None => Box::new(ConstantPredictor::default()),
            };
            let samples: Vec<EvalSample> = outcomes
                .into_iter()
                .map(|o| EvalSample {
                    condition: o.condition,
                    crystal: o.crystal,
                    declared_group: o.space_group.and_then(|n| load_space_group(n).ok()),
                })
                .collect();
            let reference: Vec<ReferenceItem> = idx
                .entries()
                .iter()
                .map(|e| ReferenceItem { crystal: e.crystal.clone(), properties: e.properties.clone() })
                .collect();
            let ev = &cfg.evaluation;
            let ecfg = EvalConfig {
                repetitions: repetitions.unwrap_or(ev.repetitions),
                seed,
                eps: ev.eps,
                thresholds: ev.thresholds,
                structure_fingerprint: idx.structure_config().clone(),
                composition_fingerprint: idx.composition_config().clone(),
                ..EvalConfig::default()
            };
            let report = evaluate_batch(&samples, &reference, predictor.as_ref(), &ecfg)?;
            let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Data(e.to_string()))? + "\n";
            write_output(out.clone().or(paths.report.clone()).as_deref(), &json)?;
            if let Some(p) = csv {
                write_output(Some(p), &report.to_csv())?;
            }
            Ok(())
        }
        Command::BuildDataset { .. } => unreachable!("handled separately"),
    }
}
