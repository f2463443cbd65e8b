//! CIF corpus → verified SGS strings and a fingerprinted dataset index.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spacegen_core::fingerprint::{CompositionFingerprintConfig, StructureFingerprintConfig};
use spacegen_core::properties::read_property_table;
use spacegen_core::select::{DatasetIndex, IndexInput};
use spacegen_core::symmetry::DEFAULT_EPS;
use spacegen_core::text::cif::parse_cif;
use spacegen_core::text::serialize_sgs;
use spacegen_core::{load_space_group, Crystal, PropertyValues, SpaceGroup};

use crate::PipelineError;

/// A structure ready for the SGS corpus.
#[derive(Debug, Clone)]
pub struct Converted {
    pub crystal: Crystal,
    pub group: &'static SpaceGroup,
    pub sgs: String,
    /// Why the structure was recorded in P1 instead of its declared group.
    pub fallback: Option<String>,
}

/// Parses a CIF, verifies it against the declared group (from the file, or
/// `fallback_group` when the file declares none) and serializes it.
pub fn convert_cif(text: &str, fallback_group: Option<u16>, eps: f64) -> spacegen_core::Result<Converted> {
    let doc = parse_cif(text)?;
    let crystal: Crystal = doc.to_crystal()?;
    let declared = match (doc.declared_number, doc.declared_symbol.as_deref(), fallback_group) {
        (Some(n), _, _) => Some(load_space_group(n)),
        (None, Some(s), _) => Some(load_space_group(s)),
        (None, None, Some(n)) => Some(load_space_group(n)),
        (None, None, None) => None,
    };
    let p1 = load_space_group(1u16)?;
    let (group, fallback) = match declared {
        Some(Ok(g)) if g.verify(&crystal, eps) => (g, None),
        Some(Ok(g)) => (p1, Some(format!("not symmetric under declared group {} ({})", g.hm_symbol(), g.number()))),
        Some(Err(e)) => (p1, Some(format!("declared group unusable: {e}"))),
        None => (p1, Some("no declared group".to_string())),
    };
    let sgs = serialize_sgs(&crystal, group, eps)?;
    Ok(Converted { crystal, group, sgs, fallback })
}

#[derive(Debug, Clone)]
pub struct PreprocessOptions {
    pub cif_dir: PathBuf,
    pub properties: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub eps: f64,
    pub seed: u64,
    pub structure_fingerprint: StructureFingerprintConfig,
    pub composition_fingerprint: CompositionFingerprintConfig,
}

impl PreprocessOptions {
    pub fn new(cif_dir: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        PreprocessOptions {
            cif_dir: cif_dir.into(),
            properties: None,
            out_dir: out_dir.into(),
            workers: 1,
            eps: DEFAULT_EPS,
            seed: 0,
            structure_fingerprint: StructureFingerprintConfig::default(),
            composition_fingerprint: CompositionFingerprintConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileIssue {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessManifest {
    pub files: usize,
    pub converted: usize,
    pub failures: Vec<FileIssue>,
    pub p1_fallbacks: Vec<FileIssue>,
    pub groups: BTreeMap<u16, usize>,
    pub eps: f64,
    pub seed: u64,
}

#[derive(Debug)]
pub struct PreprocessOutput {
    pub index: DatasetIndex,
    pub manifest: PreprocessManifest,
}

fn cif_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, PipelineError> {
    let rd = fs::read_dir(dir).map_err(|e| PipelineError::Config(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in rd {
        let path = entry.map_err(|e| PipelineError::Config(e.to_string()))?.path();
        if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("cif")) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                files.push((stem.to_string(), path));
            }
        }
    }
    files.sort();
    Ok(files)
}

/// Converts in memory without touching the filesystem beyond reading.
pub fn convert_corpus(opts: &PreprocessOptions) -> Result<PreprocessOutput, PipelineError> {
    let files = cif_files(&opts.cif_dir)?;
    let props: HashMap<String, PropertyValues> = match &opts.properties {
        Some(p) => {
            let f = fs::File::open(p).map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?;
            read_property_table(f)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?
                .into_iter()
                .collect()
        }
        None => HashMap::new(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let results: Vec<(String, Result<Converted, String>)> = pool.install(|| {
        files
            .par_iter()
            .map(|(id, path)| {
                let sg = props.get(id).and_then(|p| p.spacegroup_number);
                let r = fs::read_to_string(path)
                    .map_err(|e| e.to_string())
                    .and_then(|t| convert_cif(&t, sg, opts.eps).map_err(|e| e.to_string()));
                (id.clone(), r)
            })
            .collect()
    });
    let mut failures = Vec::new();
    let mut fallbacks = Vec::new();
    let mut groups = BTreeMap::new();
    let mut inputs = Vec::new();
    for (id, r) in results {
        match r {
            Ok(c) => {
                if let Some(reason) = c.fallback {
                    log::warn!("{id}: recorded as P1: {reason}");
                    fallbacks.push(FileIssue { id: id.clone(), reason });
                }
                *groups.entry(c.group.number()).or_insert(0) += 1;
                inputs.push(IndexInput {
                    properties: props.get(&id).cloned().unwrap_or_default(),
                    id,
                    crystal: c.crystal,
                    space_group: c.group.number(),
                });
            }
            Err(reason) => {
                log::warn!("{id}: skipped: {reason}");
                failures.push(FileIssue { id, reason });
            }
        }
    }
    let manifest = PreprocessManifest {
        files: files.len(),
        converted: inputs.len(),
        failures,
        p1_fallbacks: fallbacks,
        groups,
        eps: opts.eps,
        seed: opts.seed,
    };
    let index = DatasetIndex::build(
        inputs,
        opts.structure_fingerprint.clone(),
        opts.composition_fingerprint.clone(),
        false,
        opts.seed,
    )?;
    Ok(PreprocessOutput { index, manifest })
}

/// Writes `sgs/<id>.sgs`, `index.json` and `manifest.json` under the output
/// directory.
pub fn preprocess(opts: &PreprocessOptions) -> Result<PreprocessOutput, PipelineError> {
    let out = convert_corpus(opts)?;
    let sgs_dir = opts.out_dir.join("sgs");
    fs::create_dir_all(&sgs_dir)?;
    for e in out.index.entries() {
        let g = load_space_group(e.space_group)?;
        let text = serialize_sgs(&e.crystal, g, opts.eps)?;
        fs::write(sgs_dir.join(format!("{}.sgs", e.id)), text + "\n")?;
    }
    fs::write(opts.out_dir.join("index.json"), serde_json::to_string(&out.index)? + "\n")?;
    fs::write(opts.out_dir.join("manifest.json"), serde_json::to_string_pretty(&out.manifest)? + "\n")?;
    Ok(out)
}

pub fn load_index(path: &Path) -> Result<DatasetIndex, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROCKSALT: &str = "data_NaCl\n_cell_length_a 5.64\n_cell_length_b 5.64\n_cell_length_c 5.64\n_cell_angle_alpha 90\n_cell_angle_beta 90\n_cell_angle_gamma 90\n_symmetry_Int_Tables_number 221\nloop_\n_atom_site_type_symbol\n_atom_site_fract_x\n_atom_site_fract_y\n_atom_site_fract_z\nCs 0 0 0\nCl 0.5 0.5 0.5\n";

    #[test]
    fn declared_group_verified() {
        let c = convert_cif(ROCKSALT, None, DEFAULT_EPS).unwrap();
        assert_eq!(c.group.number(), 221);
        assert!(c.fallback.is_none());
        assert!(c.sgs.starts_with("Pm-3m\n5.6 5.6 5.6\n90 90 90\nCs\n"));
    }

    #[test]
    fn broken_symmetry_falls_back_to_p1() {
        let text = ROCKSALT.replace("Cl 0.5 0.5 0.5", "Cl 0.5 0.5 0.45");
        let c = convert_cif(&text, None, DEFAULT_EPS).unwrap();
        assert_eq!(c.group.number(), 1);
        assert!(c.fallback.unwrap().contains("Pm-3m"));
    }

    #[test]
    fn csv_group_used_when_file_is_silent() {
        let text = ROCKSALT.replace("_symmetry_Int_Tables_number 221\n", "");
        assert_eq!(convert_cif(&text, Some(221), DEFAULT_EPS).unwrap().group.number(), 221);
        assert!(convert_cif(&text, None, DEFAULT_EPS).unwrap().fallback.is_some());
    }
}
