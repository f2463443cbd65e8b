//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spacegen::client::CompletionClient;
use spacegen::generate::{generate_batch, GenerationTask, SamplingParams};
use spacegen::mock::{MockClient, MockMode};
use spacegen::preprocess::{convert_cif, convert_corpus, PreprocessOptions};
use spacegen_core::fingerprint::{CompositionFingerprintConfig, StructureFingerprintConfig};
use spacegen_core::instruct::{build_few_shot, build_zero_shot, entry_condition, entry_text};
use spacegen_core::metrics::{
    charge_neutrality, default_rules, evaluate_batch, numeric_property_success, structural_validity,
    wasserstein1, ConstantPredictor, EvalConfig, EvalSample, ReferenceItem, SuccessRule,
};
use spacegen_core::properties::read_property_table;
use spacegen_core::select::{DatasetIndex, IndexInput, Strategy};
use spacegen_core::symmetry::{space_group_table, DEFAULT_EPS};
use spacegen_core::text::cif::{parse_cif, write_cif};
use spacegen_core::text::{parse_crystal, serialize_crystal, TEXT_EPS};
use spacegen_core::{
    load_space_group, Composition, Crystal, CrystalFormat, Element, GenerationCondition, LatticeMatrix,
    LatticeParameters, PropertyName, Site,
};

const BUDGET_PAYLOADS: Duration = Duration::from_secs(1);
const BUDGET_TABLE: Duration = Duration::from_secs(30);
const BUDGET_ORBITS: Duration = Duration::from_secs(60);
const BUDGET_PREPROCESS: Duration = Duration::from_secs(10);
const ORBIT_TOL: f64 = 1e-9;
const COORD_TOL: f64 = 0.011;
const LENGTH_TOL: f64 = 0.051;
const W1_TOL: f64 = 1e-12;
const ATTEMPTS_TARGET: f64 = 2.0;
const ATTEMPTS_TOL: f64 = 0.5;
const MIN_SPEEDUP: f64 = 3.0;
const SCALING_WORKERS: usize = 8;

enum Verdict {
    Pass(String),
    Fail(String),
    /// Cannot be evaluated on this machine; reported as FAIL without failing the run.
    Unmet(String),
}

type Criterion = fn() -> Verdict;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn timed(budget: Duration, f: impl FnOnce() -> Result<String, String>) -> Verdict {
    let t = Instant::now();
    let r = f();
    let dt = t.elapsed();
    match r {
        Err(e) => Verdict::Fail(e),
        Ok(_) if dt > budget => Verdict::Fail(format!("took {dt:.2?}, budget {budget:?}")),
        Ok(s) => Verdict::Pass(format!("{s} in {dt:.2?}")),
    }
}

struct Fixture {
    id: String,
    crystal: Crystal,
    group: &'static spacegen_core::SpaceGroup,
    properties: spacegen_core::PropertyValues,
}

fn fixtures() -> Vec<Fixture> {
    let props: std::collections::HashMap<_, _> =
        read_property_table(fs::File::open(common::properties()).unwrap()).unwrap().into_iter().collect();
    let mut paths: Vec<_> = fs::read_dir(common::cif_dir()).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let id = p.file_stem().unwrap().to_str().unwrap().to_string();
            let c = convert_cif(&fs::read_to_string(p).unwrap(), None, DEFAULT_EPS).unwrap();
            assert!(c.fallback.is_none(), "{id}");
            Fixture { properties: props[&id].clone(), id, crystal: c.crystal, group: c.group }
        })
        .collect()
}

fn fixture_index() -> DatasetIndex {
    let inputs = fixtures()
        .into_iter()
        .map(|f| IndexInput { id: f.id, crystal: f.crystal, space_group: f.group.number(), properties: f.properties })
        .collect();
    DatasetIndex::build(inputs, StructureFingerprintConfig::default(), CompositionFingerprintConfig::default(), false, 0)
        .unwrap()
}

const LICUCO3_PROMPT: &str = "Below is a description of a bulk material. The chemical formula is LiCuCO3. The energy above the convex hull is 0.0469. The spacegroup number is 67. The formation energy per atom is -1.681. The band gap is 1.7254. Generate the space group symbol, a description of the lengths and angles of the lattice vectors and then the element type and coordinates for each atom within the lattice:";
const LICUCO3_SGS: &str = "Cmme\n5.3 6.3 8.8\n90 90 90\nLi\n0.00 0.25 0.64\nCu\n0.25 0.25 0.00\nC\n0.00 0.25 0.28\nO\n0.22 0.25 0.21\nO\n0.00 0.25 0.43";
const MGAGO2F_SGS: &str = "P4/mmm\n4.2 4.2 4.2\n90 90 90\nMg\n0.00 0.00 0.00\nAg\n0.50 0.50 0.50\nO\n0.00 0.50 0.50\nF\n0.50 0.50 0.00";
const THREE_SHOT_PROMPT: &str = "Below is three description of bulk materials.\nFirst Example:\nThe chemical formula is BeBaO2F. The spacegroup number is 123.\nP4/mmm\n4.9 4.9 4.9\n90 90 90\nBa\n0.50 0.50 0.50\nBe\n0.00 0.00 0.00\nO\n0.00 0.50 0.50\nF\n0.50 0.50 0.00\nSecond Example:\nThe chemical formula is ZrMoO2N. The spacegroup number is 123.\nP4/mmm\n4.0 4.0 4.0\n90 90 90\nZr\n0.00 0.00 0.00\nMo\n0.50 0.50 0.50\nN\n0.50 0.50 0.00\nO\n0.00 0.50 0.50\nThird Example:\nThe chemical formula is NiNaO2F. The spacegroup number is 123.\nP4/mmm\n4.2 4.2 4.2\n90 90 90\nNa\n0.50 0.50 0.50\nNi\n0.00 0.00 0.00\nO\n0.00 0.50 0.50\nF\n0.50 0.50 0.00\nThe chemical formula is MgAgO2F. The spacegroup number is 123. Based on the three examples provided, generate the space group symbol, a description of the lengths and angles of the lattice vectors, along with the element type and coordinates for each atom within the lattice:";

fn payloads() -> Verdict {
    timed(BUDGET_PAYLOADS, || {
        let dir = common::cif_dir();
        let convert = |id: &str| {
            let c = convert_cif(&fs::read_to_string(dir.join(format!("{id}.cif"))).unwrap(), None, DEFAULT_EPS).unwrap();
            let props = read_property_table(fs::File::open(common::properties()).unwrap())
                .unwrap()
                .into_iter()
                .find(|(k, _)| k == id)
                .unwrap()
                .1;
            IndexInput { id: id.into(), crystal: c.crystal, space_group: c.group.number(), properties: props }
        };
        let ids = ["licuco3-67", "mgago2f-123", "bebao2f-123", "zrmoo2n-123", "ninao2f-123"];
        let idx = DatasetIndex::build(
            ids.iter().map(|id| convert(id)).collect(),
            StructureFingerprintConfig::default(),
            CompositionFingerprintConfig::default(),
            false,
            0,
        )
        .map_err(|e| e.to_string())?;
        let li = idx.get("licuco3-67").unwrap();
        let zero = build_zero_shot(li, &entry_condition(li, &PropertyName::ALL), CrystalFormat::Sgs, DEFAULT_EPS)
            .map_err(|e| e.to_string())?;
        check(zero.prompt == LICUCO3_PROMPT, format!("zero-shot prompt differs:\n{}", zero.prompt))?;
        check(zero.response == LICUCO3_SGS, format!("LiCuCO3 SGS differs:\n{}", zero.response))?;
        let fields = [PropertyName::PrettyFormula, PropertyName::SpacegroupNumber];
        let examples: Vec<_> = ids[2..]
            .iter()
            .map(|id| {
                let e = idx.get(id).unwrap();
                (entry_condition(e, &fields), entry_text(e, CrystalFormat::Sgs, DEFAULT_EPS).unwrap())
            })
            .collect();
        let mg = idx.get("mgago2f-123").unwrap();
        let few = build_few_shot(mg, &entry_condition(mg, &fields), &examples, CrystalFormat::Sgs, DEFAULT_EPS)
            .map_err(|e| e.to_string())?;
        check(few.prompt == THREE_SHOT_PROMPT, format!("3-shot prompt differs:\n{}", few.prompt))?;
        check(few.response == MGAGO2F_SGS, format!("MgAgO2F SGS differs:\n{}", few.response))?;
        Ok("4 payloads match character for character".into())
    })
}

fn centering(symbol: &str) -> usize {
    match &symbol[..1] {
        "P" => 1,
        "A" | "B" | "C" | "I" => 2,
        "R" => 3,
        "F" => 4,
        _ => 0,
    }
}

fn symmetry_table() -> Verdict {
    timed(BUDGET_TABLE, || {
        let groups = space_group_table().groups();
        check(groups.len() == 230, format!("{} groups", groups.len()))?;
        for g in groups {
            g.check_axioms().map_err(|e| format!("{g}: {e}"))?;
            let pg = g.point_group_order();
            check(48 % pg == 0 || 24 % pg == 0 || pg == 3, format!("{g}: point group order {pg}"))?;
            check(g.order() == pg * centering(g.hm_symbol()), format!("{g}: order {}", g.order()))?;
        }
        for (key, n) in [("P1", 1), ("Pm-3m", 48), ("P4/mmm", 16)] {
            let g = load_space_group(key).map_err(|e| e.to_string())?;
            check(g.order() == n, format!("{key} has {} ops", g.order()))?;
        }
        Ok("230 groups closed, orders consistent".into())
    })
}

fn same_point(a: [f64; 3], b: [f64; 3]) -> bool {
    (-2..=2).any(|i| {
        (-2..=2).any(|j| {
            (-2..=2).any(|k| {
                let n = [i, j, k].map(f64::from);
                (0..3).all(|d| (a[d] - b[d] - n[d]).abs() < ORBIT_TOL)
            })
        })
    })
}

fn orbit_oracle() -> Verdict {
    timed(BUDGET_ORBITS, || {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let groups = space_group_table().groups();
        let el = Element::from_symbol("O").unwrap();
        for _ in 0..200 {
            let g = &groups[rng.random_range(0..groups.len())];
            let mut p = [0.0; 3];
            for x in &mut p {
                *x = if rng.random_bool(0.5) { f64::from(rng.random_range(0..12)) / 12.0 } else { rng.random() };
            }
            if rng.random_bool(0.3) {
                p[1] = p[0];
            }
            let mut oracle: Vec<[f64; 3]> = Vec::new();
            for op in g.ops() {
                let img = op.apply_unwrapped(p);
                if !oracle.iter().any(|q| same_point(*q, img)) {
                    oracle.push(img);
                }
            }
            let orbit = g.orbit(&Site::new(el, p), 1e-6);
            check(orbit.multiplicity() == oracle.len(), format!("{g} {p:?}: {} vs {}", orbit.multiplicity(), oracle.len()))?;
            for m in &orbit.members {
                check(oracle.iter().any(|q| same_point(*m, *q)), format!("{g}: stray member {m:?}"))?;
            }
        }
        Ok("200 orbits match".into())
    })
}

fn frac_delta(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3)
        .map(|d| {
            let x = (a[d] - b[d]).rem_euclid(1.0);
            x.min(1.0 - x)
        })
        .fold(0.0, f64::max)
}

fn sgs_round_trip() -> Verdict {
    let run = || -> Result<String, String> {
        let fx = fixtures();
        let groups: BTreeSet<u16> = fx.iter().map(|f| f.group.number()).collect();
        check(fx.len() == 20 && groups.len() >= 8, "fixture set too small")?;
        let mut worst = (0.0f64, 0.0f64);
        for f in &fx {
            let text = serialize_crystal(&f.crystal, f.group, CrystalFormat::Sgs, DEFAULT_EPS).map_err(|e| e.to_string())?;
            let (back, _) = parse_crystal::<f64>(&text, CrystalFormat::Sgs, TEXT_EPS).map_err(|e| format!("{}: {e}", f.id))?;
            check(back.composition() == f.crystal.composition(), format!("{}: composition", f.id))?;
            for (x, y) in f.crystal.parameters().lengths().iter().zip(back.parameters().lengths()) {
                worst.1 = worst.1.max((x - y).abs());
            }
            let mut used = vec![false; back.len()];
            for s in f.crystal.sites() {
                let (j, d) = back
                    .sites()
                    .iter()
                    .enumerate()
                    .filter(|(j, t)| !used[*j] && t.element == s.element)
                    .map(|(j, t)| (j, frac_delta(s.frac, t.frac)))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .ok_or(format!("{}: unmatched site", f.id))?;
                used[j] = true;
                worst.0 = worst.0.max(d);
            }
        }
        check(worst.0 <= COORD_TOL, format!("coordinate error {}", worst.0))?;
        check(worst.1 <= LENGTH_TOL, format!("length error {}", worst.1))?;
        let mg = fx.iter().find(|f| f.id == "mgago2f-123").unwrap();
        let mut m = mg.group.decompose(&mg.crystal, DEFAULT_EPS).map_err(|e| e.to_string())?.multiplicities();
        m.sort_unstable();
        check(m == [1, 1, 1, 2], format!("perovskite multiplicities {m:?}"))?;
        Ok(format!(
            "20 fixtures over {} groups, max coord err {:.4}, max length err {:.3}, perovskite {{1,1,2,1}}",
            groups.len(),
            worst.0,
            worst.1
        ))
    };
    match run() {
        Ok(s) => Verdict::Pass(s),
        Err(e) => Verdict::Fail(e),
    }
}

fn w1_oracle(xs: &[f64], ys: &[f64]) -> f64 {
    let cdf = |s: &[f64], t: f64| s.iter().filter(|&&v| v <= t).count() as f64 / s.len() as f64;
    let mut knots: Vec<f64> = xs.iter().chain(ys).copied().collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    knots.windows(2).map(|w| (cdf(xs, w[0]) - cdf(ys, w[0])).abs() * (w[1] - w[0])).sum()
}

fn validity_oracle(c: &Crystal) -> bool {
    let m = c.lattice();
    let n = m.plane_spacings().map(|d| (6.0 / d).ceil() as i32 + 1);
    let s = c.sites();
    for i in 0..s.len() {
        for j in i..s.len() {
            let (ri, rj) = (s[i].element.data().covalent_radius, s[j].element.data().covalent_radius);
            let limit = if i == j { ri } else { 0.5 * (ri + rj) };
            for x in -n[0]..=n[0] {
                for y in -n[1]..=n[1] {
                    for z in -n[2]..=n[2] {
                        if i == j && (x, y, z) == (0, 0, 0) {
                            continue;
                        }
                        let f = [0, 1, 2].map(|d| s[j].frac[d] - s[i].frac[d] + f64::from([x, y, z][d]));
                        let v = m.frac_to_cart(f);
                        if (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() < limit {
                            return false;
                        }
                    }
                }
            }
        }
    }
    true
}

fn metric_oracles() -> Verdict {
    let run = || -> Result<String, String> {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let mut draw = || -> Vec<f64> { (0..rng.random_range(1..50)).map(|_| rng.random_range(-4.0..4.0)).collect() };
            let (a, b) = (draw(), draw());
            worst = worst.max((wasserstein1(&a, &b).map_err(|e| e.to_string())? - w1_oracle(&a, &b)).abs());
        }
        check(worst <= W1_TOL, format!("W1 deviation {worst:e}"))?;
        let pool = ["H", "O", "Na", "Cl", "Fe", "Ba", "Si"].map(|s| Element::from_symbol(s).unwrap());
        let mut cells = 0;
        let mut valid = 0;
        while cells < 100 {
            let p = LatticeParameters::new(
                rng.random_range(2.5..9.0),
                rng.random_range(2.5..9.0),
                rng.random_range(2.5..9.0),
                rng.random_range(70.0..110.0),
                rng.random_range(70.0..110.0),
                rng.random_range(70.0..110.0),
            );
            let Some(m) = p.ok().and_then(|p| LatticeMatrix::from_parameters(&p).ok()) else { continue };
            let sites = (0..5).map(|_| Site::new(pool[rng.random_range(0..pool.len())], rng.random())).collect();
            let c = Crystal::new(m, sites).map_err(|e| e.to_string())?;
            let want = validity_oracle(&c);
            check(structural_validity(&c) == want, format!("structural validity disagrees on {c:?}"))?;
            valid += usize::from(want);
            cells += 1;
        }
        for f in ["NaCl", "TiO2", "CaTiO3"] {
            check(charge_neutrality(&Composition::parse_formula(f).unwrap()).neutral, format!("{f} not neutral"))?;
        }
        let nacl2 = Composition::from_counts([
            (Element::from_symbol("Na").unwrap(), 1),
            (Element::from_symbol("Cl").unwrap(), 2),
        ]);
        check(!charge_neutrality(&nacl2).neutral, "NaCl2 reported neutral")?;
        Ok(format!("W1 max dev {worst:.1e}, 100 cells ({valid} valid), charge cases ok"))
    };
    match run() {
        Ok(s) => Verdict::Pass(s),
        Err(e) => Verdict::Fail(e),
    }
}

fn success_rules() -> Verdict {
    let run = || -> Result<String, String> {
        let rules = default_rules();
        let gap = rules[&PropertyName::BandGap];
        let form = rules[&PropertyName::FormationEnergy];
        check(form == SuccessRule::SignMatch, "formation rule is not sign agreement")?;
        for t in [0.0, 0.25, 1.7254, 3.0, 8.0] {
            for d in [0.3, -0.3] {
                check(numeric_property_success(t + d, t, gap), format!("gap {t}: |d|=0.3 rejected"))?;
            }
            for d in [0.6, -0.6] {
                check(!numeric_property_success(t + d, t, gap), format!("gap {t}: |d|=0.6 accepted"))?;
            }
        }
        let vals = [-2.0, -0.01, 0.0, 0.01, 2.0];
        for &p in &vals {
            for &t in &vals {
                let same = p.partial_cmp(&0.0) == t.partial_cmp(&0.0);
                check(numeric_property_success(p, t, form) == same, format!("formation {p} vs {t}"))?;
            }
        }
        Ok("band gap |d|<0.5, formation energy sign".into())
    };
    match run() {
        Ok(s) => Verdict::Pass(s),
        Err(e) => Verdict::Fail(e),
    }
}

fn echo_pipeline() -> Verdict {
    let run = || -> Result<String, String> {
        let idx = fixture_index();
        let conditions: Vec<(String, GenerationCondition)> =
            read_property_table(fs::File::open(common::properties()).unwrap()).map_err(|e| e.to_string())?;
        let tasks: Vec<GenerationTask> = (0..50)
            .map(|i| {
                let (id, cond) = &conditions[i % conditions.len()];
                GenerationTask {
                    shots: 3,
                    strategy: Strategy::Condition,
                    seed: i as u64,
                    ..GenerationTask::new(format!("{id}#{i}"), cond.clone())
                }
            })
            .collect();
        let params = SamplingParams::default();
        let echo = MockClient::new(MockMode::EchoFirstExample);
        let outcomes = generate_batch(&tasks, &echo, Some(&idx), &params, 1);
        let samples: Vec<EvalSample> = outcomes
            .iter()
            .map(|o| EvalSample {
                condition: o.condition.clone(),
                crystal: o.crystal.clone(),
                declared_group: o.space_group.and_then(|n| load_space_group(n).ok()),
            })
            .collect();
        let reference: Vec<ReferenceItem> = idx
            .entries()
            .iter()
            .map(|e| ReferenceItem { crystal: e.crystal.clone(), properties: e.properties.clone() })
            .collect();
        let report = evaluate_batch(&samples, &reference, &ConstantPredictor::default(), &EvalConfig::default())
            .map_err(|e| e.to_string())?;
        let parse = report.counts.parsed as f64 / report.counts.total as f64;
        let formula = report.success[&PropertyName::PrettyFormula].mean;
        let sg = report.success[&PropertyName::SpacegroupNumber].mean;
        check(report.counts.total == 50, "expected 50 samples")?;
        check(parse == 1.0 && formula == 1.0 && sg == 1.0, format!("parse {parse}, formula {formula}, spacegroup {sg}"))?;

        let corrupt = MockClient::new(MockMode::Corrupt { p: 0.5, seed: 2024 });
        let tasks: Vec<GenerationTask> = (0..10)
            .map(|i| {
                let (id, cond) = &conditions[i];
                GenerationTask {
                    shots: 3,
                    strategy: Strategy::Condition,
                    seed: 1000 + i as u64,
                    sample_count: 50,
                    max_attempts: 64,
                    ..GenerationTask::new(id.clone(), cond.clone())
                }
            })
            .collect();
        let outcomes = generate_batch(&tasks, &corrupt as &dyn CompletionClient, Some(&idx), &params, 1);
        check(outcomes.len() == 500, "expected 500 samples")?;
        check(outcomes.iter().all(|o| o.is_parsed()), "a corrupt-mode sample never parsed")?;
        let mean = outcomes.iter().map(|o| o.attempts as f64).sum::<f64>() / 500.0;
        check((mean - ATTEMPTS_TARGET).abs() <= ATTEMPTS_TOL, format!("mean attempts {mean}"))?;
        Ok(format!("echo: parse/formula/spacegroup = {parse}/{formula}/{sg}; corrupt(0.5): mean attempts {mean:.3}"))
    };
    match run() {
        Ok(s) => Verdict::Pass(s),
        Err(e) => Verdict::Fail(e),
    }
}

fn cli_outputs(dir: &Path, index: &Path, tag: &str, workers: &str) -> Result<Vec<Vec<u8>>, String> {
    let cfg = dir.join("dataset.json");
    fs::write(&cfg, r#"{"shots": [1, 2, 3, 4, 5], "properties": ["band_gap", "formation_energy"], "seed": 99}"#)
        .map_err(|e| e.to_string())?;
    let ds = dir.join(format!("ds-{tag}.jsonl"));
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let run = |args: Vec<String>| -> Result<(), String> {
        let out = common::spacegen(&args);
        check(out.status.success(), format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    };
    run(vec!["--config".into(), s(&cfg), "build-dataset".into(), "--index".into(), s(index), "--out".into(), s(&ds)])?;
    let mut files = vec![ds.clone(), ds.with_extension("manifest.json")];
    for mock in ["echo", "corrupt:0.4"] {
        let out = dir.join(format!("gen-{tag}-{}.jsonl", mock.replace(':', "_")));
        run(
            [
                "--seed", "31", "--workers", workers, "generate", "--index", &s(index), "--conditions",
                &s(&common::properties()), "--shots", "3", "--strategy", "condition-structure", "--samples", "3",
                "--mock", mock, "--out", &s(&out),
            ]
            .map(String::from)
            .to_vec(),
        )?;
        files.push(out);
    }
    files.iter().map(|f| fs::read(f).map_err(|e| e.to_string())).collect()
}

fn determinism() -> Verdict {
    let run = || -> Result<String, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let index = common::preprocess_fixtures(dir.path());
        let a = cli_outputs(dir.path(), &index, "a", "1")?;
        let b = cli_outputs(dir.path(), &index, "b", "1")?;
        let c = cli_outputs(dir.path(), &index, "c", "4")?;
        check(a == b, "repeated runs differ")?;
        check(a == c, "runs with 1 and 4 workers differ")?;
        let bytes: usize = a.iter().map(Vec::len).sum();
        Ok(format!("build-dataset + 2 generate runs byte-identical ({bytes} bytes, 1 and 4 workers)"))
    };
    match run() {
        Ok(s) => Verdict::Pass(s),
        Err(e) => Verdict::Fail(e),
    }
}

fn write_corpus(dir: &Path, n: usize) {
    let fx = fixtures();
    for i in 0..n {
        let f = &fx[i % fx.len()];
        let scaled = f.crystal.scaled(1.0 + 0.0005 * (i / fx.len()) as f64).unwrap();
        fs::write(dir.join(format!("{:04}-{}.cif", i, f.id)), write_cif(&scaled, Some(f.group))).unwrap();
    }
}

fn convert_all(dir: &Path, workers: usize) -> Result<(Duration, usize), String> {
    let mut opts = PreprocessOptions::new(dir, dir.join("unused"));
    opts.workers = workers;
    let t = Instant::now();
    let out = convert_corpus(&opts).map_err(|e| e.to_string())?;
    let dt = t.elapsed();
    check(out.manifest.failures.is_empty() && out.manifest.p1_fallbacks.is_empty(), "conversion lost symmetry")?;
    Ok((dt, out.manifest.converted))
}

fn throughput() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 1000);
    if let Some(d) = fs::read_dir(dir.path()).unwrap().next() {
        let p = d.unwrap().path();
        if parse_cif(&fs::read_to_string(&p).unwrap()).is_err() {
            return Verdict::Fail(format!("{} unreadable", p.display()));
        }
    }
    let (single, n) = match convert_all(dir.path(), 1) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(e),
    };
    if n != 1000 {
        return Verdict::Fail(format!("{n} of 1000 converted"));
    }
    if single > BUDGET_PREPROCESS {
        return Verdict::Fail(format!("single worker took {single:.2?}, budget {BUDGET_PREPROCESS:?}"));
    }
    let cpus = std::thread::available_parallelism().map_or(1, usize::from);
    if cpus < SCALING_WORKERS {
        return Verdict::Unmet(format!(
            "1000 structures in {single:.2?} single-worker; scaling check needs {SCALING_WORKERS} CPUs, found {cpus}"
        ));
    }
    match convert_all(dir.path(), SCALING_WORKERS) {
        Ok((multi, _)) => {
            let speedup = single.as_secs_f64() / multi.as_secs_f64();
            if speedup >= MIN_SPEEDUP {
                Verdict::Pass(format!("1000 structures in {single:.2?}, {speedup:.1}x with {SCALING_WORKERS} workers"))
            } else {
                Verdict::Fail(format!("speedup {speedup:.2}x below {MIN_SPEEDUP}x"))
            }
        }
        Err(e) => Verdict::Fail(e),
    }
}

fn report_structure() -> Verdict {
    let run = || -> Result<String, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let index = common::preprocess_fixtures(dir.path());
        let s = |p: &Path| p.to_str().unwrap().to_string();
        let outcomes = dir.path().join("o.jsonl");
        let out = common::spacegen([
            "generate".into(), "--index".into(), s(&index), "--conditions".into(), s(&common::properties()),
            "--shots".into(), "3".into(), "--mock".into(), "echo".into(), "--out".into(), s(&outcomes),
        ]);
        check(out.status.success(), String::from_utf8_lossy(&out.stderr).to_string())?;
        let csv = dir.path().join("report.csv");
        let out = common::spacegen([
            "evaluate".into(), "--outcomes".into(), s(&outcomes), "--reference".into(), s(&index),
            "--repetitions".into(), "3".into(), "--csv".into(), s(&csv),
        ]);
        check(out.status.success(), String::from_utf8_lossy(&out.stderr).to_string())?;
        let r: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
        for path in [
            "/validity/structural/mean", "/validity/compositional/mean", "/validity/combined/std",
            "/coverage/recall/mean", "/coverage/precision/mean", "/wasserstein/density/mean",
            "/wasserstein/n_elements/mean", "/success/pretty_formula/mean", "/success/spacegroup_number/mean",
            "/success/formation_energy/mean", "/success/band_gap/mean", "/realism/atomic_overlap_rate/mean",
        ] {
            check(r.pointer(path).is_some_and(|v| v.is_number()), format!("report lacks {path}"))?;
        }
        check(r.pointer("/wasserstein/formation_energy").is_some(), "report lacks wasserstein.formation_energy")?;
        let csv = fs::read_to_string(csv).map_err(|e| e.to_string())?;
        check(csv.lines().count() == 16, format!("csv has {} lines", csv.lines().count()))?;
        Ok("evaluate emits validity/coverage/property-distribution/success tables. Benchmark scores of a \
            fine-tuned 7B language model scored with learned property surrogates are NOT reproducible here; \
            criteria 1-9 stand in for them"
            .into())
    };
    match run() {
        Ok(s) => Verdict::Pass(s),
        Err(e) => Verdict::Fail(e),
    }
}

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("payload reproduction", payloads),
        ("symmetry table integrity", symmetry_table),
        ("orbit oracle", orbit_oracle),
        ("SGS round trip", sgs_round_trip),
        ("metric oracles", metric_oracles),
        ("success rules", success_rules),
        ("echo-mock pipeline", echo_pipeline),
        ("determinism", determinism),
        ("preprocessing throughput", throughput),
        ("report structure", report_structure),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::Fail(format!("panicked: {msg}"))
        });
        match verdict {
            Verdict::Pass(s) => println!("criterion {:>2} {name}: PASS ({s})", i + 1),
            Verdict::Unmet(s) => println!("criterion {:>2} {name}: FAIL (hardware) ({s})", i + 1),
            Verdict::Fail(s) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({s})", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
