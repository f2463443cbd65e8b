#![allow(dead_code)]

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;

use spacegen_core::properties::read_property_table;
use spacegen_core::select::IndexInput;
use spacegen_core::symmetry::DEFAULT_EPS;
use spacegen_core::text::cif::parse_cif;
use spacegen_core::{load_space_group, Crystal, PropertyValues, SpaceGroup};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub struct Fixture {
    pub id: String,
    pub crystal: Crystal,
    pub group: &'static SpaceGroup,
    pub properties: PropertyValues,
}

pub fn fixtures() -> Vec<Fixture> {
    let props: HashMap<String, PropertyValues> =
        read_property_table(fs::File::open(fixture_dir().join("properties.csv")).unwrap())
            .unwrap()
            .into_iter()
            .collect();
    let mut paths: Vec<_> = fs::read_dir(fixture_dir().join("cif"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let id = p.file_stem().unwrap().to_str().unwrap().to_string();
            let doc = parse_cif(&fs::read_to_string(&p).unwrap()).unwrap();
            let crystal: Crystal = doc.to_crystal().unwrap();
            let group = load_space_group(doc.declared_number.unwrap()).unwrap();
            assert!(group.verify(&crystal, DEFAULT_EPS), "{id} not symmetric");
            Fixture { properties: props[&id].clone(), id, crystal, group }
        })
        .collect()
}

pub fn fixture(id: &str) -> Fixture {
    fixtures().into_iter().find(|f| f.id == id).unwrap()
}

pub fn index_inputs() -> Vec<IndexInput> {
    fixtures()
        .into_iter()
        .map(|f| IndexInput {
            id: f.id,
            crystal: f.crystal,
            space_group: f.group.number(),
            properties: f.properties,
        })
        .collect()
}
