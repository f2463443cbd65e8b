#![allow(dead_code)]

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

pub fn cif_dir() -> PathBuf {
    fixtures().join("cif")
}

pub fn properties() -> PathBuf {
    fixtures().join("properties.csv")
}

pub fn spacegen<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_spacegen")).args(args).output().expect("spawn spacegen")
}

pub fn spacegen_stdin<I, S>(args: I, input: &str) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let mut child = Command::new(env!("CARGO_BIN_EXE_spacegen"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn spacegen");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

pub fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Runs `preprocess` over the fixture corpus into `dir` and returns the index path.
pub fn preprocess_fixtures(dir: &Path) -> PathBuf {
    let out = dir.join("prep");
    ok(&spacegen([
        "preprocess".as_ref(),
        "--cif-dir".as_ref(),
        cif_dir().as_os_str(),
        "--properties".as_ref(),
        properties().as_os_str(),
        "--out".as_ref(),
        out.as_os_str(),
    ]));
    out.join("index.json")
}
