//! Deterministic stand-ins for a language model endpoint.

use std::collections::HashMap;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use spacegen_core::rng::{derive_seed, unit_uniform};

use crate::client::{ClientError, CompletionClient, CompletionRequest};

const GARBAGE: &str = "I am unable to describe this material.";

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Crystal string of the first in-context example of a few-shot prompt.
pub fn first_example(prompt: &str) -> Option<String> {
    let lines: Vec<&str> = prompt.lines().collect();
    let start = lines.iter().position(|l| l.trim() == "First Example:")? + 1;
    let is_header = |l: &str| {
        let l = l.trim();
        l.ends_with(" Example:") && l.split_whitespace().count() == 2
    };
    // The closing instruction is always the last line.
    let end = lines[start..lines.len() - 1]
        .iter()
        .position(|l| is_header(l))
        .map_or(lines.len() - 1, |p| start + p);
    let mut body = &lines[start..end];
    if body.first().is_some_and(|l| l.starts_with("The ")) {
        body = &body[1..];
    }
    if body.is_empty() {
        None
    } else {
        Some(body.join("\n"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MockMode {
    /// Responses looked up by SHA-256 of the prompt.
    Fixture(HashMap<String, String>),
    EchoFirstExample,
    /// Garbage with probability `p`, otherwise the first example.
    Corrupt { p: f64, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct MockClient {
    pub mode: MockMode,
}

impl MockClient {
    pub fn new(mode: MockMode) -> Self {
        MockClient { mode }
    }

    pub fn fixture(entries: impl IntoIterator<Item = (String, String)>) -> Self {
        let map = entries.into_iter().map(|(prompt, resp)| (prompt_hash(&prompt), resp)).collect();
        MockClient::new(MockMode::Fixture(map))
    }
}

fn echo(prompt: &str) -> Result<String, ClientError> {
    first_example(prompt).ok_or_else(|| ClientError::Mock("prompt has no in-context example".into()))
}

impl CompletionClient for MockClient {
    fn complete(&self, req: &CompletionRequest) -> Result<String, ClientError> {
        req.validate()?;
        match &self.mode {
            MockMode::Fixture(map) => map
                .get(&prompt_hash(&req.prompt))
                .cloned()
                .ok_or_else(|| ClientError::Mock("no fixture for prompt".into())),
            MockMode::EchoFirstExample => echo(&req.prompt),
            MockMode::Corrupt { p, seed } => {
                let key = req.seed.unwrap_or_else(|| {
                    let h = Sha256::digest(req.prompt.as_bytes());
                    u64::from_le_bytes(h[..8].try_into().expect("8 bytes"))
                });
                if unit_uniform(derive_seed(*seed, key)) < *p {
                    Ok(GARBAGE.to_string())
                } else {
                    echo(&req.prompt)
                }
            }
        }
    }
}

impl FromStr for MockMode {
    type Err = String;

    /// `echo`, `corrupt:<p>` or `fixture:<path to JSON object prompt-hash → response>`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "echo" | "echo-first-example" => Ok(MockMode::EchoFirstExample),
            "corrupt" => {
                let p: f64 = arg.parse().map_err(|_| format!("bad corruption probability {arg:?}"))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(format!("corruption probability {p} outside [0, 1]"));
                }
                Ok(MockMode::Corrupt { p, seed: 0 })
            }
            "fixture" => {
                let text = std::fs::read_to_string(arg).map_err(|e| format!("{arg}: {e}"))?;
                let map: HashMap<String, String> = serde_json::from_str(&text).map_err(|e| format!("{arg}: {e}"))?;
                Ok(MockMode::Fixture(map))
            }
            _ => Err(format!("unknown mock mode {s:?}")),
        }
    }
}
