//! Shared helpers for the criterion benchmarks in `benches/`.

use std::path::PathBuf;

use pbvote_core::{parse_election, Election, ParseMode};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn fixture_text(name: &str) -> String {
    let path = fixture_path(name);
    std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
}

pub fn fixture_election(name: &str) -> Election {
    parse_election(&fixture_text(name), ParseMode::Strict)
        .expect("committed fixtures parse strictly")
        .election
}
