//! Test support for the cubic DUCG engine: an enumeration oracle, random
//! knowledge bases and access to the shared fixtures.

pub mod generate;
pub mod oracle;

use std::path::PathBuf;
use std::sync::Arc;

use ducg_core::kb::parse_kb;
use ducg_core::KnowledgeBase;

pub use generate::{accumulate, random_evidence, random_kb, GenConfig};
pub use oracle::{oracle, OracleResult};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture_text(name: &str) -> String {
    let path = fixture_path(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

pub fn load_kb(name: &str) -> Arc<KnowledgeBase> {
    Arc::new(parse_kb(&fixture_text(name)).unwrap_or_else(|e| panic!("{name}: {e}")))
}
