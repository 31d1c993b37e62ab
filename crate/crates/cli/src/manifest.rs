use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

/// Written next to every set of artifacts. `parameters` is the fully resolved
/// input (after any seed override), so replaying it reproduces the artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub subcommand: String,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    /// File names relative to the manifest's directory.
    pub artifacts: Vec<String>,
    pub wall_clock_seconds: f64,
    pub created_unix: u64,
    pub library_version: String,
}
