//! Optional TOML run configuration. Command-line flags override it.
//!
//! ```toml
//! [kg]
//! dir = "data/kg"
//! rtl_languages = ["ur"]
//!
//! [artifacts]
//! dir = "build"
//! strategy = "ETl-Sum"
//! dim = 256
//!
//! [link]
//! gold = "data/gold.jsonl"
//! k = 5
//! label_mode = "El"
//!
//! [decode]
//! beam = 5
//! scorer = "overlap"
//!
//! [rerank]
//! with_null = true
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub kg: KgSection,
    #[serde(default)]
    pub artifacts: ArtifactSection,
    #[serde(default)]
    pub link: LinkSection,
    #[serde(default)]
    pub decode: DecodeSection,
    #[serde(default)]
    pub rerank: RerankSection,
    #[serde(default)]
    pub eval: EvalSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KgSection {
    pub dir: Option<PathBuf>,
    pub entities: Option<PathBuf>,
    pub relations: Option<PathBuf>,
    pub facts: Option<PathBuf>,
    pub rtl_languages: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactSection {
    pub dir: Option<PathBuf>,
    pub strategy: Option<String>,
    pub dim: Option<usize>,
    pub ngram: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub gold: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub k: Option<usize>,
    pub label_mode: Option<String>,
    pub search: Option<String>,
    pub lists: Option<usize>,
    pub probes: Option<usize>,
    pub no_de: Option<bool>,
    pub retrieve_only: Option<bool>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeSection {
    pub beam: Option<usize>,
    pub max_len: Option<usize>,
    pub mode: Option<String>,
    pub scorer: Option<String>,
    pub length_penalty: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RerankSection {
    pub reranker: Option<String>,
    pub scorer: Option<String>,
    pub with_null: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub predictions: Option<PathBuf>,
    pub empty_as_null: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text =
            fs::read_to_string(path).map_err(|e| format!("config file {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("config file {}: {e}", path.display()))
    }
}
