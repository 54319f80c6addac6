//! Feature description generation: one batched model call that turns terse
//! column names into short semantic descriptions, cached on disk by schema hash.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, Table};
use crate::llm::{ChatPrompt, Gateway, PromptKind};

pub const FDG_SYSTEM: &str = "You are an experienced data scientist reading a relational database schema. \
From the table names, column names and any dataset context supplied, write a short description \
of what each column means.\n\
Requirements:\n\
(1) Describe every column listed;\n\
(2) Keep each description between 3 and 10 words;\n\
(3) Explain the meaning of the column rather than its storage type;\n\
(4) Expand abbreviations and codes into plain domain vocabulary;\n\
(5) Answer with one JSON object shaped like {\"table_1.column_1\": \"description\", \"table_1.column_2\": \"description\", ...}.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorSource {
    Llm,
    Cache,
    Absent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureDescriptor {
    pub table: String,
    pub feature: String,
    /// Empty iff `source` is `Absent`.
    pub description: String,
    pub source: DescriptorSource,
}

/// Descriptors keyed by `(table, feature)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DescriptorSet {
    entries: BTreeMap<(String, String), FeatureDescriptor>,
}

impl DescriptorSet {
    /// Every column of the corpus with no description.
    pub fn absent(corpus: &Corpus) -> Self {
        let mut set = DescriptorSet::default();
        for t in corpus.tables() {
            for c in t.columns() {
                set.insert(&t.name, &c.name, String::new(), DescriptorSource::Absent);
            }
        }
        set
    }

    fn insert(&mut self, table: &str, feature: &str, description: String, source: DescriptorSource) {
        let (description, source) =
            if description.trim().is_empty() { (String::new(), DescriptorSource::Absent) } else { (description, source) };
        self.entries.insert(
            (table.to_string(), feature.to_string()),
            FeatureDescriptor { table: table.to_string(), feature: feature.to_string(), description, source },
        );
    }

    pub fn get(&self, table: &str, feature: &str) -> Option<&FeatureDescriptor> {
        self.entries.get(&(table.to_string(), feature.to_string()))
    }

    /// Description text, or `None` when absent or unknown.
    pub fn description(&self, table: &str, feature: &str) -> Option<&str> {
        self.get(table, feature).filter(|d| d.source != DescriptorSource::Absent).map(|d| d.description.as_str())
    }

    /// Description of a qualified `<table>.<column>` name.
    pub fn qualified(&self, name: &str) -> Option<&str> {
        let (table, feature) = name.split_once('.')?;
        self.description(table, feature)
    }

    pub fn iter(&self) -> impl Iterator<Item = &FeatureDescriptor> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn to_cache_map(&self) -> BTreeMap<String, String> {
        self.iter()
            .filter(|d| d.source != DescriptorSource::Absent)
            .map(|d| (format!("{}.{}", d.table, d.feature), d.description.clone()))
            .collect()
    }
}

/// On-disk `descriptions.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct DescriptionCache {
    pub hash: String,
    /// False when some batch failed; an incomplete file is never reused as a cache.
    #[serde(default = "complete_default")]
    pub complete: bool,
    pub descriptions: BTreeMap<String, String>,
}

fn complete_default() -> bool {
    true
}

impl DescriptionCache {
    pub fn read(path: &Path) -> Option<Self> {
        serde_json::from_str(&fs::read_to_string(path).ok()?).ok()
    }

    /// Write-temp-then-rename so readers never observe a partial file.
    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_string_pretty(self).map_err(std::io::Error::other)?)?;
        fs::rename(tmp, path)
    }

    /// Descriptors for `corpus` with every cached entry marked [`DescriptorSource::Cache`].
    pub fn into_descriptors(self, corpus: &Corpus) -> DescriptorSet {
        let mut descriptors = DescriptorSet::absent(corpus);
        for t in corpus.tables() {
            for c in t.columns() {
                if let Some(d) = self.descriptions.get(&format!("{}.{}", t.name, c.name)) {
                    descriptors.insert(&t.name, &c.name, d.clone(), DescriptorSource::Cache);
                }
            }
        }
        descriptors
    }
}

/// Descriptors recorded at `path` for this corpus, complete or not. `None` when the
/// file is missing, unreadable or describes a different schema.
pub fn load_descriptions(corpus: &Corpus, path: &Path) -> Option<DescriptorSet> {
    DescriptionCache::read(path).filter(|c| c.hash == schema_hash(corpus)).map(|c| c.into_descriptors(corpus))
}

/// Content hash of table names, feature names and the dataset description.
pub fn schema_hash(corpus: &Corpus) -> String {
    let schema: Vec<(&str, Vec<&str>)> =
        corpus.tables().map(|t| (t.name.as_str(), t.columns().iter().map(|c| c.name.as_str()).collect())).collect();
    let payload = serde_json::json!({ "tables": schema, "dataset_description": corpus.dataset_description });
    hex::encode(Sha256::digest(payload.to_string().as_bytes()))
}

pub fn build_fdg_prompt(corpus: &Corpus) -> ChatPrompt {
    let tables: Vec<&Table> = corpus.tables().collect();
    batch_prompt(corpus, &tables)
}

fn batch_prompt(corpus: &Corpus, tables: &[&Table]) -> ChatPrompt {
    let mut user = String::new();
    if let Some(d) = &corpus.dataset_description {
        user.push_str(&format!("Dataset context: {d}\n"));
    }
    user.push_str("Tables and features:\n");
    let lines: Vec<String> = tables
        .iter()
        .map(|t| {
            let cols: Vec<String> = t.columns().iter().map(|c| format!("{} ({})", c.name, c.ty)).collect();
            format!("{}: [{}]", t.name, cols.join(", "))
        })
        .collect();
    user.push_str(&lines.join(",\n"));
    ChatPrompt::new(PromptKind::Descriptions, FDG_SYSTEM, user)
}

#[derive(Debug, Clone)]
pub struct FdgOptions {
    pub cache_path: Option<PathBuf>,
    pub token_budget: usize,
}

impl Default for FdgOptions {
    fn default() -> Self {
        FdgOptions { cache_path: None, token_budget: crate::DEFAULT_TOKEN_BUDGET }
    }
}

#[derive(Debug, Clone)]
pub struct FdgOutcome {
    pub descriptors: DescriptorSet,
    pub warnings: Vec<String>,
}

/// Produces a descriptor for every column of the corpus.
///
/// A cache file whose hash matches the corpus answers without any model call.
/// Otherwise the whole schema goes out in one call, split into table batches
/// only when it would exceed `token_budget`. A batch whose response cannot be
/// parsed (after one re-ask) leaves its columns absent; the file is marked
/// incomplete so that the next run asks again.
/// only when every batch parsed.
pub fn generate_descriptions(corpus: &Corpus, gateway: &Gateway, opts: &FdgOptions) -> FdgOutcome {
    let hash = schema_hash(corpus);
    let mut descriptors = DescriptorSet::absent(corpus);
    let mut warnings = Vec::new();

    if let Some(cache) = opts.cache_path.as_deref().and_then(DescriptionCache::read) {
        if cache.hash == hash && cache.complete {
            return FdgOutcome { descriptors: cache.into_descriptors(corpus), warnings };
        }
    }

    let mut all_parsed = true;
    for batch in batches(corpus, opts.token_budget) {
        let prompt = gateway.bind(batch_prompt(corpus, &batch));
        let response = match gateway.complete_json(&prompt) {
            Ok(Json::Object(map)) => map,
            Ok(other) => {
                all_parsed = false;
                warnings.push(format!("description response is not a JSON object: {other}"));
                continue;
            }
            Err(e) => {
                all_parsed = false;
                warnings.push(format!("feature descriptions unavailable: {e}"));
                continue;
            }
        };
        for t in &batch {
            for c in t.columns() {
                if let Some(text) = response.get(&format!("{}.{}", t.name, c.name)).and_then(Json::as_str) {
                    descriptors.insert(&t.name, &c.name, text.to_string(), DescriptorSource::Llm);
                }
            }
        }
    }

    if let Some(path) = &opts.cache_path {
        let cache = DescriptionCache { hash, complete: all_parsed, descriptions: descriptors.to_cache_map() };
        if let Err(e) = cache.write(path) {
            warnings.push(format!("could not write {}: {e}", path.display()));
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    FdgOutcome { descriptors, warnings }
}

/// Greedy maximal table groups (manifest order) whose prompts fit the budget.
/// A single table larger than the budget forms its own batch.
fn batches(corpus: &Corpus, budget: usize) -> Vec<Vec<&Table>> {
    let all: Vec<&Table> = corpus.tables().collect();
    if batch_prompt(corpus, &all).token_estimate() <= budget {
        return vec![all];
    }
    let mut out: Vec<Vec<&Table>> = Vec::new();
    let mut cur: Vec<&Table> = Vec::new();
    for t in all {
        cur.push(t);
        if cur.len() > 1 && batch_prompt(corpus, &cur).token_estimate() > budget {
            cur.pop();
            out.push(std::mem::replace(&mut cur, vec![t]));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}
