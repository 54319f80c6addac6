//! Layered configuration: defaults, then environment, then a TOML file, then flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use relaug_core::fsel::SelectionMethod;
use relaug_core::jex::Executor;
use relaug_core::llm::{StubBehavior, ENDPOINT_ENV};
use relaug_core::pex::Weights;
use relaug_core::pipeline::{LlmBackend, RunConfig};
use serde_json::Value as Json;

/// Flags shared by the pipeline subcommands. Every flag overrides the file and environment.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with any `RunConfig` fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory holding `graph.json` and one CSV per table.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Maximum join path length in tables.
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Join paths kept.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Features selected.
    #[arg(long)]
    pub features: Option<usize>,
    /// Candidates offered to the ranking model.
    #[arg(long)]
    pub prefilter: Option<usize>,
    /// Path score weights `alpha,beta,gamma` summing to 1.
    #[arg(long, value_parser = parse_weights)]
    pub weights: Option<Weights>,
    /// stub or remote.
    #[arg(long)]
    pub llm: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Stub answers when no script entry applies: heuristic or echo.
    #[arg(long)]
    pub stub_behavior: Option<String>,
    /// JSON file with canned stub responses per prompt kind.
    #[arg(long)]
    pub stub_script: Option<PathBuf>,
    /// hybrid, stats-only, llm-only or none.
    #[arg(long)]
    pub method: Option<String>,
    /// yannakakis or binary.
    #[arg(long)]
    pub executor: Option<String>,
    /// Worker threads; hardware parallelism by default.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Prompt size in estimated tokens; larger description prompts are batched and table candidates prefiltered.
    #[arg(long)]
    pub token_budget: Option<usize>,
}

pub fn parse_weights(s: &str) -> Result<Weights, String> {
    let parts: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}"))).collect::<Result<_, _>>()?;
    let [a, b, c] = parts[..] else { return Err(format!("expected three weights, got {}", parts.len())) };
    Weights::new(a, b, c).map_err(|e| e.to_string())
}

fn overlay(base: &mut Json, top: Json) {
    match (base, top) {
        (Json::Object(b), Json::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

fn file_layer(path: &Path) -> Result<Json> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    Ok(serde_json::to_value(table)?)
}

fn env_layer(env: &dyn Fn(&str) -> Option<String>) -> Json {
    let mut layer = serde_json::Map::new();
    if let Some(endpoint) = env(ENDPOINT_ENV) {
        layer.insert("endpoint".into(), Json::String(endpoint));
    }
    Json::Object(layer)
}

impl RunArgs {
    /// Resolves the final config; `env` looks up environment variables.
    pub fn resolve_with(&self, env: &dyn Fn(&str) -> Option<String>) -> Result<RunConfig> {
        let mut merged = serde_json::to_value(RunConfig::default())?;
        overlay(&mut merged, env_layer(env));
        if let Some(path) = &self.config {
            overlay(&mut merged, file_layer(path)?);
        }
        let mut c: RunConfig = serde_json::from_value(merged).context("invalid configuration")?;

        if let Some(v) = &self.dataset {
            c.dataset_dir = v.clone();
        }
        if let Some(v) = &self.out {
            c.out_dir = v.clone();
        }
        if let Some(v) = self.max_len {
            c.max_len = v;
        }
        if let Some(v) = self.paths {
            c.paths = v;
        }
        if let Some(v) = self.features {
            c.features = v;
        }
        if let Some(v) = self.prefilter {
            c.prefilter = v;
        }
        if let Some(v) = self.weights {
            c.weights = v;
        }
        if let Some(v) = &self.llm {
            c.llm = v.parse::<LlmBackend>().map_err(anyhow::Error::msg)?;
        }
        if let Some(v) = &self.model {
            c.model = v.clone();
        }
        if let Some(v) = &self.stub_behavior {
            c.stub_behavior = match v.as_str() {
                "heuristic" => StubBehavior::Heuristic,
                "echo" => StubBehavior::Echo,
                other => bail!("unknown stub behavior `{other}` (expected heuristic or echo)"),
            };
        }
        if let Some(v) = &self.stub_script {
            c.stub_script = Some(v.clone());
        }
        if let Some(v) = &self.method {
            c.method = v.parse::<SelectionMethod>()?;
        }
        if let Some(v) = &self.executor {
            c.executor = v.parse::<Executor>().map_err(anyhow::Error::msg)?;
        }
        if let Some(v) = self.threads {
            c.threads = Some(v);
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.token_budget {
            c.token_budget = v;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        self.resolve_with(&|k| std::env::var(k).ok())
    }
}
