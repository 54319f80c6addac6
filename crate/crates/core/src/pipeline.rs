//! Orchestration of the four stages and the run report.
//!
//! Each stage writes its artifacts into the output directory, and the stored
//! forms are read back without loss: running the stages one at a time (one
//! [`Session`] each) produces the same files as [`run_pipeline`].
//!
//! | stage    | reads                                   | writes                                   |
//! |----------|-----------------------------------------|------------------------------------------|
//! | describe | dataset                                 | `descriptions.json`                      |
//! | explore  | `descriptions.json`                     | `table_scores.json`, `paths.json`        |
//! | execute  | `paths.json`                            | `consolidated.csv`, `consolidation.json` |
//! | select   | `consolidated.*`, `descriptions.json`   | `augmented.csv`, `selection.json`        |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, Severity};
use crate::fdg::{generate_descriptions, load_descriptions, DescriptorSet, FdgOptions};
use crate::fsel::{select_features, FselError, Selection, SelectionMethod, SelectionParams};
use crate::jex::{consolidate, materialize_paths, ConsolidatedTable, Executor, JexError};
use crate::llm::{
    ChatProvider, Embedder, Gateway, LlmError, PromptKind, RemoteChatProvider, RemoteEmbedder, StubBehavior, StubProvider, StubScript,
    TrigramEmbedder, API_KEY_ENV, DEFAULT_MAX_TOKENS, DEFAULT_MODEL, ENDPOINT_ENV,
};
use crate::pex::{explore, read_paths_json, score_tables, write_paths_json, PexError, ScoredPath, Weights};

pub const DESCRIPTIONS_FILE: &str = "descriptions.json";
pub const TABLE_SCORES_FILE: &str = "table_scores.json";
pub const PATHS_FILE: &str = "paths.json";
pub const REPORT_FILE: &str = "report.json";
pub const AUDIT_FILE: &str = "llm_audit.jsonl";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Pex(#[from] PexError),
    #[error(transparent)]
    Jex(#[from] JexError),
    #[error(transparent)]
    Fsel(#[from] FselError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LlmBackend {
    #[default]
    Stub,
    Remote,
}

impl FromStr for LlmBackend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stub" => Ok(LlmBackend::Stub),
            "remote" => Ok(LlmBackend::Remote),
            other => Err(format!("unknown llm backend `{other}` (expected stub or remote)")),
        }
    }
}

/// Every knob of a run. Unset fields in a config file take these defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Maximum join path length in tables (ℓ).
    pub max_len: usize,
    /// Join paths kept (π).
    pub paths: usize,
    /// Features selected (κ).
    pub features: usize,
    /// Candidates offered to the ranking model (K).
    pub prefilter: usize,
    pub weights: Weights,
    pub llm: LlmBackend,
    pub model: String,
    pub stub_behavior: StubBehavior,
    pub stub_script: Option<PathBuf>,
    /// Chat completions URL for the remote backend; the key is read from the environment only.
    pub endpoint: Option<String>,
    /// Embeddings URL for the remote backend; trigram embeddings when unset.
    pub embedding_endpoint: Option<String>,
    pub embedding_model: Option<String>,
    pub max_tokens: u32,
    pub method: SelectionMethod,
    pub executor: Executor,
    /// Seed for the synthetic generators; the pipeline itself draws no random numbers.
    pub seed: u64,
    /// Worker threads; hardware parallelism when unset.
    pub threads: Option<usize>,
    pub token_budget: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset_dir: PathBuf::new(),
            out_dir: PathBuf::from("out"),
            max_len: 7,
            paths: 10,
            features: 10,
            prefilter: 100,
            weights: Weights::default(),
            llm: LlmBackend::Stub,
            model: DEFAULT_MODEL.to_string(),
            stub_behavior: StubBehavior::Heuristic,
            stub_script: None,
            endpoint: None,
            embedding_endpoint: None,
            embedding_model: None,
            max_tokens: DEFAULT_MAX_TOKENS,
            method: SelectionMethod::Hybrid,
            executor: Executor::Yannakakis,
            seed: 0,
            threads: None,
            token_budget: crate::DEFAULT_TOKEN_BUDGET,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.dataset_dir.as_os_str().is_empty() {
            return bad("dataset directory is required".into());
        }
        if self.max_len < 2 {
            return bad(format!("max path length must be at least 2 (got {})", self.max_len));
        }
        if self.paths < 1 {
            return bad("path budget must be at least 1".into());
        }
        if self.threads == Some(0) {
            return bad("thread count must be at least 1".into());
        }
        if self.token_budget == 0 {
            return bad("token budget must be positive".into());
        }
        self.weights.validate()?;
        self.selection_params().validate()?;
        Ok(())
    }

    pub fn selection_params(&self) -> SelectionParams {
        SelectionParams { kappa: self.features, prefilter: self.prefilter, method: self.method }
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// Gateway for the configured backend.
pub fn build_gateway(config: &RunConfig) -> Result<Gateway, PipelineError> {
    let api_key = std::env::var(API_KEY_ENV).ok();
    let chat: Box<dyn ChatProvider> = match config.llm {
        LlmBackend::Stub => {
            let script = match &config.stub_script {
                Some(path) => StubScript::from_file(path)?,
                None => StubScript::default(),
            };
            Box::new(StubProvider::scripted(script).with_behavior(config.stub_behavior))
        }
        LlmBackend::Remote => {
            let endpoint = config
                .endpoint
                .clone()
                .ok_or_else(|| PipelineError::Config(format!("remote backend needs an endpoint ({ENDPOINT_ENV})")))?;
            Box::new(RemoteChatProvider::new(endpoint, api_key.clone()).with_max_tokens(config.max_tokens))
        }
    };
    let embedder: Box<dyn Embedder> = match (&config.llm, &config.embedding_endpoint) {
        (LlmBackend::Remote, Some(url)) => Box::new(RemoteEmbedder::new(
            url.clone(),
            api_key,
            config.embedding_model.clone().unwrap_or_else(|| "text-embedding-3-small".into()),
        )),
        _ => Box::new(TrigramEmbedder),
    };
    Ok(Gateway::new(chat, embedder).with_model(config.model.clone()))
}

/// Runs `f` on a pool of `threads` workers, or on the global pool when unset.
pub fn with_thread_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, PipelineError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| PipelineError::ThreadPool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Wall-clock per stage. Description generation is an offline step and is
/// excluded from `online_total`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StageTimings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub describe: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explore: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub execute: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub select: Option<f64>,
    pub online_total: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FeatureCounts {
    pub base: usize,
    pub consolidated: usize,
    pub selected: usize,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub stages: Vec<String>,
    pub timings_ms: StageTimings,
    pub llm_calls: BTreeMap<String, usize>,
    pub paths: usize,
    pub enumerated_paths: usize,
    pub intermediate_rows: usize,
    pub features: FeatureCounts,
    pub degraded: bool,
    pub warnings: Vec<String>,
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// One dataset, one gateway and one output directory; stages run against it
/// in any order their inputs allow.
pub struct Session {
    pub config: RunConfig,
    pub corpus: Corpus,
    pub gateway: Gateway,
    report: RunReport,
}

impl Session {
    /// Validates the config, loads the dataset and builds the configured gateway.
    pub fn open(config: RunConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let gateway = build_gateway(&config)?;
        Self::with_gateway(config, gateway)
    }

    /// Like [`Session::open`] with a caller-supplied gateway.
    pub fn with_gateway(config: RunConfig, gateway: Gateway) -> Result<Self, PipelineError> {
        config.validate()?;
        fs::create_dir_all(&config.out_dir).map_err(|source| PipelineError::Io { path: config.out_dir.display().to_string(), source })?;
        let corpus = Corpus::load(&config.dataset_dir)?;
        let gateway = gateway.with_audit_log(config.artifact(AUDIT_FILE))?;
        let mut warnings = Vec::new();
        for d in corpus.validate_graph() {
            let label = if d.severity == Severity::Violation { "violation" } else { "warning" };
            warnings.push(format!("join graph edge {} {label}: {}", d.edge, d.message));
        }
        let report = RunReport {
            config: config.clone(),
            stages: Vec::new(),
            timings_ms: StageTimings::default(),
            llm_calls: BTreeMap::new(),
            paths: 0,
            enumerated_paths: 0,
            intermediate_rows: 0,
            features: FeatureCounts { base: corpus.base_table().columns().len(), ..Default::default() },
            degraded: false,
            warnings,
        };
        Ok(Session { config, corpus, gateway, report })
    }

    /// Generates or reuses descriptions and stores them in `descriptions.json`.
    pub fn describe(&mut self) -> DescriptorSet {
        let start = Instant::now();
        let opts = FdgOptions { cache_path: Some(self.config.artifact(DESCRIPTIONS_FILE)), token_budget: self.config.token_budget };
        let outcome = generate_descriptions(&self.corpus, &self.gateway, &opts);
        self.report.warnings.extend(outcome.warnings);
        self.finish_stage("describe", start);
        self.report.timings_ms.describe = Some(ms(start));
        outcome.descriptors
    }

    /// Descriptions stored by a previous describe stage; absent descriptions with a warning otherwise.
    pub fn stored_descriptions(&mut self) -> DescriptorSet {
        let path = self.config.artifact(DESCRIPTIONS_FILE);
        load_descriptions(&self.corpus, &path).unwrap_or_else(|| {
            self.report.warnings.push(format!("no descriptions for this dataset at {}; using column names only", path.display()));
            DescriptorSet::absent(&self.corpus)
        })
    }

    /// Scores candidate tables, searches join paths and stores both.
    pub fn explore(&mut self, descriptors: &DescriptorSet) -> Result<Vec<ScoredPath>, PipelineError> {
        let start = Instant::now();
        let scores = score_tables(&self.corpus, descriptors, &self.gateway, self.config.token_budget);
        self.report.warnings.extend(scores.warnings.iter().cloned());
        write_json(&self.config.artifact(TABLE_SCORES_FILE), &scores)?;
        let outcome = explore(&self.corpus, &scores, self.config.max_len, self.config.paths, &self.config.weights)?;
        write_paths_json(&self.config.artifact(PATHS_FILE), &outcome.paths)?;
        self.report.paths = outcome.paths.len();
        self.report.enumerated_paths = outcome.enumerated;
        self.report.warnings.extend(outcome.warnings);
        self.finish_stage("explore", start);
        self.report.timings_ms.explore = Some(ms(start));
        Ok(outcome.paths)
    }

    pub fn stored_paths(&self) -> Result<Vec<ScoredPath>, PipelineError> {
        let paths = read_paths_json(&self.config.artifact(PATHS_FILE))?;
        for p in &paths {
            p.path.validate(&self.corpus)?;
        }
        Ok(paths)
    }

    /// Materializes every path with the configured executor and consolidates the results.
    pub fn execute(&mut self, paths: &[ScoredPath]) -> Result<ConsolidatedTable, PipelineError> {
        let start = Instant::now();
        let join_paths: Vec<_> = paths.iter().map(|p| p.path.clone()).collect();
        let augmented = materialize_paths(&self.corpus, &join_paths, self.config.executor)?;
        self.report.intermediate_rows = augmented.iter().map(|a| a.trace.total()).sum();
        let consolidated = consolidate(self.corpus.base_table(), &augmented, paths)?;
        consolidated.write(&self.config.out_dir)?;
        self.report.features.consolidated = consolidated.foreign_columns().len();
        self.finish_stage("execute", start);
        self.report.timings_ms.execute = Some(ms(start));
        Ok(consolidated)
    }

    pub fn stored_consolidated(&self) -> Result<ConsolidatedTable, PipelineError> {
        Ok(ConsolidatedTable::read(&self.config.out_dir)?)
    }

    /// Ranks the consolidated features and writes the final table.
    pub fn select(&mut self, consolidated: &ConsolidatedTable, descriptors: &DescriptorSet) -> Result<Selection, PipelineError> {
        let start = Instant::now();
        let selection = select_features(consolidated, &self.corpus, descriptors, &self.gateway, &self.config.selection_params())?;
        selection.write(&self.config.out_dir, consolidated)?;
        self.report.features.consolidated = consolidated.foreign_columns().len();
        self.report.features.selected = selection.ranking.selected.len();
        self.report.degraded = selection.ranking.degraded;
        self.report.warnings.extend(selection.warnings.iter().cloned());
        self.finish_stage("select", start);
        self.report.timings_ms.select = Some(ms(start));
        Ok(selection)
    }

    fn finish_stage(&mut self, name: &str, start: Instant) {
        log::info!("{name} finished in {:.1} ms", ms(start));
        self.report.stages.push(name.to_string());
    }

    /// Report of the stages run so far.
    pub fn report(&self) -> RunReport {
        let mut report = self.report.clone();
        let t = &report.timings_ms;
        report.timings_ms.online_total = [t.explore, t.execute, t.select].iter().flatten().sum();
        for kind in [PromptKind::Descriptions, PromptKind::TableScoring, PromptKind::FeatureRanking] {
            report.llm_calls.insert(kind.as_str().to_string(), self.gateway.calls(kind));
        }
        report
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).expect("artifact serializes");
    fs::write(path, text).map_err(|source| PipelineError::Io { path: path.display().to_string(), source })
}

/// All four stages in order on an open session, then `report.json`.
pub fn run_session(session: &mut Session) -> Result<RunReport, PipelineError> {
    let descriptors = session.describe();
    let paths = session.explore(&descriptors)?;
    let consolidated = session.execute(&paths)?;
    session.select(&consolidated, &descriptors)?;
    let report = session.report();
    write_json(&session.config.artifact(REPORT_FILE), &report)?;
    Ok(report)
}

/// Opens a session for `config` and runs every stage on the configured thread pool.
pub fn run_pipeline(config: RunConfig) -> Result<RunReport, PipelineError> {
    let threads = config.threads;
    with_thread_pool(threads, move || {
        let mut session = Session::open(config)?;
        run_session(&mut session)
    })?
}
