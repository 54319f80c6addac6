//! Feature selection over the consolidated table: per-feature statistics,
//! Borda prefiltering, one model ranking call and top-κ truncation.

mod borda;
mod prompt;
mod stats;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::corpus::{Column, Corpus};
use crate::fdg::DescriptorSet;
use crate::jex::{ConsolidatedTable, JexError};
use crate::llm::Gateway;

pub use borda::{borda_merge, rank_by};
pub use prompt::{build_fs_prompt, build_fs_prompt_without_stats, FS_SYSTEM, FS_SYSTEM_NO_STATS};
pub use stats::{discretize, encode_target, mi_from_labels, mutual_information, pearson_abs, pearson_abs_values, MI_BINS};

#[derive(Debug, Error)]
pub enum FselError {
    #[error("rankings disagree: {0}")]
    MismatchedFeatures(String),
    #[error("invalid selection parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Jex(#[from] JexError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    /// Statistics prefilter, then the model reorders with statistics in view.
    #[default]
    Hybrid,
    /// Borda order of the statistics, no model call.
    #[serde(alias = "stats-only")]
    StatsOnly,
    /// Model ranking from names and descriptions only.
    #[serde(alias = "llm-only")]
    LlmOnly,
    /// Keep every consolidated feature.
    None,
}

impl SelectionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMethod::Hybrid => "hybrid",
            SelectionMethod::StatsOnly => "stats_only",
            SelectionMethod::LlmOnly => "llm_only",
            SelectionMethod::None => "none",
        }
    }
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionMethod {
    type Err = FselError;

    /// Accepts `stats_only` and `stats-only` spellings.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "hybrid" => Ok(SelectionMethod::Hybrid),
            "stats_only" => Ok(SelectionMethod::StatsOnly),
            "llm_only" => Ok(SelectionMethod::LlmOnly),
            "none" => Ok(SelectionMethod::None),
            other => Err(FselError::InvalidParams(format!("unknown selection method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub feature: String,
    pub mutual_info: f64,
    pub pearson_abs: f64,
    pub valid_rows: usize,
}

impl FeatureStats {
    pub fn compute(feature: &Column, target: &Column, task: crate::Task) -> Self {
        let valid_rows = feature.values.iter().zip(&target.values).filter(|(f, t)| !f.is_null() && !t.is_null()).count();
        FeatureStats {
            feature: feature.name.clone(),
            mutual_info: mutual_information(feature, target, task),
            pearson_abs: pearson_abs(feature, target),
            valid_rows,
        }
    }
}

/// Borda merge of the MI and Pearson rankings.
pub fn statistical_order(stats: &[FeatureStats]) -> Vec<String> {
    let mi = rank_by(stats.iter().map(|s| (s.feature.clone(), s.mutual_info)).collect());
    let pe = rank_by(stats.iter().map(|s| (s.feature.clone(), s.pearson_abs)).collect());
    borda_merge(&[mi, pe]).expect("both rankings cover the same features").into_iter().map(|(n, _)| n).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub method: SelectionMethod,
    /// Borda order over every candidate.
    pub statistical_order: Vec<String>,
    /// Repaired model order over the prompted candidates; empty without a model call.
    pub llm_order: Vec<String>,
    pub selected: Vec<String>,
    /// True when the model ranking failed and the statistical order was used.
    #[serde(default)]
    pub degraded: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct SelectionParams {
    /// Features kept (κ).
    pub kappa: usize,
    /// Borda prefilter size (K).
    pub prefilter: usize,
    pub method: SelectionMethod,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams { kappa: 10, prefilter: 100, method: SelectionMethod::Hybrid }
    }
}

impl SelectionParams {
    pub fn validate(&self) -> Result<(), FselError> {
        if self.kappa < 1 {
            return Err(FselError::InvalidParams("features to keep must be at least 1".into()));
        }
        if self.prefilter < self.kappa {
            return Err(FselError::InvalidParams(format!(
                "prefilter size {} is smaller than the number of features to keep {}",
                self.prefilter, self.kappa
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct FeatureRecord<'a> {
    mutual_info: f64,
    pearson_abs: f64,
    null_ratio: f64,
    provenance_path: &'a str,
    path_rank: usize,
}

/// Final table plus everything needed to explain it.
#[derive(Debug, Clone)]
pub struct Selection {
    pub ranking: FeatureRanking,
    pub stats: Vec<FeatureStats>,
    pub base_width: usize,
    /// Base columns, then the selected foreign columns in selection order.
    pub columns: Vec<Column>,
    pub warnings: Vec<String>,
}

impl Selection {
    pub fn num_rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Writes `augmented.csv` and `selection.json` into `dir`.
    pub fn write(&self, dir: &Path, consolidated: &ConsolidatedTable) -> Result<(), FselError> {
        crate::jex::write_columns(&dir.join("augmented.csv"), &self.columns)?;
        let features: BTreeMap<&str, FeatureRecord> = self
            .stats
            .iter()
            .map(|s| {
                let prov = &consolidated.provenance[&s.feature];
                let rec = FeatureRecord {
                    mutual_info: s.mutual_info,
                    pearson_abs: s.pearson_abs,
                    null_ratio: prov.null_ratio,
                    provenance_path: &prov.path,
                    path_rank: prov.path_rank,
                };
                (s.feature.as_str(), rec)
            })
            .collect();
        let doc = serde_json::json!({
            "method": self.ranking.method,
            "degraded": self.ranking.degraded,
            "statistical_order": self.ranking.statistical_order,
            "llm_order": self.ranking.llm_order,
            "selected": self.ranking.selected,
            "features": features,
        });
        let path = dir.join("selection.json");
        std::fs::write(&path, serde_json::to_string_pretty(&doc).expect("selection serializes"))
            .map_err(|source| FselError::Io { path: path.display().to_string(), source })
    }
}

/// Keeps the model's order restricted to `allowed` (first mention wins), then
/// appends omitted names in `fallback` order.
pub fn repair_ranking(response: &[String], allowed: &[String], fallback: &[String]) -> Vec<String> {
    let allowed: std::collections::HashSet<&str> = allowed.iter().map(String::as_str).collect();
    let mut seen = std::collections::HashSet::new();
    let mut out: Vec<String> = Vec::with_capacity(allowed.len());
    for name in response.iter().chain(fallback) {
        if allowed.contains(name.as_str()) && seen.insert(name.as_str()) {
            out.push(name.clone());
        }
    }
    out
}

fn string_array(v: &Json) -> Option<Vec<String>> {
    let arr = v.as_array()?;
    Some(
        arr.iter()
            .filter_map(|x| match x {
                Json::String(s) => Some(s.clone()),
                Json::Object(o) => o.get("name").and_then(Json::as_str).map(str::to_string),
                _ => None,
            })
            .collect(),
    )
}

/// Ranks the foreign features of `consolidated` and keeps the top κ alongside
/// every base column.
///
/// Statistics are computed for all candidates and merged by Borda. The first
/// `prefilter` of that order are offered to the model (hybrid), or the first
/// `prefilter` in column order without statistics (llm_only). A response that
/// cannot be used degrades to the statistical order with a warning.
pub fn select_features(
    consolidated: &ConsolidatedTable,
    corpus: &Corpus,
    descriptors: &DescriptorSet,
    gateway: &Gateway,
    params: &SelectionParams,
) -> Result<Selection, FselError> {
    params.validate()?;
    let target = consolidated.base_columns().iter().find(|c| c.name == corpus.target()).expect("base columns hold the target");
    let candidates = consolidated.foreign_columns();
    let stats: Vec<FeatureStats> = candidates.par_iter().map(|c| FeatureStats::compute(c, target, corpus.task())).collect();
    let statistical = statistical_order(&stats);
    let natural: Vec<String> = candidates.iter().map(|c| c.name.clone()).collect();

    let mut warnings = Vec::new();
    let mut llm_order = Vec::new();
    let mut degraded = false;
    let take = params.prefilter.min(candidates.len());

    let ranked_model =
        |prompt, offered: &[String], fallback: &[String], warnings: &mut Vec<String>| match gateway.complete_json(&gateway.bind(prompt)) {
            Ok(v) => match string_array(&v) {
                Some(names) => Some(repair_ranking(&names, offered, fallback)),
                None => {
                    warnings.push(format!("feature ranking is not a JSON array: {v}"));
                    None
                }
            },
            Err(e) => {
                warnings.push(format!("feature ranking failed: {e}"));
                None
            }
        };

    let selected: Vec<String> = match params.method {
        SelectionMethod::None => natural.clone(),
        SelectionMethod::StatsOnly => statistical.iter().take(params.kappa).cloned().collect(),
        SelectionMethod::Hybrid | SelectionMethod::LlmOnly if candidates.is_empty() => Vec::new(),
        SelectionMethod::Hybrid => {
            let offered: Vec<String> = statistical[..take].to_vec();
            let by_name: BTreeMap<&str, &FeatureStats> = stats.iter().map(|s| (s.feature.as_str(), s)).collect();
            let rows: Vec<FeatureStats> = offered.iter().map(|n| by_name[n.as_str()].clone()).collect();
            match ranked_model(build_fs_prompt(&rows, descriptors, corpus), &offered, &offered, &mut warnings) {
                Some(order) => {
                    llm_order = order;
                    llm_order.iter().take(params.kappa).cloned().collect()
                }
                None => {
                    degraded = true;
                    statistical.iter().take(params.kappa).cloned().collect()
                }
            }
        }
        SelectionMethod::LlmOnly => {
            let offered: Vec<String> = natural[..take].to_vec();
            match ranked_model(build_fs_prompt_without_stats(&offered, descriptors, corpus), &offered, &offered, &mut warnings) {
                Some(order) => {
                    llm_order = order;
                    llm_order.iter().take(params.kappa).cloned().collect()
                }
                None => {
                    degraded = true;
                    statistical.iter().take(params.kappa).cloned().collect()
                }
            }
        }
    };
    if degraded {
        warnings.push("falling back to the statistical order".into());
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    let mut columns: Vec<Column> = consolidated.base_columns().to_vec();
    for name in &selected {
        columns.push(consolidated.column(name).expect("selected from candidates").clone());
    }
    Ok(Selection {
        ranking: FeatureRanking { method: params.method, statistical_order: statistical, llm_order, selected, degraded },
        stats,
        base_width: consolidated.base_width,
        columns,
        warnings,
    })
}
