//! Deterministic offline chat provider.
//!
//! A stub answers from a script (one canned text per prompt kind) and falls
//! back to a heuristic that reads the rendered prompt: tables and features are
//! scored by token overlap with the target column name.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value as Json};

use super::{ChatPrompt, ChatProvider, LlmError, LlmResponse, PromptKind};

/// Canned responses keyed by prompt kind; a missing key uses the stub behavior.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct StubScript {
    pub table_scoring: Option<String>,
    pub feature_ranking: Option<String>,
    pub descriptions: Option<String>,
}

impl StubScript {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| LlmError::Config(format!("stub script {}: {e}", path.as_ref().display())))?;
        serde_json::from_str(&text).map_err(|e| LlmError::Config(format!("stub script: {e}")))
    }

    fn get(&self, kind: PromptKind) -> Option<&str> {
        match kind {
            PromptKind::TableScoring => self.table_scoring.as_deref(),
            PromptKind::FeatureRanking => self.feature_ranking.as_deref(),
            PromptKind::Descriptions => self.descriptions.as_deref(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StubBehavior {
    /// Token-overlap scoring of tables and features against the target name.
    #[default]
    Heuristic,
    /// Every table scores 50 and features come back in prompt order.
    Echo,
}

#[derive(Debug, Clone, Default)]
pub struct StubProvider {
    script: StubScript,
    behavior: StubBehavior,
}

impl StubProvider {
    pub fn heuristic() -> Self {
        StubProvider::default()
    }

    pub fn echo() -> Self {
        StubProvider { script: StubScript::default(), behavior: StubBehavior::Echo }
    }

    pub fn scripted(script: StubScript) -> Self {
        StubProvider { script, behavior: StubBehavior::Heuristic }
    }

    pub fn with_behavior(mut self, behavior: StubBehavior) -> Self {
        self.behavior = behavior;
        self
    }

    fn respond(&self, prompt: &ChatPrompt) -> String {
        if let Some(text) = self.script.get(prompt.kind) {
            return text.to_string();
        }
        let body = match prompt.kind {
            PromptKind::Descriptions => describe(&prompt.user),
            PromptKind::TableScoring => score_tables(&prompt.user, self.behavior),
            PromptKind::FeatureRanking => rank_features(&prompt.user, self.behavior),
        };
        body.to_string()
    }
}

impl ChatProvider for StubProvider {
    fn name(&self) -> &str {
        "stub"
    }

    fn complete(&self, prompt: &ChatPrompt) -> Result<LlmResponse, LlmError> {
        Ok(LlmResponse { raw_text: self.respond(prompt), provider: "stub".into(), latency_ms: 0 })
    }
}

/// Lowercase word tokens; splits on non-alphanumerics and camelCase humps.
pub(crate) fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut prev_lower = false;
    for c in text.chars() {
        if !c.is_alphanumeric() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            prev_lower = false;
            continue;
        }
        if c.is_uppercase() && prev_lower && !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
        prev_lower = c.is_lowercase() || c.is_ascii_digit();
        cur.extend(c.to_lowercase());
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn overlap(target: &[String], text: &str) -> f64 {
    if target.is_empty() {
        return 0.0;
    }
    let words = tokens(text);
    let hits = target.iter().filter(|t| words.contains(t)).count();
    hits as f64 / target.len() as f64
}

fn target_tokens(user: &str) -> Vec<String> {
    user.lines().find_map(|l| l.strip_prefix("Target: ")).map(|t| tokens(t.trim_end_matches('.'))).unwrap_or_default()
}

fn score_tables(user: &str, behavior: StubBehavior) -> Json {
    let names: Vec<String> = user
        .lines()
        .find_map(|l| l.strip_prefix("Score all candidate tables: "))
        .and_then(|rest| serde_json::from_str(rest.trim()).ok())
        .unwrap_or_default();
    let target = target_tokens(user);
    let mut scores = Map::new();
    for name in names {
        let score = match behavior {
            StubBehavior::Echo => 50,
            StubBehavior::Heuristic => {
                let prefix = format!("{name}: [");
                let line = user.lines().find(|l| l.starts_with(&prefix)).unwrap_or(&name);
                (overlap(&target, line) * 100.0).round() as i64
            }
        };
        scores.insert(name, json!(score));
    }
    Json::Object(scores)
}

fn feature_names(user: &str) -> Vec<String> {
    let mut names = Vec::new();
    let mut rest = user;
    while let Some(i) = rest.find("{name: ") {
        rest = &rest[i + 7..];
        let mut stream = serde_json::Deserializer::from_str(rest).into_iter::<String>();
        if let Some(Ok(name)) = stream.next() {
            names.push(name);
        }
    }
    names
}

fn rank_features(user: &str, behavior: StubBehavior) -> Json {
    let mut names = feature_names(user);
    if behavior == StubBehavior::Heuristic {
        let target = target_tokens(user);
        // stable: prompt order breaks ties
        names.sort_by(|a, b| overlap(&target, b).total_cmp(&overlap(&target, a)));
    }
    json!(names)
}

fn describe(user: &str) -> Json {
    let mut out = Map::new();
    let lines = user.lines().skip_while(|l| !l.starts_with("Tables and features:")).skip(1);
    for line in lines {
        let Some((table, rest)) = line.split_once(": [") else { continue };
        let inner = rest.trim_end_matches(',').trim_end_matches(']');
        for entry in inner.split("), ") {
            let Some((feature, _ty)) = entry.rsplit_once(" (") else { continue };
            let words = tokens(feature).join(" ");
            let owner = tokens(table).join(" ");
            out.insert(format!("{table}.{feature}"), json!(format!("{words} recorded for each {owner}")));
        }
    }
    Json::Object(out)
}
