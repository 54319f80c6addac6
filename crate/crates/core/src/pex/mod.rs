//! Path exploration: semantic table scoring plus statistical hop metrics,
//! combined into one normalized score per join path, with a bounded top-π search.

mod explore;
mod scoring;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, JoinEdge};

pub use explore::{enumerate_paths, explore, ExploreOutcome};
pub use scoring::{
    build_table_scoring_prompt, build_table_scoring_prompt_for, prefilter_tables, schema_text, score_tables, TABLE_SCORING_SYSTEM,
};

#[derive(Debug, Error)]
pub enum PexError {
    #[error("no join edge {anchor}.{anchor_column} {direction} {lookup}.{lookup_column}")]
    UnknownEdge { anchor: String, anchor_column: String, lookup: String, lookup_column: String, direction: Direction },
    #[error("weights must be non-negative and sum to 1 (got {0}, {1}, {2})")]
    InvalidWeights(f64, f64, f64),
    #[error("invalid exploration parameters: {0}")]
    InvalidConfig(String),
    #[error("invalid join path: {0}")]
    InvalidPath(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

/// Traversal direction of a hop relative to the declared FK edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Anchor holds the FK, lookup holds the referenced key.
    Forward,
    /// Anchor holds the referenced key, lookup holds the FK.
    Reverse,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "->",
            Direction::Reverse => "<-",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Hop {
    pub anchor_column: String,
    pub lookup_column: String,
    pub direction: Direction,
}

impl Hop {
    /// The graph edge this hop traverses between `anchor` and `lookup`.
    pub fn edge(&self, anchor: &str, lookup: &str) -> JoinEdge {
        match self.direction {
            Direction::Forward => JoinEdge {
                from_table: anchor.into(),
                from_column: self.anchor_column.clone(),
                to_table: lookup.into(),
                to_column: self.lookup_column.clone(),
            },
            Direction::Reverse => JoinEdge {
                from_table: lookup.into(),
                from_column: self.lookup_column.clone(),
                to_table: anchor.into(),
                to_column: self.anchor_column.clone(),
            },
        }
    }
}

/// A simple chain `tables[0] (base) → tables[1] → …`, `hops[i]` linking `tables[i]` to `tables[i+1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JoinPath {
    pub tables: Vec<String>,
    pub hops: Vec<Hop>,
}

impl JoinPath {
    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// `(anchor, lookup, hop)` triples in path order.
    pub fn steps(&self) -> impl Iterator<Item = (&str, &str, &Hop)> {
        self.tables.windows(2).zip(&self.hops).map(|(w, h)| (w[0].as_str(), w[1].as_str(), h))
    }

    /// Rooted at the base, acyclic, at least two tables, every hop a graph edge.
    pub fn validate(&self, corpus: &Corpus) -> Result<(), PexError> {
        if self.tables.len() < 2 || self.hops.len() + 1 != self.tables.len() {
            return Err(PexError::InvalidPath(format!("{} tables with {} hops", self.tables.len(), self.hops.len())));
        }
        if self.tables[0] != corpus.base_table_name() {
            return Err(PexError::InvalidPath(format!("path starts at `{}`, not the base table", self.tables[0])));
        }
        let distinct: BTreeSet<&String> = self.tables.iter().collect();
        if distinct.len() != self.tables.len() {
            return Err(PexError::InvalidPath(format!("path revisits a table: {}", self)));
        }
        for (anchor, lookup, hop) in self.steps() {
            require_edge(corpus, anchor, lookup, hop)?;
        }
        Ok(())
    }
}

impl fmt::Display for JoinPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tables[0])?;
        for (_, lookup, hop) in self.steps() {
            write!(f, " -[{}{}{}]-> {lookup}", hop.anchor_column, hop.direction, hop.lookup_column)?;
        }
        Ok(())
    }
}

fn require_edge(corpus: &Corpus, anchor: &str, lookup: &str, hop: &Hop) -> Result<(), PexError> {
    let edge = hop.edge(anchor, lookup);
    if corpus.edges().contains(&edge) {
        Ok(())
    } else {
        Err(PexError::UnknownEdge {
            anchor: anchor.into(),
            anchor_column: hop.anchor_column.clone(),
            lookup: lookup.into(),
            lookup_column: hop.lookup_column.clone(),
            direction: hop.direction,
        })
    }
}

/// Normalized semantic relevance per candidate table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TableScoreSet {
    pub scores: BTreeMap<String, f64>,
    pub prefiltered_out: BTreeSet<String>,
    /// True when the model response was unusable and the uniform fallback applied.
    #[serde(default)]
    pub fallback: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl TableScoreSet {
    /// Every candidate table scored `value`.
    pub fn uniform(corpus: &Corpus, value: f64) -> Self {
        TableScoreSet { scores: corpus.candidate_tables().map(|t| (t.name.clone(), value)).collect(), ..Default::default() }
    }

    /// Score of a table; unknown tables score 0.
    pub fn get(&self, table: &str) -> f64 {
        self.scores.get(table).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Weights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self, PexError> {
        let ok = [alpha, beta, gamma].iter().all(|w| w.is_finite() && *w >= 0.0) && (alpha + beta + gamma - 1.0).abs() <= 1e-9;
        if ok {
            Ok(Weights { alpha, beta, gamma })
        } else {
            Err(PexError::InvalidWeights(alpha, beta, gamma))
        }
    }

    pub fn validate(&self) -> Result<(), PexError> {
        Weights::new(self.alpha, self.beta, self.gamma).map(|_| ())
    }
}

impl Default for Weights {
    fn default() -> Self {
        Weights { alpha: 1.0 / 3.0, beta: 1.0 / 3.0, gamma: 1.0 / 3.0 }
    }
}

/// Per-hop join feasibility metrics, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopStats {
    /// Non-null fraction of the anchor-side join column.
    pub cov: f64,
    /// Distinct lookup keys per lookup row.
    pub uniq: f64,
    /// Smaller over larger table size.
    pub sratio: f64,
}

impl HopStats {
    pub fn weighted(&self, w: &Weights) -> f64 {
        w.alpha * self.cov + w.beta * self.uniq + w.gamma * self.sratio
    }
}

/// Metrics for one hop computed from cached column statistics only.
pub fn hop_stats(corpus: &Corpus, anchor: &str, lookup: &str, hop: &Hop) -> Result<HopStats, PexError> {
    require_edge(corpus, anchor, lookup, hop)?;
    let anchor_stats = corpus.column_stats(anchor, &hop.anchor_column)?;
    let lookup_stats = corpus.column_stats(lookup, &hop.lookup_column)?;
    let (na, nl) = (anchor_stats.row_count, lookup_stats.row_count);
    let uniq = if nl == 0 { 0.0 } else { lookup_stats.distinct_count as f64 / nl as f64 };
    let sratio = if na == 0 || nl == 0 { 0.0 } else { na.min(nl) as f64 / na.max(nl) as f64 };
    Ok(HopStats { cov: 1.0 - anchor_stats.null_rate, uniq, sratio })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPath {
    #[serde(flatten)]
    pub path: JoinPath,
    pub s_sem: f64,
    pub s_stat: f64,
    pub score: f64,
    pub per_hop: Vec<HopStats>,
}

impl ScoredPath {
    /// Combines precomputed parts: `table_scores[i]` belongs to `path.tables[i + 1]`.
    pub fn from_parts(path: JoinPath, table_scores: &[f64], per_hop: Vec<HopStats>, weights: &Weights) -> Self {
        debug_assert_eq!(table_scores.len(), per_hop.len());
        let s_sem: f64 = table_scores.iter().sum();
        let s_stat: f64 = per_hop.iter().map(|h| h.weighted(weights)).sum();
        let score = (s_sem + s_stat) / (2.0 * per_hop.len() as f64);
        ScoredPath { path, s_sem, s_stat, score, per_hop }
    }

    /// Rank order: higher score, then shorter, then table sequence, then hops.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(self.path.len().cmp(&other.path.len()))
            .then_with(|| self.path.tables.cmp(&other.path.tables))
            .then_with(|| self.path.hops.cmp(&other.path.hops))
    }
}

/// Scores a path against the corpus.
pub fn path_score(corpus: &Corpus, path: &JoinPath, table_scores: &TableScoreSet, weights: &Weights) -> Result<ScoredPath, PexError> {
    weights.validate()?;
    path.validate(corpus)?;
    let per_hop = path.steps().map(|(a, l, h)| hop_stats(corpus, a, l, h)).collect::<Result<Vec<_>, _>>()?;
    let sem: Vec<f64> = path.tables[1..].iter().map(|t| table_scores.get(t)).collect();
    Ok(ScoredPath::from_parts(path.clone(), &sem, per_hop, weights))
}

pub fn write_paths_json(path: &Path, paths: &[ScoredPath]) -> Result<(), PexError> {
    let text = serde_json::to_string_pretty(paths).map_err(|source| PexError::Json { path: path.display().to_string(), source })?;
    std::fs::write(path, text).map_err(|source| PexError::Io { path: path.display().to_string(), source })
}

pub fn read_paths_json(path: &Path) -> Result<Vec<ScoredPath>, PexError> {
    let text = std::fs::read_to_string(path).map_err(|source| PexError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|source| PexError::Json { path: path.display().to_string(), source })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::corpus::{Column, ColumnType, Table, Task, Value};

    fn ints(name: &str, v: &[Option<i64>]) -> Column {
        Column::new(name, ColumnType::Integer, v.iter().map(|x| x.map_or(Value::Null, Value::Int)).collect())
    }

    /// base(10 rows, fk with 2 nulls) -> lookup(10 rows, 5 distinct ids).
    pub(crate) fn two_table() -> Corpus {
        let fk: Vec<Option<i64>> = (0..10).map(|i| if i < 2 { None } else { Some(i % 5) }).collect();
        let y: Vec<Option<i64>> = (0..10).map(|i| Some(i % 2)).collect();
        let base = Table::new("base", vec![ints("fk", &fk), ints("y", &y)]).unwrap();
        let ids: Vec<Option<i64>> = (0..10).map(|i| Some(i / 2)).collect();
        let lookup = Table::new("lookup", vec![ints("id", &ids), ints("v", &ids)]).unwrap();
        let edge = JoinEdge { from_table: "base".into(), from_column: "fk".into(), to_table: "lookup".into(), to_column: "id".into() };
        Corpus::new(vec![base, lookup], vec![edge], "base", "y", Task::Classification).unwrap()
    }

    fn forward(a: &str, l: &str) -> Hop {
        Hop { anchor_column: a.into(), lookup_column: l.into(), direction: Direction::Forward }
    }

    #[test]
    fn hop_metrics_by_hand() {
        let c = two_table();
        let s = hop_stats(&c, "base", "lookup", &forward("fk", "id")).unwrap();
        assert!((s.cov - 0.8).abs() < 1e-12);
        assert!((s.uniq - 0.5).abs() < 1e-12);
        assert_eq!(s.sratio, 1.0);

        let rev = Hop { anchor_column: "id".into(), lookup_column: "fk".into(), direction: Direction::Reverse };
        let r = hop_stats(&c, "lookup", "base", &rev).unwrap();
        assert_eq!(r.cov, 1.0);
        assert!((r.uniq - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unknown_edge_rejected() {
        let c = two_table();
        assert!(matches!(hop_stats(&c, "base", "lookup", &forward("y", "id")), Err(PexError::UnknownEdge { .. })));
    }

    #[test]
    fn substitution_examples() {
        let p = JoinPath { tables: vec!["b".into(), "t".into()], hops: vec![forward("x", "y")] };
        let ones = HopStats { cov: 1.0, uniq: 1.0, sratio: 1.0 };
        let s = ScoredPath::from_parts(p.clone(), &[0.8], vec![ones], &Weights::default());
        assert!((s.s_sem - 0.8).abs() < 1e-12 && (s.s_stat - 1.0).abs() < 1e-12 && (s.score - 0.9).abs() < 1e-12);
        let zeros = HopStats { cov: 0.0, uniq: 0.0, sratio: 0.0 };
        assert_eq!(ScoredPath::from_parts(p, &[0.0], vec![zeros], &Weights::default()).score, 0.0);
    }

    #[test]
    fn weights_validated() {
        assert!(Weights::new(0.5, 0.5, 0.0).is_ok());
        assert!(Weights::new(0.5, 0.5, 0.1).is_err());
        assert!(Weights::new(1.5, -0.5, 0.0).is_err());
        Weights::default().validate().unwrap();
    }

    #[test]
    fn path_validation() {
        let c = two_table();
        let good = JoinPath { tables: vec!["base".into(), "lookup".into()], hops: vec![forward("fk", "id")] };
        good.validate(&c).unwrap();
        let scored = path_score(&c, &good, &TableScoreSet::uniform(&c, 1.0), &Weights::default()).unwrap();
        assert!((scored.score - (1.0 + (0.8 + 0.5 + 1.0) / 3.0) / 2.0).abs() < 1e-12);
        let wrong_root = JoinPath { tables: vec!["lookup".into(), "base".into()], hops: vec![forward("id", "fk")] };
        assert!(wrong_root.validate(&c).is_err());
    }

    #[test]
    fn paths_json_round_trip() {
        let c = two_table();
        let p = JoinPath { tables: vec!["base".into(), "lookup".into()], hops: vec![forward("fk", "id")] };
        let s = path_score(&c, &p, &TableScoreSet::uniform(&c, 0.37), &Weights::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("paths.json");
        write_paths_json(&f, std::slice::from_ref(&s)).unwrap();
        assert_eq!(read_paths_json(&f).unwrap(), vec![s]);
    }
}
