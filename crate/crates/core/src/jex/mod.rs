//! Join execution: materializes join paths as base-aligned augmented tables.
//!
//! Both executors share one hash left-join primitive and the same
//! first-occurrence deduplication of every lookup table, so they produce
//! identical cells. They differ only in plan: the binary executor joins the
//! growing base-width relation hop by hop, while suffix-Yannakakis reduces the
//! suffix tables to the rows reachable from the base, joins those small tables
//! among themselves and left-joins the result to the base once.

mod bench;
mod consolidate;

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Column, ColumnType, Corpus, CorpusError, JoinKey, Table, Value};
use crate::pex::{JoinPath, PexError};

pub use bench::{bench_join_strategies, BenchEntry, BenchReport, LengthSummary};
pub use consolidate::{consolidate, ConsolidatedTable, Provenance};

#[derive(Debug, Error)]
pub enum JexError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Path(#[from] PexError),
    #[error("output column `{0}` would appear twice")]
    ColumnCollision(String),
    #[error("augmented tables are misaligned: expected {expected} rows, found {found}")]
    Misaligned { expected: usize, found: usize },
    #[error("executors disagree on path {0}")]
    NotEquivalent(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Executor {
    #[default]
    Yannakakis,
    Binary,
}

impl Executor {
    pub fn run(self, corpus: &Corpus, path: &JoinPath) -> Result<AugmentedTable, JexError> {
        match self {
            Executor::Binary => binary_left_join_path(corpus, path),
            Executor::Yannakakis => suffix_yannakakis(corpus, path),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Executor::Yannakakis => "yannakakis",
            Executor::Binary => "binary",
        }
    }
}

impl std::str::FromStr for Executor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "yannakakis" => Ok(Executor::Yannakakis),
            "binary" => Ok(Executor::Binary),
            other => Err(format!("unknown executor `{other}` (expected yannakakis or binary)")),
        }
    }
}

/// Row counts of the relations an executor materialized.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct JoinTrace {
    /// Per hop: rows of the relation produced for that hop. For the binary
    /// executor this is the running join result; for suffix-Yannakakis it is
    /// the reduced, deduplicated suffix table.
    pub intermediate_rows: Vec<usize>,
}

impl JoinTrace {
    pub fn total(&self) -> usize {
        self.intermediate_rows.iter().sum()
    }
}

/// Base columns followed by `<table>.<column>` foreign columns, row-aligned to the base.
#[derive(Debug, Clone)]
pub struct AugmentedTable {
    pub path: JoinPath,
    pub base_width: usize,
    pub columns: Vec<Column>,
    pub trace: JoinTrace,
}

impl PartialEq for AugmentedTable {
    /// Path, layout and cells; the trace is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.path == other.path && self.base_width == other.base_width && self.columns == other.columns
    }
}

impl AugmentedTable {
    pub fn num_rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    pub fn base_columns(&self) -> &[Column] {
        &self.columns[..self.base_width]
    }

    pub fn foreign_columns(&self) -> &[Column] {
        &self.columns[self.base_width..]
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), JexError> {
        write_columns(path, &self.columns)
    }
}

pub fn write_columns(path: &Path, columns: &[Column]) -> Result<(), JexError> {
    let named: Vec<(&str, &[Value])> = columns.iter().map(|c| (c.name.as_str(), c.values.as_slice())).collect();
    Ok(crate::corpus::write_csv(path, &named)?)
}

/// Row indices keeping the first row per non-null key, in row order.
pub fn first_occurrence_rows(keys: &[Value]) -> Vec<usize> {
    let mut seen = HashSet::with_capacity(keys.len());
    keys.iter().enumerate().filter_map(|(i, v)| v.join_key().filter(|k| seen.insert(k.clone())).map(|_| i)).collect()
}

/// One row per distinct non-null key, the earliest by row order; null keys dropped.
pub fn dedup_on_key(table: &Table, key: &str) -> Result<Table, JexError> {
    let rows = first_occurrence_rows(&table.require_column(key)?.values);
    Ok(take_rows(table, &rows))
}

fn take_rows(table: &Table, rows: &[usize]) -> Table {
    let columns =
        table.columns().iter().map(|c| Column::new(c.name.clone(), c.ty, rows.iter().map(|&r| c.values[r].clone()).collect())).collect();
    Table::new(table.name.clone(), columns).expect("row subset of a valid table is valid")
}

/// Owned columnar relation with internal column names.
struct Frame {
    names: Vec<String>,
    types: Vec<ColumnType>,
    cols: Vec<Vec<Value>>,
}

/// Borrowed columnar relation.
struct View<'a> {
    names: Vec<String>,
    types: Vec<ColumnType>,
    cols: Vec<&'a [Value]>,
}

impl Frame {
    fn view(&self) -> View<'_> {
        View { names: self.names.clone(), types: self.types.clone(), cols: self.cols.iter().map(Vec::as_slice).collect() }
    }

    fn index(&self, name: &str) -> usize {
        self.names.iter().position(|n| n == name).expect("join column present in frame")
    }
}

impl<'a> View<'a> {
    /// Columns of `table`, named plainly or `<table>.<column>`.
    fn of(table: &'a Table, qualify: bool) -> Self {
        let name = |c: &Column| if qualify { format!("{}.{}", table.name, c.name) } else { c.name.clone() };
        View {
            names: table.columns().iter().map(name).collect(),
            types: table.columns().iter().map(|c| c.ty).collect(),
            cols: table.columns().iter().map(|c| c.values.as_slice()).collect(),
        }
    }

    fn rows(&self) -> usize {
        self.cols.first().map_or(0, |c| c.len())
    }
}

/// Hash left join against a right side with unique keys. Every left row is
/// kept once; unmatched rows get nulls in every right column.
fn left_join(left: &View, left_key: usize, right: &View, right_key: usize) -> Frame {
    let mut index: HashMap<JoinKey, usize> = HashMap::with_capacity(right.rows());
    for (i, v) in right.cols[right_key].iter().enumerate() {
        if let Some(k) = v.join_key() {
            index.entry(k).or_insert(i);
        }
    }
    let matches: Vec<Option<usize>> = left.cols[left_key].iter().map(|v| v.join_key().and_then(|k| index.get(&k).copied())).collect();

    let mut names = left.names.clone();
    names.extend(right.names.iter().cloned());
    let mut types = left.types.clone();
    types.extend(right.types.iter().copied());
    let mut cols: Vec<Vec<Value>> = left.cols.iter().map(|c| c.to_vec()).collect();
    for c in &right.cols {
        cols.push(matches.iter().map(|m| m.map_or(Value::Null, |r| c[r].clone())).collect());
    }
    Frame { names, types, cols }
}

fn qualified(table: &str, column: &str) -> String {
    format!("{table}.{column}")
}

/// Drops each lookup table's join-key column and checks name uniqueness.
fn finish(frame: Frame, corpus: &Corpus, path: &JoinPath, trace: JoinTrace) -> Result<AugmentedTable, JexError> {
    let base_width = corpus.base_table().columns().len();
    let hidden: HashSet<String> = path.steps().map(|(_, lookup, hop)| qualified(lookup, &hop.lookup_column)).collect();
    let mut seen = HashSet::new();
    let mut columns = Vec::with_capacity(frame.cols.len());
    for (i, ((name, ty), values)) in frame.names.into_iter().zip(frame.types).zip(frame.cols).enumerate() {
        if i >= base_width && hidden.contains(&name) {
            continue;
        }
        if !seen.insert(name.clone()) {
            return Err(JexError::ColumnCollision(name));
        }
        columns.push(Column::new(name, ty, values));
    }
    Ok(AugmentedTable { path: path.clone(), base_width, columns, trace })
}

fn check_columns(corpus: &Corpus, path: &JoinPath) -> Result<(), JexError> {
    path.validate(corpus)?;
    for (anchor, lookup, hop) in path.steps() {
        corpus.table(anchor)?.require_column(&hop.anchor_column)?;
        corpus.table(lookup)?.require_column(&hop.lookup_column)?;
    }
    Ok(())
}

/// Baseline: `R_0 = base`, then `R_i = R_{i-1} ⟕ dedup(T_i)` materialized in full per hop.
pub fn binary_left_join_path(corpus: &Corpus, path: &JoinPath) -> Result<AugmentedTable, JexError> {
    check_columns(corpus, path)?;
    let base = corpus.base_table();
    let mut frame: Option<Frame> = None;
    let mut trace = JoinTrace::default();
    for (anchor, lookup, hop) in path.steps() {
        let right = dedup_on_key(corpus.table(lookup)?, &hop.lookup_column)?;
        let right_view = View::of(&right, true);
        let right_key = right.column_index(&hop.lookup_column).expect("checked");
        let next = match &frame {
            None => {
                let left = View::of(base, false);
                let left_key = base.column_index(&hop.anchor_column).expect("checked");
                left_join(&left, left_key, &right_view, right_key)
            }
            Some(f) => {
                let left_key = f.index(&qualified(anchor, &hop.anchor_column));
                left_join(&f.view(), left_key, &right_view, right_key)
            }
        };
        trace.intermediate_rows.push(next.cols[0].len());
        frame = Some(next);
    }
    finish(frame.expect("paths have at least one hop"), corpus, path, trace)
}

/// Per suffix table, the rows of its first-occurrence dedup whose key is
/// referenced by the previous reduced relation (the base for the first table).
///
/// Indices refer to the physical rows of each table. A deduplicated row is
/// dropped only when no row upstream can reach it, so the reduction is
/// invisible under left-join semantics.
pub fn reduce_suffix(corpus: &Corpus, path: &JoinPath) -> Result<Vec<Vec<usize>>, JexError> {
    check_columns(corpus, path)?;
    let mut reduced: Vec<Vec<usize>> = Vec::with_capacity(path.hops.len());
    for (i, (anchor, lookup, hop)) in path.steps().enumerate() {
        let anchor_values = &corpus.table(anchor)?.require_column(&hop.anchor_column)?.values;
        let wanted: HashSet<JoinKey> = match i {
            0 => anchor_values.iter().filter_map(Value::join_key).collect(),
            _ => reduced[i - 1].iter().filter_map(|&r| anchor_values[r].join_key()).collect(),
        };
        let keys = &corpus.table(lookup)?.require_column(&hop.lookup_column)?.values;
        let mut seen: HashSet<JoinKey> = HashSet::with_capacity(wanted.len());
        let rows = keys
            .iter()
            .enumerate()
            .filter_map(|(r, v)| {
                let k = v.join_key()?;
                (wanted.contains(&k) && seen.insert(k)).then_some(r)
            })
            .collect();
        reduced.push(rows);
    }
    Ok(reduced)
}

/// Suffix-Yannakakis: reduce the suffix top-down from the base keys, left-chain
/// the reduced tables into `S` (unique on the first suffix table's key), then
/// `base ⟕ S`. A single-hop path runs the binary plan unchanged.
pub fn suffix_yannakakis(corpus: &Corpus, path: &JoinPath) -> Result<AugmentedTable, JexError> {
    if path.hops.len() <= 1 {
        return binary_left_join_path(corpus, path);
    }
    let reduced_rows = reduce_suffix(corpus, path)?;
    let reduced: Vec<Table> = path
        .tables
        .iter()
        .skip(1)
        .zip(&reduced_rows)
        .map(|(t, rows)| Ok(take_rows(corpus.table(t)?, rows)))
        .collect::<Result<_, JexError>>()?;
    let trace = JoinTrace { intermediate_rows: reduced.iter().map(Table::num_rows).collect() };

    let steps: Vec<_> = path.steps().collect();
    let first = View::of(&reduced[0], true);
    let mut suffix =
        Frame { names: first.names.clone(), types: first.types.clone(), cols: first.cols.iter().map(|c| c.to_vec()).collect() };
    for (i, (anchor, _, hop)) in steps.iter().enumerate().skip(1) {
        let right = View::of(&reduced[i], true);
        let right_key = reduced[i].column_index(&hop.lookup_column).expect("checked");
        let left_key = suffix.index(&qualified(anchor, &hop.anchor_column));
        suffix = left_join(&suffix.view(), left_key, &right, right_key);
    }

    let base = corpus.base_table();
    let (_, first_lookup, first_hop) = steps[0];
    let base_key = base.column_index(&first_hop.anchor_column).expect("checked");
    let s_key = suffix.index(&qualified(first_lookup, &first_hop.lookup_column));
    let frame = left_join(&View::of(base, false), base_key, &suffix.view(), s_key);
    finish(frame, corpus, path, trace)
}

/// Materializes every path in parallel; output order follows `paths`.
pub fn materialize_paths(corpus: &Corpus, paths: &[JoinPath], executor: Executor) -> Result<Vec<AugmentedTable>, JexError> {
    paths.par_iter().map(|p| executor.run(corpus, p)).collect()
}
