//! Loaded relational corpus: typed tables, the directed PK–FK join graph and
//! memoized per-column statistics.

mod io;
mod value;

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load_dataset, read_table_csv, read_table_csv_typed, write_csv, write_dataset, Manifest, ManifestEdge};
pub use value::{infer_type, parse_field, ColumnType, JoinKey, Value, NULL_LITERALS};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing manifest {0}")]
    MissingManifest(String),
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown column `{column}` in table `{table}`")]
    UnknownColumn { table: String, column: String },
    #[error("duplicate table name `{0}`")]
    DuplicateTable(String),
    #[error("duplicate column `{column}` in table `{table}`")]
    DuplicateColumn { table: String, column: String },
    #[error("self-loop edge on table `{0}`")]
    SelfLoop(String),
    #[error("table `{table}`: row {row} has {found} values, expected {expected}")]
    RaggedRow { table: String, row: usize, found: usize, expected: usize },
    #[error("classification target `{target}` has {classes} distinct non-null value(s); need at least 2")]
    TooFewClasses { target: String, classes: usize },
    #[error("unreadable CSV for table `{table}`: {source}")]
    Csv {
        table: String,
        #[source]
        source: csv::Error,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Prediction task of the base table's target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Classification => "classification",
            Task::Regression => "regression",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Counts over the physical rows of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ColumnStats {
    pub row_count: usize,
    pub null_count: usize,
    /// Distinct non-null values, compared as canonical join keys.
    pub distinct_count: usize,
    pub null_rate: f64,
}

impl ColumnStats {
    pub fn compute(values: &[Value]) -> Self {
        let mut distinct = HashSet::new();
        let mut null_count = 0;
        for v in values {
            match v.join_key() {
                Some(k) => {
                    distinct.insert(k);
                }
                None => null_count += 1,
            }
        }
        let row_count = values.len();
        ColumnStats { row_count, null_count, distinct_count: distinct.len(), null_rate: null_count as f64 / row_count.max(1) as f64 }
    }
}

#[derive(Debug, Clone)]
pub struct Column {
    pub name: String,
    pub ty: ColumnType,
    pub values: Vec<Value>,
    stats: OnceLock<ColumnStats>,
}

impl Column {
    pub fn new(name: impl Into<String>, ty: ColumnType, values: Vec<Value>) -> Self {
        Column { name: name.into(), ty, values, stats: OnceLock::new() }
    }

    /// Memoized statistics; concurrent first calls compute identical values.
    pub fn stats(&self) -> ColumnStats {
        *self.stats.get_or_init(|| ColumnStats::compute(&self.values))
    }

    pub fn null_count(&self) -> usize {
        self.stats().null_count
    }
}

impl PartialEq for Column {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.ty == other.ty && self.values == other.values
    }
}

/// A named table stored column-wise. Row `i` of every column is physical row `i`
/// of the source file; that order is the table's stable `row_order`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    columns: Vec<Column>,
    rows: usize,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Result<Self, CorpusError> {
        let name = name.into();
        let rows = columns.first().map_or(0, |c| c.values.len());
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(CorpusError::DuplicateColumn { table: name, column: c.name.clone() });
            }
            if c.values.len() != rows {
                return Err(CorpusError::RaggedRow { table: name, row: rows.min(c.values.len()), found: c.values.len(), expected: rows });
            }
        }
        Ok(Table { name, columns, rows })
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn cell(&self, row: usize, column: usize) -> &Value {
        &self.columns[column].values[row]
    }

    pub fn require_column(&self, name: &str) -> Result<&Column, CorpusError> {
        self.column(name).ok_or_else(|| CorpusError::UnknownColumn { table: self.name.clone(), column: name.to_string() })
    }
}

/// Directed edge: `from_table.from_column` is a foreign key referencing
/// `to_table.to_column`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JoinEdge {
    pub from_table: String,
    pub from_column: String,
    pub to_table: String,
    pub to_column: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Violation,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphDiagnostic {
    pub severity: Severity,
    pub edge: usize,
    pub message: String,
}

/// Immutable dataset: tables in manifest order, join graph, base table and task.
#[derive(Debug, Clone)]
pub struct Corpus {
    tables: IndexMap<String, Table>,
    edges: Vec<JoinEdge>,
    base_table: String,
    target: String,
    task: Task,
    pub dataset_description: Option<String>,
    pub task_description: Option<String>,
}

impl Corpus {
    /// Builds and validates a corpus from in-memory tables.
    pub fn new(
        tables: Vec<Table>,
        edges: Vec<JoinEdge>,
        base_table: impl Into<String>,
        target: impl Into<String>,
        task: Task,
    ) -> Result<Self, CorpusError> {
        let mut map = IndexMap::with_capacity(tables.len());
        for t in tables {
            if map.contains_key(&t.name) {
                return Err(CorpusError::DuplicateTable(t.name));
            }
            map.insert(t.name.clone(), t);
        }
        let corpus = Corpus {
            tables: map,
            edges,
            base_table: base_table.into(),
            target: target.into(),
            task,
            dataset_description: None,
            task_description: None,
        };
        corpus.check()?;
        Ok(corpus)
    }

    pub fn with_descriptions(mut self, dataset_description: Option<String>, task_description: Option<String>) -> Self {
        self.dataset_description = dataset_description.filter(|s| !s.trim().is_empty());
        self.task_description = task_description.filter(|s| !s.trim().is_empty());
        self
    }

    fn check(&self) -> Result<(), CorpusError> {
        let base = self.table(&self.base_table)?;
        let target = base.require_column(&self.target)?;
        for e in &self.edges {
            if e.from_table == e.to_table {
                return Err(CorpusError::SelfLoop(e.from_table.clone()));
            }
            self.table(&e.from_table)?.require_column(&e.from_column)?;
            self.table(&e.to_table)?.require_column(&e.to_column)?;
        }
        if self.task == Task::Classification {
            let classes = target.stats().distinct_count;
            if classes < 2 {
                return Err(CorpusError::TooFewClasses { target: self.target.clone(), classes });
            }
        }
        Ok(())
    }

    pub fn table(&self, name: &str) -> Result<&Table, CorpusError> {
        self.tables.get(name).ok_or_else(|| CorpusError::UnknownTable(name.to_string()))
    }

    /// Tables in manifest order.
    pub fn tables(&self) -> impl Iterator<Item = &Table> {
        self.tables.values()
    }

    pub fn table_names(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }

    pub fn num_tables(&self) -> usize {
        self.tables.len()
    }

    pub fn edges(&self) -> &[JoinEdge] {
        &self.edges
    }

    pub fn base_table(&self) -> &Table {
        &self.tables[&self.base_table]
    }

    pub fn base_table_name(&self) -> &str {
        &self.base_table
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn target_column(&self) -> &Column {
        self.base_table().column(&self.target).expect("validated at construction")
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Candidate tables (every table except the base) in manifest order.
    pub fn candidate_tables(&self) -> impl Iterator<Item = &Table> {
        self.tables.values().filter(move |t| t.name != self.base_table)
    }

    /// Memoized statistics for `table.column`.
    pub fn column_stats(&self, table: &str, column: &str) -> Result<ColumnStats, CorpusError> {
        Ok(self.table(table)?.require_column(column)?.stats())
    }

    /// Reports type mismatches on edges (violations) and edges whose key value
    /// sets do not overlap (warnings).
    pub fn validate_graph(&self) -> Vec<GraphDiagnostic> {
        let mut out = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            let from = self.table(&e.from_table).and_then(|t| t.require_column(&e.from_column));
            let to = self.table(&e.to_table).and_then(|t| t.require_column(&e.to_column));
            let (from, to) = match (from, to) {
                (Ok(f), Ok(t)) => (f, t),
                (Err(err), _) | (_, Err(err)) => {
                    out.push(GraphDiagnostic { severity: Severity::Violation, edge: i, message: err.to_string() });
                    continue;
                }
            };
            if from.ty != to.ty {
                out.push(GraphDiagnostic {
                    severity: Severity::Violation,
                    edge: i,
                    message: format!(
                        "type mismatch: {}.{} is {} but {}.{} is {}",
                        e.from_table, e.from_column, from.ty, e.to_table, e.to_column, to.ty
                    ),
                });
                continue;
            }
            let keys: HashSet<JoinKey> = to.values.iter().filter_map(Value::join_key).collect();
            let overlaps = from.values.iter().filter_map(Value::join_key).any(|k| keys.contains(&k));
            if !overlaps {
                out.push(GraphDiagnostic {
                    severity: Severity::Warning,
                    edge: i,
                    message: format!(
                        "no overlapping key values between {}.{} and {}.{}",
                        e.from_table, e.from_column, e.to_table, e.to_column
                    ),
                });
            }
        }
        out
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, CorpusError> {
        load_dataset(dir)
    }
}
