use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{write_columns, AugmentedTable, JexError};
use crate::corpus::{read_table_csv_typed, Column, ColumnType, Table};
use crate::pex::ScoredPath;

/// Where a consolidated foreign column came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// 1-based position of the winning path in the explored ranking.
    pub path_rank: usize,
    pub path: String,
    pub null_ratio: f64,
}

/// Base columns plus one version of every foreign feature reached by any path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsolidatedTable {
    pub base_width: usize,
    pub columns: Vec<Column>,
    /// Keyed by foreign column name, in column order.
    pub provenance: IndexMap<String, Provenance>,
}

impl ConsolidatedTable {
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

    /// Writes `consolidated.csv` and `consolidation.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), JexError> {
        write_columns(&dir.join("consolidated.csv"), &self.columns)?;
        let json_path = dir.join("consolidation.json");
        let meta = Manifest {
            base_width: self.base_width,
            columns: self.columns.iter().map(|c| ColumnSpec { name: c.name.clone(), ty: c.ty }).collect(),
            provenance: self.provenance.clone(),
        };
        let text = serde_json::to_string_pretty(&meta).expect("manifest serializes");
        std::fs::write(&json_path, text).map_err(|source| JexError::Io { path: json_path.display().to_string(), source })
    }

    /// Reads back what [`ConsolidatedTable::write`] produced, with the original column types.
    pub fn read(dir: &Path) -> Result<Self, JexError> {
        let json_path = dir.join("consolidation.json");
        let io_err = |source| JexError::Io { path: json_path.display().to_string(), source };
        let text = std::fs::read_to_string(&json_path).map_err(io_err)?;
        let meta: Manifest = serde_json::from_str(&text).map_err(|e| io_err(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
        let types: Vec<ColumnType> = meta.columns.iter().map(|c| c.ty).collect();
        let table = read_table_csv_typed(dir.join("consolidated.csv"), "consolidated", &types)?;
        let names_match = table.columns().iter().map(|c| c.name.as_str()).eq(meta.columns.iter().map(|c| c.name.as_str()));
        if !names_match || meta.base_width > table.columns().len() {
            return Err(JexError::Misaligned { expected: meta.columns.len(), found: table.columns().len() });
        }
        Ok(ConsolidatedTable { base_width: meta.base_width, columns: table.columns().to_vec(), provenance: meta.provenance })
    }
}

#[derive(Serialize, Deserialize)]
struct ColumnSpec {
    name: String,
    #[serde(rename = "type")]
    ty: ColumnType,
}

/// Contents of `consolidation.json`.
#[derive(Serialize, Deserialize)]
struct Manifest {
    base_width: usize,
    columns: Vec<ColumnSpec>,
    provenance: IndexMap<String, Provenance>,
}

fn null_ratio(c: &Column) -> f64 {
    c.null_count() as f64 / c.values.len().max(1) as f64
}

/// Column-wise merge of per-path augmented tables. `augmented[i]` was
/// materialized from `scores[i]`, and `scores` is in rank order.
///
/// A feature reached by several paths keeps the version with the lowest null
/// ratio, then the higher path score, then the better rank. Foreign columns
/// appear in order of first occurrence across the ranked inputs.
pub fn consolidate(base: &Table, augmented: &[AugmentedTable], scores: &[ScoredPath]) -> Result<ConsolidatedTable, JexError> {
    if augmented.len() != scores.len() {
        return Err(JexError::Misaligned { expected: scores.len(), found: augmented.len() });
    }
    let rows = base.num_rows();
    for a in augmented {
        if a.num_rows() != rows {
            return Err(JexError::Misaligned { expected: rows, found: a.num_rows() });
        }
    }

    // feature -> (winning input index, null ratio)
    let mut winners: IndexMap<&str, (usize, f64)> = IndexMap::new();
    for (i, a) in augmented.iter().enumerate() {
        for c in a.foreign_columns() {
            let ratio = null_ratio(c);
            match winners.get_mut(c.name.as_str()) {
                None => {
                    winners.insert(&c.name, (i, ratio));
                }
                Some(w) => {
                    let better = ratio < w.1 || (ratio == w.1 && scores[i].score > scores[w.0].score);
                    if better {
                        *w = (i, ratio);
                    }
                }
            }
        }
    }

    let mut columns: Vec<Column> = base.columns().to_vec();
    let mut provenance = IndexMap::new();
    for (name, (i, ratio)) in winners {
        let col = augmented[i].column(name).expect("winner holds the column").clone();
        columns.push(col);
        provenance.insert(name.to_string(), Provenance { path_rank: i + 1, path: scores[i].path.to_string(), null_ratio: ratio });
    }
    Ok(ConsolidatedTable { base_width: base.columns().len(), columns, provenance })
}
