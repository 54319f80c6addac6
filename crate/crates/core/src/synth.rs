//! Seeded synthetic corpora.
//!
//! Generation model for [`gen_synthetic`]:
//! * Tables `t0 .. t{n-1}`; `t0` is the base with a binary `target`.
//! * Chain: `t{i}.t{i+1}_id` references `t{i+1}.id`. Star: `t0.t{i}_id` references `t{i}.id`.
//! * Every table has `rows` rows with unique ids `0..rows`, two float decoys `d1`, `d2` and a
//!   five-letter categorical decoy `cat`.
//! * FKs out of the base draw from the first `max(1, round(selectivity * rows))` ids of
//!   their target (in shuffled order); other FKs draw uniformly. About 2% of FKs are null.
//! * Table `t{planted_hop}` (chain) or `t{planted_hop}` reached directly (star) carries `signal`,
//!   uniform on `[0, 1)`. A base row whose FK chain reaches that table gets
//!   `target = signal > 0.5`, flipped with probability 0.1; other rows get a fair coin.
//!   If every label comes out equal, the last one is flipped so both classes exist.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Column, ColumnType, Corpus, CorpusError, JoinEdge, Table, Task, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    #[default]
    Chain,
    Star,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub shape: Shape,
    pub tables: usize,
    pub rows: usize,
    pub selectivity: f64,
    pub seed: u64,
    /// Index of the table holding `signal`; clamped to `1..tables`.
    pub planted_hop: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec { shape: Shape::Chain, tables: 4, rows: 1000, selectivity: 0.2, seed: 0, planted_hop: 2 }
    }
}

const NULL_FK_RATE: f64 = 0.02;
const LABEL_NOISE: f64 = 0.1;
const CATEGORIES: [&str; 5] = ["alpha", "beta", "gamma", "delta", "omega"];

fn name(i: usize) -> String {
    format!("t{i}")
}

fn fk_name(i: usize) -> String {
    format!("t{i}_id")
}

/// Builds the corpus described in the module documentation.
pub fn gen_synthetic(spec: &SynthSpec) -> Result<Corpus, CorpusError> {
    let n = spec.tables.max(2);
    let rows = spec.rows.max(2);
    let hop = spec.planted_hop.clamp(1, n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // (referencing table, referenced table)
    let links: Vec<(usize, usize)> = match spec.shape {
        Shape::Chain => (0..n - 1).map(|i| (i, i + 1)).collect(),
        Shape::Star => (1..n).map(|i| (0, i)).collect(),
    };
    let pool = ((spec.selectivity * rows as f64).round() as usize).clamp(1, rows);

    let mut fks: HashMap<(usize, usize), Vec<Option<i64>>> = HashMap::new();
    for &(from, to) in &links {
        let mut ids: Vec<i64> = (0..rows as i64).collect();
        ids.shuffle(&mut rng);
        let choices = if from == 0 { &ids[..pool] } else { &ids[..] };
        let vals = (0..rows).map(|_| (!rng.gen_bool(NULL_FK_RATE)).then(|| *choices.choose(&mut rng).expect("non-empty"))).collect();
        fks.insert((from, to), vals);
    }
    let signal: Vec<f64> = (0..rows).map(|_| rng.gen()).collect();

    let mut target = Vec::with_capacity(rows);
    for r in 0..rows {
        let mut cur = Some(r);
        let route: Vec<(usize, usize)> = match spec.shape {
            Shape::Chain => links[..hop].to_vec(),
            Shape::Star => vec![(0, hop)],
        };
        for link in route {
            cur = cur.and_then(|row| fks[&link][row]).map(|id| id as usize);
        }
        let label = match cur {
            Some(row) => (signal[row] > 0.5) ^ rng.gen_bool(LABEL_NOISE),
            None => rng.gen_bool(0.5),
        };
        target.push(Value::Int(i64::from(label)));
    }
    if target.iter().all(|v| *v == target[0]) {
        let last = target.last_mut().expect("rows >= 2");
        *last = Value::Int(1 - matches!(last, Value::Int(1)) as i64);
    }

    let mut tables = Vec::with_capacity(n);
    for t in 0..n {
        let mut cols = vec![Column::new("id", ColumnType::Integer, (0..rows as i64).map(Value::Int).collect())];
        for &(from, to) in links.iter().filter(|l| l.0 == t) {
            let vals = fks[&(from, to)].iter().map(|v| v.map_or(Value::Null, Value::Int)).collect();
            cols.push(Column::new(fk_name(to), ColumnType::Integer, vals));
        }
        for d in ["d1", "d2"] {
            cols.push(Column::new(d, ColumnType::Float, (0..rows).map(|_| Value::Float(rng.gen::<f64>())).collect()));
        }
        cols.push(Column::new(
            "cat",
            ColumnType::Text,
            (0..rows).map(|_| Value::text(CATEGORIES[rng.gen_range(0..CATEGORIES.len())])).collect(),
        ));
        if t == hop {
            cols.push(Column::new("signal", ColumnType::Float, signal.iter().map(|s| Value::Float(*s)).collect()));
        }
        if t == 0 {
            cols.push(Column::new("target", ColumnType::Integer, std::mem::take(&mut target)));
        }
        tables.push(Table::new(name(t), cols)?);
    }
    let edges = links
        .iter()
        .map(|&(from, to)| JoinEdge { from_table: name(from), from_column: fk_name(to), to_table: name(to), to_column: "id".into() })
        .collect();
    Ok(Corpus::new(tables, edges, "t0", "target", Task::Classification)?.with_descriptions(
        Some(format!("Synthetic {:?} corpus with {n} tables and a planted signal", spec.shape).to_lowercase()),
        Some("binary classification of `target`".into()),
    ))
}

/// Small random corpus for property tests: 2 to `max_tables` tables of at most
/// `max_rows` rows, join keys drawn from a tiny alphabet so keys repeat, about
/// 15% null keys, integer, integral-float or padded-text key encodings, random
/// edge directions, occasional parallel edges and empty tables.
pub fn random_corpus(rng: &mut impl Rng, max_tables: usize, max_rows: usize) -> Corpus {
    let n = rng.gen_range(2..=max_tables.max(2));
    let text_keys = rng.gen_bool(0.3);
    let key_value = |rng: &mut dyn rand::RngCore, float: bool| -> Value {
        if rng.gen_bool(0.15) {
            return Value::Null;
        }
        let k: i64 = rng.gen_range(0..6);
        if text_keys {
            let pad = if rng.gen_bool(0.2) { " " } else { "" };
            Value::text(format!("{pad}k{k}"))
        } else if float {
            Value::Float(k as f64)
        } else {
            Value::Int(k)
        }
    };

    let mut tables = Vec::with_capacity(n);
    for t in 0..n {
        let rows = if t == 0 { rng.gen_range(2..=max_rows.max(2)) } else { rng.gen_range(0..=max_rows) };
        let mut cols = Vec::new();
        for k in 0..3 {
            let float = !text_keys && rng.gen_bool(0.25);
            let ty = if text_keys {
                ColumnType::Text
            } else if float {
                ColumnType::Float
            } else {
                ColumnType::Integer
            };
            cols.push(Column::new(format!("k{k}"), ty, (0..rows).map(|_| key_value(rng, float)).collect()));
        }
        cols.push(Column::new("v", ColumnType::Integer, (0..rows).map(|_| Value::Int(rng.gen_range(0..100))).collect()));
        cols.push(Column::new(
            "w",
            ColumnType::Text,
            (0..rows).map(|_| if rng.gen_bool(0.1) { Value::Null } else { Value::text(CATEGORIES[rng.gen_range(0..5)]) }).collect(),
        ));
        if t == 0 {
            let y = (0..rows).map(|r| Value::Int(if r < 2 { r as i64 } else { rng.gen_range(0..2) })).collect();
            cols.push(Column::new("y", ColumnType::Integer, y));
        }
        tables.push(Table::new(name(t), cols).expect("generated table is rectangular"));
    }

    let mut pairs: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
    for _ in 0..rng.gen_range(0..=n) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            pairs.push((a.min(b), a.max(b)));
        }
    }
    let mut edges: Vec<JoinEdge> = Vec::new();
    for (a, b) in pairs {
        let (from, to) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
        let e = JoinEdge {
            from_table: name(from),
            from_column: format!("k{}", rng.gen_range(0..3)),
            to_table: name(to),
            to_column: format!("k{}", rng.gen_range(0..3)),
        };
        if !edges.contains(&e) {
            edges.push(e);
        }
    }
    Corpus::new(tables, edges, "t0", "y", Task::Classification).expect("generated corpus is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fsel::mutual_information;
    use crate::jex::binary_left_join_path;
    use crate::pex::enumerate_paths;

    #[test]
    fn same_seed_same_corpus() {
        let spec = SynthSpec { tables: 6, rows: 300, seed: 7, ..Default::default() };
        let a = gen_synthetic(&spec).unwrap();
        let b = gen_synthetic(&spec).unwrap();
        for (x, y) in a.tables().zip(b.tables()) {
            assert_eq!(x, y);
        }
        let c = gen_synthetic(&SynthSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.base_table(), c.base_table());
    }

    #[test]
    fn written_directories_identical() {
        let spec = SynthSpec { tables: 3, rows: 50, seed: 1, ..Default::default() };
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        crate::corpus::write_dataset(&gen_synthetic(&spec).unwrap(), d1.path()).unwrap();
        crate::corpus::write_dataset(&gen_synthetic(&spec).unwrap(), d2.path()).unwrap();
        for f in ["graph.json", "t0.csv", "t1.csv", "t2.csv"] {
            assert_eq!(std::fs::read(d1.path().join(f)).unwrap(), std::fs::read(d2.path().join(f)).unwrap());
        }
        let back = crate::corpus::load_dataset(d1.path()).unwrap();
        assert_eq!(back.num_tables(), 3);
    }

    #[test]
    fn planted_signal_dominates_decoys() {
        let spec = SynthSpec { tables: 5, rows: 2000, selectivity: 0.3, seed: 3, planted_hop: 3, shape: Shape::Chain };
        let c = gen_synthetic(&spec).unwrap();
        let target = c.target_column();
        let mut signal = None;
        let mut best_decoy: f64 = 0.0;
        for p in enumerate_paths(&c, 5) {
            let a = binary_left_join_path(&c, &p).unwrap();
            for col in a.foreign_columns() {
                let mi = mutual_information(col, target, Task::Classification);
                if col.name == "t3.signal" {
                    signal = Some(mi);
                } else {
                    best_decoy = best_decoy.max(mi);
                }
            }
        }
        let signal = signal.expect("signal reachable");
        assert!(signal > best_decoy, "signal {signal} vs decoy {best_decoy}");
    }

    #[test]
    fn tiny_datasets_have_both_classes() {
        for seed in 0..200 {
            let spec = SynthSpec { rows: 2 + (seed as usize % 4), seed, ..Default::default() };
            assert!(gen_synthetic(&spec).is_ok(), "seed {seed}");
        }
    }

    #[test]
    fn star_shape() {
        let c = gen_synthetic(&SynthSpec { shape: Shape::Star, tables: 4, rows: 20, ..Default::default() }).unwrap();
        assert_eq!(c.edges().len(), 3);
        assert!(c.edges().iter().all(|e| e.from_table == "t0"));
    }

    #[test]
    fn random_corpora_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let c = random_corpus(&mut rng, 7, 50);
            assert!((2..=7).contains(&c.num_tables()));
            assert!(c.tables().all(|t| t.num_rows() <= 50));
        }
    }
}
