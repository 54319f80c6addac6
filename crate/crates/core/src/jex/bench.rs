use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::{binary_left_join_path, suffix_yannakakis, JexError};
use crate::corpus::Corpus;
use crate::pex::JoinPath;

#[derive(Debug, Clone, Serialize)]
pub struct BenchEntry {
    pub path: String,
    pub length: usize,
    /// Median wall-clock over repetitions.
    pub binary_ms: f64,
    pub yannakakis_ms: f64,
    /// Median of the per-repetition ratios `binary / yannakakis`.
    pub speedup: f64,
    pub binary_intermediate_rows: usize,
    pub yannakakis_intermediate_rows: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LengthSummary {
    pub length: usize,
    pub paths: usize,
    pub median_speedup: f64,
    pub binary_ms: f64,
    pub yannakakis_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub repetitions: usize,
    pub entries: Vec<BenchEntry>,
    pub by_length: Vec<LengthSummary>,
}

impl BenchReport {
    pub fn write_json(&self, path: &Path) -> Result<(), JexError> {
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, text).map_err(|source| JexError::Io { path: path.display().to_string(), source })
    }
}

pub(crate) fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64() * 1e3)
}

/// Times both executors on every path. An untimed first run of each asserts
/// equal outputs; timed repetitions then alternate which executor goes first.
pub fn bench_join_strategies(corpus: &Corpus, paths: &[JoinPath], repetitions: usize) -> Result<BenchReport, JexError> {
    let repetitions = repetitions.max(1);
    let mut entries = Vec::with_capacity(paths.len());
    for path in paths {
        let b = binary_left_join_path(corpus, path)?;
        let y = suffix_yannakakis(corpus, path)?;
        if b != y {
            return Err(JexError::NotEquivalent(path.to_string()));
        }
        let (bt, yt) = (b.trace.total(), y.trace.total());
        drop((b, y));

        let mut b_ms = Vec::with_capacity(repetitions);
        let mut y_ms = Vec::with_capacity(repetitions);
        let mut ratios = Vec::with_capacity(repetitions);
        for rep in 0..repetitions {
            let (tb, ty) = if rep % 2 == 0 {
                let (r, tb) = timed(|| binary_left_join_path(corpus, path));
                drop(r?);
                let (r, ty) = timed(|| suffix_yannakakis(corpus, path));
                drop(r?);
                (tb, ty)
            } else {
                let (r, ty) = timed(|| suffix_yannakakis(corpus, path));
                drop(r?);
                let (r, tb) = timed(|| binary_left_join_path(corpus, path));
                drop(r?);
                (tb, ty)
            };
            b_ms.push(tb);
            y_ms.push(ty);
            ratios.push(tb / ty.max(1e-9));
        }
        entries.push(BenchEntry {
            path: path.to_string(),
            length: path.len(),
            binary_ms: median(&mut b_ms),
            yannakakis_ms: median(&mut y_ms),
            speedup: median(&mut ratios),
            binary_intermediate_rows: bt,
            yannakakis_intermediate_rows: yt,
        });
    }

    let mut groups: BTreeMap<usize, Vec<&BenchEntry>> = BTreeMap::new();
    for e in &entries {
        groups.entry(e.length).or_default().push(e);
    }
    let by_length = groups
        .into_iter()
        .map(|(length, es)| LengthSummary {
            length,
            paths: es.len(),
            median_speedup: median(&mut es.iter().map(|e| e.speedup).collect::<Vec<_>>()),
            binary_ms: es.iter().map(|e| e.binary_ms).sum(),
            yannakakis_ms: es.iter().map(|e| e.yannakakis_ms).sum(),
        })
        .collect();
    Ok(BenchReport { repetitions, entries, by_length })
}
