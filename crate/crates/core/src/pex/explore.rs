use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use super::{hop_stats, Direction, Hop, HopStats, JoinPath, PexError, ScoredPath, TableScoreSet, Weights};
use crate::corpus::Corpus;

#[derive(Debug, Clone, Default)]
pub struct ExploreOutcome {
    /// Best first, at most `budget` entries.
    pub paths: Vec<ScoredPath>,
    /// Number of paths scored during the search.
    pub enumerated: usize,
    pub warnings: Vec<String>,
}

/// Neighbors of each table in the undirected view, sorted by (table, hop).
fn adjacency(corpus: &Corpus) -> HashMap<&str, Vec<(&str, Hop)>> {
    let mut adj: HashMap<&str, Vec<(&str, Hop)>> = HashMap::new();
    for e in corpus.edges() {
        adj.entry(e.from_table.as_str()).or_default().push((
            e.to_table.as_str(),
            Hop { anchor_column: e.from_column.clone(), lookup_column: e.to_column.clone(), direction: Direction::Forward },
        ));
        adj.entry(e.to_table.as_str()).or_default().push((
            e.from_table.as_str(),
            Hop { anchor_column: e.to_column.clone(), lookup_column: e.from_column.clone(), direction: Direction::Reverse },
        ));
    }
    for v in adj.values_mut() {
        v.sort();
        v.dedup();
    }
    adj
}

/// Heap entry whose greatest element is the worst-ranked path.
struct Worst(ScoredPath);

impl PartialEq for Worst {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Worst {}
impl PartialOrd for Worst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Worst {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.rank_cmp(&other.0)
    }
}

struct Partial {
    tables: Vec<String>,
    hops: Vec<Hop>,
    sem: Vec<f64>,
    stats: Vec<HopStats>,
}

/// Breadth-first search over simple paths rooted at the base table, following
/// edges in both directions, scoring each path of length `2..=max_len` as it is
/// discovered and keeping the best `budget` in a bounded heap.
///
/// The rank order is total, so the result equals sorting every enumerated
/// path and truncating to `budget`.
pub fn explore(
    corpus: &Corpus,
    table_scores: &TableScoreSet,
    max_len: usize,
    budget: usize,
    weights: &Weights,
) -> Result<ExploreOutcome, PexError> {
    if max_len < 2 {
        return Err(PexError::InvalidConfig(format!("max path length must be at least 2 (got {max_len})")));
    }
    if budget < 1 {
        return Err(PexError::InvalidConfig("path budget must be at least 1".into()));
    }
    weights.validate()?;

    let adj = adjacency(corpus);
    let base = corpus.base_table_name();
    let mut out = ExploreOutcome::default();
    if !adj.contains_key(base) {
        let msg = format!("base table `{base}` has no join edges; no paths to explore");
        log::warn!("{msg}");
        out.warnings.push(msg);
        return Ok(out);
    }

    let mut stats_cache: HashMap<(String, String, Hop), HopStats> = HashMap::new();
    let mut heap: BinaryHeap<Worst> = BinaryHeap::with_capacity(budget + 1);
    let mut queue = VecDeque::from([Partial { tables: vec![base.to_string()], hops: vec![], sem: vec![], stats: vec![] }]);

    while let Some(p) = queue.pop_front() {
        let last = p.tables.last().expect("paths are non-empty").as_str();
        let Some(neighbors) = adj.get(last) else { continue };
        for (next, hop) in neighbors {
            if p.tables.iter().any(|t| t == next) {
                continue;
            }
            let key = (last.to_string(), next.to_string(), hop.clone());
            let hs = match stats_cache.get(&key) {
                Some(s) => *s,
                None => {
                    let s = hop_stats(corpus, last, next, hop)?;
                    stats_cache.insert(key, s);
                    s
                }
            };
            let mut child = Partial { tables: p.tables.clone(), hops: p.hops.clone(), sem: p.sem.clone(), stats: p.stats.clone() };
            child.tables.push(next.to_string());
            child.hops.push(hop.clone());
            child.sem.push(table_scores.get(next));
            child.stats.push(hs);

            let path = JoinPath { tables: child.tables.clone(), hops: child.hops.clone() };
            let scored = ScoredPath::from_parts(path, &child.sem, child.stats.clone(), weights);
            debug_assert!((0.0..=1.0 + 1e-12).contains(&scored.score));
            out.enumerated += 1;
            if heap.len() < budget {
                heap.push(Worst(scored));
            } else if heap.peek().is_some_and(|w| scored.rank_cmp(&w.0) == Ordering::Less) {
                heap.pop();
                heap.push(Worst(scored));
            }

            if child.tables.len() < max_len {
                queue.push_back(child);
            }
        }
    }
    out.paths = heap.into_sorted_vec().into_iter().map(|w| w.0).collect();
    Ok(out)
}

/// Every simple path of length `2..=max_len` rooted at the base table, unsorted.
pub fn enumerate_paths(corpus: &Corpus, max_len: usize) -> Vec<JoinPath> {
    let adj = adjacency(corpus);
    let mut out = Vec::new();
    let mut stack = vec![JoinPath { tables: vec![corpus.base_table_name().to_string()], hops: vec![] }];
    while let Some(p) = stack.pop() {
        if p.tables.len() >= 2 {
            out.push(p.clone());
        }
        if p.tables.len() == max_len {
            continue;
        }
        let last = p.tables.last().expect("non-empty").as_str();
        for (next, hop) in adj.get(last).into_iter().flatten() {
            if !p.tables.iter().any(|t| t == next) {
                let mut c = p.clone();
                c.tables.push(next.to_string());
                c.hops.push(hop.clone());
                stack.push(c);
            }
        }
    }
    out
}
