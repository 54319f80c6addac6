use std::collections::{BTreeMap, BTreeSet};

use super::FselError;

/// Borda merge of statistic-ordered rankings.
///
/// Each ranking lists `(feature, statistic)` best first. In a ranking of `m`
/// items position `p` (0-based) earns `m - 1 - p` points; a run of equal
/// statistics shares the mean of its positions' points, so the order inside a
/// tie is irrelevant. Result: `(feature, total points)` by points descending,
/// then name ascending.
pub fn borda_merge(rankings: &[Vec<(String, f64)>]) -> Result<Vec<(String, f64)>, FselError> {
    let Some(first) = rankings.first() else { return Ok(Vec::new()) };
    let universe: BTreeSet<&str> = first.iter().map(|(n, _)| n.as_str()).collect();
    if universe.len() != first.len() {
        return Err(FselError::MismatchedFeatures("duplicate feature in a ranking".into()));
    }
    let mut totals: BTreeMap<&str, f64> = universe.iter().map(|n| (*n, 0.0)).collect();

    for ranking in rankings {
        let names: BTreeSet<&str> = ranking.iter().map(|(n, _)| n.as_str()).collect();
        if names != universe || names.len() != ranking.len() {
            return Err(FselError::MismatchedFeatures("rankings cover different features".into()));
        }
        let m = ranking.len();
        let mut start = 0;
        while start < m {
            let mut end = start + 1;
            while end < m && ranking[end].1 == ranking[start].1 {
                end += 1;
            }
            // positions start..end earn (m-1-start) down to (m-end)
            let points = (2 * m - 1 - start - end) as f64 / 2.0;
            for (name, _) in &ranking[start..end] {
                *totals.get_mut(name.as_str()).expect("same universe") += points;
            }
            start = end;
        }
    }

    let mut merged: Vec<(String, f64)> = totals.into_iter().map(|(n, p)| (n.to_string(), p)).collect();
    merged.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(merged)
}

/// Sorts `(feature, statistic)` pairs best first, ties by name.
pub fn rank_by(mut items: Vec<(String, f64)>) -> Vec<(String, f64)> {
    items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    items
}
