//! Plug-in mutual information over discretized values and absolute Pearson
//! correlation, both over pairwise-complete rows.

use std::collections::{BTreeMap, HashMap};

use crate::corpus::{Column, JoinKey, Task, Value};

/// Numeric columns with more distinct values than this are quantile-binned.
pub const MI_BINS: usize = 10;

/// Rows where both values are non-null.
fn complete_rows(a: &[Value], b: &[Value]) -> Vec<usize> {
    (0..a.len().min(b.len())).filter(|&i| !a[i].is_null() && !b[i].is_null()).collect()
}

/// Dense labels for a column restricted to `rows`.
///
/// Numeric values with at most [`MI_BINS`] distinct values keep one label per
/// value; otherwise the label is the number of decile cut points `<= x`, where
/// cut `j` is the `floor(j * n / 10)`-th smallest value. Other values label by
/// identity.
pub fn discretize(values: &[Value], rows: &[usize], numeric: bool) -> Vec<u32> {
    if numeric {
        let xs: Vec<f64> = rows.iter().map(|&r| values[r].as_f64().unwrap_or(f64::NAN)).collect();
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let mut distinct = sorted.clone();
        distinct.dedup();
        if distinct.len() <= MI_BINS {
            return xs.iter().map(|x| distinct.partition_point(|d| d < x) as u32).collect();
        }
        let n = sorted.len();
        let cuts: Vec<f64> = (1..MI_BINS).map(|j| sorted[j * n / MI_BINS]).collect();
        return xs.iter().map(|x| cuts.iter().filter(|c| **c <= *x).count() as u32).collect();
    }
    let mut ids: HashMap<JoinKey, u32> = HashMap::new();
    let keys: Vec<JoinKey> = rows.iter().map(|&r| values[r].join_key().expect("complete rows")).collect();
    let mut sorted: Vec<&JoinKey> = keys.iter().collect();
    sorted.sort();
    sorted.dedup();
    for (i, k) in sorted.into_iter().enumerate() {
        ids.insert(k.clone(), i as u32);
    }
    keys.iter().map(|k| ids[k]).collect()
}

/// Plug-in mutual information in nats between discretized labels.
pub fn mi_from_labels(x: &[u32], y: &[u32]) -> f64 {
    let n = x.len();
    if n == 0 {
        return 0.0;
    }
    let mut joint: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    let mut px: BTreeMap<u32, usize> = BTreeMap::new();
    let mut py: BTreeMap<u32, usize> = BTreeMap::new();
    for (&a, &b) in x.iter().zip(y) {
        *joint.entry((a, b)).or_default() += 1;
        *px.entry(a).or_default() += 1;
        *py.entry(b).or_default() += 1;
    }
    let nf = n as f64;
    let mi: f64 = joint
        .iter()
        .map(|(&(a, b), &c)| {
            let c = c as f64;
            c / nf * (c * nf / (px[&a] as f64 * py[&b] as f64)).ln()
        })
        .sum();
    mi.max(0.0)
}

/// Mutual information between a feature and the target in nats; 0 with a
/// warning when fewer than two rows have both values.
pub fn mutual_information(feature: &Column, target: &Column, task: Task) -> f64 {
    let rows = complete_rows(&feature.values, &target.values);
    if rows.len() < 2 {
        log::warn!("`{}`: fewer than 2 rows with both feature and target; mutual information set to 0", feature.name);
        return 0.0;
    }
    let x = discretize(&feature.values, &rows, feature.ty.is_numeric());
    let y = discretize(&target.values, &rows, task == Task::Regression && target.ty.is_numeric());
    mi_from_labels(&x, &y)
}

/// Numeric encoding of target values: numbers as-is, booleans as 0/1, a
/// two-valued text target as 0/1 in lexical order. `None` when not encodable.
pub fn encode_target(target: &Column) -> Option<Vec<Option<f64>>> {
    if target.ty.is_numeric() {
        return Some(target.values.iter().map(Value::as_f64).collect());
    }
    match target.values.iter().find(|v| !v.is_null())? {
        Value::Bool(_) => Some(
            target
                .values
                .iter()
                .map(|v| match v {
                    Value::Bool(b) => Some(f64::from(u8::from(*b))),
                    _ => None,
                })
                .collect(),
        ),
        Value::Text(_) => {
            let mut classes: Vec<&str> = target
                .values
                .iter()
                .filter_map(|v| match v {
                    Value::Text(s) => Some(s.as_ref()),
                    _ => None,
                })
                .collect();
            classes.sort_unstable();
            classes.dedup();
            if classes.len() != 2 {
                return None;
            }
            let hi = classes[1];
            Some(
                target
                    .values
                    .iter()
                    .map(|v| match v {
                        Value::Text(s) => Some(if s.as_ref() == hi { 1.0 } else { 0.0 }),
                        _ => None,
                    })
                    .collect(),
            )
        }
        _ => None,
    }
}

/// `|ρ|` between numeric `x` and `y` over indices where both are present,
/// by a single-pass co-moment update. Degenerate input gives 0.
pub fn pearson_abs_values(x: &[Option<f64>], y: &[Option<f64>]) -> f64 {
    let (mut n, mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0_f64, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (Some(a), Some(b)) = (a, b) else { continue };
        n += 1.0;
        let dx = a - mx;
        mx += dx / n;
        let dy = b - my;
        my += dy / n;
        sxx += dx * (a - mx);
        syy += dy * (b - my);
        sxy += dx * (b - my);
    }
    if n < 2.0 || sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).abs().min(1.0)
}

/// Absolute Pearson correlation; 0 for non-numeric features or targets that
/// cannot be encoded numerically.
pub fn pearson_abs(feature: &Column, target: &Column) -> f64 {
    if !feature.ty.is_numeric() {
        return 0.0;
    }
    let Some(y) = encode_target(target) else { return 0.0 };
    let x: Vec<Option<f64>> = feature.values.iter().map(Value::as_f64).collect();
    pearson_abs_values(&x, &y)
}
