use std::collections::BTreeSet;

use serde_json::Value as Json;

use super::TableScoreSet;
use crate::corpus::{Corpus, Table};
use crate::fdg::DescriptorSet;
use crate::llm::{cosine, ChatPrompt, Gateway, LlmError, PromptKind};

pub const TABLE_SCORING_SYSTEM: &str = "You are an experienced data scientist judging which tables of a \
relational database matter for {task}. You receive table schemas with column descriptions, the foreign \
key links between tables, and the prediction target. Rate how relevant each candidate table is to that target.\n\
Requirements:\n\
(1) Give a score to every candidate table without skipping any;\n\
(2) Use integers from 0 (irrelevant) to 100 (highly relevant);\n\
(3) Answer with one JSON object shaped like {\"table_1\": score, \"table_2\": score, ...}.";

fn task_text(corpus: &Corpus) -> String {
    corpus.task_description.clone().unwrap_or_else(|| format!("{} of `{}`", corpus.task(), corpus.target()))
}

fn schema_line(table: &Table, descriptors: &DescriptorSet) -> String {
    let cols: Vec<String> = table
        .columns()
        .iter()
        .map(|c| match descriptors.description(&table.name, &c.name) {
            Some(d) => format!("{} ({}, {d})", c.name, c.ty),
            None => format!("{} ({})", c.name, c.ty),
        })
        .collect();
    format!("{}: [{}]", table.name, cols.join(", "))
}

/// Text embedded for the prefilter: table name, column names and descriptions.
pub fn schema_text(table: &Table, descriptors: &DescriptorSet) -> String {
    let mut parts = vec![table.name.clone()];
    for c in table.columns() {
        parts.push(c.name.clone());
        if let Some(d) = descriptors.description(&table.name, &c.name) {
            parts.push(d.to_string());
        }
    }
    parts.join(" ")
}

pub fn build_table_scoring_prompt(corpus: &Corpus, descriptors: &DescriptorSet) -> ChatPrompt {
    let all: Vec<&str> = corpus.candidate_tables().map(|t| t.name.as_str()).collect();
    build_table_scoring_prompt_for(corpus, descriptors, &all)
}

/// Prompt over the given candidates, rendered in manifest order.
pub fn build_table_scoring_prompt_for(corpus: &Corpus, descriptors: &DescriptorSet, candidates: &[&str]) -> ChatPrompt {
    let keep: BTreeSet<&str> = candidates.iter().copied().collect();
    let shown: Vec<&Table> = corpus.candidate_tables().filter(|t| keep.contains(t.name.as_str())).collect();
    let base = corpus.base_table();
    let in_prompt = |t: &str| t == base.name || keep.contains(t);

    let mut user = format!("Task: {}.\nTarget: {}.\nBase table:\n", task_text(corpus), corpus.target());
    user.push_str(&schema_line(base, descriptors));
    user.push_str("\nCandidate tables:\n");
    let lines: Vec<String> = shown.iter().map(|t| schema_line(t, descriptors)).collect();
    user.push_str(&lines.join(",\n"));
    let links: Vec<String> = corpus
        .edges()
        .iter()
        .filter(|e| in_prompt(&e.from_table) && in_prompt(&e.to_table))
        .map(|e| format!("{}.{} -> {}.{}", e.from_table, e.from_column, e.to_table, e.to_column))
        .collect();
    if !links.is_empty() {
        user.push_str("\nForeign key relationships:\n");
        user.push_str(&links.join("\n"));
    }
    let names: Vec<&str> = shown.iter().map(|t| t.name.as_str()).collect();
    user.push_str(&format!("\nScore all candidate tables: {}", serde_json::to_string(&names).expect("names serialize")));

    let system = TABLE_SCORING_SYSTEM.replace("{task}", &task_text(corpus));
    ChatPrompt::new(PromptKind::TableScoring, system, user)
}

/// Candidates kept in the scoring prompt.
///
/// Everything is kept when the full prompt fits `token_budget`. Otherwise
/// candidates are ranked by embedding cosine against the target and task text
/// (ties by name) and the longest ranked prefix whose prompt fits is kept.
pub fn prefilter_tables(
    corpus: &Corpus,
    descriptors: &DescriptorSet,
    gateway: &Gateway,
    token_budget: usize,
) -> Result<BTreeSet<String>, LlmError> {
    let names: Vec<&str> = corpus.candidate_tables().map(|t| t.name.as_str()).collect();
    if build_table_scoring_prompt_for(corpus, descriptors, &names).token_estimate() <= token_budget {
        return Ok(names.into_iter().map(str::to_string).collect());
    }
    let query = match &corpus.task_description {
        Some(d) => format!("{} {d}", corpus.target()),
        None => corpus.target().to_string(),
    };
    let q = gateway.embed(&query)?;
    let mut ranked: Vec<(f64, &str)> = Vec::with_capacity(names.len());
    for t in corpus.candidate_tables() {
        ranked.push((cosine(&q, &gateway.embed(&schema_text(t, descriptors))?), t.name.as_str()));
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));

    let mut kept: Vec<&str> = Vec::new();
    for (_, name) in ranked {
        kept.push(name);
        if build_table_scoring_prompt_for(corpus, descriptors, &kept).token_estimate() > token_budget {
            kept.pop();
            break;
        }
    }
    Ok(kept.into_iter().map(str::to_string).collect())
}

/// One batched model call rating every retained candidate.
///
/// Scores are clamped to `[0, 100]` and divided by 100; candidates the model
/// omits score 0, as do prefiltered tables. An unusable response (after one
/// re-ask) gives every retained candidate 0.5.
pub fn score_tables(corpus: &Corpus, descriptors: &DescriptorSet, gateway: &Gateway, token_budget: usize) -> TableScoreSet {
    let mut out = TableScoreSet::uniform(corpus, 0.0);
    let retained = match prefilter_tables(corpus, descriptors, gateway, token_budget) {
        Ok(r) => r,
        Err(e) => {
            out.warnings.push(format!("table prefilter unavailable, keeping all candidates: {e}"));
            corpus.candidate_tables().map(|t| t.name.clone()).collect()
        }
    };
    out.prefiltered_out = out.scores.keys().filter(|t| !retained.contains(*t)).cloned().collect();
    if retained.is_empty() {
        return out;
    }

    let names: Vec<&str> = retained.iter().map(String::as_str).collect();
    let prompt = gateway.bind(build_table_scoring_prompt_for(corpus, descriptors, &names));
    match gateway.complete_json(&prompt) {
        Ok(Json::Object(map)) => {
            for name in &retained {
                if let Some(v) = map.get(name).and_then(numeric) {
                    out.scores.insert(name.clone(), v.clamp(0.0, 100.0) / 100.0);
                }
            }
        }
        other => {
            let why = match other {
                Ok(v) => format!("expected a JSON object, got {v}"),
                Err(e) => e.to_string(),
            };
            out.warnings.push(format!("table scoring failed ({why}); using uniform 0.5"));
            out.fallback = true;
            for name in &retained {
                out.scores.insert(name.clone(), 0.5);
            }
        }
    }
    for w in &out.warnings {
        log::warn!("{w}");
    }
    out
}

fn numeric(v: &Json) -> Option<f64> {
    match v {
        Json::Number(n) => n.as_f64(),
        Json::String(s) => s.trim().parse().ok(),
        _ => None,
    }
    .filter(|x: &f64| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Column, ColumnType, JoinEdge, Task, Value};
    use crate::fdg::DescriptorSet;
    use crate::llm::{StubProvider, StubScript};
    use std::collections::HashMap;

    fn table(name: &str, cols: &[&str]) -> Table {
        let columns = cols.iter().map(|c| Column::new(*c, ColumnType::Integer, vec![Value::Int(1), Value::Int(2)])).collect();
        Table::new(name, columns).unwrap()
    }

    fn star(candidates: &[(&str, &[&str])]) -> Corpus {
        let mut tables = vec![table("base", &["id", "delay"])];
        let mut edges = Vec::new();
        for (n, cols) in candidates {
            let mut all = vec!["base_id"];
            all.extend_from_slice(cols);
            tables.push(table(n, &all));
            edges.push(JoinEdge {
                from_table: n.to_string(),
                from_column: "base_id".into(),
                to_table: "base".into(),
                to_column: "id".into(),
            });
        }
        Corpus::new(tables, edges, "base", "delay", Task::Classification).unwrap()
    }

    #[test]
    fn prompt_renders_schemas() {
        let c = star(&[("t", &["f1", "f2"])]);
        let p = build_table_scoring_prompt(&c, &DescriptorSet::absent(&c));
        assert!(p.user.contains("t: [base_id (integer), f1 (integer), f2 (integer)]"), "{}", p.user);
        assert!(p.user.contains("Target: delay."));
        assert!(p.user.contains("t.base_id -> base.id"));
        assert_eq!(p.kind, PromptKind::TableScoring);
    }

    #[test]
    fn prompt_lists_exactly_the_candidates() {
        let c = star(&[("a", &["x"]), ("b", &["x"]), ("c", &["x"]), ("d", &["x"]), ("e", &["x"])]);
        let p = build_table_scoring_prompt(&c, &DescriptorSet::absent(&c));
        let line = p.user.lines().find_map(|l| l.strip_prefix("Score all candidate tables: ")).unwrap();
        let names: Vec<String> = serde_json::from_str(line).unwrap();
        assert_eq!(names, ["a", "b", "c", "d", "e"]);
        assert!(!names.contains(&"base".to_string()));
    }

    #[test]
    fn descriptions_rendered_when_present() {
        let c = star(&[("t", &["f1"])]);
        let script = StubScript { descriptions: Some(r#"{"t.f1": "Hourly rainfall amount"}"#.into()), ..Default::default() };
        let g = Gateway::stub(StubProvider::scripted(script));
        let d = crate::fdg::generate_descriptions(&c, &g, &Default::default()).descriptors;
        let p = build_table_scoring_prompt(&c, &d);
        assert!(p.user.contains("f1 (integer, Hourly rainfall amount)"));
        assert!(p.user.contains("t: [base_id (integer), f1"));
    }

    fn scripted(text: &str) -> Gateway {
        Gateway::stub(StubProvider::scripted(StubScript { table_scoring: Some(text.into()), ..Default::default() }))
    }

    #[test]
    fn scores_normalized_clamped_and_defaulted() {
        let c = star(&[("weather", &["x"]), ("hot", &["x"]), ("quiet", &["x"])]);
        let g = scripted(r#"{"weather": 90, "hot": 120, "ghost": 50}"#);
        let s = score_tables(&c, &DescriptorSet::absent(&c), &g, usize::MAX);
        assert_eq!(s.get("weather"), 0.9);
        assert_eq!(s.get("hot"), 1.0);
        assert_eq!(s.get("quiet"), 0.0);
        assert!(!s.scores.contains_key("ghost"));
        assert!(!s.fallback);
        assert_eq!(g.calls(PromptKind::TableScoring), 1);
    }

    #[test]
    fn unparseable_response_falls_back_to_half() {
        let c = star(&[("a", &["x"]), ("b", &["x"])]);
        let g = scripted("no idea");
        let s = score_tables(&c, &DescriptorSet::absent(&c), &g, usize::MAX);
        assert!(s.fallback);
        assert!(s.scores.values().all(|v| *v == 0.5));
        assert_eq!(g.calls(PromptKind::TableScoring), 2);
    }

    /// Unhashed trigram-count cosine.
    fn exact_cosine(a: &str, b: &str) -> f64 {
        let grams = |s: &str| {
            let chars: Vec<char> = s.to_lowercase().chars().collect();
            let mut m: HashMap<String, f64> = HashMap::new();
            for w in chars.windows(3) {
                *m.entry(w.iter().collect()).or_default() += 1.0;
            }
            m
        };
        let (x, y) = (grams(a), grams(b));
        let dot: f64 = x.iter().map(|(k, v)| v * y.get(k).unwrap_or(&0.0)).sum();
        let n = |m: &HashMap<String, f64>| m.values().map(|v| v * v).sum::<f64>().sqrt();
        dot / (n(&x) * n(&y))
    }

    #[test]
    fn prefilter_keeps_highest_cosine_prefix() {
        let c = star(&[
            ("invoices", &["amount_due"]),
            ("delay_history", &["delay_minutes"]),
            ("customers", &["signup"]),
            ("flight_delay", &["delay_cause"]),
        ]);
        let d = DescriptorSet::absent(&c);
        let g = Gateway::stub(StubProvider::heuristic());

        let all: Vec<&str> = c.candidate_tables().map(|t| t.name.as_str()).collect();
        let full = build_table_scoring_prompt_for(&c, &d, &all).token_estimate();
        assert_eq!(prefilter_tables(&c, &d, &g, full).unwrap().len(), 4);

        let mut oracle: Vec<(f64, &str)> =
            c.candidate_tables().map(|t| (exact_cosine("delay", &schema_text(t, &d)), t.name.as_str())).collect();
        oracle.sort_by(|a, b| b.0.total_cmp(&a.0));
        let top2: BTreeSet<String> = oracle[..2].iter().map(|(_, n)| n.to_string()).collect();
        assert!(oracle[1].0 > oracle[2].0);

        let budget = build_table_scoring_prompt_for(&c, &d, &[oracle[0].1, oracle[1].1]).token_estimate();
        let kept = prefilter_tables(&c, &d, &g, budget).unwrap();
        assert_eq!(kept, top2);

        let s = score_tables(&c, &d, &g, budget);
        assert_eq!(s.prefiltered_out.len(), 2);
        for t in &s.prefiltered_out {
            assert_eq!(s.get(t), 0.0);
            assert!(!top2.contains(t));
        }
    }
}
