use super::FeatureStats;
use crate::corpus::Corpus;
use crate::fdg::DescriptorSet;
use crate::llm::{ChatPrompt, PromptKind};

pub const FS_SYSTEM: &str = "You are an experienced data scientist choosing features for {task}. \
You receive candidate feature names with descriptions, the prediction target, and two statistics per feature.\n\
Statistics:\n\
(1) mutual_info: mutual information with the target, sensitive to non-linear dependence;\n\
(2) pearson_corr: absolute Pearson correlation with the target, the strength of a linear relationship.\n\
How to combine evidence:\n\
- Put features that score well on both statistics near the top.\n\
- Put features that score poorly on both near the bottom, unless their meaning makes them essential for the task.\n\
- Where the statistics and the meaning of a feature point the same way, rank it with confidence.\n\
- Where they disagree, follow the statistics, since they are measured on the actual data.\n\
- For features with opaque names and no useful description, go by the statistics.\n\
Requirements:\n\
(1) Rank every feature listed without skipping any;\n\
(2) Answer with one JSON array ordered from most to least important, like [\"most_important\", ..., \"least_important\"].";

pub const FS_SYSTEM_NO_STATS: &str = "You are an experienced data scientist choosing features for {task}. \
You receive candidate feature names with descriptions and the prediction target. \
Rank the features by how useful they are likely to be for predicting the target.\n\
Requirements:\n\
(1) Rank every feature listed without skipping any;\n\
(2) Answer with one JSON array ordered from most to least important, like [\"most_important\", ..., \"least_important\"].";

fn task_text(corpus: &Corpus) -> String {
    corpus.task_description.clone().unwrap_or_else(|| format!("{} of `{}`", corpus.task(), corpus.target()))
}

fn header(corpus: &Corpus) -> String {
    let base = corpus.base_table();
    let context: Vec<String> =
        base.columns().iter().filter(|c| c.name != corpus.target()).map(|c| format!("{} ({})", c.name, c.ty)).collect();
    format!(
        "Task: {}.\nTarget: {}.\nBase table features (context only, always kept): [{}]\n",
        task_text(corpus),
        corpus.target(),
        context.join(", ")
    )
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

/// Ranking prompt over `features` in the given order, four decimals per statistic.
pub fn build_fs_prompt(features: &[FeatureStats], descriptors: &DescriptorSet, corpus: &Corpus) -> ChatPrompt {
    let entries: Vec<String> = features
        .iter()
        .map(|f| {
            format!(
                "{{name: {}, desc: {}, mutual_info: {:.4}, pearson_corr: {:.4}}}",
                json_str(&f.feature),
                json_str(descriptors.qualified(&f.feature).unwrap_or("")),
                f.mutual_info,
                f.pearson_abs
            )
        })
        .collect();
    let user = format!("{}Features with statistical context:\n[{}]", header(corpus), entries.join(",\n "));
    ChatPrompt::new(PromptKind::FeatureRanking, FS_SYSTEM.replace("{task}", &task_text(corpus)), user)
}

/// Ranking prompt carrying names and descriptions only.
pub fn build_fs_prompt_without_stats(names: &[String], descriptors: &DescriptorSet, corpus: &Corpus) -> ChatPrompt {
    let entries: Vec<String> =
        names.iter().map(|n| format!("{{name: {}, desc: {}}}", json_str(n), json_str(descriptors.qualified(n).unwrap_or("")))).collect();
    let user = format!("{}Features:\n[{}]", header(corpus), entries.join(",\n "));
    ChatPrompt::new(PromptKind::FeatureRanking, FS_SYSTEM_NO_STATS.replace("{task}", &task_text(corpus)), user)
}
