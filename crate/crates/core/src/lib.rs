//! Relational feature augmentation: join-path discovery over a PK–FK graph,
//! suffix-Yannakakis left-join materialization, consolidation and hybrid
//! statistical/LLM feature selection.

pub mod corpus;
pub mod fdg;
pub mod fsel;
pub mod jex;
pub mod llm;
pub mod pex;
pub mod pipeline;
pub mod synth;

pub use corpus::{Corpus, CorpusError, Table, Task, Value};

/// Prompt size (estimated tokens) above which prompts are split or prefiltered.
pub const DEFAULT_TOKEN_BUDGET: usize = 100_000;
