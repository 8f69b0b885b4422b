//! Dataset loading, batch runs and scoring.

pub mod bleu;
pub mod harness;
pub mod metrics;
pub mod model_choice;
pub mod qa4pc;
pub mod sharc;

pub use bleu::{bleu, corpus_bleu};
pub use harness::{report, run_sharc, CaseResult};
pub use metrics::{classify, micro_macro, Class, Classified, MetricReport};
pub use model_choice::{run_model_choice, ChoiceMode, ModelChoiceConfig, RunResult};
pub use qa4pc::{hydrate_pool, load_qa4pc, Qa4pcItem};
pub use sharc::{load_sharc, DatasetError, GoldAnswer, SharcUtterance};
