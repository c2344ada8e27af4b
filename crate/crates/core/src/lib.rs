//! Just-in-time code-comment inconsistency detection.
//!
//! The pipeline lexes a before/after pair of code snippets, diffs the token
//! streams into activity-labeled spans (`Keep`, `Add`, `Del`, `Replace`),
//! decomposes them into removed/introduced/unchanged token sets, and feeds
//! the result together with the comment into a small trainable encoder whose
//! objective mixes binary cross-entropy with a label-aware contrastive term.

pub mod dataset;
pub mod decompose;
pub mod diff;
pub mod encoder;
pub mod lexer;
pub mod metrics;
pub mod objective;
pub mod optim;
pub mod persist;
pub mod synthetic;
pub mod trainer;
pub mod vocab;

pub use dataset::{
    compute_stats, load_id_list, load_preprocessed, load_records, preprocess, select_subset, write_jsonl, CciRecord,
    CommentType, DatasetError, PreprocessedRecord, RecordFormat, Split, SplitStats,
};
pub use decompose::{decompose, DiffDecomposition};
pub use diff::{
    diff_code, diff_tokens, group_spans, parse_tagged, render_tagged, EditAction, EditOp,
    EditScript, EditSpan, SpanKind,
};
pub use encoder::{InputMode, ModelConfig, ModelParams};
pub use lexer::{lex_code, lex_comment, Origin, Token, TokenKind, TokenSequence};
pub use metrics::{Report, Scores};
pub use objective::ContrastiveConfig;
pub use persist::Checkpoint;
pub use trainer::{predict, train, train_files, Prediction, TrainConfig, TrainError};
pub use vocab::Vocabulary;
