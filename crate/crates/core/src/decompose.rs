//! Splits an edit script into removed, introduced and untouched tokens.

use crate::diff::{EditScript, SpanKind};
use crate::lexer::{join_tokens, Token};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DiffDecomposition {
    /// Del tokens and Replace old sides, in span order.
    pub s_old: Vec<Token>,
    /// Add tokens and Replace new sides, in span order.
    pub s_new: Vec<Token>,
    /// Keep tokens, in span order.
    pub s_unchanged: Vec<Token>,
}

impl DiffDecomposition {
    pub fn s_old_text(&self) -> String {
        join_tokens(&self.s_old)
    }

    pub fn s_new_text(&self) -> String {
        join_tokens(&self.s_new)
    }

    pub fn s_unchanged_text(&self) -> String {
        join_tokens(&self.s_unchanged)
    }
}

pub fn decompose(script: &EditScript) -> DiffDecomposition {
    let mut out = DiffDecomposition::default();
    for span in script.spans() {
        match span.kind() {
            SpanKind::Keep => out.s_unchanged.extend_from_slice(span.old_tokens()),
            SpanKind::Del => out.s_old.extend_from_slice(span.old_tokens()),
            SpanKind::Add => out.s_new.extend_from_slice(span.new_tokens()),
            SpanKind::Replace => {
                out.s_old.extend_from_slice(span.old_tokens());
                out.s_new.extend_from_slice(span.new_tokens());
            }
        }
    }
    out
}
