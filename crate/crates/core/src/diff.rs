//! Token-level shortest edit scripts and their activity-labeled span form.
//!
//! [`edit_actions`] runs the linear-space Myers algorithm over any slice of
//! comparable items. Within every maximal run of non-`Keep` actions the output
//! lists all deletions before all insertions, so a changed region always reads
//! as "old tokens, then new tokens". [`group_spans`] relies on that to form
//! `Replace` spans.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::lexer::{lex_code, Origin, Token, TokenKind, TokenSequence};

pub const TAG_KEEP: &str = "<Keep>";
pub const TAG_END_KEEP: &str = "<EndKeep>";
pub const TAG_ADD: &str = "<Add>";
pub const TAG_END_ADD: &str = "<EndAdd>";
pub const TAG_DEL: &str = "<Del>";
pub const TAG_END_DEL: &str = "<EndDel>";
pub const TAG_REPLACE_OLD: &str = "<ReplaceOld>";
pub const TAG_REPLACE_NEW: &str = "<ReplaceNew>";
pub const TAG_END_REPLACE: &str = "<EndReplace>";

/// The nine reserved span delimiters, in vocabulary order.
pub const DIFF_TAGS: [&str; 9] = [
    TAG_KEEP,
    TAG_END_KEEP,
    TAG_ADD,
    TAG_END_ADD,
    TAG_DEL,
    TAG_END_DEL,
    TAG_REPLACE_OLD,
    TAG_REPLACE_NEW,
    TAG_END_REPLACE,
];

pub fn is_diff_tag(text: &str) -> bool {
    DIFF_TAGS.contains(&text)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiffError {
    #[error("edit script does not reproduce the {side} sequence")]
    ProjectionMismatch { side: &'static str },
    #[error("invalid edit span at index {index}: {reason}")]
    InvalidSpan { index: usize, reason: &'static str },
    #[error("malformed tagged diff at token {position}: {reason}")]
    MalformedTagged { position: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EditAction {
    Keep,
    Add,
    Del,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditOp {
    pub action: EditAction,
    pub token: Token,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpanKind {
    Keep,
    Add,
    Del,
    Replace,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditSpan {
    kind: SpanKind,
    old_tokens: Vec<Token>,
    new_tokens: Vec<Token>,
}

impl EditSpan {
    pub fn keep(tokens: Vec<Token>) -> Self {
        Self { kind: SpanKind::Keep, old_tokens: tokens.clone(), new_tokens: tokens }
    }

    pub fn add(tokens: Vec<Token>) -> Self {
        Self { kind: SpanKind::Add, old_tokens: Vec::new(), new_tokens: tokens }
    }

    pub fn del(tokens: Vec<Token>) -> Self {
        Self { kind: SpanKind::Del, old_tokens: tokens, new_tokens: Vec::new() }
    }

    pub fn replace(old_tokens: Vec<Token>, new_tokens: Vec<Token>) -> Self {
        Self { kind: SpanKind::Replace, old_tokens, new_tokens }
    }

    pub fn kind(&self) -> SpanKind {
        self.kind
    }

    pub fn old_tokens(&self) -> &[Token] {
        &self.old_tokens
    }

    pub fn new_tokens(&self) -> &[Token] {
        &self.new_tokens
    }

    fn check(&self) -> Result<(), &'static str> {
        let (old_empty, new_empty) = (self.old_tokens.is_empty(), self.new_tokens.is_empty());
        match self.kind {
            SpanKind::Keep if old_empty => Err("empty Keep span"),
            SpanKind::Keep if self.old_tokens != self.new_tokens => Err("Keep span sides differ"),
            SpanKind::Add if new_empty || !old_empty => Err("Add span must carry only new tokens"),
            SpanKind::Del if old_empty || !new_empty => Err("Del span must carry only old tokens"),
            SpanKind::Replace if old_empty || new_empty => Err("Replace span needs both sides"),
            _ => Ok(()),
        }
    }
}

/// An ordered sequence of activity-labeled spans.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EditScript {
    spans: Vec<EditSpan>,
}

impl EditScript {
    /// Validates span shapes and that no two neighbours share a kind.
    pub fn new(spans: Vec<EditSpan>) -> Result<Self, DiffError> {
        for (index, span) in spans.iter().enumerate() {
            span.check().map_err(|reason| DiffError::InvalidSpan { index, reason })?;
            if index > 0 && spans[index - 1].kind == span.kind {
                return Err(DiffError::InvalidSpan { index, reason: "adjacent spans share a kind" });
            }
        }
        Ok(Self { spans })
    }

    pub fn spans(&self) -> &[EditSpan] {
        &self.spans
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn old_projection(&self) -> Vec<Token> {
        self.spans.iter().flat_map(|s| s.old_tokens.iter().cloned()).collect()
    }

    pub fn new_projection(&self) -> Vec<Token> {
        self.spans.iter().flat_map(|s| s.new_tokens.iter().cloned()).collect()
    }

    /// Checks that the script projects exactly onto the given sides.
    pub fn verify_against(&self, old: &TokenSequence, new: &TokenSequence) -> Result<(), DiffError> {
        if !projection_eq(self.spans.iter().map(|s| &s.old_tokens), &old.tokens) {
            return Err(DiffError::ProjectionMismatch { side: "old" });
        }
        if !projection_eq(self.spans.iter().map(|s| &s.new_tokens), &new.tokens) {
            return Err(DiffError::ProjectionMismatch { side: "new" });
        }
        Ok(())
    }

    pub fn has_edits(&self) -> bool {
        self.spans.iter().any(|s| s.kind != SpanKind::Keep)
    }
}

fn projection_eq<'a>(parts: impl Iterator<Item = &'a Vec<Token>>, expected: &[Token]) -> bool {
    let mut offset = 0;
    for part in parts {
        let end = offset + part.len();
        if end > expected.len() || expected[offset..end] != part[..] {
            return false;
        }
        offset = end;
    }
    offset == expected.len()
}

// ---------------------------------------------------------------------------
// Myers, linear space.

/// Furthest-reaching x per diagonal, indexed by a possibly negative `k`.
#[derive(Debug)]
struct V {
    offset: isize,
    v: Vec<usize>,
}

impl V {
    fn new(max_d: usize) -> Self {
        Self { offset: max_d as isize, v: vec![0; 2 * max_d + 1] }
    }

    /// Grows the table for a new problem size. Stale entries are never read
    /// before being written, so no clearing is needed.
    #[inline]
    fn prepare(&mut self, max_d: usize) {
        self.offset = max_d as isize;
        if self.v.len() < 2 * max_d + 1 {
            self.v.resize(2 * max_d + 1, 0);
        }
    }
}

impl Index<isize> for V {
    type Output = usize;

    #[inline]
    fn index(&self, k: isize) -> &usize {
        &self.v[(k + self.offset) as usize]
    }
}

impl IndexMut<isize> for V {
    #[inline]
    fn index_mut(&mut self, k: isize) -> &mut usize {
        &mut self.v[(k + self.offset) as usize]
    }
}

#[inline]
fn max_d(n: usize, m: usize) -> usize {
    (n + m + 1) / 2 + 1
}

#[inline]
fn common_prefix<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

#[inline]
fn common_suffix<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    a.iter().rev().zip(b.iter().rev()).take_while(|(x, y)| x == y).count()
}

/// Returns the start of the middle snake of an optimal path through
/// `old` x `new`. Both slices are non-empty and share no common prefix or
/// suffix.
fn find_middle_snake<T: PartialEq>(old: &[T], new: &[T], vf: &mut V, vb: &mut V) -> Option<(usize, usize)> {
    let n = old.len();
    let m = new.len();
    let delta = n as isize - m as isize;
    let odd = delta & 1 == 1;

    vf[1] = 0;
    vb[1] = 0;

    let d_max = max_d(n, m) as isize;
    for d in 0..d_max {
        let mut k = d;
        while k >= -d {
            let mut x = if k == -d || (k != d && vf[k - 1] < vf[k + 1]) {
                vf[k + 1]
            } else {
                vf[k - 1] + 1
            };
            let y = (x as isize - k) as usize;
            let (x0, y0) = (x, y);
            let mut yy = y;
            while x < n && yy < m && old[x] == new[yy] {
                x += 1;
                yy += 1;
            }
            vf[k] = x;
            if odd && (k - delta).abs() < d && x + vb[-(k - delta)] >= n {
                return Some((x0, y0));
            }
            k -= 2;
        }

        let mut k = d;
        while k >= -d {
            let mut x = if k == -d || (k != d && vb[k - 1] < vb[k + 1]) {
                vb[k + 1]
            } else {
                vb[k - 1] + 1
            };
            let mut y = (x as isize - k) as usize;
            while x < n && y < m && old[n - x - 1] == new[m - y - 1] {
                x += 1;
                y += 1;
            }
            vb[k] = x;
            if !odd && (k - delta).abs() <= d && x + vf[-(k - delta)] >= n {
                return Some((n - x, m - y));
            }
            k -= 2;
        }
    }
    None
}

#[inline]
fn push_n(out: &mut Vec<EditAction>, action: EditAction, count: usize) {
    out.resize(out.len() + count, action);
}

/// Optimal script when `old` holds exactly one item.
fn single_old<T: PartialEq>(item: &T, new: &[T], out: &mut Vec<EditAction>) {
    match new.iter().position(|x| x == item) {
        Some(j) => {
            push_n(out, EditAction::Add, j);
            out.push(EditAction::Keep);
            push_n(out, EditAction::Add, new.len() - j - 1);
        }
        None => {
            out.push(EditAction::Del);
            push_n(out, EditAction::Add, new.len());
        }
    }
}

/// Optimal script when `new` holds exactly one item.
fn single_new<T: PartialEq>(old: &[T], item: &T, out: &mut Vec<EditAction>) {
    match old.iter().position(|x| x == item) {
        Some(i) => {
            push_n(out, EditAction::Del, i);
            out.push(EditAction::Keep);
            push_n(out, EditAction::Del, old.len() - i - 1);
        }
        None => {
            push_n(out, EditAction::Del, old.len());
            out.push(EditAction::Add);
        }
    }
}

fn conquer<T: PartialEq>(old: &[T], new: &[T], vf: &mut V, vb: &mut V, out: &mut Vec<EditAction>) {
    let prefix = common_prefix(old, new);
    push_n(out, EditAction::Keep, prefix);
    let (old, new) = (&old[prefix..], &new[prefix..]);
    let suffix = common_suffix(old, new);
    let (old, new) = (&old[..old.len() - suffix], &new[..new.len() - suffix]);

    if old.is_empty() || new.is_empty() {
        push_n(out, EditAction::Del, old.len());
        push_n(out, EditAction::Add, new.len());
    } else if old.len() == 1 {
        single_old(&old[0], new, out);
    } else if new.len() == 1 {
        single_new(old, &new[0], out);
    } else if let Some((x, y)) = find_middle_snake(old, new, vf, vb) {
        conquer(&old[..x], &new[..y], vf, vb, out);
        conquer(&old[x..], &new[y..], vf, vb, out);
    } else {
        push_n(out, EditAction::Del, old.len());
        push_n(out, EditAction::Add, new.len());
    }

    push_n(out, EditAction::Keep, suffix);
}

/// Rewrites every maximal non-`Keep` run as all of its deletions followed by
/// all of its insertions. Costs and projections are unchanged.
fn dels_before_adds(actions: &mut [EditAction]) {
    let mut i = 0;
    while i < actions.len() {
        if actions[i] == EditAction::Keep {
            i += 1;
            continue;
        }
        let start = i;
        while i < actions.len() && actions[i] != EditAction::Keep {
            i += 1;
        }
        let dels = actions[start..i].iter().filter(|&&a| a == EditAction::Del).count();
        for (j, slot) in actions[start..i].iter_mut().enumerate() {
            *slot = if j < dels { EditAction::Del } else { EditAction::Add };
        }
    }
}

/// Minimal insert/delete edit script between two slices.
///
/// The `Keep` actions form a longest common subsequence. Each action consumes
/// one item from the side(s) it touches, in order.
pub fn edit_actions<T: PartialEq>(old: &[T], new: &[T]) -> Vec<EditAction> {
    let mut out = Vec::with_capacity(old.len().max(new.len()));
    edit_actions_with(old, new, &mut DiffScratch::default(), &mut out);
    out
}

/// Working memory for [`edit_actions_with`], reusable across calls.
#[derive(Debug)]
pub struct DiffScratch {
    vf: V,
    vb: V,
}

impl Default for DiffScratch {
    fn default() -> Self {
        Self { vf: V::new(0), vb: V::new(0) }
    }
}

/// Same as [`edit_actions`], writing into `out` (cleared first) and reusing
/// `scratch` to avoid allocation in hot loops.
pub fn edit_actions_with<T: PartialEq>(old: &[T], new: &[T], scratch: &mut DiffScratch, out: &mut Vec<EditAction>) {
    out.clear();
    out.reserve(old.len() + new.len());
    let max = max_d(old.len(), new.len());
    scratch.vf.prepare(max);
    scratch.vb.prepare(max);
    conquer(old, new, &mut scratch.vf, &mut scratch.vb, out);
    dels_before_adds(out);
}

/// Token-level edit script between the old and new code.
pub fn diff_tokens(old: &TokenSequence, new: &TokenSequence) -> Vec<EditOp> {
    let actions = edit_actions(&old.tokens, &new.tokens);
    let (mut oi, mut ni) = (0, 0);
    actions
        .into_iter()
        .map(|action| {
            let token = match action {
                EditAction::Keep => {
                    oi += 1;
                    ni += 1;
                    old.tokens[oi - 1].clone()
                }
                EditAction::Del => {
                    oi += 1;
                    old.tokens[oi - 1].clone()
                }
                EditAction::Add => {
                    ni += 1;
                    new.tokens[ni - 1].clone()
                }
            };
            EditOp { action, token }
        })
        .collect()
}

/// Groups an edit op list into maximal spans. A run of deletions directly
/// followed by a run of insertions becomes one `Replace` span.
pub fn group_spans(ops: &[EditOp]) -> EditScript {
    let mut spans: Vec<EditSpan> = Vec::new();
    let mut i = 0;
    while i < ops.len() {
        let action = ops[i].action;
        let start = i;
        while i < ops.len() && ops[i].action == action {
            i += 1;
        }
        let run: Vec<Token> = ops[start..i].iter().map(|op| op.token.clone()).collect();
        match action {
            EditAction::Keep => spans.push(EditSpan::keep(run)),
            EditAction::Add => spans.push(EditSpan::add(run)),
            EditAction::Del => {
                let add_start = i;
                while i < ops.len() && ops[i].action == EditAction::Add {
                    i += 1;
                }
                if i > add_start {
                    let added = ops[add_start..i].iter().map(|op| op.token.clone()).collect();
                    spans.push(EditSpan::replace(run, added));
                } else {
                    spans.push(EditSpan::del(run));
                }
            }
        }
    }
    // Maximal runs never leave same-kind neighbours except Replace followed by
    // Replace, which the action alternation rules out.
    debug_assert!(EditScript::new(spans.clone()).is_ok());
    EditScript { spans }
}

/// [`group_spans`] plus a check that the ops reconstruct both sides.
pub fn group_spans_checked(
    old: &TokenSequence,
    new: &TokenSequence,
    ops: &[EditOp],
) -> Result<EditScript, DiffError> {
    let script = group_spans(ops);
    script.verify_against(old, new)?;
    Ok(script)
}

/// Lexes, diffs and groups in one step.
pub fn diff_code(old: &TokenSequence, new: &TokenSequence) -> EditScript {
    group_spans(&diff_tokens(old, new))
}

fn tag_token(tag: &str) -> Token {
    Token::new(tag, TokenKind::Tag).expect("tags are non-empty and whitespace free")
}

/// Renders the script with span delimiter tags.
pub fn render_tagged(script: &EditScript) -> TokenSequence {
    let mut out = Vec::new();
    for span in &script.spans {
        match span.kind {
            SpanKind::Keep => {
                out.push(tag_token(TAG_KEEP));
                out.extend(span.old_tokens.iter().cloned());
                out.push(tag_token(TAG_END_KEEP));
            }
            SpanKind::Add => {
                out.push(tag_token(TAG_ADD));
                out.extend(span.new_tokens.iter().cloned());
                out.push(tag_token(TAG_END_ADD));
            }
            SpanKind::Del => {
                out.push(tag_token(TAG_DEL));
                out.extend(span.old_tokens.iter().cloned());
                out.push(tag_token(TAG_END_DEL));
            }
            SpanKind::Replace => {
                out.push(tag_token(TAG_REPLACE_OLD));
                out.extend(span.old_tokens.iter().cloned());
                out.push(tag_token(TAG_REPLACE_NEW));
                out.extend(span.new_tokens.iter().cloned());
                out.push(tag_token(TAG_END_REPLACE));
            }
        }
    }
    TokenSequence::new(out, Origin::Code)
}

/// Tokens of the script in span order with the tags dropped: the flat,
/// unlabeled view of the same diff.
pub fn flatten_untagged(script: &EditScript) -> Vec<Token> {
    let mut out = Vec::new();
    for span in &script.spans {
        match span.kind {
            SpanKind::Keep | SpanKind::Del => out.extend(span.old_tokens.iter().cloned()),
            SpanKind::Add => out.extend(span.new_tokens.iter().cloned()),
            SpanKind::Replace => {
                out.extend(span.old_tokens.iter().cloned());
                out.extend(span.new_tokens.iter().cloned());
            }
        }
    }
    out
}

impl fmt::Display for EditScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_tagged(self).join())
    }
}

/// Parses the space-joined output of [`render_tagged`] back into a script.
pub fn parse_tagged(text: &str) -> Result<EditScript, DiffError> {
    #[derive(Clone, Copy)]
    enum State {
        Between,
        In(SpanKind),
        ReplaceNew,
    }
    let malformed = |position: usize, reason: String| DiffError::MalformedTagged { position, reason };

    let mut spans = Vec::new();
    let mut state = State::Between;
    let mut first: Vec<Token> = Vec::new();
    let mut second: Vec<Token> = Vec::new();

    for (position, word) in text.split_whitespace().enumerate() {
        state = match (state, word) {
            (State::Between, TAG_KEEP) => State::In(SpanKind::Keep),
            (State::Between, TAG_ADD) => State::In(SpanKind::Add),
            (State::Between, TAG_DEL) => State::In(SpanKind::Del),
            (State::Between, TAG_REPLACE_OLD) => State::In(SpanKind::Replace),
            (State::Between, other) => {
                return Err(malformed(position, format!("expected a span opener, found `{other}`")))
            }
            (State::In(SpanKind::Keep), TAG_END_KEEP) => {
                spans.push(EditSpan::keep(std::mem::take(&mut first)));
                State::Between
            }
            (State::In(SpanKind::Add), TAG_END_ADD) => {
                spans.push(EditSpan::add(std::mem::take(&mut first)));
                State::Between
            }
            (State::In(SpanKind::Del), TAG_END_DEL) => {
                spans.push(EditSpan::del(std::mem::take(&mut first)));
                State::Between
            }
            (State::In(SpanKind::Replace), TAG_REPLACE_NEW) => State::ReplaceNew,
            (State::ReplaceNew, TAG_END_REPLACE) => {
                spans.push(EditSpan::replace(
                    std::mem::take(&mut first),
                    std::mem::take(&mut second),
                ));
                State::Between
            }
            (_, tag) if is_diff_tag(tag) => {
                return Err(malformed(position, format!("unexpected tag `{tag}`")))
            }
            (s, word) => {
                let mut lexed = lex_code(word).tokens;
                if lexed.len() != 1 {
                    return Err(malformed(position, format!("`{word}` is not a single token")));
                }
                match s {
                    State::ReplaceNew => second.push(lexed.remove(0)),
                    _ => first.push(lexed.remove(0)),
                }
                s
            }
        };
    }
    if !matches!(state, State::Between) {
        return Err(malformed(text.split_whitespace().count(), "unterminated span".into()));
    }
    EditScript::new(spans)
}
