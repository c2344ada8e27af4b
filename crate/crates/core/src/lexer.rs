//! Flat lexical tokenization of source code and comment text.
//!
//! Tokens never contain whitespace: whitespace always ends a token, including
//! inside string and character literals. A literal therefore runs from its
//! opening quote to the matching closing quote or the first whitespace
//! character, whichever comes first. This keeps lexing idempotent on its own
//! space-joined output.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Identifier,
    Keyword,
    Literal,
    Operator,
    Punctuation,
    CommentWord,
    /// Reserved diff span delimiter such as `<Keep>`; never produced by lexing.
    Tag,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token {
    text: String,
    kind: TokenKind,
}

impl Token {
    /// Builds a token from pre-split text. Returns `None` when the text is
    /// empty or contains whitespace.
    pub fn new(text: impl Into<String>, kind: TokenKind) -> Option<Self> {
        let text = text.into();
        if text.is_empty() || text.chars().any(char::is_whitespace) {
            return None;
        }
        Some(Self { text, kind })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn kind(&self) -> TokenKind {
        self.kind
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Code,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<Token>,
    pub origin: Origin,
}

impl TokenSequence {
    pub fn new(tokens: Vec<Token>, origin: Origin) -> Self {
        Self { tokens, origin }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Token> {
        self.tokens.iter()
    }

    /// Space-joined token texts.
    pub fn join(&self) -> String {
        join_tokens(&self.tokens)
    }
}

pub fn join_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, tok) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&tok.text);
    }
    out
}

const JAVA_KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "false", "final", "finally",
    "float", "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long",
    "native", "new", "null", "package", "private", "protected", "public", "return", "short",
    "static", "strictfp", "super", "switch", "synchronized", "this", "throw", "throws",
    "transient", "true", "try", "var", "void", "volatile", "while",
];

const OPERATOR_CHARS: &str = "+-*/%=<>!&|^~?:";

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

fn is_quote(c: char) -> bool {
    c == '"' || c == '\''
}

/// Raw splitting shared by code and comment lexing. Kinds are assigned as for code.
fn split(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = if is_quote(c) {
            i += 1;
            while i < chars.len() && !chars[i].is_whitespace() {
                let cur = chars[i];
                i += 1;
                if cur == c {
                    break;
                }
                if cur == '\\' && i < chars.len() && !chars[i].is_whitespace() {
                    i += 1;
                }
            }
            TokenKind::Literal
        } else if c == '@' && chars.get(i + 1).is_some_and(|&n| is_word_char(n)) {
            i += 1;
            while i < chars.len() && is_word_char(chars[i]) {
                i += 1;
            }
            TokenKind::Identifier
        } else if c.is_ascii_digit() {
            while i < chars.len() && (is_word_char(chars[i]) || chars[i] == '.') {
                i += 1;
            }
            TokenKind::Literal
        } else if is_word_char(c) {
            while i < chars.len() && is_word_char(chars[i]) {
                i += 1;
            }
            TokenKind::Identifier
        } else {
            i += 1;
            if OPERATOR_CHARS.contains(c) {
                TokenKind::Operator
            } else {
                TokenKind::Punctuation
            }
        };
        let text: String = chars[start..i].iter().collect();
        let kind = if kind == TokenKind::Identifier && JAVA_KEYWORDS.binary_search(&text.as_str()).is_ok() {
            TokenKind::Keyword
        } else {
            kind
        };
        tokens.push(Token { text, kind });
    }
    tokens
}

/// Lexes source code. Never fails; unknown constructs become single-character tokens.
pub fn lex_code(source: &str) -> TokenSequence {
    TokenSequence::new(split(source), Origin::Code)
}

/// Lexes comment text after stripping Javadoc markers (`/**`, `*/`, leading `*`).
pub fn lex_comment(comment: &str) -> TokenSequence {
    let stripped = strip_comment_markers(comment);
    let tokens = split(&stripped)
        .into_iter()
        .map(|tok| match tok.kind {
            TokenKind::Identifier | TokenKind::Keyword => Token {
                text: tok.text,
                kind: TokenKind::CommentWord,
            },
            _ => tok,
        })
        .collect();
    TokenSequence::new(tokens, Origin::Comment)
}

fn strip_comment_markers(comment: &str) -> String {
    let mut body = comment.trim();
    if let Some(rest) = body.strip_prefix("/**") {
        body = rest;
    } else if let Some(rest) = body.strip_prefix("/*") {
        body = rest;
    }
    if let Some(rest) = body.strip_suffix("*/") {
        body = rest;
    }
    let mut out = String::with_capacity(body.len());
    for line in body.lines() {
        let line = line.trim_start();
        let line = line.trim_start_matches('*');
        out.push_str(line);
        out.push('\n');
    }
    out
}
