//! Checkpoint file format.
//!
//! ```text
//! CCIMODEL 1
//! dim 64
//! max_len 256
//! vocab_size 812
//! attention false
//! input_mode tagged
//! tau 0.08
//! alpha 1
//! lambda 0.1
//! threshold 0.5
//! epoch 4
//! validation_f1 0.97
//! vocab
//! <pad>
//! ...              (vocab_size lines)
//! end_header
//! <little-endian f32 payload, tensors in ModelParams::tensors order>
//! ```

use std::path::Path;

use thiserror::Error;

use crate::encoder::{InputMode, ModelConfig, ModelParams};
use crate::objective::ContrastiveConfig;
use crate::vocab::{VocabError, Vocabulary};

pub const MAGIC: &str = "CCIMODEL 1";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("not a model file (bad magic line)")]
    Magic,
    #[error("header line {line}: {reason}")]
    Header { line: usize, reason: String },
    #[error("payload holds {actual} bytes, header implies {expected}")]
    PayloadSize { expected: usize, actual: usize },
    #[error("payload contains a non-finite value")]
    NonFinite,
    #[error(transparent)]
    Vocab(#[from] VocabError),
}

/// A trained model together with everything needed to run it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub vocab: Vocabulary,
    pub loss: ContrastiveConfig,
    pub threshold: f64,
    pub epoch: usize,
    pub validation_f1: f64,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let c = self.params.config;
        let mut header = String::new();
        let mut field = |k: &str, v: String| {
            header.push_str(k);
            header.push(' ');
            header.push_str(&v);
            header.push('\n');
        };
        field("dim", c.dim.to_string());
        field("max_len", c.max_len.to_string());
        field("vocab_size", c.vocab_size.to_string());
        field("attention", c.attention.to_string());
        field("input_mode", c.input_mode.to_string());
        field("tau", self.loss.tau.to_string());
        field("alpha", self.loss.alpha.to_string());
        field("lambda", self.loss.lambda.to_string());
        field("threshold", self.threshold.to_string());
        field("epoch", self.epoch.to_string());
        field("validation_f1", self.validation_f1.to_string());

        let mut out = format!("{MAGIC}\n{header}vocab\n").into_bytes();
        for tok in self.vocab.tokens() {
            out.extend_from_slice(tok.as_bytes());
            out.push(b'\n');
        }
        out.extend_from_slice(b"end_header\n");
        for t in self.params.tensors() {
            for &x in t {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PersistError> {
        let mut reader = Lines { bytes, pos: 0, line: 0 };
        if reader.next_line()? != MAGIC {
            return Err(PersistError::Magic);
        }
        let mut get = |key: &str| -> Result<(String, usize), PersistError> {
            let text = reader.next_line()?;
            let line = reader.line;
            match text.split_once(' ') {
                Some((k, v)) if k == key => Ok((v.to_string(), line)),
                _ => Err(PersistError::Header { line, reason: format!("expected '{key} <value>'") }),
            }
        };
        fn parse<T: std::str::FromStr>((v, line): (String, usize), key: &str) -> Result<T, PersistError> {
            v.parse().map_err(|_| PersistError::Header { line, reason: format!("bad {key} value '{v}'") })
        }
        let dim: usize = parse(get("dim")?, "dim")?;
        let max_len: usize = parse(get("max_len")?, "max_len")?;
        let vocab_size: usize = parse(get("vocab_size")?, "vocab_size")?;
        let attention: bool = parse(get("attention")?, "attention")?;
        let input_mode: InputMode = parse(get("input_mode")?, "input_mode")?;
        let tau: f64 = parse(get("tau")?, "tau")?;
        let alpha: f64 = parse(get("alpha")?, "alpha")?;
        let lambda: f64 = parse(get("lambda")?, "lambda")?;
        let threshold: f64 = parse(get("threshold")?, "threshold")?;
        let epoch: usize = parse(get("epoch")?, "epoch")?;
        let validation_f1: f64 = parse(get("validation_f1")?, "validation_f1")?;
        if dim == 0 {
            return Err(PersistError::Header { line: 2, reason: "dim must be positive".into() });
        }

        if reader.next_line()? != "vocab" {
            return Err(PersistError::Header { line: reader.line, reason: "expected 'vocab'".into() });
        }
        let mut tokens = Vec::with_capacity(vocab_size);
        for _ in 0..vocab_size {
            tokens.push(reader.next_line()?.to_string());
        }
        if reader.next_line()? != "end_header" {
            return Err(PersistError::Header { line: reader.line, reason: "expected 'end_header'".into() });
        }
        let vocab = Vocabulary::from_tokens(tokens)?;

        let config = ModelConfig { vocab_size, dim, max_len, attention, input_mode };
        let mut params = ModelParams::zeros(config);
        let payload = &bytes[reader.pos..];
        let expected = params.num_params() * 4;
        if payload.len() != expected {
            return Err(PersistError::PayloadSize { expected, actual: payload.len() });
        }
        let mut chunks = payload.chunks_exact(4);
        for t in params.tensors_mut() {
            for x in t {
                let raw = chunks.next().expect("length checked above");
                *x = f32::from_le_bytes(raw.try_into().expect("4-byte chunk")) as f64;
            }
        }
        if !params.is_finite() {
            return Err(PersistError::NonFinite);
        }
        Ok(Self {
            params,
            vocab,
            loss: ContrastiveConfig { tau, alpha, lambda },
            threshold,
            epoch,
            validation_f1,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PersistError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes())
            .map_err(|source| PersistError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PersistError> {
        let path = path.as_ref();
        let bytes =
            std::fs::read(path).map_err(|source| PersistError::Io { path: path.display().to_string(), source })?;
        Self::from_bytes(&bytes)
    }
}

struct Lines<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<&'a str, PersistError> {
        self.line += 1;
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| PersistError::Header { line: self.line, reason: "unexpected end of header".into() })?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end])
            .map_err(|_| PersistError::Header { line: self.line, reason: "not UTF-8".into() })
    }
}
