//! Generated toy corpus for smoke-testing training.
//!
//! Every record's comment names a type that occurs in the old code. In
//! inconsistent records (label 1) the change swaps that type for another one;
//! in consistent records (label 0) the change only swaps an unrelated
//! identifier and the named type survives.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{CciRecord, CommentType};

pub const TYPE_NAMES: [&str; 12] = [
    "HttpServletRequest",
    "AtmosphereRequest",
    "String",
    "Integer",
    "Long",
    "Request",
    "Response",
    "Session",
    "Handler",
    "Context",
    "Buffer",
    "Channel",
];

pub const FILLERS: [&str; 12] =
    ["key", "id", "name", "index", "count", "offset", "limit", "path", "token", "size", "flag", "mode"];

const CODE: [&str; 5] = [
    "return ({T}) cache.get({F});",
    "{T} value = factory.create({F}, 16);",
    "if (obj instanceof {T}) { handle(obj, {F}); }",
    "List<{T}> items = load({F});",
    "public void process({T} input, int {F}) { run(input); }",
];

const RETURN_COMMENTS: [&str; 3] =
    ["@return the {T} for this call", "@return a {T} built from the input", "@return the matching {T} or null"];
const PARAM_COMMENTS: [&str; 3] =
    ["@param input the {T} to process", "@param value {T} used by the handler", "@param target the {T} instance"];
const SUMMARY_COMMENTS: [&str; 3] =
    ["Looks up the {T} in the cache.", "Creates a new {T} for the caller.", "Handles an incoming {T} object."];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyConfig {
    pub n_train: usize,
    pub n_valid: usize,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self { n_train: 400, n_valid: 100, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyCorpus {
    pub train: Vec<CciRecord>,
    pub valid: Vec<CciRecord>,
}

fn pick_two<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> (&'a str, &'a str) {
    let mut two = pool.choose_multiple(rng, 2);
    (two.next().copied().unwrap(), two.next().copied().unwrap())
}

fn toy_record(rng: &mut ChaCha8Rng, id: String, label: u8) -> CciRecord {
    let comment_type = CommentType::ALL[rng.gen_range(0..3)];
    let comments = match comment_type {
        CommentType::Return => &RETURN_COMMENTS,
        CommentType::Param => &PARAM_COMMENTS,
        CommentType::Summary => &SUMMARY_COMMENTS,
    };
    let template = CODE.choose(rng).copied().unwrap();
    let (ty, other_ty) = pick_two(rng, &TYPE_NAMES);
    let (filler, other_filler) = pick_two(rng, &FILLERS);
    let fill = |t: &str, f: &str| template.replace("{T}", t).replace("{F}", f);
    let old_code = fill(ty, filler);
    let new_code = if label == 1 { fill(other_ty, filler) } else { fill(ty, other_filler) };
    CciRecord {
        id,
        comment_type,
        comment: comments.choose(rng).unwrap().replace("{T}", ty),
        old_code,
        new_code,
        label,
    }
}

/// Balanced train and validation splits, fully determined by `cfg.seed`.
pub fn toy_corpus(cfg: ToyConfig) -> ToyCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut split = |name: &str, n: usize| -> Vec<CciRecord> {
        let mut out: Vec<CciRecord> =
            (0..n).map(|i| toy_record(&mut rng, format!("toy-{name}-{i:04}"), (i % 2) as u8)).collect();
        out.shuffle(&mut rng);
        out
    };
    let train = split("train", cfg.n_train);
    let valid = split("valid", cfg.n_valid);
    ToyCorpus { train, valid }
}
