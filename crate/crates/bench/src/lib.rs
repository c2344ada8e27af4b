//! Input generators shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cci_core::dataset::{CciRecord, CommentType};
use cci_core::objective::BatchTensors;

const WORDS: [&str; 16] = [
    "int", "x", "=", "foo", "(", ")", ";", "return", "if", "{", "}", "bar", "String", "+", "1", "null",
];

/// A whitespace-joined pseudo-code snippet of `len` tokens.
pub fn snippet(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

/// `snippet` with roughly `rate` of its tokens replaced.
pub fn mutate(rng: &mut ChaCha8Rng, code: &str, rate: f64) -> String {
    code.split(' ')
        .map(|t| if rng.gen_bool(rate) { WORDS[rng.gen_range(0..WORDS.len())] } else { t })
        .collect::<Vec<_>>()
        .join(" ")
}

/// An old/new pair of `len` tokens.
pub fn code_pair(seed: u64, len: usize, rate: f64) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let old = snippet(&mut rng, len);
    let new = mutate(&mut rng, &old, rate);
    (old, new)
}

pub fn records(seed: u64, n: usize, len: usize) -> Vec<CciRecord> {
    (0..n)
        .map(|i| {
            let (old_code, new_code) = code_pair(seed + i as u64, len, 0.1);
            CciRecord {
                id: format!("r{i}"),
                comment_type: CommentType::ALL[i % 3],
                comment: "@return the String value of foo".into(),
                old_code,
                new_code,
                label: (i % 2) as u8,
            }
        })
        .collect()
}

/// Random unit-norm representations and probabilities with alternating labels.
pub fn batch(seed: u64, b: usize, d: usize) -> BatchTensors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |rng: &mut ChaCha8Rng| {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    BatchTensors {
        comment: (0..b).map(|_| unit(&mut rng)).collect(),
        diff: (0..b).map(|_| unit(&mut rng)).collect(),
        probs: (0..b).map(|_| rng.gen_range(0.01..0.99)).collect(),
        labels: (0..b).map(|i| (i % 2) as u8).collect(),
    }
}
