//! Canonical JSONL records, preprocessing into tagged diffs, and split statistics.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::decompose::{decompose, DiffDecomposition};
use crate::diff::{diff_code, parse_tagged, render_tagged, EditScript};
use crate::lexer::{lex_code, TokenSequence};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: invalid JSON: {message}")]
    Json { line: usize, message: String },
    #[error("line {line}: field '{field}': {reason}")]
    Field {
        line: usize,
        field: String,
        reason: String,
    },
    #[error("line {line}: {reason}")]
    Invariant { line: usize, reason: String },
    #[error("subset ids not present in the test file: {}", missing.join(", "))]
    MissingIds { missing: Vec<String> },
}

impl DatasetError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    fn field(line: usize, field: &str, reason: impl Into<String>) -> Self {
        Self::Field { line, field: field.to_string(), reason: reason.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommentType {
    Return,
    Param,
    Summary,
}

impl CommentType {
    pub const ALL: [CommentType; 3] = [CommentType::Return, CommentType::Param, CommentType::Summary];

    pub fn as_str(self) -> &'static str {
        match self {
            CommentType::Return => "return",
            CommentType::Param => "param",
            CommentType::Summary => "summary",
        }
    }
}

impl fmt::Display for CommentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CommentType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "return" => Ok(CommentType::Return),
            "param" => Ok(CommentType::Param),
            "summary" => Ok(CommentType::Summary),
            other => Err(format!("unknown comment type '{other}' (expected return, param or summary)")),
        }
    }
}

/// One example: a code change and the comment written for the old code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CciRecord {
    pub id: String,
    pub comment_type: CommentType,
    /// Comment as it stood before the change.
    pub comment: String,
    pub old_code: String,
    pub new_code: String,
    /// 0 = consistent, 1 = inconsistent.
    pub label: u8,
}

impl CciRecord {
    pub fn is_inconsistent(&self) -> bool {
        self.label == 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessedRecord {
    #[serde(flatten)]
    pub record: CciRecord,
    pub tagged_diff: String,
    pub s_old_text: String,
    pub s_new_text: String,
    pub s_unchanged_text: String,
}

impl PreprocessedRecord {
    pub fn from_record(record: CciRecord) -> Self {
        let script = diff_code(&lex_code(&record.old_code), &lex_code(&record.new_code));
        let parts = decompose(&script);
        Self {
            tagged_diff: render_tagged(&script).join(),
            s_old_text: parts.s_old_text(),
            s_new_text: parts.s_new_text(),
            s_unchanged_text: parts.s_unchanged_text(),
            record,
        }
    }

    pub fn script(&self) -> Result<EditScript, crate::diff::DiffError> {
        parse_tagged(&self.tagged_diff)
    }

    /// Checks that the tagged diff re-parses and agrees with the decomposition text fields.
    pub fn check(&self) -> Result<(), String> {
        let script = self.script().map_err(|e| e.to_string())?;
        let parts = decompose(&script);
        if parts.s_old_text() != self.s_old_text {
            return Err("s_old_text does not match tagged_diff".into());
        }
        if parts.s_new_text() != self.s_new_text {
            return Err("s_new_text does not match tagged_diff".into());
        }
        if parts.s_unchanged_text() != self.s_unchanged_text {
            return Err("s_unchanged_text does not match tagged_diff".into());
        }
        Ok(())
    }

    pub fn decomposition(&self) -> DiffDecomposition {
        DiffDecomposition {
            s_old: lex_code(&self.s_old_text).tokens,
            s_new: lex_code(&self.s_new_text).tokens,
            s_unchanged: lex_code(&self.s_unchanged_text).tokens,
        }
    }

    pub fn tagged_tokens(&self) -> TokenSequence {
        // Tags lex into `<`, `Keep`, `>` so re-render from the parsed script.
        match self.script() {
            Ok(script) => render_tagged(&script),
            Err(_) => lex_code(&self.tagged_diff),
        }
    }
}

/// Upstream formats [`load_records`] can read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    CanonicalJsonl,
    /// JITDATA-style field names (`old_comment_raw`, `old_code_raw`,
    /// `new_code_raw`); the comment type comes from the file, not the line.
    JitData { comment_type: CommentType },
}

fn string_field(obj: &Map<String, Value>, line: usize, key: &str, name: &str) -> Result<String, DatasetError> {
    match obj.get(key) {
        None | Some(Value::Null) => Err(DatasetError::field(line, name, "missing")),
        Some(Value::String(s)) if s.trim().is_empty() && name != "id" => {
            Err(DatasetError::field(line, name, "must be non-empty"))
        }
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Number(n)) if name == "id" => Ok(n.to_string()),
        Some(_) => Err(DatasetError::field(line, name, "must be a string")),
    }
}

fn label_field(obj: &Map<String, Value>, line: usize) -> Result<u8, DatasetError> {
    match obj.get("label") {
        None | Some(Value::Null) => Err(DatasetError::field(line, "label", "missing")),
        Some(Value::Number(n)) => match n.as_u64() {
            Some(0) => Ok(0),
            Some(1) => Ok(1),
            _ => Err(DatasetError::field(line, "label", format!("must be 0 or 1, got {n}"))),
        },
        Some(Value::Bool(b)) => Ok(u8::from(*b)),
        Some(other) => Err(DatasetError::field(line, "label", format!("must be 0 or 1, got {other}"))),
    }
}

fn record_from_value(value: Value, line: usize, format: RecordFormat) -> Result<CciRecord, DatasetError> {
    let Value::Object(obj) = value else {
        return Err(DatasetError::Invariant { line, reason: "record must be a JSON object".into() });
    };
    let (comment_key, old_key, new_key) = match format {
        RecordFormat::CanonicalJsonl => ("comment", "old_code", "new_code"),
        RecordFormat::JitData { .. } => ("old_comment_raw", "old_code_raw", "new_code_raw"),
    };
    let comment_type = match format {
        RecordFormat::JitData { comment_type } => comment_type,
        RecordFormat::CanonicalJsonl => {
            let raw = string_field(&obj, line, "comment_type", "comment_type")?;
            raw.parse().map_err(|e| DatasetError::field(line, "comment_type", e))?
        }
    };
    let id = string_field(&obj, line, "id", "id")?;
    if id.is_empty() {
        return Err(DatasetError::field(line, "id", "must be non-empty"));
    }
    Ok(CciRecord {
        id,
        comment_type,
        comment: string_field(&obj, line, comment_key, "comment")?,
        old_code: string_field(&obj, line, old_key, "old_code")?,
        new_code: string_field(&obj, line, new_key, "new_code")?,
        label: label_field(&obj, line)?,
    })
}

/// Calls `f` with (1-based line number, parsed JSON) for each non-blank line.
fn for_each_json_line(
    path: &Path,
    mut f: impl FnMut(usize, Value) -> Result<(), DatasetError>,
) -> Result<(), DatasetError> {
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    let reader = BufReader::new(file);
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| DatasetError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line)
            .map_err(|e| DatasetError::Json { line: line_no, message: e.to_string() })?;
        f(line_no, value)?;
    }
    Ok(())
}

/// Loads and validates records in file order. An empty file yields no records.
pub fn load_records(path: impl AsRef<Path>, format: RecordFormat) -> Result<Vec<CciRecord>, DatasetError> {
    let mut out = Vec::new();
    for_each_json_line(path.as_ref(), |line, value| {
        out.push(record_from_value(value, line, format)?);
        Ok(())
    })?;
    Ok(out)
}

/// Loads preprocessed records, checking both the record schema and that each
/// tagged diff agrees with its decomposition fields.
pub fn load_preprocessed(path: impl AsRef<Path>) -> Result<Vec<PreprocessedRecord>, DatasetError> {
    let mut out = Vec::new();
    for_each_json_line(path.as_ref(), |line, value| {
        let extra = |key: &str| -> Result<String, DatasetError> {
            match value.get(key) {
                Some(Value::String(s)) => Ok(s.clone()),
                None | Some(Value::Null) => Err(DatasetError::field(line, key, "missing")),
                Some(_) => Err(DatasetError::field(line, key, "must be a string")),
            }
        };
        let tagged_diff = extra("tagged_diff")?;
        let s_old_text = extra("s_old_text")?;
        let s_new_text = extra("s_new_text")?;
        let s_unchanged_text = extra("s_unchanged_text")?;
        let record = record_from_value(value, line, RecordFormat::CanonicalJsonl)?;
        let pre = PreprocessedRecord { record, tagged_diff, s_old_text, s_new_text, s_unchanged_text };
        pre.check().map_err(|reason| DatasetError::Invariant { line, reason })?;
        out.push(pre);
        Ok(())
    })?;
    Ok(out)
}

/// Writes one JSON object per `\n`-terminated line.
pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("records serialize to JSON");
        w.write_all(line.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .map_err(|e| DatasetError::io(path, e))?;
    }
    w.flush().map_err(|e| DatasetError::io(path, e))
}

/// Lexes, diffs and decomposes every record. Output order follows input order.
pub fn preprocess(records: &[CciRecord]) -> Vec<PreprocessedRecord> {
    records
        .par_iter()
        .map(|r| PreprocessedRecord::from_record(r.clone()))
        .collect()
}

/// Reads a validated-subset sidecar: one record id per line, blanks ignored.
pub fn load_id_list(path: impl AsRef<Path>) -> Result<Vec<String>, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// Selects the records named in `ids`, keeping file order. Every id must be present.
pub fn select_subset<'a>(
    records: &'a [PreprocessedRecord],
    ids: &[String],
) -> Result<Vec<&'a PreprocessedRecord>, DatasetError> {
    let present: HashSet<&str> = records.iter().map(|r| r.record.id.as_str()).collect();
    let missing: Vec<String> = ids.iter().filter(|id| !present.contains(id.as_str())).cloned().collect();
    if !missing.is_empty() {
        return Err(DatasetError::MissingIds { missing });
    }
    let wanted: HashSet<&str> = ids.iter().map(String::as_str).collect();
    Ok(records.iter().filter(|r| wanted.contains(r.record.id.as_str())).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub total: usize,
}

impl SplitCounts {
    fn bump(&mut self, split: Split) {
        match split {
            Split::Train => self.train += 1,
            Split::Validation => self.validation += 1,
            Split::Test => self.test += 1,
        }
        self.total += 1;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitStats {
    pub per_type: BTreeMap<CommentType, SplitCounts>,
    pub all: SplitCounts,
    /// Label-1 counts over all comment types.
    pub inconsistent: SplitCounts,
}

impl SplitStats {
    pub fn counts(&self, comment_type: CommentType) -> SplitCounts {
        self.per_type.get(&comment_type).copied().unwrap_or_default()
    }

    pub fn render_table(&self) -> String {
        let mut out = format!(
            "{:<12} {:>8} {:>11} {:>8} {:>8}\n",
            "Comment", "Train", "Validation", "Test", "Total"
        );
        let row = |name: &str, c: SplitCounts| {
            format!("{:<12} {:>8} {:>11} {:>8} {:>8}\n", name, c.train, c.validation, c.test, c.total)
        };
        for ty in CommentType::ALL {
            out.push_str(&row(&format!("@{ty}"), self.counts(ty)));
        }
        out.push_str(&row("All", self.all));
        out.push_str(&row("label=1", self.inconsistent));
        out
    }
}

pub fn compute_stats(splits: &[(Split, &[CciRecord])]) -> SplitStats {
    let mut stats = SplitStats::default();
    for ty in CommentType::ALL {
        stats.per_type.insert(ty, SplitCounts::default());
    }
    for (split, records) in splits {
        for r in records.iter() {
            stats.per_type.entry(r.comment_type).or_default().bump(*split);
            stats.all.bump(*split);
            if r.is_inconsistent() {
                stats.inconsistent.bump(*split);
            }
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, old: &str, new: &str, label: u8) -> CciRecord {
        CciRecord {
            id: id.into(),
            comment_type: CommentType::Return,
            comment: "@return the value".into(),
            old_code: old.into(),
            new_code: new.into(),
            label,
        }
    }

    fn temp_with(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_well_formed_lines() {
        let recs: Vec<CciRecord> = (0..4).map(|i| record(&format!("r{i}"), "a", "b", (i % 2) as u8)).collect();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_jsonl(f.path(), &recs).unwrap();
        assert_eq!(load_records(f.path(), RecordFormat::CanonicalJsonl).unwrap(), recs);
    }

    #[test]
    fn bad_label_names_line_and_field() {
        let good = serde_json::to_string(&record("a", "x", "y", 0)).unwrap();
        let bad = good.replace("\"label\":0", "\"label\":2");
        let f = temp_with(&format!("{good}\n{bad}\n"));
        let err = load_records(f.path(), RecordFormat::CanonicalJsonl).unwrap_err();
        match &err {
            DatasetError::Field { line, field, .. } => {
                assert_eq!(*line, 2);
                assert_eq!(field, "label");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn malformed_json_names_line() {
        let good = serde_json::to_string(&record("a", "x", "y", 0)).unwrap();
        let f = temp_with(&format!("{good}\n{good}\n{{not json\n"));
        let err = load_records(f.path(), RecordFormat::CanonicalJsonl).unwrap_err();
        assert!(matches!(err, DatasetError::Json { line: 3, .. }));
    }

    #[test]
    fn missing_field_is_reported() {
        let f = temp_with("{\"id\":\"a\",\"comment_type\":\"param\",\"comment\":\"c\",\"old_code\":\"x\",\"label\":1}\n");
        let err = load_records(f.path(), RecordFormat::CanonicalJsonl).unwrap_err();
        assert!(matches!(err, DatasetError::Field { line: 1, ref field, .. } if field == "new_code"));
    }

    #[test]
    fn empty_file_is_empty_list() {
        let f = temp_with("");
        assert!(load_records(f.path(), RecordFormat::CanonicalJsonl).unwrap().is_empty());
    }

    #[test]
    fn jitdata_adapter_maps_field_names() {
        let f = temp_with(
            "{\"id\":7,\"old_comment_raw\":\"@return x\",\"old_code_raw\":\"return x;\",\"new_code_raw\":\"return y;\",\"label\":1}\n",
        );
        let recs = load_records(f.path(), RecordFormat::JitData { comment_type: CommentType::Return }).unwrap();
        assert_eq!(recs[0].id, "7");
        assert_eq!(recs[0].old_code, "return x;");
        assert_eq!(recs[0].comment_type, CommentType::Return);
    }

    #[test]
    fn unchanged_code_is_single_keep() {
        let pre = PreprocessedRecord::from_record(record("a", "return x;", "return  x ;", 0));
        assert_eq!(pre.tagged_diff, "<Keep> return x ; <EndKeep>");
        assert!(pre.s_old_text.is_empty() && pre.s_new_text.is_empty());
        assert_eq!(pre.s_unchanged_text, "return x ;");
    }

    #[test]
    fn disjoint_code_is_single_replace() {
        let pre = PreprocessedRecord::from_record(record("a", "a b c", "x y", 1));
        assert_eq!(pre.tagged_diff, "<ReplaceOld> a b c <ReplaceNew> x y <EndReplace>");
        pre.check().unwrap();
    }

    #[test]
    fn check_catches_tampering() {
        let mut pre = PreprocessedRecord::from_record(record("a", "a b c", "a x c", 1));
        pre.check().unwrap();
        pre.s_old_text = "q".into();
        assert!(pre.check().is_err());
    }

    #[test]
    fn preprocess_keeps_order_and_round_trips() {
        let recs: Vec<CciRecord> = (0..20)
            .map(|i| record(&format!("r{i}"), &format!("int v{i} = {i};"), "int w = 0;", (i % 2) as u8))
            .collect();
        let pre = preprocess(&recs);
        assert!(pre.iter().zip(&recs).all(|(p, r)| &p.record == r));
        let f = tempfile::NamedTempFile::new().unwrap();
        write_jsonl(f.path(), &pre).unwrap();
        assert_eq!(load_preprocessed(f.path()).unwrap(), pre);
        // Preprocessed output is also readable as canonical records.
        assert_eq!(load_records(f.path(), RecordFormat::CanonicalJsonl).unwrap(), recs);
    }

    #[test]
    fn subset_selection() {
        let pre = preprocess(&[record("a", "x", "y", 0), record("b", "x", "y", 1), record("c", "x", "z", 1)]);
        let picked = select_subset(&pre, &["c".into(), "a".into()]).unwrap();
        assert_eq!(picked.len(), 2);
        let err = select_subset(&pre, &["a".into(), "zz".into()]).unwrap_err();
        assert!(err.to_string().contains("zz"));
    }

    #[test]
    fn stats_empty_and_counts() {
        let empty = compute_stats(&[]);
        assert_eq!(empty.all, SplitCounts::default());
        let recs = vec![record("a", "x", "y", 1), record("b", "x", "y", 0)];
        let stats = compute_stats(&[(Split::Train, &recs), (Split::Test, &recs[..1])]);
        assert_eq!(stats.all, SplitCounts { train: 2, validation: 0, test: 1, total: 3 });
        assert_eq!(stats.inconsistent.total, 2);
        assert_eq!(stats.counts(CommentType::Param).total, 0);
    }
}
