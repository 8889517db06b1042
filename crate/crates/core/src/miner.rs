//! Fix-revision discovery and hunk extraction.
//!
//! Fix revisions are found by keyword search over log messages. Their
//! unified diffs are split into hunks and every hunk yields a (bug, fix)
//! text pair: the preimage and postimage of the changed region, rebuilt from
//! the `-`/`+`/context lines of the diff itself.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use chrono::{DateTime, SecondsFormat, Utc};
use regex::{Regex, RegexBuilder};
use thiserror::Error;

use crate::par::Execution;
use crate::tsv;

/// Keyword alternatives used to spot fix revisions.
pub const DEFAULT_FIX_PATTERN: &str = r"fix(e[ds])?|bugs?|patches?|defects?|faults?";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevisionRecord {
    pub id: String,
    pub timestamp: DateTime<Utc>,
    pub message: String,
    pub changed_paths: Vec<String>,
}

impl RevisionRecord {
    pub fn new(id: impl Into<String>, timestamp: DateTime<Utc>, message: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            timestamp,
            message: message.into(),
            changed_paths: Vec::new(),
        }
    }

    /// `id<TAB>timestamp<TAB>message`, message newlines escaped.
    pub fn to_log_line(&self) -> String {
        format!(
            "{}\t{}\t{}",
            self.id,
            self.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
            tsv::escape(&self.message)
        )
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log line {line}: expected `id<TAB>timestamp<TAB>message`")]
    Fields { line: usize },
    #[error("log line {line}: empty revision id")]
    EmptyId { line: usize },
    #[error("log line {line}: bad timestamp `{value}`: {source}")]
    Timestamp {
        line: usize,
        value: String,
        source: chrono::ParseError,
    },
}

pub fn parse_log(text: &str) -> Result<Vec<RevisionRecord>, LogError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut fields = raw.splitn(3, '\t');
        let (Some(id), Some(ts), Some(msg)) = (fields.next(), fields.next(), fields.next()) else {
            return Err(LogError::Fields { line });
        };
        if id.is_empty() {
            return Err(LogError::EmptyId { line });
        }
        let timestamp = DateTime::parse_from_rfc3339(ts)
            .map_err(|source| LogError::Timestamp {
                line,
                value: ts.to_string(),
                source,
            })?
            .with_timezone(&Utc);
        out.push(RevisionRecord::new(id, timestamp, tsv::unescape(msg)));
    }
    Ok(out)
}

/// Case-insensitive, word-bounded keyword matcher over log messages.
#[derive(Debug, Clone)]
pub struct FixKeywords {
    regex: Regex,
}

impl FixKeywords {
    /// Wraps `alternatives` in word boundaries and compiles it
    /// case-insensitively.
    pub fn new(alternatives: &str) -> Result<Self, regex::Error> {
        let regex = RegexBuilder::new(&format!(r"\b(?:{alternatives})\b"))
            .case_insensitive(true)
            .build()?;
        Ok(Self { regex })
    }

    pub fn is_match(&self, message: &str) -> bool {
        self.regex.is_match(message)
    }

    /// Keeps the entries whose message matches, in input order.
    pub fn scan(&self, entries: &[RevisionRecord]) -> Vec<RevisionRecord> {
        entries.iter().filter(|r| self.is_match(&r.message)).cloned().collect()
    }
}

impl Default for FixKeywords {
    fn default() -> Self {
        static DEFAULT: OnceLock<FixKeywords> = OnceLock::new();
        DEFAULT
            .get_or_init(|| FixKeywords::new(DEFAULT_FIX_PATTERN).expect("default pattern compiles"))
            .clone()
    }
}

pub fn scan_fix_revisions(entries: &[RevisionRecord]) -> Vec<RevisionRecord> {
    FixKeywords::default().scan(entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LineRange {
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DiffLine {
    Context(String),
    Removed(String),
    Added(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hunk {
    pub file_path: String,
    pub bug_range: LineRange,
    pub fix_range: LineRange,
    pub bug_lines: Vec<String>,
    pub fix_lines: Vec<String>,
    /// Ordinal of the hunk within its revision's diff.
    pub hunk_index: usize,
    /// Diff body in original order; kept so the hunk renders back verbatim.
    pub body: Vec<DiffLine>,
    /// Text after the closing `@@` of the header (often a function name).
    pub section: String,
}

impl Hunk {
    pub fn from_body(file_path: impl Into<String>, bug_start: usize, fix_start: usize, hunk_index: usize, body: Vec<DiffLine>) -> Hunk {
        let mut bug_lines = Vec::new();
        let mut fix_lines = Vec::new();
        for line in &body {
            match line {
                DiffLine::Context(s) => {
                    bug_lines.push(s.clone());
                    fix_lines.push(s.clone());
                }
                DiffLine::Removed(s) => bug_lines.push(s.clone()),
                DiffLine::Added(s) => fix_lines.push(s.clone()),
            }
        }
        Hunk {
            file_path: file_path.into(),
            bug_range: LineRange {
                start: bug_start,
                len: bug_lines.len(),
            },
            fix_range: LineRange {
                start: fix_start,
                len: fix_lines.len(),
            },
            bug_lines,
            fix_lines,
            hunk_index,
            body,
            section: String::new(),
        }
    }

    pub fn bug_text(&self) -> String {
        self.bug_lines.join("\n")
    }

    pub fn fix_text(&self) -> String {
        self.fix_lines.join("\n")
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "@@ -{},{} +{},{} @@{}\n",
            self.bug_range.start, self.bug_range.len, self.fix_range.start, self.fix_range.len, self.section
        );
        for line in &self.body {
            let (mark, text) = match line {
                DiffLine::Context(s) => (' ', s),
                DiffLine::Removed(s) => ('-', s),
                DiffLine::Added(s) => ('+', s),
            };
            out.push(mark);
            out.push_str(text);
            out.push('\n');
        }
        out
    }
}

/// Renders hunks as a multi-file unified diff; consecutive hunks of the same
/// file share one file header.
pub fn render_diff(hunks: &[Hunk]) -> String {
    let mut out = String::new();
    let mut current: Option<&str> = None;
    for h in hunks {
        if current != Some(h.file_path.as_str()) {
            let _ = writeln!(out, "--- a/{}\n+++ b/{}", h.file_path, h.file_path);
            current = Some(&h.file_path);
        }
        out.push_str(&h.render());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("line {line}: malformed hunk header `{text}`")]
    MalformedHeader { line: usize, text: String },
    #[error("line {line}: hunk body does not match the counts in its header at line {header_line}")]
    LineCountMismatch { line: usize, header_line: usize },
}

impl DiffError {
    pub fn line(&self) -> usize {
        match *self {
            DiffError::MalformedHeader { line, .. } | DiffError::LineCountMismatch { line, .. } => line,
        }
    }
}

fn hunk_header_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@(.*)$").expect("valid regex"))
}

fn header_path(raw: &str) -> &str {
    // svn and GNU diff append `\t<timestamp or revision>` to the path.
    raw.split('\t').next().unwrap_or(raw).trim_end()
}

fn file_path_of(old: &str, new: &str) -> String {
    let strip = |p: &'_ str, prefix: &str| -> String { p.strip_prefix(prefix).unwrap_or(p).to_string() };
    let git_style = (old.starts_with("a/") || old == "/dev/null") && (new.starts_with("b/") || new == "/dev/null");
    let (old, new) = if git_style {
        (strip(old, "a/"), strip(new, "b/"))
    } else {
        (old.to_string(), new.to_string())
    };
    if new == "/dev/null" {
        old
    } else {
        new
    }
}

/// Splits a unified diff into hunks, one per `@@` section.
pub fn extract_hunks(diff_text: &str) -> Result<Vec<Hunk>, DiffError> {
    let lines: Vec<&str> = diff_text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    // `split` yields a trailing empty piece for newline-terminated input.
    let n = if lines.last() == Some(&"") { lines.len() - 1 } else { lines.len() };
    let is_file_header = |i: usize| {
        lines[i].starts_with("--- ") && i + 1 < n && lines[i + 1].starts_with("+++ ")
    };

    let mut hunks = Vec::new();
    let mut file = String::new();
    let mut i = 0;
    while i < n {
        let line = lines[i];
        if is_file_header(i) {
            file = file_path_of(header_path(&line[4..]), header_path(&lines[i + 1][4..]));
            i += 2;
            continue;
        }
        if !line.starts_with("@@") {
            if matches!(line.chars().next(), Some('+' | '-')) && !line.starts_with("---") && !line.starts_with("+++") {
                // A change line outside any hunk means a previous header under-counted.
                if !hunks.is_empty() {
                    return Err(DiffError::LineCountMismatch {
                        line: i + 1,
                        header_line: last_header_line(&lines[..i]).unwrap_or(i + 1),
                    });
                }
            }
            i += 1;
            continue;
        }
        let header_line = i + 1;
        let caps = hunk_header_regex().captures(line).ok_or_else(|| DiffError::MalformedHeader {
            line: header_line,
            text: line.to_string(),
        })?;
        let num = |idx: usize| -> Result<usize, DiffError> {
            caps.get(idx).map_or(Ok(1), |m| {
                m.as_str().parse().map_err(|_| DiffError::MalformedHeader {
                    line: header_line,
                    text: line.to_string(),
                })
            })
        };
        let (bug_start, bug_len, fix_start, fix_len) = (num(1)?, num(2)?, num(3)?, num(4)?);
        if bug_len == 0 && fix_len == 0 {
            return Err(DiffError::MalformedHeader {
                line: header_line,
                text: line.to_string(),
            });
        }
        let section = caps.get(5).map_or("", |m| m.as_str()).to_string();
        i += 1;

        let (mut bug_left, mut fix_left) = (bug_len, fix_len);
        let mut body = Vec::new();
        while bug_left > 0 || fix_left > 0 {
            if i >= n {
                return Err(DiffError::LineCountMismatch {
                    line: n.max(header_line),
                    header_line,
                });
            }
            let l = lines[i];
            let mismatch = DiffError::LineCountMismatch { line: i + 1, header_line };
            match l.chars().next() {
                Some(' ') | None => {
                    if bug_left == 0 || fix_left == 0 {
                        return Err(mismatch);
                    }
                    bug_left -= 1;
                    fix_left -= 1;
                    body.push(DiffLine::Context(l.get(1..).unwrap_or("").to_string()));
                }
                Some('-') => {
                    if bug_left == 0 {
                        return Err(mismatch);
                    }
                    bug_left -= 1;
                    body.push(DiffLine::Removed(l[1..].to_string()));
                }
                Some('+') => {
                    if fix_left == 0 {
                        return Err(mismatch);
                    }
                    fix_left -= 1;
                    body.push(DiffLine::Added(l[1..].to_string()));
                }
                Some('\\') => {}
                Some(_) => return Err(mismatch),
            }
            i += 1;
        }
        // "\ No newline at end of file" may trail the last counted line.
        while i < n && lines[i].starts_with('\\') {
            i += 1;
        }
        if i < n && lines[i].starts_with(' ') {
            return Err(DiffError::LineCountMismatch { line: i + 1, header_line });
        }
        let mut hunk = Hunk::from_body(file.clone(), bug_start, fix_start, hunks.len(), body);
        hunk.section = section;
        hunks.push(hunk);
    }
    Ok(hunks)
}

fn last_header_line(lines: &[&str]) -> Option<usize> {
    lines.iter().rposition(|l| l.starts_with("@@")).map(|i| i + 1)
}

/// One hunk of one fix revision as (bug, fix) text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HunkPair {
    pub revision: RevisionRecord,
    pub hunk: Hunk,
    pub bug_text: String,
    pub fix_text: String,
}

/// Provenance and texts of a hunk pair, as consumed by the analyzer.
pub trait HunkSides {
    fn revision_id(&self) -> &str;
    fn file_path(&self) -> &str;
    fn hunk_index(&self) -> usize;
    fn bug_text(&self) -> &str;
    fn fix_text(&self) -> &str;
}

impl HunkSides for HunkPair {
    fn revision_id(&self) -> &str {
        &self.revision.id
    }
    fn file_path(&self) -> &str {
        &self.hunk.file_path
    }
    fn hunk_index(&self) -> usize {
        self.hunk.hunk_index
    }
    fn bug_text(&self) -> &str {
        &self.bug_text
    }
    fn fix_text(&self) -> &str {
        &self.fix_text
    }
}

/// Emits one pair per hunk whose sides differ, ordered by (file, index).
pub fn pair_hunks(hunks: &[Hunk], revision: &RevisionRecord) -> Vec<HunkPair> {
    let mut pairs: Vec<HunkPair> = hunks
        .iter()
        .filter_map(|h| {
            let bug_text = h.bug_text();
            let fix_text = h.fix_text();
            (bug_text != fix_text).then(|| HunkPair {
                revision: revision.clone(),
                hunk: h.clone(),
                bug_text,
                fix_text,
            })
        })
        .collect();
    pairs.sort_by(|a, b| (&a.hunk.file_path, a.hunk.hunk_index).cmp(&(&b.hunk.file_path, b.hunk.hunk_index)));
    pairs
}

/// Archive form of a hunk pair: one line, texts base64-encoded.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PairRecord {
    pub revision_id: String,
    pub file_path: String,
    pub hunk_index: usize,
    pub bug_text: String,
    pub fix_text: String,
}

impl From<&HunkPair> for PairRecord {
    fn from(p: &HunkPair) -> Self {
        PairRecord {
            revision_id: p.revision.id.clone(),
            file_path: p.hunk.file_path.clone(),
            hunk_index: p.hunk.hunk_index,
            bug_text: p.bug_text.clone(),
            fix_text: p.fix_text.clone(),
        }
    }
}

impl HunkSides for PairRecord {
    fn revision_id(&self) -> &str {
        &self.revision_id
    }
    fn file_path(&self) -> &str {
        &self.file_path
    }
    fn hunk_index(&self) -> usize {
        self.hunk_index
    }
    fn bug_text(&self) -> &str {
        &self.bug_text
    }
    fn fix_text(&self) -> &str {
        &self.fix_text
    }
}

impl PairRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            tsv::escape(&self.revision_id),
            tsv::escape(&self.file_path),
            self.hunk_index,
            BASE64.encode(&self.bug_text),
            BASE64.encode(&self.fix_text)
        )
    }

    pub fn from_line(line: &str) -> Result<PairRecord, ArchiveError> {
        let fields: Vec<&str> = line.split('\t').collect();
        let [rev, file, index, bug, fix] = fields.as_slice() else {
            return Err(ArchiveError::Fields(fields.len()));
        };
        let decode = |s: &str| -> Result<String, ArchiveError> {
            let bytes = BASE64.decode(s).map_err(|e| ArchiveError::Base64(e.to_string()))?;
            String::from_utf8(bytes).map_err(|_| ArchiveError::Utf8)
        };
        Ok(PairRecord {
            revision_id: tsv::unescape(rev),
            file_path: tsv::unescape(file),
            hunk_index: index.parse().map_err(|_| ArchiveError::Index(index.to_string()))?,
            bug_text: decode(bug)?,
            fix_text: decode(fix)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArchiveError {
    #[error("expected 5 tab-separated fields, found {0}")]
    Fields(usize),
    #[error("bad hunk index `{0}`")]
    Index(String),
    #[error("bad base64 payload: {0}")]
    Base64(String),
    #[error("payload is not UTF-8")]
    Utf8,
    #[error("archive line {line}: {source}")]
    Line { line: usize, source: Box<ArchiveError> },
}

pub fn write_archive(records: &[PairRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}

pub fn read_archive(text: &str) -> Result<Vec<PairRecord>, ArchiveError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            PairRecord::from_line(l).map_err(|e| ArchiveError::Line {
                line: i + 1,
                source: Box::new(e),
            })
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum MineError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Log { path: PathBuf, source: LogError },
    #[error("revision {revision}: {source}")]
    Diff { revision: String, source: DiffError },
    #[error("git {args}: {message}")]
    Git { args: String, message: String },
}

/// Where revisions and their diffs come from.
pub trait RevisionSource: Sync {
    fn revisions(&self) -> Result<Vec<RevisionRecord>, MineError>;
    fn diff(&self, revision: &RevisionRecord) -> Result<String, MineError>;
}

/// Pre-exported history: `log.tsv` plus `diffs/<revision id>.diff`.
#[derive(Debug, Clone)]
pub struct ExportedDiffs {
    root: PathBuf,
}

impl ExportedDiffs {
    pub const LOG_FILE: &'static str = "log.tsv";
    pub const DIFF_DIR: &'static str = "diffs";

    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn log_path(&self) -> PathBuf {
        self.root.join(Self::LOG_FILE)
    }

    pub fn diff_path(&self, id: &str) -> PathBuf {
        self.root.join(Self::DIFF_DIR).join(format!("{id}.diff"))
    }
}

fn read_file(path: &Path) -> Result<String, MineError> {
    std::fs::read_to_string(path).map_err(|source| MineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl RevisionSource for ExportedDiffs {
    fn revisions(&self) -> Result<Vec<RevisionRecord>, MineError> {
        let path = self.log_path();
        parse_log(&read_file(&path)?).map_err(|source| MineError::Log { path, source })
    }

    fn diff(&self, revision: &RevisionRecord) -> Result<String, MineError> {
        read_file(&self.diff_path(&revision.id))
    }
}

/// A local git working copy, read through the `git` executable.
#[derive(Debug, Clone)]
pub struct GitRepository {
    path: PathBuf,
}

impl GitRepository {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    fn git(&self, args: &[&str]) -> Result<String, MineError> {
        let err = |message: String| MineError::Git {
            args: args.join(" "),
            message,
        };
        let output = Command::new("git")
            .arg("-C")
            .arg(&self.path)
            .args(args)
            .output()
            .map_err(|e| err(e.to_string()))?;
        if !output.status.success() {
            return Err(err(String::from_utf8_lossy(&output.stderr).trim().to_string()));
        }
        String::from_utf8(output.stdout).map_err(|e| err(e.to_string()))
    }
}

impl RevisionSource for GitRepository {
    fn revisions(&self) -> Result<Vec<RevisionRecord>, MineError> {
        let args = ["log", "--format=%H%x1f%cI%x1f%B%x1e"];
        let text = self.git(&args)?;
        let mut out = Vec::new();
        for record in text.split('\x1e') {
            let record = record.trim_start_matches('\n');
            if record.is_empty() {
                continue;
            }
            let mut fields = record.splitn(3, '\x1f');
            let (Some(id), Some(ts), Some(msg)) = (fields.next(), fields.next(), fields.next()) else {
                return Err(MineError::Git {
                    args: args.join(" "),
                    message: format!("unexpected log record `{record}`"),
                });
            };
            let timestamp = DateTime::parse_from_rfc3339(ts)
                .map_err(|e| MineError::Git {
                    args: args.join(" "),
                    message: format!("bad timestamp `{ts}`: {e}"),
                })?
                .with_timezone(&Utc);
            out.push(RevisionRecord::new(id, timestamp, msg.trim_end()));
        }
        Ok(out)
    }

    fn diff(&self, revision: &RevisionRecord) -> Result<String, MineError> {
        self.git(&[
            "diff-tree",
            "-p",
            "--root",
            "-m",
            "--first-parent",
            "--no-commit-id",
            "--no-color",
            "--no-ext-diff",
            "-U3",
            &revision.id,
        ])
    }
}

#[derive(Debug, Clone, Default)]
pub struct MineOutput {
    pub revisions_total: usize,
    pub fix_revisions: Vec<RevisionRecord>,
    pub hunks_total: usize,
    pub pairs: Vec<HunkPair>,
}

/// Scans the source's log, extracts every fix revision's hunks and pairs
/// them. Output is sorted by (revision id, file path, hunk index).
pub fn mine(source: &dyn RevisionSource, keywords: &FixKeywords, exec: Execution) -> Result<MineOutput, MineError> {
    let all = source.revisions()?;
    let fixes = keywords.scan(&all);
    let per_revision = exec.map(&fixes, |rev| -> Result<(RevisionRecord, usize, Vec<HunkPair>), MineError> {
        let diff = source.diff(rev)?;
        let hunks = extract_hunks(&diff).map_err(|source| MineError::Diff {
            revision: rev.id.clone(),
            source,
        })?;
        let mut rev = rev.clone();
        let mut paths: Vec<String> = hunks.iter().map(|h| h.file_path.clone()).collect();
        paths.sort();
        paths.dedup();
        rev.changed_paths = paths;
        let pairs = pair_hunks(&hunks, &rev);
        Ok((rev, hunks.len(), pairs))
    });
    let mut out = MineOutput {
        revisions_total: all.len(),
        ..MineOutput::default()
    };
    for result in per_revision {
        let (rev, hunk_count, pairs) = result?;
        out.hunks_total += hunk_count;
        out.pairs.extend(pairs);
        out.fix_revisions.push(rev);
    }
    out.pairs.sort_by(|a, b| {
        (&a.revision.id, &a.hunk.file_path, a.hunk.hunk_index).cmp(&(&b.revision.id, &b.hunk.file_path, b.hunk.hunk_index))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn rev(id: &str, msg: &str) -> RevisionRecord {
        RevisionRecord::new(id, Utc.with_ymd_and_hms(2010, 8, 15, 12, 0, 0).unwrap(), msg)
    }

    #[test]
    fn keyword_scan() {
        let log = [
            rev("1", "fixed NPE in tokenizer"),
            rev("2", "refactor rename only"),
            rev("3", "Bug 1234: off-by-one"),
            rev("4", "prefix handling"),
            rev("5", "apply PATCHES from list"),
            rev("6", ""),
            rev("7", "Fixes #12"),
        ];
        let ids: Vec<_> = scan_fix_revisions(&log).into_iter().map(|r| r.id).collect();
        assert_eq!(ids, ["1", "3", "5", "7"]);
    }

    #[test]
    fn keyword_scan_empty_input() {
        assert!(scan_fix_revisions(&[]).is_empty());
    }

    #[test]
    fn custom_keywords() {
        let k = FixKeywords::new("oops").unwrap();
        assert!(k.is_match("Oops, forgot a file"));
        assert!(!k.is_match("fix"));
        assert!(FixKeywords::new("(").is_err());
    }

    #[test]
    fn log_round_trip_and_errors() {
        let mut r = rev("r42", "first line\nsecond\tline");
        r.changed_paths.clear();
        let text = format!("{}\n\n", r.to_log_line());
        assert_eq!(parse_log(&text).unwrap(), vec![r]);
        assert!(matches!(parse_log("a\tb"), Err(LogError::Fields { line: 1 })));
        assert!(matches!(parse_log("ok\t2010-01-01T00:00:00Z\tm\nx\tyesterday\tm"), Err(LogError::Timestamp { line: 2, .. })));
        assert!(matches!(parse_log("\t2010-01-01T00:00:00Z\tm"), Err(LogError::EmptyId { line: 1 })));
    }

    const TWO_SECTIONS: &str = "\
Index: src/Foo.java
===================================================================
--- src/Foo.java\t(revision 11)
+++ src/Foo.java\t(revision 12)
@@ -3,2 +3,2 @@ class Foo {
-    if(x>0)
+    if(x>=0)
     return;
@@ -20,3 +20,4 @@
 a
+b
 c
 d
";

    #[test]
    fn two_sections_two_hunks() {
        let hunks = extract_hunks(TWO_SECTIONS).unwrap();
        assert_eq!(hunks.len(), 2);
        let h = &hunks[0];
        assert_eq!(h.file_path, "src/Foo.java");
        assert_eq!(h.bug_lines.len(), 2);
        assert_eq!(h.fix_lines.len(), 2);
        assert_eq!(h.bug_lines, ["    if(x>0)", "    return;"]);
        assert_eq!(h.fix_lines, ["    if(x>=0)", "    return;"]);
        assert_eq!(h.bug_range, LineRange { start: 3, len: 2 });
        assert_eq!(h.section, " class Foo {");
        assert_eq!(hunks[1].hunk_index, 1);
        assert_eq!(hunks[1].fix_range, LineRange { start: 20, len: 4 });
    }

    #[test]
    fn count_mismatch_names_line() {
        let bad = "--- a/F.java\n+++ b/F.java\n@@ -1,2 +1,2 @@\n-x\n+y\n+z\n";
        assert_eq!(
            extract_hunks(bad).unwrap_err(),
            DiffError::LineCountMismatch { line: 6, header_line: 3 }
        );
        let short = "--- a/F.java\n+++ b/F.java\n@@ -1,3 +1,3 @@\n x\n";
        assert!(matches!(extract_hunks(short), Err(DiffError::LineCountMismatch { header_line: 3, .. })));
        let extra = "--- a/F.java\n+++ b/F.java\n@@ -1,1 +1,1 @@\n x\n y\n";
        assert_eq!(extract_hunks(extra).unwrap_err().line(), 5);
        let header = "--- a/F.java\n+++ b/F.java\n@@ -1,x +1 @@\n";
        assert!(matches!(extract_hunks(header), Err(DiffError::MalformedHeader { line: 3, .. })));
    }

    #[test]
    fn git_headers_and_new_files() {
        let diff = "diff --git a/A.java b/A.java\nnew file mode 100644\nindex 0000000..1111111\n--- /dev/null\n+++ b/A.java\n@@ -0,0 +1 @@\n+class A {}\n\\ No newline at end of file\ndiff --git a/B.java b/B.java\ndeleted file mode 100644\n--- a/B.java\n+++ /dev/null\n@@ -1 +0,0 @@\n-class B {}\nBinary files a/x.png and b/x.png differ\n";
        let hunks = extract_hunks(diff).unwrap();
        assert_eq!(hunks.len(), 2);
        assert_eq!(hunks[0].file_path, "A.java");
        assert_eq!(hunks[0].fix_lines, ["class A {}"]);
        assert!(hunks[0].bug_lines.is_empty());
        assert_eq!(hunks[1].file_path, "B.java");
        assert_eq!(hunks[1].fix_range.len, 0);
    }

    #[test]
    fn pairing_skips_identical_sides() {
        let r = rev("7", "fix");
        let changed = Hunk::from_body("B.java", 1, 1, 1, vec![DiffLine::Removed("if(x>0)".into()), DiffLine::Added("if(x>=0)".into())]);
        let context_only = Hunk::from_body("A.java", 1, 1, 0, vec![DiffLine::Context("same".into())]);
        let earlier = Hunk::from_body("A.java", 9, 9, 2, vec![DiffLine::Added("new".into())]);
        let pairs = pair_hunks(&[changed, context_only, earlier], &r);
        assert_eq!(pairs.len(), 2);
        assert_eq!((pairs[0].hunk.file_path.as_str(), pairs[0].hunk.hunk_index), ("A.java", 2));
        assert_eq!(pairs[1].bug_text, "if(x>0)");
        assert_eq!(pairs[1].fix_text, "if(x>=0)");
    }

    #[test]
    fn archive_round_trip() {
        let rec = PairRecord {
            revision_id: "abc".into(),
            file_path: "dir/With Space.java".into(),
            hunk_index: 3,
            bug_text: "if (a) {\n\tb();\n}".into(),
            fix_text: String::new(),
        };
        let text = write_archive(std::slice::from_ref(&rec));
        assert_eq!(text.lines().count(), 1);
        assert_eq!(read_archive(&text).unwrap(), vec![rec]);
        assert!(matches!(read_archive("x\ty"), Err(ArchiveError::Line { line: 1, .. })));
    }

    fn arb_body() -> impl Strategy<Value = Vec<DiffLine>> {
        let text = "[a-z(){}; =!<>&|.]{0,12}";
        prop::collection::vec(
            prop_oneof![
                text.prop_map(DiffLine::Context),
                text.prop_map(DiffLine::Removed),
                text.prop_map(DiffLine::Added),
            ],
            1..12,
        )
        .prop_filter("needs a changed or context line", |b| !b.is_empty())
    }

    proptest! {
        #[test]
        fn render_then_parse_is_identity(
            bodies in prop::collection::vec((arb_body(), 1usize..500, 0usize..2), 1..5)
        ) {
            let files = ["src/A.java", "src/b/B.java"];
            let mut hunks: Vec<Hunk> = bodies
                .into_iter()
                .enumerate()
                .map(|(i, (body, start, f))| Hunk::from_body(files[f], start, start, i, body))
                .collect();
            // hunk_index is positional, so keep files grouped in output order.
            hunks.sort_by_key(|h| h.file_path.clone());
            for (i, h) in hunks.iter_mut().enumerate() {
                h.hunk_index = i;
            }
            let parsed = extract_hunks(&render_diff(&hunks)).unwrap();
            prop_assert_eq!(parsed, hunks);
        }

        #[test]
        fn scan_is_an_order_preserving_idempotent_filter(msgs in prop::collection::vec("[a-zA-Z ]{0,20}", 0..20)) {
            let log: Vec<_> = msgs.iter().enumerate().map(|(i, m)| rev(&i.to_string(), m)).collect();
            let once = scan_fix_revisions(&log);
            prop_assert_eq!(scan_fix_revisions(&once), once.clone());
            let mut last = None;
            for r in &once {
                let pos = log.iter().position(|x| x.id == r.id).unwrap();
                prop_assert!(last.is_none_or(|l| l < pos));
                last = Some(pos);
            }
        }
    }
}
