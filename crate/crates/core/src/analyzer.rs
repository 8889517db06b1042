//! Effective-change filtering and `if`-condition change extraction.

use std::fmt;

use thiserror::Error;

use crate::condition::{parse_tokens, ConditionAst};
use crate::lexer::{is_keyword, join_tokens, tokenize, Token, TokenKind};
use crate::miner::HunkSides;
use crate::par::Execution;
use crate::tsv;

/// Statements up to this count are compared strictly; longer then-blocks
/// tolerate a couple of differing statements.
pub const STRICT_BLOCK_LIMIT: usize = 5;
pub const MAX_DIFFERING_STATEMENTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Effectiveness {
    pub effective: bool,
    /// One side failed to tokenize; such hunks are kept as effective.
    pub lex_error: bool,
}

pub fn is_effective(bug_text: &str, fix_text: &str) -> Effectiveness {
    match (tokenize(bug_text), tokenize(fix_text)) {
        (Ok(b), Ok(f)) => Effectiveness {
            effective: !b.same_code(&f),
            lex_error: false,
        },
        _ => Effectiveness {
            effective: true,
            lex_error: true,
        },
    }
}

/// Where a changed `if` came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Provenance {
    pub revision_id: String,
    pub file_path: String,
    pub hunk_index: usize,
    /// Index of the `if` among all `if`s on the fix side of the hunk.
    pub if_ordinal: usize,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}#{}/if{}", self.revision_id, self.file_path, self.hunk_index, self.if_ordinal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IfChangeCandidate {
    pub provenance: Provenance,
    pub bug_condition: ConditionAst,
    pub fix_condition: ConditionAst,
    pub bug_then_stmts: Vec<String>,
    pub fix_then_stmts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IfScan {
    pub candidates: Vec<IfChangeCandidate>,
    /// Changed `if`s whose condition or then-block could not be delimited
    /// or parsed.
    pub unanalyzable: usize,
    /// Changed `if`s left over when the two sides have different counts.
    pub unmatched: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct IfSite {
    /// Condition and then-block texts; equal signatures mean an unchanged `if`.
    signature: (String, Vec<String>),
    parsed: Option<(Vec<Token>, Vec<String>)>,
}

fn matching(tokens: &[Token], open: usize) -> Option<usize> {
    let (o, c) = match tokens[open].text.as_str() {
        "(" => ("(", ")"),
        "{" => ("{", "}"),
        _ => ("[", "]"),
    };
    let mut depth = 0usize;
    for (i, t) in tokens.iter().enumerate().skip(open) {
        if t.kind != TokenKind::Punctuation {
            continue;
        }
        if t.is(o) {
            depth += 1;
        } else if t.is(c) {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

/// End (exclusive) of the statement starting at `start`: a top-level `;`,
/// or the `}` of a top-level block not continued by `else`/`catch`/`finally`.
fn statement_end(tokens: &[Token], start: usize) -> Option<usize> {
    let mut i = start;
    while i < tokens.len() {
        let t = &tokens[i];
        if t.kind == TokenKind::Punctuation {
            match t.text.as_str() {
                ";" => return Some(i + 1),
                "(" | "[" => {
                    i = matching(tokens, i)? + 1;
                    continue;
                }
                "{" => {
                    let close = matching(tokens, i)?;
                    let continued = tokens
                        .get(close + 1)
                        .is_some_and(|n| n.is("else") || n.is("catch") || n.is("finally") || n.is("while") || n.is(")") || n.is(",") || n.is(";") || n.is("."));
                    // A brace after `=` or `]` is an initializer, not a block.
                    let initializer = i > start && (tokens[i - 1].is("=") || tokens[i - 1].is("]"));
                    if !continued && !initializer {
                        return Some(close + 1);
                    }
                    i = close + 1;
                    continue;
                }
                ")" | "]" | "}" => return None,
                _ => {}
            }
        }
        i += 1;
    }
    None
}

fn split_statements(tokens: &[Token]) -> Option<Vec<String>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i].is(";") {
            // Empty statement.
            i += 1;
            continue;
        }
        let end = statement_end(tokens, i)?;
        out.push(join_tokens(&tokens[i..end]));
        i = end;
    }
    Some(out)
}

fn scan_ifs(tokens: &[Token]) -> Vec<IfSite> {
    let mut sites = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        if !(t.kind == TokenKind::Keyword && t.is("if")) {
            continue;
        }
        let truncated = || IfSite {
            signature: (join_tokens(&tokens[i..]), Vec::new()),
            parsed: None,
        };
        let open = i + 1;
        if !tokens.get(open).is_some_and(|t| t.is("(")) {
            sites.push(truncated());
            continue;
        }
        let Some(close) = matching(tokens, open) else {
            sites.push(truncated());
            continue;
        };
        let cond = tokens[open + 1..close].to_vec();
        let cond_text = join_tokens(&cond);
        let body_start = close + 1;
        let then_stmts = match tokens.get(body_start) {
            Some(b) if b.is("{") => {
                matching(tokens, body_start).and_then(|end| split_statements(&tokens[body_start + 1..end]))
            }
            Some(_) => statement_end(tokens, body_start).map(|end| vec![join_tokens(&tokens[body_start..end])]),
            None => None,
        };
        match then_stmts {
            Some(stmts) => sites.push(IfSite {
                signature: (cond_text, stmts.clone()),
                parsed: Some((cond, stmts)),
            }),
            None => sites.push(IfSite {
                signature: (cond_text, vec![join_tokens(&tokens[body_start..])]),
                parsed: None,
            }),
        }
    }
    sites
}

/// Index pairs of a longest common subsequence, in order.
pub(crate) fn lcs_pairs<T, U>(a: &[T], b: &[U], eq: impl Fn(&T, &U) -> bool) -> Vec<(usize, usize)> {
    let (n, m) = (a.len(), b.len());
    let mut table = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            table[i][j] = if eq(&a[i], &b[j]) {
                table[i + 1][j + 1] + 1
            } else {
                table[i + 1][j].max(table[i][j + 1])
            };
        }
    }
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if eq(&a[i], &b[j]) {
            out.push((i, j));
            i += 1;
            j += 1;
        } else if table[i + 1][j] >= table[i][j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Locates the `if`s whose condition changed between the two sides of a
/// hunk. Unchanged `if`s are matched first; the remaining ones pair up by
/// position.
pub fn find_if_changes(pair: &impl HunkSides) -> IfScan {
    let (Ok(bug), Ok(fix)) = (tokenize(pair.bug_text()), tokenize(pair.fix_text())) else {
        return IfScan {
            unanalyzable: 1,
            ..IfScan::default()
        };
    };
    let bug_ifs = scan_ifs(&bug.tokens);
    let fix_ifs = scan_ifs(&fix.tokens);
    let same = lcs_pairs(&bug_ifs, &fix_ifs, |a, b| a.signature == b.signature);
    let changed = |len: usize, side: fn(&(usize, usize)) -> usize| -> Vec<usize> {
        (0..len).filter(|i| !same.iter().any(|p| side(p) == *i)).collect()
    };
    let bug_changed = changed(bug_ifs.len(), |p| p.0);
    let fix_changed = changed(fix_ifs.len(), |p| p.1);

    let mut scan = IfScan {
        unmatched: bug_changed.len().abs_diff(fix_changed.len()),
        ..IfScan::default()
    };
    for (&bi, &fi) in bug_changed.iter().zip(&fix_changed) {
        let (Some((bug_cond, bug_then)), Some((fix_cond, fix_then))) = (&bug_ifs[bi].parsed, &fix_ifs[fi].parsed) else {
            scan.unanalyzable += 1;
            continue;
        };
        let (Ok(bug_condition), Ok(fix_condition)) = (parse_tokens(bug_cond), parse_tokens(fix_cond)) else {
            scan.unanalyzable += 1;
            continue;
        };
        if bug_condition.to_text() == fix_condition.to_text() {
            continue;
        }
        scan.candidates.push(IfChangeCandidate {
            provenance: Provenance {
                revision_id: pair.revision_id().to_string(),
                file_path: pair.file_path().to_string(),
                hunk_index: pair.hunk_index(),
                if_ordinal: fi,
            },
            bug_condition,
            fix_condition,
            bug_then_stmts: bug_then.clone(),
            fix_then_stmts: fix_then.clone(),
        });
    }
    scan
}

fn is_type_token(t: &Token) -> bool {
    t.is_identifier()
        || matches!(
            t.text.as_str(),
            "boolean" | "byte" | "char" | "short" | "int" | "long" | "float" | "double"
        )
        || t.is(".")
        || t.is("[")
        || t.is("]")
        || t.is("<")
        || t.is(">")
        || t.is(",")
        || t.is("?")
}

fn starts_operand(t: &Token) -> bool {
    t.is_identifier()
        || t.kind == TokenKind::Literal
        || t.is("(")
        || t.is("this")
        || t.is("new")
        || t.is("super")
}

/// Drops `( Type )` cast prefixes.
pub(crate) fn strip_casts(tokens: &[Token]) -> Vec<&Token> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i].is("(") {
            if let Some(close) = matching(tokens, i) {
                let inner = &tokens[i + 1..close];
                let is_cast = !inner.is_empty()
                    && (inner[0].is_identifier() || is_keyword(&inner[0].text))
                    && inner.iter().all(is_type_token)
                    && tokens.get(close + 1).is_some_and(starts_operand);
                if is_cast {
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push(&tokens[i]);
        i += 1;
    }
    out
}

/// Statements equal up to renamed identifiers and added/removed casts.
pub fn refactoring_equal(a: &str, b: &str) -> bool {
    let (Ok(ta), Ok(tb)) = (tokenize(a), tokenize(b)) else {
        return false;
    };
    let (sa, sb) = (strip_casts(&ta.tokens), strip_casts(&tb.tokens));
    sa.len() == sb.len()
        && sa.iter().zip(&sb).all(|(x, y)| {
            (x.kind == y.kind && x.text == y.text) || (x.is_identifier() && y.is_identifier())
        })
}

/// Whether a changed `if` counts as an if-condition change: its then-block
/// must be essentially untouched.
pub fn is_ifcc(candidate: &IfChangeCandidate) -> bool {
    let (b, f) = (&candidate.bug_then_stmts, &candidate.fix_then_stmts);
    if b == f {
        return true;
    }
    let n = b.len().max(f.len());
    if n > STRICT_BLOCK_LIMIT {
        let common = lcs_pairs(b, f, |x, y| x == y).len();
        return n - common <= MAX_DIFFERING_STATEMENTS;
    }
    b.len() == f.len() && b.iter().zip(f).all(|(x, y)| x == y || refactoring_equal(x, y))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScreenedCandidate {
    pub candidate: IfChangeCandidate,
    pub is_ifcc: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AnalyzeSummary {
    pub pairs: usize,
    pub effective: usize,
    pub lex_errors: usize,
    pub candidates: usize,
    pub ifcc: usize,
    pub unanalyzable: usize,
    pub unmatched: usize,
}

#[derive(Debug, Clone, Default)]
pub struct AnalyzeOutput {
    pub summary: AnalyzeSummary,
    /// Sorted by provenance.
    pub candidates: Vec<ScreenedCandidate>,
}

pub fn analyze<P: HunkSides + Sync>(pairs: &[P], exec: Execution) -> AnalyzeOutput {
    let per_pair = exec.map(pairs, |p| {
        let eff = is_effective(p.bug_text(), p.fix_text());
        let scan = if eff.effective { find_if_changes(p) } else { IfScan::default() };
        let screened: Vec<ScreenedCandidate> = scan
            .candidates
            .into_iter()
            .map(|c| ScreenedCandidate {
                is_ifcc: is_ifcc(&c),
                candidate: c,
            })
            .collect();
        (eff, scan.unanalyzable, scan.unmatched, screened)
    });
    let mut out = AnalyzeOutput::default();
    out.summary.pairs = pairs.len();
    for (eff, unanalyzable, unmatched, screened) in per_pair {
        out.summary.effective += usize::from(eff.effective);
        out.summary.lex_errors += usize::from(eff.lex_error);
        out.summary.unanalyzable += unanalyzable;
        out.summary.unmatched += unmatched;
        out.summary.candidates += screened.len();
        out.summary.ifcc += screened.iter().filter(|s| s.is_ifcc).count();
        out.candidates.extend(screened);
    }
    out.candidates.sort_by(|a, b| a.candidate.provenance.cmp(&b.candidate.provenance));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CandidateFileError {
    #[error("candidate line {line}: expected 9 tab-separated fields, found {found}")]
    Fields { line: usize, found: usize },
    #[error("candidate line {line}: bad number `{value}`")]
    Number { line: usize, value: String },
    #[error("candidate line {line}: {message}")]
    Condition { line: usize, message: String },
}

pub const CANDIDATE_HEADER: &str =
    "revision_id\tfile\thunk_index\tif_ordinal\tifcc\tbug_condition\tfix_condition\tbug_then\tfix_then";

fn join_stmts(stmts: &[String]) -> String {
    tsv::escape(&stmts.join("\n"))
}

fn split_stmts(field: &str) -> Vec<String> {
    if field.is_empty() {
        Vec::new()
    } else {
        tsv::unescape(field).split('\n').map(str::to_string).collect()
    }
}

pub fn write_candidates(candidates: &[ScreenedCandidate]) -> String {
    let mut out = String::from(CANDIDATE_HEADER);
    out.push('\n');
    for s in candidates {
        let c = &s.candidate;
        let p = &c.provenance;
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            tsv::escape(&p.revision_id),
            tsv::escape(&p.file_path),
            p.hunk_index,
            p.if_ordinal,
            s.is_ifcc,
            tsv::escape(&c.bug_condition.to_text()),
            tsv::escape(&c.fix_condition.to_text()),
            join_stmts(&c.bug_then_stmts),
            join_stmts(&c.fix_then_stmts),
        ));
    }
    out
}

pub fn read_candidates(text: &str) -> Result<Vec<ScreenedCandidate>, CandidateFileError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.is_empty() || raw == CANDIDATE_HEADER {
            continue;
        }
        let f: Vec<&str> = raw.split('\t').collect();
        if f.len() != 9 {
            return Err(CandidateFileError::Fields { line, found: f.len() });
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| CandidateFileError::Number { line, value: s.to_string() });
        let cond = |s: &str| {
            ConditionAst::parse(&tsv::unescape(s)).map_err(|e| CandidateFileError::Condition {
                line,
                message: e.to_string(),
            })
        };
        let is_ifcc = match f[4] {
            "true" => true,
            "false" => false,
            other => {
                return Err(CandidateFileError::Condition {
                    line,
                    message: format!("bad ifcc flag `{other}`"),
                })
            }
        };
        out.push(ScreenedCandidate {
            candidate: IfChangeCandidate {
                provenance: Provenance {
                    revision_id: tsv::unescape(f[0]),
                    file_path: tsv::unescape(f[1]),
                    hunk_index: num(f[2])?,
                    if_ordinal: num(f[3])?,
                },
                bug_condition: cond(f[5])?,
                fix_condition: cond(f[6])?,
                bug_then_stmts: split_stmts(f[7]),
                fix_then_stmts: split_stmts(f[8]),
            },
            is_ifcc,
        });
    }
    out.sort_by(|a, b| a.candidate.provenance.cmp(&b.candidate.provenance));
    Ok(out)
}
