//! Stage driver: mine → analyze → classify → report, plus selftest.
//!
//! Each stage reads the artifacts of the previous one from the output
//! directory and writes its own as plain text, sorted so that reruns on the
//! same inputs are byte-identical.

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::analyzer::{self, read_candidates, write_candidates, AnalyzeSummary};
use crate::classifier::{read_records, write_records, ClassificationRecord, RecordError};
use crate::miner::{
    self, read_archive, write_archive, ArchiveError, ExportedDiffs, FixKeywords, GitRepository, MineError, PairRecord,
    RevisionSource, DEFAULT_FIX_PATTERN,
};
use crate::mutation::{self, SelftestReport};
use crate::nonfix::{detect_nonfix_with, AnnotationError, Annotations, NonFixOptions};
use crate::par::Execution;
use crate::report;
use crate::stats::{frequency_table, FrequencyTable};
use crate::tsv;

pub const HUNK_PAIRS: &str = "hunk_pairs.tsv";
pub const REVISIONS: &str = "revisions.tsv";
pub const MINE_SUMMARY: &str = "mine_summary.tsv";
pub const CANDIDATES: &str = "candidates.tsv";
pub const ANALYZE_SUMMARY: &str = "analyze_summary.tsv";
pub const CLASSIFICATIONS: &str = "classifications.csv";
pub const FREQUENCIES: &str = "frequencies.csv";
pub const CORRELATIONS: &str = "correlations.csv";
pub const REPORT: &str = "report.md";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Git(PathBuf),
    DiffDir(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Mine,
    Analyze,
    Classify,
    Report,
    Selftest,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Mine => "mine",
            Stage::Analyze => "analyze",
            Stage::Classify => "classify",
            Stage::Report => "report",
            Stage::Selftest => "selftest",
        })
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub source: Option<Source>,
    /// Keyword alternatives replacing [`DEFAULT_FIX_PATTERN`].
    pub regex: Option<String>,
    pub out: PathBuf,
    pub project: String,
    pub detect_rc: bool,
    pub annotations: Option<PathBuf>,
    /// Classification files for `report` as (project, path); empty means
    /// this project's own output.
    pub report_inputs: Vec<(String, PathBuf)>,
    pub seed: u64,
    pub max_atoms: usize,
    pub count: usize,
    pub exec: Execution,
}

impl PipelineConfig {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            source: None,
            regex: None,
            out: out.into(),
            project: "project".into(),
            detect_rc: false,
            annotations: None,
            report_inputs: Vec::new(),
            seed: 42,
            max_atoms: 6,
            count: 500,
            exec: Execution::default(),
        }
    }

    fn artifact(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid keyword regex: {0}")]
    Regex(#[from] regex::Error),
    #[error("{stage} needs {}; run the previous stage first", path.display())]
    MissingArtifact { stage: Stage, path: PathBuf },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Mine(#[from] MineError),
    #[error("{}: {source}", path.display())]
    Archive { path: PathBuf, source: ArchiveError },
    #[error("{}: {source}", path.display())]
    Candidates { path: PathBuf, source: analyzer::CandidateFileError },
    #[error("{}: {source}", path.display())]
    Records { path: PathBuf, source: RecordError },
    #[error("{}: {source}", path.display())]
    Annotations { path: PathBuf, source: AnnotationError },
}

impl PipelineError {
    /// 1 for usage errors, 2 for bad or missing data.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) | PipelineError::Regex(_) => 1,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_input(stage: Stage, path: &Path) -> Result<String, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingArtifact {
            stage,
            path: path.to_path_buf(),
        });
    }
    std::fs::read_to_string(path).map_err(io_err(path))
}

fn write_output(path: &Path, contents: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, contents).map_err(io_err(path))
}

fn summary_tsv(rows: &[(&str, usize)]) -> String {
    rows.iter().map(|(k, v)| format!("{k}\t{v}\n")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MineSummary {
    pub revisions: usize,
    pub fix_revisions: usize,
    pub hunks: usize,
    pub pairs: usize,
}

pub fn run_mine(cfg: &PipelineConfig) -> Result<MineSummary, PipelineError> {
    let keywords = FixKeywords::new(cfg.regex.as_deref().unwrap_or(DEFAULT_FIX_PATTERN))?;
    let source: Box<dyn RevisionSource> = match &cfg.source {
        Some(Source::Git(p)) => Box::new(GitRepository::new(p)),
        Some(Source::DiffDir(p)) => Box::new(ExportedDiffs::new(p)),
        None => return Err(PipelineError::Usage("mine needs --repo or --diff-dir".into())),
    };
    let mined = miner::mine(source.as_ref(), &keywords, cfg.exec)?;

    let mut revisions = mined.fix_revisions.clone();
    revisions.sort_by(|a, b| a.id.cmp(&b.id));
    let revisions_tsv: String = revisions
        .iter()
        .map(|r| {
            format!(
                "{}\t{}\t{}\t{}\n",
                tsv::escape(&r.id),
                r.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                tsv::escape(&r.changed_paths.join("\n")),
                tsv::escape(&r.message)
            )
        })
        .collect();
    let records: Vec<PairRecord> = mined.pairs.iter().map(PairRecord::from).collect();
    let summary = MineSummary {
        revisions: mined.revisions_total,
        fix_revisions: mined.fix_revisions.len(),
        hunks: mined.hunks_total,
        pairs: records.len(),
    };
    write_output(&cfg.artifact(REVISIONS), &revisions_tsv)?;
    write_output(&cfg.artifact(HUNK_PAIRS), &write_archive(&records))?;
    write_output(
        &cfg.artifact(MINE_SUMMARY),
        &summary_tsv(&[
            ("revisions", summary.revisions),
            ("fix_revisions", summary.fix_revisions),
            ("hunks", summary.hunks),
            ("hunk_pairs", summary.pairs),
        ]),
    )?;
    Ok(summary)
}

pub fn run_analyze(cfg: &PipelineConfig) -> Result<AnalyzeSummary, PipelineError> {
    let path = cfg.artifact(HUNK_PAIRS);
    let text = read_input(Stage::Analyze, &path)?;
    let pairs = read_archive(&text).map_err(|source| PipelineError::Archive { path, source })?;
    let out = analyzer::analyze(&pairs, cfg.exec);
    let s = out.summary;
    write_output(&cfg.artifact(CANDIDATES), &write_candidates(&out.candidates))?;
    write_output(
        &cfg.artifact(ANALYZE_SUMMARY),
        &summary_tsv(&[
            ("hunk_pairs", s.pairs),
            ("effective", s.effective),
            ("lex_errors", s.lex_errors),
            ("changed_ifs", s.candidates),
            ("ifcc", s.ifcc),
            ("unanalyzable", s.unanalyzable),
            ("unmatched", s.unmatched),
        ]),
    )?;
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassifySummary {
    pub records: usize,
    pub nonfix: usize,
}

pub fn run_classify(cfg: &PipelineConfig) -> Result<ClassifySummary, PipelineError> {
    let path = cfg.artifact(CANDIDATES);
    let text = read_input(Stage::Classify, &path)?;
    let screened = read_candidates(&text).map_err(|source| PipelineError::Candidates { path, source })?;
    let annotations = match &cfg.annotations {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(io_err(p))?;
            Annotations::parse(&text).map_err(|source| PipelineError::Annotations {
                path: p.clone(),
                source,
            })?
        }
        None => Annotations::default(),
    };
    let options = NonFixOptions {
        detect_rc: cfg.detect_rc,
    };
    let ifcc: Vec<_> = screened.into_iter().filter(|s| s.is_ifcc).map(|s| s.candidate).collect();
    let mut records: Vec<ClassificationRecord> = cfg.exec.map(&ifcc, |c| {
        let detected = detect_nonfix_with(&c.bug_condition, &c.fix_condition, options);
        ClassificationRecord::new(c, annotations.resolve(&c.provenance, detected))
    });
    records.sort_by(|a, b| a.provenance.cmp(&b.provenance));
    let out = write_records(&records).map_err(|source| PipelineError::Records {
        path: cfg.artifact(CLASSIFICATIONS),
        source,
    })?;
    write_output(&cfg.artifact(CLASSIFICATIONS), &out)?;
    Ok(ClassifySummary {
        records: records.len(),
        nonfix: records.iter().filter(|r| r.nonfix.is_some()).count(),
    })
}

/// `NAME=PATH` or `PATH`; a bare path is named after its directory.
pub fn parse_report_input(arg: &str) -> (String, PathBuf) {
    if let Some((name, path)) = arg.split_once('=') {
        if !name.is_empty() {
            return (name.to_string(), PathBuf::from(path));
        }
    }
    let path = PathBuf::from(arg);
    let name = path
        .parent()
        .and_then(Path::file_name)
        .or_else(|| path.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| arg.to_string());
    (name, path)
}

pub fn run_report(cfg: &PipelineConfig) -> Result<Vec<FrequencyTable>, PipelineError> {
    let inputs = if cfg.report_inputs.is_empty() {
        vec![(cfg.project.clone(), cfg.artifact(CLASSIFICATIONS))]
    } else {
        cfg.report_inputs.clone()
    };
    let mut tables = Vec::with_capacity(inputs.len());
    for (name, path) in &inputs {
        let text = read_input(Stage::Report, path)?;
        let records = read_records(&text).map_err(|source| PipelineError::Records {
            path: path.clone(),
            source,
        })?;
        tables.push(frequency_table(&records, name));
    }
    let outcomes = report::correlations(&tables);
    write_output(&cfg.artifact(FREQUENCIES), &report::frequencies_csv(&tables))?;
    write_output(&cfg.artifact(CORRELATIONS), &report::correlations_csv(&outcomes))?;
    write_output(&cfg.artifact(REPORT), &report::markdown(&tables, &outcomes))?;
    Ok(tables)
}

pub fn run_selftest(cfg: &PipelineConfig) -> Result<SelftestReport, PipelineError> {
    if cfg.max_atoms == 0 {
        return Err(PipelineError::Usage("--max-atoms must be at least 1".into()));
    }
    Ok(mutation::selftest(cfg.seed, cfg.count, cfg.max_atoms, cfg.exec))
}

/// Runs mine, analyze, classify and report in order.
pub fn run_all(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    run_mine(cfg)?;
    run_analyze(cfg)?;
    run_classify(cfg)?;
    run_report(cfg)?;
    Ok(())
}
