use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ifcc_core::pipeline::{self, PipelineConfig, PipelineError, Source};
use ifcc_core::Execution;

/// Mine, classify and summarize if-condition bug fixes.
#[derive(Debug, Parser)]
#[command(name = "ifcc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Project name used in reports.
    #[arg(long, default_value = "project")]
    project: String,
    /// Run on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Find fix revisions and extract hunk pairs.
    Mine {
        #[command(flatten)]
        common: Common,
        /// Local git repository.
        #[arg(long, conflicts_with = "diff_dir", required_unless_present = "diff_dir")]
        repo: Option<PathBuf>,
        /// Exported history: log.tsv plus diffs/<id>.diff.
        #[arg(long)]
        diff_dir: Option<PathBuf>,
        /// Keyword alternatives matched case-insensitively on word boundaries.
        #[arg(long)]
        regex: Option<String>,
    },
    /// Keep effective hunks and extract changed if-conditions.
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Assign fault classes and non-fix patterns.
    Classify {
        #[command(flatten)]
        common: Common,
        /// Also flag `== true`-style comparisons and casts as non-fix.
        #[arg(long)]
        detect_rc: bool,
        /// CSV of manual non-fix verdicts.
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
    /// Frequency tables and cross-project rank correlations.
    Report {
        #[command(flatten)]
        common: Common,
        /// Classification CSVs as [NAME=]PATH; defaults to this project's.
        inputs: Vec<String>,
    },
    /// Check the classifier against generated single-fault mutants.
    Selftest {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        max_atoms: usize,
        /// Number of random expressions.
        #[arg(long, default_value_t = 500)]
        count: usize,
    },
}

fn config(common: &Common) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(&common.out);
    cfg.project = common.project.clone();
    cfg.exec = if common.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    cfg
}

fn run(command: Command) -> Result<ExitCode, PipelineError> {
    match command {
        Command::Mine {
            common,
            repo,
            diff_dir,
            regex,
        } => {
            let mut cfg = config(&common);
            cfg.source = repo.map(Source::Git).or(diff_dir.map(Source::DiffDir));
            cfg.regex = regex;
            let s = pipeline::run_mine(&cfg)?;
            println!(
                "revisions {}  fix revisions {}  hunks {}  hunk pairs {}",
                s.revisions, s.fix_revisions, s.hunks, s.pairs
            );
        }
        Command::Analyze { common } => {
            let s = pipeline::run_analyze(&config(&common))?;
            println!(
                "hunk pairs {}  effective {}  changed ifs {}  if-cc {}  unanalyzable {}  unmatched {}",
                s.pairs, s.effective, s.candidates, s.ifcc, s.unanalyzable, s.unmatched
            );
        }
        Command::Classify {
            common,
            detect_rc,
            annotations,
        } => {
            let mut cfg = config(&common);
            cfg.detect_rc = detect_rc;
            cfg.annotations = annotations;
            let s = pipeline::run_classify(&cfg)?;
            println!("classified {}  non-fix {}", s.records, s.nonfix);
        }
        Command::Report { common, inputs } => {
            let mut cfg = config(&common);
            cfg.report_inputs = inputs.iter().map(|a| pipeline::parse_report_input(a)).collect();
            let tables = pipeline::run_report(&cfg)?;
            for t in tables {
                println!("{}: analysed {}  non-fix {}  total {}", t.project, t.analysed_fault, t.nonfix_count, t.total_fault());
            }
        }
        Command::Selftest {
            common,
            seed,
            max_atoms,
            count,
        } => {
            let mut cfg = config(&common);
            cfg.seed = seed;
            cfg.max_atoms = max_atoms;
            cfg.count = count;
            let report = pipeline::run_selftest(&cfg)?;
            for (class, n) in &report.checked {
                let failed = report.failures.iter().filter(|f| f.expected == *class).count();
                println!("{class:<8} {n:>6} mutants  {failed} failed");
            }
            for f in report.failures.iter().take(10) {
                println!("FAIL {}: `{}` -> `{}` classified {}", f.expected, f.bug, f.fix, f.actual);
            }
            println!(
                "{} expressions, {} mutants, {} failures",
                report.expressions,
                report.mutants(),
                report.failures.len()
            );
            if !report.passed() {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
