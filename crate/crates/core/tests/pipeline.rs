use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ifcc_core::classifier::{read_records, write_records};
use ifcc_core::pipeline::{self, run_all, run_mine, PipelineConfig, Source, CLASSIFICATIONS, CORRELATIONS, REPORT, REVISIONS};
use ifcc_core::{FaultClass, NonFixPattern};

fn fixture_repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/repo")
}

struct ManifestRow {
    revision: String,
    kind: String,
    file: String,
    expected: String,
}

fn manifest() -> Vec<ManifestRow> {
    fs::read_to_string(fixture_repo().join("MANIFEST.tsv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            ManifestRow {
                revision: f[0].into(),
                kind: f[1].into(),
                file: f[2].into(),
                expected: f[3].into(),
            }
        })
        .collect()
}

fn fixture_config(out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(out);
    cfg.source = Some(Source::DiffDir(fixture_repo()));
    cfg
}

#[test]
fn fixture_mine_matches_twelve_fix_revisions() {
    let expected: BTreeSet<String> = manifest().into_iter().filter(|r| r.kind == "fix").map(|r| r.revision).collect();
    assert_eq!(expected.len(), 12);
    let dir = tempfile::tempdir().unwrap();
    let summary = run_mine(&fixture_config(dir.path())).unwrap();
    assert_eq!(summary.revisions, 14);
    assert_eq!(summary.fix_revisions, 12);
    let mined: BTreeSet<String> = fs::read_to_string(dir.path().join(REVISIONS))
        .unwrap()
        .lines()
        .map(|l| l.split('\t').next().unwrap().to_string())
        .collect();
    assert_eq!(mined, expected);
}

#[test]
fn fixture_records_match_manifest() {
    let dir = tempfile::tempdir().unwrap();
    run_all(&fixture_config(dir.path())).unwrap();
    let records = read_records(&fs::read_to_string(dir.path().join(CLASSIFICATIONS)).unwrap()).unwrap();
    for row in manifest().iter().filter(|r| r.kind == "fix") {
        let found: Vec<_> = records
            .iter()
            .filter(|r| r.provenance.revision_id == row.revision && r.provenance.file_path == row.file)
            .collect();
        match row.expected.as_str() {
            "ADDED-IF" | "NON-EFFECTIVE" => assert!(found.is_empty(), "{} {}", row.revision, row.file),
            label => {
                assert_eq!(found.len(), 1, "{} {}", row.revision, row.file);
                match label.strip_prefix("NF-") {
                    Some(nf) => assert_eq!(found[0].nonfix, Some(nf.parse::<NonFixPattern>().unwrap())),
                    None => {
                        assert_eq!(found[0].fault_class, label.parse::<FaultClass>().unwrap(), "{}", row.revision);
                        assert_eq!(found[0].nonfix, None);
                    }
                }
            }
        }
    }
    assert!(records.iter().all(|r| r.provenance.revision_id != "r13"));
}

#[test]
fn stages_are_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config(dir.path());
    run_all(&cfg).unwrap();
    let first = fs::read(dir.path().join(CLASSIFICATIONS)).unwrap();
    pipeline::run_classify(&cfg).unwrap();
    assert_eq!(fs::read(dir.path().join(CLASSIFICATIONS)).unwrap(), first);
}

fn git(dir: &Path, args: &[&str]) {
    let status = Command::new("git")
        .arg("-C")
        .arg(dir)
        .args(["-c", "user.name=t", "-c", "user.email=t@example.com", "-c", "commit.gpgsign=false"])
        .args(args)
        .status()
        .unwrap();
    assert!(status.success(), "git {args:?}");
}

fn write_java(dir: &Path, condition: &str) {
    let text = format!(
        "class Door {{\n    void open() {{\n        int n = 0;\n        if ({condition}) {{\n            swing();\n        }}\n        close();\n    }}\n}}\n"
    );
    fs::write(dir.join("Door.java"), text).unwrap();
}

#[test]
fn git_repository_source() {
    let dir = tempfile::tempdir().unwrap();
    let repo = dir.path().join("repo");
    fs::create_dir(&repo).unwrap();
    git(&repo, &["init", "-q"]);
    write_java(&repo, "locked");
    git(&repo, &["add", "."]);
    git(&repo, &["commit", "-q", "-m", "Initial import"]);
    write_java(&repo, "locked && !forced");
    git(&repo, &["commit", "-q", "-am", "Fixed door opening when forced"]);
    write_java(&repo, "!forced && locked");
    git(&repo, &["commit", "-q", "-am", "Reorder checks"]);

    let out = dir.path().join("out");
    let mut cfg = PipelineConfig::new(&out);
    cfg.source = Some(Source::Git(repo));
    let summary = run_mine(&cfg).unwrap();
    assert_eq!((summary.revisions, summary.fix_revisions, summary.pairs), (3, 1, 1));
    pipeline::run_analyze(&cfg).unwrap();
    pipeline::run_classify(&cfg).unwrap();
    let records = read_records(&fs::read_to_string(out.join(CLASSIFICATIONS)).unwrap()).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].provenance.file_path, "Door.java");
    // The fix adds a literal, so the bug omitted it.
    assert_eq!(records[0].fault_class, FaultClass::Lof);
}

fn ifcc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ifcc")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn cli_exit_codes() {
    assert_eq!(ifcc(&[]).status.code(), Some(1));
    assert_eq!(ifcc(&["--help"]).status.code(), Some(0));
    assert_eq!(ifcc(&["mine", "--out", "x"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let missing = ifcc(&["analyze", "--out", out]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("hunk_pairs.tsv"));

    let repo = fixture_repo();
    let bad_regex = ifcc(&["mine", "--diff-dir", repo.to_str().unwrap(), "--out", out, "--regex", "fix("]);
    assert_eq!(bad_regex.status.code(), Some(1));
}

#[test]
fn cli_runs_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let repo = fixture_repo();
    let mut outs = Vec::new();
    for name in ["a", "b", "c"] {
        let out = dir.path().join(name);
        let out = out.to_str().unwrap().to_string();
        let mine = ifcc(&["mine", "--diff-dir", repo.to_str().unwrap(), "--out", &out]);
        assert!(mine.status.success());
        assert!(stdout(&mine).contains("fix revisions 12"));
        assert!(ifcc(&["analyze", "--out", &out]).status.success());
        let classify = ifcc(&["classify", "--out", &out, "--project", name]);
        assert!(stdout(&classify).contains("classified 12"));
        outs.push(out);
    }
    // Constant count vectors have no rank correlation, so skew each project.
    for (k, out) in outs.iter().enumerate() {
        let path = Path::new(out).join(CLASSIFICATIONS);
        let mut records = read_records(&fs::read_to_string(&path).unwrap()).unwrap();
        for extra in 0..(k + 1) * 2 {
            let mut r = records[k].clone();
            r.provenance.if_ordinal = 10 + extra;
            records.push(r);
        }
        fs::write(&path, write_records(&records).unwrap()).unwrap();
    }
    let report_dir = dir.path().join("report");
    let inputs: Vec<String> = ["a", "b", "c"]
        .iter()
        .zip(&outs)
        .map(|(n, o)| format!("{n}={o}/{CLASSIFICATIONS}"))
        .collect();
    let mut args = vec!["report", "--out", report_dir.to_str().unwrap()];
    args.extend(inputs.iter().map(String::as_str));
    let report = ifcc(&args);
    assert!(report.status.success(), "{}", String::from_utf8_lossy(&report.stderr));
    let correlations = fs::read_to_string(report_dir.join(CORRELATIONS)).unwrap();
    // C(3, 2) pairs.
    assert_eq!(correlations.lines().filter(|l| l.starts_with("if-cc,")).count(), 3);
    assert!(fs::read_to_string(report_dir.join(REPORT)).unwrap().contains("| a | "));
}

#[test]
fn cli_selftest_is_deterministic() {
    let args = ["selftest", "--max-atoms", "6", "--seed", "42", "--count", "60"];
    let (a, b) = (ifcc(&args), ifcc(&args));
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("60 expressions"));
    assert!(stdout(&a).ends_with("0 failures\n"));
}
