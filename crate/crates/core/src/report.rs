//! CSV and markdown renderings of frequency tables and correlations.

use std::fmt::Write as _;

use crate::classifier::{FaultClass, LrfSubclass};
use crate::stats::{
    correlation_matrix, fmt_p, fmt_pct, fmt_rho, top3_coverage, CategorySet, CorrelationResult, FrequencyTable, StatsError,
    DEFAULT_ALPHA, SMALL_N,
};

pub const FREQUENCY_HEADER: [&str; 4] = ["project", "category", "count", "pct"];
pub const CORRELATION_HEADER: [&str; 7] = ["category_set", "project_a", "project_b", "rho", "n", "p_value", "significant"];

/// Category label used in CSV and markdown rows, e.g. `LOF` or `LRF-MCC`.
pub fn lrf_label(sub: LrfSubclass) -> String {
    format!("LRF-{sub}")
}

fn csv_string(rows: Vec<Vec<String>>, header: &[&str]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 input")
}

pub fn frequencies_csv(tables: &[FrequencyTable]) -> String {
    let mut rows = Vec::new();
    for t in tables {
        for c in FaultClass::ALL {
            rows.push(vec![t.project.clone(), c.to_string(), t.count(c).to_string(), fmt_pct(t.pct(c))]);
        }
        for s in LrfSubclass::ALL {
            rows.push(vec![t.project.clone(), lrf_label(s), t.lrf_count(s).to_string(), fmt_pct(t.lrf_pct(s))]);
        }
        rows.push(vec![t.project.clone(), "Non-fix".into(), t.nonfix_count.to_string(), String::new()]);
        rows.push(vec![t.project.clone(), "Analysed".into(), t.analysed_fault.to_string(), String::new()]);
        rows.push(vec![t.project.clone(), "Total".into(), t.total_fault().to_string(), String::new()]);
    }
    csv_string(rows, &FREQUENCY_HEADER)
}

/// Correlations for one category set, or why they could not be computed.
pub type CorrelationOutcome = (CategorySet, Result<Vec<CorrelationResult>, StatsError>);

pub fn correlations(tables: &[FrequencyTable]) -> Vec<CorrelationOutcome> {
    [CategorySet::IfCc, CategorySet::LrfSubclasses]
        .into_iter()
        .map(|set| (set, correlation_matrix(tables, set)))
        .collect()
}

pub fn correlations_csv(outcomes: &[CorrelationOutcome]) -> String {
    let mut rows = Vec::new();
    for (set, result) in outcomes {
        for c in result.iter().flatten() {
            rows.push(vec![
                set.to_string(),
                c.project_a.clone(),
                c.project_b.clone(),
                fmt_rho(c.rho),
                c.n.to_string(),
                fmt_p(c.p_value),
                c.significant.to_string(),
            ]);
        }
    }
    csv_string(rows, &CORRELATION_HEADER)
}

fn correlation_section(out: &mut String, tables: &[FrequencyTable], set: CategorySet, result: &Result<Vec<CorrelationResult>, StatsError>) {
    let title = match set {
        CategorySet::IfCc => "Rank correlation of fault classes",
        CategorySet::LrfSubclasses => "Rank correlation of LRF subclasses",
    };
    let _ = writeln!(out, "## {title}\n");
    let results = match result {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(out, "Not computed: {e}.\n");
            return;
        }
    };
    if set.categories() < SMALL_N {
        let _ = writeln!(
            out,
            "Warning: only {} ranked categories; the t approximation behind the p-values is rough at this size.\n",
            set.categories()
        );
    }
    let names: Vec<&str> = tables.iter().map(|t| t.project.as_str()).collect();
    let _ = writeln!(out, "| | {} |", names[1..].join(" | "));
    let _ = writeln!(out, "|---|{}", "---|".repeat(names.len() - 1));
    for (i, a) in names.iter().enumerate().take(names.len() - 1) {
        let mut cells = Vec::new();
        for b in &names[1..] {
            let cell = results
                .iter()
                .find(|c| c.project_a == *a && c.project_b == *b)
                .map(|c| format!("{}{}", fmt_rho(c.rho), if c.significant { "*" } else { "" }))
                .unwrap_or_default();
            cells.push(cell);
        }
        let _ = writeln!(out, "| {} | {} |", names[i], cells.join(" | "));
    }
    let _ = writeln!(
        out,
        "\n`*` significant after Holm-Bonferroni over all {} pairs, family alpha {DEFAULT_ALPHA}.\n",
        results.len()
    );
}

pub fn markdown(tables: &[FrequencyTable], outcomes: &[CorrelationOutcome]) -> String {
    let mut out = String::from("# IF-CC fault classification report\n\n");
    out.push_str(
        "Counts are per changed `if`: a hunk that changes two `if` conditions contributes two records. \
         Non-fix records are excluded from the fault totals.\n\n",
    );
    out.push_str("## Frequencies\n\n");
    let names: Vec<&str> = tables.iter().map(|t| t.project.as_str()).collect();
    let _ = writeln!(out, "| Category | {} |", names.join(" | "));
    let _ = writeln!(out, "|---|{}", "---|".repeat(names.len()));
    let cell = |count: u64, pct: Option<f64>| match pct {
        Some(_) => format!("{count} ({}%)", fmt_pct(pct)),
        None => count.to_string(),
    };
    for c in FaultClass::ALL {
        let cells: Vec<String> = tables.iter().map(|t| cell(t.count(c), t.pct(c))).collect();
        let _ = writeln!(out, "| {c} | {} |", cells.join(" | "));
        if c == FaultClass::Lrf {
            for s in LrfSubclass::ALL {
                let cells: Vec<String> = tables.iter().map(|t| cell(t.lrf_count(s), t.lrf_pct(s))).collect();
                let _ = writeln!(out, "| {} | {} |", lrf_label(s), cells.join(" | "));
            }
        }
    }
    for (label, f) in [
        ("Non-fix", (|t: &FrequencyTable| t.nonfix_count) as fn(&FrequencyTable) -> u64),
        ("Analysed", |t| t.analysed_fault),
        ("Total", |t| t.total_fault()),
    ] {
        let cells: Vec<String> = tables.iter().map(|t| f(t).to_string()).collect();
        let _ = writeln!(out, "| {label} | {} |", cells.join(" | "));
    }
    let coverage: Vec<String> = tables
        .iter()
        .map(|t| format!("{} {}", t.project, top3_coverage(t).map_or("n/a".into(), |v| format!("{v:.1}%"))))
        .collect();
    let _ = writeln!(out, "\nTop-3 coverage (LRF + LOF + TOF): {}.\n", coverage.join(", "));
    if tables.len() >= 2 {
        for (set, result) in outcomes {
            correlation_section(&mut out, tables, *set, result);
        }
    }
    out
}
