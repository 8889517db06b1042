//! Frequency tables, Spearman rank correlation and Holm-Bonferroni.

use std::collections::BTreeMap;
use std::fmt;

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::classifier::{ClassificationRecord, FaultClass, LrfSubclass};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Below this many ranked categories p-values come with a warning.
pub const SMALL_N: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CategorySet {
    /// The ten fault classes, LRF counted as a whole.
    IfCc,
    LrfSubclasses,
}

impl CategorySet {
    pub fn as_str(self) -> &'static str {
        match self {
            CategorySet::IfCc => "if-cc",
            CategorySet::LrfSubclasses => "lrf-subclass",
        }
    }

    pub fn categories(self) -> usize {
        match self {
            CategorySet::IfCc => FaultClass::ALL.len(),
            CategorySet::LrfSubclasses => LrfSubclass::ALL.len(),
        }
    }
}

impl fmt::Display for CategorySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    pub project: String,
    pub fault_counts: BTreeMap<FaultClass, u64>,
    pub lrf_counts: BTreeMap<LrfSubclass, u64>,
    /// All classified records, non-fix included.
    pub analysed_fault: u64,
    pub nonfix_count: u64,
}

/// `count / total × 100` rounded half-up to one decimal, in exact integer
/// arithmetic; `None` when `total` is zero.
pub fn percentage(count: u64, total: u64) -> Option<f64> {
    if total == 0 {
        return None;
    }
    let tenths = (count as u128 * 2000 + total as u128) / (2 * total as u128);
    Some(tenths as f64 / 10.0)
}

impl FrequencyTable {
    /// Builds a table from per-class counts in [`FaultClass::ALL`] order and
    /// LRF subclass counts in [`LrfSubclass::ALL`] order.
    pub fn from_counts(project: impl Into<String>, fault: [u64; 10], lrf: [u64; 5], nonfix_count: u64) -> Self {
        let fault_counts: BTreeMap<_, _> = FaultClass::ALL.into_iter().zip(fault).collect();
        let total: u64 = fault.iter().sum();
        FrequencyTable {
            project: project.into(),
            fault_counts,
            lrf_counts: LrfSubclass::ALL.into_iter().zip(lrf).collect(),
            analysed_fault: total + nonfix_count,
            nonfix_count,
        }
    }

    pub fn total_fault(&self) -> u64 {
        self.analysed_fault - self.nonfix_count
    }

    pub fn count(&self, class: FaultClass) -> u64 {
        self.fault_counts.get(&class).copied().unwrap_or(0)
    }

    pub fn lrf_count(&self, sub: LrfSubclass) -> u64 {
        self.lrf_counts.get(&sub).copied().unwrap_or(0)
    }

    pub fn pct(&self, class: FaultClass) -> Option<f64> {
        percentage(self.count(class), self.total_fault())
    }

    pub fn lrf_pct(&self, sub: LrfSubclass) -> Option<f64> {
        percentage(self.lrf_count(sub), self.total_fault())
    }

    /// Counts of the chosen categories in their fixed order.
    pub fn vector(&self, set: CategorySet) -> Vec<f64> {
        match set {
            CategorySet::IfCc => FaultClass::ALL.iter().map(|&c| self.count(c) as f64).collect(),
            CategorySet::LrfSubclasses => LrfSubclass::ALL.iter().map(|&s| self.lrf_count(s) as f64).collect(),
        }
    }
}

/// Tallies the records of one project. Non-fix records count towards
/// `analysed_fault` and `nonfix_count` only.
pub fn frequency_table(records: &[ClassificationRecord], project: &str) -> FrequencyTable {
    let mut fault = [0u64; 10];
    let mut lrf = [0u64; 5];
    let mut nonfix = 0;
    for r in records {
        if r.nonfix.is_some() {
            nonfix += 1;
            continue;
        }
        let i = FaultClass::ALL.iter().position(|&c| c == r.fault_class).expect("known class");
        fault[i] += 1;
        if let Some(sub) = r.lrf_subclass {
            let j = LrfSubclass::ALL.iter().position(|&s| s == sub).expect("known subclass");
            lrf[j] += 1;
        }
    }
    FrequencyTable::from_counts(project, fault, lrf, nonfix)
}

/// Share of LRF, LOF and TOF among all faults, unrounded.
pub fn top3_coverage(table: &FrequencyTable) -> Option<f64> {
    let total = table.total_fault();
    (total > 0).then(|| {
        let top = table.count(FaultClass::Lrf) + table.count(FaultClass::Lof) + table.count(FaultClass::Tof);
        top as f64 * 100.0 / total as f64
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {min} values, got {n}")]
    TooFew { n: usize, min: usize },
    #[error("ranks have zero variance; correlation is undefined")]
    ZeroVariance,
    #[error("correlation {0} outside [-1, 1]")]
    OutOfRange(f64),
    #[error("need at least two tables")]
    TooFewTables,
}

/// Ranks with the largest value first; ties share their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho as the Pearson correlation of midranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFew { n: x.len(), min: 2 });
    }
    pearson(&midranks(x), &midranks(y))
}

/// Two-sided p-value of `rho` over `n` pairs via Student's t with `n - 2`
/// degrees of freedom.
pub fn spearman_pvalue(rho: f64, n: usize) -> Result<f64, StatsError> {
    if n < 3 {
        return Err(StatsError::TooFew { n, min: 3 });
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(StatsError::OutOfRange(rho));
    }
    if rho.abs() == 1.0 {
        return Ok(0.0);
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    Ok((2.0 * dist.sf(t.abs())).clamp(0.0, 1.0))
}

/// Holm's step-down procedure; `true` marks a rejected hypothesis.
pub fn holm_bonferroni(p_values: &[f64], alpha: f64) -> Vec<bool> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut reject = vec![false; m];
    for (i, &k) in order.iter().enumerate() {
        if p_values[k] <= alpha / (m - i) as f64 {
            reject[k] = true;
        } else {
            break;
        }
    }
    reject
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationResult {
    pub project_a: String,
    pub project_b: String,
    pub rho: f64,
    pub n: usize,
    pub p_value: f64,
    pub significant: bool,
}

/// Pairwise correlations over the upper triangle (row-major in table
/// order), with Holm-Bonferroni across the whole family.
pub fn correlation_matrix(tables: &[FrequencyTable], set: CategorySet) -> Result<Vec<CorrelationResult>, StatsError> {
    correlation_matrix_at(tables, set, DEFAULT_ALPHA)
}

pub fn correlation_matrix_at(tables: &[FrequencyTable], set: CategorySet, alpha: f64) -> Result<Vec<CorrelationResult>, StatsError> {
    if tables.len() < 2 {
        return Err(StatsError::TooFewTables);
    }
    let vectors: Vec<Vec<f64>> = tables.iter().map(|t| t.vector(set)).collect();
    let mut out = Vec::new();
    for i in 0..tables.len() {
        for j in i + 1..tables.len() {
            let rho = spearman(&vectors[i], &vectors[j])?;
            let n = vectors[i].len();
            out.push(CorrelationResult {
                project_a: tables[i].project.clone(),
                project_b: tables[j].project.clone(),
                rho,
                n,
                p_value: spearman_pvalue(rho, n)?,
                significant: false,
            });
        }
    }
    let p: Vec<f64> = out.iter().map(|c| c.p_value).collect();
    for (c, s) in out.iter_mut().zip(holm_bonferroni(&p, alpha)) {
        c.significant = s;
    }
    Ok(out)
}

pub fn fmt_rho(rho: f64) -> String {
    format!("{rho:.2}")
}

pub fn fmt_pct(pct: Option<f64>) -> String {
    pct.map(|p| format!("{p:.1}")).unwrap_or_default()
}

/// Scientific notation with three significant figures.
pub fn fmt_p(p: f64) -> String {
    format!("{p:.2e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(percentage(18, 85), Some(21.2));
        assert_eq!(percentage(1, 8), Some(12.5));
        assert_eq!(percentage(1, 16), Some(6.3));
        assert_eq!(percentage(1, 0), None);
        assert_eq!(fmt_pct(None), "");
    }

    #[test]
    fn spearman_basics() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert_eq!(fmt_rho(spearman(&x, &x).unwrap()), "1.00");
        assert_eq!(fmt_rho(spearman(&x, &y).unwrap()), "-1.00");
        assert_eq!(spearman(&x, &[1.0; 5]), Err(StatsError::ZeroVariance));
        assert!(matches!(spearman(&x, &y[..3]), Err(StatsError::LengthMismatch(5, 3))));
        assert_eq!(midranks(&[10.0, 30.0, 10.0, 5.0]), [2.5, 1.0, 2.5, 4.0]);
    }

    #[test]
    fn pvalue_edges() {
        assert_eq!(spearman_pvalue(1.0, 10).unwrap(), 0.0);
        assert!((spearman_pvalue(0.0, 10).unwrap() - 1.0).abs() < 1e-12);
        assert!(spearman_pvalue(0.5, 2).is_err());
        assert_eq!(fmt_p(5.2712e-5), "5.27e-5");
    }

    #[test]
    fn holm_examples() {
        assert_eq!(holm_bonferroni(&[0.01], 0.05), [true]);
        assert_eq!(holm_bonferroni(&[0.001, 0.049], 0.05), [true, true]);
        assert_eq!(holm_bonferroni(&[0.03, 0.04], 0.05), [false, false]);
        assert_eq!(holm_bonferroni(&[0.04, 0.001, 0.5], 0.05), [false, true, false]);
        assert!(holm_bonferroni(&[], 0.05).is_empty());
    }

    #[test]
    fn tables_from_records_skip_nonfix() {
        use crate::analyzer::Provenance;
        let rec = |class, sub, nonfix| ClassificationRecord {
            provenance: Provenance {
                revision_id: "r".into(),
                file_path: "f".into(),
                hunk_index: 0,
                if_ordinal: 0,
            },
            fault_class: class,
            lrf_subclass: sub,
            nonfix,
            bug_text: "a".into(),
            fix_text: "b".into(),
        };
        let t = frequency_table(
            &[
                rec(FaultClass::Lrf, Some(LrfSubclass::Roc), None),
                rec(FaultClass::Lrf, Some(LrfSubclass::Other), Some(crate::NonFixPattern::Eoie)),
            ],
            "p",
        );
        assert_eq!(t.analysed_fault, 2);
        assert_eq!(t.total_fault(), 1);
        assert_eq!(t.pct(FaultClass::Lrf), Some(100.0));
        assert_eq!(t.lrf_count(LrfSubclass::Other), 0);
        assert_eq!(top3_coverage(&t), Some(100.0));
        let empty = frequency_table(&[], "e");
        assert_eq!(empty.pct(FaultClass::Lrf), None);
        assert_eq!(top3_coverage(&empty), None);
    }

    #[test]
    fn identical_tables_correlate_perfectly() {
        let t = FrequencyTable::from_counts("a", [5, 4, 3, 2, 1, 0, 0, 1, 2, 3], [1, 2, 3, 4, 5], 0);
        let mut u = t.clone();
        u.project = "b".into();
        let m = correlation_matrix(&[t.clone(), u], CategorySet::IfCc).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(fmt_rho(m[0].rho), "1.00");
        assert!(correlation_matrix(&[t], CategorySet::IfCc).is_err());
    }

    proptest! {
        #[test]
        fn spearman_symmetric_and_rank_invariant(
            pairs in prop::collection::vec((0u32..50, 0u32..50), 3..12)
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            let (Ok(a), Ok(b)) = (spearman(&x, &y), spearman(&y, &x)) else {
                return Ok(());
            };
            prop_assert!((a - b).abs() < 1e-12);
            let squashed: Vec<f64> = x.iter().map(|v| (v + 1.0).ln() * 3.0 + 7.0).collect();
            prop_assert!((spearman(&squashed, &y).unwrap() - a).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&a));
        }

        #[test]
        fn holm_monotone_in_p(
            ps in prop::collection::vec(0.0f64..0.2, 1..15),
            idx in any::<prop::sample::Index>(),
            factor in 0.0f64..1.0
        ) {
            let before = holm_bonferroni(&ps, 0.05);
            let mut lowered = ps.clone();
            let k = idx.index(ps.len());
            lowered[k] *= factor;
            let after = holm_bonferroni(&lowered, 0.05);
            for (b, a) in before.iter().zip(&after) {
                prop_assert!(!b || *a);
            }
        }

        #[test]
        fn percentages_recompute(counts in prop::array::uniform10(0u64..400)) {
            let t = FrequencyTable::from_counts("p", counts, [0; 5], 3);
            let total: u64 = counts.iter().sum();
            prop_assert_eq!(t.total_fault(), total);
            if total > 0 {
                let sum: f64 = FaultClass::ALL.iter().map(|&c| t.pct(c).unwrap()).sum();
                prop_assert!((sum - 100.0).abs() <= 0.5 + 1e-9);
                for &c in &FaultClass::ALL {
                    let exact = t.count(c) as f64 * 100.0 / total as f64;
                    prop_assert!((t.pct(c).unwrap() - exact).abs() <= 0.05 + 1e-9);
                }
            }
        }
    }
}
