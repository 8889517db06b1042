//! Single-fault mutants: the classifier run backwards.
//!
//! Given a correct condition and a fault class, [`enumerate_mutants`] lists
//! the faulty conditions whose repair into the given one is an instance of
//! that class. [`selftest`] checks the classifier against this oracle on
//! seeded random conditions.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::classifier::{classify, FaultClass};
use crate::condition::{parse_condition, AtomPayload, ConditionAst, JoinOp, LogicalOp, Node};
use crate::lexer::tokenize;
use crate::par::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MutantSite {
    /// Index into [`ConditionAst::atoms`].
    Atom(usize),
    /// Index into [`ConditionAst::operator_sequence`].
    Operator(usize),
    Root,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutantSpec {
    pub target_class: FaultClass,
    pub site: MutantSite,
    /// Atom introduced by insertion and replacement mutants.
    pub payload: Option<AtomPayload>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mutant {
    pub spec: MutantSpec,
    /// Normalized faulty condition.
    pub bug: ConditionAst,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MutationError {
    #[error("MULTIPLE is not a single-fault class")]
    MultipleClass,
    #[error("{class} cannot be realized on `{expression}`")]
    Unrealizable { class: FaultClass, expression: String },
}

/// Atom names `p0`, `p1`, … that do not occur in the given condition.
pub fn fresh_atoms(fix: &ConditionAst) -> impl Iterator<Item = AtomPayload> {
    let used: BTreeSet<String> = tokenize(&fix.to_text())
        .map(|ts| ts.tokens.into_iter().map(|t| t.text).collect())
        .unwrap_or_default();
    (0..)
        .map(|i| format!("p{i}"))
        .filter(move |name| !used.contains(name))
        .map(|name| AtomPayload::parse(&name).expect("identifier atom"))
}

fn joined_by(join: JoinOp, op: LogicalOp) -> bool {
    join == JoinOp::from(op)
}

/// Every single-edit mutant of `fix` for `class`, with the edit that made
/// it, ordered and deduplicated by canonical text. Mutants equal to `fix`
/// are left out.
pub fn enumerate_specs(fix: &ConditionAst, class: FaultClass) -> Result<Vec<Mutant>, MutationError> {
    let fix = fix.normalized();
    let atoms = fix.atoms();
    let fresh = fresh_atoms(&fix).next().expect("unbounded pool");
    let mut raw: Vec<(MutantSpec, Option<ConditionAst>)> = Vec::new();
    let spec = |site, payload| MutantSpec {
        target_class: class,
        site,
        payload,
    };
    match class {
        FaultClass::Multiple => return Err(MutationError::MultipleClass),
        FaultClass::Lof | FaultClass::Tof => {
            let op = if class == FaultClass::Lof { LogicalOp::And } else { LogicalOp::Or };
            for (i, site) in atoms.iter().enumerate() {
                if joined_by(site.join, op) {
                    raw.push((spec(MutantSite::Atom(i), None), fix.map_leaf(i, |_| None)));
                }
            }
        }
        FaultClass::Lif | FaultClass::Tif => {
            let op = if class == FaultClass::Lif { LogicalOp::And } else { LogicalOp::Or };
            for i in 0..atoms.len() {
                let added = Node::atom(fresh.clone());
                let bug = fix.map_leaf(i, |leaf| Some(Node::logical(op, vec![leaf, added])));
                raw.push((spec(MutantSite::Atom(i), Some(fresh.clone())), bug));
            }
        }
        FaultClass::Lnf | FaultClass::Tnf => {
            let op = if class == FaultClass::Lnf { LogicalOp::And } else { LogicalOp::Or };
            for (i, site) in atoms.iter().enumerate() {
                if joined_by(site.join, op) {
                    raw.push((spec(MutantSite::Atom(i), None), fix.map_leaf(i, |leaf| Some(leaf.toggled()))));
                }
            }
        }
        FaultClass::Enf => {
            raw.push((spec(MutantSite::Root, None), Some(ConditionAst::new(Node::not(fix.root.clone())))));
        }
        FaultClass::Orf => {
            for k in 0..fix.operator_sequence().len() {
                let flipped = parse_condition(&fix.to_text_with_flipped_operator(k)).ok();
                raw.push((spec(MutantSite::Operator(k), None), flipped));
            }
        }
        FaultClass::Lrf => {
            for i in 0..atoms.len() {
                let payload = fresh.clone();
                let bug = fix.map_leaf(i, |leaf| Some(leaf.with_payload(payload)));
                raw.push((spec(MutantSite::Atom(i), Some(fresh.clone())), bug));
            }
        }
    }
    let fix_text = fix.to_text();
    let mut unique: BTreeMap<String, Mutant> = BTreeMap::new();
    for (spec, bug) in raw {
        let Some(bug) = bug.map(|b| b.normalized()) else {
            continue;
        };
        let text = bug.to_text();
        if text != fix_text {
            unique.entry(text).or_insert(Mutant { spec, bug });
        }
    }
    Ok(unique.into_values().collect())
}

/// Faulty versions of `fix` for `class`; empty when the class cannot occur
/// on this condition. `Multiple` yields an empty list.
pub fn enumerate_mutants(fix: &ConditionAst, class: FaultClass) -> Vec<ConditionAst> {
    enumerate_specs(fix, class)
        .map(|ms| ms.into_iter().map(|m| m.bug).collect())
        .unwrap_or_default()
}

/// One mutant chosen deterministically by `seed` (index `seed mod count`).
pub fn random_mutant(fix: &ConditionAst, class: FaultClass, seed: u64) -> Result<ConditionAst, MutationError> {
    let mut all = enumerate_specs(fix, class)?;
    if all.is_empty() {
        return Err(MutationError::Unrealizable {
            class,
            expression: fix.to_text(),
        });
    }
    let idx = (seed % all.len() as u64) as usize;
    Ok(all.swap_remove(idx).bug)
}

fn atom_template(j: usize, pick: u32) -> String {
    match pick {
        0 => format!("v{j}"),
        1 => format!("v{j} > {j}"),
        2 => format!("o{j}.ready()"),
        3 => format!("s{j}.equals(t{j})"),
        _ => format!("r{j} != null"),
    }
}

fn random_tree(rng: &mut ChaCha8Rng, atoms: &[AtomPayload]) -> Node {
    let node = if let [only] = atoms {
        Node::atom(only.clone())
    } else {
        let parts = rng.gen_range(2..=atoms.len().min(3));
        let mut cuts: BTreeSet<usize> = BTreeSet::new();
        while cuts.len() < parts - 1 {
            cuts.insert(rng.gen_range(1..atoms.len()));
        }
        let op = if rng.gen_bool(0.5) { LogicalOp::And } else { LogicalOp::Or };
        let mut children = Vec::with_capacity(parts);
        let mut prev = 0;
        for cut in cuts.into_iter().chain(std::iter::once(atoms.len())) {
            children.push(random_tree(rng, &atoms[prev..cut]));
            prev = cut;
        }
        Node::logical(op, children)
    };
    if rng.gen_bool(0.2) {
        Node::not(node)
    } else {
        node
    }
}

/// A random normalized condition with between 1 and `max_atoms` distinct atoms.
pub fn random_expression(rng: &mut ChaCha8Rng, max_atoms: usize) -> ConditionAst {
    let n = rng.gen_range(1..=max_atoms.max(1));
    let atoms: Vec<AtomPayload> = (0..n)
        .map(|j| AtomPayload::parse(&atom_template(j, rng.gen_range(0..5))).expect("template parses"))
        .collect();
    ConditionAst::new(random_tree(rng, &atoms)).normalized()
}

/// `count` seeded random conditions.
pub fn random_expressions(seed: u64, count: usize, max_atoms: usize) -> Vec<ConditionAst> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_expression(&mut rng, max_atoms)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelftestFailure {
    pub fix: String,
    pub bug: String,
    pub expected: FaultClass,
    pub actual: FaultClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SelftestReport {
    pub expressions: usize,
    /// Mutants checked per generating class.
    pub checked: BTreeMap<FaultClass, usize>,
    pub failures: Vec<SelftestFailure>,
    pub elapsed: Duration,
}

impl SelftestReport {
    pub fn mutants(&self) -> usize {
        self.checked.values().sum()
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Classifies every mutant of every expression and compares against the
/// class that generated it.
pub fn selftest_expressions(expressions: &[ConditionAst], exec: Execution) -> SelftestReport {
    let start = Instant::now();
    let per_expr = exec.map(expressions, |fix| {
        let mut checked = Vec::new();
        let mut failures = Vec::new();
        for class in FaultClass::SINGLE {
            for bug in enumerate_mutants(fix, class) {
                let (actual, _) = classify(&bug, fix);
                checked.push(class);
                if actual != class {
                    failures.push(SelftestFailure {
                        fix: fix.to_text(),
                        bug: bug.to_text(),
                        expected: class,
                        actual,
                    });
                }
            }
        }
        (checked, failures)
    });
    let mut report = SelftestReport {
        expressions: expressions.len(),
        ..SelftestReport::default()
    };
    for (checked, failures) in per_expr {
        for c in checked {
            *report.checked.entry(c).or_default() += 1;
        }
        report.failures.extend(failures);
    }
    report.elapsed = start.elapsed();
    report
}

pub fn selftest(seed: u64, count: usize, max_atoms: usize, exec: Execution) -> SelftestReport {
    selftest_expressions(&random_expressions(seed, count, max_atoms), exec)
}
