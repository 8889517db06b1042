//! Fault classes of `if`-condition fixes.
//!
//! A (bug, fix) condition pair is reduced to an atom alignment and a small
//! decision procedure: root negation, pure operator change, or a single
//! atom edit whose position in the tree is verified structurally. Anything
//! else is [`FaultClass::Multiple`].

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::analyzer::{lcs_pairs, IfChangeCandidate, Provenance};
use crate::condition::{AtomKind, AtomPayload, ConditionAst, JoinOp, MethodCall, Node};
use crate::nonfix::NonFixPattern;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FaultClass {
    Lrf,
    Lof,
    Tof,
    Lif,
    Tif,
    Lnf,
    Tnf,
    Enf,
    Orf,
    Multiple,
}

impl FaultClass {
    pub const ALL: [FaultClass; 10] = [
        FaultClass::Lrf,
        FaultClass::Lof,
        FaultClass::Tof,
        FaultClass::Lif,
        FaultClass::Tif,
        FaultClass::Lnf,
        FaultClass::Tnf,
        FaultClass::Enf,
        FaultClass::Orf,
        FaultClass::Multiple,
    ];

    /// Classes that describe one edit (everything but `Multiple`).
    pub const SINGLE: [FaultClass; 9] = [
        FaultClass::Lrf,
        FaultClass::Lof,
        FaultClass::Tof,
        FaultClass::Lif,
        FaultClass::Tif,
        FaultClass::Lnf,
        FaultClass::Tnf,
        FaultClass::Enf,
        FaultClass::Orf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FaultClass::Lrf => "LRF",
            FaultClass::Lof => "LOF",
            FaultClass::Tof => "TOF",
            FaultClass::Lif => "LIF",
            FaultClass::Tif => "TIF",
            FaultClass::Lnf => "LNF",
            FaultClass::Tnf => "TNF",
            FaultClass::Enf => "ENF",
            FaultClass::Orf => "ORF",
            FaultClass::Multiple => "MULTIPLE",
        }
    }

    /// The class of the reverse fix (bug and fix exchanged).
    pub fn dual(self) -> FaultClass {
        match self {
            FaultClass::Lof => FaultClass::Lif,
            FaultClass::Lif => FaultClass::Lof,
            FaultClass::Tof => FaultClass::Tif,
            FaultClass::Tif => FaultClass::Tof,
            other => other,
        }
    }
}

impl fmt::Display for FaultClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown label `{0}`")]
pub struct UnknownLabel(pub String);

impl FromStr for FaultClass {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FaultClass::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LrfSubclass {
    Mcc,
    Mcp,
    Morc,
    Roc,
    Other,
}

impl LrfSubclass {
    pub const ALL: [LrfSubclass; 5] = [
        LrfSubclass::Mcc,
        LrfSubclass::Mcp,
        LrfSubclass::Morc,
        LrfSubclass::Roc,
        LrfSubclass::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LrfSubclass::Mcc => "MCC",
            LrfSubclass::Mcp => "MCP",
            LrfSubclass::Morc => "MORC",
            LrfSubclass::Roc => "ROC",
            LrfSubclass::Other => "OTHER",
        }
    }
}

impl fmt::Display for LrfSubclass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for LrfSubclass {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LrfSubclass::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

/// One step of the atom alignment. Indices refer to
/// [`ConditionAst::atoms`] order on the respective side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AtomEdit {
    Unchanged { bug: usize, fix: usize },
    Modified { bug: usize, fix: usize, join: JoinOp },
    Inserted { fix: usize, join: JoinOp },
    Deleted { bug: usize, join: JoinOp },
    NegationToggled { bug: usize, fix: usize, join: JoinOp },
}

impl AtomEdit {
    pub fn is_unchanged(&self) -> bool {
        matches!(self, AtomEdit::Unchanged { .. })
    }
}

/// Aligns the atoms of two (normalized) conditions by longest common
/// subsequence of their texts, ignoring negation. Leftover atoms between
/// two matches pair up as modifications; the surplus are insertions or
/// deletions.
pub fn align_atoms(bug: &ConditionAst, fix: &ConditionAst) -> Vec<AtomEdit> {
    let ba = bug.atoms();
    let fa = fix.atoms();
    let matches = lcs_pairs(&ba, &fa, |x, y| x.payload.canonical_text == y.payload.canonical_text);
    let mut edits = Vec::with_capacity(ba.len().max(fa.len()));
    let flush = |edits: &mut Vec<AtomEdit>, bugs: std::ops::Range<usize>, fixes: std::ops::Range<usize>| {
        let paired = bugs.len().min(fixes.len());
        for (b, f) in bugs.clone().zip(fixes.clone()).take(paired) {
            edits.push(AtomEdit::Modified { bug: b, fix: f, join: fa[f].join });
        }
        for b in bugs.skip(paired) {
            edits.push(AtomEdit::Deleted { bug: b, join: ba[b].join });
        }
        for f in fixes.skip(paired) {
            edits.push(AtomEdit::Inserted { fix: f, join: fa[f].join });
        }
    };
    let (mut bi, mut fi) = (0, 0);
    for (b, f) in matches {
        flush(&mut edits, bi..b, fi..f);
        edits.push(if ba[b].negated == fa[f].negated {
            AtomEdit::Unchanged { bug: b, fix: f }
        } else {
            AtomEdit::NegationToggled { bug: b, fix: f, join: fa[f].join }
        });
        bi = b + 1;
        fi = f + 1;
    }
    flush(&mut edits, bi..ba.len(), fi..fa.len());
    edits
}

fn normalized_eq(candidate: Option<ConditionAst>, target: &ConditionAst) -> bool {
    candidate.is_some_and(|c| c.normalized() == *target)
}

/// Assigns the fault class of the fix `bug → fix`, plus the LRF subclass
/// when the class is LRF. Both sides are normalized first.
pub fn classify(bug: &ConditionAst, fix: &ConditionAst) -> (FaultClass, Option<LrfSubclass>) {
    let bug = bug.normalized();
    let fix = fix.normalized();

    let negation_of = |a: &ConditionAst, b: &ConditionAst| matches!(&a.root, Node::Not(inner) if **inner == b.root);
    if negation_of(&fix, &bug) || negation_of(&bug, &fix) {
        return (FaultClass::Enf, None);
    }

    let edits = align_atoms(&bug, &fix);
    let changed: Vec<AtomEdit> = edits.into_iter().filter(|e| !e.is_unchanged()).collect();
    if changed.is_empty() {
        let orf = bug.operator_sequence() != fix.operator_sequence()
            && bug.compound_negations() == fix.compound_negations();
        return (if orf { FaultClass::Orf } else { FaultClass::Multiple }, None);
    }
    let single = match changed.as_slice() {
        [edit] if explains(&bug, &fix, edit) => Some(*edit),
        _ => search_single_edit(&bug, &fix),
    };
    let Some(edit) = single else {
        return (FaultClass::Multiple, None);
    };
    let by_join = |join: JoinOp, and: FaultClass, or: FaultClass, root: FaultClass| match join {
        JoinOp::And => and,
        JoinOp::Or => or,
        JoinOp::Root => root,
    };
    match edit {
        AtomEdit::Modified { bug: b, fix: f, .. } => (
            FaultClass::Lrf,
            Some(classify_lrf(bug.atoms()[b].payload, fix.atoms()[f].payload)),
        ),
        AtomEdit::Inserted { join, .. } => (by_join(join, FaultClass::Lof, FaultClass::Tof, FaultClass::Multiple), None),
        AtomEdit::Deleted { join, .. } => (by_join(join, FaultClass::Lif, FaultClass::Tif, FaultClass::Multiple), None),
        AtomEdit::NegationToggled { join, .. } => (by_join(join, FaultClass::Lnf, FaultClass::Tnf, FaultClass::Enf), None),
        AtomEdit::Unchanged { .. } => (FaultClass::Multiple, None),
    }
}

/// Whether applying `edit` to the (normalized) bug side yields the fix side.
fn explains(bug: &ConditionAst, fix: &ConditionAst, edit: &AtomEdit) -> bool {
    match *edit {
        AtomEdit::Modified { bug: b, fix: f, .. } => {
            let fix_atom = fix.atoms()[f].payload.clone();
            normalized_eq(bug.map_leaf(b, |leaf| Some(leaf.with_payload(fix_atom))), fix)
        }
        AtomEdit::Inserted { fix: f, join } => join != JoinOp::Root && normalized_eq(fix.map_leaf(f, |_| None), bug),
        AtomEdit::Deleted { bug: b, join } => join != JoinOp::Root && normalized_eq(bug.map_leaf(b, |_| None), fix),
        AtomEdit::NegationToggled { bug: b, .. } => normalized_eq(bug.map_leaf(b, |leaf| Some(leaf.toggled())), fix),
        AtomEdit::Unchanged { .. } => false,
    }
}

/// Tries every single edit. Needed when removing an atom also changes how
/// a neighbour's negation is attributed, e.g. `!b` versus `!(a && b)`.
fn search_single_edit(bug: &ConditionAst, fix: &ConditionAst) -> Option<AtomEdit> {
    let (ba, fa) = (&bug.atoms(), &fix.atoms());
    let candidates: Vec<AtomEdit> = if fa.len() == ba.len() + 1 {
        (0..fa.len()).map(|f| AtomEdit::Inserted { fix: f, join: fa[f].join }).collect()
    } else if ba.len() == fa.len() + 1 {
        (0..ba.len()).map(|b| AtomEdit::Deleted { bug: b, join: ba[b].join }).collect()
    } else if ba.len() == fa.len() {
        let toggles = (0..ba.len()).map(|i| AtomEdit::NegationToggled { bug: i, fix: i, join: fa[i].join });
        let modifications = (0..ba.len()).flat_map(|b| {
            (0..fa.len())
                .filter(move |&f| ba[b].payload.canonical_text != fa[f].payload.canonical_text)
                .map(move |f| AtomEdit::Modified { bug: b, fix: f, join: fa[f].join })
        });
        toggles.chain(modifications).collect()
    } else {
        Vec::new()
    };
    candidates.into_iter().find(|e| explains(bug, fix, e))
}

fn method_subclass(b: &MethodCall, f: &MethodCall) -> LrfSubclass {
    if b.method_name != f.method_name {
        LrfSubclass::Mcc
    } else if b.argument_texts != f.argument_texts {
        LrfSubclass::Mcp
    } else if b.receiver_chain != f.receiver_chain {
        LrfSubclass::Morc
    } else {
        LrfSubclass::Other
    }
}

/// Refines a single replaced atom. Comparisons whose one changed operand is
/// a method call on both sides are refined by that call.
pub fn classify_lrf(bug_atom: &AtomPayload, fix_atom: &AtomPayload) -> LrfSubclass {
    match (&bug_atom.kind, &fix_atom.kind) {
        (AtomKind::MethodCall(b), AtomKind::MethodCall(f)) => method_subclass(b, f),
        (AtomKind::Relational(b), AtomKind::Relational(f)) => {
            let same_lhs = b.lhs.text == f.lhs.text;
            let same_rhs = b.rhs.text == f.rhs.text;
            if b.op != f.op {
                return if same_lhs && same_rhs { LrfSubclass::Roc } else { LrfSubclass::Other };
            }
            let (bo, fo) = match (same_lhs, same_rhs) {
                (false, true) => (&b.lhs, &f.lhs),
                (true, false) => (&b.rhs, &f.rhs),
                _ => return LrfSubclass::Other,
            };
            match (&bo.call, &fo.call) {
                (Some(bc), Some(fc)) => method_subclass(bc, fc),
                _ => LrfSubclass::Other,
            }
        }
        _ => LrfSubclass::Other,
    }
}

/// One classified `if`-condition change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassificationRecord {
    pub provenance: Provenance,
    pub fault_class: FaultClass,
    pub lrf_subclass: Option<LrfSubclass>,
    /// Set when the change has no semantic effect; such records are left
    /// out of fault-class tallies.
    pub nonfix: Option<NonFixPattern>,
    pub bug_text: String,
    pub fix_text: String,
}

impl ClassificationRecord {
    pub fn new(candidate: &IfChangeCandidate, nonfix: Option<NonFixPattern>) -> Self {
        let (fault_class, lrf_subclass) = classify(&candidate.bug_condition, &candidate.fix_condition);
        ClassificationRecord {
            provenance: candidate.provenance.clone(),
            fault_class,
            lrf_subclass,
            nonfix,
            bug_text: candidate.bug_condition.to_text(),
            fix_text: candidate.fix_condition.to_text(),
        }
    }
}

pub const RECORD_HEADER: [&str; 9] = [
    "revision_id",
    "file",
    "hunk_index",
    "if_ordinal",
    "fault_class",
    "lrf_subclass",
    "nonfix_pattern",
    "bug_text",
    "fix_text",
];

#[derive(Debug, Error)]
pub enum RecordError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("record {row}: {message}")]
    Field { row: usize, message: String },
}

pub fn write_records(records: &[ClassificationRecord]) -> Result<String, RecordError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RECORD_HEADER)?;
    for r in records {
        let p = &r.provenance;
        w.write_record([
            p.revision_id.as_str(),
            p.file_path.as_str(),
            &p.hunk_index.to_string(),
            &p.if_ordinal.to_string(),
            r.fault_class.as_str(),
            r.lrf_subclass.map_or("", LrfSubclass::as_str),
            r.nonfix.map_or("", NonFixPattern::as_str),
            &r.bug_text,
            &r.fix_text,
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| RecordError::Field {
        row: 0,
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output of UTF-8 input"))
}

pub fn read_records(text: &str) -> Result<Vec<ClassificationRecord>, RecordError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row?;
        let field = |message: String| RecordError::Field { row: row_no, message };
        if row.len() != RECORD_HEADER.len() {
            return Err(field(format!("expected {} fields, found {}", RECORD_HEADER.len(), row.len())));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| field(format!("bad number `{s}`")));
        let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
        let record = ClassificationRecord {
            provenance: Provenance {
                revision_id: row[0].to_string(),
                file_path: row[1].to_string(),
                hunk_index: num(&row[2])?,
                if_ordinal: num(&row[3])?,
            },
            fault_class: row[4].parse().map_err(|e: UnknownLabel| field(e.to_string()))?,
            lrf_subclass: opt(&row[5])
                .map(|s| s.parse())
                .transpose()
                .map_err(|e: UnknownLabel| field(e.to_string()))?,
            nonfix: opt(&row[6])
                .map(|s| s.parse())
                .transpose()
                .map_err(|e: UnknownLabel| field(e.to_string()))?,
            bug_text: row[7].to_string(),
            fix_text: row[8].to_string(),
        };
        if record.lrf_subclass.is_some() && record.fault_class != FaultClass::Lrf {
            return Err(field("LRF subclass on a non-LRF record".into()));
        }
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ast(s: &str) -> ConditionAst {
        ConditionAst::parse(s).unwrap()
    }

    fn class(bug: &str, fix: &str) -> (FaultClass, Option<LrfSubclass>) {
        classify(&ast(bug), &ast(fix))
    }

    #[test]
    fn alignment_examples() {
        let e = align_atoms(&ast("source==caretStatus"), &ast("source==caretStatus && evt.getClickCount()==2"));
        assert_eq!(e, [AtomEdit::Unchanged { bug: 0, fix: 0 }, AtomEdit::Inserted { fix: 1, join: JoinOp::And }]);
        let e = align_atoms(&ast("item==null || item.isStream()"), &ast("item==null || !item.isStream()"));
        assert_eq!(
            e,
            [AtomEdit::Unchanged { bug: 0, fix: 0 }, AtomEdit::NegationToggled { bug: 1, fix: 1, join: JoinOp::Or }]
        );
        assert!(align_atoms(&ast("a && b"), &ast("a && b")).iter().all(AtomEdit::is_unchanged));
        let e = align_atoms(&ast("a && b && c"), &ast("a && x"));
        assert_eq!(
            e,
            [
                AtomEdit::Unchanged { bug: 0, fix: 0 },
                AtomEdit::Modified { bug: 1, fix: 1, join: JoinOp::And },
                AtomEdit::Deleted { bug: 2, join: JoinOp::And }
            ]
        );
    }

    #[test]
    fn decision_examples() {
        assert_eq!(class("sorter!=null && buffers.contains(buffer)", "sorter!=null").0, FaultClass::Lif);
        assert_eq!(class("palette!=null || palette.length!=0", "palette!=null && palette.length!=0").0, FaultClass::Orf);
        assert_eq!(class("config.top!=null && config.top.length()!=0", "config==null").0, FaultClass::Multiple);
        assert_eq!(class("!row.isEmpty()", "row.isEmpty()").0, FaultClass::Enf);
        assert_eq!(class("a", "b"), (FaultClass::Lrf, Some(LrfSubclass::Other)));
        assert_eq!(class("a && b", "!(a && b)").0, FaultClass::Enf);
        assert_eq!(class("a || b", "a || b || c").0, FaultClass::Tof);
        assert_eq!(class("a || b", "a || (b && c)").0, FaultClass::Lof);
        assert_eq!(class("a && b", "a && b && c && d").0, FaultClass::Multiple);
        // A modified atom plus an operator change elsewhere.
        assert_eq!(class("a && b || c", "a && x && c").0, FaultClass::Multiple);
        assert_eq!(class("a || !(b && c)", "a && !(b && c)").0, FaultClass::Orf);
        assert_eq!(class("!(a || b)", "!a || b").0, FaultClass::Multiple);
        assert_eq!(class("!b || c", "!(a && b) || c").0, FaultClass::Lof);
        assert_eq!(class("!(a && b) || c", "!b || c").0, FaultClass::Lif);
    }

    #[test]
    fn lrf_subclasses() {
        let sub = |b: &str, f: &str| classify_lrf(&AtomPayload::parse(b).unwrap(), &AtomPayload::parse(f).unwrap());
        assert_eq!(sub("jEdit.getBooleanProperty(\"jdiff.horiz-scroll\")", "jEdit.getBooleanProperty(HORIZ_SCROLL)"), LrfSubclass::Mcp);
        assert_eq!(sub("dummyViews.contains(window)", "dummyViews.remove(window)"), LrfSubclass::Mcc);
        assert_eq!(sub("index > 0", "index >= 0"), LrfSubclass::Roc);
        assert_eq!(sub("drag", "dragStart != null"), LrfSubclass::Other);
        assert_eq!(sub("data.getUsername() == null", "getUsername() == null"), LrfSubclass::Morc);
        assert_eq!(sub("a.f(x)", "b.g(y)"), LrfSubclass::Mcc);
        assert_eq!(sub("x < y", "y > x"), LrfSubclass::Other);
    }

    #[test]
    fn labels_round_trip() {
        for c in FaultClass::ALL {
            assert_eq!(c.as_str().parse::<FaultClass>().unwrap(), c);
            assert_eq!(c.dual().dual(), c);
        }
        for s in LrfSubclass::ALL {
            assert_eq!(s.to_string().parse::<LrfSubclass>().unwrap(), s);
        }
        assert!("XYZ".parse::<FaultClass>().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let rec = ClassificationRecord {
            provenance: Provenance {
                revision_id: "r1".into(),
                file_path: "a,b.java".into(),
                hunk_index: 2,
                if_ordinal: 0,
            },
            fault_class: FaultClass::Lrf,
            lrf_subclass: Some(LrfSubclass::Roc),
            nonfix: None,
            bug_text: "x > \"0\"".into(),
            fix_text: "x >= 0".into(),
        };
        let mut other = rec.clone();
        other.fault_class = FaultClass::Orf;
        other.lrf_subclass = None;
        other.nonfix = Some(NonFixPattern::Armp);
        let text = write_records(&[rec.clone(), other.clone()]).unwrap();
        assert!(text.starts_with("revision_id,file,hunk_index,if_ordinal,fault_class,lrf_subclass,nonfix_pattern,bug_text,fix_text\n"));
        assert_eq!(read_records(&text).unwrap(), vec![rec, other]);
        let bad = "revision_id,file,hunk_index,if_ordinal,fault_class,lrf_subclass,nonfix_pattern,bug_text,fix_text\nr,f,1,0,ORF,ROC,,a,b\n";
        assert!(matches!(read_records(bad), Err(RecordError::Field { row: 1, .. })));
    }
}
