//! Condition changes without semantic effect.
//!
//! Three patterns are recognized statically: swapped `equals` operands,
//! mirrored comparison operands and added/removed redundant parentheses.
//! Boolean-literal comparisons can optionally be detected too. The rest are
//! labels for manual annotations only.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::analyzer::{strip_casts, Provenance};
use crate::classifier::UnknownLabel;
use crate::condition::{AtomKind, AtomPayload, ConditionAst, Node, RelOp};
use crate::lexer::{join_tokens, tokenize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NonFixPattern {
    /// Operands of `equals` exchanged.
    Eoem,
    /// Operands of an infix comparison exchanged.
    Eoie,
    /// A variable replaced by the constant it always holds.
    Ebcv,
    /// A variable replaced by another that always holds the same value.
    Vnc,
    /// Redundant parentheses added or removed.
    Armp,
    /// Redundant code such as `== true` or a cast.
    Rc,
}

impl NonFixPattern {
    pub const ALL: [NonFixPattern; 6] = [
        NonFixPattern::Eoem,
        NonFixPattern::Eoie,
        NonFixPattern::Ebcv,
        NonFixPattern::Vnc,
        NonFixPattern::Armp,
        NonFixPattern::Rc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NonFixPattern::Eoem => "EOEM",
            NonFixPattern::Eoie => "EOIE",
            NonFixPattern::Ebcv => "EBCV",
            NonFixPattern::Vnc => "VNC",
            NonFixPattern::Armp => "ARMP",
            NonFixPattern::Rc => "RC",
        }
    }

    pub fn detected_statically(self) -> bool {
        matches!(self, NonFixPattern::Eoem | NonFixPattern::Eoie | NonFixPattern::Armp)
    }
}

impl fmt::Display for NonFixPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NonFixPattern {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let s = s.strip_prefix("NF-").unwrap_or(s);
        NonFixPattern::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NonFixOptions {
    /// Also flag boolean-literal comparisons and casts (off by default).
    pub detect_rc: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Swap {
    None,
    Equals,
    Infix,
}

fn equals_swap(b: &AtomPayload, f: &AtomPayload) -> bool {
    let (AtomKind::MethodCall(b), AtomKind::MethodCall(f)) = (&b.kind, &f.kind) else {
        return false;
    };
    let eligible = |m: &crate::condition::MethodCall| {
        m.method_name == "equals" && m.argument_texts.len() == 1 && !m.receiver_chain.is_empty()
    };
    if !eligible(b) || !eligible(f) {
        return false;
    }
    let (br, ba) = (b.receiver_text(), &b.argument_texts[0]);
    let (fr, fa) = (f.receiver_text(), &f.argument_texts[0]);
    br == *fa && *ba == fr && br != *ba
}

fn infix_swap(b: &AtomPayload, f: &AtomPayload) -> bool {
    let (AtomKind::Relational(b), AtomKind::Relational(f)) = (&b.kind, &f.kind) else {
        return false;
    };
    b.lhs.text == f.rhs.text && b.rhs.text == f.lhs.text && b.op.mirrored() == Some(f.op) && b.lhs.text != b.rhs.text
}

/// Walks two trees in lockstep; every atom pair must be equal or an operand
/// swap. Returns the strongest swap seen, or `None` on any other difference.
fn zip_swaps(b: &Node, f: &Node) -> Option<Swap> {
    match (b, f) {
        (Node::Atom(x), Node::Atom(y)) => {
            if x.canonical_text == y.canonical_text {
                Some(Swap::None)
            } else if equals_swap(x, y) {
                Some(Swap::Equals)
            } else if infix_swap(x, y) {
                Some(Swap::Infix)
            } else {
                None
            }
        }
        (Node::Not(x), Node::Not(y)) | (Node::Group(x), Node::Group(y)) => zip_swaps(x, y),
        (Node::And(xs), Node::And(ys)) | (Node::Or(xs), Node::Or(ys)) if xs.len() == ys.len() => {
            let mut seen = Swap::None;
            for (x, y) in xs.iter().zip(ys) {
                match zip_swaps(x, y)? {
                    Swap::None => {}
                    Swap::Equals => seen = Swap::Equals,
                    Swap::Infix if seen == Swap::None => seen = Swap::Infix,
                    Swap::Infix => {}
                }
            }
            Some(seen)
        }
        _ => None,
    }
}

/// Rewrites `x == true`, `x != false` to `x`, `x == false`, `x != true` to
/// `!x`, and drops casts inside atoms.
fn without_redundant_code(node: &Node) -> Node {
    match node {
        Node::Atom(a) => rc_atom(a),
        Node::Not(c) => Node::not(without_redundant_code(c)),
        Node::Group(c) => Node::Group(Box::new(without_redundant_code(c))),
        Node::And(cs) => Node::And(cs.iter().map(without_redundant_code).collect()),
        Node::Or(cs) => Node::Or(cs.iter().map(without_redundant_code).collect()),
    }
}

fn rc_atom(a: &AtomPayload) -> Node {
    let Ok(stream) = tokenize(&a.canonical_text) else {
        return Node::Atom(a.clone());
    };
    let stripped = join_tokens(strip_casts(&stream.tokens));
    let Ok(atom) = AtomPayload::parse(&stripped) else {
        return Node::Atom(a.clone());
    };
    if let AtomKind::Relational(r) = &atom.kind {
        let literal = |t: &str| matches!(t, "true" | "false");
        let (operand, lit) = if literal(&r.rhs.text) {
            (&r.lhs.text, r.rhs.text.as_str())
        } else if literal(&r.lhs.text) {
            (&r.rhs.text, r.lhs.text.as_str())
        } else {
            return Node::Atom(atom);
        };
        let positive = match r.op {
            RelOp::Eq => lit == "true",
            RelOp::Ne => lit == "false",
            _ => return Node::Atom(atom),
        };
        let Ok(inner) = ConditionAst::parse(operand) else {
            return Node::Atom(atom);
        };
        return if positive { inner.root } else { Node::not(inner.root) };
    }
    Node::Atom(atom)
}

/// Flags (bug, fix) condition pairs that differ only syntactically.
pub fn detect_nonfix(bug: &ConditionAst, fix: &ConditionAst) -> Option<NonFixPattern> {
    detect_nonfix_with(bug, fix, NonFixOptions::default())
}

pub fn detect_nonfix_with(bug: &ConditionAst, fix: &ConditionAst, options: NonFixOptions) -> Option<NonFixPattern> {
    let (nb, bug_stripped) = bug.normalize();
    let (nf, fix_stripped) = fix.normalize();
    if nb == nf {
        return (bug_stripped || fix_stripped).then_some(NonFixPattern::Armp);
    }
    match zip_swaps(&nb.root, &nf.root) {
        Some(Swap::Equals) => return Some(NonFixPattern::Eoem),
        Some(Swap::Infix) => return Some(NonFixPattern::Eoie),
        _ => {}
    }
    if options.detect_rc {
        let rb = ConditionAst::new(without_redundant_code(&nb.root)).normalized();
        let rf = ConditionAst::new(without_redundant_code(&nf.root)).normalized();
        if rb == rf {
            return Some(NonFixPattern::Rc);
        }
    }
    None
}

/// Manual verdicts keyed by provenance; `None` clears an automatic flag.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Annotations {
    entries: BTreeMap<Provenance, Option<NonFixPattern>>,
}

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("annotation row {row}: {message}")]
    Field { row: usize, message: String },
}

pub const ANNOTATION_HEADER: [&str; 5] = ["revision_id", "file", "hunk_index", "if_ordinal", "pattern"];

impl Annotations {
    pub fn parse(text: &str) -> Result<Annotations, AnnotationError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut entries = BTreeMap::new();
        for (i, row) in reader.records().enumerate() {
            let row_no = i + 1;
            let row = row?;
            let field = |message: String| AnnotationError::Field { row: row_no, message };
            if row.len() != ANNOTATION_HEADER.len() {
                return Err(field(format!("expected 5 fields, found {}", row.len())));
            }
            let num = |s: &str| s.parse::<usize>().map_err(|_| field(format!("bad number `{s}`")));
            let pattern = if row[4].eq_ignore_ascii_case("NONE") {
                None
            } else {
                Some(row[4].parse::<NonFixPattern>().map_err(|e| field(e.to_string()))?)
            };
            let key = Provenance {
                revision_id: row[0].to_string(),
                file_path: row[1].to_string(),
                hunk_index: num(&row[2])?,
                if_ordinal: num(&row[3])?,
            };
            entries.insert(key, pattern);
        }
        Ok(Annotations { entries })
    }

    pub fn insert(&mut self, at: Provenance, pattern: Option<NonFixPattern>) {
        self.entries.insert(at, pattern);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The annotated verdict if one exists, otherwise `detected`.
    pub fn resolve(&self, at: &Provenance, detected: Option<NonFixPattern>) -> Option<NonFixPattern> {
        self.entries.get(at).copied().unwrap_or(detected)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nf(bug: &str, fix: &str) -> Option<NonFixPattern> {
        detect_nonfix(&ConditionAst::parse(bug).unwrap(), &ConditionAst::parse(fix).unwrap())
    }

    fn nf_rc(bug: &str, fix: &str) -> Option<NonFixPattern> {
        detect_nonfix_with(
            &ConditionAst::parse(bug).unwrap(),
            &ConditionAst::parse(fix).unwrap(),
            NonFixOptions { detect_rc: true },
        )
    }

    #[test]
    fn static_patterns() {
        assert_eq!(nf("methodName.equals(\"finalize\")", "\"finalize\".equals(methodName)"), Some(NonFixPattern::Eoem));
        assert_eq!(nf("(-1 != row) && (!table.isRowSelected(row))", "row != -1 && !table.isRowSelected(row)"), Some(NonFixPattern::Eoie));
        assert_eq!(nf("a < b", "b > a"), Some(NonFixPattern::Eoie));
        assert_eq!(nf("a < b", "b < a"), None);
        assert_eq!(
            nf("before < 0 || Character.isWhitespace(line.charAt(before))", "(before < 0) || Character.isWhitespace(line.charAt(before))"),
            Some(NonFixPattern::Armp)
        );
        assert_eq!(nf("a.equals(b) && c", "b.equals(a) && d"), None);
        assert_eq!(nf("x.equals(y)", "x.equals(z)"), None);
    }

    #[test]
    fn annotation_only_patterns_fall_through() {
        assert_eq!(nf("(slist == null) || (slist.getChildCount() != 3)", "(slist == null) || (slist.getChildCount() != BODY_SIZE)"), None);
        assert_eq!(nf("cell.getHeight() > maxHeight", "cell.getHeight() > currentMaxHeight"), None);
        assert_eq!(nf("mAutoFillEmptyCells == true", "mAutoFillEmptyCells"), None);
    }

    #[test]
    fn optional_rc() {
        assert_eq!(nf_rc("mAutoFillEmptyCells == true", "mAutoFillEmptyCells"), Some(NonFixPattern::Rc));
        assert_eq!(nf_rc("done == false && x", "!done && x"), Some(NonFixPattern::Rc));
        assert_eq!(nf_rc("((String) o).isEmpty()", "o.isEmpty()"), None);
        assert_eq!(nf_rc("(String) o == null", "o == null"), Some(NonFixPattern::Rc));
        assert_eq!(nf_rc("x == true", "!x"), None);
    }

    #[test]
    fn labels() {
        assert_eq!("NF-EOEM".parse::<NonFixPattern>().unwrap(), NonFixPattern::Eoem);
        assert_eq!(NonFixPattern::ALL.iter().filter(|p| p.detected_statically()).count(), 3);
    }

    #[test]
    fn annotations_override() {
        let text = "revision_id,file,hunk_index,if_ordinal,pattern\nr1, A.java ,0,1,VNC\nr2,B.java,3,0,NONE\n";
        let ann = Annotations::parse(text).unwrap();
        assert_eq!(ann.len(), 2);
        let at = |r: &str, f: &str, h, i| Provenance {
            revision_id: r.into(),
            file_path: f.into(),
            hunk_index: h,
            if_ordinal: i,
        };
        assert_eq!(ann.resolve(&at("r1", "A.java", 0, 1), None), Some(NonFixPattern::Vnc));
        assert_eq!(ann.resolve(&at("r2", "B.java", 3, 0), Some(NonFixPattern::Armp)), None);
        assert_eq!(ann.resolve(&at("r3", "C.java", 0, 0), Some(NonFixPattern::Eoem)), Some(NonFixPattern::Eoem));
        assert!(Annotations::parse("revision_id,file,hunk_index,if_ordinal,pattern\nr,f,x,0,RC\n").is_err());
        assert!(Annotations::parse("revision_id,file,hunk_index,if_ordinal,pattern\nr,f,0,0,BOGUS\n").is_err());
    }

    fn arb_condition() -> impl Strategy<Value = String> {
        let atom = prop_oneof![
            "[a-d]".prop_map(|s| s),
            ("[a-d]", "[a-d]").prop_map(|(x, y)| format!("{x} < {y}")),
            ("[a-d]", "[a-d]").prop_map(|(x, y)| format!("{x}.equals({y})")),
        ];
        atom.prop_recursive(3, 8, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} && {b}")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} || {b})")),
                inner.prop_map(|a| format!("!({a})")),
            ]
        })
    }

    proptest! {
        #[test]
        fn detection_is_symmetric(a in arb_condition(), b in arb_condition()) {
            let (a, b) = (ConditionAst::parse(&a).unwrap(), ConditionAst::parse(&b).unwrap());
            prop_assert_eq!(detect_nonfix(&a, &b), detect_nonfix(&b, &a));
        }

        #[test]
        fn added_parens_are_armp(a in arb_condition()) {
            let bug = ConditionAst::parse(&a).unwrap();
            let fix = ConditionAst::parse(&format!("(({a}))")).unwrap();
            prop_assert_eq!(detect_nonfix(&bug, &fix), Some(NonFixPattern::Armp));
        }
    }
}
