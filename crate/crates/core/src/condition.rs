//! Boolean conditions of `if` statements as trees over atoms.
//!
//! Only the condition sublanguage is parsed: `||`, `&&`, unary `!` and
//! parentheses. Everything between logical operators is an atom, kept as its
//! canonical token text plus a light structural reading (method call,
//! relational comparison, identifier, literal, other).
//!
//! Parsed trees record *redundant* parentheses as [`Node::Group`]; necessary
//! parentheses are implied by the tree shape. [`ConditionAst::normalize`]
//! drops every group, flattens nested `||`/`&&` and collapses `!!e`.

use std::fmt;

use thiserror::Error;

use crate::lexer::{self, join_tokens, LexError, Token, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LogicalOp {
    And,
    Or,
}

impl LogicalOp {
    pub fn symbol(self) -> &'static str {
        match self {
            LogicalOp::And => "&&",
            LogicalOp::Or => "||",
        }
    }

    pub fn flipped(self) -> LogicalOp {
        match self {
            LogicalOp::And => LogicalOp::Or,
            LogicalOp::Or => LogicalOp::And,
        }
    }
}

/// Operator of an atom's nearest `&&`/`||` ancestor; `Root` when the whole
/// expression is (a possibly negated) single atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum JoinOp {
    And,
    Or,
    Root,
}

impl From<LogicalOp> for JoinOp {
    fn from(op: LogicalOp) -> Self {
        match op {
            LogicalOp::And => JoinOp::And,
            LogicalOp::Or => JoinOp::Or,
        }
    }
}

impl fmt::Display for JoinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JoinOp::And => "AND",
            JoinOp::Or => "OR",
            JoinOp::Root => "ROOT",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    InstanceOf,
}

impl RelOp {
    pub fn parse(text: &str) -> Option<RelOp> {
        Some(match text {
            "<" => RelOp::Lt,
            "<=" => RelOp::Le,
            ">" => RelOp::Gt,
            ">=" => RelOp::Ge,
            "==" => RelOp::Eq,
            "!=" => RelOp::Ne,
            "instanceof" => RelOp::InstanceOf,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelOp::Lt => "<",
            RelOp::Le => "<=",
            RelOp::Gt => ">",
            RelOp::Ge => ">=",
            RelOp::Eq => "==",
            RelOp::Ne => "!=",
            RelOp::InstanceOf => "instanceof",
        }
    }

    /// The operator that keeps the comparison's meaning when its operands
    /// are exchanged (`a < b` ⇔ `b > a`).
    pub fn mirrored(self) -> Option<RelOp> {
        Some(match self {
            RelOp::Lt => RelOp::Gt,
            RelOp::Le => RelOp::Ge,
            RelOp::Gt => RelOp::Lt,
            RelOp::Ge => RelOp::Le,
            RelOp::Eq => RelOp::Eq,
            RelOp::Ne => RelOp::Ne,
            RelOp::InstanceOf => return None,
        })
    }

    fn is_equality(self) -> bool {
        matches!(self, RelOp::Eq | RelOp::Ne)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MethodCall {
    /// Canonical texts of the dot-separated segments before the method name.
    pub receiver_chain: Vec<String>,
    pub method_name: String,
    pub argument_texts: Vec<String>,
}

impl MethodCall {
    /// Reads `recv . seg . name ( args )`; the call must span all tokens.
    pub fn from_tokens(tokens: &[Token]) -> Option<MethodCall> {
        let last = tokens.last()?;
        if !last.is(")") {
            return None;
        }
        let open = matching_open(tokens, tokens.len() - 1)?;
        if open == 0 {
            return None;
        }
        let name = &tokens[open - 1];
        if !name.is_identifier() {
            return None;
        }
        let receiver = if open == 1 {
            &tokens[..0]
        } else if tokens[open - 2].is(".") {
            &tokens[..open - 2]
        } else {
            return None;
        };
        let receiver_chain = if receiver.is_empty() {
            Vec::new()
        } else {
            let segments = split_top_level(receiver, ".");
            if segments.iter().any(|s| s.is_empty()) {
                return None;
            }
            segments.into_iter().map(join_tokens).collect()
        };
        let args = &tokens[open + 1..tokens.len() - 1];
        let argument_texts = if args.is_empty() {
            Vec::new()
        } else {
            let parts = split_top_level(args, ",");
            if parts.iter().any(|p| p.is_empty()) {
                return None;
            }
            parts.into_iter().map(join_tokens).collect()
        };
        Some(MethodCall {
            receiver_chain,
            method_name: name.text.clone(),
            argument_texts,
        })
    }

    pub fn receiver_text(&self) -> String {
        self.receiver_chain.join(" . ")
    }

    /// Canonical text rebuilt from the structured fields.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for seg in &self.receiver_chain {
            out.push_str(seg);
            out.push_str(" . ");
        }
        out.push_str(&self.method_name);
        if self.argument_texts.is_empty() {
            out.push_str(" ( )");
        } else {
            out.push_str(" ( ");
            out.push_str(&self.argument_texts.join(" , "));
            out.push_str(" )");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Operand {
    pub text: String,
    /// Present when the whole operand is a method call.
    pub call: Option<MethodCall>,
}

impl Operand {
    fn from_tokens(tokens: &[Token]) -> Operand {
        Operand {
            text: join_tokens(tokens),
            call: MethodCall::from_tokens(tokens),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Relational {
    pub lhs: Operand,
    pub op: RelOp,
    pub rhs: Operand,
}

impl Relational {
    pub fn render(&self) -> String {
        format!("{} {} {}", self.lhs.text, self.op.as_str(), self.rhs.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AtomKind {
    MethodCall(MethodCall),
    Relational(Relational),
    Identifier,
    Literal,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AtomPayload {
    pub canonical_text: String,
    pub kind: AtomKind,
    /// Postfix-level expression that `!` can prefix without parentheses.
    primary: bool,
    /// Contains a top-level `?:`, assignment or lambda arrow.
    low_precedence: bool,
}

impl AtomPayload {
    pub fn from_tokens(tokens: &[Token]) -> AtomPayload {
        let canonical_text = join_tokens(tokens);
        let low_precedence = top_level(tokens).any(is_low_precedence_op);
        let kind = if low_precedence {
            AtomKind::Other
        } else {
            classify_atom_tokens(tokens)
        };
        let primary = matches!(
            kind,
            AtomKind::MethodCall(_) | AtomKind::Identifier | AtomKind::Literal
        ) || is_single_group(tokens);
        AtomPayload {
            canonical_text,
            kind,
            primary,
            low_precedence,
        }
    }

    /// Builds an atom from source text, e.g. `x > 0` or `list.isEmpty()`.
    pub fn parse(text: &str) -> Result<AtomPayload, ParseError> {
        let tokens = lexer::tokenize(text)?.tokens;
        if tokens.is_empty() {
            return Err(ParseError::Empty);
        }
        check_balance(&tokens)?;
        Ok(AtomPayload::from_tokens(&tokens))
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            AtomKind::MethodCall(_) => "method-call",
            AtomKind::Relational(_) => "relational",
            AtomKind::Identifier => "identifier",
            AtomKind::Literal => "literal",
            AtomKind::Other => "other",
        }
    }

    pub fn operator(&self) -> Option<RelOp> {
        match &self.kind {
            AtomKind::Relational(r) => Some(r.op),
            _ => None,
        }
    }

    pub fn is_primary(&self) -> bool {
        self.primary
    }
}

impl fmt::Display for AtomPayload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_text)
    }
}

fn is_low_precedence_op(t: &Token) -> bool {
    t.kind == TokenKind::Operator
        && matches!(
            t.text.as_str(),
            "?" | "=" | "+=" | "-=" | "*=" | "/=" | "%=" | "&=" | "|=" | "^=" | "<<=" | ">>=" | ">>>=" | "->"
        )
}

fn classify_atom_tokens(tokens: &[Token]) -> AtomKind {
    if let Some(rel) = relational_split(tokens) {
        return AtomKind::Relational(rel);
    }
    if let Some(call) = MethodCall::from_tokens(tokens) {
        return AtomKind::MethodCall(call);
    }
    if tokens.len() == 1 && tokens[0].kind == TokenKind::Literal {
        return AtomKind::Literal;
    }
    let dotted_name = tokens.iter().enumerate().all(|(i, t)| {
        if i % 2 == 0 {
            t.is_identifier() || t.is("this") || t.is("super")
        } else {
            t.is(".")
        }
    });
    if dotted_name && tokens.len() % 2 == 1 {
        return AtomKind::Identifier;
    }
    AtomKind::Other
}

fn relational_split(tokens: &[Token]) -> Option<Relational> {
    let mut equality = None;
    let mut ordering = Vec::new();
    for (i, t) in top_level_indexed(tokens) {
        if t.kind == TokenKind::Operator && matches!(t.text.as_str(), "&" | "|" | "^") {
            return None;
        }
        match RelOp::parse(&t.text) {
            Some(op) if op.is_equality() => equality = Some(i),
            Some(_) => ordering.push(i),
            None => {}
        }
    }
    // Equality binds looser than ordering; the last one is the root of a
    // left-associative chain.
    let split = match (equality, ordering.as_slice()) {
        (Some(i), _) => i,
        (None, [i]) => *i,
        _ => return None,
    };
    if split == 0 || split + 1 == tokens.len() {
        return None;
    }
    Some(Relational {
        lhs: Operand::from_tokens(&tokens[..split]),
        op: RelOp::parse(&tokens[split].text)?,
        rhs: Operand::from_tokens(&tokens[split + 1..]),
    })
}

fn opens(t: &Token) -> bool {
    t.kind == TokenKind::Punctuation && matches!(t.text.as_str(), "(" | "[" | "{")
}

fn closes(t: &Token) -> bool {
    t.kind == TokenKind::Punctuation && matches!(t.text.as_str(), ")" | "]" | "}")
}

fn top_level_indexed(tokens: &[Token]) -> impl Iterator<Item = (usize, &Token)> {
    let mut depth = 0i32;
    tokens.iter().enumerate().filter(move |(_, t)| {
        if opens(t) {
            depth += 1;
            false
        } else if closes(t) {
            depth -= 1;
            false
        } else {
            depth == 0
        }
    })
}

fn top_level(tokens: &[Token]) -> impl Iterator<Item = &Token> {
    top_level_indexed(tokens).map(|(_, t)| t)
}

fn split_top_level<'t>(tokens: &'t [Token], sep: &str) -> Vec<&'t [Token]> {
    let mut parts = Vec::new();
    let mut start = 0;
    for (i, t) in top_level_indexed(tokens) {
        if t.is(sep) {
            parts.push(&tokens[start..i]);
            start = i + 1;
        }
    }
    parts.push(&tokens[start..]);
    parts
}

fn matching_open(tokens: &[Token], close: usize) -> Option<usize> {
    let mut depth = 0i32;
    for i in (0..=close).rev() {
        let t = &tokens[i];
        if closes(t) {
            depth += 1;
        } else if opens(t) {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

fn matching_close(tokens: &[Token], open: usize) -> Option<usize> {
    let mut depth = 0i32;
    for (i, t) in tokens.iter().enumerate().skip(open) {
        if opens(t) {
            depth += 1;
        } else if closes(t) {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

/// `( … )` where the first paren closes at the last token.
fn is_single_group(tokens: &[Token]) -> bool {
    tokens.len() >= 2
        && tokens[0].is("(")
        && matching_close(tokens, 0) == Some(tokens.len() - 1)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Or(Vec<Node>),
    And(Vec<Node>),
    Not(Box<Node>),
    /// Parentheses that do not change evaluation order.
    Group(Box<Node>),
    Atom(AtomPayload),
}

impl Node {
    pub fn atom(payload: AtomPayload) -> Node {
        Node::Atom(payload)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(node: Node) -> Node {
        Node::Not(Box::new(node))
    }

    pub fn logical(op: LogicalOp, children: Vec<Node>) -> Node {
        match op {
            LogicalOp::And => Node::And(children),
            LogicalOp::Or => Node::Or(children),
        }
    }

    /// `Some((op, children))` for `&&`/`||` nodes.
    pub fn as_logical(&self) -> Option<(LogicalOp, &[Node])> {
        match self {
            Node::And(c) => Some((LogicalOp::And, c)),
            Node::Or(c) => Some((LogicalOp::Or, c)),
            _ => None,
        }
    }

    /// Strips `Not` and `Group` wrappers; true when they hold an atom.
    pub fn is_leaf(&self) -> bool {
        match self {
            Node::Atom(_) => true,
            Node::Not(c) | Node::Group(c) => c.is_leaf(),
            _ => false,
        }
    }

    pub fn atom_count(&self) -> usize {
        match self {
            Node::Atom(_) => 1,
            Node::Not(c) | Node::Group(c) => c.atom_count(),
            Node::And(cs) | Node::Or(cs) => cs.iter().map(Node::atom_count).sum(),
        }
    }

    /// Adds or removes one `!` at the top of the node, looking through groups.
    pub fn toggled(self) -> Node {
        match self {
            Node::Not(c) => *c,
            Node::Group(c) => c.toggled(),
            other => Node::not(other),
        }
    }

    /// Replaces the atom of a leaf, keeping its wrappers.
    pub fn with_payload(self, payload: AtomPayload) -> Node {
        match self {
            Node::Atom(_) => Node::Atom(payload),
            Node::Not(c) => Node::not(c.with_payload(payload)),
            Node::Group(c) => Node::Group(Box::new(c.with_payload(payload))),
            other => other,
        }
    }

    fn write(&self, ctx: Context, out: &mut String, ops: &mut OpCursor) {
        match self {
            Node::Atom(a) => {
                let wrap = (ctx == Context::Not && !a.primary)
                    || (ctx != Context::Root && a.low_precedence);
                if wrap {
                    out.push_str("( ");
                    out.push_str(&a.canonical_text);
                    out.push_str(" )");
                } else {
                    out.push_str(&a.canonical_text);
                }
            }
            Node::Not(c) => {
                out.push_str("! ");
                c.write(Context::Not, out, ops);
            }
            Node::Group(c) => {
                out.push_str("( ");
                c.write(Context::Root, out, ops);
                out.push_str(" )");
            }
            Node::And(cs) | Node::Or(cs) => {
                let (op, inner) = match self {
                    Node::And(_) => (LogicalOp::And, Context::And),
                    _ => (LogicalOp::Or, Context::Or),
                };
                let wrap = ctx == Context::Not || (op == LogicalOp::Or && ctx == Context::And);
                if wrap {
                    out.push_str("( ");
                }
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        let shown = if ops.flip == Some(ops.next) { op.flipped() } else { op };
                        ops.next += 1;
                        out.push(' ');
                        out.push_str(shown.symbol());
                        out.push(' ');
                    }
                    c.write(inner, out, ops);
                }
                if wrap {
                    out.push_str(" )");
                }
            }
        }
    }

    fn normalized(&self) -> (Node, bool) {
        match self {
            Node::Atom(_) => (self.clone(), false),
            Node::Group(c) => (c.normalized().0, true),
            Node::Not(c) => {
                let (inner, stripped) = c.normalized();
                match inner {
                    Node::Not(x) => (*x, stripped),
                    other => (Node::not(other), stripped),
                }
            }
            Node::And(cs) | Node::Or(cs) => {
                let op = if matches!(self, Node::And(_)) {
                    LogicalOp::And
                } else {
                    LogicalOp::Or
                };
                let mut stripped = false;
                let mut flat = Vec::with_capacity(cs.len());
                for c in cs {
                    let (n, s) = c.normalized();
                    stripped |= s;
                    match n.as_logical() {
                        Some((child_op, grand)) if child_op == op => flat.extend_from_slice(grand),
                        _ => flat.push(n),
                    }
                }
                let node = if flat.len() == 1 {
                    flat.pop().expect("one child")
                } else {
                    Node::logical(op, flat)
                };
                (node, stripped)
            }
        }
    }

    fn collect_atoms<'a>(&'a self, join: JoinOp, negated: bool, out: &mut Vec<AtomSite<'a>>) {
        match self {
            Node::Atom(payload) => out.push(AtomSite {
                payload,
                negated,
                join,
            }),
            Node::Group(c) => c.collect_atoms(join, negated, out),
            Node::Not(c) => {
                if c.is_leaf() {
                    c.collect_atoms(join, !negated, out);
                } else {
                    c.collect_atoms(join, false, out);
                }
            }
            Node::And(cs) | Node::Or(cs) => {
                let op = if matches!(self, Node::And(_)) {
                    JoinOp::And
                } else {
                    JoinOp::Or
                };
                for c in cs {
                    c.collect_atoms(op, false, out);
                }
            }
        }
    }
}

#[derive(Debug, Default)]
struct OpCursor {
    next: usize,
    flip: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Context {
    Root,
    Or,
    And,
    Not,
}

/// One leaf of a condition in left-to-right order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AtomSite<'a> {
    pub payload: &'a AtomPayload,
    /// Odd number of `!` directly wrapping the atom.
    pub negated: bool,
    pub join: JoinOp,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConditionAst {
    pub root: Node,
}

impl ConditionAst {
    pub fn new(root: Node) -> Self {
        Self { root }
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parse_condition(text)
    }

    /// Returns the normalized tree and whether any redundant grouping was removed.
    pub fn normalize(&self) -> (ConditionAst, bool) {
        let (root, stripped) = self.root.normalized();
        (ConditionAst { root }, stripped)
    }

    pub fn normalized(&self) -> ConditionAst {
        self.normalize().0
    }

    /// Space-separated token text of the tree as it stands; redundant
    /// groups print as parentheses.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.root.write(Context::Root, &mut out, &mut OpCursor::default());
        out
    }

    /// Text of the tree with its `k`-th operator (in textual order) flipped
    /// between `&&` and `||`; parentheses are kept as printed.
    pub fn to_text_with_flipped_operator(&self, k: usize) -> String {
        let mut out = String::new();
        let mut ops = OpCursor { next: 0, flip: Some(k) };
        self.root.write(Context::Root, &mut out, &mut ops);
        out
    }

    /// Text of the normalized tree.
    pub fn canonical(&self) -> String {
        self.normalized().to_text()
    }

    pub fn atoms(&self) -> Vec<AtomSite<'_>> {
        let mut out = Vec::new();
        self.root.collect_atoms(JoinOp::Root, false, &mut out);
        out
    }

    pub fn atom_count(&self) -> usize {
        self.root.atom_count()
    }

    /// `&&`/`||` operators in left-to-right textual order.
    pub fn operator_sequence(&self) -> Vec<LogicalOp> {
        fn walk(node: &Node, out: &mut Vec<LogicalOp>) {
            match node {
                Node::Atom(_) => {}
                Node::Not(c) | Node::Group(c) => walk(c, out),
                Node::And(cs) | Node::Or(cs) => {
                    let op = if matches!(node, Node::And(_)) {
                        LogicalOp::And
                    } else {
                        LogicalOp::Or
                    };
                    for (i, c) in cs.iter().enumerate() {
                        if i > 0 {
                            out.push(op);
                        }
                        walk(c, out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    /// Rewrites the leaf holding atom `index`, i.e. the atom together with
    /// the `!`/group wrappers directly around it. Returning `None` from `f`
    /// removes the leaf; an operator left with one operand collapses into it.
    /// The result is `None` when nothing remains. The tree is not normalized.
    pub fn map_leaf(&self, index: usize, f: impl FnOnce(Node) -> Option<Node>) -> Option<ConditionAst> {
        fn walk<F: FnOnce(Node) -> Option<Node>>(node: &Node, target: usize, next: &mut usize, f: &mut Option<F>) -> Option<Node> {
            if node.is_leaf() {
                let idx = *next;
                *next += 1;
                return match (idx == target, f.take()) {
                    (true, Some(f)) => f(node.clone()),
                    (_, f_back) => {
                        *f = f_back;
                        Some(node.clone())
                    }
                };
            }
            match node {
                Node::Not(c) => walk(c, target, next, f).map(Node::not),
                Node::Group(c) => walk(c, target, next, f).map(|n| Node::Group(Box::new(n))),
                Node::And(cs) | Node::Or(cs) => {
                    let mut kept: Vec<Node> = cs.iter().filter_map(|c| walk(c, target, next, f)).collect();
                    match kept.len() {
                        0 => None,
                        1 => kept.pop(),
                        _ => Some(Node::logical(node.as_logical().expect("logical node").0, kept)),
                    }
                }
                Node::Atom(_) => unreachable!("atoms are leaves"),
            }
        }
        walk(&self.root, index, &mut 0, &mut Some(f)).map(ConditionAst::new)
    }

    /// Atom-index spans `[first, last]` covered by each `!` applied to a
    /// compound subexpression.
    pub fn compound_negations(&self) -> Vec<(usize, usize)> {
        fn walk(node: &Node, next: &mut usize, out: &mut Vec<(usize, usize)>) {
            match node {
                Node::Atom(_) => *next += 1,
                Node::Group(c) => walk(c, next, out),
                Node::Not(c) => {
                    let start = *next;
                    walk(c, next, out);
                    if !c.is_leaf() {
                        out.push((start, *next - 1));
                    }
                }
                Node::And(cs) | Node::Or(cs) => cs.iter().for_each(|c| walk(c, next, out)),
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut 0, &mut out);
        out.sort_unstable();
        out
    }
}

impl fmt::Display for ConditionAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl std::str::FromStr for ConditionAst {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_condition(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("empty condition")]
    Empty,
    #[error("unbalanced `{token}` at line {line}, column {column}")]
    Unbalanced {
        token: String,
        line: usize,
        column: usize,
    },
    #[error("dangling operator `{token}` at line {line}, column {column}")]
    DanglingOperator {
        token: String,
        line: usize,
        column: usize,
    },
}

pub fn parse_condition(text: &str) -> Result<ConditionAst, ParseError> {
    let tokens = lexer::tokenize(text)?.tokens;
    parse_tokens(&tokens)
}

pub fn parse_tokens(tokens: &[Token]) -> Result<ConditionAst, ParseError> {
    if tokens.is_empty() {
        return Err(ParseError::Empty);
    }
    check_balance(tokens)?;
    let root = Parser { tokens, pos: 0 }.expression()?;
    Ok(ConditionAst { root })
}

fn check_balance(tokens: &[Token]) -> Result<(), ParseError> {
    let mut stack: Vec<&Token> = Vec::new();
    for t in tokens {
        if opens(t) {
            stack.push(t);
        } else if closes(t) {
            let expected = match t.text.as_str() {
                ")" => "(",
                "]" => "[",
                _ => "{",
            };
            match stack.pop() {
                Some(open) if open.text == expected => {}
                _ => {
                    return Err(ParseError::Unbalanced {
                        token: t.text.clone(),
                        line: t.line,
                        column: t.column,
                    })
                }
            }
        }
    }
    match stack.pop() {
        Some(open) => Err(ParseError::Unbalanced {
            token: open.text.clone(),
            line: open.line,
            column: open.column,
        }),
        None => Ok(()),
    }
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn is_logical(t: &Token) -> bool {
        t.kind == TokenKind::Operator && (t.is("||") || t.is("&&"))
    }

    fn expression(mut self) -> Result<Node, ParseError> {
        if top_level(self.tokens).any(is_low_precedence_op) {
            return Ok(Node::Atom(AtomPayload::from_tokens(self.tokens)));
        }
        let node = self.or()?;
        Ok(settle(node, Context::Root))
    }

    // Operands come back from `primary` with paren groups unsettled; each is
    // settled exactly once, by whoever learns its real parent.
    fn or(&mut self) -> Result<Node, ParseError> {
        let mut children = vec![self.and()?];
        while self.peek().is_some_and(|t| t.is("||")) {
            self.pos += 1;
            children.push(self.and()?);
        }
        if children.len() == 1 {
            return Ok(children.pop().expect("one child"));
        }
        Ok(Node::Or(children.into_iter().map(|c| settle(c, Context::Or)).collect()))
    }

    fn and(&mut self) -> Result<Node, ParseError> {
        let mut children = vec![self.unary()?];
        while self.peek().is_some_and(|t| t.is("&&")) {
            self.pos += 1;
            children.push(self.unary()?);
        }
        if children.len() == 1 {
            return Ok(children.pop().expect("one child"));
        }
        Ok(Node::And(children.into_iter().map(|c| settle(c, Context::And)).collect()))
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            Some(t) if t.is("!") => {
                self.pos += 1;
                if self.peek().is_none() {
                    return Err(dangling(t));
                }
                let inner = settle(self.unary()?, Context::Not);
                Ok(match inner {
                    Node::Not(x) => *x,
                    other => Node::not(other),
                })
            }
            _ => self.primary(),
        }
    }

    /// Collects one operand. A span that is exactly one parenthesized group
    /// comes back as an unsettled `Group`.
    fn primary(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let mut depth = 0i32;
        while let Some(t) = self.peek() {
            if depth == 0 && Self::is_logical(t) {
                break;
            }
            if opens(t) {
                depth += 1;
            } else if closes(t) {
                depth -= 1;
            }
            self.pos += 1;
        }
        let span = &self.tokens[start..self.pos];
        if span.is_empty() {
            let at = self
                .tokens
                .get(start)
                .or_else(|| start.checked_sub(1).and_then(|i| self.tokens.get(i)))
                .expect("non-empty token list");
            return Err(dangling(at));
        }
        if !is_single_group(span) {
            return Ok(Node::Atom(AtomPayload::from_tokens(span)));
        }
        let inner_tokens = &span[1..span.len() - 1];
        if inner_tokens.is_empty() {
            return Err(ParseError::Unbalanced {
                token: "(".to_string(),
                line: span[0].line,
                column: span[0].column,
            });
        }
        let inner = Parser {
            tokens: inner_tokens,
            pos: 0,
        }
        .expression()?;
        if let Node::Atom(a) = &inner {
            if a.low_precedence {
                return Ok(Node::Atom(AtomPayload::from_tokens(span)));
            }
        }
        Ok(Node::Group(Box::new(inner)))
    }
}

fn settle(node: Node, ctx: Context) -> Node {
    match node {
        Node::Group(inner) => wrap_group(*inner, ctx),
        other => other,
    }
}

fn dangling(t: &Token) -> ParseError {
    ParseError::DanglingOperator {
        token: t.text.clone(),
        line: t.line,
        column: t.column,
    }
}

/// Wraps `inner` in a `Group` when parentheses around it are redundant in
/// `ctx`; otherwise the tree shape already carries them.
fn wrap_group(inner: Node, ctx: Context) -> Node {
    let necessary = match &inner {
        Node::Or(_) => matches!(ctx, Context::And | Context::Not),
        Node::And(_) => ctx == Context::Not,
        Node::Atom(a) => ctx == Context::Not && !a.primary,
        Node::Not(_) | Node::Group(_) => false,
    };
    if necessary {
        inner
    } else {
        Node::Group(Box::new(inner))
    }
}
