//! Comment-free tokenization of Java-like source fragments.
//!
//! Hunks are fragments rather than compilation units, so the lexer never
//! looks at context beyond a single token. It drops comments and whitespace,
//! keeps string and char literals verbatim (quotes included), and records
//! the 1-based source line of every token.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TokenKind {
    Identifier,
    Keyword,
    Literal,
    Operator,
    Punctuation,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: usize,
    /// 1-based character column of the token's first character.
    pub column: usize,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        self.text == text
    }

    pub fn is_identifier(&self) -> bool {
        self.kind == TokenKind::Identifier
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("unterminated string literal starting on line {line}")]
    UnterminatedString { line: usize },
    #[error("unterminated char literal starting on line {line}")]
    UnterminatedChar { line: usize },
    #[error("unterminated block comment starting on line {line}")]
    UnterminatedComment { line: usize },
}

impl LexError {
    pub fn line(&self) -> usize {
        match *self {
            LexError::UnterminatedString { line }
            | LexError::UnterminatedChar { line }
            | LexError::UnterminatedComment { line } => line,
        }
    }
}

/// Ordered, comment-free token sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenStream {
    pub tokens: Vec<Token>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Token> {
        self.tokens.iter()
    }

    /// Compares the (kind, text) sequences, ignoring line numbers.
    pub fn same_code(&self, other: &TokenStream) -> bool {
        self.tokens.len() == other.tokens.len()
            && self
                .tokens
                .iter()
                .zip(&other.tokens)
                .all(|(a, b)| a.kind == b.kind && a.text == b.text)
    }
}

impl IntoIterator for TokenStream {
    type Item = Token;
    type IntoIter = std::vec::IntoIter<Token>;

    fn into_iter(self) -> Self::IntoIter {
        self.tokens.into_iter()
    }
}

const KEYWORDS: &[&str] = &[
    "abstract",
    "assert",
    "boolean",
    "break",
    "byte",
    "case",
    "catch",
    "char",
    "class",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extends",
    "final",
    "finally",
    "float",
    "for",
    "goto",
    "if",
    "implements",
    "import",
    "instanceof",
    "int",
    "interface",
    "long",
    "native",
    "new",
    "package",
    "private",
    "protected",
    "public",
    "return",
    "short",
    "static",
    "strictfp",
    "super",
    "switch",
    "synchronized",
    "this",
    "throw",
    "throws",
    "transient",
    "try",
    "void",
    "volatile",
    "while",
];

const WORD_LITERALS: &[&str] = &["true", "false", "null"];

// Longest first, so greedy matching picks `>>>=` over `>>`.
const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", ">=",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>", "=", ">", "<", "!", "~", "?", ":",
    "+", "-", "*", "/", "&", "|", "^", "%",
];

const PUNCTUATION: &[char] = &['(', ')', '{', '}', '[', ']', ';', ',', '.', '@'];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

pub fn tokenize(source: &str) -> Result<TokenStream, LexError> {
    Lexer::new(source).run()
}

struct Lexer<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
    line: usize,
    line_start: usize,
    out: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            chars: src.char_indices().collect(),
            pos: 0,
            line: 1,
            line_start: 0,
            out: Vec::new(),
        }
    }

    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).map(|&(_, c)| c)
    }

    fn byte_at(&self, pos: usize) -> usize {
        self.chars.get(pos).map_or(self.src.len(), |&(b, _)| b)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek(0)?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.line_start = self.pos;
        }
        Some(c)
    }

    fn push(&mut self, kind: TokenKind, start: usize, line: usize, column: usize) {
        let text = &self.src[self.byte_at(start)..self.byte_at(self.pos)];
        self.out.push(Token {
            kind,
            text: text.to_string(),
            line,
            column,
        });
    }

    fn run(mut self) -> Result<TokenStream, LexError> {
        while let Some(c) = self.peek(0) {
            let start = self.pos;
            let line = self.line;
            let column = start - self.line_start + 1;
            match c {
                c if c.is_whitespace() => {
                    self.bump();
                }
                '/' if self.peek(1) == Some('/') => {
                    while let Some(c) = self.peek(0) {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                '/' if self.peek(1) == Some('*') => {
                    self.bump();
                    self.bump();
                    loop {
                        match self.bump() {
                            None => return Err(LexError::UnterminatedComment { line }),
                            Some('*') if self.peek(0) == Some('/') => {
                                self.bump();
                                break;
                            }
                            Some(_) => {}
                        }
                    }
                }
                '"' => {
                    self.quoted('"', line)?;
                    self.push(TokenKind::Literal, start, line, column);
                }
                '\'' => {
                    self.quoted('\'', line)?;
                    self.push(TokenKind::Literal, start, line, column);
                }
                c if c.is_ascii_digit() || (c == '.' && self.peek(1).is_some_and(|d| d.is_ascii_digit())) => {
                    self.number();
                    self.push(TokenKind::Literal, start, line, column);
                }
                c if c.is_alphabetic() || c == '_' || c == '$' => {
                    while self
                        .peek(0)
                        .is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '$')
                    {
                        self.bump();
                    }
                    let word = &self.src[self.byte_at(start)..self.byte_at(self.pos)];
                    let kind = if WORD_LITERALS.contains(&word) {
                        TokenKind::Literal
                    } else if is_keyword(word) {
                        TokenKind::Keyword
                    } else {
                        TokenKind::Identifier
                    };
                    self.push(kind, start, line, column);
                }
                c if PUNCTUATION.contains(&c) => {
                    if c == '.' && self.peek(1) == Some('.') && self.peek(2) == Some('.') {
                        self.pos += 3;
                        self.push(TokenKind::Operator, start, line, column);
                    } else {
                        self.bump();
                        self.push(TokenKind::Punctuation, start, line, column);
                    }
                }
                _ => {
                    let rest = &self.src[self.byte_at(self.pos)..];
                    match OPERATORS.iter().find(|op| rest.starts_with(**op)) {
                        Some(op) => {
                            self.pos += op.chars().count();
                            self.push(TokenKind::Operator, start, line, column);
                        }
                        None => {
                            // Stray characters (`#`, backticks, non-ASCII symbols) become
                            // single-character operator tokens so comparison still sees them.
                            self.bump();
                            self.push(TokenKind::Operator, start, line, column);
                        }
                    }
                }
            }
        }
        Ok(TokenStream { tokens: self.out })
    }

    fn quoted(&mut self, quote: char, line: usize) -> Result<(), LexError> {
        let err = || {
            if quote == '"' {
                LexError::UnterminatedString { line }
            } else {
                LexError::UnterminatedChar { line }
            }
        };
        if quote == '"' && self.peek(1) == Some('"') && self.peek(2) == Some('"') {
            // Text block: runs to the next unescaped `"""`, newlines allowed.
            self.pos += 3;
            loop {
                match self.bump() {
                    None => return Err(err()),
                    Some('\\') => {
                        self.bump();
                    }
                    Some('"') if self.peek(0) == Some('"') && self.peek(1) == Some('"') => {
                        self.pos += 2;
                        return Ok(());
                    }
                    Some(_) => {}
                }
            }
        }
        self.bump();
        loop {
            match self.bump() {
                None | Some('\n') => return Err(err()),
                Some('\\') => {
                    if self.bump().is_none() {
                        return Err(err());
                    }
                }
                Some(c) if c == quote => return Ok(()),
                Some(_) => {}
            }
        }
    }

    fn number(&mut self) {
        let hex = self.peek(0) == Some('0') && matches!(self.peek(1), Some('x' | 'X'));
        let mut prev = '\0';
        while let Some(c) = self.peek(0) {
            let accept = match c {
                c if c.is_ascii_alphanumeric() || c == '_' => true,
                '.' => !hex
                    && self
                        .peek(1)
                        .is_none_or(|d| d.is_ascii_digit() || !(d.is_alphabetic() || d == '_' || d == '$' || d == '.')),
                '+' | '-' => !hex && matches!(prev, 'e' | 'E'),
                _ => false,
            };
            if !accept {
                break;
            }
            prev = c;
            self.bump();
        }
    }
}

/// Joins token texts with single spaces; the canonical form used throughout
/// persisted records.
pub fn join_tokens<'t>(tokens: impl IntoIterator<Item = &'t Token>) -> String {
    let mut out = String::new();
    for (i, t) in tokens.into_iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.text);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(src: &str) -> Vec<String> {
        tokenize(src).unwrap().into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn strips_block_comment() {
        assert_eq!(texts("x > 0 /* check */"), ["x", ">", "0"]);
    }

    #[test]
    fn keeps_comment_markers_inside_literals() {
        assert_eq!(texts(r#"s.equals("a//b")"#), ["s", ".", "equals", "(", r#""a//b""#, ")"]);
        let ts = tokenize(r#"s.equals("a//b")"#).unwrap();
        assert_eq!(ts.tokens[4].kind, TokenKind::Literal);
    }

    #[test]
    fn empty_input_is_empty_stream() {
        assert!(tokenize("").unwrap().is_empty());
        assert!(tokenize("  \n\t // only a comment\n").unwrap().is_empty());
    }

    #[test]
    fn line_comment_ends_at_newline() {
        assert_eq!(texts("a // b c\nd"), ["a", "d"]);
        let ts = tokenize("a // b c\nd").unwrap();
        assert_eq!(ts.tokens[1].line, 2);
    }

    #[test]
    fn multi_char_operators_are_greedy() {
        assert_eq!(texts("a>>>=b<=c!=d&&e||!f"), ["a", ">>>=", "b", "<=", "c", "!=", "d", "&&", "e", "||", "!", "f"]);
    }

    #[test]
    fn kinds() {
        let ts = tokenize("if (x instanceof Foo && y == null) return 1.5e-3f;").unwrap();
        let kinds: Vec<_> = ts.iter().map(|t| t.kind).collect();
        use TokenKind::*;
        assert_eq!(
            kinds,
            [Keyword, Punctuation, Identifier, Keyword, Identifier, Operator, Identifier, Operator, Literal, Punctuation, Keyword, Literal, Punctuation]
        );
        assert_eq!(ts.tokens[11].text, "1.5e-3f");
    }

    #[test]
    fn char_literals_and_escapes() {
        assert_eq!(texts(r#"c == '\'' || s == "\"q\"""#), ["c", "==", r"'\''", "||", "s", "==", r#""\"q\"""#]);
    }

    #[test]
    fn unterminated_string_reports_line() {
        let err = tokenize("a\nb = \"oops\nc").unwrap_err();
        assert_eq!(err, LexError::UnterminatedString { line: 2 });
    }

    #[test]
    fn unterminated_comment_reports_line() {
        let err = tokenize("x\n\n/* never closed").unwrap_err();
        assert_eq!(err.line(), 3);
    }

    #[test]
    fn member_access_on_numbers_and_varargs() {
        assert_eq!(texts("f(String... args)"), ["f", "(", "String", "...", "args", ")"]);
        assert_eq!(texts("0x1F + 10L + 1_000"), ["0x1F", "+", "10L", "+", "1_000"]);
    }

    #[test]
    fn whitespace_only_difference_compares_equal() {
        let a = tokenize("if(x>0)").unwrap();
        let b = tokenize("if( x > 0 )").unwrap();
        assert!(a.same_code(&b));
        assert_eq!(join_tokens(&a.tokens), "if ( x > 0 )");
    }
}
