//! The built-in C-like lexer and the pre-tokenized reader.

use std::fmt;
use std::str::FromStr;

use super::{escape_reserved, Token, TokenKind, END_OF_TOKEN, ESCAPED_END_OF_TOKEN};
use crate::error::{Error, Result};
use crate::text::unescape_field;

/// Selects how raw file contents become tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lexer {
    /// Identifiers, numeric/string/char literals, C-family operators; comments dropped.
    CLike,
    /// Space-separated, escaped token text as written by [`super::write_pretokenized`].
    Pretokenized,
}

impl Lexer {
    pub fn lex(self, source: &str) -> Result<Vec<Token>> {
        match self {
            Lexer::CLike => lex_c_like(source),
            Lexer::Pretokenized => lex_pretokenized(source),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Lexer::CLike => "c-like",
            Lexer::Pretokenized => "pretokenized",
        }
    }
}

impl fmt::Display for Lexer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Lexer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c-like" => Ok(Lexer::CLike),
            "pretokenized" => Ok(Lexer::Pretokenized),
            other => Err(Error::Config(format!(
                "unknown lexer {other:?} (expected c-like or pretokenized)"
            ))),
        }
    }
}

pub const KEYWORDS: &[&str] = &[
    "abstract", "auto", "bool", "boolean", "break", "byte", "case", "catch", "char", "class",
    "const", "continue", "default", "do", "double", "else", "enum", "extends", "extern",
    "false", "final", "finally", "float", "for", "goto", "if", "implements", "import",
    "inline", "instanceof", "int", "interface", "long", "native", "new", "null", "package",
    "private", "protected", "public", "register", "restrict", "return", "short", "signed",
    "sizeof", "static", "struct", "super", "switch", "synchronized", "this", "throw",
    "throws", "true", "try", "typedef", "union", "unsigned", "void", "volatile", "while",
];

// Longest first within each leading character is not required: matching tries
// lengths 4, 3, 2 in order.
const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=",
    "&&", "||", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "::",
];

const SINGLE_OPERATORS: &str = "+-*/%=<>!&|^~?:.@#";
const PUNCTUATION: &str = ";,()[]{}";

pub(crate) fn is_keyword(text: &str) -> bool {
    KEYWORDS.binary_search(&text).is_ok()
}

/// Best-effort class for tokens that arrive without one (pre-tokenized input).
pub(crate) fn classify(text: &str) -> TokenKind {
    let first = match text.chars().next() {
        Some(c) => c,
        None => return TokenKind::Other,
    };
    if is_keyword(text) {
        TokenKind::Keyword
    } else if first.is_ascii_alphabetic() || first == '_' || first == '$' {
        TokenKind::Identifier
    } else if first.is_ascii_digit() || first == '"' || first == '\'' {
        TokenKind::Literal
    } else if text.len() == 1 && PUNCTUATION.contains(first) {
        TokenKind::Punctuation
    } else if OPERATORS.contains(&text) || (text.len() == 1 && SINGLE_OPERATORS.contains(first)) {
        TokenKind::Operator
    } else {
        TokenKind::Other
    }
}

fn lex_pretokenized(source: &str) -> Result<Vec<Token>> {
    let line = source.strip_suffix('\n').unwrap_or(source);
    let line = line.strip_suffix('\r').unwrap_or(line);
    if line.is_empty() {
        return Ok(Vec::new());
    }
    if line.contains('\n') {
        return Err(Error::format(
            "pre-tokenized file",
            "expected one logical line per source file",
        ));
    }
    line.split(' ')
        .map(|field| {
            let text = unescape_field(field)?;
            if text.is_empty() {
                return Err(Error::format("pre-tokenized file", "empty token (double space?)"));
            }
            // Pre-tokenized files are what `sanitize` produces, so the
            // non-ASCII placeholder is kept as is; only the marker is escaped.
            let text = text.replace(END_OF_TOKEN, ESCAPED_END_OF_TOKEN);
            let kind = classify(&text);
            Ok(Token { text, kind })
        })
        .collect()
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn eat_while(&mut self, pred: impl Fn(char) -> bool) {
        while let Some(c) = self.peek() {
            if !pred(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '$'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

fn lex_c_like(source: &str) -> Result<Vec<Token>> {
    let mut cur = Cursor { src: source, pos: 0 };
    let mut tokens = Vec::new();

    while let Some(c) = cur.peek() {
        let start = cur.pos;
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '/' && cur.peek_at(1) == Some('/') {
            cur.eat_while(|c| c != '\n');
            continue;
        }
        if c == '/' && cur.peek_at(1) == Some('*') {
            match cur.rest()[2..].find("*/") {
                Some(end) => cur.pos += 2 + end + 2,
                None => {
                    return Err(Error::Lex {
                        offset: start,
                        message: "unterminated block comment".into(),
                    })
                }
            }
            continue;
        }

        let kind = if is_ident_start(c) {
            cur.eat_while(is_ident_continue);
            if is_keyword(&source[start..cur.pos]) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            }
        } else if c.is_ascii_digit() || (c == '.' && cur.peek_at(1).is_some_and(|d| d.is_ascii_digit())) {
            lex_number(&mut cur);
            TokenKind::Literal
        } else if c == '"' || c == '\'' {
            lex_quoted(&mut cur, c)?;
            TokenKind::Literal
        } else if let Some(op) = OPERATORS.iter().find(|op| cur.rest().starts_with(**op)) {
            cur.pos += op.len();
            TokenKind::Operator
        } else if PUNCTUATION.contains(c) {
            cur.bump();
            TokenKind::Punctuation
        } else if SINGLE_OPERATORS.contains(c) {
            cur.bump();
            TokenKind::Operator
        } else if !c.is_ascii() {
            cur.eat_while(|c| !c.is_ascii() && !c.is_whitespace());
            TokenKind::Other
        } else {
            cur.bump();
            TokenKind::Other
        };

        tokens.push(Token {
            text: escape_reserved(&source[start..cur.pos]),
            kind,
        });
    }
    Ok(tokens)
}

fn lex_number(cur: &mut Cursor<'_>) {
    if cur.peek() == Some('0') && matches!(cur.peek_at(1), Some('x' | 'X' | 'b' | 'B')) {
        cur.bump();
        cur.bump();
        cur.eat_while(|c| c.is_ascii_hexdigit() || c == '_');
    } else {
        cur.eat_while(|c| c.is_ascii_digit() || c == '_');
        if cur.peek() == Some('.') && cur.peek_at(1).is_none_or(|d| !is_ident_start(d) && d != '.') {
            cur.bump();
            cur.eat_while(|c| c.is_ascii_digit() || c == '_');
        }
        if matches!(cur.peek(), Some('e' | 'E'))
            && cur
                .peek_at(1)
                .is_some_and(|d| d.is_ascii_digit() || ((d == '+' || d == '-') && cur.peek_at(2).is_some_and(|e| e.is_ascii_digit())))
        {
            cur.bump();
            if matches!(cur.peek(), Some('+' | '-')) {
                cur.bump();
            }
            cur.eat_while(|c| c.is_ascii_digit());
        }
    }
    // Type suffixes: 10L, 1.5f, 42u, 0x1FULL
    cur.eat_while(|c| matches!(c, 'l' | 'L' | 'u' | 'U' | 'f' | 'F' | 'd' | 'D'));
}

fn lex_quoted(cur: &mut Cursor<'_>, quote: char) -> Result<()> {
    let start = cur.pos;
    cur.bump();
    loop {
        match cur.bump() {
            Some('\\') => {
                if cur.bump().is_none() {
                    break;
                }
            }
            Some(c) if c == quote => return Ok(()),
            Some('\n') | None => break,
            Some(_) => {}
        }
    }
    let what = if quote == '"' { "string" } else { "character" };
    Err(Error::Lex {
        offset: start,
        message: format!("unterminated {what} literal"),
    })
}
