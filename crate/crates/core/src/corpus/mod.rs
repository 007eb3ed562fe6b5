//! Token streams, sanitization, on-disk corpora and project-level splits.

mod lexer;
mod split;

use std::fs;
use std::path::{Path, PathBuf};

pub use lexer::Lexer;
pub use split::{split_corpus, CorpusSplit, SplitFractions};

use crate::error::{Error, Result};
use crate::text::join_fields;

/// Suffix marking the last subword unit of a token.
pub const END_OF_TOKEN: &str = "</t>";
/// Replacement text for a maximal run of non-ASCII characters.
pub const NON_ASCII: &str = "<non-ascii>";

pub(crate) const ESCAPED_END_OF_TOKEN: &str = "<\\/t>";
const ESCAPED_NON_ASCII: &str = "<non\\-ascii>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Identifier,
    Keyword,
    Literal,
    Operator,
    Punctuation,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
}

impl Token {
    /// Builds a token, rejecting empty text and text containing the end-of-token marker.
    pub fn new(text: impl Into<String>, kind: TokenKind) -> Result<Self> {
        let text = text.into();
        if text.is_empty() {
            return Err(Error::InvalidToken("empty token text".into()));
        }
        if text.contains(END_OF_TOKEN) {
            return Err(Error::InvalidToken(format!("{text:?} contains {END_OF_TOKEN}")));
        }
        Ok(Token { text, kind })
    }
}

/// The tokens of one source file, in source order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenStream {
    pub project_id: String,
    pub file_id: String,
    pub tokens: Vec<Token>,
}

impl TokenStream {
    pub fn lex(
        project_id: impl Into<String>,
        file_id: impl Into<String>,
        source: &str,
        lexer: Lexer,
    ) -> Result<Self> {
        Ok(TokenStream {
            project_id: project_id.into(),
            file_id: file_id.into(),
            tokens: lexer.lex(source)?,
        })
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.text.as_str())
    }

    /// `project/file`, the sort key and display name used everywhere.
    pub fn path_key(&self) -> String {
        format!("{}/{}", self.project_id, self.file_id)
    }
}

/// Lexes one file; the stream carries no project or file id.
pub fn lex_file(source: &str, lexer: Lexer) -> Result<TokenStream> {
    TokenStream::lex("", "", source, lexer)
}

/// Rewrites literal occurrences of the reserved texts so raw corpora never contain them.
pub(crate) fn escape_reserved(text: &str) -> String {
    if !text.contains('<') {
        return text.to_owned();
    }
    text.replace(END_OF_TOKEN, ESCAPED_END_OF_TOKEN)
        .replace(NON_ASCII, ESCAPED_NON_ASCII)
}

/// Replaces every maximal run of non-ASCII characters with [`NON_ASCII`].
pub fn sanitize_text(text: &str) -> String {
    if text.is_ascii() {
        return text.to_owned();
    }
    let mut out = String::with_capacity(text.len());
    let mut in_run = false;
    for c in text.chars() {
        if c.is_ascii() {
            out.push(c);
            in_run = false;
        } else if !in_run {
            out.push_str(NON_ASCII);
            in_run = true;
        }
    }
    out
}

pub fn sanitize(stream: TokenStream) -> TokenStream {
    TokenStream {
        tokens: stream
            .tokens
            .into_iter()
            .map(|t| Token {
                text: sanitize_text(&t.text),
                kind: t.kind,
            })
            .collect(),
        ..stream
    }
}

/// Files under `root` laid out as `<project>/<file>`, sorted by path.
///
/// With [`Lexer::Pretokenized`] only `*.tokens` files are read and the
/// extension is dropped from the file id. Every stream is sanitized.
pub fn load_corpus(root: &Path, lexer: Lexer) -> Result<Vec<TokenStream>> {
    let mut projects: Vec<PathBuf> = read_dir_sorted(root)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    projects.sort();

    let mut streams = Vec::new();
    for project in projects {
        let project_id = file_name(&project);
        for path in read_dir_sorted(&project)? {
            if !path.is_file() {
                continue;
            }
            let mut file_id = file_name(&path);
            if lexer == Lexer::Pretokenized {
                match file_id.strip_suffix(".tokens") {
                    Some(stem) => file_id = stem.to_owned(),
                    None => continue,
                }
            }
            let source = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let stream = TokenStream::lex(project_id.clone(), file_id, &source, lexer).map_err(|e| match e {
                Error::Lex { offset, message } => Error::Lex {
                    offset,
                    message: format!("{}: {message}", path.display()),
                },
                other => other,
            })?;
            streams.push(sanitize(stream));
        }
    }
    Ok(streams)
}

/// One pre-tokenized line (without trailing newline).
pub fn pretokenized_line(stream: &TokenStream) -> String {
    join_fields(stream.texts())
}

/// Writes `<root>/<project>/<file>.tokens` for every stream.
pub fn write_pretokenized(root: &Path, streams: &[TokenStream]) -> Result<()> {
    for stream in streams {
        let dir = root.join(&stream.project_id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join(format!("{}.tokens", stream.file_id));
        let mut line = pretokenized_line(stream);
        line.push('\n');
        fs::write(&path, line).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Distinct project ids, sorted.
pub fn project_ids(streams: &[TokenStream]) -> Vec<String> {
    let mut ids: Vec<String> = streams.iter().map(|s| s.project_id.clone()).collect();
    ids.sort();
    ids.dedup();
    ids
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        entries.push(entry.map_err(|e| Error::io(dir, e))?.path());
    }
    entries.sort();
    Ok(entries)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stream_of(texts: &[&str]) -> TokenStream {
        TokenStream {
            project_id: "p".into(),
            file_id: "f".into(),
            tokens: texts.iter().map(|t| Token::new(*t, TokenKind::Other).unwrap()).collect(),
        }
    }

    #[test]
    fn sanitize_examples() {
        assert_eq!(sanitize_text("counter"), "counter");
        assert_eq!(sanitize_text("计数器"), NON_ASCII);
        assert_eq!(sanitize_text("ab计数cd"), "ab<non-ascii>cd");
        assert_eq!(sanitize_text("\"é l'été\""), "\"<non-ascii> l'<non-ascii>t<non-ascii>\"");
    }

    #[test]
    fn token_rejects_marker_and_empty() {
        assert!(Token::new("", TokenKind::Other).is_err());
        assert!(Token::new("a</t>b", TokenKind::Other).is_err());
    }

    #[test]
    fn reserved_texts_escaped_at_ingestion() {
        let s = lex_file("x = \"<non-ascii> </t>\";", Lexer::CLike).unwrap();
        assert_eq!(s.tokens[2].text, "\"<non\\-ascii> <\\/t>\"");
        let clean = sanitize(s.clone());
        assert_eq!(clean, s);
    }

    #[test]
    fn load_and_write_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src");
        fs::create_dir_all(src.join("beta")).unwrap();
        fs::create_dir_all(src.join("alpha")).unwrap();
        fs::write(src.join("beta/b.c"), "int b = \"x y\";").unwrap();
        fs::write(src.join("alpha/z.c"), "z();").unwrap();
        fs::write(src.join("alpha/a.c"), "return 计数;").unwrap();

        let streams = load_corpus(&src, Lexer::CLike).unwrap();
        let keys: Vec<String> = streams.iter().map(TokenStream::path_key).collect();
        assert_eq!(keys, vec!["alpha/a.c", "alpha/z.c", "beta/b.c"]);
        assert_eq!(streams[0].tokens[1].text, NON_ASCII);

        let out = dir.path().join("tok");
        write_pretokenized(&out, &streams).unwrap();
        assert_eq!(
            fs::read_to_string(out.join("beta/b.c.tokens")).unwrap(),
            "int b = \"x\\sy\" ;\n"
        );
        let reloaded = load_corpus(&out, Lexer::Pretokenized).unwrap();
        assert_eq!(reloaded.len(), 3);
        for (a, b) in streams.iter().zip(&reloaded) {
            assert_eq!(a.path_key(), b.path_key());
            assert_eq!(a.texts().collect::<Vec<_>>(), b.texts().collect::<Vec<_>>());
        }
    }

    #[test]
    fn project_ids_sorted_unique() {
        let mut a = stream_of(&["x"]);
        a.project_id = "b".into();
        let mut b = stream_of(&["y"]);
        b.project_id = "a".into();
        assert_eq!(project_ids(&[a.clone(), b, a]), vec!["a", "b"]);
    }

    proptest! {
        #[test]
        fn sanitize_idempotent_and_ascii(texts in prop::collection::vec("\\PC{1,12}", 0..8)) {
            let tokens: Vec<Token> = texts
                .iter()
                .map(|t| Token { text: escape_reserved(t), kind: TokenKind::Other })
                .collect();
            let s = TokenStream { project_id: "p".into(), file_id: "f".into(), tokens };
            let once = sanitize(s);
            let twice = sanitize(once.clone());
            prop_assert_eq!(&once, &twice);
            for t in &once.tokens {
                prop_assert!(t.text.is_ascii());
                prop_assert!(!t.text.is_empty());
                prop_assert!(!t.text.contains(END_OF_TOKEN));
            }
        }

        #[test]
        fn lexing_is_pure(src in "[ -~\\n]{0,80}") {
            let a = Lexer::CLike.lex(&src);
            let b = Lexer::CLike.lex(&src);
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
                _ => prop_assert!(false, "lexer not deterministic"),
            }
        }
    }
}
