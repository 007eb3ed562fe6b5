//! Deterministic synthetic C-like projects.
//!
//! Every project draws its own domain nouns, naming style and a handful of
//! recurring statements, so files of one project resemble each other more
//! than files of different projects.

use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{lex_file, Lexer, TokenStream};
use crate::error::{Error, Result};

const NOUNS: &[&str] = &[
    "widget", "sensor", "packet", "matrix", "ledger", "invoice", "particle", "vertex", "cursor",
    "socket", "frame", "pixel", "sample", "record", "ticket", "account", "vector", "shape",
    "token", "buffer", "channel", "device", "engine", "filter", "glyph", "handle", "image",
    "journal", "kernel", "layer", "mesh", "module", "number", "order", "page", "queue",
    "region", "signal", "table", "unit", "voxel", "window", "zone", "bucket", "cluster",
    "digest", "event", "field", "graph", "header", "index", "label", "marker", "neuron",
    "option", "player", "query", "route", "schema", "timer", "upload", "viewer", "worker",
];

const VERBS: &[&str] = &[
    "get", "set", "add", "remove", "update", "compute", "find", "load", "save", "parse", "read",
    "write", "init", "reset", "check", "build", "free", "copy", "merge", "scan", "sort", "push",
    "pop", "apply", "clear",
];

const SUFFIXES: &[&str] = &["count", "size", "index", "list", "total", "offset", "id", "flag", "value", "len"];

const LOCALS: &[&str] = &["i", "j", "k", "n", "tmp", "result", "sum", "pos", "len", "ret"];

const FORMATS: &[&str] = &["%d\\n", "%d ", "value: %d\\n", "%s\\n", "error %d\\n"];

const TYPES: &[&str] = &["int", "int", "int", "long", "float", "double", "char", "unsigned"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthConfig {
    pub projects: usize,
    pub files_per_project: usize,
    /// Approximate size of each file.
    pub file_bytes: usize,
    /// Every project draws from the same identifiers and naming style.
    pub shared_vocabulary: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthFile {
    pub project: String,
    pub file: String,
    pub source: String,
}

impl SynthFile {
    pub fn lex(&self) -> Result<TokenStream> {
        let mut stream = lex_file(&self.source, Lexer::CLike)?;
        stream.project_id = self.project.clone();
        stream.file_id = self.file.clone();
        Ok(stream)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Style {
    Camel,
    Snake,
}

struct Project {
    rng: ChaCha8Rng,
    style: Style,
    nouns: Vec<&'static str>,
    globals: Vec<String>,
    functions: Vec<(String, usize)>,
    structs: Vec<String>,
    idioms: Vec<String>,
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_ascii_uppercase().to_string() + c.as_str(),
        None => String::new(),
    }
}

impl Project {
    /// Identifiers come from `vocab_seed`, everything else from `seed`.
    fn new(vocab_seed: u64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(vocab_seed);
        let style = if rng.random_bool(0.5) { Style::Camel } else { Style::Snake };
        // Earlier nouns are more popular across projects.
        let want = rng.random_range(5..=8);
        let mut nouns: Vec<&'static str> = Vec::with_capacity(want);
        while nouns.len() < want {
            let i = ((NOUNS.len() as f64).powf(rng.random::<f64>()) - 1.0) as usize;
            let noun = NOUNS[i.min(NOUNS.len() - 1)];
            if !nouns.contains(&noun) {
                nouns.push(noun);
            }
        }
        let mut p = Project {
            rng,
            style,
            nouns,
            globals: vec![],
            functions: vec![],
            structs: vec![],
            idioms: vec![],
        };
        for _ in 0..10 {
            let noun = *p.nouns.choose(&mut p.rng).expect("nouns");
            let suffix = *SUFFIXES.choose(&mut p.rng).expect("suffixes");
            let g = p.join(&[noun, suffix]);
            if !p.globals.contains(&g) {
                p.globals.push(g);
            }
        }
        for _ in 0..8 {
            let verb = *VERBS.choose(&mut p.rng).expect("verbs");
            let noun = *p.nouns.choose(&mut p.rng).expect("nouns");
            let f = p.join(&[verb, noun]);
            let arity = p.rng.random_range(0..=3);
            if !p.functions.iter().any(|(n, _)| *n == f) {
                p.functions.push((f, arity));
            }
        }
        p.structs = p.nouns.iter().take(3).map(|n| capitalize(n)).collect();
        p.rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..4 {
            let mut out = String::new();
            p.simple_statement(&mut out, 1);
            p.idioms.push(out);
        }
        p
    }

    fn join(&self, parts: &[&str]) -> String {
        match self.style {
            Style::Snake => parts.join("_"),
            Style::Camel => {
                let mut s = parts[0].to_string();
                for part in &parts[1..] {
                    s.push_str(&capitalize(part));
                }
                s
            }
        }
    }

    /// Project globals are preferred, roughly Zipf-like by position.
    fn global(&mut self) -> String {
        let n = self.globals.len();
        let i = (self.rng.random::<f64>().powi(2) * n as f64) as usize;
        self.globals[i.min(n - 1)].clone()
    }

    fn local(&mut self) -> &'static str {
        LOCALS.choose(&mut self.rng).expect("locals")
    }

    fn operand(&mut self) -> String {
        match self.rng.random_range(0..10) {
            0..=3 => self.global(),
            4..=6 => self.local().to_string(),
            7 => self.rng.random_range(0..100).to_string(),
            8 => format!("{}[{}]", self.global(), self.local()),
            _ => format!("{}->{}", self.local(), self.global()),
        }
    }

    fn expr(&mut self) -> String {
        match self.rng.random_range(0..6) {
            0 | 1 => self.operand(),
            2 | 3 => {
                let op = *["+", "-", "*", "/", "%", "<<", "&"].choose(&mut self.rng).expect("ops");
                format!("{} {op} {}", self.operand(), self.operand())
            }
            4 => self.call(),
            _ => format!("({} + {}) * {}", self.operand(), self.operand(), self.rng.random_range(1..10)),
        }
    }

    fn call(&mut self) -> String {
        let (name, arity) = self.functions.choose(&mut self.rng).expect("functions").clone();
        let args: Vec<String> = (0..arity).map(|_| self.operand()).collect();
        format!("{name}({})", args.join(", "))
    }

    fn cond(&mut self) -> String {
        let op = *["<", ">", "<=", ">=", "==", "!="].choose(&mut self.rng).expect("cmp");
        format!("{} {op} {}", self.operand(), self.operand())
    }

    fn indent(out: &mut String, depth: usize) {
        for _ in 0..depth {
            out.push_str("    ");
        }
    }

    fn simple_statement(&mut self, out: &mut String, depth: usize) {
        Self::indent(out, depth);
        match self.rng.random_range(0..7) {
            0 => {
                let ty = *TYPES.choose(&mut self.rng).expect("types");
                let name = self.local();
                out.push_str(&format!("{ty} {name} = {};\n", self.expr()));
            }
            1 | 2 => {
                let target = if self.rng.random_bool(0.5) { self.global() } else { self.local().to_string() };
                let op = *["=", "+=", "-=", "|="].choose(&mut self.rng).expect("assign");
                out.push_str(&format!("{target} {op} {};\n", self.expr()));
            }
            3 => out.push_str(&format!("{};\n", self.call())),
            4 => {
                let g = self.global();
                let fmt = *FORMATS.choose(&mut self.rng).expect("formats");
                out.push_str(&format!("printf(\"{fmt}\", {g});\n"));
            }
            5 => out.push_str(&format!("{}++;\n", self.local())),
            _ => {
                let s = self.structs.choose(&mut self.rng).expect("structs").clone();
                let field = self.global();
                out.push_str(&format!("{}.{field} = {};\n", s.to_lowercase(), self.operand()));
            }
        }
    }

    fn statement(&mut self, out: &mut String, depth: usize) {
        if !self.idioms.is_empty() && self.rng.random_bool(0.15) {
            let idiom = self.idioms.choose(&mut self.rng).expect("idioms").clone();
            Self::indent(out, depth.saturating_sub(1));
            out.push_str(&idiom);
            return;
        }
        if depth >= 3 {
            return self.simple_statement(out, depth);
        }
        match self.rng.random_range(0..10) {
            0 => {
                Self::indent(out, depth);
                let v = self.local();
                let bound = self.global();
                out.push_str(&format!("for ({v} = 0; {v} < {bound}; {v}++) {{\n"));
                self.block(out, depth + 1);
                Self::indent(out, depth);
                out.push_str("}\n");
            }
            1 => {
                Self::indent(out, depth);
                out.push_str(&format!("if ({}) {{\n", self.cond()));
                self.block(out, depth + 1);
                Self::indent(out, depth);
                if self.rng.random_bool(0.3) {
                    out.push_str("} else {\n");
                    self.block(out, depth + 1);
                    Self::indent(out, depth);
                }
                out.push_str("}\n");
            }
            2 => {
                Self::indent(out, depth);
                out.push_str(&format!("while ({}) {{\n", self.cond()));
                self.block(out, depth + 1);
                Self::indent(out, depth);
                out.push_str("}\n");
            }
            _ => self.simple_statement(out, depth),
        }
    }

    fn block(&mut self, out: &mut String, depth: usize) {
        let n = self.rng.random_range(1..=3);
        for _ in 0..n {
            self.statement(out, depth);
        }
    }

    fn function(&mut self, out: &mut String) {
        let (name, arity) = self.functions.choose(&mut self.rng).expect("functions").clone();
        let ret = *["int", "void", "long", "double"].choose(&mut self.rng).expect("types");
        let params: Vec<String> = (0..arity)
            .map(|_| {
                let ty = *TYPES.choose(&mut self.rng).expect("types");
                format!("{ty} {}", self.global())
            })
            .collect();
        let params = if params.is_empty() { "void".to_string() } else { params.join(", ") };
        if self.rng.random_bool(0.3) {
            out.push_str(&format!("/* {name}: {} */\n", self.nouns.join(" ")));
        }
        out.push_str(&format!("{ret} {name}({params}) {{\n"));
        let n = self.rng.random_range(2..=6);
        for _ in 0..n {
            self.statement(out, 1);
        }
        if ret != "void" {
            out.push_str(&format!("    return {};\n", self.expr()));
        }
        out.push_str("}\n\n");
    }

    fn struct_def(&mut self, out: &mut String) {
        let name = self.structs.choose(&mut self.rng).expect("structs").clone();
        out.push_str(&format!("struct {name} {{\n"));
        for _ in 0..self.rng.random_range(2..=4) {
            let ty = *TYPES.choose(&mut self.rng).expect("types");
            out.push_str(&format!("    {ty} {};\n", self.global()));
        }
        out.push_str("};\n\n");
    }

    fn file(&mut self, bytes: usize) -> String {
        let mut out = String::new();
        if self.rng.random_bool(0.5) {
            self.struct_def(&mut out);
        }
        while out.len() < bytes {
            self.function(&mut out);
        }
        out
    }
}

/// Generates `projects × files_per_project` files named `projNN/fileNN.c`.
pub fn generate(config: &SynthConfig) -> Vec<SynthFile> {
    let mut out = Vec::with_capacity(config.projects * config.files_per_project);
    let mut seeds = ChaCha8Rng::seed_from_u64(config.seed);
    let shared: u64 = seeds.random();
    for p in 0..config.projects {
        let seed: u64 = seeds.random();
        let vocab_seed = if config.shared_vocabulary { shared } else { seed };
        let mut project = Project::new(vocab_seed, seed);
        for f in 0..config.files_per_project {
            out.push(SynthFile {
                project: format!("proj{p:02}"),
                file: format!("file{f:02}.c"),
                source: project.file(config.file_bytes),
            });
        }
    }
    out
}

/// Lexes every generated file.
pub fn lex_all(files: &[SynthFile]) -> Result<Vec<TokenStream>> {
    files.iter().map(SynthFile::lex).collect()
}

/// Writes `<root>/<project>/<file>` for every file.
pub fn write_corpus(root: &Path, files: &[SynthFile]) -> Result<()> {
    for f in files {
        let dir = root.join(&f.project);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join(&f.file);
        fs::write(&path, &f.source).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig { projects: 3, files_per_project: 2, file_bytes: 600, shared_vocabulary: false, seed: 5 }
    }

    #[test]
    fn deterministic_and_sized() {
        let a = generate(&small());
        assert_eq!(a, generate(&small()));
        assert_eq!(a.len(), 6);
        assert_eq!(a[3].project, "proj01");
        assert_eq!(a[3].file, "file01.c");
        for f in &a {
            assert!(f.source.len() >= 600 && f.source.len() < 2000, "{}", f.source.len());
        }
        assert_ne!(generate(&SynthConfig { seed: 6, ..small() }), a);
    }

    #[test]
    fn output_lexes() {
        let streams = lex_all(&generate(&SynthConfig { projects: 6, ..small() })).unwrap();
        assert!(streams.iter().all(|s| s.tokens.len() > 50));
        assert_eq!(streams[0].project_id, "proj00");
    }

    #[test]
    fn projects_share_more_within_than_across() {
        use std::collections::HashSet;
        let files = lex_all(&generate(&SynthConfig { projects: 2, files_per_project: 2, file_bytes: 3000, shared_vocabulary: false, seed: 1 })).unwrap();
        let vocab = |i: usize| files[i].texts().map(str::to_string).collect::<HashSet<_>>();
        let jaccard = |a: &HashSet<String>, b: &HashSet<String>| {
            a.intersection(b).count() as f64 / a.union(b).count() as f64
        };
        let (a0, a1, b0) = (vocab(0), vocab(1), vocab(2));
        assert!(jaccard(&a0, &a1) > jaccard(&a0, &b0));
    }
}
