//! Field escaping for the space-separated text formats.
//!
//! Token and unit texts may contain spaces (string literals), so every
//! space-separated format writes each field through [`escape_field`]:
//! `\` becomes `\\`, space `\s`, tab `\t`, newline `\n`, carriage return `\r`.
//! Fields without those characters are written verbatim.

use crate::error::{Error, Result};

pub fn escape_field(text: &str) -> String {
    if !text.contains(['\\', ' ', '\t', '\n', '\r']) {
        return text.to_owned();
    }
    let mut out = String::with_capacity(text.len() + 4);
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            ' ' => out.push_str("\\s"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_field(field: &str) -> Result<String> {
    if !field.contains('\\') {
        return Ok(field.to_owned());
    }
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('s') => out.push(' '),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => {
                return Err(Error::format("escaped field", format!("unknown escape \\{other} in {field:?}")))
            }
            None => return Err(Error::format("escaped field", format!("dangling backslash in {field:?}"))),
        }
    }
    Ok(out)
}

/// Joins fields with single spaces, escaping each.
pub fn join_fields<'a>(fields: impl IntoIterator<Item = &'a str>) -> String {
    let mut line = String::new();
    for (i, f) in fields.into_iter().enumerate() {
        if i > 0 {
            line.push(' ');
        }
        line.push_str(&escape_field(f));
    }
    line
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plain_fields_are_verbatim() {
        assert_eq!(escape_field("counter"), "counter");
        assert_eq!(escape_field("\"a b\""), "\"a\\sb\"");
        assert_eq!(escape_field("\\n"), "\\\\n");
    }

    #[test]
    fn rejects_bad_escapes() {
        assert!(unescape_field("a\\q").is_err());
        assert!(unescape_field("a\\").is_err());
    }

    proptest! {
        #[test]
        fn escape_round_trips(s in "(\\PC|[\\t\\n\\r])*") {
            let escaped = escape_field(&s);
            prop_assert!(!escaped.contains([' ', '\t', '\n', '\r']));
            prop_assert_eq!(unescape_field(&escaped).unwrap(), s);
        }
    }
}
