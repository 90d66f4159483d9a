use crate::model::Span;

use super::Diagnostic;

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Tok {
    Ident(String),
    Int(i64),
    /// Punctuation and operators, spelled as in the source.
    Sym(&'static str),
    /// `//:` opens an annotation that runs to the end of the line.
    AnnotStart,
    AnnotEnd,
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

const SYMS: &[&str] = &[
    "|->", "<=>", "==", "!=", "<=", ">=", "=>", "&&", "||", "{", "}", "(", ")", "[", "]", ",", ";", ":", ".", "|", "&",
    "*", "=", "<", ">", "+", "-", "!", "?", "~", "/",
];

pub fn lex(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;
    let mut in_annot = false;
    let span = |s: usize, e: usize, line: u32, col: u32| Span { start: s, end: e, line, col };
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            if in_annot {
                out.push(Token { tok: Tok::AnnotEnd, span: span(i, i, line, col) });
                in_annot = false;
            }
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if src[i..].starts_with("//:") {
            if in_annot {
                out.push(Token { tok: Tok::AnnotEnd, span: span(i, i, line, col) });
            }
            out.push(Token { tok: Tok::AnnotStart, span: span(i, i + 3, line, col) });
            in_annot = true;
            i += 3;
            col += 3;
            continue;
        }
        if src[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if src[i..].starts_with("/*") {
            let start = (i, line, col);
            i += 2;
            col += 2;
            loop {
                if i >= bytes.len() {
                    return Err(Diagnostic::new(span(start.0, i, start.1, start.2), "unterminated block comment"));
                }
                if src[i..].starts_with("*/") {
                    i += 2;
                    col += 2;
                    break;
                }
                if bytes[i] == b'\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
            continue;
        }
        let (sl, sc) = (line, col);
        if c.is_ascii_digit() {
            let s = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n: i64 = src[s..i]
                .parse()
                .map_err(|_| Diagnostic::new(span(s, i, sl, sc), "integer literal out of range"))?;
            col += (i - s) as u32;
            out.push(Token { tok: Tok::Int(n), span: span(s, i, sl, sc) });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let s = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'\'') {
                i += 1;
            }
            col += (i - s) as u32;
            out.push(Token { tok: Tok::Ident(src[s..i].to_string()), span: span(s, i, sl, sc) });
            continue;
        }
        match SYMS.iter().find(|s| src[i..].starts_with(**s)) {
            Some(s) => {
                out.push(Token { tok: Tok::Sym(s), span: span(i, i + s.len(), sl, sc) });
                i += s.len();
                col += s.len() as u32;
            }
            None => {
                let ch = src[i..].chars().next().unwrap();
                return Err(Diagnostic::new(span(i, i + ch.len_utf8(), sl, sc), format!("unexpected character {ch:?}")));
            }
        }
    }
    if in_annot {
        out.push(Token { tok: Tok::AnnotEnd, span: span(i, i, line, col) });
    }
    out.push(Token { tok: Tok::Eof, span: span(i, i, line, col) });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annotations_are_delimited() {
        let t = lex("//: fold(&x)\nreturn;").unwrap();
        let kinds: Vec<_> = t.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(kinds[0], Tok::AnnotStart);
        assert_eq!(kinds[1], Tok::Ident("fold".into()));
        assert!(kinds.contains(&Tok::AnnotEnd));
    }

    #[test]
    fn plain_comments_vanish() {
        let t = lex("// hello\nx").unwrap();
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn maps_to_arrow() {
        let t = lex("l |-> t").unwrap();
        assert_eq!(t[1].tok, Tok::Sym("|->"));
    }

    #[test]
    fn bad_char_has_position() {
        let e = lex("x\n  $").unwrap_err();
        assert_eq!((e.span.line, e.span.col), (2, 3));
    }
}
