//! Tokenizer for the ASCII concrete syntax.

use crate::ast::SourceSpan;
use crate::parser::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Primed(String),
    Int(i64),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

// Longest match first.
const SYMBOLS: &[&str] = &[
    "&&&", "<=>", "|->", ":=", "::", ":|", "/:", "/=", "/\\", "\\/", "\\\\", "<:", "<=", ">=", "=>",
    "..", "||", "->", ":", "/", "\\", "<", ">", "=", ".", "&", "!", "#", "(", ")", "{", "}", ",",
    ";", "+", "-", "*", "|",
];

pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut pos = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    let advance = |pos: &mut usize, line: &mut u32, col: &mut u32, n: usize| {
        for &b in &bytes[*pos..*pos + n] {
            if b == b'\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        }
        *pos += n;
    };

    while pos < bytes.len() {
        let c = bytes[pos];
        if c.is_ascii_whitespace() {
            advance(&mut pos, &mut line, &mut col, 1);
            continue;
        }
        if text[pos..].starts_with("//") {
            let len = text[pos..].find('\n').unwrap_or(text.len() - pos);
            advance(&mut pos, &mut line, &mut col, len);
            continue;
        }
        let (start, sline, scol) = (pos, line, col);
        let tok = if c.is_ascii_alphabetic() || c == b'_' {
            let len = text[pos..]
                .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                .unwrap_or(text.len() - pos);
            let word = text[pos..pos + len].to_string();
            advance(&mut pos, &mut line, &mut col, len);
            if pos < bytes.len() && bytes[pos] == b'\'' {
                advance(&mut pos, &mut line, &mut col, 1);
                Tok::Primed(word)
            } else {
                Tok::Ident(word)
            }
        } else if c.is_ascii_digit() {
            let len = text[pos..]
                .find(|ch: char| !ch.is_ascii_digit())
                .unwrap_or(text.len() - pos);
            let digits = &text[pos..pos + len];
            let value = digits.parse::<i64>().map_err(|_| ParseError {
                span: span_of(start, start + len, sline, scol, sline, scol + len as u32),
                expected: vec!["integer literal".into()],
                message: format!("integer literal `{digits}` out of range"),
            })?;
            advance(&mut pos, &mut line, &mut col, len);
            Tok::Int(value)
        } else if let Some(sym) = SYMBOLS.iter().find(|s| text[pos..].starts_with(**s)) {
            advance(&mut pos, &mut line, &mut col, sym.len());
            Tok::Sym(sym)
        } else {
            let ch = text[pos..].chars().next().unwrap_or('?');
            return Err(ParseError {
                span: span_of(start, start + ch.len_utf8(), sline, scol, sline, scol + 1),
                expected: Vec::new(),
                message: format!("unexpected character `{ch}`"),
            });
        };
        out.push(Token {
            tok,
            span: span_of(start, pos, sline, scol, line, col),
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        span: span_of(pos, pos, line, col, line, col),
    });
    Ok(out)
}

fn span_of(begin: usize, end: usize, bl: u32, bc: u32, el: u32, ec: u32) -> SourceSpan {
    SourceSpan {
        begin,
        end,
        begin_line: bl,
        begin_col: bc,
        end_line: el,
        end_col: ec,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn longest_match_symbols() {
        assert_eq!(
            toks("a <=> b => c <= d"),
            vec![
                Tok::Ident("a".into()),
                Tok::Sym("<=>"),
                Tok::Ident("b".into()),
                Tok::Sym("=>"),
                Tok::Ident("c".into()),
                Tok::Sym("<="),
                Tok::Ident("d".into()),
                Tok::Eof
            ]
        );
        assert_eq!(toks("x :: S")[1], Tok::Sym("::"));
        assert_eq!(toks("p &&& q")[1], Tok::Sym("&&&"));
    }

    #[test]
    fn primes_and_comments() {
        assert_eq!(
            toks("t' // comment\n 12"),
            vec![Tok::Primed("t".into()), Tok::Int(12), Tok::Eof]
        );
    }

    #[test]
    fn spans_track_lines() {
        let t = tokenize("a\n  bc").unwrap();
        assert_eq!(t[1].span.begin_line, 2);
        assert_eq!(t[1].span.begin_col, 3);
        assert_eq!(t[1].span.end_col, 5);
    }

    #[test]
    fn bad_character() {
        let e = tokenize("a ? b").unwrap_err();
        assert_eq!(e.span.begin, 2);
    }
}
