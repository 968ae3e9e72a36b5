use crate::error::ParseError;

use super::ast::Span;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Dot,
    Arrow,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Minus,
    Star,
    Semicolon,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn error_at(text: &str, offset: usize, message: impl Into<String>) -> ParseError {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    ParseError {
        message: message.into(),
        offset,
        line,
        column,
    }
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = |tok| Some((tok, 1));
        let fixed = match c {
            b'[' => single(Tok::LBracket),
            b']' => single(Tok::RBracket),
            b'(' => single(Tok::LParen),
            b')' => single(Tok::RParen),
            b',' => single(Tok::Comma),
            b'.' if !bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => single(Tok::Dot),
            b'=' => single(Tok::Eq),
            b'*' => single(Tok::Star),
            b';' => single(Tok::Semicolon),
            b'-' if !bytes.get(i + 1).is_some_and(|b| *b == b'-') => single(Tok::Minus),
            b'!' if bytes.get(i + 1) == Some(&b'=') => Some((Tok::Ne, 2)),
            b'<' => {
                if bytes[i..].starts_with(b"<->") {
                    Some((Tok::Arrow, 3))
                } else if bytes.get(i + 1) == Some(&b'=') {
                    Some((Tok::Le, 2))
                } else if bytes.get(i + 1) == Some(&b'>') {
                    Some((Tok::Ne, 2))
                } else {
                    single(Tok::Lt)
                }
            }
            b'>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    Some((Tok::Ge, 2))
                } else {
                    single(Tok::Gt)
                }
            }
            _ => None,
        };
        if let Some((tok, len)) = fixed {
            out.push(Token {
                tok,
                span: Span::new(start, start + len),
            });
            i += len;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == b'-' {
            // `--` line comment
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
        } else if c == b'\'' || c == b'"' {
            let quote = c;
            let mut s = String::new();
            i += 1;
            loop {
                match text[i..].chars().next() {
                    None => return Err(error_at(text, start, "unterminated string literal")),
                    Some(ch) if ch as u32 == quote as u32 => {
                        if bytes.get(i + 1) == Some(&quote) {
                            s.push(ch);
                            i += 2;
                        } else {
                            i += 1;
                            break;
                        }
                    }
                    Some(ch) => {
                        s.push(ch);
                        i += ch.len_utf8();
                    }
                }
            }
            out.push(Token {
                tok: Tok::Str(s),
                span: Span::new(start, i),
            });
        } else if c.is_ascii_digit() || c == b'.' {
            let mut is_float = false;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit) {
                is_float = true;
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    is_float = true;
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lit = &text[start..i];
            let tok = if is_float {
                Tok::Float(
                    lit.parse()
                        .map_err(|_| error_at(text, start, format!("invalid number `{lit}`")))?,
                )
            } else {
                Tok::Int(
                    lit.parse()
                        .map_err(|_| error_at(text, start, format!("integer `{lit}` out of range")))?,
                )
            };
            if i < bytes.len() && (bytes[i].is_ascii_alphabetic() || bytes[i] == b'_') {
                return Err(error_at(text, i, "unexpected character after number"));
            }
            out.push(Token {
                tok,
                span: Span::new(start, i),
            });
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(text[start..i].to_string()),
                span: Span::new(start, i),
            });
        } else {
            let ch = text[i..].chars().next().unwrap_or('?');
            return Err(error_at(text, start, format!("unexpected character `{ch}`")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn symbols_and_words() {
        assert_eq!(
            toks("[(R.x = 'a''b') <-> (y)] != <> <= >="),
            vec![
                Tok::LBracket,
                Tok::LParen,
                Tok::Ident("R".into()),
                Tok::Dot,
                Tok::Ident("x".into()),
                Tok::Eq,
                Tok::Str("a'b".into()),
                Tok::RParen,
                Tok::Arrow,
                Tok::LParen,
                Tok::Ident("y".into()),
                Tok::RParen,
                Tok::RBracket,
                Tok::Ne,
                Tok::Ne,
                Tok::Le,
                Tok::Ge,
            ]
        );
    }

    #[test]
    fn numbers() {
        assert_eq!(
            toks("12 1.5 2e3 0.25E-1 -3"),
            vec![
                Tok::Int(12),
                Tok::Float(1.5),
                Tok::Float(2000.0),
                Tok::Float(0.025),
                Tok::Minus,
                Tok::Int(3)
            ]
        );
    }

    #[test]
    fn comments_and_positions() {
        let t = tokenize("a -- note\n  b").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[1].span.start, 12);
        let e = tokenize("a\n  #").unwrap_err();
        assert_eq!((e.line, e.column), (2, 3));
        assert!(tokenize("'open").is_err());
    }
}
