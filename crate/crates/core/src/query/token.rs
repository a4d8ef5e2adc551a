//! Lexer for the query language. Keywords are case-insensitive;
//! identifiers, strings, numbers, and parameters keep their spelling.

use crate::error::{EngineError, Result, SyntaxError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    // keywords
    Match,
    Where,
    Return,
    Order,
    By,
    Limit,
    Asc,
    Desc,
    Create,
    Call,
    Yield,
    As,
    And,
    Or,
    Not,
    True,
    False,
    Null,
    Vector,
    Index,
    On,
    Options,
    // values
    Ident,
    Int,
    Float,
    Str,
    Param,
    // punctuation
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Semi,
    Dot,
    DotDot,
    Minus,
    Arrow,     // ->
    LeftArrow, // <-
    Star,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl Kind {
    pub fn describe(self) -> &'static str {
        match self {
            Kind::Match => "MATCH",
            Kind::Where => "WHERE",
            Kind::Return => "RETURN",
            Kind::Order => "ORDER",
            Kind::By => "BY",
            Kind::Limit => "LIMIT",
            Kind::Asc => "ASC",
            Kind::Desc => "DESC",
            Kind::Create => "CREATE",
            Kind::Call => "CALL",
            Kind::Yield => "YIELD",
            Kind::As => "AS",
            Kind::And => "AND",
            Kind::Or => "OR",
            Kind::Not => "NOT",
            Kind::True => "TRUE",
            Kind::False => "FALSE",
            Kind::Null => "NULL",
            Kind::Vector => "VECTOR",
            Kind::Index => "INDEX",
            Kind::On => "ON",
            Kind::Options => "OPTIONS",
            Kind::Ident => "identifier",
            Kind::Int => "integer",
            Kind::Float => "float",
            Kind::Str => "string",
            Kind::Param => "parameter",
            Kind::LParen => "'('",
            Kind::RParen => "')'",
            Kind::LBracket => "'['",
            Kind::RBracket => "']'",
            Kind::LBrace => "'{'",
            Kind::RBrace => "'}'",
            Kind::Comma => "','",
            Kind::Colon => "':'",
            Kind::Semi => "';'",
            Kind::Dot => "'.'",
            Kind::DotDot => "'..'",
            Kind::Minus => "'-'",
            Kind::Arrow => "'->'",
            Kind::LeftArrow => "'<-'",
            Kind::Star => "'*'",
            Kind::Eq => "'='",
            Kind::Ne => "'<>'",
            Kind::Lt => "'<'",
            Kind::Le => "'<='",
            Kind::Gt => "'>'",
            Kind::Ge => "'>='",
            Kind::Eof => "end of input",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub kind: Kind,
    /// Literal text for Ident/Int/Float/Str/Param (string unquoted,
    /// parameter without the '$').
    pub text: String,
    pub offset: usize,
    pub line: u32,
    pub column: u32,
}

struct Scanner<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Scanner<'a> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error(&self, found: String, expected: Vec<&'static str>) -> EngineError {
        EngineError::Syntax(SyntaxError {
            offset: self.pos,
            line: self.line,
            column: self.col,
            found,
            expected,
        })
    }
}

fn keyword(word: &str) -> Option<Kind> {
    Some(match word.to_ascii_uppercase().as_str() {
        "MATCH" => Kind::Match,
        "WHERE" => Kind::Where,
        "RETURN" => Kind::Return,
        "ORDER" => Kind::Order,
        "BY" => Kind::By,
        "LIMIT" => Kind::Limit,
        "ASC" => Kind::Asc,
        "DESC" => Kind::Desc,
        "CREATE" => Kind::Create,
        "CALL" => Kind::Call,
        "YIELD" => Kind::Yield,
        "AS" => Kind::As,
        "AND" => Kind::And,
        "OR" => Kind::Or,
        "NOT" => Kind::Not,
        "TRUE" => Kind::True,
        "FALSE" => Kind::False,
        "NULL" => Kind::Null,
        "VECTOR" => Kind::Vector,
        "INDEX" => Kind::Index,
        "ON" => Kind::On,
        "OPTIONS" => Kind::Options,
        _ => return None,
    })
}

pub fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut s = Scanner {
        src: text.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        while matches!(s.peek(), Some(b' ' | b'\t' | b'\r' | b'\n')) {
            s.bump();
        }
        // Line comments.
        if s.peek() == Some(b'/') && s.peek2() == Some(b'/') {
            while !matches!(s.peek(), None | Some(b'\n')) {
                s.bump();
            }
            continue;
        }
        let (offset, line, column) = (s.pos, s.line, s.col);
        let tok = |kind: Kind, text: String| Token {
            kind,
            text,
            offset,
            line,
            column,
        };
        let Some(c) = s.peek() else {
            out.push(tok(Kind::Eof, String::new()));
            return Ok(out);
        };
        match c {
            b'(' => {
                s.bump();
                out.push(tok(Kind::LParen, String::new()));
            }
            b')' => {
                s.bump();
                out.push(tok(Kind::RParen, String::new()));
            }
            b'[' => {
                s.bump();
                out.push(tok(Kind::LBracket, String::new()));
            }
            b']' => {
                s.bump();
                out.push(tok(Kind::RBracket, String::new()));
            }
            b'{' => {
                s.bump();
                out.push(tok(Kind::LBrace, String::new()));
            }
            b'}' => {
                s.bump();
                out.push(tok(Kind::RBrace, String::new()));
            }
            b',' => {
                s.bump();
                out.push(tok(Kind::Comma, String::new()));
            }
            b':' => {
                s.bump();
                out.push(tok(Kind::Colon, String::new()));
            }
            b';' => {
                s.bump();
                out.push(tok(Kind::Semi, String::new()));
            }
            b'*' => {
                s.bump();
                out.push(tok(Kind::Star, String::new()));
            }
            b'=' => {
                s.bump();
                out.push(tok(Kind::Eq, String::new()));
            }
            b'.' => {
                s.bump();
                if s.peek() == Some(b'.') {
                    s.bump();
                    out.push(tok(Kind::DotDot, String::new()));
                } else {
                    out.push(tok(Kind::Dot, String::new()));
                }
            }
            b'-' => {
                s.bump();
                if s.peek() == Some(b'>') {
                    s.bump();
                    out.push(tok(Kind::Arrow, String::new()));
                } else {
                    out.push(tok(Kind::Minus, String::new()));
                }
            }
            b'<' => {
                s.bump();
                match s.peek() {
                    Some(b'-') => {
                        s.bump();
                        out.push(tok(Kind::LeftArrow, String::new()));
                    }
                    Some(b'=') => {
                        s.bump();
                        out.push(tok(Kind::Le, String::new()));
                    }
                    Some(b'>') => {
                        s.bump();
                        out.push(tok(Kind::Ne, String::new()));
                    }
                    _ => out.push(tok(Kind::Lt, String::new())),
                }
            }
            b'>' => {
                s.bump();
                if s.peek() == Some(b'=') {
                    s.bump();
                    out.push(tok(Kind::Ge, String::new()));
                } else {
                    out.push(tok(Kind::Gt, String::new()));
                }
            }
            b'\'' | b'"' => {
                let quote = c;
                s.bump();
                let mut text = String::new();
                loop {
                    match s.bump() {
                        None => {
                            return Err(s.error("end of input".into(), vec!["closing quote"]))
                        }
                        Some(b'\\') => match s.bump() {
                            Some(b'n') => text.push('\n'),
                            Some(b't') => text.push('\t'),
                            Some(b'\\') => text.push('\\'),
                            Some(q) if q == quote => text.push(q as char),
                            _ => {
                                return Err(
                                    s.error("bad escape".into(), vec!["n", "t", "\\\\", "quote"])
                                )
                            }
                        },
                        Some(q) if q == quote => break,
                        Some(b) => {
                            // Re-assemble UTF-8 as raw bytes; the source was
                            // a str, so the sequence is valid.
                            text.push(b as char);
                            if b >= 0x80 {
                                text.pop();
                                let start = s.pos - 1;
                                let mut end = s.pos;
                                while end < s.src.len() && s.src[end] & 0xc0 == 0x80 {
                                    end += 1;
                                }
                                text.push_str(
                                    std::str::from_utf8(&s.src[start..end]).map_err(|_| {
                                        s.error("invalid utf-8".into(), vec!["string text"])
                                    })?,
                                );
                                for _ in s.pos..end {
                                    s.bump();
                                }
                            }
                        }
                    }
                }
                out.push(tok(Kind::Str, text));
            }
            b'$' => {
                s.bump();
                let mut name = String::new();
                while matches!(s.peek(), Some(b) if b.is_ascii_alphanumeric() || b == b'_') {
                    name.push(s.bump().unwrap() as char);
                }
                if name.is_empty() {
                    return Err(s.error("'$'".into(), vec!["parameter name"]));
                }
                out.push(tok(Kind::Param, name));
            }
            b if b.is_ascii_digit() => {
                let mut text = String::new();
                let mut float = false;
                while matches!(s.peek(), Some(d) if d.is_ascii_digit()) {
                    text.push(s.bump().unwrap() as char);
                }
                // '..' after an integer is a range, not a decimal point.
                if s.peek() == Some(b'.')
                    && s.peek2() != Some(b'.')
                    && matches!(s.src.get(s.pos + 1), Some(d) if d.is_ascii_digit())
                {
                    float = true;
                    text.push(s.bump().unwrap() as char);
                    while matches!(s.peek(), Some(d) if d.is_ascii_digit()) {
                        text.push(s.bump().unwrap() as char);
                    }
                }
                if matches!(s.peek(), Some(b'e' | b'E')) {
                    float = true;
                    text.push(s.bump().unwrap() as char);
                    if matches!(s.peek(), Some(b'+' | b'-')) {
                        text.push(s.bump().unwrap() as char);
                    }
                    if !matches!(s.peek(), Some(d) if d.is_ascii_digit()) {
                        return Err(s.error("exponent".into(), vec!["digit"]));
                    }
                    while matches!(s.peek(), Some(d) if d.is_ascii_digit()) {
                        text.push(s.bump().unwrap() as char);
                    }
                }
                out.push(tok(if float { Kind::Float } else { Kind::Int }, text));
            }
            b if b.is_ascii_alphabetic() || b == b'_' => {
                let mut word = String::new();
                while matches!(s.peek(), Some(w) if w.is_ascii_alphanumeric() || w == b'_') {
                    word.push(s.bump().unwrap() as char);
                }
                match keyword(&word) {
                    Some(kind) => out.push(tok(kind, word)),
                    None => out.push(tok(Kind::Ident, word)),
                }
            }
            other => {
                return Err(s.error(
                    format!("'{}'", other as char),
                    vec!["a token"],
                ))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<Kind> {
        tokenize(text).unwrap().iter().map(|t| t.kind).collect()
    }

    #[test]
    fn lexes_a_match_query() {
        let ks = kinds("MATCH (m:person)-[e:knows*2]->(n) RETURN n LIMIT 10;");
        assert_eq!(
            ks,
            vec![
                Kind::Match,
                Kind::LParen,
                Kind::Ident,
                Kind::Colon,
                Kind::Ident,
                Kind::RParen,
                Kind::Minus,
                Kind::LBracket,
                Kind::Ident,
                Kind::Colon,
                Kind::Ident,
                Kind::Star,
                Kind::Int,
                Kind::RBracket,
                Kind::Arrow,
                Kind::LParen,
                Kind::Ident,
                Kind::RParen,
                Kind::Return,
                Kind::Ident,
                Kind::Limit,
                Kind::Int,
                Kind::Semi,
                Kind::Eof,
            ]
        );
    }

    #[test]
    fn numbers_ranges_and_dots_disambiguate() {
        let ks = kinds("1..3 1.5 n.age 2e-3");
        assert_eq!(
            ks,
            vec![
                Kind::Int,
                Kind::DotDot,
                Kind::Int,
                Kind::Float,
                Kind::Ident,
                Kind::Dot,
                Kind::Ident,
                Kind::Float,
                Kind::Eof
            ]
        );
    }

    #[test]
    fn strings_escape_and_track_position() {
        let ts = tokenize("RETURN 'a\\'b'").unwrap();
        assert_eq!(ts[1].kind, Kind::Str);
        assert_eq!(ts[1].text, "a'b");
        assert_eq!(ts[1].line, 1);
        assert_eq!(ts[1].column, 8);
        assert_eq!(ts[1].offset, 7);
    }

    #[test]
    fn comparison_operators() {
        assert_eq!(
            kinds("= <> < <= > >= <- ->"),
            vec![
                Kind::Eq,
                Kind::Ne,
                Kind::Lt,
                Kind::Le,
                Kind::Gt,
                Kind::Ge,
                Kind::LeftArrow,
                Kind::Arrow,
                Kind::Eof
            ]
        );
    }

    #[test]
    fn unterminated_string_is_a_syntax_error() {
        let err = tokenize("RETURN 'oops").unwrap_err();
        match err {
            EngineError::Syntax(e) => {
                assert_eq!(e.found, "end of input");
                assert_eq!(e.line, 1);
            }
            other => panic!("wrong error {other:?}"),
        }
    }

    #[test]
    fn keywords_are_case_insensitive() {
        assert_eq!(kinds("match RETURN Limit"), kinds("MATCH return limit"));
    }
}
