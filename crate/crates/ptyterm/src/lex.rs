//! Shared token stream for the term grammar, the type syntax, and the
//! derivation file format. All three sub-languages draw from one token set,
//! so a single lexer keeps positions consistent across embedded syntaxes.

use crate::multidist::Rat;
use num_bigint::BigInt;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    LParen,
    RParen,
    LBrack,
    RBrack,
    LAngle,
    RAngle,
    Comma,
    Dot,
    Lambda,
    Eq,
    Arrow,
    Star,
    Oplus,
    Num(Rat),
    Ident(String),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
            Tok::LBrack => write!(f, "["),
            Tok::RBrack => write!(f, "]"),
            Tok::LAngle => write!(f, "<"),
            Tok::RAngle => write!(f, ">"),
            Tok::Comma => write!(f, ","),
            Tok::Dot => write!(f, "."),
            Tok::Lambda => write!(f, "\\"),
            Tok::Eq => write!(f, "="),
            Tok::Arrow => write!(f, "->"),
            Tok::Star => write!(f, "*"),
            Tok::Oplus => write!(f, "(+)"),
            Tok::Num(r) => write!(f, "{}", crate::multidist::fmt_rat(r)),
            Tok::Ident(s) => write!(f, "{}", s),
        }
    }
}

/// A lex or parse failure, carrying a 1-based line/column position.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for SyntaxError {}

pub(crate) struct Tokens {
    toks: Vec<(Tok, usize, usize)>, // token, line, col
    pos: usize,
    end_line: usize,
    end_col: usize,
}

impl Tokens {
    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _, _)| t)
    }

    pub fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|(t, _, _)| t)
    }

    pub fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub fn here(&self) -> (usize, usize) {
        match self.toks.get(self.pos) {
            Some((_, l, c)) => (*l, *c),
            None => (self.end_line, self.end_col),
        }
    }

    pub fn error(&self, message: impl Into<String>) -> SyntaxError {
        let (line, col) = self.here();
        SyntaxError {
            line,
            col,
            message: message.into(),
        }
    }

    pub fn expect(&mut self, want: &Tok) -> Result<(), SyntaxError> {
        match self.peek() {
            Some(t) if t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.error(format!("expected `{}`, found `{}`", want, t))),
            None => Err(self.error(format!("expected `{}`, found end of input", want))),
        }
    }

    pub fn expect_ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek() {
            Some(Tok::Ident(_)) => match self.next() {
                Some(Tok::Ident(s)) => Ok(s),
                _ => unreachable!(),
            },
            Some(t) => Err(self.error(format!("expected identifier, found `{}`", t))),
            None => Err(self.error("expected identifier, found end of input")),
        }
    }

    pub fn expect_num(&mut self) -> Result<Rat, SyntaxError> {
        match self.peek() {
            Some(Tok::Num(_)) => match self.next() {
                Some(Tok::Num(r)) => Ok(r),
                _ => unreachable!(),
            },
            Some(t) => Err(self.error(format!("expected number, found `{}`", t))),
            None => Err(self.error("expected number, found end of input")),
        }
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_cont(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

pub(crate) fn tokenize(src: &str) -> Result<Tokens, SyntaxError> {
    let mut toks = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = src.chars().peekable();
    loop {
        let c = match chars.peek() {
            None => break,
            Some(c) => *c,
        };
        let (tl, tc) = (line, col);
        let advance = |chars: &mut std::iter::Peekable<std::str::Chars>,
                           line: &mut usize,
                           col: &mut usize| {
            let c = chars.next().unwrap();
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            c
        };
        if c.is_whitespace() {
            advance(&mut chars, &mut line, &mut col);
            continue;
        }
        if c == ';' {
            // comment to end of line (derivation files)
            while let Some(&c) = chars.peek() {
                advance(&mut chars, &mut line, &mut col);
                if c == '\n' {
                    break;
                }
            }
            continue;
        }
        let tok = match c {
            '(' => {
                advance(&mut chars, &mut line, &mut col);
                // `(+)` is a single operator token
                if chars.peek() == Some(&'+') {
                    let mut look = chars.clone();
                    look.next();
                    if look.peek() == Some(&')') {
                        advance(&mut chars, &mut line, &mut col);
                        advance(&mut chars, &mut line, &mut col);
                        Tok::Oplus
                    } else {
                        Tok::LParen
                    }
                } else {
                    Tok::LParen
                }
            }
            ')' => {
                advance(&mut chars, &mut line, &mut col);
                Tok::RParen
            }
            '[' => {
                advance(&mut chars, &mut line, &mut col);
                Tok::LBrack
            }
            ']' => {
                advance(&mut chars, &mut line, &mut col);
                Tok::RBrack
            }
            '<' => {
                advance(&mut chars, &mut line, &mut col);
                Tok::LAngle
            }
            '>' => {
                advance(&mut chars, &mut line, &mut col);
                Tok::RAngle
            }
            ',' => {
                advance(&mut chars, &mut line, &mut col);
                Tok::Comma
            }
            '.' => {
                advance(&mut chars, &mut line, &mut col);
                Tok::Dot
            }
            '\\' | 'λ' => {
                advance(&mut chars, &mut line, &mut col);
                Tok::Lambda
            }
            '=' => {
                advance(&mut chars, &mut line, &mut col);
                Tok::Eq
            }
            '*' => {
                advance(&mut chars, &mut line, &mut col);
                Tok::Star
            }
            '⊕' => {
                advance(&mut chars, &mut line, &mut col);
                Tok::Oplus
            }
            '-' => {
                advance(&mut chars, &mut line, &mut col);
                if chars.peek() == Some(&'>') {
                    advance(&mut chars, &mut line, &mut col);
                    Tok::Arrow
                } else {
                    return Err(SyntaxError {
                        line: tl,
                        col: tc,
                        message: "stray `-` (expected `->`)".into(),
                    });
                }
            }
            c if c.is_ascii_digit() => {
                let mut num = String::new();
                while chars.peek().map_or(false, |c| c.is_ascii_digit()) {
                    num.push(advance(&mut chars, &mut line, &mut col));
                }
                if chars.peek() == Some(&'/') {
                    advance(&mut chars, &mut line, &mut col);
                    let mut den = String::new();
                    while chars.peek().map_or(false, |c| c.is_ascii_digit()) {
                        den.push(advance(&mut chars, &mut line, &mut col));
                    }
                    if den.is_empty() {
                        return Err(SyntaxError {
                            line: tl,
                            col: tc,
                            message: "malformed rational: missing denominator".into(),
                        });
                    }
                    let n: BigInt = num.parse().unwrap();
                    let d: BigInt = den.parse().unwrap();
                    if d == BigInt::from(0) {
                        return Err(SyntaxError {
                            line: tl,
                            col: tc,
                            message: "malformed rational: zero denominator".into(),
                        });
                    }
                    Tok::Num(Rat::new(n, d))
                } else {
                    let n: BigInt = num.parse().unwrap();
                    Tok::Num(Rat::from_integer(n))
                }
            }
            c if is_ident_start(c) => {
                let mut name = String::new();
                while chars.peek().map_or(false, |c| is_ident_cont(*c)) {
                    name.push(advance(&mut chars, &mut line, &mut col));
                }
                Tok::Ident(name)
            }
            other => {
                return Err(SyntaxError {
                    line: tl,
                    col: tc,
                    message: format!("unexpected character `{}`", other),
                });
            }
        };
        toks.push((tok, tl, tc));
    }
    Ok(Tokens {
        toks,
        pos: 0,
        end_line: line,
        end_col: col,
    })
}
