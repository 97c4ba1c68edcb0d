//! Abstract syntax, parsing, printing, and capture-avoiding substitution for
//! both calculi.
//!
//! One `Term` type serves the call-by-value and call-by-name languages; the
//! `Mode` tag lives on the enclosing program, not on nodes. In CbV mode terms
//! are A-normal forms: applications have value children and `let` sequences
//! computations. In CbN mode `let` is absent and application is unrestricted.
//!
//! Terms compare, hash, and order by α-equivalence (via an internal
//! de Bruijn conversion); the named spelling is preserved for printing.

use crate::lex::{tokenize, SyntaxError, Tok, Tokens};
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Cbv,
    Cbn,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Cbv => write!(f, "cbv"),
            Mode::Cbn => write!(f, "cbn"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Term {
    Var(String),
    Lam(String, Box<Term>),
    App(Box<Term>, Box<Term>),
    Choice(Box<Term>, Box<Term>),
    Let(String, Box<Term>, Box<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn lam(binder: impl Into<String>, body: Term) -> Term {
        Term::Lam(binder.into(), Box::new(body))
    }

    pub fn app(fun: Term, arg: Term) -> Term {
        Term::App(Box::new(fun), Box::new(arg))
    }

    pub fn choice(left: Term, right: Term) -> Term {
        Term::Choice(Box::new(left), Box::new(right))
    }

    pub fn let_in(binder: impl Into<String>, bound: Term, body: Term) -> Term {
        Term::Let(binder.into(), Box::new(bound), Box::new(body))
    }

    /// Values are variables and abstractions; closed values are exactly the
    /// closed normal forms.
    pub fn is_value(&self) -> bool {
        matches!(self, Term::Var(_) | Term::Lam(_, _))
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        fn go(t: &Term, bound: &mut Vec<String>, acc: &mut BTreeSet<String>) {
            match t {
                Term::Var(x) => {
                    if !bound.iter().any(|b| b == x) {
                        acc.insert(x.clone());
                    }
                }
                Term::Lam(x, b) => {
                    bound.push(x.clone());
                    go(b, bound, acc);
                    bound.pop();
                }
                Term::App(f, a) | Term::Choice(f, a) => {
                    go(f, bound, acc);
                    go(a, bound, acc);
                }
                Term::Let(x, n, b) => {
                    go(n, bound, acc);
                    bound.push(x.clone());
                    go(b, bound, acc);
                    bound.pop();
                }
            }
        }
        let mut acc = BTreeSet::new();
        go(self, &mut Vec::new(), &mut acc);
        acc
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// A-normal-form predicate: every application has value children.
    pub fn is_anf(&self) -> bool {
        match self {
            Term::Var(_) => true,
            Term::Lam(_, b) => b.is_anf(),
            Term::App(f, a) => f.is_value() && a.is_value() && f.is_anf() && a.is_anf(),
            Term::Choice(l, r) => l.is_anf() && r.is_anf(),
            Term::Let(_, n, b) => n.is_anf() && b.is_anf(),
        }
    }

    /// Well-formedness for a mode: CbV demands A-normal form, CbN forbids let.
    pub fn is_well_formed(&self, mode: Mode) -> bool {
        match mode {
            Mode::Cbv => self.is_anf(),
            Mode::Cbn => !self.contains_let(),
        }
    }

    fn contains_let(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Lam(_, b) => b.contains_let(),
            Term::App(f, a) | Term::Choice(f, a) => f.contains_let() || a.contains_let(),
            Term::Let(_, _, _) => true,
        }
    }

    /// Capture-avoiding substitution M{replacement/var}. Binders clashing
    /// with the replacement's free variables are renamed; substituting a
    /// closed term therefore never renames anything.
    pub fn substitute(&self, var: &str, replacement: &Term) -> Term {
        let fv = replacement.free_vars();
        self.subst_inner(var, replacement, &fv)
    }

    fn subst_inner(&self, var: &str, rep: &Term, rep_fv: &BTreeSet<String>) -> Term {
        match self {
            Term::Var(x) => {
                if x == var {
                    rep.clone()
                } else {
                    self.clone()
                }
            }
            Term::Lam(x, b) => {
                if x == var {
                    self.clone()
                } else if rep_fv.contains(x) {
                    let fresh = fresh_name(x, &avoid_set(b, rep_fv, var));
                    let renamed = b.substitute(x, &Term::var(fresh.clone()));
                    Term::lam(fresh, renamed.subst_inner(var, rep, rep_fv))
                } else {
                    Term::lam(x.clone(), b.subst_inner(var, rep, rep_fv))
                }
            }
            Term::App(f, a) => Term::app(
                f.subst_inner(var, rep, rep_fv),
                a.subst_inner(var, rep, rep_fv),
            ),
            Term::Choice(l, r) => Term::choice(
                l.subst_inner(var, rep, rep_fv),
                r.subst_inner(var, rep, rep_fv),
            ),
            Term::Let(x, n, b) => {
                let n = n.subst_inner(var, rep, rep_fv);
                if x == var {
                    Term::let_in(x.clone(), n, (**b).clone())
                } else if rep_fv.contains(x) {
                    let fresh = fresh_name(x, &avoid_set(b, rep_fv, var));
                    let renamed = b.substitute(x, &Term::var(fresh.clone()));
                    Term::let_in(fresh, n, renamed.subst_inner(var, rep, rep_fv))
                } else {
                    Term::let_in(x.clone(), n, b.subst_inner(var, rep, rep_fv))
                }
            }
        }
    }

    /// α-equivalence (also the meaning of `==`).
    pub fn alpha_eq(&self, other: &Term) -> bool {
        self.de_bruijn() == other.de_bruijn()
    }

    fn de_bruijn(&self) -> Db {
        fn go(t: &Term, env: &mut Vec<String>) -> Db {
            match t {
                Term::Var(x) => match env.iter().rev().position(|b| b == x) {
                    Some(i) => Db::Bound(i as u32),
                    None => Db::Free(x.clone()),
                },
                Term::Lam(x, b) => {
                    env.push(x.clone());
                    let b = go(b, env);
                    env.pop();
                    Db::Lam(Box::new(b))
                }
                Term::App(f, a) => Db::App(Box::new(go(f, env)), Box::new(go(a, env))),
                Term::Choice(l, r) => Db::Choice(Box::new(go(l, env)), Box::new(go(r, env))),
                Term::Let(x, n, b) => {
                    let n = go(n, env);
                    env.push(x.clone());
                    let b = go(b, env);
                    env.pop();
                    Db::Let(Box::new(n), Box::new(b))
                }
            }
        }
        go(self, &mut Vec::new())
    }
}

fn avoid_set(body: &Term, rep_fv: &BTreeSet<String>, var: &str) -> BTreeSet<String> {
    let mut avoid = body.free_vars();
    avoid.extend(rep_fv.iter().cloned());
    avoid.insert(var.to_string());
    avoid
}

pub(crate) fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    if !avoid.contains(base) {
        return base.to_string();
    }
    let mut i = 1u64;
    loop {
        let candidate = format!("{}{}", base, i);
        if !avoid.contains(&candidate) {
            return candidate;
        }
        i += 1;
    }
}

#[derive(PartialEq, Eq, PartialOrd, Ord, Hash, Clone, Debug)]
enum Db {
    Bound(u32),
    Free(String),
    Lam(Box<Db>),
    App(Box<Db>, Box<Db>),
    Choice(Box<Db>, Box<Db>),
    Let(Box<Db>, Box<Db>),
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        self.alpha_eq(other)
    }
}

impl Eq for Term {}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.de_bruijn().cmp(&other.de_bruijn())
    }
}

impl std::hash::Hash for Term {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.de_bruijn().hash(state);
    }
}

// ---------------------------------------------------------------------------
// Printing
//
// Concrete grammar (CbV):
//   term  ::= value | value value | term (+) term | let <id> = term in term
//   value ::= <id> | \<id>. term
// Application binds tighter than (+), (+) is left-associative, lambda and
// let extend maximally to the right. The printer parenthesizes composite
// children of applications and choices, which round-trips through the
// parser up to α-equivalence.

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn atom(t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            if matches!(t, Term::Var(_)) {
                write!(f, "{}", t)
            } else {
                write!(f, "({})", t)
            }
        }
        match self {
            Term::Var(x) => write!(f, "{}", x),
            Term::Lam(x, b) => write!(f, "\\{}. {}", x, b),
            Term::App(fun, arg) => {
                // keep left-nested application spines flat (CbN chains)
                if matches!(**fun, Term::App(_, _)) {
                    write!(f, "{} ", fun)?;
                } else {
                    atom(fun, f)?;
                    write!(f, " ")?;
                }
                atom(arg, f)
            }
            Term::Choice(l, r) => {
                atom(l, f)?;
                write!(f, " (+) ")?;
                atom(r, f)
            }
            Term::Let(x, n, b) => write!(f, "let {} = {} in {}", x, n, b),
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing

const RESERVED_PREFIX: &str = "_g";

pub(crate) fn parse_term_tokens(toks: &mut Tokens, mode: Mode) -> Result<Term, SyntaxError> {
    parse_term_inner(toks, mode)
}

fn starts_atom(toks: &Tokens) -> bool {
    match toks.peek() {
        Some(Tok::Ident(s)) => s != "let" && s != "in",
        Some(Tok::Lambda) => true,
        // `(->` opens an arrow type, not a parenthesized term; this keeps
        // the end of an embedded term unambiguous in derivation files
        Some(Tok::LParen) => toks.peek2() != Some(&Tok::Arrow),
        _ => false,
    }
}

fn parse_term_inner(toks: &mut Tokens, mode: Mode) -> Result<Term, SyntaxError> {
    if let Some(Tok::Lambda) = toks.peek() {
        return parse_lambda(toks, mode);
    }
    if let Some(Tok::Ident(s)) = toks.peek() {
        if s == "let" {
            return parse_let(toks, mode);
        }
    }
    let mut t = parse_app(toks, mode)?;
    while let Some(Tok::Oplus) = toks.peek() {
        toks.next();
        let rhs = match toks.peek() {
            Some(Tok::Lambda) => parse_term_inner(toks, mode)?,
            Some(Tok::Ident(s)) if s == "let" => parse_term_inner(toks, mode)?,
            _ => parse_app(toks, mode)?,
        };
        t = Term::choice(t, rhs);
    }
    Ok(t)
}

fn parse_lambda(toks: &mut Tokens, mode: Mode) -> Result<Term, SyntaxError> {
    toks.expect(&Tok::Lambda)?;
    let binder = parse_binder(toks)?;
    toks.expect(&Tok::Dot)?;
    let body = parse_term_inner(toks, mode)?;
    Ok(Term::lam(binder, body))
}

fn parse_let(toks: &mut Tokens, mode: Mode) -> Result<Term, SyntaxError> {
    if mode == Mode::Cbn {
        return Err(toks.error("`let` is not part of the cbn grammar"));
    }
    toks.next(); // `let`
    let binder = parse_binder(toks)?;
    toks.expect(&Tok::Eq)?;
    let bound = parse_term_inner(toks, mode)?;
    match toks.peek() {
        Some(Tok::Ident(s)) if s == "in" => {
            toks.next();
        }
        _ => return Err(toks.error("expected `in`")),
    }
    let body = parse_term_inner(toks, mode)?;
    Ok(Term::let_in(binder, bound, body))
}

fn parse_binder(toks: &mut Tokens) -> Result<String, SyntaxError> {
    let here = toks.error("");
    let name = toks.expect_ident()?;
    if name == "let" || name == "in" {
        return Err(SyntaxError {
            message: format!("`{}` is a reserved word", name),
            ..here
        });
    }
    if name.starts_with(RESERVED_PREFIX) {
        return Err(SyntaxError {
            message: format!(
                "identifier `{}` uses the reserved `{}` prefix",
                name, RESERVED_PREFIX
            ),
            ..here
        });
    }
    Ok(name)
}

fn parse_app(toks: &mut Tokens, mode: Mode) -> Result<Term, SyntaxError> {
    let mut t = parse_atom(toks, mode)?;
    loop {
        if let Some(Tok::Lambda) = toks.peek() {
            // a trailing lambda argument extends maximally right
            let arg = parse_lambda(toks, mode)?;
            t = Term::app(t, arg);
            return Ok(t);
        }
        if starts_atom(toks) {
            let arg = parse_atom(toks, mode)?;
            t = Term::app(t, arg);
        } else {
            return Ok(t);
        }
    }
}

fn parse_atom(toks: &mut Tokens, mode: Mode) -> Result<Term, SyntaxError> {
    match toks.peek() {
        Some(Tok::Ident(s)) if s != "let" && s != "in" => {
            let name = parse_binder(toks)?;
            Ok(Term::var(name))
        }
        Some(Tok::LParen) => {
            toks.next();
            let t = parse_term_inner(toks, mode)?;
            toks.expect(&Tok::RParen)?;
            Ok(t)
        }
        Some(Tok::Lambda) => parse_lambda(toks, mode),
        Some(t) => Err(toks.error(format!("expected a term, found `{}`", t))),
        None => Err(toks.error("expected a term, found end of input")),
    }
}

/// Parses `source` under the given mode.
///
/// In CbV mode, applications with non-value children are rejected unless
/// `desugar` is set, in which case each offending `M N` is rewritten to
/// `let x = M in let y = N in x y` with fresh `_g<n>` names.
pub fn parse(source: &str, mode: Mode, desugar: bool) -> Result<Term, SyntaxError> {
    let mut toks = tokenize(source)?;
    let t = parse_term_inner(&mut toks, mode)?;
    if !toks.at_end() {
        return Err(toks.error(format!(
            "unexpected trailing `{}`",
            toks.peek().unwrap()
        )));
    }
    finish_for_mode(t, mode, desugar, &toks)
}

fn finish_for_mode(
    t: Term,
    mode: Mode,
    desugar: bool,
    toks: &Tokens,
) -> Result<Term, SyntaxError> {
    match mode {
        Mode::Cbn => Ok(t),
        Mode::Cbv => {
            if t.is_anf() {
                Ok(t)
            } else if desugar {
                Ok(desugar_cbv(&t))
            } else {
                Err(toks.error("non-value application in CbV mode (try --desugar)"))
            }
        }
    }
}

/// Rewrites every application with a non-value child to
/// `let x = M in let y = N in x y`, bottom-up, with deterministic `_g<n>`
/// names. The result is always in A-normal form.
pub fn desugar_cbv(t: &Term) -> Term {
    fn go(t: &Term, counter: &mut u64) -> Term {
        match t {
            Term::Var(_) => t.clone(),
            Term::Lam(x, b) => Term::lam(x.clone(), go(b, counter)),
            Term::Choice(l, r) => Term::choice(go(l, counter), go(r, counter)),
            Term::Let(x, n, b) => Term::let_in(x.clone(), go(n, counter), go(b, counter)),
            Term::App(f, a) => {
                let f = go(f, counter);
                let a = go(a, counter);
                if f.is_value() && a.is_value() {
                    Term::app(f, a)
                } else {
                    let xf = format!("{}{}", RESERVED_PREFIX, *counter);
                    let xa = format!("{}{}", RESERVED_PREFIX, *counter + 1);
                    *counter += 2;
                    Term::let_in(
                        xf.clone(),
                        f,
                        Term::let_in(
                            xa.clone(),
                            a,
                            Term::app(Term::var(xf), Term::var(xa)),
                        ),
                    )
                }
            }
        }
    }
    go(t, &mut 0)
}
