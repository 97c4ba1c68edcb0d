//! Named corpus of example terms and the Scott-encoding ingredients used by
//! tests and the CLI.
//!
//! Numerals use the Scott scheme over a unary alphabet: zero is the
//! empty-string encoding λx1.λy.y and n+1 is λx1.λy.x1 n̄. The successor
//! combinator and the sugar `succ(M) = let z = M in SUCC z` follow that
//! choice, so the step-count constant for `succ(n̄) →* (n+1)̄` is a property
//! of this encoding and is measured by the tests rather than assumed.

use crate::syntax::{desugar_cbv, Mode, Term};
use std::fmt;

/// Which calculi a registry entry is grammatical in, as stored. Terms marked
/// `CbnOnly` contain non-ANF applications and need `desugar_cbv` before CbV
/// use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSpec {
    Both,
    CbvOnly,
    CbnOnly,
}

impl fmt::Display for ModeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeSpec::Both => write!(f, "cbv|cbn"),
            ModeSpec::CbvOnly => write!(f, "cbv"),
            ModeSpec::CbnOnly => write!(f, "cbn (desugar for cbv)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NamedTerm {
    pub name: &'static str,
    pub term: Term,
    pub mode: ModeSpec,
    pub notes: &'static str,
}

impl NamedTerm {
    /// The term adjusted for `mode`: CbN-only entries are desugared for CbV.
    pub fn term_for(&self, mode: Mode) -> Option<Term> {
        match (self.mode, mode) {
            (ModeSpec::Both, _) => Some(self.term.clone()),
            (ModeSpec::CbvOnly, Mode::Cbv) => Some(self.term.clone()),
            (ModeSpec::CbvOnly, Mode::Cbn) => None,
            (ModeSpec::CbnOnly, Mode::Cbn) => Some(self.term.clone()),
            (ModeSpec::CbnOnly, Mode::Cbv) => Some(desugar_cbv(&self.term)),
        }
    }
}

pub fn identity() -> Term {
    Term::lam("x", Term::var("x"))
}

pub fn delta() -> Term {
    Term::lam("x", Term::app(Term::var("x"), Term::var("x")))
}

/// ΔΔ, the paradigmatic diverging term.
pub fn omega() -> Term {
    Term::app(delta(), delta())
}

/// D = λx.(xx ⊕ I).
pub fn d_term() -> Term {
    Term::lam(
        "x",
        Term::choice(
            Term::app(Term::var("x"), Term::var("x")),
            Term::lam("y", Term::var("y")),
        ),
    )
}

/// The running example D D.
pub fn dd() -> Term {
    Term::app(d_term(), d_term())
}

/// I ⊕ ΔΔ: almost surely terminating with infinite expected runtime.
pub fn i_plus_omega() -> Term {
    Term::choice(identity(), omega())
}

/// Scott numeral over the unary alphabet: 0̄ = λx1.λy.y, (n+1)̄ = λx1.λy.x1 n̄.
pub fn scott_numeral(n: u64) -> Term {
    let mut t = Term::lam("x1", Term::lam("y", Term::var("y")));
    for _ in 0..n {
        t = Term::lam("x1", Term::lam("y", Term::app(Term::var("x1"), t)));
    }
    t
}

/// Tuple of values encoded as λx.x V₁ ⋯ Vₙ. The application spine is raw;
/// desugar for CbV.
pub fn scott_tuple(values: &[Term]) -> Term {
    let mut body = Term::var("x");
    for v in values {
        body = Term::app(body, v.clone());
    }
    Term::lam("x", body)
}

/// SUCC = λn.λx1.λy.x1 n, matching the unary Scott scheme.
pub fn succ_term() -> Term {
    Term::lam(
        "n",
        Term::lam("x1", Term::lam("y", Term::app(Term::var("x1"), Term::var("n")))),
    )
}

/// succ(M): sugar for `let z = M in SUCC z`.
pub fn succ_wrapper(t: Term) -> Term {
    Term::let_in("z", t, Term::app(succ_term(), Term::var("z")))
}

/// C = λx.(succ(xx) ⊕ 0̄).
pub fn c_term() -> Term {
    Term::lam(
        "x",
        Term::choice(
            succ_wrapper(Term::app(Term::var("x"), Term::var("x"))),
            scott_numeral(0),
        ),
    )
}

pub fn cc() -> Term {
    Term::app(c_term(), c_term())
}

/// The fixed-point combinator Z = MM with M = λx.λy.y(λz.xxyz), kept with
/// raw application spines (CPS sub-language); desugar for CbV, where
/// ZV rewrites to V(λz.ZVz) in a constant number of steps.
pub fn fixpoint_z() -> Term {
    let m = Term::lam(
        "x",
        Term::lam(
            "y",
            Term::app(
                Term::var("y"),
                Term::lam(
                    "z",
                    Term::app(
                        Term::app(
                            Term::app(Term::var("x"), Term::var("x")),
                            Term::var("y"),
                        ),
                        Term::var("z"),
                    ),
                ),
            ),
        ),
    );
    Term::app(m.clone(), m)
}

pub fn registry() -> Vec<NamedTerm> {
    vec![
        NamedTerm {
            name: "I",
            term: identity(),
            mode: ModeSpec::Both,
            notes: "the identity",
        },
        NamedTerm {
            name: "delta",
            term: delta(),
            mode: ModeSpec::Both,
            notes: "self application",
        },
        NamedTerm {
            name: "omega",
            term: omega(),
            mode: ModeSpec::Both,
            notes: "diverging term, P^k = 0 and eT^k = k",
        },
        NamedTerm {
            name: "D",
            term: d_term(),
            mode: ModeSpec::Both,
            notes: "body of the running example",
        },
        NamedTerm {
            name: "DD",
            term: dd(),
            mode: ModeSpec::Both,
            notes: "running example, terminates with probability 1 in expected 4 steps",
        },
        NamedTerm {
            name: "iomega",
            term: i_plus_omega(),
            mode: ModeSpec::Both,
            notes: "AST but not PAST: eT^n = 1 + (n-1)/2",
        },
        NamedTerm {
            name: "C",
            term: c_term(),
            mode: ModeSpec::CbvOnly,
            notes: "numeral generator body",
        },
        NamedTerm {
            name: "CC",
            term: cc(),
            mode: ModeSpec::CbvOnly,
            notes: "reaches every numeral n with probability 1/2^(n+1)",
        },
        NamedTerm {
            name: "SUCC",
            term: succ_term(),
            mode: ModeSpec::Both,
            notes: "Scott-numeral successor",
        },
        NamedTerm {
            name: "Z",
            term: fixpoint_z(),
            mode: ModeSpec::CbnOnly,
            notes: "fixed-point combinator, ZV unfolds to V(\\z.ZVz)",
        },
        NamedTerm {
            name: "scott0",
            term: scott_numeral(0),
            mode: ModeSpec::Both,
            notes: "Scott numeral 0",
        },
        NamedTerm {
            name: "scott1",
            term: scott_numeral(1),
            mode: ModeSpec::Both,
            notes: "Scott numeral 1",
        },
        NamedTerm {
            name: "scott2",
            term: scott_numeral(2),
            mode: ModeSpec::Both,
            notes: "Scott numeral 2",
        },
    ]
}

pub fn lookup(name: &str) -> Option<NamedTerm> {
    registry().into_iter().find(|e| e.name == name)
}
