//! Derivation trees, the rule-by-rule checker for the CbV and CbN type
//! systems, weight and size computation, and the s-expression file format.
//!
//! A derivation node stores its full conclusion judgment. The checker trusts
//! none of it: every context, weight, and type is recomputed bottom-up from
//! the premises and compared against what the node claims, so a file cannot
//! smuggle in a forged weight. Stored weights are optional in files and are
//! recomputed when absent.
//!
//! Rule-specific payloads: `Bang` nodes carry their scale-factor list, and
//! `Let` (CbV) / `App` (CbN) nodes carry an association list mapping premise
//! order to the entries of the relevant type distribution. The association
//! is what keeps checking unambiguous when two entries carry equal
//! probability and type but different premise derivations.

use crate::lex::{tokenize, SyntaxError, Tok, Tokens};
use crate::multidist::{fmt_rat, is_probability, Rat};
use crate::syntax::{parse_term_tokens, Mode, Term};
use crate::types::{dist_union, inter_union, scale_dist, Layer, TypeExpr, TypingContext};
use num_traits::{One, Signed, Zero};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleName {
    Var,
    Zero,
    App,
    Choice,
    Lam,
    Let,
    Val,
    Bang,
}

impl RuleName {
    pub fn as_str(&self) -> &'static str {
        match self {
            RuleName::Var => "var",
            RuleName::Zero => "zero",
            RuleName::App => "app",
            RuleName::Choice => "choice",
            RuleName::Lam => "lam",
            RuleName::Let => "let",
            RuleName::Val => "val",
            RuleName::Bang => "bang",
        }
    }

    fn parse(s: &str) -> Option<RuleName> {
        Some(match s {
            "var" => RuleName::Var,
            "zero" => RuleName::Zero,
            "app" => RuleName::App,
            "choice" => RuleName::Choice,
            "lam" => RuleName::Lam,
            "let" => RuleName::Let,
            "val" => RuleName::Val,
            "bang" => RuleName::Bang,
            _ => return None,
        })
    }
}

impl fmt::Display for RuleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

/// Γ ⊢ʷ M : τ, with τ one of arrow / intersection / distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Judgment {
    pub ctx: TypingContext,
    pub weight: Rat,
    pub term: Term,
    pub rhs: TypeExpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    pub rule: RuleName,
    pub conclusion: Judgment,
    pub premises: Vec<Derivation>,
    /// Bang nodes: one scale factor per premise.
    pub scales: Vec<Rat>,
    /// Let (CbV) and App (CbN): premise j corresponds to entry `assoc[j]`
    /// of the governing type distribution.
    pub assoc: Vec<usize>,
}

/// A checker diagnostic, naming the failing rule and the path from the root
/// (premise indices).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckError {
    pub path: Vec<usize>,
    pub rule: RuleName,
    pub message: String,
}

impl CheckError {
    fn at(path: &[usize], rule: RuleName, message: impl Into<String>) -> Self {
        CheckError {
            path: path.to_vec(),
            rule,
            message: message.into(),
        }
    }
}

impl fmt::Display for CheckError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at ")?;
        if self.path.is_empty() {
            write!(f, "root")?;
        } else {
            for (i, ix) in self.path.iter().enumerate() {
                if i > 0 {
                    write!(f, ".")?;
                }
                write!(f, "{}", ix)?;
            }
        }
        write!(f, " (rule {}): {}", self.rule, self.message)
    }
}

impl std::error::Error for CheckError {}

// ---------------------------------------------------------------------------
// Rule equations

fn half() -> Rat {
    Rat::new(1.into(), 2.into())
}

/// Recomputes the conclusion of one rule application from its premises.
/// `stored_rhs` is consulted only where the rule does not determine the
/// type (the Var leaf).
fn rebuild(
    rule: RuleName,
    mode: Mode,
    term: &Term,
    stored_rhs: &TypeExpr,
    premises: &[&Judgment],
    scales: &[Rat],
    assoc: &[usize],
) -> Result<Judgment, String> {
    let arity = |n: usize| -> Result<(), String> {
        if premises.len() == n {
            Ok(())
        } else {
            Err(format!(
                "expected {} premise(s), found {}",
                n,
                premises.len()
            ))
        }
    };
    let no_payload = |has_scales: bool, has_assoc: bool| -> Result<(), String> {
        if !has_scales && !scales.is_empty() {
            return Err("unexpected scale factors on this rule".into());
        }
        if !has_assoc && !assoc.is_empty() {
            return Err("unexpected assoc on this rule".into());
        }
        Ok(())
    };
    match rule {
        RuleName::Var => {
            arity(0)?;
            no_payload(false, false)?;
            let x = match term {
                Term::Var(x) => x,
                _ => return Err("var rule subject must be a variable".into()),
            };
            match mode {
                Mode::Cbv => {
                    if stored_rhs.layer() != Layer::Inter {
                        return Err("cbv var rule types a variable with an intersection".into());
                    }
                    Ok(Judgment {
                        ctx: TypingContext::singleton(x.clone(), stored_rhs.clone()),
                        weight: Rat::zero(),
                        term: term.clone(),
                        rhs: stored_rhs.clone(),
                    })
                }
                Mode::Cbn => {
                    if stored_rhs.layer() != Layer::Dist {
                        return Err(
                            "cbn var rule types a variable with a type distribution".into()
                        );
                    }
                    Ok(Judgment {
                        ctx: TypingContext::singleton(
                            x.clone(),
                            TypeExpr::inter_singleton(stored_rhs.clone()),
                        ),
                        weight: Rat::zero(),
                        term: term.clone(),
                        rhs: stored_rhs.clone(),
                    })
                }
            }
        }
        RuleName::Zero => {
            arity(0)?;
            no_payload(false, false)?;
            Ok(Judgment {
                ctx: TypingContext::empty(),
                weight: Rat::zero(),
                term: term.clone(),
                rhs: TypeExpr::null_dist(),
            })
        }
        RuleName::Val => match mode {
            Mode::Cbv => {
                arity(1)?;
                no_payload(false, false)?;
                let p = premises[0];
                if !term.is_value() {
                    return Err("val rule applies to values only".into());
                }
                if p.term != *term {
                    return Err("val premise subject differs from conclusion".into());
                }
                if p.rhs.layer() != Layer::Inter {
                    return Err("val premise must type the value with an intersection".into());
                }
                Ok(Judgment {
                    ctx: p.ctx.clone(),
                    weight: p.weight.clone(),
                    term: term.clone(),
                    rhs: TypeExpr::dist_singleton(p.rhs.clone()),
                })
            }
            Mode::Cbn => {
                arity(0)?;
                no_payload(false, false)?;
                if !matches!(term, Term::Lam(_, _)) {
                    return Err("cbn val axiom applies to abstractions only".into());
                }
                Ok(Judgment {
                    ctx: TypingContext::empty(),
                    weight: Rat::zero(),
                    term: term.clone(),
                    rhs: TypeExpr::dist_singleton(TypeExpr::Star),
                })
            }
        },
        RuleName::Lam => {
            arity(1)?;
            no_payload(false, false)?;
            let (x, body) = match term {
                Term::Lam(x, b) => (x, &**b),
                _ => return Err("lam rule subject must be an abstraction".into()),
            };
            let p = premises[0];
            if p.term != *body {
                return Err("lam premise subject is not the abstraction body".into());
            }
            if p.rhs.layer() != Layer::Dist {
                return Err("lam premise must conclude a type distribution".into());
            }
            let mut ctx = p.ctx.clone();
            let dom = ctx.remove(x);
            let arrow = TypeExpr::arrow(dom, p.rhs.clone());
            let rhs = match mode {
                Mode::Cbv => arrow,
                Mode::Cbn => TypeExpr::dist_singleton(arrow),
            };
            Ok(Judgment {
                ctx,
                weight: p.weight.clone() + Rat::one(),
                term: term.clone(),
                rhs,
            })
        }
        RuleName::Choice => {
            arity(2)?;
            no_payload(false, false)?;
            let (l, r) = match term {
                Term::Choice(l, r) => (&**l, &**r),
                _ => return Err("choice rule subject must be a probabilistic sum".into()),
            };
            let (pl, pr) = (premises[0], premises[1]);
            if pl.term != *l || pr.term != *r {
                return Err("choice premises do not match the two branches".into());
            }
            if pl.rhs.layer() != Layer::Dist || pr.rhs.layer() != Layer::Dist {
                return Err("choice premises must conclude type distributions".into());
            }
            let h = half();
            let ctx = pl
                .ctx
                .scale(&h)
                .map_err(|e| e.to_string())?
                .union(&pr.ctx.scale(&h).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            let rhs = dist_union(
                &scale_dist(&h, &pl.rhs).map_err(|e| e.to_string())?,
                &scale_dist(&h, &pr.rhs).map_err(|e| e.to_string())?,
            )
            .map_err(|e| e.to_string())?;
            let weight = &h * &pl.weight + &h * &pr.weight + Rat::one();
            Ok(Judgment {
                ctx,
                weight,
                term: term.clone(),
                rhs,
            })
        }
        RuleName::App => match mode {
            Mode::Cbv => {
                arity(2)?;
                no_payload(false, false)?;
                let (fun, arg) = match term {
                    Term::App(f, a) => (&**f, &**a),
                    _ => return Err("app rule subject must be an application".into()),
                };
                if !fun.is_value() || !arg.is_value() {
                    return Err("cbv applications have value children".into());
                }
                let (pf, pa) = (premises[0], premises[1]);
                if pf.term != *fun || pa.term != *arg {
                    return Err("app premises do not match function and argument".into());
                }
                // the function premise types V with the singleton
                // intersection [1·(𝔪A → 𝔟)]
                let entries = pf.rhs.inter_entries().map_err(|_| {
                    "app function premise must conclude an intersection".to_string()
                })?;
                if entries.len() != 1 || !entries[0].0.is_one() {
                    return Err(format!(
                        "app function premise must be a singleton intersection with scale 1, found {}",
                        pf.rhs
                    ));
                }
                let (dom, cod) = match &entries[0].1 {
                    TypeExpr::Arrow(d, c) => ((**d).clone(), (**c).clone()),
                    other => {
                        return Err(format!(
                            "app function premise element must be an arrow, found {}",
                            other
                        ))
                    }
                };
                if pa.rhs != dom {
                    return Err(format!(
                        "argument type {} does not match the arrow domain {}",
                        pa.rhs, dom
                    ));
                }
                Ok(Judgment {
                    ctx: pf.ctx.union(&pa.ctx).map_err(|e| e.to_string())?,
                    weight: pf.weight.clone() + pa.weight.clone(),
                    term: term.clone(),
                    rhs: cod,
                })
            }
            Mode::Cbn => {
                let (fun, arg) = match term {
                    Term::App(f, a) => (&**f, &**a),
                    _ => return Err("app rule subject must be an application".into()),
                };
                if premises.is_empty() {
                    return Err("cbn app rule needs the head premise".into());
                }
                no_payload(false, true)?;
                let head = premises[0];
                let args = &premises[1..];
                if head.term != *fun {
                    return Err("cbn app head premise does not match the head".into());
                }
                let entries = head.rhs.dist_entries().map_err(|_| {
                    "cbn app head premise must conclude a type distribution".to_string()
                })?;
                if args.len() != entries.len() {
                    return Err(format!(
                        "cbn app has {} argument premise(s) for {} head entries",
                        args.len(),
                        entries.len()
                    ));
                }
                check_assoc(assoc, entries.len())?;
                let mut ctx = head.ctx.clone();
                let mut weight = head.weight.clone();
                let mut rhs = TypeExpr::null_dist();
                for (j, pj) in args.iter().enumerate() {
                    let (p, entry) = &entries[assoc[j]];
                    let (dom, cod) = match entry {
                        TypeExpr::Arrow(d, c) => (&**d, &**c),
                        other => {
                            return Err(format!(
                                "cbn app head entry must be a true arrow, found {}",
                                other
                            ))
                        }
                    };
                    if pj.term != *arg {
                        return Err(
                            "cbn app argument premise does not match the argument".into()
                        );
                    }
                    if pj.rhs != *dom {
                        return Err(format!(
                            "argument type {} does not match the arrow domain {}",
                            pj.rhs, dom
                        ));
                    }
                    ctx = ctx
                        .union(&pj.ctx.scale(p).map_err(|e| e.to_string())?)
                        .map_err(|e| e.to_string())?;
                    weight += p * &pj.weight;
                    rhs = dist_union(&rhs, &scale_dist(p, cod).map_err(|e| e.to_string())?)
                        .map_err(|e| e.to_string())?;
                }
                Ok(Judgment {
                    ctx,
                    weight,
                    term: term.clone(),
                    rhs,
                })
            }
        },
        RuleName::Let => {
            if mode == Mode::Cbn {
                return Err("the let rule is cbv-only".into());
            }
            let (x, bound, body) = match term {
                Term::Let(x, n, b) => (x, &**n, &**b),
                _ => return Err("let rule subject must be a let".into()),
            };
            if premises.is_empty() {
                return Err("let rule needs the bound-term premise".into());
            }
            no_payload(false, true)?;
            let n_prem = premises[premises.len() - 1];
            let m_prems = &premises[..premises.len() - 1];
            if n_prem.term != *bound {
                return Err("let bound-term premise does not match the bound term".into());
            }
            let entries = n_prem.rhs.dist_entries().map_err(|_| {
                "let bound-term premise must conclude a type distribution".to_string()
            })?;
            if m_prems.len() != entries.len() {
                return Err(format!(
                    "let has {} body premise(s) for {} distribution entries",
                    m_prems.len(),
                    entries.len()
                ));
            }
            check_assoc(assoc, entries.len())?;
            let mut ctx = n_prem.ctx.clone();
            let mut weight = n_prem.weight.clone() + Rat::one();
            let mut rhs = TypeExpr::null_dist();
            for (j, pj) in m_prems.iter().enumerate() {
                let (p, inter) = &entries[assoc[j]];
                if pj.term != *body {
                    return Err("let body premise does not match the body".into());
                }
                if pj.rhs.layer() != Layer::Dist {
                    return Err("let body premise must conclude a type distribution".into());
                }
                let mut pj_ctx = pj.ctx.clone();
                let x_type = pj_ctx.remove(x);
                if x_type != *inter {
                    return Err(format!(
                        "let binder {} is typed {} in premise {} but the matched entry carries {}",
                        x, x_type, j, inter
                    ));
                }
                ctx = ctx
                    .union(&pj_ctx.scale(p).map_err(|e| e.to_string())?)
                    .map_err(|e| e.to_string())?;
                weight += p * &pj.weight;
                rhs = dist_union(&rhs, &scale_dist(p, &pj.rhs).map_err(|e| e.to_string())?)
                    .map_err(|e| e.to_string())?;
            }
            Ok(Judgment {
                ctx,
                weight,
                term: term.clone(),
                rhs,
            })
        }
        RuleName::Bang => {
            no_payload(true, false)?;
            if mode == Mode::Cbv && !term.is_value() {
                return Err("the cbv bang rule applies to values only".into());
            }
            if scales.len() != premises.len() {
                return Err(format!(
                    "bang has {} scale factor(s) for {} premise(s)",
                    scales.len(),
                    premises.len()
                ));
            }
            let elem_layer = match mode {
                Mode::Cbv => Layer::Arrow,
                Mode::Cbn => Layer::Dist,
            };
            let mut ctx = TypingContext::empty();
            let mut weight = Rat::zero();
            let mut entries = Vec::with_capacity(premises.len());
            for (q, p) in scales.iter().zip(premises.iter()) {
                if !is_probability(q) {
                    return Err(format!("scale factor {} outside (0,1]", fmt_rat(q)));
                }
                if p.term != *term {
                    return Err("bang premise subject differs from conclusion".into());
                }
                if p.rhs.layer() != elem_layer {
                    return Err(match elem_layer {
                        Layer::Arrow => "cbv bang premises must conclude arrow types".into(),
                        _ => "cbn bang premises must conclude type distributions".to_string(),
                    });
                }
                ctx = ctx
                    .union(&p.ctx.scale(q).map_err(|e| e.to_string())?)
                    .map_err(|e| e.to_string())?;
                weight += q * &p.weight;
                entries.push((q.clone(), p.rhs.clone()));
            }
            Ok(Judgment {
                ctx,
                weight,
                term: term.clone(),
                rhs: TypeExpr::inter(entries).map_err(|e| e.to_string())?,
            })
        }
    }
}

fn check_assoc(assoc: &[usize], n: usize) -> Result<(), String> {
    if assoc.len() != n {
        return Err(format!(
            "assoc has {} index(es) for {} entries",
            assoc.len(),
            n
        ));
    }
    let mut seen = assoc.to_vec();
    seen.sort_unstable();
    if seen.iter().enumerate().any(|(i, v)| i != *v) {
        return Err("assoc is not a permutation of the entry indices".into());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// The checker

/// Verifies every node of the tree and returns the conclusion.
pub fn check_derivation(d: &Derivation, mode: Mode) -> Result<Judgment, CheckError> {
    let mut path = Vec::new();
    check_at(d, mode, &mut path)?;
    Ok(d.conclusion.clone())
}

fn check_at(d: &Derivation, mode: Mode, path: &mut Vec<usize>) -> Result<(), CheckError> {
    for (i, p) in d.premises.iter().enumerate() {
        path.push(i);
        check_at(p, mode, path)?;
        path.pop();
    }
    let stored = &d.conclusion;
    if !stored.term.is_well_formed(mode) {
        return Err(CheckError::at(
            path,
            d.rule,
            format!("subject {} is not a {} term", stored.term, mode),
        ));
    }
    stored
        .rhs
        .check_wf(mode, stored.rhs.layer())
        .map_err(|e| CheckError::at(path, d.rule, e.to_string()))?;
    if mode == Mode::Cbn && stored.rhs.layer() == Layer::Arrow {
        return Err(CheckError::at(
            path,
            d.rule,
            "cbn judgments type terms with intersections or distributions only",
        ));
    }
    let premise_judgments: Vec<&Judgment> = d.premises.iter().map(|p| &p.conclusion).collect();
    let derived = rebuild(
        d.rule,
        mode,
        &stored.term,
        &stored.rhs,
        &premise_judgments,
        &d.scales,
        &d.assoc,
    )
    .map_err(|m| CheckError::at(path, d.rule, m))?;
    if derived.weight != stored.weight {
        return Err(CheckError::at(
            path,
            d.rule,
            format!(
                "weight mismatch at rule {}: stored {}, derived {}",
                d.rule,
                fmt_rat(&stored.weight),
                fmt_rat(&derived.weight)
            ),
        ));
    }
    if derived.rhs != stored.rhs {
        return Err(CheckError::at(
            path,
            d.rule,
            format!(
                "type mismatch: stored {}, derived {}",
                stored.rhs, derived.rhs
            ),
        ));
    }
    if derived.ctx != stored.ctx {
        return Err(CheckError::at(
            path,
            d.rule,
            format!(
                "context mismatch: stored {}, derived {}",
                fmt_ctx(&stored.ctx),
                fmt_ctx(&derived.ctx)
            ),
        ));
    }
    // dom(Γ) ⊆ fv(M); in particular closed subjects carry empty contexts
    let fv = stored.term.free_vars();
    for x in stored.ctx.domain() {
        if !fv.contains(x) {
            return Err(CheckError::at(
                path,
                d.rule,
                format!("context mentions {}, which is not free in the subject", x),
            ));
        }
    }
    Ok(())
}

fn fmt_ctx(ctx: &TypingContext) -> String {
    let mut out = String::from("(ctx");
    for (x, t) in ctx.iter() {
        out.push_str(&format!(" ({} {})", x, t));
    }
    out.push(')');
    out
}

/// The weight of a (checked) derivation.
pub fn weight(d: &Derivation) -> &Rat {
    &d.conclusion.weight
}

/// Number of rules in the tree, excluding Bang and Val nodes (which cannot
/// be iterated).
pub fn size(d: &Derivation) -> usize {
    let own = match d.rule {
        RuleName::Bang | RuleName::Val => 0,
        _ => 1,
    };
    own + d.premises.iter().map(size).sum::<usize>()
}

// ---------------------------------------------------------------------------
// Constructors. Each computes its conclusion through `rebuild`, so anything
// assembled here checks by construction.

fn construct(
    rule: RuleName,
    mode: Mode,
    term: Term,
    stored_rhs: TypeExpr,
    premises: Vec<Derivation>,
    scales: Vec<Rat>,
    assoc: Vec<usize>,
) -> Result<Derivation, CheckError> {
    let premise_judgments: Vec<&Judgment> = premises.iter().map(|p| &p.conclusion).collect();
    let conclusion = rebuild(
        rule,
        mode,
        &term,
        &stored_rhs,
        &premise_judgments,
        &scales,
        &assoc,
    )
    .map_err(|m| CheckError::at(&[], rule, m))?;
    Ok(Derivation {
        rule,
        conclusion,
        premises,
        scales,
        assoc,
    })
}

pub fn make_var(mode: Mode, x: &str, rhs: TypeExpr) -> Result<Derivation, CheckError> {
    construct(
        RuleName::Var,
        mode,
        Term::var(x),
        rhs,
        Vec::new(),
        Vec::new(),
        Vec::new(),
    )
}

pub fn make_zero(mode: Mode, term: Term) -> Result<Derivation, CheckError> {
    construct(
        RuleName::Zero,
        mode,
        term,
        TypeExpr::null_dist(),
        Vec::new(),
        Vec::new(),
        Vec::new(),
    )
}

pub fn make_val_cbv(premise: Derivation) -> Result<Derivation, CheckError> {
    let term = premise.conclusion.term.clone();
    construct(
        RuleName::Val,
        Mode::Cbv,
        term,
        TypeExpr::null_dist(),
        vec![premise],
        Vec::new(),
        Vec::new(),
    )
}

pub fn make_val_cbn(term: Term) -> Result<Derivation, CheckError> {
    construct(
        RuleName::Val,
        Mode::Cbn,
        term,
        TypeExpr::null_dist(),
        Vec::new(),
        Vec::new(),
        Vec::new(),
    )
}

pub fn make_lam(mode: Mode, binder: &str, premise: Derivation) -> Result<Derivation, CheckError> {
    let term = Term::lam(binder, premise.conclusion.term.clone());
    construct(
        RuleName::Lam,
        mode,
        term,
        TypeExpr::null_dist(),
        vec![premise],
        Vec::new(),
        Vec::new(),
    )
}

pub fn make_choice(
    mode: Mode,
    left: Derivation,
    right: Derivation,
) -> Result<Derivation, CheckError> {
    let term = Term::choice(left.conclusion.term.clone(), right.conclusion.term.clone());
    construct(
        RuleName::Choice,
        mode,
        term,
        TypeExpr::null_dist(),
        vec![left, right],
        Vec::new(),
        Vec::new(),
    )
}

pub fn make_app_cbv(fun: Derivation, arg: Derivation) -> Result<Derivation, CheckError> {
    let term = Term::app(fun.conclusion.term.clone(), arg.conclusion.term.clone());
    construct(
        RuleName::App,
        Mode::Cbv,
        term,
        TypeExpr::null_dist(),
        vec![fun, arg],
        Vec::new(),
        Vec::new(),
    )
}

pub fn make_app_cbn(
    head: Derivation,
    arg_term: Term,
    args: Vec<Derivation>,
    assoc: Vec<usize>,
) -> Result<Derivation, CheckError> {
    let term = Term::app(head.conclusion.term.clone(), arg_term);
    let mut premises = vec![head];
    premises.extend(args);
    construct(
        RuleName::App,
        Mode::Cbn,
        term,
        TypeExpr::null_dist(),
        premises,
        Vec::new(),
        assoc,
    )
}

pub fn make_let(
    binder: &str,
    body: Term,
    body_premises: Vec<Derivation>,
    bound_premise: Derivation,
    assoc: Vec<usize>,
) -> Result<Derivation, CheckError> {
    let term = Term::let_in(binder, bound_premise.conclusion.term.clone(), body);
    let mut premises = body_premises;
    premises.push(bound_premise);
    construct(
        RuleName::Let,
        Mode::Cbv,
        term,
        TypeExpr::null_dist(),
        premises,
        Vec::new(),
        assoc,
    )
}

pub fn make_bang(
    mode: Mode,
    term: Term,
    scales: Vec<Rat>,
    premises: Vec<Derivation>,
) -> Result<Derivation, CheckError> {
    construct(
        RuleName::Bang,
        mode,
        term,
        TypeExpr::null_dist(),
        premises,
        scales,
        Vec::new(),
    )
}

// ---------------------------------------------------------------------------
// Value derivations, scaling, partitioning

/// The two weight-0 tight derivations of a closed value: ⊢⁰V:⟨1[]⟩ and
/// ⊢⁰V:0̄ in CbV, ⊢⁰λx.M:⟨1*⟩ and ⊢⁰λx.M:0̄ in CbN.
pub fn tight_value_derivations(
    v: &Term,
    mode: Mode,
) -> Result<(Derivation, Derivation), CheckError> {
    let ok = match mode {
        Mode::Cbv => v.is_value() && v.is_closed(),
        Mode::Cbn => matches!(v, Term::Lam(_, _)) && v.is_closed(),
    };
    if !ok {
        return Err(CheckError::at(
            &[],
            RuleName::Val,
            format!("not a closed value: {}", v),
        ));
    }
    let unit = match mode {
        Mode::Cbv => {
            let empty = make_bang(mode, v.clone(), Vec::new(), Vec::new())?;
            make_val_cbv(empty)?
        }
        Mode::Cbn => make_val_cbn(v.clone())?,
    };
    let zero = make_zero(mode, v.clone())?;
    Ok((unit, zero))
}

fn require_closed_bang(d: &Derivation, what: &str) -> Result<(), CheckError> {
    if d.rule != RuleName::Bang || !d.conclusion.ctx.is_empty() {
        return Err(CheckError::at(
            &[],
            d.rule,
            format!("{}: not a bang-rooted closed-subject derivation", what),
        ));
    }
    Ok(())
}

/// Rescales a Bang-rooted derivation of a closed subject by an arbitrary
/// positive factor, as long as every resulting scale factor stays in (0,1].
/// This is the two-way reading of the scaling property; the public
/// [`scale_derivation`] restricts the factor to (0,1].
pub(crate) fn rescale_bang(
    d: &Derivation,
    factor: &Rat,
    mode: Mode,
) -> Result<Derivation, CheckError> {
    require_closed_bang(d, "rescale")?;
    if !factor.is_positive() {
        return Err(CheckError::at(&[], d.rule, "scale factor must be positive"));
    }
    let scales: Vec<Rat> = d.scales.iter().map(|q| q * factor).collect();
    make_bang(mode, d.conclusion.term.clone(), scales, d.premises.clone())
}

/// ⊢^{qv} V : q·𝔪A from ⊢ᵛ V : 𝔪A, for q ∈ (0,1].
pub fn scale_derivation(q: &Rat, d: &Derivation, mode: Mode) -> Result<Derivation, CheckError> {
    if !is_probability(q) {
        return Err(CheckError::at(
            &[],
            d.rule,
            format!("scale factor {} outside (0,1]", fmt_rat(q)),
        ));
    }
    require_closed_bang(d, "scale_derivation")?;
    rescale_bang(d, q, mode)
}

/// Splits ⊢ʷV:𝔪A into one derivation per part of `split`, which must
/// partition 𝔪A as a multiset. Weights add up to w.
pub fn partition_derivation(
    d: &Derivation,
    split: &[TypeExpr],
    mode: Mode,
) -> Result<Vec<Derivation>, CheckError> {
    require_closed_bang(d, "partition_derivation")?;
    let mut union = TypeExpr::empty_inter();
    for part in split {
        union =
            inter_union(&union, part).map_err(|e| CheckError::at(&[], d.rule, e.to_string()))?;
    }
    if union != d.conclusion.rhs {
        return Err(CheckError::at(
            &[],
            d.rule,
            format!(
                "split does not partition the multiset: parts give {}, derivation has {}",
                union, d.conclusion.rhs
            ),
        ));
    }
    let mut used = vec![false; d.premises.len()];
    let mut out = Vec::with_capacity(split.len());
    for part in split {
        let entries = part
            .inter_entries()
            .map_err(|e| CheckError::at(&[], d.rule, e.to_string()))?;
        let mut scales = Vec::with_capacity(entries.len());
        let mut premises = Vec::with_capacity(entries.len());
        for (q, elem) in entries {
            let found = (0..d.premises.len())
                .find(|&j| !used[j] && d.scales[j] == *q && d.premises[j].conclusion.rhs == *elem);
            match found {
                Some(j) => {
                    used[j] = true;
                    scales.push(d.scales[j].clone());
                    premises.push(d.premises[j].clone());
                }
                None => {
                    return Err(CheckError::at(
                        &[],
                        d.rule,
                        format!("no unused premise matches entry {} . {}", fmt_rat(q), elem),
                    ))
                }
            }
        }
        out.push(make_bang(mode, d.conclusion.term.clone(), scales, premises)?);
    }
    Ok(out)
}

/// Left inverse of [`partition_derivation`]: concatenates Bang-rooted
/// derivations of the same subject.
pub fn merge_derivations(parts: &[Derivation], mode: Mode) -> Result<Derivation, CheckError> {
    let first = parts
        .first()
        .ok_or_else(|| CheckError::at(&[], RuleName::Bang, "cannot merge zero derivations"))?;
    let mut scales = Vec::new();
    let mut premises = Vec::new();
    for part in parts {
        require_closed_bang(part, "merge_derivations")?;
        if part.conclusion.term != first.conclusion.term {
            return Err(CheckError::at(
                &[],
                part.rule,
                "merge requires a common subject",
            ));
        }
        scales.extend(part.scales.iter().cloned());
        premises.extend(part.premises.iter().cloned());
    }
    make_bang(mode, first.conclusion.term.clone(), scales, premises)
}

// ---------------------------------------------------------------------------
// Serialization: s-expressions, UTF-8.
//
//   (rule <name>
//     (judgment (ctx (x <inter>) ...) <weight?> <term> <type>)
//     (scales q1 q2 ...)?   ; required on bang nodes
//     (assoc i1 i2 ...)?    ; let and cbn app nodes; identity when omitted
//     <premise>*)

pub fn to_sexp(d: &Derivation) -> String {
    let mut out = String::new();
    write_sexp(d, 0, &mut out);
    out
}

fn write_sexp(d: &Derivation, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    out.push_str(&pad);
    out.push_str(&format!("(rule {}\n", d.rule));
    out.push_str(&pad);
    out.push_str("  (judgment ");
    out.push_str(&fmt_ctx(&d.conclusion.ctx));
    out.push_str(&format!(
        " {} {} {})",
        fmt_rat(&d.conclusion.weight),
        d.conclusion.term,
        d.conclusion.rhs
    ));
    if d.rule == RuleName::Bang {
        out.push('\n');
        out.push_str(&pad);
        out.push_str("  (scales");
        for q in &d.scales {
            out.push_str(&format!(" {}", fmt_rat(q)));
        }
        out.push(')');
    }
    if !d.assoc.is_empty() {
        out.push('\n');
        out.push_str(&pad);
        out.push_str("  (assoc");
        for i in &d.assoc {
            out.push_str(&format!(" {}", i));
        }
        out.push(')');
    }
    for p in &d.premises {
        out.push('\n');
        write_sexp(p, indent + 1, out);
    }
    out.push(')');
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", to_sexp(self))
    }
}

/// Parses a derivation file. Omitted weights are recomputed from the rule
/// equations; stored weights are kept verbatim for the checker to verify.
pub fn parse_derivation(src: &str, mode: Mode) -> Result<Derivation, SyntaxError> {
    let mut toks = tokenize(src)?;
    let d = parse_node(&mut toks, mode)?;
    if !toks.at_end() {
        return Err(toks.error("unexpected trailing input after derivation"));
    }
    Ok(d)
}

/// Parses a stream of derivations (as printed by `reduce-deriv`).
pub fn parse_derivations(src: &str, mode: Mode) -> Result<Vec<Derivation>, SyntaxError> {
    let mut toks = tokenize(src)?;
    let mut out = Vec::new();
    while !toks.at_end() {
        out.push(parse_node(&mut toks, mode)?);
    }
    Ok(out)
}

fn parse_node(toks: &mut Tokens, mode: Mode) -> Result<Derivation, SyntaxError> {
    toks.expect(&Tok::LParen)?;
    expect_word(toks, "rule")?;
    let rule_word = toks.expect_ident()?;
    let rule = RuleName::parse(&rule_word)
        .ok_or_else(|| toks.error(format!("unknown rule `{}`", rule_word)))?;

    toks.expect(&Tok::LParen)?;
    expect_word(toks, "judgment")?;
    toks.expect(&Tok::LParen)?;
    expect_word(toks, "ctx")?;
    let mut ctx = TypingContext::empty();
    while toks.peek() == Some(&Tok::LParen) {
        toks.next();
        let x = toks.expect_ident()?;
        let inter = crate::types::parse_type_tokens(toks)?;
        toks.expect(&Tok::RParen)?;
        ctx.insert(x, inter);
    }
    toks.expect(&Tok::RParen)?;
    let weight = match toks.peek() {
        Some(Tok::Num(_)) => Some(toks.expect_num()?),
        _ => None,
    };
    let term = parse_term_tokens(toks, Mode::Cbv)?;
    let rhs = crate::types::parse_type_tokens(toks)?;
    toks.expect(&Tok::RParen)?;

    let mut scales = Vec::new();
    let mut assoc = Vec::new();
    loop {
        if toks.peek() != Some(&Tok::LParen) {
            break;
        }
        match toks.peek2() {
            Some(Tok::Ident(w)) if w == "scales" => {
                toks.next();
                toks.next();
                while let Some(Tok::Num(_)) = toks.peek() {
                    scales.push(toks.expect_num()?);
                }
                toks.expect(&Tok::RParen)?;
            }
            Some(Tok::Ident(w)) if w == "assoc" => {
                toks.next();
                toks.next();
                while let Some(Tok::Num(_)) = toks.peek() {
                    let n = toks.expect_num()?;
                    if !n.is_integer() || n.is_negative() {
                        return Err(toks.error("assoc entries must be non-negative integers"));
                    }
                    let ix: usize = n
                        .numer()
                        .try_into()
                        .map_err(|_| toks.error("assoc index out of range"))?;
                    assoc.push(ix);
                }
                toks.expect(&Tok::RParen)?;
            }
            _ => break,
        }
    }

    let mut premises = Vec::new();
    while toks.peek() == Some(&Tok::LParen) {
        premises.push(parse_node(toks, mode)?);
    }
    toks.expect(&Tok::RParen)?;

    // a let/cbn-app node may omit the association when it is the identity
    if assoc.is_empty() {
        let implied = match (rule, mode) {
            (RuleName::Let, Mode::Cbv) => premises.len().saturating_sub(1),
            (RuleName::App, Mode::Cbn) => premises.len().saturating_sub(1),
            _ => 0,
        };
        assoc = (0..implied).collect();
    }

    let weight = match weight {
        Some(w) => w,
        None => {
            // recompute through the rule equation; structural problems are
            // left for the checker to report
            let premise_judgments: Vec<&Judgment> =
                premises.iter().map(|p| &p.conclusion).collect();
            match rebuild(rule, mode, &term, &rhs, &premise_judgments, &scales, &assoc) {
                Ok(j) => j.weight,
                Err(_) => Rat::zero(),
            }
        }
    };

    Ok(Derivation {
        rule,
        conclusion: Judgment {
            ctx,
            weight,
            term,
            rhs,
        },
        premises,
        scales,
        assoc,
    })
}

fn expect_word(toks: &mut Tokens, word: &str) -> Result<(), SyntaxError> {
    match toks.peek() {
        Some(Tok::Ident(s)) if s == word => {
            toks.next();
            Ok(())
        }
        Some(t) => Err(toks.error(format!("expected `{}`, found `{}`", word, t))),
        None => Err(toks.error(format!("expected `{}`, found end of input", word))),
    }
}
