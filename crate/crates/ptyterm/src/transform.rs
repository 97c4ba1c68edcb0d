//! Derivation-transforming algorithms: the substitution and
//! anti-substitution lemmas, weighted subject reduction and expansion, and
//! the completeness synthesizers for tight and null typings.
//!
//! Subject reduction consumes a positive-weight derivation of a closed term
//! P and produces one derivation per branch of P's reduction step, with the
//! type preserved on average (𝔟 = ⊎qᵢ𝔟ᵢ) and the weight decreased by exactly
//! the step (w = 1 + Σqᵢwᵢ). Subject expansion goes the other way and is an
//! inequality (w ≥ 1 + Σqᵢwᵢ): a Zero-rooted branch under a let has to be
//! replaced by the weight-1 derived form before the let can be rebuilt,
//! which over-approximates.
//!
//! Every public transform re-checks its output before returning; the
//! checker stays the trusted base.

use crate::derivation::{
    check_derivation, make_app_cbn, make_app_cbv, make_bang, make_choice, make_lam, make_let,
    make_val_cbn, make_val_cbv, make_var, make_zero, partition_derivation, rescale_bang, size,
    tight_value_derivations, CheckError, Derivation, RuleName,
};
use crate::multidist::{fmt_rat, MultiDist, Rat};
use crate::semantics::{approximants_along, evaluate, step, EvalError};
use crate::syntax::{Mode, Term};
use crate::types::{dist_union, scale_dist, scale_inter, Layer, TypeExpr};
use num_traits::{One, Zero};
use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransformError {
    Check(CheckError),
    Eval(EvalError),
    Invalid(String),
}

impl fmt::Display for TransformError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformError::Check(e) => write!(f, "{}", e),
            TransformError::Eval(e) => write!(f, "{}", e),
            TransformError::Invalid(m) => write!(f, "{}", m),
        }
    }
}

impl std::error::Error for TransformError {}

impl From<CheckError> for TransformError {
    fn from(e: CheckError) -> Self {
        TransformError::Check(e)
    }
}

impl From<EvalError> for TransformError {
    fn from(e: EvalError) -> Self {
        TransformError::Eval(e)
    }
}

fn invalid(msg: impl Into<String>) -> TransformError {
    TransformError::Invalid(msg.into())
}

fn half() -> Rat {
    Rat::new(1.into(), 2.into())
}

// ---------------------------------------------------------------------------
// Splitting a value derivation across premises

/// An empty-intersection derivation ⊢⁰ t : [] (a Bang with no premises).
fn empty_bang(t: &Term, mode: Mode) -> Result<Derivation, TransformError> {
    Ok(make_bang(mode, t.clone(), Vec::new(), Vec::new())?)
}

fn require_value_derivation(phi: &Derivation, what: &str) -> Result<(), TransformError> {
    if phi.rule != RuleName::Bang || !phi.conclusion.ctx.is_empty() {
        return Err(invalid(format!(
            "{}: expected a bang-rooted derivation of a closed term, found rule {}",
            what, phi.rule
        )));
    }
    Ok(())
}

/// Splits φ ⊢ᵛ V : ⊎ᵢ multᵢ·𝔪Cᵢ into φᵢ ⊢ V : 𝔪Cᵢ by partitioning and then
/// un-scaling each piece by its multiplier.
fn split_scaled(
    phi: &Derivation,
    parts: &[(Rat, TypeExpr)],
    mode: Mode,
) -> Result<Vec<Derivation>, TransformError> {
    require_value_derivation(phi, "split")?;
    let mut scaled_parts = Vec::with_capacity(parts.len());
    for (mult, inter) in parts {
        scaled_parts.push(scale_inter(mult, inter).map_err(|e| invalid(e.to_string()))?);
    }
    let pieces = partition_derivation(phi, &scaled_parts, mode)?;
    let mut out = Vec::with_capacity(pieces.len());
    for (piece, (mult, _)) in pieces.into_iter().zip(parts.iter()) {
        if mult.is_one() {
            out.push(piece);
        } else {
            out.push(rescale_bang(&piece, &(Rat::one() / mult), mode)?);
        }
    }
    Ok(out)
}

/// Scales each φᵢ by multᵢ and merges the pieces into one value derivation.
fn merge_scaled(
    subject: &Term,
    parts: &[(Rat, Derivation)],
    mode: Mode,
) -> Result<Derivation, TransformError> {
    let mut scales = Vec::new();
    let mut premises = Vec::new();
    for (mult, phi) in parts {
        require_value_derivation(phi, "merge")?;
        if phi.conclusion.term != *subject {
            return Err(invalid("merge requires a common subject"));
        }
        for (q, p) in phi.scales.iter().zip(phi.premises.iter()) {
            scales.push(q * mult);
            premises.push(p.clone());
        }
    }
    Ok(make_bang(mode, subject.clone(), scales, premises)?)
}

// ---------------------------------------------------------------------------
// Substitution (Γ, z:𝔪C ⊢ʷ M:τ and ⊢ᵛ V:𝔪C give Γ ⊢^{w+v} M{V/z}:τ)

/// Substitutes a value derivation φ for the variable `z` throughout π.
/// The result types M{V/z} at π's type with weight w + v and size at most
/// size(π) + size(φ).
pub fn substitute_derivation(
    pi: &Derivation,
    z: &str,
    phi: &Derivation,
    mode: Mode,
) -> Result<Derivation, TransformError> {
    require_value_derivation(phi, "substitute_derivation")?;
    if !phi.conclusion.term.is_closed() {
        return Err(invalid("substitute_derivation: the value must be closed"));
    }
    if mode == Mode::Cbv && !phi.conclusion.term.is_value() {
        return Err(invalid(
            "substitute_derivation: cbv substitutes values only",
        ));
    }
    let expected = pi.conclusion.ctx.get(z);
    if phi.conclusion.rhs != expected {
        return Err(invalid(format!(
            "type mismatch at {}: premise context carries {}, value derivation gives {}",
            z, expected, phi.conclusion.rhs
        )));
    }
    let out = subst_rec(pi, z, phi, mode)?;
    check_derivation(&out, mode)?;
    Ok(out)
}

fn subst_rec(
    pi: &Derivation,
    z: &str,
    phi: &Derivation,
    mode: Mode,
) -> Result<Derivation, TransformError> {
    let value = &phi.conclusion.term;
    let subject = &pi.conclusion.term;
    match pi.rule {
        RuleName::Var => {
            let x = match subject {
                Term::Var(x) => x,
                _ => return Err(invalid("var node without a variable subject")),
            };
            if x == z {
                match mode {
                    // π is z:𝔪C ⊢⁰ z:𝔪C and φ ⊢ᵛ V:𝔪C: φ itself is the result
                    Mode::Cbv => Ok(phi.clone()),
                    // π is z:[1·𝔞] ⊢⁰ z:𝔞: φ is a bang over exactly one
                    // premise with scale 1; that premise is the result
                    Mode::Cbn => {
                        if phi.premises.len() != 1 || !phi.scales[0].is_one() {
                            return Err(invalid(
                                "cbn variable piece must be a unit-scaled singleton",
                            ));
                        }
                        Ok(phi.premises[0].clone())
                    }
                }
            } else {
                Ok(pi.clone())
            }
        }
        RuleName::Zero => Ok(make_zero(mode, subject.substitute(z, value))?),
        RuleName::Val if mode == Mode::Cbn => Ok(make_val_cbn(subject.substitute(z, value))?),
        RuleName::Val => {
            let inner = subst_rec(&pi.premises[0], z, phi, mode)?;
            Ok(make_val_cbv(inner)?)
        }
        RuleName::Lam => {
            let binder = match subject {
                Term::Lam(x, _) => x.clone(),
                _ => return Err(invalid("lam node without an abstraction subject")),
            };
            if binder == z {
                // z is shadowed; the context cannot mention it
                return Ok(pi.clone());
            }
            let inner = subst_rec(&pi.premises[0], z, phi, mode)?;
            Ok(make_lam(mode, &binder, inner)?)
        }
        RuleName::Choice => {
            let parts = [
                (half(), pi.premises[0].conclusion.ctx.get(z)),
                (half(), pi.premises[1].conclusion.ctx.get(z)),
            ];
            let pieces = split_scaled(phi, &parts, mode)?;
            let left = subst_rec(&pi.premises[0], z, &pieces[0], mode)?;
            let right = subst_rec(&pi.premises[1], z, &pieces[1], mode)?;
            Ok(make_choice(mode, left, right)?)
        }
        RuleName::App => match mode {
            Mode::Cbv => {
                let parts = [
                    (Rat::one(), pi.premises[0].conclusion.ctx.get(z)),
                    (Rat::one(), pi.premises[1].conclusion.ctx.get(z)),
                ];
                let pieces = split_scaled(phi, &parts, mode)?;
                let fun = subst_rec(&pi.premises[0], z, &pieces[0], mode)?;
                let arg = subst_rec(&pi.premises[1], z, &pieces[1], mode)?;
                Ok(make_app_cbv(fun, arg)?)
            }
            Mode::Cbn => {
                let head = &pi.premises[0];
                let args = &pi.premises[1..];
                let entries = head
                    .conclusion
                    .rhs
                    .dist_entries()
                    .map_err(|e| invalid(e.to_string()))?
                    .to_vec();
                let mut parts = vec![(Rat::one(), head.conclusion.ctx.get(z))];
                for (j, a) in args.iter().enumerate() {
                    let p = entries[pi.assoc[j]].0.clone();
                    parts.push((p, a.conclusion.ctx.get(z)));
                }
                let pieces = split_scaled(phi, &parts, mode)?;
                let new_head = subst_rec(head, z, &pieces[0], mode)?;
                let mut new_args = Vec::with_capacity(args.len());
                for (j, a) in args.iter().enumerate() {
                    new_args.push(subst_rec(a, z, &pieces[j + 1], mode)?);
                }
                let arg_term = match subject {
                    Term::App(_, a) => a.substitute(z, value),
                    _ => return Err(invalid("app node without an application subject")),
                };
                Ok(make_app_cbn(
                    new_head,
                    arg_term,
                    new_args,
                    pi.assoc.clone(),
                )?)
            }
        },
        RuleName::Let => {
            let (binder, body) = match subject {
                Term::Let(x, _, b) => (x.clone(), (**b).clone()),
                _ => return Err(invalid("let node without a let subject")),
            };
            let n_prem = &pi.premises[pi.premises.len() - 1];
            let m_prems = &pi.premises[..pi.premises.len() - 1];
            let entries = n_prem
                .conclusion
                .rhs
                .dist_entries()
                .map_err(|e| invalid(e.to_string()))?
                .to_vec();
            let shadowed = binder == z;
            let mut parts = Vec::new();
            for (j, m) in m_prems.iter().enumerate() {
                let piece_type = if shadowed {
                    TypeExpr::empty_inter()
                } else {
                    let mut ctx = m.conclusion.ctx.clone();
                    ctx.remove(&binder);
                    ctx.get(z)
                };
                parts.push((entries[pi.assoc[j]].0.clone(), piece_type));
            }
            parts.push((Rat::one(), n_prem.conclusion.ctx.get(z)));
            let pieces = split_scaled(phi, &parts, mode)?;
            let mut new_m = Vec::with_capacity(m_prems.len());
            for (j, m) in m_prems.iter().enumerate() {
                if shadowed {
                    new_m.push(m.clone());
                } else {
                    new_m.push(subst_rec(m, z, &pieces[j], mode)?);
                }
            }
            let new_n = subst_rec(n_prem, z, &pieces[m_prems.len()], mode)?;
            let new_body = if shadowed {
                body
            } else {
                body.substitute(z, value)
            };
            Ok(make_let(
                &binder,
                new_body,
                new_m,
                new_n,
                pi.assoc.clone(),
            )?)
        }
        RuleName::Bang => {
            let mut parts = Vec::with_capacity(pi.premises.len());
            for (q, p) in pi.scales.iter().zip(pi.premises.iter()) {
                parts.push((q.clone(), p.conclusion.ctx.get(z)));
            }
            let pieces = split_scaled(phi, &parts, mode)?;
            let mut new_premises = Vec::with_capacity(pi.premises.len());
            for (p, piece) in pi.premises.iter().zip(pieces.iter()) {
                new_premises.push(subst_rec(p, z, piece, mode)?);
            }
            Ok(make_bang(
                mode,
                subject.substitute(z, value),
                pi.scales.clone(),
                new_premises,
            )?)
        }
    }
}

// ---------------------------------------------------------------------------
// Anti-substitution (Γ ⊢ʷ M{V/x}:σ splits into Γ, x:𝔪C ⊢^{w₁} M:σ and
// ⊢^{w₂} V:𝔪C with w = w₁ + w₂)

/// Undoes a substitution. The recursion is directed by the skeleton `m`, so
/// occurrences of `value` that came from `x` are identified positionally;
/// `phi`'s subject must be literally m{value/x}.
pub fn anti_substitute(
    phi: &Derivation,
    m: &Term,
    x: &str,
    value: &Term,
    mode: Mode,
) -> Result<(TypeExpr, Derivation, Derivation), TransformError> {
    if !value.is_closed() {
        return Err(invalid(
            "anti_substitute: the substituted term must be closed",
        ));
    }
    if !syn_eq(&m.substitute(x, value), &phi.conclusion.term) {
        return Err(invalid(format!(
            "skeleton mismatch: {}{{{}/{}}} is not the derivation subject {}",
            m, value, x, phi.conclusion.term
        )));
    }
    let (inter, d1, d2) = anti_rec(phi, m, x, value, mode)?;
    check_derivation(&d1, mode)?;
    check_derivation(&d2, mode)?;
    Ok((inter, d1, d2))
}

/// Syntactic term equality, binder names included. Substituting a closed
/// term never renames binders, so the skeleton recursion can rely on names
/// lining up exactly.
fn syn_eq(a: &Term, b: &Term) -> bool {
    match (a, b) {
        (Term::Var(x), Term::Var(y)) => x == y,
        (Term::Lam(x, a), Term::Lam(y, b)) => x == y && syn_eq(a, b),
        (Term::App(f, u), Term::App(g, v)) => syn_eq(f, g) && syn_eq(u, v),
        (Term::Choice(f, u), Term::Choice(g, v)) => syn_eq(f, g) && syn_eq(u, v),
        (Term::Let(x, n, a), Term::Let(y, o, b)) => x == y && syn_eq(n, o) && syn_eq(a, b),
        _ => false,
    }
}

fn anti_rec(
    phi: &Derivation,
    m: &Term,
    x: &str,
    value: &Term,
    mode: Mode,
) -> Result<(TypeExpr, Derivation, Derivation), TransformError> {
    // the variable itself: σ moves wholesale into the intersection 𝔪C
    if let Term::Var(y) = m {
        if y == x {
            return anti_var_case(phi, x, value, mode);
        }
    }
    // axioms with empty contexts re-subject freely
    if phi.rule == RuleName::Zero {
        return Ok((
            TypeExpr::empty_inter(),
            make_zero(mode, m.clone())?,
            empty_bang(value, mode)?,
        ));
    }
    if mode == Mode::Cbn && phi.rule == RuleName::Val {
        return Ok((
            TypeExpr::empty_inter(),
            make_val_cbn(m.clone())?,
            empty_bang(value, mode)?,
        ));
    }
    // x not free: the derivation already types m
    if !m.free_vars().contains(x) {
        return Ok((
            TypeExpr::empty_inter(),
            phi.clone(),
            empty_bang(value, mode)?,
        ));
    }
    match (m, phi.rule) {
        (Term::Lam(y, body), RuleName::Lam) => {
            let (inter, d1, d2) = anti_rec(&phi.premises[0], body, x, value, mode)?;
            Ok((inter, make_lam(mode, y, d1)?, d2))
        }
        (_, RuleName::Val) => {
            // CbV only; peel and re-wrap
            let (inter, d1, d2) = anti_rec(&phi.premises[0], m, x, value, mode)?;
            Ok((inter, make_val_cbv(d1)?, d2))
        }
        (_, RuleName::Bang) => {
            let mut inner = Vec::with_capacity(phi.premises.len());
            let mut pieces = Vec::with_capacity(phi.premises.len());
            for (q, p) in phi.scales.iter().zip(phi.premises.iter()) {
                let (_, d1, d2) = anti_rec(p, m, x, value, mode)?;
                inner.push(d1);
                pieces.push((q.clone(), d2));
            }
            let d1 = make_bang(mode, m.clone(), phi.scales.clone(), inner)?;
            let inter = d1.conclusion.ctx.get(x);
            let d2 = merge_scaled(value, &pieces, mode)?;
            Ok((inter, d1, d2))
        }
        (Term::Choice(l, r), RuleName::Choice) => {
            let (_, l1, l2) = anti_rec(&phi.premises[0], l, x, value, mode)?;
            let (_, r1, r2) = anti_rec(&phi.premises[1], r, x, value, mode)?;
            let d1 = make_choice(mode, l1, r1)?;
            let inter = d1.conclusion.ctx.get(x);
            let d2 = merge_scaled(value, &[(half(), l2), (half(), r2)], mode)?;
            Ok((inter, d1, d2))
        }
        (Term::App(f, a), RuleName::App) => match mode {
            Mode::Cbv => {
                let (_, f1, f2) = anti_rec(&phi.premises[0], f, x, value, mode)?;
                let (_, a1, a2) = anti_rec(&phi.premises[1], a, x, value, mode)?;
                let d1 = make_app_cbv(f1, a1)?;
                let inter = d1.conclusion.ctx.get(x);
                let d2 = merge_scaled(value, &[(Rat::one(), f2), (Rat::one(), a2)], mode)?;
                Ok((inter, d1, d2))
            }
            Mode::Cbn => {
                let head = &phi.premises[0];
                let args = &phi.premises[1..];
                let entries = head
                    .conclusion
                    .rhs
                    .dist_entries()
                    .map_err(|e| invalid(e.to_string()))?
                    .to_vec();
                let (_, h1, h2) = anti_rec(head, f, x, value, mode)?;
                let mut new_args = Vec::with_capacity(args.len());
                let mut pieces = vec![(Rat::one(), h2)];
                for (j, arg_prem) in args.iter().enumerate() {
                    let (_, d1, d2) = anti_rec(arg_prem, a, x, value, mode)?;
                    new_args.push(d1);
                    pieces.push((entries[phi.assoc[j]].0.clone(), d2));
                }
                let d1 = make_app_cbn(h1, (**a).clone(), new_args, phi.assoc.clone())?;
                let inter = d1.conclusion.ctx.get(x);
                let d2 = merge_scaled(value, &pieces, mode)?;
                Ok((inter, d1, d2))
            }
        },
        (Term::Let(y, bound, body), RuleName::Let) => {
            let n_prem = &phi.premises[phi.premises.len() - 1];
            let m_prems = &phi.premises[..phi.premises.len() - 1];
            let entries = n_prem
                .conclusion
                .rhs
                .dist_entries()
                .map_err(|e| invalid(e.to_string()))?
                .to_vec();
            let shadowed = y == x;
            let (_, n1, n2) = anti_rec(n_prem, bound, x, value, mode)?;
            let mut new_m = Vec::with_capacity(m_prems.len());
            let mut pieces = vec![(Rat::one(), n2)];
            for (j, mp) in m_prems.iter().enumerate() {
                if shadowed {
                    new_m.push(mp.clone());
                } else {
                    let (_, d1, d2) = anti_rec(mp, body, x, value, mode)?;
                    new_m.push(d1);
                    pieces.push((entries[phi.assoc[j]].0.clone(), d2));
                }
            }
            let d1 = make_let(y, (**body).clone(), new_m, n1, phi.assoc.clone())?;
            let inter = d1.conclusion.ctx.get(x);
            let d2 = merge_scaled(value, &pieces, mode)?;
            Ok((inter, d1, d2))
        }
        _ => Err(invalid(format!(
            "skeleton mismatch: cannot undo a substitution of {} through rule {}",
            m, phi.rule
        ))),
    }
}

fn anti_var_case(
    phi: &Derivation,
    x: &str,
    value: &Term,
    mode: Mode,
) -> Result<(TypeExpr, Derivation, Derivation), TransformError> {
    let sigma = &phi.conclusion.rhs;
    match (mode, sigma.layer()) {
        (Mode::Cbv, Layer::Inter) => {
            let d1 = make_var(mode, x, sigma.clone())?;
            Ok((sigma.clone(), d1, phi.clone()))
        }
        (Mode::Cbv, Layer::Dist) => {
            if phi.rule == RuleName::Zero {
                return Ok((
                    TypeExpr::empty_inter(),
                    make_zero(mode, Term::var(x))?,
                    empty_bang(value, mode)?,
                ));
            }
            if phi.rule != RuleName::Val {
                return Err(invalid(
                    "a value typed with a distribution must end in val or zero",
                ));
            }
            let inner = &phi.premises[0];
            let inter = inner.conclusion.rhs.clone();
            let d1 = make_val_cbv(make_var(mode, x, inter.clone())?)?;
            Ok((inter, d1, inner.clone()))
        }
        (Mode::Cbn, Layer::Dist) => {
            if phi.rule == RuleName::Zero {
                return Ok((
                    TypeExpr::empty_inter(),
                    make_zero(mode, Term::var(x))?,
                    empty_bang(value, mode)?,
                ));
            }
            let d1 = make_var(mode, x, sigma.clone())?;
            let d2 = make_bang(mode, value.clone(), vec![Rat::one()], vec![phi.clone()])?;
            Ok((TypeExpr::inter_singleton(sigma.clone()), d1, d2))
        }
        (Mode::Cbn, Layer::Inter) => {
            // mirror the bang structure onto the variable
            if phi.rule != RuleName::Bang {
                return Err(invalid("a cbn intersection conclusion must end in bang"));
            }
            let mut vars = Vec::with_capacity(phi.premises.len());
            for p in &phi.premises {
                vars.push(make_var(mode, x, p.conclusion.rhs.clone())?);
            }
            let d1 = make_bang(mode, Term::var(x), phi.scales.clone(), vars)?;
            Ok((sigma.clone(), d1, phi.clone()))
        }
        _ => Err(invalid("anti-substitution at an arrow-typed variable")),
    }
}

// ---------------------------------------------------------------------------
// Weighted subject reduction

/// Greedily claims, for each target entry, an unused parent entry with the
/// same probability and payload. Succeeds whenever the targets partition the
/// parent as a multiset.
fn claim_entries(
    parent: &[(Rat, TypeExpr)],
    target: &[(Rat, TypeExpr)],
    used: &mut [bool],
) -> Result<Vec<usize>, TransformError> {
    let mut out = Vec::with_capacity(target.len());
    for (p, e) in target {
        let found = (0..parent.len()).find(|&i| !used[i] && parent[i].0 == *p && parent[i].1 == *e);
        match found {
            Some(i) => {
                used[i] = true;
                out.push(i);
            }
            None => {
                return Err(invalid(format!(
                    "no unmatched distribution entry {} {}",
                    fmt_rat(p),
                    e
                )))
            }
        }
    }
    Ok(out)
}

/// Weighted subject reduction: from ⊢ʷP:𝔟 with w > 0 and P → ⟨qᵢPᵢ⟩,
/// produces Πᵢ ⊢^{wᵢ} Pᵢ:𝔟ᵢ with 𝔟 = ⊎qᵢ𝔟ᵢ, w = 1 + Σqᵢwᵢ, and strictly
/// smaller size. Both equations are verified before returning.
pub fn subject_reduce(pi: &Derivation, mode: Mode) -> Result<Vec<Derivation>, TransformError> {
    let conclusion = &pi.conclusion;
    if !conclusion.ctx.is_empty() || !conclusion.term.is_closed() {
        return Err(invalid("subject reduction applies to closed terms"));
    }
    let red = match step(&conclusion.term, mode)? {
        Some(m) => m,
        None => return Err(invalid("not a redex: the subject is a value")),
    };
    if conclusion.weight.is_zero() {
        return Err(invalid("weight is zero"));
    }
    let branches = reduce_rec(pi, mode)?;
    // verify 𝔟 = ⊎qᵢ𝔟ᵢ and w = 1 + Σqᵢwᵢ exactly, and the size bound
    let mut ty = TypeExpr::null_dist();
    let mut weight = Rat::one();
    for ((q, _), b) in red.entries().iter().zip(branches.iter()) {
        ty = dist_union(
            &ty,
            &scale_dist(q, &b.conclusion.rhs).map_err(|e| invalid(e.to_string()))?,
        )
        .map_err(|e| invalid(e.to_string()))?;
        weight += q * &b.conclusion.weight;
        if size(b) >= size(pi) {
            return Err(invalid("subject reduction failed to shrink the derivation"));
        }
        check_derivation(b, mode)?;
    }
    if ty != conclusion.rhs || weight != conclusion.weight {
        return Err(invalid(format!(
            "subject reduction equations failed: type {} vs {}, weight {} vs {}",
            ty,
            conclusion.rhs,
            fmt_rat(&weight),
            fmt_rat(&conclusion.weight)
        )));
    }
    Ok(branches)
}

fn reduce_rec(pi: &Derivation, mode: Mode) -> Result<Vec<Derivation>, TransformError> {
    let term = &pi.conclusion.term;
    match (term, pi.rule) {
        (Term::Choice(_, _), RuleName::Choice) => {
            Ok(vec![pi.premises[0].clone(), pi.premises[1].clone()])
        }
        (Term::App(_, _), RuleName::App) if mode == Mode::Cbv => {
            // β: the function premise is a unit bang over a lam node
            let bang = &pi.premises[0];
            let arg = &pi.premises[1];
            if bang.rule != RuleName::Bang || bang.premises.len() != 1 {
                return Err(invalid("β-redex function premise is not a unit bang"));
            }
            let lam = &bang.premises[0];
            if lam.rule != RuleName::Lam {
                return Err(invalid("β-redex function premise does not end in lam"));
            }
            let binder = match &lam.conclusion.term {
                Term::Lam(x, _) => x.clone(),
                _ => return Err(invalid("lam node without an abstraction subject")),
            };
            let body = subst_rec(&lam.premises[0], &binder, arg, mode)?;
            Ok(vec![body])
        }
        (Term::App(f, _), RuleName::App) if mode == Mode::Cbn => {
            if matches!(**f, Term::Lam(_, _)) {
                // β with an arbitrary argument
                let head = &pi.premises[0];
                if head.rule != RuleName::Lam {
                    return Err(invalid("β-redex head premise does not end in lam"));
                }
                let binder = match &head.conclusion.term {
                    Term::Lam(x, _) => x.clone(),
                    _ => return Err(invalid("lam node without an abstraction subject")),
                };
                if pi.premises.len() != 2 {
                    return Err(invalid("β-redex must have exactly one argument premise"));
                }
                let body = subst_rec(&head.premises[0], &binder, &pi.premises[1], mode)?;
                Ok(vec![body])
            } else {
                // head reduction: reduce the head premise and re-distribute
                // the argument premises along the branch partition
                let head = &pi.premises[0];
                let args = &pi.premises[1..];
                let entries = head
                    .conclusion
                    .rhs
                    .dist_entries()
                    .map_err(|e| invalid(e.to_string()))?
                    .to_vec();
                let inv = invert_assoc(&pi.assoc);
                let red = step(&head.conclusion.term, mode)?
                    .ok_or_else(|| invalid("head premise subject does not reduce"))?;
                let head_branches = reduce_rec(head, mode)?;
                let arg_term = match term {
                    Term::App(_, a) => (**a).clone(),
                    _ => unreachable!(),
                };
                let mut used = vec![false; entries.len()];
                let mut out = Vec::with_capacity(head_branches.len());
                for ((q, _), hb) in red.entries().iter().zip(head_branches.iter()) {
                    let target =
                        scale_dist(q, &hb.conclusion.rhs).map_err(|e| invalid(e.to_string()))?;
                    let target_entries = target
                        .dist_entries()
                        .map_err(|e| invalid(e.to_string()))?
                        .to_vec();
                    let claimed = claim_entries(&entries, &target_entries, &mut used)?;
                    let sub_entries = hb
                        .conclusion
                        .rhs
                        .dist_entries()
                        .map_err(|e| invalid(e.to_string()))?
                        .to_vec();
                    let mut sub_used = vec![false; sub_entries.len()];
                    let mut new_args = Vec::with_capacity(claimed.len());
                    let mut new_assoc = Vec::with_capacity(claimed.len());
                    for &e_ix in &claimed {
                        let j = inv[e_ix];
                        new_args.push(args[j].clone());
                        let rescaled = (&entries[e_ix].0 / q, entries[e_ix].1.clone());
                        let ix = claim_entries(
                            &sub_entries,
                            std::slice::from_ref(&rescaled),
                            &mut sub_used,
                        )?;
                        new_assoc.push(ix[0]);
                    }
                    out.push(make_app_cbn(
                        hb.clone(),
                        arg_term.clone(),
                        new_args,
                        new_assoc,
                    )?);
                }
                Ok(out)
            }
        }
        (Term::Let(_, bound, body), RuleName::Let) => {
            let n_prem = &pi.premises[pi.premises.len() - 1];
            let m_prems = &pi.premises[..pi.premises.len() - 1];
            let binder = match term {
                Term::Let(x, _, _) => x.clone(),
                _ => unreachable!(),
            };
            if bound.is_value() {
                // letV: substitute the value derivation into the body premise
                if n_prem.rule == RuleName::Zero {
                    // derived-rule shape ⊢¹ let x = V in M : 0̄
                    let reduct = body.substitute(&binder, bound);
                    return Ok(vec![make_zero(mode, reduct)?]);
                }
                if n_prem.rule != RuleName::Val {
                    return Err(invalid("letV bound premise must end in val or zero"));
                }
                if m_prems.len() != 1 {
                    return Err(invalid("letV must have exactly one body premise"));
                }
                let value_d = &n_prem.premises[0];
                let body_d = subst_rec(&m_prems[0], &binder, value_d, mode)?;
                Ok(vec![body_d])
            } else {
                // letC: reduce the bound-term premise and re-partition
                let entries = n_prem
                    .conclusion
                    .rhs
                    .dist_entries()
                    .map_err(|e| invalid(e.to_string()))?
                    .to_vec();
                let inv = invert_assoc(&pi.assoc);
                let red =
                    step(bound, mode)?.ok_or_else(|| invalid("bound term does not reduce"))?;
                if n_prem.conclusion.weight.is_zero() {
                    // ⊢⁰N:0̄; every branch keeps the null type at weight 0
                    if n_prem.rule != RuleName::Zero {
                        return Err(invalid("weight-0 bound premise must be zero-rooted"));
                    }
                    let mut out = Vec::with_capacity(red.len());
                    for (_, n_i) in red.entries() {
                        let branch = Term::let_in(binder.clone(), n_i.clone(), (**body).clone());
                        out.push(make_zero(mode, branch)?);
                    }
                    return Ok(out);
                }
                let n_branches = reduce_rec(n_prem, mode)?;
                let mut used = vec![false; entries.len()];
                let mut out = Vec::with_capacity(n_branches.len());
                for ((q, _), nb) in red.entries().iter().zip(n_branches.iter()) {
                    let target =
                        scale_dist(q, &nb.conclusion.rhs).map_err(|e| invalid(e.to_string()))?;
                    let target_entries = target
                        .dist_entries()
                        .map_err(|e| invalid(e.to_string()))?
                        .to_vec();
                    let claimed = claim_entries(&entries, &target_entries, &mut used)?;
                    let sub_entries = nb
                        .conclusion
                        .rhs
                        .dist_entries()
                        .map_err(|e| invalid(e.to_string()))?
                        .to_vec();
                    let mut sub_used = vec![false; sub_entries.len()];
                    let mut new_m = Vec::with_capacity(claimed.len());
                    let mut new_assoc = Vec::with_capacity(claimed.len());
                    for &e_ix in &claimed {
                        let j = inv[e_ix];
                        new_m.push(m_prems[j].clone());
                        let rescaled = (&entries[e_ix].0 / q, entries[e_ix].1.clone());
                        let ix = claim_entries(
                            &sub_entries,
                            std::slice::from_ref(&rescaled),
                            &mut sub_used,
                        )?;
                        new_assoc.push(ix[0]);
                    }
                    out.push(make_let(
                        &binder,
                        (**body).clone(),
                        new_m,
                        nb.clone(),
                        new_assoc,
                    )?);
                }
                Ok(out)
            }
        }
        _ => Err(invalid(format!(
            "rule {} does not conclude a reducible judgment for {}",
            pi.rule, term
        ))),
    }
}

fn invert_assoc(assoc: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; assoc.len()];
    for (j, &e) in assoc.iter().enumerate() {
        inv[e] = j;
    }
    inv
}

// ---------------------------------------------------------------------------
// Weighted subject expansion

/// The result of one expansion step: the rebuilt derivation together with
/// the lower bound 1 + Σqᵢwᵢ its weight was checked against.
#[derive(Debug, Clone)]
pub struct ExpansionResult {
    pub derivation: Derivation,
    pub bound: Rat,
}

/// Weighted subject expansion: from P → ⟨qᵢPᵢ⟩ and one derivation per
/// branch, builds ⊢ʷP:⊎qᵢ𝔞ᵢ with w ≥ 1 + Σqᵢwᵢ. The inequality can be
/// strict only through the let case.
pub fn subject_expand(
    term: &Term,
    branches: &[Derivation],
    mode: Mode,
) -> Result<ExpansionResult, TransformError> {
    let red = match step(term, mode)? {
        Some(m) => m,
        None => return Err(invalid("not a redex: the term is a value")),
    };
    if red.len() != branches.len() {
        return Err(invalid(format!(
            "branch/derivation count mismatch: step has {} branches, got {} derivations",
            red.len(),
            branches.len()
        )));
    }
    let mut bound = Rat::one();
    for ((q, p_i), b) in red.entries().iter().zip(branches.iter()) {
        if b.conclusion.term != *p_i {
            return Err(invalid(format!(
                "branch derivation types {}, expected {}",
                b.conclusion.term, p_i
            )));
        }
        if !b.conclusion.ctx.is_empty() {
            return Err(invalid("branch derivations must have empty contexts"));
        }
        bound += q * &b.conclusion.weight;
    }
    let derivation = expand_rec(term, &red, branches, mode)?;
    check_derivation(&derivation, mode)?;
    if derivation.conclusion.weight < bound {
        return Err(invalid(format!(
            "expansion bound failed: weight {} < 1 + Σ qᵢwᵢ = {}",
            fmt_rat(&derivation.conclusion.weight),
            fmt_rat(&bound)
        )));
    }
    Ok(ExpansionResult { derivation, bound })
}

fn expand_rec(
    term: &Term,
    red: &MultiDist<Term>,
    branches: &[Derivation],
    mode: Mode,
) -> Result<Derivation, TransformError> {
    match term {
        Term::Choice(_, _) => Ok(make_choice(mode, branches[0].clone(), branches[1].clone())?),
        Term::App(f, a) => match (&**f, mode) {
            (Term::Lam(x, body), Mode::Cbv) => {
                let (_, d1, d2) = anti_substitute(&branches[0], body, x, a, mode)?;
                let lam = make_lam(mode, x, d1)?;
                let bang = make_bang(
                    mode,
                    lam.conclusion.term.clone(),
                    vec![Rat::one()],
                    vec![lam],
                )?;
                Ok(make_app_cbv(bang, d2)?)
            }
            (Term::Lam(x, body), Mode::Cbn) => {
                let (_, d1, d2) = anti_substitute(&branches[0], body, x, a, mode)?;
                let lam = make_lam(mode, x, d1)?;
                Ok(make_app_cbn(lam, (**a).clone(), vec![d2], vec![0])?)
            }
            (_, Mode::Cbn) => {
                // head case: expand the heads, then re-aggregate the
                // argument premises under the rescaled distribution
                let head_red = step(f, mode)?
                    .ok_or_else(|| invalid("head of the application does not reduce"))?;
                let mut head_branches = Vec::with_capacity(branches.len());
                let mut arg_parts: Vec<(Rat, Vec<(Derivation, Rat, TypeExpr)>)> = Vec::new();
                for ((q, n_i), b) in red.entries().iter().zip(branches.iter()) {
                    let b = match b.rule {
                        RuleName::Zero => {
                            // replace ⊢⁰NᵢM:0̄ by the K = ∅ application form
                            let head = make_zero(
                                mode,
                                match n_i {
                                    Term::App(h, _) => (**h).clone(),
                                    _ => return Err(invalid("head branch is not an application")),
                                },
                            )?;
                            make_app_cbn(head, (**a).clone(), vec![], vec![])?
                        }
                        RuleName::App => b.clone(),
                        _ => {
                            return Err(invalid(
                                "incompatible branch derivation for a head reduction",
                            ))
                        }
                    };
                    let head_prem = b.premises[0].clone();
                    let entries = head_prem
                        .conclusion
                        .rhs
                        .dist_entries()
                        .map_err(|e| invalid(e.to_string()))?
                        .to_vec();
                    let mut carried = Vec::new();
                    for (j, arg_prem) in b.premises[1..].iter().enumerate() {
                        let (p, arrow) = &entries[b.assoc[j]];
                        carried.push((arg_prem.clone(), p * q, arrow.clone()));
                    }
                    arg_parts.push((q.clone(), carried));
                    head_branches.push(head_prem);
                }
                let head = expand_rec(f, &head_red, &head_branches, mode)?;
                let head_entries = head
                    .conclusion
                    .rhs
                    .dist_entries()
                    .map_err(|e| invalid(e.to_string()))?
                    .to_vec();
                let mut used = vec![false; head_entries.len()];
                let mut args = Vec::new();
                let mut assoc = Vec::new();
                for (_, carried) in &arg_parts {
                    for (arg_prem, p, arrow) in carried {
                        let target = (p.clone(), arrow.clone());
                        let ix =
                            claim_entries(&head_entries, std::slice::from_ref(&target), &mut used)?;
                        args.push(arg_prem.clone());
                        assoc.push(ix[0]);
                    }
                }
                Ok(make_app_cbn(head, (**a).clone(), args, assoc)?)
            }
            _ => Err(invalid("cannot expand over this application shape")),
        },
        Term::Let(x, bound, body) => {
            if bound.is_value() {
                // letV
                let (inter, d1, d2) = anti_substitute(&branches[0], body, x, bound, mode)?;
                let val = make_val_cbv(d2)?;
                debug_assert_eq!(val.conclusion.rhs, TypeExpr::dist_singleton(inter));
                Ok(make_let(x, (**body).clone(), vec![d1], val, vec![0])?)
            } else {
                // letC, with the three-way case analysis on branch shapes
                let bound_red =
                    step(bound, mode)?.ok_or_else(|| invalid("bound term does not reduce"))?;
                if branches.iter().all(|b| b.rule == RuleName::Zero) {
                    // (i): one derived-rule node covers every branch
                    let n = make_zero(mode, (**bound).clone())?;
                    return Ok(make_let(x, (**body).clone(), vec![], n, vec![])?);
                }
                // (iii): lift the remaining Zero-rooted branches to the
                // weight-1 derived form, then proceed as (ii)
                let mut lets = Vec::with_capacity(branches.len());
                for ((_, p_i), b) in red.entries().iter().zip(branches.iter()) {
                    match b.rule {
                        RuleName::Zero => {
                            let n_i = match p_i {
                                Term::Let(_, n, _) => (**n).clone(),
                                _ => return Err(invalid("letC branch is not a let")),
                            };
                            let n = make_zero(mode, n_i)?;
                            lets.push(make_let(x, (**body).clone(), vec![], n, vec![])?);
                        }
                        RuleName::Let => lets.push(b.clone()),
                        _ => {
                            return Err(invalid(
                                "incompatible branch derivation for a letC reduction",
                            ))
                        }
                    }
                }
                let mut bound_branches = Vec::with_capacity(lets.len());
                let mut carried_parts: Vec<Vec<(Derivation, Rat, TypeExpr)>> = Vec::new();
                for ((q, _), b) in red.entries().iter().zip(lets.iter()) {
                    let n_prem = b.premises[b.premises.len() - 1].clone();
                    let m_prems = &b.premises[..b.premises.len() - 1];
                    let entries = n_prem
                        .conclusion
                        .rhs
                        .dist_entries()
                        .map_err(|e| invalid(e.to_string()))?
                        .to_vec();
                    let mut carried = Vec::new();
                    for (j, mp) in m_prems.iter().enumerate() {
                        let (p, inter) = &entries[b.assoc[j]];
                        carried.push((mp.clone(), p * q, inter.clone()));
                    }
                    carried_parts.push(carried);
                    bound_branches.push(n_prem);
                }
                let n = expand_rec(bound, &bound_red, &bound_branches, mode)?;
                let n_entries = n
                    .conclusion
                    .rhs
                    .dist_entries()
                    .map_err(|e| invalid(e.to_string()))?
                    .to_vec();
                let mut used = vec![false; n_entries.len()];
                let mut m_prems = Vec::new();
                let mut assoc = Vec::new();
                for carried in &carried_parts {
                    for (mp, p, inter) in carried {
                        let target = (p.clone(), inter.clone());
                        let ix =
                            claim_entries(&n_entries, std::slice::from_ref(&target), &mut used)?;
                        m_prems.push(mp.clone());
                        assoc.push(ix[0]);
                    }
                }
                Ok(make_let(x, (**body).clone(), m_prems, n, assoc)?)
            }
        }
        _ => Err(invalid("cannot expand over a value")),
    }
}

// ---------------------------------------------------------------------------
// Completeness synthesizers

/// Synthesizes a tight derivation for the closed term `t` with
/// ‖type‖ = Pᵏ(t) exactly and weight ≥ eTᵏ(t); both are verified against
/// the evaluator before returning.
pub fn tight_complete(t: &Term, k: usize, mode: Mode) -> Result<Derivation, TransformError> {
    complete(t, k, mode, false)
}

/// Synthesizes a derivation of the null type 0̄ with weight ≥ eTᵏ(t).
pub fn null_complete(t: &Term, k: usize, mode: Mode) -> Result<Derivation, TransformError> {
    complete(t, k, mode, true)
}

fn complete(t: &Term, k: usize, mode: Mode, null: bool) -> Result<Derivation, TransformError> {
    if !t.is_closed() {
        return Err(TransformError::Eval(EvalError::OpenTerm(t.clone())));
    }
    let mut memo = HashMap::new();
    let d = complete_rec(t, k, mode, null, &mut memo)?;
    // verify the completeness contract against the evaluator
    let trace = evaluate(t, k, mode)?;
    let (ps, ets) = approximants_along(&trace);
    if null {
        if d.conclusion.rhs != TypeExpr::null_dist() {
            return Err(invalid("null completeness produced a non-null type"));
        }
    } else {
        let norm = crate::types::dist_norm(&d.conclusion.rhs)
            .ok_or_else(|| invalid("synthesized derivation does not conclude a distribution"))?;
        if norm != ps[k] {
            return Err(invalid(format!(
                "tight completeness norm {} differs from P^{}={}",
                fmt_rat(&norm),
                k,
                fmt_rat(&ps[k])
            )));
        }
        if !crate::types::is_tight(&d.conclusion.rhs, mode) {
            return Err(invalid("tight completeness produced a non-tight type"));
        }
    }
    if d.conclusion.weight < ets[k] {
        return Err(invalid(format!(
            "completeness weight {} below eT^{}={}",
            fmt_rat(&d.conclusion.weight),
            k,
            fmt_rat(&ets[k])
        )));
    }
    check_derivation(&d, mode)?;
    Ok(d)
}

fn complete_rec(
    t: &Term,
    k: usize,
    mode: Mode,
    null: bool,
    memo: &mut HashMap<(String, usize), Derivation>,
) -> Result<Derivation, TransformError> {
    // the key is the printed term, not the term itself: Term hashing is
    // α-insensitive, and a hit on an α-variant would hand back a derivation
    // whose binder names no longer line up with the reduct
    let key = (t.to_string(), k);
    if let Some(d) = memo.get(&key) {
        return Ok(d.clone());
    }
    let d = if t.is_value() {
        if null {
            make_zero(mode, t.clone())?
        } else {
            tight_value_derivations(t, mode)?.0
        }
    } else if k == 0 {
        make_zero(mode, t.clone())?
    } else {
        let red = step(t, mode)?.expect("non-value must step");
        let mut branches = Vec::with_capacity(red.len());
        for (_, t_i) in red.entries() {
            branches.push(complete_rec(t_i, k - 1, mode, null, memo)?);
        }
        expand_rec(t, &red, &branches, mode)?
    };
    memo.insert(key, d.clone());
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivation::{scale_derivation, weight};
    use crate::multidist::rat;
    use crate::semantics::{et_approx, p_approx};
    use crate::stdlib;
    use crate::types::{is_tight, parse_type};

    fn ty(src: &str) -> TypeExpr {
        parse_type(src).unwrap()
    }

    fn theta1() -> Derivation {
        let s1 = crate::derivation::tests::sigma1();
        make_bang(Mode::Cbv, stdlib::d_term(), vec![Rat::one()], vec![s1]).unwrap()
    }

    #[test]
    fn substitute_var_base_case() {
        // π = Var (z:𝔪C ⊢⁰ z:𝔪C), φ = ⊢ᵛ V:𝔪C → φ itself
        let phi = scale_derivation(&rat(1, 2), &theta1(), Mode::Cbv).unwrap();
        let mc = phi.conclusion.rhs.clone();
        let pi = make_var(Mode::Cbv, "z", mc).unwrap();
        let out = substitute_derivation(&pi, "z", &phi, Mode::Cbv).unwrap();
        assert_eq!(out, phi);
        assert_eq!(out.conclusion.weight, rat(1, 1));
    }

    #[test]
    fn substitute_when_variable_absent() {
        // z ∉ fv(M), φ = ⊢⁰V:[] → π unchanged up to weight +0
        let pi = crate::derivation::tests::sigma1();
        let phi = make_bang(Mode::Cbv, stdlib::identity(), vec![], vec![]).unwrap();
        let out = substitute_derivation(&pi, "z", &phi, Mode::Cbv).unwrap();
        assert_eq!(out.conclusion.weight, pi.conclusion.weight);
        assert_eq!(out.conclusion.rhs, pi.conclusion.rhs);
    }

    #[test]
    fn substitute_through_sigma2_body() {
        // the xx ⊕ I premise of Σ₂ with x:[½·A₁], substituted with the
        // matching half-scaled derivation of D, types DD ⊕ I
        let s2 = crate::derivation::tests::sigma2();
        let body = s2.premises[0].clone(); // x:[½·A₁] ⊢¹ xx⊕I : ⟨¼[],½[]⟩
        let phi = scale_derivation(&rat(1, 2), &theta1(), Mode::Cbv).unwrap();
        let out = substitute_derivation(&body, "x", &phi, Mode::Cbv).unwrap();
        assert_eq!(
            out.conclusion.term,
            Term::choice(stdlib::dd(), stdlib::identity())
        );
        // weight w + v = 1 + 1
        assert_eq!(out.conclusion.weight, rat(2, 1));
        assert_eq!(out.conclusion.rhs, ty("<1/4 [], 1/2 []>"));
        assert!(size(&out) <= size(&body) + size(&phi));
    }

    #[test]
    fn anti_substitute_base_cases() {
        // M = x: σ moves into the intersection
        let phi = theta1();
        let (inter, d1, d2) =
            anti_substitute(&phi, &Term::var("x"), "x", &stdlib::d_term(), Mode::Cbv).unwrap();
        assert_eq!(inter, phi.conclusion.rhs);
        assert_eq!(d1.rule, RuleName::Var);
        assert_eq!(d2, phi);
        // x ∉ fv(M)
        let zero = make_zero(Mode::Cbv, stdlib::identity()).unwrap();
        let (inter, d1, d2) =
            anti_substitute(&zero, &stdlib::identity(), "q", &stdlib::d_term(), Mode::Cbv)
                .unwrap();
        assert_eq!(inter, TypeExpr::empty_inter());
        assert_eq!(d1.conclusion.rhs, TypeExpr::null_dist());
        assert_eq!(*weight(&d2), Rat::zero());
    }

    #[test]
    fn anti_substitute_inverts_substitution() {
        // take the derivation of DD ⊕ I, viewed as (xx ⊕ I){D/x};
        // substituting back must recover the original judgment
        let s2 = crate::derivation::tests::sigma2();
        let body = s2.premises[0].clone();
        let phi = scale_derivation(&rat(1, 2), &theta1(), Mode::Cbv).unwrap();
        let substituted = substitute_derivation(&body, "x", &phi, Mode::Cbv).unwrap();
        let skeleton = Term::choice(
            Term::app(Term::var("x"), Term::var("x")),
            stdlib::identity(),
        );
        let (inter, d1, d2) =
            anti_substitute(&substituted, &skeleton, "x", &stdlib::d_term(), Mode::Cbv).unwrap();
        assert_eq!(
            d1.conclusion.weight.clone() + d2.conclusion.weight.clone(),
            substituted.conclusion.weight
        );
        assert_eq!(d1.conclusion.ctx.get("x"), inter);
        let roundtrip = substitute_derivation(&d1, "x", &d2, Mode::Cbv).unwrap();
        assert_eq!(roundtrip.conclusion, substituted.conclusion);
    }

    #[test]
    fn subject_reduce_choice_case() {
        // ⊕-rooted: the two premises come straight back
        let i_unit = tight_value_derivations(&stdlib::identity(), Mode::Cbv)
            .unwrap()
            .0;
        let zero = make_zero(Mode::Cbv, stdlib::omega()).unwrap();
        let pi = make_choice(Mode::Cbv, i_unit.clone(), zero.clone()).unwrap();
        let branches = subject_reduce(&pi, Mode::Cbv).unwrap();
        assert_eq!(branches.len(), 2);
        assert_eq!(branches[0].conclusion, i_unit.conclusion);
        assert_eq!(branches[1].conclusion, zero.conclusion);
    }

    #[test]
    fn subject_reduce_rejects_zero_weight_and_values() {
        let zero = make_zero(Mode::Cbv, stdlib::omega()).unwrap();
        assert!(matches!(
            subject_reduce(&zero, Mode::Cbv),
            Err(TransformError::Invalid(m)) if m.contains("weight is zero")
        ));
        let val = tight_value_derivations(&stdlib::identity(), Mode::Cbv)
            .unwrap()
            .0;
        assert!(matches!(
            subject_reduce(&val, Mode::Cbv),
            Err(TransformError::Invalid(m)) if m.contains("not a redex")
        ));
    }

    #[test]
    fn tight_complete_examples() {
        // values: ⊢⁰I:⟨1[]⟩
        let d = tight_complete(&stdlib::identity(), 5, Mode::Cbv).unwrap();
        assert_eq!(d.conclusion.rhs, ty("<1 []>"));
        assert_eq!(*weight(&d), Rat::zero());
        // non-value at k=0: the zero axiom
        let d = tight_complete(&stdlib::omega(), 0, Mode::Cbv).unwrap();
        assert_eq!(d.rule, RuleName::Zero);
        // the running example at k=6: norm 7/8, weight ≥ 7/2 (here exactly)
        let d = tight_complete(&stdlib::dd(), 6, Mode::Cbv).unwrap();
        assert!(is_tight(&d.conclusion.rhs, Mode::Cbv));
        assert_eq!(
            crate::types::dist_norm(&d.conclusion.rhs).unwrap(),
            rat(7, 8)
        );
        assert_eq!(*weight(&d), rat(7, 2));
        assert_eq!(d.conclusion.rhs, ty("<1/8 [], 1/4 [], 1/2 []>"));
    }

    #[test]
    fn null_complete_examples() {
        let d = null_complete(&stdlib::omega(), 3, Mode::Cbv).unwrap();
        assert_eq!(d.conclusion.rhs, TypeExpr::null_dist());
        assert!(*weight(&d) >= rat(3, 1));
        let d = null_complete(&stdlib::identity(), 9, Mode::Cbv).unwrap();
        assert_eq!(*weight(&d), Rat::zero());
        // I ⊕ ΔΔ: weight tracks eT^n = 1 + (n-1)/2
        for n in [1usize, 3, 7] {
            let d = null_complete(&stdlib::i_plus_omega(), n, Mode::Cbv).unwrap();
            let et = et_approx(&stdlib::i_plus_omega(), n, Mode::Cbv).unwrap();
            assert_eq!(et, Rat::one() + rat(n as i64 - 1, 2));
            assert!(*weight(&d) >= et);
        }
    }

    #[test]
    fn reduce_then_expand_round_trip_on_dd() {
        let dd = stdlib::dd();
        for k in 1..=8 {
            let pi = tight_complete(&dd, k, Mode::Cbv).unwrap();
            if weight(&pi).is_zero() {
                continue;
            }
            let branches = subject_reduce(&pi, Mode::Cbv).unwrap();
            let back = subject_expand(&dd, &branches, Mode::Cbv).unwrap();
            assert_eq!(back.derivation.conclusion.rhs, pi.conclusion.rhs);
            assert!(back.derivation.conclusion.weight >= back.bound);
        }
    }

    #[test]
    fn cbn_completeness_on_dd() {
        // DD is also a CbN program; head reduction agrees with CbV on it
        let dd = stdlib::dd();
        let d = tight_complete(&dd, 6, Mode::Cbn).unwrap();
        assert!(is_tight(&d.conclusion.rhs, Mode::Cbn));
        assert_eq!(
            crate::types::dist_norm(&d.conclusion.rhs).unwrap(),
            p_approx(&dd, 6, Mode::Cbn).unwrap()
        );
        let branches = subject_reduce(&d, Mode::Cbn).unwrap();
        let back = subject_expand(&dd, &branches, Mode::Cbn).unwrap();
        assert_eq!(back.derivation.conclusion.rhs, d.conclusion.rhs);
    }

    #[test]
    fn expansion_bound_is_exact_without_lets() {
        let dd = stdlib::dd();
        let pi = tight_complete(&dd, 4, Mode::Cbv).unwrap();
        let branches = subject_reduce(&pi, Mode::Cbv).unwrap();
        let back = subject_expand(&dd, &branches, Mode::Cbv).unwrap();
        // no lets in DD: the rebuilt weight equals the bound
        assert_eq!(back.derivation.conclusion.weight, back.bound);
        assert_eq!(back.derivation.conclusion.weight, pi.conclusion.weight);
    }

    #[test]
    fn let_zero_branches_expand_to_weight_one() {
        // all-Zero branches for let x = N in M give ⊢¹ let x = N in M : 0̄
        let n = Term::choice(stdlib::identity(), stdlib::identity());
        let term = Term::let_in("x", n, Term::app(Term::var("x"), Term::var("x")));
        let red = step(&term, Mode::Cbv).unwrap().unwrap();
        let branches: Vec<Derivation> = red
            .entries()
            .iter()
            .map(|(_, t)| make_zero(Mode::Cbv, t.clone()).unwrap())
            .collect();
        let out = subject_expand(&term, &branches, Mode::Cbv).unwrap();
        assert_eq!(out.derivation.conclusion.weight, Rat::one());
        assert_eq!(out.derivation.conclusion.rhs, TypeExpr::null_dist());
        assert_eq!(out.bound, Rat::one());
    }

    #[test]
    fn expansion_keeps_equal_type_entries_separate() {
        // let x = (V₁ ⊕ V₂) in I, with branch derivations typing the body
        // at two different distributions under the same intersection []:
        // the rebuilt bound-term type is ⟨½[], ½[]⟩, two entries that a
        // plain distribution would have collapsed, and the association
        // routes each to its own body premise
        let v1 = stdlib::identity();
        let v2 = stdlib::delta();
        let body = stdlib::identity();
        let term = Term::let_in("x", Term::choice(v1.clone(), v2.clone()), body.clone());
        let branch = |v: &Term, null_body: bool| {
            let m_prem = if null_body {
                make_zero(Mode::Cbv, body.clone()).unwrap()
            } else {
                tight_value_derivations(&body, Mode::Cbv).unwrap().0
            };
            let n_prem = make_val_cbv(
                make_bang(Mode::Cbv, v.clone(), vec![], vec![]).unwrap(),
            )
            .unwrap();
            make_let("x", body.clone(), vec![m_prem], n_prem, vec![0]).unwrap()
        };
        let b1 = branch(&v1, false);
        let b2 = branch(&v2, true);
        let out = subject_expand(&term, &[b1, b2], Mode::Cbv).unwrap();
        let d = out.derivation;
        assert_eq!(d.rule, RuleName::Let);
        let n_prem = &d.premises[d.premises.len() - 1];
        let entries = n_prem.conclusion.rhs.dist_entries().unwrap();
        assert_eq!(entries.len(), 2, "entries must not collapse");
        assert_eq!(entries[0], entries[1]);
        // the two body premises differ even though their entries agree
        assert_ne!(
            d.premises[0].conclusion.rhs,
            d.premises[1].conclusion.rhs
        );
        assert_eq!(d.conclusion.weight, rat(2, 1));
        check_derivation(&d, Mode::Cbv).unwrap();
    }

    #[test]
    fn reduce_through_the_derived_let_rule() {
        // Γ ⊢¹ let x = N in M : 0̄ with a Zero-rooted bound premise reduces
        // to Zero branches of weight 0
        let n = Term::choice(stdlib::omega(), stdlib::omega());
        let term = Term::let_in("x", n.clone(), Term::var("x"));
        let pi = make_let(
            "x",
            Term::var("x"),
            vec![],
            make_zero(Mode::Cbv, n).unwrap(),
            vec![],
        )
        .unwrap();
        assert_eq!(pi.conclusion.term, term);
        let branches = subject_reduce(&pi, Mode::Cbv).unwrap();
        assert_eq!(branches.len(), 2);
        for b in &branches {
            assert_eq!(b.rule, RuleName::Zero);
            assert_eq!(b.conclusion.rhs, TypeExpr::null_dist());
        }
    }

    #[test]
    fn mixed_zero_let_branches_overapproximate() {
        // one Zero branch and one real branch: the rebuilt weight may
        // exceed 1 + Σ qᵢwᵢ, never undershoot
        let n = Term::choice(stdlib::identity(), stdlib::omega());
        let term = Term::let_in("x", n.clone(), Term::var("x"));
        let red = step(&term, Mode::Cbv).unwrap().unwrap();
        let b0 = null_complete(&red.entries()[0].1, 2, Mode::Cbv).unwrap();
        let b1 = make_zero(Mode::Cbv, red.entries()[1].1.clone()).unwrap();
        let out = subject_expand(&term, &[b0, b1], Mode::Cbv).unwrap();
        assert!(out.derivation.conclusion.weight >= out.bound);
    }
}
