//! The three-layer type grammar for both calculi: arrow types, scaled
//! intersection multisets, and type multidistributions.
//!
//! In CbV an intersection collects scaled *arrows* and a type distribution
//! ranges over *intersections*; in CbN the two middle layers swap roles
//! (intersections collect scaled distributions, distributions range over
//! arrows) and the atom `*` joins the arrow layer. One `TypeExpr` covers
//! both; `check_wf` enforces the mode-specific layering.
//!
//! Intersections and distributions are stored sorted under the structural
//! order, so derived equality is canonical multiset equality. Entries with
//! identical payload and scale are kept as repeated entries, never coalesced:
//! non-idempotency is the point.

use crate::lex::{tokenize, SyntaxError, Tok, Tokens};
use crate::multidist::{fmt_rat, is_probability, Rat};
use crate::syntax::Mode;
use num_traits::{One, Zero};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TypeExpr {
    /// CbN-only arrow atom.
    Star,
    /// 𝔪A → 𝔟: domain is an intersection, codomain a distribution.
    Arrow(Box<TypeExpr>, Box<TypeExpr>),
    /// Scaled multiset [q₁·e₁, …]; scale factors in (0,1], total unbounded.
    Inter(Vec<(Rat, TypeExpr)>),
    /// Multidistribution ⟨p₁ e₁, …⟩ with Σpᵢ ≤ 1; ⟨⟩ is the null type 0̄.
    Dist(Vec<(Rat, TypeExpr)>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeError {
    ScaleOutOfRange(Rat),
    ProbabilityOutOfRange(Rat),
    MassOverflow(Rat),
    ExpectedInter(TypeExpr),
    ExpectedDist(TypeExpr),
    IllFormed { mode: Mode, detail: String },
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeError::ScaleOutOfRange(q) => write!(f, "scale factor {} outside (0,1]", fmt_rat(q)),
            TypeError::ProbabilityOutOfRange(p) => {
                write!(f, "probability {} outside (0,1]", fmt_rat(p))
            }
            TypeError::MassOverflow(n) => {
                write!(f, "type distribution mass {} exceeds 1", fmt_rat(n))
            }
            TypeError::ExpectedInter(t) => write!(f, "expected an intersection type, found {}", t),
            TypeError::ExpectedDist(t) => write!(f, "expected a type distribution, found {}", t),
            TypeError::IllFormed { mode, detail } => {
                write!(f, "ill-formed type for {}: {}", mode, detail)
            }
        }
    }
}

impl std::error::Error for TypeError {}

/// Which of the three grammar layers a `TypeExpr` is expected to inhabit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Arrow,
    Inter,
    Dist,
}

impl TypeExpr {
    /// The null type 0̄ = ⟨⟩.
    pub fn null_dist() -> TypeExpr {
        TypeExpr::Dist(Vec::new())
    }

    /// The empty intersection [].
    pub fn empty_inter() -> TypeExpr {
        TypeExpr::Inter(Vec::new())
    }

    pub fn arrow(domain: TypeExpr, codomain: TypeExpr) -> TypeExpr {
        TypeExpr::Arrow(Box::new(domain), Box::new(codomain))
    }

    /// Builds an intersection, validating scale factors and sorting into
    /// canonical order.
    pub fn inter(mut entries: Vec<(Rat, TypeExpr)>) -> Result<TypeExpr, TypeError> {
        for (q, _) in &entries {
            if !is_probability(q) {
                return Err(TypeError::ScaleOutOfRange(q.clone()));
            }
        }
        entries.sort();
        Ok(TypeExpr::Inter(entries))
    }

    /// Builds a type distribution, validating probabilities and total mass
    /// and sorting into canonical order.
    pub fn dist(mut entries: Vec<(Rat, TypeExpr)>) -> Result<TypeExpr, TypeError> {
        let mut norm = Rat::zero();
        for (p, _) in &entries {
            if !is_probability(p) {
                return Err(TypeError::ProbabilityOutOfRange(p.clone()));
            }
            norm += p;
        }
        if norm > Rat::one() {
            return Err(TypeError::MassOverflow(norm));
        }
        entries.sort();
        Ok(TypeExpr::Dist(entries))
    }

    /// ⟨1 payload⟩.
    pub fn dist_singleton(payload: TypeExpr) -> TypeExpr {
        TypeExpr::Dist(vec![(Rat::one(), payload)])
    }

    /// [1·payload].
    pub fn inter_singleton(payload: TypeExpr) -> TypeExpr {
        TypeExpr::Inter(vec![(Rat::one(), payload)])
    }

    pub fn layer(&self) -> Layer {
        match self {
            TypeExpr::Star | TypeExpr::Arrow(_, _) => Layer::Arrow,
            TypeExpr::Inter(_) => Layer::Inter,
            TypeExpr::Dist(_) => Layer::Dist,
        }
    }

    pub fn inter_entries(&self) -> Result<&[(Rat, TypeExpr)], TypeError> {
        match self {
            TypeExpr::Inter(es) => Ok(es),
            other => Err(TypeError::ExpectedInter(other.clone())),
        }
    }

    pub fn dist_entries(&self) -> Result<&[(Rat, TypeExpr)], TypeError> {
        match self {
            TypeExpr::Dist(es) => Ok(es),
            other => Err(TypeError::ExpectedDist(other.clone())),
        }
    }

    /// Checks the mode-specific layering, recursively.
    pub fn check_wf(&self, mode: Mode, layer: Layer) -> Result<(), TypeError> {
        let fail = |detail: String| Err(TypeError::IllFormed { mode, detail });
        match (self, layer) {
            (TypeExpr::Star, Layer::Arrow) => {
                if mode == Mode::Cbn {
                    Ok(())
                } else {
                    fail("`*` only exists in cbn".into())
                }
            }
            (TypeExpr::Arrow(dom, cod), Layer::Arrow) => {
                dom.check_wf(mode, Layer::Inter)?;
                cod.check_wf(mode, Layer::Dist)
            }
            (TypeExpr::Inter(es), Layer::Inter) => {
                let elem_layer = match mode {
                    Mode::Cbv => Layer::Arrow,
                    Mode::Cbn => Layer::Dist,
                };
                for (q, e) in es {
                    if !is_probability(q) {
                        return Err(TypeError::ScaleOutOfRange(q.clone()));
                    }
                    e.check_wf(mode, elem_layer)?;
                }
                Ok(())
            }
            (TypeExpr::Dist(es), Layer::Dist) => {
                let elem_layer = match mode {
                    Mode::Cbv => Layer::Inter,
                    Mode::Cbn => Layer::Arrow,
                };
                let mut norm = Rat::zero();
                for (p, e) in es {
                    if !is_probability(p) {
                        return Err(TypeError::ProbabilityOutOfRange(p.clone()));
                    }
                    norm += p;
                    e.check_wf(mode, elem_layer)?;
                }
                if norm > Rat::one() {
                    return Err(TypeError::MassOverflow(norm));
                }
                Ok(())
            }
            (t, l) => fail(format!("{} cannot appear at the {:?} layer", t, l)),
        }
    }
}

/// u·𝔪A: scales every factor of an intersection by u ∈ (0,1].
pub fn scale_inter(q: &Rat, a: &TypeExpr) -> Result<TypeExpr, TypeError> {
    if !is_probability(q) {
        return Err(TypeError::ScaleOutOfRange(q.clone()));
    }
    let entries = a.inter_entries()?;
    TypeExpr::inter(
        entries
            .iter()
            .map(|(u, e)| (u * q, e.clone()))
            .collect(),
    )
}

/// q·𝔞: scales every probability of a type distribution by q ∈ (0,1].
pub fn scale_dist(q: &Rat, a: &TypeExpr) -> Result<TypeExpr, TypeError> {
    if !is_probability(q) {
        return Err(TypeError::ScaleOutOfRange(q.clone()));
    }
    let entries = a.dist_entries()?;
    TypeExpr::dist(
        entries
            .iter()
            .map(|(p, e)| (p * q, e.clone()))
            .collect(),
    )
}

/// Multiset union of intersections.
pub fn inter_union(a: &TypeExpr, b: &TypeExpr) -> Result<TypeExpr, TypeError> {
    let mut entries = a.inter_entries()?.to_vec();
    entries.extend(b.inter_entries()?.iter().cloned());
    TypeExpr::inter(entries)
}

/// Multiset union ⊎ of type distributions; partial, mass stays ≤ 1.
pub fn dist_union(a: &TypeExpr, b: &TypeExpr) -> Result<TypeExpr, TypeError> {
    let mut entries = a.dist_entries()?.to_vec();
    entries.extend(b.dist_entries()?.iter().cloned());
    TypeExpr::dist(entries)
}

/// ‖𝔞‖ for a type distribution; `None` for intersections and arrows.
pub fn dist_norm(t: &TypeExpr) -> Option<Rat> {
    match t {
        TypeExpr::Dist(es) => Some(es.iter().fold(Rat::zero(), |acc, (p, _)| acc + p)),
        _ => None,
    }
}

/// Tight types: multidistributions over [] (CbV) or over `*` (CbN). The null
/// type 0̄ is tight in both.
pub fn is_tight(t: &TypeExpr, mode: Mode) -> bool {
    match t {
        TypeExpr::Dist(es) => es.iter().all(|(_, e)| match mode {
            Mode::Cbv => matches!(e, TypeExpr::Inter(v) if v.is_empty()),
            Mode::Cbn => matches!(e, TypeExpr::Star),
        }),
        _ => false,
    }
}

/// A typing context: a total map from variables to intersection types, with
/// only finitely many variables mapped to something other than [].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TypingContext {
    bindings: BTreeMap<String, TypeExpr>,
}

impl TypingContext {
    pub fn empty() -> Self {
        TypingContext::default()
    }

    pub fn singleton(var: impl Into<String>, inter: TypeExpr) -> Self {
        let mut ctx = TypingContext::empty();
        ctx.insert(var.into(), inter);
        ctx
    }

    /// Stores a binding; an empty intersection means absence.
    pub fn insert(&mut self, var: String, inter: TypeExpr) {
        if matches!(&inter, TypeExpr::Inter(es) if es.is_empty()) {
            self.bindings.remove(&var);
        } else {
            self.bindings.insert(var, inter);
        }
    }

    /// Γ(x); absent variables read as [].
    pub fn get(&self, var: &str) -> TypeExpr {
        self.bindings
            .get(var)
            .cloned()
            .unwrap_or_else(TypeExpr::empty_inter)
    }

    /// Removes and returns Γ(x).
    pub fn remove(&mut self, var: &str) -> TypeExpr {
        self.bindings
            .remove(var)
            .unwrap_or_else(TypeExpr::empty_inter)
    }

    pub fn domain(&self) -> impl Iterator<Item = &str> {
        self.bindings.keys().map(|s| s.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    /// Pointwise multiset union (Γ ⊎ Δ)(x) = Γ(x) ⊎ Δ(x).
    pub fn union(&self, other: &Self) -> Result<Self, TypeError> {
        let mut out = self.clone();
        for (x, inter) in &other.bindings {
            let merged = inter_union(&out.get(x), inter)?;
            out.insert(x.clone(), merged);
        }
        Ok(out)
    }

    /// q·Γ scales every binding.
    pub fn scale(&self, q: &Rat) -> Result<Self, TypeError> {
        let mut out = TypingContext::empty();
        for (x, inter) in &self.bindings {
            out.insert(x.clone(), scale_inter(q, inter)?);
        }
        Ok(out)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &TypeExpr)> {
        self.bindings.iter()
    }
}

// ---------------------------------------------------------------------------
// Textual syntax: arrows `(-> INTER TDIST)`, star `*`, intersections
// `[q . E, ...]`, distributions `<p E, ...>`, empty forms `[]` and `<>`.

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeExpr::Star => write!(f, "*"),
            TypeExpr::Arrow(dom, cod) => write!(f, "(-> {} {})", dom, cod),
            TypeExpr::Inter(es) => {
                write!(f, "[")?;
                for (i, (q, e)) in es.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{} . {}", fmt_rat(q), e)?;
                }
                write!(f, "]")
            }
            TypeExpr::Dist(es) => {
                write!(f, "<")?;
                for (i, (p, e)) in es.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{} {}", fmt_rat(p), e)?;
                }
                write!(f, ">")
            }
        }
    }
}

pub fn parse_type(src: &str) -> Result<TypeExpr, SyntaxError> {
    let mut toks = tokenize(src)?;
    let t = parse_type_tokens(&mut toks)?;
    if !toks.at_end() {
        return Err(toks.error("unexpected trailing input after type"));
    }
    Ok(t)
}

pub(crate) fn parse_type_tokens(toks: &mut Tokens) -> Result<TypeExpr, SyntaxError> {
    match toks.peek() {
        Some(Tok::Star) => {
            toks.next();
            Ok(TypeExpr::Star)
        }
        Some(Tok::LParen) => {
            toks.next();
            toks.expect(&Tok::Arrow)?;
            let dom = parse_type_tokens(toks)?;
            let cod = parse_type_tokens(toks)?;
            toks.expect(&Tok::RParen)?;
            Ok(TypeExpr::arrow(dom, cod))
        }
        Some(Tok::LBrack) => {
            toks.next();
            let mut entries = Vec::new();
            if toks.peek() != Some(&Tok::RBrack) {
                loop {
                    let q = toks.expect_num()?;
                    toks.expect(&Tok::Dot)?;
                    let e = parse_type_tokens(toks)?;
                    entries.push((q, e));
                    if toks.peek() == Some(&Tok::Comma) {
                        toks.next();
                    } else {
                        break;
                    }
                }
            }
            toks.expect(&Tok::RBrack)?;
            TypeExpr::inter(entries).map_err(|e| toks.error(e.to_string()))
        }
        Some(Tok::LAngle) => {
            toks.next();
            let mut entries = Vec::new();
            if toks.peek() != Some(&Tok::RAngle) {
                loop {
                    let p = toks.expect_num()?;
                    let e = parse_type_tokens(toks)?;
                    entries.push((p, e));
                    if toks.peek() == Some(&Tok::Comma) {
                        toks.next();
                    } else {
                        break;
                    }
                }
            }
            toks.expect(&Tok::RAngle)?;
            TypeExpr::dist(entries).map_err(|e| toks.error(e.to_string()))
        }
        Some(t) => Err(toks.error(format!("expected a type, found `{}`", t))),
        None => Err(toks.error("expected a type, found end of input")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multidist::rat;

    fn ty(src: &str) -> TypeExpr {
        parse_type(src).unwrap()
    }

    #[test]
    fn scale_inter_examples() {
        // ½ · [½·A₁] → [¼·A₁]
        let a1 = ty("(-> [] <1/2 []>)");
        let m = TypeExpr::inter(vec![(rat(1, 2), a1.clone())]).unwrap();
        let scaled = scale_inter(&rat(1, 2), &m).unwrap();
        assert_eq!(scaled, TypeExpr::inter(vec![(rat(1, 4), a1)]).unwrap());
        assert_eq!(scale_inter(&Rat::one(), &m).unwrap(), m);
        let empty = TypeExpr::empty_inter();
        assert_eq!(scale_inter(&rat(1, 3), &empty).unwrap(), empty);
        assert!(scale_inter(&rat(2, 1), &m).is_err());
    }

    #[test]
    fn scale_distributes_over_union() {
        let a = ty("[1/2 . (-> [] <>), 1 . (-> [] <1 []>)]");
        let b = ty("[1/3 . (-> [] <>)]");
        let q = rat(2, 3);
        let lhs = scale_inter(&q, &inter_union(&a, &b).unwrap()).unwrap();
        let rhs = inter_union(
            &scale_inter(&q, &a).unwrap(),
            &scale_inter(&q, &b).unwrap(),
        )
        .unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn ctx_union_examples() {
        let a = ty("(-> [] <>)");
        let b = ty("(-> [] <1 []>)");
        let g = TypingContext::singleton("x", TypeExpr::inter_singleton(a.clone()));
        let d = TypingContext::singleton(
            "x",
            TypeExpr::inter(vec![(rat(1, 2), b.clone())]).unwrap(),
        );
        let u = g.union(&d).unwrap();
        assert_eq!(
            u.get("x"),
            TypeExpr::inter(vec![(Rat::one(), a.clone()), (rat(1, 2), b.clone())]).unwrap()
        );
        assert_eq!(g.union(&TypingContext::empty()).unwrap(), g);
        let e = TypingContext::singleton("y", TypeExpr::inter_singleton(b.clone()));
        let u2 = g.union(&e).unwrap();
        let dom: Vec<&str> = u2.domain().collect();
        assert_eq!(dom, vec!["x", "y"]);
    }

    #[test]
    fn tightness() {
        assert!(is_tight(&ty("<1/8 [], 1/4 [], 1/2 []>"), Mode::Cbv));
        assert!(is_tight(&TypeExpr::null_dist(), Mode::Cbv));
        assert!(is_tight(&TypeExpr::null_dist(), Mode::Cbn));
        assert!(!is_tight(
            &ty("<1 [1 . (-> [] <1/2 []>)]>"),
            Mode::Cbv
        ));
        assert!(is_tight(&ty("<1 *>"), Mode::Cbn));
        assert!(!is_tight(&ty("<1 *>"), Mode::Cbv));
        // an intersection is never tight
        assert!(!is_tight(&ty("[]"), Mode::Cbv));
    }

    #[test]
    fn norms() {
        assert_eq!(dist_norm(&ty("<1/8 [], 1/4 [], 1/2 []>")), Some(rat(7, 8)));
        assert_eq!(dist_norm(&TypeExpr::null_dist()), Some(Rat::zero()));
        assert_eq!(dist_norm(&ty("<1 []>")), Some(Rat::one()));
        assert_eq!(dist_norm(&ty("[]")), None);
    }

    #[test]
    fn dist_mass_is_bounded() {
        assert!(TypeExpr::dist(vec![
            (rat(3, 4), TypeExpr::empty_inter()),
            (rat(1, 2), TypeExpr::empty_inter())
        ])
        .is_err());
        // intersections are not multidistributions: totals above 1 are fine
        let a = ty("(-> [] <>)");
        assert!(TypeExpr::inter(vec![(Rat::one(), a.clone()), (Rat::one(), a)]).is_ok());
    }

    #[test]
    fn canonical_order_makes_equality_multiset_like() {
        let x = ty("[1/2 . (-> [] <>), 1/4 . (-> [] <1 []>)]");
        let y = ty("[1/4 . (-> [] <1 []>), 1/2 . (-> [] <>)]");
        assert_eq!(x, y);
        // duplicates preserved
        let two = ty("[1/2 . (-> [] <>), 1/2 . (-> [] <>)]");
        let one = ty("[1/2 . (-> [] <>)]");
        assert_ne!(two, one);
    }

    #[test]
    fn wf_rejects_cross_mode_shapes() {
        let star_dist = ty("<1 *>");
        assert!(star_dist.check_wf(Mode::Cbn, Layer::Dist).is_ok());
        assert!(star_dist.check_wf(Mode::Cbv, Layer::Dist).is_err());
        let cbv_dist = ty("<1 []>");
        assert!(cbv_dist.check_wf(Mode::Cbv, Layer::Dist).is_ok());
        assert!(cbv_dist.check_wf(Mode::Cbn, Layer::Dist).is_err());
    }

    #[test]
    fn type_syntax_round_trips() {
        for src in [
            "*",
            "[]",
            "<>",
            "(-> [] <1/2 []>)",
            "<1/8 [], 1/4 [], 1/2 []>",
            "[1/4 . (-> [] <1/2 []>), 1/2 . (-> [1/2 . (-> [] <1/2 []>)] <1/4 [], 1/2 []>)]",
            "<1/2 *, 1/4 (-> [1 . <1 *>] <1 *>)>",
        ] {
            let t = ty(src);
            assert_eq!(parse_type(&t.to_string()).unwrap(), t);
        }
    }
}
