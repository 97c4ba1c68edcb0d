//! One-step reduction, its lifting to multidistributions, maximal reduction
//! sequences, and the termination-probability / expected-runtime
//! approximants Pᵏ and eTᵏ.
//!
//! Both `step` and `lift` are deterministic functions. A reduction trace
//! from a closed term preserves total mass 1 at every state; values persist
//! unchanged, so value mass is monotone along the trace.

use crate::multidist::{value_mass, MultiDist, Rat};
use crate::syntax::{Mode, Term};
use num_traits::{One, Zero};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    OpenTerm(Term),
    /// Malformed term for the mode, e.g. a CbV application whose function
    /// position is not an abstraction, or a let in CbN.
    IllFormed(Mode, Term),
    /// The per-state entry cap was hit; collapsing duplicates instead would
    /// silently turn multidistributions into distributions.
    EntryLimit { limit: usize, at_step: usize },
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::OpenTerm(t) => write!(f, "open term: {}", t),
            EvalError::IllFormed(mode, t) => write!(f, "term is not well-formed for {}: {}", mode, t),
            EvalError::EntryLimit { limit, at_step } => write!(
                f,
                "multidistribution entry limit {} exceeded at step {}",
                limit, at_step
            ),
        }
    }
}

impl std::error::Error for EvalError {}

/// One reduction step. Returns `None` exactly when `t` is a value; otherwise
/// the unique multidistribution `m` with `t → m`, of norm 1.
pub fn step(t: &Term, mode: Mode) -> Result<Option<MultiDist<Term>>, EvalError> {
    if !t.is_closed() {
        return Err(EvalError::OpenTerm(t.clone()));
    }
    step_closed(t, mode)
}

fn step_closed(t: &Term, mode: Mode) -> Result<Option<MultiDist<Term>>, EvalError> {
    match t {
        Term::Var(_) | Term::Lam(_, _) => Ok(None),
        Term::Choice(l, r) => Ok(Some(
            MultiDist::from_entries(vec![
                (Rat::new(1.into(), 2.into()), (**l).clone()),
                (Rat::new(1.into(), 2.into()), (**r).clone()),
            ])
            .expect("two half entries"),
        )),
        Term::App(f, a) => match mode {
            Mode::Cbv => match &**f {
                Term::Lam(x, body) => Ok(Some(MultiDist::singleton(body.substitute(x, a)))),
                _ => Err(EvalError::IllFormed(mode, t.clone())),
            },
            Mode::Cbn => match &**f {
                // β fires for an arbitrary (closed) argument under weak head
                // reduction; only the head position is otherwise reduced.
                Term::Lam(x, body) => Ok(Some(MultiDist::singleton(body.substitute(x, a)))),
                Term::Var(_) => Err(EvalError::OpenTerm(t.clone())),
                head => {
                    let m = step_closed(head, mode)?
                        .expect("non-value head must step");
                    Ok(Some(m.map(|h| Term::app(h.clone(), (**a).clone()))))
                }
            },
        },
        Term::Let(x, bound, body) => {
            if mode == Mode::Cbn {
                return Err(EvalError::IllFormed(mode, t.clone()));
            }
            if bound.is_value() {
                Ok(Some(MultiDist::singleton(body.substitute(x, bound))))
            } else {
                let m = step_closed(bound, mode)?
                    .expect("non-value bound term must step");
                Ok(Some(m.map(|n| {
                    Term::let_in(x.clone(), n.clone(), (**body).clone())
                })))
            }
        }
    }
}

/// Lifting of → to multidistributions: values pass through unchanged, every
/// reducible entry fires. Preserves the norm.
pub fn lift(m: &MultiDist<Term>, mode: Mode) -> Result<MultiDist<Term>, EvalError> {
    let mut entries = Vec::new();
    for (p, t) in m.entries() {
        match step(t, mode)? {
            None => entries.push((p.clone(), t.clone())),
            Some(next) => {
                for (q, u) in next.entries() {
                    entries.push((p * q, u.clone()));
                }
            }
        }
    }
    Ok(MultiDist::from_entries(entries).expect("lift preserves mass"))
}

/// The first k+1 states of the unique maximal reduction sequence from ⟨1 t⟩.
#[derive(Debug, Clone)]
pub struct ReductionTrace {
    pub start: Term,
    pub states: Vec<MultiDist<Term>>,
}

impl ReductionTrace {
    /// 1 − ‖mᵢ‖_𝒱 for each state: the probability that a redex fires there.
    pub fn fired_masses(&self) -> Vec<Rat> {
        self.states
            .iter()
            .map(|m| Rat::one() - value_mass(m))
            .collect()
    }

    pub fn final_state(&self) -> &MultiDist<Term> {
        self.states.last().expect("trace has at least one state")
    }
}

pub fn evaluate(t: &Term, k: usize, mode: Mode) -> Result<ReductionTrace, EvalError> {
    evaluate_limited(t, k, mode, None)
}

pub fn evaluate_limited(
    t: &Term,
    k: usize,
    mode: Mode,
    limit: Option<usize>,
) -> Result<ReductionTrace, EvalError> {
    let mut states = Vec::with_capacity(k + 1);
    let mut current = MultiDist::singleton(t.clone());
    for i in 0..=k {
        if let Some(cap) = limit {
            if current.len() > cap {
                return Err(EvalError::EntryLimit {
                    limit: cap,
                    at_step: i,
                });
            }
        }
        states.push(current.clone());
        if i < k {
            current = lift(&current, mode)?;
        }
    }
    Ok(ReductionTrace {
        start: t.clone(),
        states,
    })
}

/// Pᵏ(t): the probability that t terminates within k steps.
pub fn p_approx(t: &Term, k: usize, mode: Mode) -> Result<Rat, EvalError> {
    let trace = evaluate(t, k, mode)?;
    Ok(value_mass(trace.final_state()))
}

/// eTᵏ(t) = Σ_{j=0}^{k−1} (1 − Pʲ(t)): the k-step expected-runtime
/// approximant, by the telescope formula.
pub fn et_approx(t: &Term, k: usize, mode: Mode) -> Result<Rat, EvalError> {
    let trace = evaluate(t, k, mode)?;
    let mut total = Rat::zero();
    for m in &trace.states[..k] {
        total += Rat::one() - value_mass(m);
    }
    Ok(total)
}

/// Both approximants from a single trace; avoids re-evaluating when scanning
/// k upward.
pub fn approximants_along(trace: &ReductionTrace) -> (Vec<Rat>, Vec<Rat>) {
    let ps: Vec<Rat> = trace.states.iter().map(value_mass).collect();
    let mut ets = Vec::with_capacity(ps.len());
    let mut acc = Rat::zero();
    for p in &ps {
        ets.push(acc.clone());
        acc += Rat::one() - p;
    }
    (ps, ets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multidist::{rat, rat_int};
    use crate::stdlib;
    use crate::syntax::parse;

    fn dd() -> Term {
        stdlib::dd()
    }

    fn md(entries: Vec<(Rat, Term)>) -> MultiDist<Term> {
        MultiDist::from_entries(entries).unwrap()
    }

    #[test]
    fn step_dd_unfolds_once() {
        let d = stdlib::d_term();
        let unfolded = Term::choice(dd(), stdlib::identity());
        assert_eq!(
            step(&dd(), Mode::Cbv).unwrap().unwrap(),
            MultiDist::singleton(unfolded)
        );
        assert!(step(&d, Mode::Cbv).unwrap().is_none());
    }

    #[test]
    fn step_choice_splits_evenly() {
        let t = parse("(\\x.x) (+) (\\y.y y)", Mode::Cbv, false).unwrap();
        let m = step(&t, Mode::Cbv).unwrap().unwrap();
        assert_eq!(
            m,
            md(vec![
                (rat(1, 2), parse("\\x.x", Mode::Cbv, false).unwrap()),
                (rat(1, 2), parse("\\y.y y", Mode::Cbv, false).unwrap()),
            ])
        );
    }

    #[test]
    fn step_values_are_normal() {
        let t = parse("\\x. (\\y.y y) (\\y.y y)", Mode::Cbv, false).unwrap();
        assert!(step(&t, Mode::Cbv).unwrap().is_none());
    }

    #[test]
    fn step_let_choice_distributes() {
        // let x = (A ⊕ B) in M → ⟨½ let x=A in M, ½ let x=B in M⟩
        let t = parse(
            "let x = (\\a.a) (+) (\\b.b) in x x",
            Mode::Cbv,
            false,
        )
        .unwrap();
        let m = step(&t, Mode::Cbv).unwrap().unwrap();
        assert_eq!(
            m,
            md(vec![
                (
                    rat(1, 2),
                    parse("let x = \\a.a in x x", Mode::Cbv, false).unwrap()
                ),
                (
                    rat(1, 2),
                    parse("let x = \\b.b in x x", Mode::Cbv, false).unwrap()
                ),
            ])
        );
    }

    #[test]
    fn step_rejects_open_terms() {
        let t = parse("x y", Mode::Cbv, false).unwrap();
        assert!(matches!(step(&t, Mode::Cbv), Err(EvalError::OpenTerm(_))));
    }

    #[test]
    fn lift_matches_paper_display() {
        // ⟨½ II, ½ (M⊕N)⟩ ⇒ ⟨½ I, ¼ M, ¼ N⟩
        let ii = parse("(\\x.x) (\\x.x)", Mode::Cbv, false).unwrap();
        let i = stdlib::identity();
        let m = parse("\\m. m", Mode::Cbv, false).unwrap();
        let n = parse("\\n. n n", Mode::Cbv, false).unwrap();
        let state = md(vec![
            (rat(1, 2), ii),
            (rat(1, 2), Term::choice(m.clone(), n.clone())),
        ]);
        let next = lift(&state, Mode::Cbv).unwrap();
        assert_eq!(
            next,
            md(vec![(rat(1, 2), i.clone()), (rat(1, 4), m), (rat(1, 4), n)])
        );
        // value fixpoint
        let v = MultiDist::singleton(i);
        assert_eq!(lift(&v, Mode::Cbv).unwrap(), v);
    }

    #[test]
    fn lift_keeps_values_in_place() {
        let state = md(vec![(rat(1, 2), dd()), (rat(1, 2), stdlib::identity())]);
        let next = lift(&state, Mode::Cbv).unwrap();
        assert_eq!(
            next,
            md(vec![
                (rat(1, 2), Term::choice(dd(), stdlib::identity())),
                (rat(1, 2), stdlib::identity()),
            ])
        );
    }

    #[test]
    fn evaluate_dd_reaches_example_state() {
        let trace = evaluate(&dd(), 4, Mode::Cbv).unwrap();
        assert_eq!(
            trace.states[4],
            md(vec![
                (rat(1, 4), dd()),
                (rat(1, 4), stdlib::identity()),
                (rat(1, 2), stdlib::identity()),
            ])
        );
        let id_trace = evaluate(&stdlib::identity(), 7, Mode::Cbv).unwrap();
        assert_eq!(
            id_trace.states[7],
            MultiDist::singleton(stdlib::identity())
        );
    }

    #[test]
    fn mass_is_conserved_along_traces() {
        let trace = evaluate(&dd(), 12, Mode::Cbv).unwrap();
        for state in &trace.states {
            assert_eq!(state.norm(), Rat::one());
        }
    }

    #[test]
    fn p_approx_dd() {
        assert_eq!(p_approx(&dd(), 4, Mode::Cbv).unwrap(), rat(3, 4));
        assert_eq!(p_approx(&dd(), 6, Mode::Cbv).unwrap(), rat(7, 8));
    }

    #[test]
    fn p_approx_omega_is_zero() {
        // every state of the trace is ⟨1 ΔΔ⟩
        let omega = stdlib::omega();
        let trace = evaluate(&omega, 100, Mode::Cbv).unwrap();
        for state in &trace.states {
            assert_eq!(*state, MultiDist::singleton(omega.clone()));
        }
        assert_eq!(p_approx(&omega, 100, Mode::Cbv).unwrap(), Rat::zero());
    }

    #[test]
    fn et_approx_dd_examples() {
        assert_eq!(et_approx(&dd(), 2, Mode::Cbv).unwrap(), rat_int(2));
        assert_eq!(et_approx(&dd(), 4, Mode::Cbv).unwrap(), rat_int(3));
        assert_eq!(et_approx(&dd(), 6, Mode::Cbv).unwrap(), rat(7, 2));
    }

    #[test]
    fn et_approx_identity_and_omega() {
        for k in [0, 1, 5, 9] {
            assert_eq!(
                et_approx(&stdlib::identity(), k, Mode::Cbv).unwrap(),
                Rat::zero()
            );
        }
        for k in [1, 5, 9] {
            assert_eq!(
                et_approx(&stdlib::omega(), k, Mode::Cbv).unwrap(),
                rat_int(k as u64)
            );
        }
    }

    #[test]
    fn cbn_beta_fires_on_arbitrary_arguments() {
        // (λx. λy. y) Ω steps by β in CbN, not by reducing Ω
        let omega = stdlib::omega();
        let t = Term::app(
            parse("\\x. \\y. y", Mode::Cbn, false).unwrap(),
            omega.clone(),
        );
        let m = step(&t, Mode::Cbn).unwrap().unwrap();
        assert_eq!(
            m,
            MultiDist::singleton(parse("\\y. y", Mode::Cbn, false).unwrap())
        );
        // head reduction under an argument
        let head = Term::app(omega.clone(), stdlib::identity());
        let m = step(&head, Mode::Cbn).unwrap().unwrap();
        assert_eq!(
            m,
            MultiDist::singleton(Term::app(omega, stdlib::identity()))
        );
    }

    #[test]
    fn entry_limit_aborts_instead_of_collapsing() {
        let t = parse("(\\x.x) (+) (\\y.y)", Mode::Cbv, false).unwrap();
        let err = evaluate_limited(&t, 3, Mode::Cbv, Some(1)).unwrap_err();
        assert!(matches!(err, EvalError::EntryLimit { limit: 1, .. }));
        assert!(evaluate_limited(&stdlib::omega(), 1, Mode::Cbv, Some(1)).is_ok());
    }

    #[test]
    fn one_step_decomposition_property() {
        // if M → ⟨qᵢMᵢ⟩ then Pᵏ⁺¹(M) = Σ qᵢPᵏ(Mᵢ) and eTᵏ⁺¹(M) = 1 + Σ qᵢeTᵏ(Mᵢ)
        let samples = [
            dd(),
            Term::choice(stdlib::identity(), stdlib::omega()),
            parse("let x = (\\a.a) (+) (\\b.b b) in x x", Mode::Cbv, false).unwrap(),
        ];
        for m in &samples {
            let red = step(m, Mode::Cbv).unwrap().unwrap();
            for k in 0..6 {
                let mut p_sum = Rat::zero();
                let mut et_sum = Rat::zero();
                for (q, mi) in red.entries() {
                    p_sum += q * p_approx(mi, k, Mode::Cbv).unwrap();
                    et_sum += q * et_approx(mi, k, Mode::Cbv).unwrap();
                }
                assert_eq!(p_approx(m, k + 1, Mode::Cbv).unwrap(), p_sum);
                assert_eq!(
                    et_approx(m, k + 1, Mode::Cbv).unwrap(),
                    Rat::one() + et_sum
                );
            }
        }
    }
}
