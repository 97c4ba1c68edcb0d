//! Exact-rational finite multidistributions: the shared container for
//! reduction states and type distributions.
//!
//! A multidistribution is a finite *multiset* of probability-weighted items
//! with total mass at most 1. Unlike a distribution, equal items are never
//! merged — each entry tracks one probabilistic branch, and collapsing them
//! would lose the branch structure the type system depends on. Entries are
//! kept in insertion order (reduction traces print in the order branches
//! were produced); equality is order-insensitive but duplicate-sensitive.

use crate::syntax::Term;
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use std::fmt;

/// Arbitrary-precision rational, canonical (reduced, positive denominator).
pub type Rat = num_rational::BigRational;

pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(n: u64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Serializes as `num/den` for proper fractions and plain `n` for integers.
pub fn fmt_rat(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rat(s: &str) -> Option<Rat> {
    match s.split_once('/') {
        None => s.parse::<BigInt>().ok().map(Rat::from_integer),
        Some((n, d)) => {
            let n = n.parse::<BigInt>().ok()?;
            let d = d.parse::<BigInt>().ok()?;
            if d.is_zero() {
                None
            } else {
                Some(Rat::new(n, d))
            }
        }
    }
}

pub fn is_probability(p: &Rat) -> bool {
    p.is_positive() && *p <= Rat::one()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MassError {
    /// An entry probability fell outside (0, 1].
    ProbabilityOutOfRange(Rat),
    /// The total mass of a multidistribution would exceed 1.
    Overflow(Rat),
    /// A scalar product was requested with a factor outside (0, 1].
    ScaleOutOfRange(Rat),
}

impl fmt::Display for MassError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MassError::ProbabilityOutOfRange(p) => {
                write!(f, "probability {} outside (0,1]", fmt_rat(p))
            }
            MassError::Overflow(n) => write!(f, "mass overflow: total {} exceeds 1", fmt_rat(n)),
            MassError::ScaleOutOfRange(q) => {
                write!(f, "scale factor {} outside (0,1]", fmt_rat(q))
            }
        }
    }
}

impl std::error::Error for MassError {}

/// Finite multiset of `(probability, item)` pairs with total mass ≤ 1.
#[derive(Debug, Clone)]
pub struct MultiDist<T> {
    entries: Vec<(Rat, T)>,
}

impl<T> MultiDist<T> {
    /// The empty multidistribution 0̄.
    pub fn empty() -> Self {
        MultiDist {
            entries: Vec::new(),
        }
    }

    /// ⟨1 item⟩.
    pub fn singleton(item: T) -> Self {
        MultiDist {
            entries: vec![(Rat::one(), item)],
        }
    }

    pub fn from_entries(entries: Vec<(Rat, T)>) -> Result<Self, MassError> {
        let mut norm = Rat::zero();
        for (p, _) in &entries {
            if !is_probability(p) {
                return Err(MassError::ProbabilityOutOfRange(p.clone()));
            }
            norm += p;
        }
        if norm > Rat::one() {
            return Err(MassError::Overflow(norm));
        }
        Ok(MultiDist { entries })
    }

    pub fn entries(&self) -> &[(Rat, T)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// ‖m‖ = Σ pᵢ.
    pub fn norm(&self) -> Rat {
        self.entries
            .iter()
            .fold(Rat::zero(), |acc, (p, _)| acc + p)
    }

    /// Disjoint sum ⊎ — a partial operation, failing when mass would exceed 1.
    pub fn sum(&self, other: &Self) -> Result<Self, MassError>
    where
        T: Clone,
    {
        let norm = self.norm() + other.norm();
        if norm > Rat::one() {
            return Err(MassError::Overflow(norm));
        }
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().cloned());
        Ok(MultiDist { entries })
    }

    /// Scalar product q·m with q ∈ (0, 1].
    pub fn scale(&self, q: &Rat) -> Result<Self, MassError>
    where
        T: Clone,
    {
        if !is_probability(q) {
            return Err(MassError::ScaleOutOfRange(q.clone()));
        }
        Ok(MultiDist {
            entries: self
                .entries
                .iter()
                .map(|(p, t)| (p * q, t.clone()))
                .collect(),
        })
    }

    /// Total probability of the entries satisfying `pred`.
    pub fn mass_where(&self, pred: impl Fn(&T) -> bool) -> Rat {
        self.entries
            .iter()
            .filter(|(_, t)| pred(t))
            .fold(Rat::zero(), |acc, (p, _)| acc + p)
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> MultiDist<U> {
        MultiDist {
            entries: self.entries.iter().map(|(p, t)| (p.clone(), f(t))).collect(),
        }
    }
}

/// Multiset equality: order-insensitive, duplicate-sensitive. ⟨½A, ½A⟩ and
/// ⟨1A⟩ are distinct even though they collapse to the same distribution.
impl<T: Ord> PartialEq for MultiDist<T> {
    fn eq(&self, other: &Self) -> bool {
        if self.entries.len() != other.entries.len() {
            return false;
        }
        let mut a: Vec<(&Rat, &T)> = self.entries.iter().map(|(p, t)| (p, t)).collect();
        let mut b: Vec<(&Rat, &T)> = other.entries.iter().map(|(p, t)| (p, t)).collect();
        a.sort();
        b.sort();
        a == b
    }
}

impl<T: Ord> Eq for MultiDist<T> {}

/// ‖m‖_𝒱: the probability that the state is a value.
pub fn value_mass(m: &MultiDist<Term>) -> Rat {
    m.mass_where(Term::is_value)
}

impl fmt::Display for MultiDist<Term> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<")?;
        for (i, (p, t)) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{} {}", fmt_rat(p), t)?;
        }
        write!(f, ">")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse, Mode};

    fn t(src: &str) -> Term {
        parse(src, Mode::Cbv, false).unwrap()
    }

    #[test]
    fn sum_concatenates_and_tracks_norm() {
        let a = MultiDist::from_entries(vec![(rat(1, 2), t("\\x. x"))]).unwrap();
        let b = MultiDist::from_entries(vec![(rat(1, 2), t("\\y. y y"))]).unwrap();
        let s = a.sum(&b).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.norm(), Rat::one());
    }

    #[test]
    fn empty_is_identity_for_sum() {
        let m = MultiDist::from_entries(vec![(rat(1, 2), t("\\x. x"))]).unwrap();
        let s = MultiDist::empty().sum(&m).unwrap();
        assert_eq!(s, m);
    }

    #[test]
    fn sum_rejects_mass_overflow() {
        let a = MultiDist::from_entries(vec![(rat(3, 4), t("\\x. x"))]).unwrap();
        let b = MultiDist::from_entries(vec![(rat(1, 2), t("\\y. y"))]).unwrap();
        assert!(matches!(a.sum(&b), Err(MassError::Overflow(_))));
    }

    #[test]
    fn scale_is_pointwise() {
        let m = MultiDist::from_entries(vec![
            (rat(1, 2), t("\\x. x")),
            (rat(1, 2), t("\\y. y y")),
        ])
        .unwrap();
        let half = m.scale(&rat(1, 2)).unwrap();
        assert_eq!(half.entries()[0].0, rat(1, 4));
        assert_eq!(half.entries()[1].0, rat(1, 4));
        assert_eq!(half.norm(), rat(1, 2));
        let whole = m.scale(&Rat::one()).unwrap();
        assert_eq!(whole, m);
    }

    #[test]
    fn scale_rejects_out_of_range() {
        let m = MultiDist::singleton(t("\\x. x"));
        assert!(m.scale(&rat(3, 2)).is_err());
        assert!(m.scale(&rat(0, 1)).is_err());
    }

    #[test]
    fn value_mass_counts_only_values() {
        let m = MultiDist::from_entries(vec![
            (rat(1, 2), t("(\\x. x x) (\\x. x x)")),
            (rat(1, 2), t("\\x. x")),
        ])
        .unwrap();
        assert_eq!(value_mass(&m), rat(1, 2));
        assert_eq!(value_mass(&MultiDist::empty()), Rat::zero());
        let omega = MultiDist::singleton(t("(\\x. x x) (\\x. x x)"));
        assert_eq!(value_mass(&omega), Rat::zero());
    }

    #[test]
    fn scale_distributes_over_sum() {
        let a = MultiDist::from_entries(vec![
            (rat(1, 3), t("\\x. x")),
            (rat(1, 6), t("\\y. y y")),
        ])
        .unwrap();
        let b = MultiDist::from_entries(vec![(rat(1, 2), t("\\z. z"))]).unwrap();
        let q = rat(3, 5);
        let lhs = a.sum(&b).unwrap().scale(&q).unwrap();
        let rhs = a.scale(&q).unwrap().sum(&b.scale(&q).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn multiset_equality_is_duplicate_sensitive() {
        let two_halves = MultiDist::from_entries(vec![
            (rat(1, 2), t("\\x. x")),
            (rat(1, 2), t("\\x. x")),
        ])
        .unwrap();
        let one = MultiDist::singleton(t("\\x. x"));
        assert_ne!(two_halves, one);
        let swapped = MultiDist::from_entries(vec![
            (rat(1, 2), t("\\y. y")),
            (rat(1, 2), t("\\x. x")),
        ])
        .unwrap();
        assert_eq!(two_halves, swapped); // order-insensitive, α-insensitive
    }
}
