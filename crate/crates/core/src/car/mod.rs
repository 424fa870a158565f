//! Symbolic CAR algebra over lattice sites.
//!
//! Elements are finite sums of normal-ordered monomials
//! `a*_{x1} ... a*_{xk} a_{y1} ... a_{ym}` with `x1 < ... < xk`, `y1 < ... < ym`
//! in the lexicographic site order. Every product is reduced to this form using
//! `{a_i, a_j} = 0`, `{a*_i, a_j} = delta_ij`, so two polynomials are equal as
//! algebra elements iff their term maps are equal.

mod site;

use std::cmp::Ordering;
use rustc_hash::FxHashMap as HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

pub use site::{Region, Site, MAX_DIM};

use crate::scalar::{Coefficient, Exact};

/// Grading of a homogeneous element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_degree(d: usize) -> Self {
        if d.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn sum(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Creation or annihilation operator at a site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Generator {
    Create(Site),
    Annihilate(Site),
}

impl Generator {
    pub fn site(&self) -> Site {
        match self {
            Generator::Create(s) | Generator::Annihilate(s) => *s,
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Create(s) => write!(f, "a+({s})"),
            Generator::Annihilate(s) => write!(f, "a({s})"),
        }
    }
}

/// Normal-ordered monomial: sorted creations followed by sorted annihilations.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    cre: Vec<Site>,
    ann: Vec<Site>,
}

impl Monomial {
    pub fn identity() -> Self {
        Monomial::default()
    }

    /// Builds a canonical monomial from sorted, repeat-free site lists.
    pub fn from_sorted(cre: Vec<Site>, ann: Vec<Site>) -> Self {
        debug_assert!(cre.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(ann.windows(2).all(|w| w[0] < w[1]));
        Monomial { cre, ann }
    }

    pub fn creations(&self) -> &[Site] {
        &self.cre
    }

    pub fn annihilations(&self) -> &[Site] {
        &self.ann
    }

    pub fn degree(&self) -> usize {
        self.cre.len() + self.ann.len()
    }

    pub fn parity(&self) -> Parity {
        Parity::of_degree(self.degree())
    }

    pub fn is_identity(&self) -> bool {
        self.cre.is_empty() && self.ann.is_empty()
    }

    /// Generators in left-to-right order.
    pub fn generators(&self) -> impl Iterator<Item = Generator> + '_ {
        self.cre
            .iter()
            .map(|s| Generator::Create(*s))
            .chain(self.ann.iter().map(|s| Generator::Annihilate(*s)))
    }

    pub fn sites(&self) -> impl Iterator<Item = &Site> + '_ {
        self.cre.iter().chain(self.ann.iter())
    }

    /// `self * a*_j` in normal order, as at most two signed monomials.
    fn times_create(&self, j: Site, out: &mut Vec<(bool, Monomial)>, negate: bool) {
        let m = self.ann.len();
        // contraction {a_j, a*_j} = 1 with the annihilator at position p
        if let Ok(p) = self.ann.binary_search(&j) {
            let mut ann = self.ann.clone();
            ann.remove(p);
            let odd = (m - 1 - p) % 2 == 1;
            out.push((negate ^ odd, Monomial { cre: self.cre.clone(), ann }));
        }
        if let Err(pos) = self.cre.binary_search(&j) {
            let greater = self.cre.len() - pos;
            let odd = (m + greater) % 2 == 1;
            let mut cre = self.cre.clone();
            cre.insert(pos, j);
            out.push((negate ^ odd, Monomial { cre, ann: self.ann.clone() }));
        }
    }

    /// `self * a_j` in place; returns `None` when the product vanishes.
    fn times_annihilate(mut self, j: Site) -> Option<(bool, Monomial)> {
        match self.ann.binary_search(&j) {
            Ok(_) => None,
            Err(pos) => {
                let greater = self.ann.len() - pos;
                self.ann.insert(pos, j);
                Some((greater % 2 == 1, self))
            }
        }
    }

    /// Normal-ordered expansion of `self * rhs` as signed monomials.
    pub fn product(&self, rhs: &Monomial) -> Vec<(bool, Monomial)> {
        let mut terms = vec![(false, self.clone())];
        for &j in &rhs.cre {
            let mut next = Vec::with_capacity(terms.len() * 2);
            for (neg, m) in &terms {
                m.times_create(j, &mut next, *neg);
            }
            terms = next;
            if terms.is_empty() {
                return terms;
            }
        }
        let mut out = Vec::with_capacity(terms.len());
        for (neg, m) in terms {
            let mut cur = Some((neg, m));
            for &j in &rhs.ann {
                cur = cur.and_then(|(n, m)| m.times_annihilate(j).map(|(s, m)| (n ^ s, m)));
            }
            if let Some(t) = cur {
                out.push(t);
            }
        }
        out
    }

    /// Adjoint as a canonical monomial plus the reordering sign.
    pub fn adjoint(&self) -> (bool, Monomial) {
        let k = self.cre.len();
        let m = self.ann.len();
        let sign = (k * k.saturating_sub(1) / 2 + m * m.saturating_sub(1) / 2) % 2 == 1;
        (sign, Monomial { cre: self.ann.clone(), ann: self.cre.clone() })
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.cre.cmp(&other.cre))
            .then_with(|| self.ann.cmp(&other.ann))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.generators().map(|g| g.to_string()).collect();
        write!(f, "{}", parts.join(" * "))
    }
}

/// Products with more term pairs than this are split across threads.
const PARALLEL_PRODUCT_THRESHOLD: usize = 4096;

/// Element of the local CAR algebra: a finite linear combination of
/// normal-ordered monomials. No zero coefficients are stored.
#[derive(Clone, PartialEq)]
pub struct CarPolynomial<C: Coefficient = Exact> {
    terms: HashMap<Monomial, C>,
}

impl<C: Coefficient> Default for CarPolynomial<C> {
    fn default() -> Self {
        CarPolynomial { terms: HashMap::default() }
    }
}

impl<C: Coefficient> CarPolynomial<C> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::scalar(C::one())
    }

    pub fn scalar(c: C) -> Self {
        Self::term(Monomial::identity(), c)
    }

    pub fn term(m: Monomial, c: C) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    /// `a*_s`.
    pub fn create(s: Site) -> Self {
        Self::term(Monomial { cre: vec![s], ann: vec![] }, C::one())
    }

    /// `a_s`.
    pub fn annihilate(s: Site) -> Self {
        Self::term(Monomial { cre: vec![], ann: vec![s] }, C::one())
    }

    pub fn generator(g: Generator) -> Self {
        match g {
            Generator::Create(s) => Self::create(s),
            Generator::Annihilate(s) => Self::annihilate(s),
        }
    }

    /// `a*_s a_s`.
    pub fn number(s: Site) -> Self {
        Self::term(Monomial { cre: vec![s], ann: vec![s] }, C::one())
    }

    /// Normal-ordered product of a word of generators.
    pub fn word(gens: &[Generator]) -> Self {
        gens.iter().fold(Self::one(), |acc, g| &acc * &Self::generator(*g))
    }

    pub fn add_term(&mut self, m: Monomial, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::hash_map::Entry::Occupied(mut e) => {
                let v = e.get().sum(&c);
                if v.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(c);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &Monomial) -> Option<&C> {
        self.terms.get(m)
    }

    /// Coefficient of the identity monomial.
    pub fn scalar_part(&self) -> C {
        self.terms.get(&Monomial::identity()).cloned().unwrap_or_else(C::zero)
    }

    /// Terms in canonical (degree, lexicographic) order.
    pub fn terms(&self) -> Vec<(&Monomial, &C)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Monomial, &C)> + '_ {
        self.terms.iter()
    }

    pub fn max_degree(&self) -> usize {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        let terms = self
            .terms
            .iter()
            .map(|(m, v)| (m.clone(), v.product(c)))
            .filter(|(_, v)| !v.is_zero())
            .collect();
        CarPolynomial { terms }
    }

    pub fn map_coefficients<D: Coefficient>(&self, f: impl Fn(&C) -> D) -> CarPolynomial<D> {
        let mut out = CarPolynomial::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c));
        }
        out
    }

    pub fn to_c64(&self) -> CarPolynomial<Complex64> {
        self.map_coefficients(|c| c.to_c64())
    }

    fn accumulate_product(lhs: &[(&Monomial, &C)], rhs: &Self) -> HashMap<Monomial, C> {
        let mut acc: Self = Self::zero();
        for (ma, ca) in lhs {
            for (mb, cb) in &rhs.terms {
                let c = ca.product(cb);
                for (neg, m) in ma.product(mb) {
                    acc.add_term(m, if neg { -c.clone() } else { c.clone() });
                }
            }
        }
        acc.terms
    }

    /// Normal-ordered product.
    pub fn mul(&self, rhs: &Self) -> Self {
        let lhs: Vec<(&Monomial, &C)> = self.terms.iter().collect();
        if lhs.len() * rhs.len() < PARALLEL_PRODUCT_THRESHOLD || lhs.len() < 2 {
            return CarPolynomial { terms: Self::accumulate_product(&lhs, rhs) };
        }
        let chunk = lhs.len().div_ceil(rayon::current_num_threads().max(1) * 4).max(1);
        lhs.par_chunks(chunk)
            .map(|part| CarPolynomial { terms: Self::accumulate_product(part, rhs) })
            .reduce(Self::zero, |a, b| a.add(&b))
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let (mut big, small) = if self.len() >= rhs.len() {
            (self.clone(), rhs)
        } else {
            (rhs.clone(), self)
        };
        for (m, c) in &small.terms {
            big.add_term(m.clone(), c.clone());
        }
        big
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(&-C::one())
    }

    /// Hermitian adjoint.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let (neg, ma) = m.adjoint();
            let cc = c.conjugate();
            out.add_term(ma, if neg { -cc } else { cc });
        }
        out
    }

    /// Grading automorphism: flips the sign of odd terms.
    pub fn gamma(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| {
                let v = if m.parity() == Parity::Odd { -c.clone() } else { c.clone() };
                (m.clone(), v)
            })
            .collect();
        CarPolynomial { terms }
    }

    fn filter_parity(&self, p: Parity) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(m, _)| m.parity() == p)
            .map(|(m, c)| (m.clone(), c.clone()))
            .collect();
        CarPolynomial { terms }
    }

    pub fn even_part(&self) -> Self {
        self.filter_parity(Parity::Even)
    }

    pub fn odd_part(&self) -> Self {
        self.filter_parity(Parity::Odd)
    }

    /// Parity if homogeneous; `Some(Even)` for zero.
    pub fn parity(&self) -> Option<Parity> {
        let mut it = self.terms.keys().map(Monomial::parity);
        match it.next() {
            None => Some(Parity::Even),
            Some(p) => it.all(|q| q == p).then_some(p),
        }
    }

    pub fn is_even(&self) -> bool {
        self.parity() == Some(Parity::Even)
    }

    pub fn is_odd(&self) -> bool {
        self.is_zero() || self.parity() == Some(Parity::Odd)
    }

    pub fn is_hermitian(&self) -> bool {
        self.adjoint() == *self
    }

    /// Least region `I` with the element in `F(I)`; empty for scalars.
    pub fn support(&self) -> Region {
        self.terms.keys().flat_map(|m| m.sites().copied()).collect()
    }

    /// Lattice translation of every site; order-preserving, so terms stay canonical.
    pub fn translate(&self, shift: &[i32]) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| {
                let t = Monomial {
                    cre: m.cre.iter().map(|s| s.translate(shift)).collect(),
                    ann: m.ann.iter().map(|s| s.translate(shift)).collect(),
                };
                (t, c.clone())
            })
            .collect();
        CarPolynomial { terms }
    }

    /// Image under the homomorphism sending each generator to `f(generator)`,
    /// renormalized (the map must respect the CAR, e.g. a site relabeling or
    /// the particle-hole exchange `a_i <-> a*_i`).
    pub fn substitute(&self, f: impl Fn(Generator) -> Generator) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let gens: Vec<Generator> = m.generators().map(&f).collect();
            out = &out + &Self::word(&gens).scale(c);
        }
        out
    }

    /// Ordinary commutator `fg - gf`.
    pub fn commutator(&self, g: &Self) -> Self {
        self.mul(g).sub(&g.mul(self))
    }

    /// Anticommutator `fg + gf`.
    pub fn anticommutator(&self, g: &Self) -> Self {
        self.mul(g).add(&g.mul(self))
    }

    /// Graded commutator, extended bilinearly to mixed-parity arguments:
    /// anticommutator on odd-odd pairs, commutator otherwise.
    pub fn graded_commutator(&self, g: &Self) -> Self {
        let f_odd = self.odd_part();
        let g_odd = g.odd_part();
        if f_odd.is_zero() || g_odd.is_zero() {
            return self.commutator(g);
        }
        // [f,g]_γ = fg - g f_e - g_e f_o + g_o f_o
        let f_even = self.even_part();
        let g_even = g.even_part();
        self.mul(g)
            .sub(&g.mul(&f_even))
            .sub(&g_even.mul(&f_odd))
            .add(&g_odd.mul(&f_odd))
    }

    /// Multiple graded commutator `[f, [f, ... [f, g]_γ ...]_γ]_γ` (n-fold).
    pub fn graded_commutator_power(&self, g: &Self, n: usize) -> Self {
        (0..n).fold(g.clone(), |acc, _| self.graded_commutator(&acc))
    }
}

impl<C: Coefficient> fmt::Debug for CarPolynomial<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Renders in the textual polynomial syntax accepted by the model parser.
impl<C: Coefficient> fmt::Display for CarPolynomial<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms().into_iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            let one = C::one();
            if m.is_identity() {
                write!(f, "{}", c.format())?;
            } else if *c == one {
                write!(f, "{m}")?;
            } else {
                write!(f, "{} * {m}", c.format())?;
            }
        }
        Ok(())
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident, $imp:ident) => {
        impl<C: Coefficient> $tr<&CarPolynomial<C>> for &CarPolynomial<C> {
            type Output = CarPolynomial<C>;
            fn $method(self, rhs: &CarPolynomial<C>) -> CarPolynomial<C> {
                CarPolynomial::$imp(self, rhs)
            }
        }
    };
}

forward_binop!(Add, add, add);
forward_binop!(Sub, sub, sub);
forward_binop!(Mul, mul, mul);

impl<C: Coefficient> Neg for &CarPolynomial<C> {
    type Output = CarPolynomial<C>;
    fn neg(self) -> CarPolynomial<C> {
        CarPolynomial::neg(self)
    }
}


/// Random word of generators on the given sites.
pub fn random_word<R: Rng>(rng: &mut R, sites: &[Site], len: usize) -> Vec<Generator> {
    (0..len)
        .map(|_| {
            let s = sites[rng.random_range(0..sites.len())];
            if rng.random_bool(0.5) {
                Generator::Create(s)
            } else {
                Generator::Annihilate(s)
            }
        })
        .collect()
}

/// Random exact polynomial: `terms` words of length `<= max_degree` with small
/// Gaussian-integer coefficients.
pub fn random_polynomial<R: Rng>(
    rng: &mut R,
    sites: &[Site],
    max_degree: usize,
    terms: usize,
) -> CarPolynomial {
    let mut p = CarPolynomial::zero();
    for _ in 0..terms {
        let len = rng.random_range(0..=max_degree);
        let w = CarPolynomial::word(&random_word(rng, sites, len));
        let c = crate::scalar::exact(rng.random_range(-3..=3), rng.random_range(-2..=2));
        p = p.add(&w.scale(&c));
    }
    p
}

/// Random polynomial of fixed parity (odd or even part of a random one, never zero).
pub fn random_homogeneous<R: Rng>(
    rng: &mut R,
    sites: &[Site],
    max_degree: usize,
    terms: usize,
    parity: Parity,
) -> CarPolynomial {
    loop {
        let p = random_polynomial(rng, sites, max_degree.max(1), terms);
        let q = match parity {
            Parity::Even => p.even_part(),
            Parity::Odd => p.odd_part(),
        };
        if !q.is_zero() {
            return q;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::exact;

    fn a(i: i32) -> CarPolynomial {
        CarPolynomial::annihilate(Site::d1(i))
    }
    fn ad(i: i32) -> CarPolynomial {
        CarPolynomial::create(Site::d1(i))
    }

    #[test]
    fn car_relation_reorders_annihilator_past_creator() {
        let lhs = &a(0) * &ad(0);
        let rhs = &CarPolynomial::one() - &CarPolynomial::number(Site::d1(0));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn annihilators_anticommute() {
        assert!((&(&a(0) * &a(1)) + &(&a(1) * &a(0))).is_zero());
        assert!((&ad(2) * &ad(2)).is_zero());
        assert!((&a(2) * &a(2)).is_zero());
    }

    #[test]
    fn adjoint_examples() {
        assert_eq!(a(0).adjoint(), ad(0));
        let i = CarPolynomial::scalar(exact(0, 1));
        let p = &(&i * &a(0)) * &ad(1);
        let expected = &(&CarPolynomial::scalar(exact(0, -1)) * &a(1)) * &ad(0);
        assert_eq!(p.adjoint(), expected);
    }

    #[test]
    fn gamma_flips_odd_terms_only() {
        assert_eq!(a(0).gamma(), -&a(0));
        let even = &ad(0) * &a(1);
        assert_eq!(even.gamma(), even);
    }

    #[test]
    fn graded_commutator_examples() {
        assert!(a(0).graded_commutator(&ad(1)).is_zero());
        assert_eq!(a(0).graded_commutator(&ad(0)), CarPolynomial::one());
        let f = &ad(0) * &a(1);
        let g = &(&ad(3) * &a(2)) * &ad(4);
        assert!(f.graded_commutator(&g).is_zero());
    }

    #[test]
    fn support_keeps_sites_of_non_scalar_terms() {
        assert_eq!((&ad(0) * &a(5)).support(), Region::from_iter([Site::d1(0), Site::d1(5)]));
        assert!(CarPolynomial::<Exact>::one().support().is_empty());
        let p = &a(0) * &ad(0);
        assert_eq!(p.support(), Region::from_iter([Site::d1(0)]));
        assert!(p.len() == 2);
    }

    #[test]
    fn display_lists_terms_in_canonical_order() {
        let p = (&a(0) * &ad(0)).scale(&exact(0, 2));
        assert_eq!(p.to_string(), "(0,2) + (0,-2) * a+(0) * a(0)");
        assert_eq!(CarPolynomial::<Exact>::zero().to_string(), "0");
    }
}
