//! Local supercharge assignments and the superderivations they generate.
//!
//! An assignment maps finite regions `X` to odd local elements `Psi(X)`,
//! vanishing on regions wider than the declared range `r`. Assignments are
//! either periodic (patterns in a fundamental domain, repeated by the period
//! lattice) or finite (an explicit list of patterns on a bounded region).
//! The superderivation acts on `A in F(I)` as `delta(A) = [C(I), A]_gamma`
//! with `C(I) = sum_{X meets I} Psi(X)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::car::{CarPolynomial, Generator, Region, Site};
use crate::error::{Result, SusyError};
use crate::fock::operator_norm;
use crate::scalar::exact;

/// One pattern `Psi(region) = polynomial` of an assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub region: Region,
    pub polynomial: CarPolynomial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChargeAssignment {
    dim: usize,
    period: Option<Vec<i32>>,
    patterns: Vec<Pattern>,
    range: u32,
}

impl ChargeAssignment {
    /// Periodic assignment: each pattern is repeated by every translation in
    /// `period_1 Z x ... x period_dim Z`.
    pub fn periodic(dim: usize, period: Vec<i32>, patterns: Vec<Pattern>, range: u32) -> Result<Self> {
        if period.len() != dim || period.iter().any(|p| *p < 1) {
            return Err(SusyError::InvalidAssignment(format!(
                "period {period:?} must have {dim} positive entries"
            )));
        }
        let a = ChargeAssignment { dim, period: Some(period), patterns, range };
        a.validate()?;
        Ok(a)
    }

    /// Assignment with finitely many non-zero values.
    pub fn finite(dim: usize, patterns: Vec<Pattern>, range: u32) -> Result<Self> {
        let a = ChargeAssignment { dim, period: None, patterns, range };
        a.validate()?;
        Ok(a)
    }

    pub fn zero(dim: usize) -> Self {
        ChargeAssignment { dim, period: Some(vec![1; dim]), patterns: Vec::new(), range: 0 }
    }

    /// `Psi({2j-1, 2j, 2j+1}) = a_{2j+1} a*_{2j} a_{2j-1}`, zero otherwise.
    pub fn nicolai() -> Self {
        let q = &(&CarPolynomial::annihilate(Site::d1(1)) * &CarPolynomial::create(Site::d1(0)))
            * &CarPolynomial::annihilate(Site::d1(-1));
        let pattern = Pattern { region: Region::interval(-1, 1), polynomial: q };
        ChargeAssignment::periodic(1, vec![2], vec![pattern], 3).expect("valid Nicolai assignment")
    }

    /// The Nicolai pattern repeated with period 1; overlapping translates spoil nilpotency.
    pub fn dense_nicolai() -> Self {
        let q = ChargeAssignment::nicolai().patterns[0].clone();
        ChargeAssignment::periodic(1, vec![1], vec![q], 3).expect("valid assignment")
    }

    /// Hermitian one-site charges `Psi({j}) = a_j + a*_j`. Since `Psi({j})^2 = 1`
    /// and distinct sites anticommute, `delta^2` is the commutator with a scalar.
    pub fn majorana() -> Self {
        let s = Site::d1(0);
        let q = &CarPolynomial::annihilate(s) + &CarPolynomial::create(s);
        let pattern = Pattern { region: Region::from_iter([s]), polynomial: q };
        ChargeAssignment::periodic(1, vec![1], vec![pattern], 0).expect("valid Majorana assignment")
    }

    fn validate(&self) -> Result<()> {
        for p in &self.patterns {
            if p.region.is_empty() {
                return Err(SusyError::InvalidAssignment("pattern region is empty".into()));
            }
            if p.region.iter().any(|s| s.dim() != self.dim) {
                return Err(SusyError::InvalidAssignment(format!(
                    "pattern region {} is not {}-dimensional",
                    p.region, self.dim
                )));
            }
            if !p.polynomial.is_odd() {
                return Err(SusyError::InvalidAssignment(format!(
                    "pattern on {} is not odd: {}",
                    p.region, p.polynomial
                )));
            }
            if !p.polynomial.support().is_subset(&p.region) {
                return Err(SusyError::InvalidAssignment(format!(
                    "pattern polynomial {} not supported in {}",
                    p.polynomial, p.region
                )));
            }
            if p.region.diameter() > self.range {
                return Err(SusyError::InvalidAssignment(format!(
                    "pattern region {} has diameter {} above the declared range {}",
                    p.region,
                    p.region.diameter(),
                    self.range
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> Option<&[i32]> {
        self.period.as_deref()
    }

    pub fn range(&self) -> u32 {
        self.range
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn is_zero(&self) -> bool {
        self.patterns.iter().all(|p| p.polynomial.is_zero())
    }

    fn map_patterns(&self, f: impl Fn(&CarPolynomial) -> CarPolynomial) -> Self {
        let patterns = self
            .patterns
            .iter()
            .map(|p| Pattern { region: p.region.clone(), polynomial: f(&p.polynomial) })
            .collect();
        ChargeAssignment { patterns, ..self.clone() }
    }

    /// `Psi*(X) = Psi(X)*`.
    pub fn conjugate(&self) -> Self {
        self.map_patterns(CarPolynomial::adjoint)
    }

    /// Hermitian parts `Psi_s1 = Psi + Psi*` and `Psi_s2 = i (Psi - Psi*)`.
    pub fn symmetrize(&self) -> (Self, Self) {
        let i = exact(0, 1);
        let s1 = self.map_patterns(|q| q + &q.adjoint());
        let s2 = self.map_patterns(|q| (q - &q.adjoint()).scale(&i));
        (s1, s2)
    }

    /// Translation vectors `k * period` mapping some site of `pattern` into `target`.
    fn shifts_meeting(&self, pattern: &Region, target: &Region) -> BTreeSet<Vec<i32>> {
        let mut out = BTreeSet::new();
        match &self.period {
            None => {
                if pattern.intersects(target) {
                    out.insert(vec![0; self.dim]);
                }
            }
            Some(period) => {
                for y in target.iter() {
                    for x in pattern.iter() {
                        let d: Vec<i32> =
                            y.coords().iter().zip(x.coords()).map(|(a, b)| a - b).collect();
                        if d.iter().zip(period).all(|(di, p)| di.rem_euclid(*p) == 0) {
                            out.insert(d);
                        }
                    }
                }
            }
        }
        out
    }

    /// All non-zero values `Psi(X)` with `X` meeting `region`, keyed by `X`.
    pub fn charges_meeting(&self, region: &Region) -> BTreeMap<Region, CarPolynomial> {
        let mut out: BTreeMap<Region, CarPolynomial> = BTreeMap::new();
        for p in &self.patterns {
            for shift in self.shifts_meeting(&p.region, region) {
                let x = p.region.translate(&shift);
                let q = p.polynomial.translate(&shift);
                let e = out.entry(x).or_default();
                *e = &*e + &q;
            }
        }
        out.retain(|_, q| !q.is_zero());
        out
    }

    /// All non-zero values `Psi(X)` with `X` contained in `region`.
    pub fn charges_inside(&self, region: &Region) -> BTreeMap<Region, CarPolynomial> {
        let mut m = self.charges_meeting(region);
        m.retain(|x, _| x.is_subset(region));
        m
    }

    /// `Psi(X)` for a single region.
    pub fn value(&self, x: &Region) -> CarPolynomial {
        self.charges_meeting(x).remove(x).unwrap_or_default()
    }

    /// `C_hat(I) = sum_{X meets I} Psi(X)`, supported in `I` enlarged by the range.
    pub fn local_charge(&self, region: &Region) -> CarPolynomial {
        self.charges_meeting(region)
            .values()
            .fold(CarPolynomial::zero(), |acc, q| &acc + q)
    }

    /// `C(L) = sum_{X inside L} Psi(X)` (open boundary).
    pub fn inner_charge(&self, region: &Region) -> CarPolynomial {
        self.charges_inside(region)
            .values()
            .fold(CarPolynomial::zero(), |acc, q| &acc + q)
    }

    /// Sites of `periods` consecutive fundamental cells along every axis
    /// (the union of pattern regions for finite assignments).
    pub fn fundamental_domain(&self, periods: u32) -> Region {
        match &self.period {
            Some(p) => {
                let bounds: Vec<(i32, i32)> =
                    p.iter().map(|pk| (0, pk * periods.max(1) as i32 - 1)).collect();
                Region::boxed(&bounds)
            }
            None => self.patterns.iter().fold(Region::empty(), |acc, p| acc.union(&p.region)),
        }
    }

    /// `sup_X ||Psi(X)||`.
    pub fn sup_norm(&self) -> f64 {
        let domain = self.fundamental_domain(1);
        self.charges_meeting(&domain)
            .values()
            .map(operator_norm)
            .fold(0.0, f64::max)
    }
}

/// `delta(A) = [C_hat_Psi(supp A), A]_gamma`.
pub fn apply_delta(psi: &ChargeAssignment, a: &CarPolynomial) -> CarPolynomial {
    let support = a.support();
    if support.is_empty() {
        return CarPolynomial::zero();
    }
    psi.local_charge(&support).graded_commutator(a)
}

/// Outcome of the exact nilpotency check.
#[derive(Debug, Clone, PartialEq)]
pub enum NilpotencyVerdict {
    Nilpotent { generators_checked: usize },
    NotNilpotent { generator: Generator, image: CarPolynomial },
}

impl NilpotencyVerdict {
    pub fn is_nilpotent(&self) -> bool {
        matches!(self, NilpotencyVerdict::Nilpotent { .. })
    }
}

/// A superderivation together with its conjugate and symmetrizations.
#[derive(Debug, Clone)]
pub struct Superderivation {
    psi: ChargeAssignment,
    psi_star: ChargeAssignment,
    psi_s1: ChargeAssignment,
    psi_s2: ChargeAssignment,
}

impl Superderivation {
    pub fn new(psi: ChargeAssignment) -> Self {
        let psi_star = psi.conjugate();
        let (psi_s1, psi_s2) = psi.symmetrize();
        Superderivation { psi, psi_star, psi_s1, psi_s2 }
    }

    pub fn assignment(&self) -> &ChargeAssignment {
        &self.psi
    }

    pub fn conjugate_assignment(&self) -> &ChargeAssignment {
        &self.psi_star
    }

    pub fn symmetrized(&self) -> (&ChargeAssignment, &ChargeAssignment) {
        (&self.psi_s1, &self.psi_s2)
    }

    pub fn delta(&self, a: &CarPolynomial) -> CarPolynomial {
        apply_delta(&self.psi, a)
    }

    pub fn delta_star(&self, a: &CarPolynomial) -> CarPolynomial {
        apply_delta(&self.psi_star, a)
    }

    pub fn delta_s1(&self, a: &CarPolynomial) -> CarPolynomial {
        apply_delta(&self.psi_s1, a)
    }

    pub fn delta_s2(&self, a: &CarPolynomial) -> CarPolynomial {
        apply_delta(&self.psi_s2, a)
    }

    /// `delta*(F) = -delta(gamma(F*))*`, computed from `delta` alone.
    pub fn delta_star_via_conjugation(&self, a: &CarPolynomial) -> CarPolynomial {
        -&self.delta(&a.adjoint().gamma()).adjoint()
    }

    /// `delta(delta(A))` from the pair formula `sum_{X2 meets X1} [Psi(X2) Psi(X1), A]`.
    pub fn delta_squared_pair(&self, a: &CarPolynomial) -> CarPolynomial {
        pair_sum(&self.psi, a)
    }

    /// Exact check of `delta^2 = 0` on every generator `a_i`, `a*_i` with `i`
    /// in `periods` fundamental cells. `delta^2` is an ordinary derivation, so
    /// vanishing on generators (and their translates) gives vanishing on all
    /// local elements.
    pub fn check_nilpotent(&self, periods: u32) -> NilpotencyVerdict {
        let domain = self.psi.fundamental_domain(periods);
        let mut checked = 0;
        for s in domain.iter() {
            for g in [Generator::Annihilate(*s), Generator::Create(*s)] {
                let a = CarPolynomial::generator(g);
                let image = self.delta(&self.delta(&a));
                checked += 1;
                if !image.is_zero() {
                    return NilpotencyVerdict::NotNilpotent { generator: g, image };
                }
            }
        }
        NilpotencyVerdict::Nilpotent { generators_checked: checked }
    }

    /// Verifies nilpotency (over two periods) and unlocks the even dynamics.
    pub fn into_nilpotent(self) -> Result<NilpotentSuperderivation> {
        match self.check_nilpotent(2) {
            NilpotencyVerdict::Nilpotent { .. } => Ok(NilpotentSuperderivation { inner: self }),
            NilpotencyVerdict::NotNilpotent { generator, image } => Err(SusyError::NotNilpotent {
                generator: generator.to_string(),
                image: image.to_string(),
            }),
        }
    }
}

/// `sum_{X2 meets X1, (X2 u X1) meets I} [Psi(X2) Psi(X1), A]` for `A in F(I)`.
fn pair_sum(psi: &ChargeAssignment, a: &CarPolynomial) -> CarPolynomial {
    let support = a.support();
    if support.is_empty() {
        return CarPolynomial::zero();
    }
    let charges: Vec<(Region, CarPolynomial)> =
        psi.charges_meeting(&support.enlarge(psi.range())).into_iter().collect();
    let mut pair = CarPolynomial::zero();
    for (x2, q2) in &charges {
        for (x1, q1) in &charges {
            if x2.intersects(x1) && x2.union(x1).intersects(&support) {
                pair = &pair + &(q2 * q1);
            }
        }
    }
    pair.commutator(a)
}

/// A superderivation whose nilpotency has been verified exactly.
#[derive(Debug, Clone)]
pub struct NilpotentSuperderivation {
    inner: Superderivation,
}

impl std::ops::Deref for NilpotentSuperderivation {
    type Target = Superderivation;
    fn deref(&self) -> &Superderivation {
        &self.inner
    }
}

impl NilpotentSuperderivation {
    /// `delta_0 = delta* delta + delta delta*`.
    pub fn delta0(&self, a: &CarPolynomial) -> CarPolynomial {
        &self.delta_star(&self.delta(a)) + &self.delta(&self.delta_star(a))
    }

    /// `delta_0` as the square of `delta_s1`.
    pub fn delta0_via_s1(&self, a: &CarPolynomial) -> CarPolynomial {
        self.delta_s1(&self.delta_s1(a))
    }

    /// `delta_0` as the square of `delta_s2`.
    pub fn delta0_via_s2(&self, a: &CarPolynomial) -> CarPolynomial {
        self.delta_s2(&self.delta_s2(a))
    }

    /// `delta_0` from the pair formula over overlapping symmetrized charges.
    pub fn delta0_pair(&self, a: &CarPolynomial) -> CarPolynomial {
        pair_sum(&self.inner.psi_s1, a)
    }

    pub fn delta0_power(&self, a: &CarPolynomial, n: usize) -> CarPolynomial {
        (0..n).fold(a.clone(), |acc, _| self.delta0(&acc))
    }

    /// Norm constants for both symmetrizations; the larger `L` is used.
    pub fn norm_constants(&self) -> NormConstants {
        let c1 = NormConstants::for_symmetrized(&self.inner.psi_s1);
        let c2 = NormConstants::for_symmetrized(&self.inner.psi_s2);
        if c2.l > c1.l {
            c2
        } else {
            c1
        }
    }
}

/// `L = sup_i sum_{X contains i} sum_{Y meets X} ||Psi_s(Y)|| ||Psi_s(X)||`,
/// `M = exp(8 r^dim L)`, `t0 = 1/M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormConstants {
    pub l: f64,
    /// `ln M = 8 r^dim L`, kept separately since `M` overflows quickly.
    pub ln_m: f64,
    pub m: f64,
    pub t0: f64,
    pub range: u32,
    pub dim: usize,
}

impl NormConstants {
    pub fn for_symmetrized(psi_s: &ChargeAssignment) -> Self {
        let mut norms: HashMap<Region, f64> = HashMap::new();
        let mut norm_of = |x: &Region, q: &CarPolynomial| -> f64 {
            *norms.entry(x.clone()).or_insert_with(|| operator_norm(q))
        };
        let mut l = 0.0_f64;
        for i in psi_s.fundamental_domain(1).iter() {
            let at_i = Region::from_iter([*i]);
            let mut total = 0.0;
            for (x, qx) in psi_s.charges_meeting(&at_i) {
                let nx = norm_of(&x, &qx);
                for (y, qy) in psi_s.charges_meeting(&x) {
                    total += norm_of(&y, &qy) * nx;
                }
            }
            l = l.max(total);
        }
        let r = psi_s.range() as f64;
        let ln_m = 8.0 * r.powi(psi_s.dim() as i32) * l;
        let m = ln_m.exp();
        NormConstants { l, ln_m, m, t0: (-ln_m).exp(), range: psi_s.range(), dim: psi_s.dim() }
    }

    /// `ln( ||A|| exp(4 |I| L) M^n )`, the log of the bound on `||delta_0^n(A)|| / n!`.
    pub fn ln_term_bound(&self, a_norm: f64, support_size: usize, n: usize) -> f64 {
        a_norm.ln() + 4.0 * support_size as f64 * self.l + n as f64 * self.ln_m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(i: i32) -> CarPolynomial {
        CarPolynomial::annihilate(Site::d1(i))
    }
    fn ad(i: i32) -> CarPolynomial {
        CarPolynomial::create(Site::d1(i))
    }
    fn q(j: i32) -> CarPolynomial {
        &(&a(2 * j + 1) * &ad(2 * j)) * &a(2 * j - 1)
    }

    #[test]
    fn nicolai_local_charges() {
        let psi = ChargeAssignment::nicolai();
        assert_eq!(psi.local_charge(&Region::interval(0, 0)), q(0));
        let c = psi.local_charge(&Region::interval(-1, 3));
        assert_eq!(c, &(&q(-1) + &q(0)) + &(&q(1) + &q(2)));
        assert!(c.support().is_subset(&Region::interval(-1, 3).enlarge(3)));
        assert!(ChargeAssignment::zero(1).local_charge(&Region::interval(-4, 4)).is_zero());
    }

    #[test]
    fn conjugate_and_symmetrizations() {
        let psi = ChargeAssignment::nicolai();
        let x = Region::interval(-1, 1);
        assert_eq!(psi.conjugate().value(&x), &(&ad(-1) * &a(0)) * &ad(1));
        let (s1, s2) = psi.symmetrize();
        for p in s1.patterns().iter().chain(s2.patterns()) {
            assert!(p.polynomial.is_hermitian());
        }
        let (_, m2) = ChargeAssignment::majorana().symmetrize();
        assert!(m2.is_zero());
    }

    #[test]
    fn delta_of_unit_vanishes() {
        let d = Superderivation::new(ChargeAssignment::nicolai());
        assert!(d.delta(&CarPolynomial::one()).is_zero());
    }

    #[test]
    fn nicolai_is_nilpotent_dense_variant_is_not() {
        let d = Superderivation::new(ChargeAssignment::nicolai());
        assert!(d.check_nilpotent(2).is_nilpotent());
        assert!(Superderivation::new(ChargeAssignment::majorana()).check_nilpotent(2).is_nilpotent());
        let m = Superderivation::new(ChargeAssignment::dense_nicolai());
        match m.check_nilpotent(2) {
            NilpotencyVerdict::NotNilpotent { image, .. } => assert!(!image.is_zero()),
            v => panic!("expected failure, got {v:?}"),
        }
        assert!(Superderivation::new(ChargeAssignment::zero(1)).check_nilpotent(2).is_nilpotent());
    }

    #[test]
    fn delta_squared_matches_pair_formula() {
        let m = Superderivation::new(ChargeAssignment::majorana());
        assert_eq!(m.delta(&a(0)), CarPolynomial::one());
        let d = Superderivation::new(ChargeAssignment::dense_nicolai());
        for x in [a(0), ad(1), &a(0) * &ad(2)] {
            let img = d.delta(&d.delta(&x));
            assert_eq!(img, d.delta_squared_pair(&x));
        }
    }

    #[test]
    fn invalid_patterns_are_rejected() {
        let even = Pattern { region: Region::interval(0, 0), polynomial: &a(0) * &ad(0) };
        assert!(ChargeAssignment::periodic(1, vec![1], vec![even], 1).is_err());
        let outside = Pattern { region: Region::interval(0, 0), polynomial: a(1) };
        assert!(ChargeAssignment::periodic(1, vec![1], vec![outside], 1).is_err());
        let wide = Pattern { region: Region::interval(0, 4), polynomial: a(0) };
        assert!(ChargeAssignment::periodic(1, vec![1], vec![wide], 3).is_err());
    }

    #[test]
    fn zero_assignment_constants() {
        let d = Superderivation::new(ChargeAssignment::zero(1)).into_nilpotent().unwrap();
        let c = d.norm_constants();
        assert_eq!((c.l, c.m, c.t0), (0.0, 1.0, 1.0));
    }
}
