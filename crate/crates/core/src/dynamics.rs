//! Finite-volume dynamics `delta_0,L = delta_s,L^2` and its certified Lie series.
//!
//! For a region `L`, `delta_s,L(F) = [C_hat_s(L), F]_gamma` with the symmetrized
//! hermitian charge, so `delta_0,L(F) = [H_L, F]` with `H_L = C_hat_s(L)^2` and
//! `alpha_t^L(F) = exp(itH_L) F exp(-itH_L) = sum_n (it)^n / n! delta_0,L^n(F)`.

use num_complex::Complex64;
use serde::Serialize;

use crate::car::{CarPolynomial, Region};
use crate::error::{Result, SusyError};
use crate::fock::operator_norm;
use crate::scalar::Coefficient;
use crate::supercharge::{apply_delta, ChargeAssignment, NilpotentSuperderivation, NormConstants};

/// Largest truncation order attempted before giving up.
pub const DEFAULT_MAX_ORDER: usize = 400;
/// Largest number of sub-steps for times beyond the analytic radius.
pub const MAX_SUBSTEPS: usize = 4096;
/// Default cap on the number of terms of any `delta_0,L^n(A)`.
pub const DEFAULT_MAX_TERMS: usize = 2_000_000;

/// `delta_0,L(F)` as the iterated graded commutator with `C_hat_s(L)`.
pub fn local_derivation(psi_s: &ChargeAssignment, region: &Region, f: &CarPolynomial) -> CarPolynomial {
    let c = psi_s.local_charge(region);
    c.graded_commutator(&c.graded_commutator(f))
}

/// `delta_0,L(F)` from the pair sum over overlapping charges that meet `L`.
pub fn local_derivation_pair(psi_s: &ChargeAssignment, region: &Region, f: &CarPolynomial) -> CarPolynomial {
    let charges: Vec<(Region, CarPolynomial)> = psi_s.charges_meeting(region).into_iter().collect();
    let mut h = CarPolynomial::zero();
    for (x2, q2) in &charges {
        for (x1, q1) in &charges {
            if x2.intersects(x1) {
                h = &h + &(q2 * q1);
            }
        }
    }
    h.commutator(f)
}

/// Local Hamiltonian `H_L = C_hat_s(L)^2`.
pub fn local_hamiltonian(psi_s: &ChargeAssignment, region: &Region) -> CarPolynomial {
    let c = psi_s.local_charge(region);
    &c * &c
}

/// Terms of `h` whose sites meet `region`; the even rest commutes with
/// anything supported in `region`.
fn meeting<C: Coefficient>(h: &CarPolynomial<C>, region: &Region) -> CarPolynomial<C> {
    let mut out = CarPolynomial::zero();
    for (m, c) in h.iter() {
        if m.sites().any(|s| region.contains(s)) {
            out.add_term(m.clone(), c.clone());
        }
    }
    out
}

/// `delta_0,L^n(A)` for `n = 0..=order`, with `H_L` built once and even.
pub fn series_terms<C: Coefficient>(h: &CarPolynomial<C>, a: &CarPolynomial<C>, order: usize) -> Vec<CarPolynomial<C>> {
    series_terms_budget(h, a, order, usize::MAX).expect("unbounded budget")
}

/// [`series_terms`] that stops once some term exceeds `budget` monomials.
pub fn series_terms_budget<C: Coefficient>(
    h: &CarPolynomial<C>,
    a: &CarPolynomial<C>,
    order: usize,
    budget: usize,
) -> Result<Vec<CarPolynomial<C>>> {
    let mut terms = Vec::with_capacity(order + 1);
    terms.push(a.clone());
    for n in 1..=order {
        let prev = &terms[n - 1];
        let next = meeting(h, &prev.support()).commutator(prev);
        if next.len() > budget {
            return Err(SusyError::TermBudgetExceeded { order: n, terms: next.len(), budget });
        }
        let done = next.is_zero();
        terms.push(next);
        if done {
            terms.resize(order + 1, CarPolynomial::zero());
            break;
        }
    }
    Ok(terms)
}

/// `sum_n (it)^n / n! F_n`.
pub fn sum_series<C: Coefficient>(terms: &[CarPolynomial<C>], t: f64) -> CarPolynomial<Complex64> {
    let mut out = CarPolynomial::<Complex64>::zero();
    let mut w = Complex64::new(1.0, 0.0);
    for (n, f) in terms.iter().enumerate() {
        if n > 0 {
            w *= Complex64::new(0.0, t) / n as f64;
        }
        if w == Complex64::new(0.0, 0.0) {
            break;
        }
        out = &out + &f.to_c64().scale(&w);
    }
    out
}

/// Certified remainder `||A|| e^{4|I|L} sum_{n > N} q^n` with `q = |t| M < 1`.
pub fn tail_bound(c: &NormConstants, a_norm: f64, support_size: usize, t: f64, order: usize) -> f64 {
    if t == 0.0 || a_norm == 0.0 {
        return 0.0;
    }
    let ln_q = t.abs().ln() + c.ln_m;
    if ln_q >= 0.0 {
        return f64::INFINITY;
    }
    let q = ln_q.exp();
    (a_norm.ln() + 4.0 * support_size as f64 * c.l + (order as f64 + 1.0) * ln_q - (-q).ln_1p()).exp()
}

/// Smallest `N` with `tail_bound <= tol`, or `None` if it exceeds `max_order`.
pub fn truncation_order(
    c: &NormConstants,
    a_norm: f64,
    support_size: usize,
    t: f64,
    tol: f64,
    max_order: usize,
) -> Option<usize> {
    (0..=max_order).find(|n| tail_bound(c, a_norm, support_size, t, *n) <= tol)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionResult {
    pub t: f64,
    #[serde(rename = "N")]
    pub order: usize,
    pub tail_bound: f64,
    pub steps: usize,
    pub support: Region,
    pub region: Region,
    #[serde(serialize_with = "display")]
    pub polynomial: CarPolynomial<Complex64>,
    /// Exact `delta_0,L^n(A)` for the single-step case.
    #[serde(skip)]
    pub exact_terms: Option<Vec<CarPolynomial>>,
}

fn display<S: serde::Serializer>(p: &CarPolynomial<Complex64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&p.to_string())
}

/// Options for [`lie_series_evolve`].
#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub max_order: usize,
    /// Overrides the certified order (the tail bound is still reported for it).
    pub fixed_order: Option<usize>,
    pub max_terms: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { max_order: DEFAULT_MAX_ORDER, fixed_order: None, max_terms: DEFAULT_MAX_TERMS }
    }
}

/// Certified truncated Lie series for `alpha_t^L(A)`. Times with `|t| >= t0`
/// are split into equal sub-steps of length at most `t0 / 2`.
pub fn lie_series_evolve(
    d: &NilpotentSuperderivation,
    region: &Region,
    a: &CarPolynomial,
    t: f64,
    tol: f64,
    opts: EvolveOptions,
) -> Result<EvolutionResult> {
    if !t.is_finite() || !(tol > 0.0) {
        return Err(SusyError::InvalidArgument(format!("time {t} and tolerance {tol} must be finite, tol > 0")));
    }
    let c = d.norm_constants();
    let (psi_s, _) = d.symmetrized();
    let h = local_hamiltonian(psi_s, region);
    if t == 0.0 {
        return Ok(EvolutionResult {
            t,
            order: 0,
            tail_bound: 0.0,
            steps: 0,
            support: a.support(),
            region: region.clone(),
            polynomial: a.to_c64(),
            exact_terms: Some(vec![a.clone()]),
        });
    }
    let steps = if t.abs() < c.t0 { 1 } else { (t.abs() / (c.t0 / 2.0)).ceil() as usize };
    if steps > MAX_SUBSTEPS {
        return Err(SusyError::OutsideRadius { t, t0: c.t0 });
    }
    let dt = t / steps as f64;
    let step_tol = tol / steps as f64;

    let mut current = a.to_c64();
    let mut exact_terms = None;
    let mut total_tail = 0.0;
    let mut last_order = 0;
    for step in 0..steps {
        let support = current.support();
        let norm = operator_norm(&current);
        let order = match opts.fixed_order {
            Some(n) => n,
            None => truncation_order(&c, norm, support.len(), dt, step_tol, opts.max_order).ok_or(
                SusyError::ToleranceUnreachable {
                    achieved: tail_bound(&c, norm, support.len(), dt, opts.max_order),
                    tol: step_tol,
                    order: opts.max_order,
                },
            )?,
        };
        total_tail += tail_bound(&c, norm, support.len(), dt, order);
        current = if step == 0 {
            let terms = series_terms_budget(&h, a, order, opts.max_terms)?;
            let v = sum_series(&terms, dt);
            exact_terms = Some(terms);
            v
        } else {
            sum_series(&series_terms_budget(&h.to_c64(), &current, order, opts.max_terms)?, dt)
        };
        last_order = order;
    }
    if steps > 1 {
        exact_terms = None;
    }
    Ok(EvolutionResult {
        t,
        order: last_order,
        tail_bound: total_tail,
        steps,
        support: current.support(),
        region: region.clone(),
        polynomial: current,
        exact_terms,
    })
}

/// Sum of coefficient moduli: an upper bound on the operator norm (every
/// normal-ordered monomial has norm at most 1) that vanishes only on 0.
pub fn coefficient_norm<C: Coefficient>(p: &CarPolynomial<C>) -> f64 {
    p.iter().map(|(_, c)| c.magnitude()).fold(0.0, |s, x| s + x)
}

/// One rung of the commutation ladder.
#[derive(Debug, Clone, Serialize)]
pub struct CommutationRung {
    pub region: Region,
    /// Coefficient-norm bound on `||delta_s(alpha_t(A)) - alpha_t(delta_s(A))||`.
    pub residual: f64,
    /// Whether every order `n <= N` cancels exactly.
    pub exact_zero: bool,
}

/// `delta_s alpha_t^L(A) - alpha_t^L delta_s(A)` along increasing regions, at fixed order.
pub fn commutation_residual(
    d: &NilpotentSuperderivation,
    ladder: &[Region],
    a: &CarPolynomial,
    t: f64,
    order: usize,
    budget: usize,
) -> Result<Vec<CommutationRung>> {
    let (psi_s, _) = d.symmetrized();
    let da = apply_delta(psi_s, a);
    ladder
        .iter()
        .map(|region| {
            let h = local_hamiltonian(psi_s, region);
            let lhs = series_terms_budget(&h, a, order, budget)?;
            let rhs = series_terms_budget(&h, &da, order, budget)?;
            let diffs: Vec<CarPolynomial> =
                lhs.iter().zip(&rhs).map(|(l, r)| &apply_delta(psi_s, l) - r).collect();
            let exact_zero = diffs.iter().all(CarPolynomial::is_zero);
            Ok(CommutationRung {
                region: region.clone(),
                residual: coefficient_norm(&sum_series(&diffs, t)),
                exact_zero,
            })
        })
        .collect()
}

/// Exact comparison of `delta_0,L^n(A)`, `n <= N`, along `L = {-k..k}`.
#[derive(Debug, Clone, Serialize)]
pub struct Stabilization {
    pub order: usize,
    pub ks: Vec<i32>,
    /// `changed[i]`: whether some term differs between `ks[i]` and `ks[i + 1]`.
    pub changed: Vec<bool>,
    /// Smallest listed `k` from which all later rungs agree exactly.
    pub stable_from: Option<i32>,
    /// `2 N r`, the radius beyond which the terms can no longer change.
    pub required_k: i32,
}

pub fn stabilization_ladder(
    d: &NilpotentSuperderivation,
    ks: &[i32],
    a: &CarPolynomial,
    order: usize,
    budget: usize,
) -> Result<Stabilization> {
    let (psi_s, _) = d.symmetrized();
    let support = a.support();
    let runs: Vec<Vec<CarPolynomial>> = ks
        .iter()
        .map(|&k| {
            let region = support.enlarge(k.max(0) as u32);
            series_terms_budget(&local_hamiltonian(psi_s, &region), a, order, budget)
        })
        .collect::<Result<_>>()?;
    let changed: Vec<bool> = runs.windows(2).map(|w| w[0] != w[1]).collect();
    let stable_from = (0..ks.len()).find(|&i| changed[i.min(changed.len())..].iter().all(|c| !c)).map(|i| ks[i]);
    Ok(Stabilization {
        order,
        ks: ks.to_vec(),
        changed,
        stable_from,
        required_k: 2 * order as i32 * psi_s.range() as i32,
    })
}

/// Largest support on which `||.||` is computed exactly; beyond it the
/// coefficient norm (an upper bound) is used.
pub const EXACT_NORM_SITES: usize = 12;

#[derive(Debug, Clone, Serialize)]
pub struct NormBoundRow {
    pub sample: usize,
    pub n: usize,
    /// `ln(||delta_0^n(A)|| / n!)`, or of its coefficient-norm upper bound.
    pub ln_measured: f64,
    pub ln_bound: f64,
    pub exact_norm: bool,
    /// `ln_bound - ln_measured`.
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormBoundReport {
    pub rows: Vec<NormBoundRow>,
    pub violations: usize,
    pub min_slack: f64,
}

/// `||delta_0^n(A)|| / n! <= ||A|| e^{4|I|L} M^n` for `n = 1..=max_n`.
pub fn norm_bound_check(d: &NilpotentSuperderivation, samples: &[CarPolynomial], max_n: usize) -> NormBoundReport {
    use rayon::prelude::*;
    let c = d.norm_constants();
    let rows: Vec<NormBoundRow> = samples
        .par_iter()
        .enumerate()
        .flat_map_iter(|(k, a)| {
            let a_norm = operator_norm(a);
            let support = a.support().len();
            let mut cur = a.clone();
            let mut ln_fact = 0.0;
            let mut rows = Vec::with_capacity(max_n);
            for n in 1..=max_n {
                cur = d.delta0(&cur);
                ln_fact += (n as f64).ln();
                let exact_norm = cur.support().len() <= EXACT_NORM_SITES;
                let norm = if exact_norm { operator_norm(&cur) } else { coefficient_norm(&cur) };
                let ln_measured = norm.ln() - ln_fact;
                let ln_bound = c.ln_term_bound(a_norm, support, n);
                rows.push(NormBoundRow { sample: k, n, ln_measured, ln_bound, exact_norm, slack: ln_bound - ln_measured });
            }
            rows
        })
        .collect();
    NormBoundReport {
        violations: rows.iter().filter(|r| r.slack < 0.0).count(),
        min_slack: rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::car::Site;
    use crate::supercharge::Superderivation;

    fn nicolai() -> NilpotentSuperderivation {
        Superderivation::new(ChargeAssignment::nicolai()).into_nilpotent().unwrap()
    }

    #[test]
    fn iterated_and_pair_forms_agree() {
        let d = nicolai();
        let (s1, _) = d.symmetrized();
        let region = Region::interval(-2, 2);
        let a = CarPolynomial::annihilate(Site::d1(0));
        assert_eq!(local_derivation(s1, &region, &a), local_derivation_pair(s1, &region, &a));
        assert!(local_derivation(s1, &region, &CarPolynomial::one()).is_zero());
    }

    #[test]
    fn large_region_reproduces_delta0() {
        let d = nicolai();
        let (s1, _) = d.symmetrized();
        let a = CarPolynomial::annihilate(Site::d1(0));
        let region = Region::interval(0, 0).enlarge(6);
        assert_eq!(local_derivation(s1, &region, &a), d.delta0(&a));
    }

    #[test]
    fn time_zero_is_identity() {
        let d = nicolai();
        let a = CarPolynomial::annihilate(Site::d1(0));
        let r = lie_series_evolve(&d, &Region::interval(-3, 3), &a, 0.0, 1e-8, EvolveOptions::default()).unwrap();
        assert_eq!(r.tail_bound, 0.0);
        assert_eq!(r.polynomial, a.to_c64());
    }

    #[test]
    fn nicolai_constants() {
        let c = nicolai().norm_constants();
        assert!((c.l - 6.0).abs() < 1e-9, "{c:?}");
        assert!((c.ln_m - 144.0).abs() < 1e-6);
    }

    #[test]
    fn zero_assignment_residuals_vanish() {
        let d = Superderivation::new(ChargeAssignment::zero(1)).into_nilpotent().unwrap();
        let a = CarPolynomial::annihilate(Site::d1(0));
        let ladder: Vec<Region> = (1..4).map(|k| Region::interval(-k, k)).collect();
        assert!(commutation_residual(&d, &ladder, &a, 0.5, 3, 1000).unwrap().iter().all(|r| r.exact_zero));
    }

    #[test]
    fn norm_bound_holds_at_low_order() {
        let d = nicolai();
        let a = CarPolynomial::annihilate(Site::d1(0));
        let r = norm_bound_check(&d, &[a], 3);
        assert_eq!(r.violations, 0);
        assert!(r.rows[0].exact_norm && r.rows[0].slack > 0.0);
    }

    #[test]
    fn budget_stops_growth() {
        let d = nicolai();
        let (s1, _) = d.symmetrized();
        let h = local_hamiltonian(s1, &Region::interval(-20, 20));
        let a = CarPolynomial::annihilate(Site::d1(0));
        let err = series_terms_budget(&h, &a, 10, 100).unwrap_err();
        assert!(matches!(err, SusyError::TermBudgetExceeded { order: 3, .. }), "{err}");
    }

    #[test]
    fn low_order_terms_stabilize() {
        let d = nicolai();
        let a = CarPolynomial::annihilate(Site::d1(0));
        let s = stabilization_ladder(&d, &[2, 4, 6, 8, 10, 12], &a, 2, 100_000).unwrap();
        let k = s.stable_from.unwrap();
        assert!(k <= s.required_k, "{s:?}");
    }
}
