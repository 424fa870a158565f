use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use super::linalg::{self, DMat};
use super::susy::{finite_charge, BoundaryMode};
use super::FockRepresentation;
use crate::car::{CarPolynomial, Generator, Monomial, Parity, Region, Site};
use crate::error::{Result, SusyError};
use crate::scalar::{Coefficient, Exact};
use crate::supercharge::ChargeAssignment;

type SparseVec = BTreeMap<usize, Complex64>;

/// A state on the fermion lattice.
#[derive(Debug, Clone)]
pub enum LatticeState {
    /// All modes empty: `phi(a*_j a_j) = 0`.
    Fock,
    /// All modes filled: `phi(a_j a*_j) = 0`.
    AntiFock,
    /// Unit vector in the Fock space of `region`.
    Vector { region: Region, v: Vec<Complex64> },
    /// Convex mixture `sum_k w_k |v_k><v_k|` of unit vectors on `region`.
    Density { region: Region, components: Vec<(f64, Vec<Complex64>)> },
}

impl LatticeState {
    pub fn vector(region: Region, v: Vec<Complex64>) -> Result<Self> {
        let n = linalg::vnorm(&v);
        if v.len() != 1 << region.len() || n == 0.0 {
            return Err(SusyError::InvalidArgument("state vector has the wrong length or is zero".into()));
        }
        Ok(LatticeState::Vector { region, v: v.into_iter().map(|x| x / n).collect() })
    }

    /// Density matrix given as a matrix; decomposed spectrally.
    pub fn density(region: Region, rho: &DMat) -> Result<Self> {
        let (vals, vecs) = linalg::hermitian_eigen(rho);
        if vals.iter().any(|v| *v < -1e-12) {
            return Err(SusyError::InvalidArgument("density matrix is not positive".into()));
        }
        let trace: f64 = vals.iter().sum();
        let cut = 1e-12 * trace;
        let components = vals
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > cut)
            .map(|(k, v)| (v / trace, vecs.column(k).iter().copied().collect()))
            .collect();
        Ok(LatticeState::Density { region, components })
    }

    pub fn mixture(region: Region, components: Vec<(f64, Vec<Complex64>)>) -> Result<Self> {
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if components.iter().any(|(w, _)| *w < 0.0) || total <= 0.0 {
            return Err(SusyError::InvalidArgument("mixture weights must be non-negative".into()));
        }
        let components = components
            .into_iter()
            .map(|(w, v)| {
                let n = linalg::vnorm(&v);
                (w / total, v.into_iter().map(|x| x / n).collect())
            })
            .collect();
        Ok(LatticeState::Density { region, components })
    }

    /// Exact expectation for the product states.
    pub fn expectation_exact(&self, p: &CarPolynomial) -> Option<Exact> {
        match self {
            LatticeState::Fock => Some(p.scalar_part()),
            LatticeState::AntiFock => Some(filled_expectation(p)),
            _ => None,
        }
    }

    /// Mixture components on the Fock space of `region` (which must contain
    /// the state's own region for vector and density states).
    fn components_on(&self, rep: &FockRepresentation) -> Result<Vec<(f64, SparseVec)>> {
        let one = Complex64::new(1.0, 0.0);
        match self {
            LatticeState::Fock => Ok(vec![(1.0, SparseVec::from([(rep.vacuum_index(), one)]))]),
            LatticeState::AntiFock => Ok(vec![(1.0, SparseVec::from([(rep.filled_index(), one)]))]),
            LatticeState::Vector { region, v } => Ok(vec![(1.0, embed(rep, region, v)?)]),
            LatticeState::Density { region, components } => components
                .iter()
                .map(|(w, v)| Ok((*w, embed(rep, region, v)?)))
                .collect(),
        }
    }

    fn own_region(&self) -> Option<&Region> {
        match self {
            LatticeState::Vector { region, .. } | LatticeState::Density { region, .. } => Some(region),
            _ => None,
        }
    }

    /// `phi(p)` through the matrix representation of `region`.
    pub fn expectation(&self, rep: &FockRepresentation, p: &CarPolynomial<Complex64>) -> Result<Complex64> {
        let comps = self.components_on(rep)?;
        let mut acc = Complex64::zero();
        for (w, v) in &comps {
            acc += inner(v, &apply_poly(rep, p, v)?) * w;
        }
        Ok(acc)
    }
}

/// Embeds a vector on `region` into `rep` (an enlargement of `region`), filling
/// the extra sites with the vacuum.
fn embed(rep: &FockRepresentation, region: &Region, v: &[Complex64]) -> Result<SparseVec> {
    if !region.is_subset(rep.region()) {
        return Err(SusyError::SupportOutsideRegion {
            support: region.to_string(),
            region: rep.region().to_string(),
        });
    }
    let sites = region.to_vec();
    let mut out = SparseVec::new();
    for (s, x) in v.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        let occ: Vec<Site> = sites.iter().enumerate().filter(|(k, _)| s >> k & 1 == 1).map(|(_, t)| *t).collect();
        out.insert(rep.index_of_occupation(&occ)?, *x);
    }
    Ok(out)
}

/// The *-automorphism `a_i <-> a*_i`.
pub fn particle_hole<C: Coefficient>(p: &CarPolynomial<C>) -> CarPolynomial<C> {
    p.substitute(|g| match g {
        Generator::Create(s) => Generator::Annihilate(s),
        Generator::Annihilate(s) => Generator::Create(s),
    })
}

/// `phi(p)` for the filled state: after `a <-> a*`, a normal-ordered
/// `a*_C a_D` has vacuum value `(-1)^{k(k-1)/2}` if `C = D` (`|C| = k`), else 0.
fn filled_expectation(p: &CarPolynomial) -> Exact {
    let mut acc = Exact::zero();
    for (m, c) in p.iter() {
        if m.creations() == m.annihilations() {
            let k = m.creations().len();
            if (k * k.saturating_sub(1) / 2) % 2 == 1 {
                acc -= c;
            } else {
                acc += c;
            }
        }
    }
    acc
}

fn inner(u: &SparseVec, v: &SparseVec) -> Complex64 {
    let (small, big, swap) = if u.len() <= v.len() { (u, v, false) } else { (v, u, true) };
    let mut acc = Complex64::zero();
    for (i, a) in small {
        if let Some(b) = big.get(i) {
            acc += if swap { b.conj() * a } else { a.conj() * b };
        }
    }
    acc
}

fn apply_poly<C: Coefficient>(rep: &FockRepresentation, p: &CarPolynomial<C>, v: &SparseVec) -> Result<SparseVec> {
    let mut out = SparseVec::new();
    for (m, c) in p.iter() {
        let slots = rep.slots(m)?;
        let c = c.to_c64();
        for (s, x) in v {
            if let Some((t, neg)) = rep.act(&slots, *s) {
                let y = if neg { -c * x } else { c * x };
                *out.entry(t).or_insert_with(Complex64::zero) += y;
            }
        }
    }
    out.retain(|_, x| !x.is_zero());
    Ok(out)
}

fn vnorm(v: &SparseVec) -> f64 {
    v.values().map(|x| x.norm_sqr()).fold(0.0, |s, x| s + x).sqrt()
}

/// Which supercharge the superderivation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChargeWindow {
    /// Lattice superderivation `[C_hat(supp A), A]_gamma`; the state is read on
    /// the region enlarged by the range.
    Local,
    /// Finite-volume superderivation `[C(region), A]_gamma`.
    Finite(BoundaryMode),
}

#[derive(Debug, Clone, Serialize)]
pub struct StateSusyReport {
    pub basis_size: usize,
    /// `max |phi(delta(A))|` from exact symbolic expectations (product states only).
    pub symbolic_violation: Option<f64>,
    pub symbolic_exact_zero: Option<bool>,
    /// `max |phi(delta(A))|` through the matrix representation.
    pub violation: f64,
    pub violation_star: f64,
    pub violation_s1: f64,
    pub violation_s2: f64,
    /// `||Q v||`, `||Q^dagger v||` (largest over mixture components).
    pub q_norm: f64,
    pub q_dag_norm: f64,
    pub tolerance: f64,
    pub supersymmetric: bool,
}

/// All monomials of `F(region)`: every choice of creation and annihilation subsets.
pub fn monomial_basis(region: &Region) -> Vec<Monomial> {
    let sites = region.to_vec();
    let n = sites.len();
    let pick = |mask: usize| -> Vec<Site> { (0..n).filter(|k| mask >> k & 1 == 1).map(|k| sites[k]).collect() };
    let mut out = Vec::with_capacity(1 << (2 * n));
    for c in 0..1usize << n {
        for a in 0..1usize << n {
            out.push(Monomial::from_sorted(pick(c), pick(a)));
        }
    }
    out
}

/// Checks `phi(delta(A)) = 0` for every monomial `A` of `F(region)`, for the
/// superderivation of `psi`, its conjugate and both symmetrizations.
pub fn verify_state_susy(
    state: &LatticeState,
    psi: &ChargeAssignment,
    region: &Region,
    window: ChargeWindow,
    tol: f64,
) -> Result<StateSusyReport> {
    let symbolic = match state {
        LatticeState::Fock | LatticeState::AntiFock => Some(product_state_values(psi, &monomial_basis(region))),
        _ => None,
    };
    verify_with(state, psi, region, window, tol, symbolic.as_deref())
}

/// Fock and anti-Fock checks sharing one symbolic pass over the monomial basis.
pub fn verify_product_states(
    psi: &ChargeAssignment,
    region: &Region,
    window: ChargeWindow,
    tol: f64,
) -> Result<[StateSusyReport; 2]> {
    let vals = product_state_values(psi, &monomial_basis(region));
    Ok([
        verify_with(&LatticeState::Fock, psi, region, window, tol, Some(&vals))?,
        verify_with(&LatticeState::AntiFock, psi, region, window, tol, Some(&vals))?,
    ])
}

/// Exact `[fock(delta(A)), anti_fock(delta(A))]` for every monomial `A`.
fn product_state_values(psi: &ChargeAssignment, basis: &[Monomial]) -> Vec<[Exact; 2]> {
    let mut sups: Vec<Region> = basis.iter().map(|m| m.sites().copied().collect()).collect();
    sups.sort();
    sups.dedup();
    let charges: HashMap<Region, CarPolynomial> =
        sups.into_par_iter().map(|sup| (sup.clone(), psi.local_charge(&sup))).collect();
    basis
        .par_iter()
        .map(|m| {
            let a = CarPolynomial::term(m.clone(), crate::scalar::exact(1, 0));
            let sup: Region = m.sites().copied().collect();
            if sup.is_empty() {
                return [Exact::zero(), Exact::zero()];
            }
            let image = charges[&sup].graded_commutator(&a);
            [image.scalar_part(), filled_expectation(&image)]
        })
        .collect()
}

fn verify_with(
    state: &LatticeState,
    psi: &ChargeAssignment,
    region: &Region,
    window: ChargeWindow,
    tol: f64,
    symbolic: Option<&[[Exact; 2]]>,
) -> Result<StateSusyReport> {
    let rep_region = match window {
        ChargeWindow::Local => region.enlarge(psi.range()),
        ChargeWindow::Finite(_) => region.clone(),
    };
    if let Some(own) = state.own_region() {
        if !own.is_subset(&rep_region) {
            return Err(SusyError::SupportOutsideRegion {
                support: own.to_string(),
                region: rep_region.to_string(),
            });
        }
    }
    let rep = FockRepresentation::new(rep_region)?;
    let comps = state.components_on(&rep)?;
    let basis = monomial_basis(region);

    let psi_star = psi.conjugate();
    let (psi_s1, psi_s2) = psi.symmetrize();
    let assignments = [psi, &psi_star, &psi_s1, &psi_s2];

    // Charge actions on the state, cached by the support they depend on.
    let charge_for = |a: &ChargeAssignment, support: &Region| -> Result<CarPolynomial> {
        match window {
            ChargeWindow::Local => Ok(a.local_charge(support)),
            ChargeWindow::Finite(mode) => finite_charge(a, region, mode),
        }
    };
    type Cached = Vec<(SparseVec, SparseVec)>;
    let mut supports: Vec<Region> = basis.iter().map(|m| m.sites().copied().collect()).collect();
    supports.sort();
    supports.dedup();
    if matches!(window, ChargeWindow::Finite(_)) {
        supports = vec![Region::empty()];
    }
    let cache: HashMap<Region, Vec<Cached>> = supports
        .par_iter()
        .map(|sup| -> Result<(Region, Vec<Cached>)> {
            let per = assignments
                .iter()
                .map(|a| {
                    let c = charge_for(a, sup)?;
                    let cd = c.adjoint();
                    comps
                        .iter()
                        .map(|(_, v)| Ok((apply_poly(&rep, &c, v)?, apply_poly(&rep, &cd, v)?)))
                        .collect::<Result<Cached>>()
                })
                .collect::<Result<Vec<Cached>>>()?;
            Ok((sup.clone(), per))
        })
        .collect::<Result<_>>()?;

    // phi([C, A]_gamma) = sum_k w_k ( <C^dag v, A v> - (-1)^|A| <A^dag v, C v> ).
    let violations: Vec<[f64; 4]> = basis
        .par_iter()
        .map(|m| -> Result<[f64; 4]> {
            let key: Region = match window {
                ChargeWindow::Local => m.sites().copied().collect(),
                ChargeWindow::Finite(_) => Region::empty(),
            };
            let a = CarPolynomial::<Complex64>::term(m.clone(), Complex64::new(1.0, 0.0));
            let ad = a.adjoint();
            let sign = if m.parity() == Parity::Odd { -1.0 } else { 1.0 };
            let mut out = [0.0; 4];
            let per = &cache[&key];
            let images: Vec<(SparseVec, SparseVec)> =
                comps.iter().map(|(_, v)| Ok((apply_poly(&rep, &a, v)?, apply_poly(&rep, &ad, v)?))).collect::<Result<_>>()?;
            for (slot, cached) in per.iter().enumerate() {
                let mut val = Complex64::zero();
                for (((w, _), (cv, cdv)), (av, adv)) in comps.iter().zip(cached).zip(&images) {
                    val += (inner(cdv, av) - inner(adv, cv) * sign) * w;
                }
                out[slot] = val.norm();
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let worst = |k: usize| violations.iter().map(|v| v[k]).fold(0.0, f64::max);

    let (symbolic_violation, symbolic_exact_zero) = match (state, symbolic) {
        (LatticeState::Fock | LatticeState::AntiFock, Some(vals)) => {
            let k = usize::from(matches!(state, LatticeState::AntiFock));
            let worst = vals.iter().map(|v| v[k].magnitude()).fold(0.0, f64::max);
            (Some(worst), Some(vals.iter().all(|v| v[k].is_zero())))
        }
        _ => (None, None),
    };

    let q_poly = match window {
        ChargeWindow::Local => psi.local_charge(region),
        ChargeWindow::Finite(mode) => finite_charge(psi, region, mode)?,
    };
    let qd_poly = q_poly.adjoint();
    let mut q_norm = 0.0_f64;
    let mut q_dag_norm = 0.0_f64;
    for (_, v) in &comps {
        q_norm = q_norm.max(vnorm(&apply_poly(&rep, &q_poly, v)?));
        q_dag_norm = q_dag_norm.max(vnorm(&apply_poly(&rep, &qd_poly, v)?));
    }

    let violation = worst(0);
    let supersymmetric = violation <= tol && symbolic_exact_zero.unwrap_or(true);
    Ok(StateSusyReport {
        basis_size: basis.len(),
        symbolic_violation,
        symbolic_exact_zero,
        violation,
        violation_star: worst(1),
        violation_s1: worst(2),
        violation_s2: worst(3),
        q_norm,
        q_dag_norm,
        tolerance: tol,
        supersymmetric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fock_and_antifock_are_supersymmetric_for_nicolai() {
        let psi = ChargeAssignment::nicolai();
        let region = Region::interval(-1, 1);
        for state in [LatticeState::Fock, LatticeState::AntiFock] {
            let r = verify_state_susy(&state, &psi, &region, ChargeWindow::Local, 1e-12).unwrap();
            assert_eq!(r.symbolic_exact_zero, Some(true));
            assert!(r.supersymmetric, "{r:?}");
            assert!(r.violation_s1 < 1e-12 && r.violation_s2 < 1e-12);
        }
    }

    #[test]
    fn filled_expectation_matches_particle_hole() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let sites = Region::interval(0, 3).to_vec();
        for _ in 0..50 {
            let p = crate::car::random_polynomial(&mut rng, &sites, 6, 6);
            assert_eq!(filled_expectation(&p), particle_hole(&p).scalar_part());
        }
    }

    #[test]
    fn single_particle_state_in_kernel() {
        let psi = ChargeAssignment::nicolai();
        let region = Region::interval(-1, 1);
        let mut v = vec![Complex64::zero(); 8];
        v[1] = Complex64::new(1.0, 0.0);
        let st = LatticeState::vector(region.clone(), v).unwrap();
        let r = verify_state_susy(&st, &psi, &region, ChargeWindow::Finite(BoundaryMode::Open), 1e-12).unwrap();
        assert!(r.supersymmetric);
        assert_eq!((r.q_norm, r.q_dag_norm), (0.0, 0.0));
    }

    #[test]
    fn excited_state_is_not_supersymmetric() {
        let psi = ChargeAssignment::nicolai();
        let region = Region::interval(-1, 1);
        // |101>: sites -1 and 1 occupied; Q maps it to |010>.
        let mut v = vec![Complex64::zero(); 8];
        v[0b101] = Complex64::new(1.0, 0.0);
        let st = LatticeState::vector(region.clone(), v).unwrap();
        let r = verify_state_susy(&st, &psi, &region, ChargeWindow::Finite(BoundaryMode::Open), 1e-12).unwrap();
        assert!(!r.supersymmetric);
        assert!(r.violation_s1 > 0.1 && r.violation_s2 > 0.1);
    }
}
