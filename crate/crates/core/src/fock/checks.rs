//! Matrix-level checks of the GNS statements: the realized superderivation,
//! grading, time invariance of supersymmetric vectors, the face property and
//! affiliation in a reducible representation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sprs::TriMat;

use super::linalg::{self, DMat, SpMat};
use super::spectrum::Spectrum;
use super::states::{verify_state_susy, ChargeWindow, LatticeState};
use super::susy::{BoundaryMode, SusyOperators};
use super::FockRepresentation;
use crate::car::{random_polynomial, CarPolynomial, Parity, Region};
use crate::error::Result;
use crate::dynamics::{lie_series_evolve, local_hamiltonian, EvolveOptions};
use crate::supercharge::{apply_delta, ChargeAssignment, NilpotentSuperderivation};

#[derive(Debug, Clone, Serialize)]
pub struct StructuralReport {
    pub samples: usize,
    /// `max ||pi(delta(A)) - (Q pi(A) - pi(gamma(A)) Q)||`.
    pub delta_residual: f64,
    /// Same with `delta*` and `Q^dagger`.
    pub delta_star_residual: f64,
    /// `||Gamma Q_s Gamma + Q_s||` and the diagonal blocks `P_+- Q_s P_+-`.
    pub gamma_odd_residual: f64,
    pub diagonal_block_residual: f64,
    /// `P_+- ` idempotent, hermitian, complementary and orthogonal.
    pub projection_residual: f64,
    /// `max |<Omega, alpha_t(pi(A)) Omega> - <Omega, pi(A) Omega>|` over sampled `t`.
    pub time_invariance_residual: f64,
}

impl StructuralReport {
    pub fn max(&self) -> f64 {
        [
            self.delta_residual,
            self.delta_star_residual,
            self.gamma_odd_residual,
            self.diagonal_block_residual,
            self.projection_residual,
            self.time_invariance_residual,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Random elements of `F(region)` are compared on the Fock space of the region
/// enlarged by the range, with `Q = pi(C_hat(region))`.
pub fn structural_identities(
    psi: &ChargeAssignment,
    region: &Region,
    samples: usize,
    seed: u64,
) -> Result<StructuralReport> {
    let rep = FockRepresentation::new(region.enlarge(psi.range()))?;
    let charge = psi.local_charge(region);
    let ops = SusyOperators::from_charge(&rep, &charge)?;
    let psi_star = psi.conjugate();
    let f = linalg::frobenius;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites = region.to_vec();

    let mut delta_residual = 0.0_f64;
    let mut delta_star_residual = 0.0_f64;
    let vacuum = rep.basis_vector(rep.vacuum_index());
    let mut samples_a = Vec::with_capacity(samples + 1);
    samples_a.push(CarPolynomial::one());
    for _ in 0..samples {
        samples_a.push(random_polynomial(&mut rng, &sites, 4, 4));
    }
    for a in &samples_a {
        let pa = rep.represent(a)?;
        let pga = rep.represent(&a.gamma())?;
        let lhs = rep.represent(&apply_delta(psi, a))?;
        let rhs = &(&ops.q * &pa) - &(&pga * &ops.q);
        delta_residual = delta_residual.max(f(&(&lhs - &rhs)));
        let lhs = rep.represent(&apply_delta(&psi_star, a))?;
        let rhs = &(&ops.q_dag * &pa) - &(&pga * &ops.q_dag);
        delta_star_residual = delta_star_residual.max(f(&(&lhs - &rhs)));
    }

    let g = &ops.gamma;
    let (pp, pm) = rep.parity_projections();
    let mut gamma_odd_residual = 0.0_f64;
    let mut diagonal_block_residual = 0.0_f64;
    for qs in [&ops.qs1, &ops.qs2] {
        gamma_odd_residual = gamma_odd_residual.max(f(&(&(&(g * qs) * g) + qs)));
        diagonal_block_residual = diagonal_block_residual
            .max(f(&(&(&pp * qs) * &pp)))
            .max(f(&(&(&pm * qs) * &pm)));
    }
    let id = linalg::identity(rep.dim());
    let projection_residual = [
        f(&(&(&pp * &pp) - &pp)),
        f(&(&(&pm * &pm) - &pm)),
        f(&(&linalg::adjoint(&pp) - &pp)),
        f(&(&(&pp + &pm) - &id)),
        f(&(&pp * &pm)),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    // The vacuum is annihilated by Q and Q^dagger, so H Omega = 0.
    let spec = Spectrum::compute(&ops)?;
    let mut time_invariance_residual = 0.0_f64;
    for t in [0.3, 1.0, 2.7] {
        let omega_t = evolve_vector(&spec, &vacuum, -t);
        for a in samples_a.iter().take(10) {
            let pa = rep.represent(a)?;
            let before = linalg::inner(&vacuum, &linalg::apply(&pa, &vacuum));
            let after = linalg::inner(&omega_t, &linalg::apply(&pa, &omega_t));
            time_invariance_residual = time_invariance_residual.max((after - before).norm());
        }
    }

    Ok(StructuralReport {
        samples,
        delta_residual,
        delta_star_residual,
        gamma_odd_residual,
        diagonal_block_residual,
        projection_residual,
        time_invariance_residual,
    })
}

/// `exp(itH) v` from the sector-blocked eigen-decomposition.
pub fn evolve_vector(spec: &Spectrum, v: &[Complex64], t: f64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    for sec in &spec.sectors {
        for (k, lambda) in sec.values.iter().enumerate() {
            let col = sec.vectors.column(k);
            let c: Complex64 = sec.indices.iter().enumerate().map(|(r, &i)| col[r].conj() * v[i]).sum();
            let phase = Complex64::from_polar(1.0, t * lambda) * c;
            for (r, &i) in sec.indices.iter().enumerate() {
                out[i] += phase * col[r];
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct FaceReport {
    pub kernel_dim: usize,
    pub decompositions: usize,
    /// Largest `|tr(rho_i delta(A))|` over all components and basis monomials.
    pub max_component_violation: f64,
    pub all_components_supersymmetric: bool,
    pub contaminated_violation: f64,
    pub contaminated_flagged: bool,
    pub tolerance: f64,
}

fn random_unit(rng: &mut ChaCha8Rng, basis: &[Vec<Complex64>]) -> Vec<Complex64> {
    let dim = basis[0].len();
    let mut v = vec![Complex64::new(0.0, 0.0); dim];
    for b in basis {
        let c = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        v.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
    }
    let n = linalg::vnorm(&v);
    v.into_iter().map(|x| x / n).collect()
}

fn outer_mixture(components: &[(f64, Vec<Complex64>)], dim: usize) -> DMat {
    let mut rho = DMat::zeros(dim, dim);
    for (w, v) in components {
        for i in 0..dim {
            for j in 0..dim {
                rho[(i, j)] += v[i] * v[j].conj() * *w;
            }
        }
    }
    rho
}

/// `rho = lambda rho_1 + (1 - lambda) rho_2` with `rho_1 ~ sqrt(rho) E sqrt(rho)`,
/// `rho_2 ~ sqrt(rho) (1 - E) sqrt(rho)` for a random effect `0 <= E <= 1`.
/// Every decomposition of `rho` into two states is of this form.
fn split(rng: &mut ChaCha8Rng, rho: &DMat) -> [(f64, DMat); 2] {
    let n = rho.nrows();
    let (vals, vecs) = linalg::hermitian_eigen(rho);
    let cut = 1e-12 * vals.iter().fold(0.0_f64, |m, v| m.max(*v));
    let vals: Vec<f64> = vals.into_iter().map(|v| if v > cut { v } else { 0.0 }).collect();
    let sqrt_diag = DMat::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        vals.iter().map(|v| Complex64::new(v.max(0.0).sqrt(), 0.0)),
    ));
    let sqrt_rho = &vecs * sqrt_diag * vecs.adjoint();
    let x = DMat::from_fn(n, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let herm = (&x + x.adjoint()) * Complex64::new(0.5, 0.0);
    let (ev, eu) = linalg::hermitian_eigen(&herm);
    let (lo, hi) = (ev[0], ev[n - 1]);
    let scaled = DMat::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        ev.iter().map(|v| Complex64::new((v - lo) / (hi - lo).max(1e-300), 0.0)),
    ));
    let effect = &eu * scaled * eu.adjoint();
    let part1 = &sqrt_rho * effect * &sqrt_rho;
    let part2 = rho - &part1;
    let w1 = part1.trace().re;
    let w2 = part2.trace().re;
    [(w1, part1 / Complex64::new(w1, 0.0)), (w2, part2 / Complex64::new(w2, 0.0))]
}

/// Random decompositions of random supersymmetric density matrices (supported
/// in `ker H`) and a contaminated mixture with an excited state.
pub fn face_check(
    psi: &ChargeAssignment,
    region: &Region,
    decompositions: usize,
    tol: f64,
    seed: u64,
) -> Result<FaceReport> {
    let rep = FockRepresentation::new(region.clone())?;
    let ops = SusyOperators::build(&rep, psi, BoundaryMode::Open)?;
    let spec = Spectrum::compute(&ops)?;
    let mut kernel = spec.kernel(Parity::Even);
    kernel.extend(spec.kernel(Parity::Odd));
    let window = ChargeWindow::Finite(BoundaryMode::Open);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rep.dim();

    let mut worst = 0.0_f64;
    let mut all_ok = true;
    for _ in 0..decompositions {
        let k = rng.random_range(1..=kernel.len().max(1));
        let comps: Vec<(f64, Vec<Complex64>)> =
            (0..k).map(|_| (rng.random::<f64>() + 0.05, random_unit(&mut rng, &kernel))).collect();
        let total: f64 = comps.iter().map(|(w, _)| w).sum();
        let comps: Vec<_> = comps.into_iter().map(|(w, v)| (w / total, v)).collect();
        let rho = outer_mixture(&comps, dim);
        for (w, part) in split(&mut rng, &rho) {
            if w <= 1e-12 {
                continue;
            }
            let state = LatticeState::density(region.clone(), &part)?;
            let r = verify_state_susy(&state, psi, region, window, tol)?;
            worst = worst.max(r.violation);
            all_ok &= r.supersymmetric;
        }
    }

    // Mix a supersymmetric state with the lowest excited eigenvector.
    let excited = spec
        .eigenvalues()
        .into_iter()
        .find(|v| *v > 1e-8 * spec.h_norm)
        .map(|e| spec.eigenspace(e, 1e-8 * spec.h_norm, Parity::Even)
            .into_iter()
            .chain(spec.eigenspace(e, 1e-8 * spec.h_norm, Parity::Odd))
            .next()
            .expect("eigenvector exists"));
    let (contaminated_violation, contaminated_flagged) = match excited {
        Some(x) => {
            let susy = random_unit(&mut rng, &kernel);
            let state = LatticeState::mixture(region.clone(), vec![(0.7, susy), (0.3, x)])?;
            let r = verify_state_susy(&state, psi, region, window, tol)?;
            (r.violation, !r.supersymmetric)
        }
        None => (0.0, false),
    };

    Ok(FaceReport {
        kernel_dim: kernel.len(),
        decompositions,
        max_component_violation: worst,
        all_components_supersymmetric: all_ok,
        contaminated_violation,
        contaminated_flagged,
        tolerance: tol,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AffiliationReport {
    /// `||Q_s p' - p' Q_s||` over the block projections and random projections of the commutant.
    pub max_commutator: f64,
    /// Sanity check that each `p'` commutes with sampled `pi(A) (+) pi(A)`.
    pub commutant_residual: f64,
    pub projections_tested: usize,
}

fn direct_sum(a: &SpMat, b: &SpMat) -> SpMat {
    let (n, m) = (a.rows(), b.rows());
    let mut t = TriMat::new((n + m, n + m));
    for (v, (i, j)) in a.iter() {
        t.add_triplet(i, j, *v);
    }
    for (v, (i, j)) in b.iter() {
        t.add_triplet(n + i, n + j, *v);
    }
    t.to_csr()
}

/// `P (x) I` for a 2x2 matrix `P`.
fn lift(p: [[Complex64; 2]; 2], n: usize) -> SpMat {
    let mut t = TriMat::new((2 * n, 2 * n));
    for (bi, row) in p.iter().enumerate() {
        for (bj, v) in row.iter().enumerate() {
            if v.norm() > 0.0 {
                for k in 0..n {
                    t.add_triplet(bi * n + k, bj * n + k, *v);
                }
            }
        }
    }
    t.to_csr()
}

/// Fock (+) anti-Fock representation: both GNS supercharges are `pi(C(region))`
/// (the charge annihilates both cyclic vectors), and the commutant is
/// `M_2 (x) 1`.
pub fn affiliation_check(psi: &ChargeAssignment, region: &Region, seed: u64) -> Result<AffiliationReport> {
    let rep = FockRepresentation::new(region.clone())?;
    let ops = SusyOperators::build(&rep, psi, BoundaryMode::Open)?;
    let n = rep.dim();
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let mut projections = vec![[[one, zero], [zero, zero]], [[zero, zero], [zero, one]], [[one, zero], [zero, one]]];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..4 {
        let theta = rng.random::<f64>() * std::f64::consts::PI;
        let phi = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
        let u = [Complex64::new(theta.cos(), 0.0), Complex64::from_polar(theta.sin(), phi)];
        projections.push([[u[0] * u[0].conj(), u[0] * u[1].conj()], [u[1] * u[0].conj(), u[1] * u[1].conj()]]);
    }
    let mut max_commutator = 0.0_f64;
    let mut commutant_residual = 0.0_f64;
    let sites = region.to_vec();
    let samples: Vec<SpMat> = (0..5)
        .map(|_| rep.represent(&random_polynomial(&mut rng, &sites, 3, 3)))
        .collect::<Result<_>>()?;
    for p in &projections {
        let pl = lift(*p, n);
        for qs in [&ops.qs1, &ops.qs2] {
            let big = direct_sum(qs, qs);
            max_commutator = max_commutator.max(linalg::frobenius(&linalg::commutator(&big, &pl)));
        }
        for a in &samples {
            let big = direct_sum(a, a);
            commutant_residual = commutant_residual.max(linalg::frobenius(&linalg::commutator(&big, &pl)));
        }
    }
    Ok(AffiliationReport { max_commutator, commutant_residual, projections_tested: projections.len() })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConjugationOracle {
    pub sites: usize,
    #[serde(rename = "N")]
    pub order: usize,
    pub tail_bound: f64,
    /// `||pi(alpha_t^L(A)) - e^{itH} pi(A) e^{-itH}||`.
    pub residual: f64,
    /// `max_n ||pi(delta_0,L^n(A)) - ad_H^n(pi(A))||_F / ||ad_H^n(pi(A))||_F`.
    pub max_term_relative: f64,
    pub within_tail: bool,
}

/// Lie series against exact conjugation by `e^{itH_L}` on the support of `H_L`.
pub fn conjugation_oracle(
    d: &NilpotentSuperderivation,
    region: &Region,
    a: &CarPolynomial,
    t: f64,
    tol: f64,
) -> Result<ConjugationOracle> {
    let res = lie_series_evolve(d, region, a, t, tol, EvolveOptions::default())?;
    let (psi_s, _) = d.symmetrized();
    let h = local_hamiltonian(psi_s, region);
    let rep = FockRepresentation::new(h.support().union(&a.support()))?;
    let hm = linalg::to_dense(&rep.represent(&h)?);
    let am = linalg::to_dense(&rep.represent(a)?);
    let (vals, v) = linalg::hermitian_eigen(&hm);
    let phases = DMat::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|e| Complex64::from_polar(1.0, t * e)),
    ));
    let u = &v * phases * v.adjoint();
    let oracle = &u * &am * u.adjoint();
    let series = linalg::to_dense(&rep.represent(&res.polynomial)?);
    let residual = linalg::dense_spectral_norm(&(series - oracle));
    let mut max_term_relative = 0.0_f64;
    if let Some(terms) = &res.exact_terms {
        // ad_H^n(pi(A)) is kept at unit Frobenius norm; `scale` carries the factor.
        let fro = |m: &DMat| m.iter().map(|x| x.norm_sqr()).fold(0.0, |s, x| s + x).sqrt();
        let mut ad = am.clone();
        let mut scale = 1.0_f64;
        for (n, f) in terms.iter().enumerate() {
            if n > 0 {
                ad = &hm * &ad - &ad * &hm;
            }
            let norm = fro(&ad);
            let fm = linalg::to_dense(&rep.represent(f)?);
            if norm == 0.0 {
                if fro(&fm) > 0.0 {
                    max_term_relative = f64::INFINITY;
                }
                break;
            }
            ad /= Complex64::new(norm, 0.0);
            scale *= norm;
            max_term_relative = max_term_relative.max(fro(&(fm / Complex64::new(scale, 0.0) - &ad)));
        }
    }
    Ok(ConjugationOracle {
        sites: rep.n_sites(),
        order: res.order,
        tail_bound: res.tail_bound,
        residual,
        max_term_relative,
        within_tail: residual <= res.tail_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::car::Site;
    use crate::supercharge::Superderivation;

    #[test]
    fn lie_series_matches_conjugation() {
        // Range 0 gives t0 = 1, so the series is tested at a macroscopic time.
        let d = Superderivation::new(ChargeAssignment::majorana()).into_nilpotent().unwrap();
        let a = &CarPolynomial::annihilate(Site::d1(0)) + &CarPolynomial::number(Site::d1(1));
        let r = conjugation_oracle(&d, &Region::interval(0, 2), &a, 0.4, 1e-10).unwrap();
        assert!(r.within_tail && r.max_term_relative < 1e-12, "{r:?}");
        let d = Superderivation::new(ChargeAssignment::nicolai()).into_nilpotent().unwrap();
        let t0 = d.norm_constants().t0;
        let r = conjugation_oracle(&d, &Region::interval(-1, 1), &CarPolynomial::annihilate(Site::d1(0)), t0 / 2.0, 1e-8)
            .unwrap();
        assert_eq!(r.sites, 7);
        assert!(r.within_tail && r.max_term_relative < 1e-9, "{r:?}");
    }

    #[test]
    fn structural_identities_nicolai() {
        let r = structural_identities(&ChargeAssignment::nicolai(), &Region::interval(-1, 1), 10, 7).unwrap();
        assert!(r.max() < 1e-12, "{r:?}");
    }

    #[test]
    fn face_nicolai_three_sites() {
        let r = face_check(&ChargeAssignment::nicolai(), &Region::interval(-1, 1), 10, 1e-10, 3).unwrap();
        assert_eq!(r.kernel_dim, 6);
        assert!(r.all_components_supersymmetric, "{r:?}");
        assert!(r.contaminated_flagged);
    }

    #[test]
    fn affiliation_nicolai() {
        let r = affiliation_check(&ChargeAssignment::nicolai(), &Region::interval(-1, 1), 5).unwrap();
        assert!(r.max_commutator < 1e-14 && r.commutant_residual < 1e-14);
    }
}
