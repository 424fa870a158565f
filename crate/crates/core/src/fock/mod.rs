//! Jordan–Wigner Fock representation of a finite region and the finite-volume
//! supersymmetry checks built on it.
//!
//! Basis state `s` has bit `k` set iff the `k`-th site of the region (in
//! lexicographic order) is occupied; `a_k` carries the string sign
//! `(-1)^{n_0 + ... + n_{k-1}}`. The empty state (index 0) is the Fock vacuum.

pub mod checks;
pub mod export;
pub mod linalg;
pub mod spectrum;
pub mod states;
pub mod susy;

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;
use sprs::TriMat;

use crate::car::{CarPolynomial, Monomial, Parity, Region, Site};
use crate::error::{Result, SusyError};
use crate::scalar::Coefficient;

pub use linalg::{DMat, SpMat};
pub use spectrum::{spectral_report, SpectralReport};
pub use states::{verify_product_states, verify_state_susy, LatticeState, StateSusyReport};
pub use susy::{BoundaryMode, SusyOperators};

/// Largest region represented exactly (dimension `2^MAX_SITES`).
pub const MAX_SITES: usize = 20;

#[derive(Debug, Clone)]
pub struct FockRepresentation {
    region: Region,
    index: HashMap<Site, usize>,
    dim: usize,
}

impl FockRepresentation {
    pub fn new(region: Region) -> Result<Self> {
        if region.len() > MAX_SITES {
            return Err(SusyError::RegionTooLarge { sites: region.len(), limit: MAX_SITES });
        }
        let index = region.iter().enumerate().map(|(k, s)| (*s, k)).collect();
        let dim = 1usize << region.len();
        Ok(FockRepresentation { region, index, dim })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_sites(&self) -> usize {
        self.region.len()
    }

    /// Index of the all-empty basis state.
    pub fn vacuum_index(&self) -> usize {
        0
    }

    /// Index of the all-filled basis state.
    pub fn filled_index(&self) -> usize {
        self.dim - 1
    }

    pub fn basis_vector(&self, index: usize) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); self.dim];
        v[index] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn basis_parity(&self, index: usize) -> Parity {
        Parity::of_degree(index.count_ones() as usize)
    }

    pub fn basis_occupation(&self, index: usize) -> u32 {
        index.count_ones()
    }

    /// Basis index of an occupation pattern listed in region order.
    pub fn index_of_occupation(&self, occupied: &[Site]) -> Result<usize> {
        let mut s = 0usize;
        for site in occupied {
            let k = self.site_index(site)?;
            s |= 1 << k;
        }
        Ok(s)
    }

    fn site_index(&self, s: &Site) -> Result<usize> {
        self.index.get(s).copied().ok_or_else(|| SusyError::SupportOutsideRegion {
            support: s.to_string(),
            region: self.region.to_string(),
        })
    }

    /// Image of a basis state under a normal-ordered monomial, with sign.
    pub(crate) fn act(&self, slots: &MonomialSlots, state: usize) -> Option<(usize, bool)> {
        let mut s = state;
        let mut neg = false;
        for &k in slots.ann.iter().rev() {
            if s & (1 << k) == 0 {
                return None;
            }
            neg ^= (s & ((1 << k) - 1)).count_ones() % 2 == 1;
            s ^= 1 << k;
        }
        for &k in slots.cre.iter().rev() {
            if s & (1 << k) != 0 {
                return None;
            }
            neg ^= (s & ((1 << k) - 1)).count_ones() % 2 == 1;
            s |= 1 << k;
        }
        Some((s, neg))
    }

    pub(crate) fn slots(&self, m: &Monomial) -> Result<MonomialSlots> {
        Ok(MonomialSlots {
            cre: m.creations().iter().map(|s| self.site_index(s)).collect::<Result<_>>()?,
            ann: m.annihilations().iter().map(|s| self.site_index(s)).collect::<Result<_>>()?,
        })
    }

    /// Matrix of a polynomial; a *-homomorphism from `F(region)`.
    pub fn represent<C: Coefficient>(&self, p: &CarPolynomial<C>) -> Result<SpMat> {
        let support = p.support();
        if !support.is_subset(&self.region) {
            return Err(SusyError::SupportOutsideRegion {
                support: support.to_string(),
                region: self.region.to_string(),
            });
        }
        let terms: Vec<(MonomialSlots, Complex64)> = p
            .iter()
            .map(|(m, c)| Ok((self.slots(m)?, c.to_c64())))
            .collect::<Result<_>>()?;
        let columns = |range: std::ops::Range<usize>| {
            let mut trip = Vec::new();
            for col in range {
                for (slots, c) in &terms {
                    if let Some((row, neg)) = self.act(slots, col) {
                        trip.push((row, col, if neg { -c } else { *c }));
                    }
                }
            }
            trip
        };
        let chunk = 1 << 10;
        let triplets: Vec<(usize, usize, Complex64)> = if self.dim * terms.len() > 1 << 16 {
            (0..self.dim.div_ceil(chunk))
                .into_par_iter()
                .flat_map_iter(|b| columns(b * chunk..((b + 1) * chunk).min(self.dim)))
                .collect()
        } else {
            columns(0..self.dim)
        };
        let mut t = TriMat::with_capacity((self.dim, self.dim), triplets.len());
        for (r, c, v) in triplets {
            t.add_triplet(r, c, v);
        }
        Ok(t.to_csr())
    }

    pub fn annihilator(&self, s: Site) -> Result<SpMat> {
        self.represent(&CarPolynomial::<Complex64>::annihilate(s))
    }

    /// Grading unitary `Gamma = prod_i (1 - 2 a*_i a_i)`, with `Gamma Omega = Omega`.
    pub fn gamma(&self) -> SpMat {
        let d: Vec<Complex64> = (0..self.dim)
            .map(|s| match self.basis_parity(s) {
                Parity::Even => Complex64::new(1.0, 0.0),
                Parity::Odd => Complex64::new(-1.0, 0.0),
            })
            .collect();
        linalg::diagonal(&d)
    }

    /// Total number operator.
    pub fn number_operator(&self) -> SpMat {
        let d: Vec<Complex64> =
            (0..self.dim).map(|s| Complex64::new(s.count_ones() as f64, 0.0)).collect();
        linalg::diagonal(&d)
    }

    /// Spectral projections `P_+ = (I + Gamma)/2`, `P_- = (I - Gamma)/2`.
    pub fn parity_projections(&self) -> (SpMat, SpMat) {
        let g = self.gamma();
        let id = linalg::identity(self.dim);
        let half = Complex64::new(0.5, 0.0);
        (linalg::scale(&(&id + &g), half), linalg::scale(&(&id - &g), half))
    }
}

pub(crate) struct MonomialSlots {
    cre: Vec<usize>,
    ann: Vec<usize>,
}

/// C*-norm of a local element: spectral norm of its matrix on its own support.
pub fn operator_norm<C: Coefficient>(p: &CarPolynomial<C>) -> f64 {
    let support = p.support();
    if support.is_empty() {
        return p.scalar_part().to_c64().norm();
    }
    let rep = FockRepresentation::new(support).expect("local element fits the representation limit");
    let m = rep.represent(p).expect("support lies in its own representation");
    linalg::spectral_norm(&m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;

    fn rep3() -> FockRepresentation {
        FockRepresentation::new(Region::interval(-1, 1)).unwrap()
    }

    #[test]
    fn identity_is_represented_by_identity() {
        let r = rep3();
        let m = r.represent(&CarPolynomial::<Exact>::one()).unwrap();
        assert_eq!(linalg::frobenius(&linalg::sub(&m, &linalg::identity(8))), 0.0);
    }

    #[test]
    fn matrices_satisfy_car() {
        let r = rep3();
        for i in r.region().to_vec() {
            for j in r.region().to_vec() {
                let ai = r.annihilator(i).unwrap();
                let aj = r.annihilator(j).unwrap();
                let adi = linalg::adjoint(&ai);
                let anti = linalg::anticommutator(&adi, &aj);
                let expected = if i == j { linalg::identity(8) } else { linalg::zeros(8) };
                assert!(linalg::frobenius(&linalg::sub(&anti, &expected)) < 1e-15);
                assert!(linalg::frobenius(&linalg::anticommutator(&ai, &aj)) < 1e-15);
            }
        }
    }

    #[test]
    fn norms_of_basic_elements() {
        let a0 = CarPolynomial::<Exact>::annihilate(Site::d1(0));
        assert!((operator_norm(&a0) - 1.0).abs() < 1e-12);
        let u = &CarPolynomial::<Exact>::one()
            - &CarPolynomial::number(Site::d1(0)).scale(&crate::scalar::exact(2, 0));
        assert!((operator_norm(&u) - 1.0).abs() < 1e-12);
        let q = &(&CarPolynomial::<Exact>::annihilate(Site::d1(1))
            * &CarPolynomial::create(Site::d1(0)))
            * &CarPolynomial::annihilate(Site::d1(-1));
        assert!((operator_norm(&q) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn support_outside_region_is_rejected() {
        let r = rep3();
        let p = CarPolynomial::<Exact>::annihilate(Site::d1(4));
        assert!(matches!(r.represent(&p), Err(SusyError::SupportOutsideRegion { .. })));
    }

    #[test]
    fn grading_fixes_vacuum_and_implements_gamma() {
        let r = rep3();
        let g = r.gamma();
        let v = linalg::apply(&g, &r.basis_vector(0));
        assert_eq!(v[0], Complex64::new(1.0, 0.0));
        let a0 = r.annihilator(Site::d1(0)).unwrap();
        let conj = linalg::mul(&linalg::mul(&g, &a0), &g);
        assert!(linalg::frobenius(&linalg::add(&conj, &a0)) < 1e-15);
    }
}
