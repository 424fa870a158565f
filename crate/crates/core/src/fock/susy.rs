use serde::{Deserialize, Serialize};

use super::linalg::{self, SpMat};
use super::FockRepresentation;
use crate::car::{CarPolynomial, Generator, Region, Site};
use crate::error::{Result, SusyError};
use crate::supercharge::ChargeAssignment;

/// Which patterns enter the finite-volume charge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    /// Only patterns contained in the region.
    #[default]
    Open,
    /// Patterns crossing the boundary are wrapped around the box
    /// (periodic ring); each translate is counted once.
    Crossing,
}

/// Finite-volume charge `C(region)` as a polynomial on `region`.
pub fn finite_charge(psi: &ChargeAssignment, region: &Region, mode: BoundaryMode) -> Result<CarPolynomial> {
    match mode {
        BoundaryMode::Open => Ok(psi.inner_charge(region)),
        BoundaryMode::Crossing => {
            let bounds = region
                .bounds()
                .ok_or_else(|| SusyError::InvalidArgument("empty region".into()))?;
            let boxed = Region::boxed(&bounds);
            if &boxed != region {
                return Err(SusyError::InvalidArgument(format!(
                    "crossing boundary needs a box region, got {region}"
                )));
            }
            let wrap = |s: Site| -> Site {
                let c: Vec<i32> = s
                    .coords()
                    .iter()
                    .zip(&bounds)
                    .map(|(x, (lo, hi))| lo + (x - lo).rem_euclid(hi - lo + 1))
                    .collect();
                Site::new(&c)
            };
            let mut total = CarPolynomial::zero();
            for (x, q) in psi.charges_meeting(region) {
                let anchor = x.iter().next().expect("pattern regions are non-empty");
                if !region.contains(anchor) {
                    continue;
                }
                let wrapped = q.substitute(|g| match g {
                    Generator::Create(s) => Generator::Create(wrap(s)),
                    Generator::Annihilate(s) => Generator::Annihilate(wrap(s)),
                });
                total = &total + &wrapped;
            }
            Ok(total)
        }
    }
}

/// `Q`, `Q^dagger`, `Q_s1 = Q + Q^dagger`, `Q_s2 = i(Q - Q^dagger)` and `H = Q_s1^2`.
#[derive(Debug, Clone)]
pub struct SusyOperators {
    pub q: SpMat,
    pub q_dag: SpMat,
    pub qs1: SpMat,
    pub qs2: SpMat,
    pub h: SpMat,
    pub gamma: SpMat,
    pub number: SpMat,
}

/// Residual norms of the realized algebra (Frobenius norms, an upper bound
/// on operator norms), plus the spectral norm of `H`.
#[derive(Debug, Clone, Serialize)]
pub struct AlgebraResiduals {
    pub h_norm: f64,
    pub q_squared: f64,
    pub h_vs_qqdag: f64,
    pub h_vs_qs1_squared: f64,
    pub h_vs_qs2_squared: f64,
    pub h_commutes_q: f64,
    pub h_commutes_q_dag: f64,
    pub h_commutes_qs1: f64,
    pub h_commutes_qs2: f64,
    pub gamma_odd_qs1: f64,
    pub gamma_odd_qs2: f64,
    pub qs1_qs2_anticommute: f64,
    pub qs_hermitian: f64,
}

impl AlgebraResiduals {
    pub fn max(&self) -> f64 {
        [
            self.q_squared,
            self.h_vs_qqdag,
            self.h_vs_qs1_squared,
            self.h_vs_qs2_squared,
            self.h_commutes_q,
            self.h_commutes_q_dag,
            self.h_commutes_qs1,
            self.h_commutes_qs2,
            self.gamma_odd_qs1,
            self.gamma_odd_qs2,
            self.qs1_qs2_anticommute,
            self.qs_hermitian,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

impl SusyOperators {
    pub fn build(rep: &FockRepresentation, psi: &ChargeAssignment, mode: BoundaryMode) -> Result<Self> {
        let charge = finite_charge(psi, rep.region(), mode)?;
        Self::from_charge(rep, &charge)
    }

    pub fn from_charge(rep: &FockRepresentation, charge: &CarPolynomial) -> Result<Self> {
        let q = rep.represent(charge)?;
        let q_dag = linalg::adjoint(&q);
        let qs1 = &q + &q_dag;
        let qs2 = linalg::scale(&(&q - &q_dag), num_complex::Complex64::new(0.0, 1.0));
        let h = &qs1 * &qs1;
        Ok(SusyOperators { q, q_dag, qs1, qs2, h, gamma: rep.gamma(), number: rep.number_operator() })
    }

    pub fn dim(&self) -> usize {
        self.h.rows()
    }

    pub fn h_norm(&self) -> f64 {
        linalg::spectral_norm(&self.h)
    }

    pub fn conserves_number(&self) -> bool {
        linalg::frobenius(&linalg::commutator(&self.h, &self.number)) <= 1e-12 * (1.0 + linalg::frobenius(&self.h))
    }

    pub fn residuals(&self) -> AlgebraResiduals {
        let f = linalg::frobenius;
        let c = linalg::commutator;
        let (q, qd, s1, s2, h, g) = (&self.q, &self.q_dag, &self.qs1, &self.qs2, &self.h, &self.gamma);
        let qqd = &(q * qd) + &(qd * q);
        AlgebraResiduals {
            h_norm: self.h_norm(),
            q_squared: f(&(q * q)),
            h_vs_qqdag: f(&(h - &qqd)),
            h_vs_qs1_squared: f(&(h - &(s1 * s1))),
            h_vs_qs2_squared: f(&(h - &(s2 * s2))),
            h_commutes_q: f(&c(h, q)),
            h_commutes_q_dag: f(&c(h, qd)),
            h_commutes_qs1: f(&c(h, s1)),
            h_commutes_qs2: f(&c(h, s2)),
            gamma_odd_qs1: f(&(&(&(g * s1) * g) + s1)),
            gamma_odd_qs2: f(&(&(&(g * s2) * g) + s2)),
            qs1_qs2_anticommute: f(&linalg::anticommutator(s1, s2)),
            qs_hermitian: f(&(s1 - &linalg::adjoint(s1))).max(f(&(s2 - &linalg::adjoint(s2)))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_assignment_gives_zero_operators() {
        let rep = FockRepresentation::new(Region::interval(0, 2)).unwrap();
        let ops = SusyOperators::build(&rep, &ChargeAssignment::zero(1), BoundaryMode::Open).unwrap();
        assert_eq!(ops.q.nnz(), 0);
        assert_eq!(ops.h_norm(), 0.0);
    }

    #[test]
    fn nicolai_three_sites() {
        let rep = FockRepresentation::new(Region::interval(-1, 1)).unwrap();
        let ops = SusyOperators::build(&rep, &ChargeAssignment::nicolai(), BoundaryMode::Open).unwrap();
        let r = ops.residuals();
        assert!(r.max() < 1e-14, "{r:?}");
        assert!((r.h_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crossing_ring_keeps_nilpotency_on_even_rings() {
        let rep = FockRepresentation::new(Region::interval(0, 5)).unwrap();
        let psi = ChargeAssignment::nicolai();
        let open = finite_charge(&psi, rep.region(), BoundaryMode::Open).unwrap();
        let ring = finite_charge(&psi, rep.region(), BoundaryMode::Crossing).unwrap();
        assert_eq!(open.len(), 2);
        assert_eq!(ring.len(), 3);
        let ops = SusyOperators::from_charge(&rep, &ring).unwrap();
        assert!(ops.residuals().q_squared < 1e-14);
    }
}
