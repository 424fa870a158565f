//! Fermion (x) boson Fock space with finitely many momentum modes.
//!
//! Modes sit at `p_k = k dp`, `k = 1..=N`. Fermion modes `b_k` are ordered
//! Jordan-Wigner style; boson modes `alpha_k` keep at most `M` quanta. Fields:
//!
//! * `c(f) = sum_k sqrt(dp) (f_hat(p_k) b_k + conj(f_hat(p_k)) b*_k)`
//! * `j(f) = sum_k sqrt(dp p_k) (f_hat(p_k) alpha_k + conj(f_hat(p_k)) alpha*_k)`
//! * `Q_s = sum_k sqrt(p_k) (b*_k alpha_k + alpha*_k b_k)`
//!
//! so that vacuum two-point functions are the mode sums of `fer` and `bos`,
//! `{Q_s, c(f)} = j(f)` exactly and `[Q_s, j(f)] = i c(f')` below the cutoff.

use num_complex::Complex64;
use serde::Serialize;

use super::testfn::TestFunction;
use crate::error::{Result, SusyError};
use crate::fock::linalg::DMat;

/// Largest total dimension accepted.
pub const MAX_DIM: usize = 1024;

#[derive(Debug, Clone)]
pub struct TruncatedQftSpace {
    modes: usize,
    cutoff: usize,
    dp: f64,
    dim: usize,
    b: Vec<DMat>,
    alpha: Vec<DMat>,
    gamma: DMat,
    qs: DMat,
    boson_occupation: Vec<usize>,
    on_shell: Vec<bool>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpaceShape {
    pub modes: usize,
    pub cutoff: usize,
    pub dp: f64,
    pub dim: usize,
}

impl TruncatedQftSpace {
    pub fn new(modes: usize, cutoff: usize, dp: f64) -> Result<Self> {
        if modes == 0 || cutoff == 0 || !(dp > 0.0) {
            return Err(SusyError::InvalidArgument("modes, cutoff and mode spacing must be positive".into()));
        }
        let fermion_dim = 1usize << modes;
        let boson_dim = (cutoff + 1)
            .checked_pow(modes as u32)
            .ok_or(SusyError::DimensionOverflow { dim: usize::MAX, limit: MAX_DIM })?;
        let dim = fermion_dim
            .checked_mul(boson_dim)
            .ok_or(SusyError::DimensionOverflow { dim: usize::MAX, limit: MAX_DIM })?;
        if dim > MAX_DIM {
            return Err(SusyError::DimensionOverflow { dim, limit: MAX_DIM });
        }
        // Basis index = fermion bits + fermion_dim * sum_k n_k (M+1)^k.
        let occupation = |idx: usize, k: usize| (idx / fermion_dim / (cutoff + 1).pow(k as u32)) % (cutoff + 1);
        let zero = Complex64::new(0.0, 0.0);
        let mut b = Vec::with_capacity(modes);
        let mut alpha = Vec::with_capacity(modes);
        for k in 0..modes {
            let mut bk = DMat::from_element(dim, dim, zero);
            let mut ak = DMat::from_element(dim, dim, zero);
            for col in 0..dim {
                let fbits = col % fermion_dim;
                if fbits >> k & 1 == 1 {
                    let sign = if (fbits & ((1 << k) - 1)).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                    bk[(col - (1 << k), col)] = Complex64::new(sign, 0.0);
                }
                let n = occupation(col, k);
                if n > 0 {
                    let row = col - fermion_dim * (cutoff + 1).pow(k as u32);
                    ak[(row, col)] = Complex64::new((n as f64).sqrt(), 0.0);
                }
            }
            b.push(bk);
            alpha.push(ak);
        }
        let gamma = DMat::from_fn(dim, dim, |i, j| {
            if i != j {
                zero
            } else if (i % fermion_dim).count_ones().is_multiple_of(2) {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(-1.0, 0.0)
            }
        });
        let mut qs = DMat::from_element(dim, dim, zero);
        for k in 0..modes {
            let p = (k + 1) as f64 * dp;
            let term = b[k].adjoint() * &alpha[k];
            qs += (&term + term.adjoint()) * Complex64::new(p.sqrt(), 0.0);
        }
        let boson_occupation = (0..dim).map(|i| (0..modes).map(|k| occupation(i, k)).sum()).collect();
        let on_shell = (0..dim).map(|i| (0..modes).any(|k| occupation(i, k) == cutoff)).collect();
        Ok(TruncatedQftSpace { modes, cutoff, dp, dim, b, alpha, gamma, qs, boson_occupation, on_shell })
    }

    pub fn shape(&self) -> SpaceShape {
        SpaceShape { modes: self.modes, cutoff: self.cutoff, dp: self.dp, dim: self.dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn momenta(&self) -> Vec<f64> {
        (1..=self.modes).map(|k| k as f64 * self.dp).collect()
    }

    pub fn vacuum(&self) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); self.dim];
        v[0] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn gamma(&self) -> &DMat {
        &self.gamma
    }

    pub fn supercharge(&self) -> &DMat {
        &self.qs
    }

    pub fn identity(&self) -> DMat {
        DMat::identity(self.dim, self.dim)
    }

    /// Basis indices whose total boson occupation is at most `n`.
    pub fn low_occupation(&self, n: usize) -> Vec<usize> {
        (0..self.dim).filter(|i| self.boson_occupation[*i] <= n).collect()
    }

    /// Weight of `v` on basis states with some boson mode at the cutoff.
    pub fn shell_weight(&self, v: &[Complex64]) -> f64 {
        v.iter().zip(&self.on_shell).filter(|(_, s)| **s).map(|(a, _)| a.norm_sqr()).fold(0.0, |s, x| s + x)
    }

    /// `f_hat(p_k)` for the modes.
    pub fn mode_amplitudes(&self, f: &TestFunction) -> Vec<Complex64> {
        self.momenta().into_iter().map(|p| f.fourier_at(p)).collect()
    }

    pub fn clifford(&self, f: &TestFunction) -> DMat {
        let amp = self.mode_amplitudes(f);
        let mut c = DMat::from_element(self.dim, self.dim, Complex64::new(0.0, 0.0));
        for (k, a) in amp.iter().enumerate() {
            let w = *a * self.dp.sqrt();
            c += &self.b[k] * w + self.b[k].adjoint() * w.conj();
        }
        c
    }

    pub fn boson_field(&self, f: &TestFunction) -> DMat {
        let amp = self.mode_amplitudes(f);
        let mut j = DMat::from_element(self.dim, self.dim, Complex64::new(0.0, 0.0));
        for (k, (a, p)) in amp.iter().zip(self.momenta()).enumerate() {
            let w = *a * (self.dp * p).sqrt();
            j += &self.alpha[k] * w + self.alpha[k].adjoint() * w.conj();
        }
        j
    }

    /// `R(lambda, f) = (i lambda - j(f))^{-1}`; invertible for real `lambda != 0`
    /// because `j(f)` is hermitian.
    pub fn resolvent(&self, lambda: f64, f: &TestFunction) -> Result<DMat> {
        if lambda == 0.0 {
            return Err(SusyError::InvalidArgument("resolvent needs lambda != 0".into()));
        }
        let m = self.identity() * Complex64::new(0.0, lambda) - self.boson_field(f);
        m.try_inverse()
            .ok_or_else(|| SusyError::InvalidArgument("singular resolvent".into()))
    }

    /// `zeta(f) = c(f) R(1, f)`.
    pub fn zeta(&self, f: &TestFunction) -> Result<DMat> {
        Ok(self.clifford(f) * self.resolvent(1.0, f)?)
    }

    /// `[Q_s, X]_gamma` for a homogeneous or mixed `X` (split by `Gamma`).
    pub fn delta_s(&self, x: &DMat) -> DMat {
        let g = &self.gamma;
        let gxg = g * x * g;
        let half = Complex64::new(0.5, 0.0);
        let even = (x + &gxg) * half;
        let odd = (x - &gxg) * half;
        let q = &self.qs;
        (q * &even - &even * q) + (q * &odd + &odd * q)
    }

    /// Mode sums `sum_k dp f_hat(p_k) conj(g_hat(p_k))` (times `p_k` for bosons):
    /// the pairings of the mode-projected functions.
    pub fn projected_fer(&self, f: &TestFunction, g: &TestFunction) -> Complex64 {
        let (a, b) = (self.mode_amplitudes(f), self.mode_amplitudes(g));
        a.iter().zip(&b).map(|(x, y)| x * y.conj() * self.dp).sum()
    }

    pub fn projected_bos(&self, f: &TestFunction, g: &TestFunction) -> Complex64 {
        let (a, b) = (self.mode_amplitudes(f), self.mode_amplitudes(g));
        a.iter().zip(&b).zip(self.momenta()).map(|((x, y), p)| x * y.conj() * self.dp * p).sum()
    }

    /// Symplectic form realized by the mode-projected fields: `[j(f), j(g)] = i sigma_P`.
    pub fn projected_sigma(&self, f: &TestFunction, g: &TestFunction) -> f64 {
        let d = self.projected_bos(f, g) - self.projected_bos(g, f);
        d.im
    }
}

/// `||X P_low||`: spectral norm of `X` restricted to the listed columns.
pub fn restricted_norm(x: &DMat, columns: &[usize]) -> f64 {
    if columns.is_empty() {
        return 0.0;
    }
    let sub = DMat::from_fn(x.nrows(), columns.len(), |i, k| x[(i, columns[k])]);
    crate::fock::linalg::dense_spectral_norm(&sub)
}

pub fn expectation(x: &DMat, v: &[Complex64]) -> Complex64 {
    let xv = x * nalgebra::DVector::from_column_slice(v);
    v.iter().zip(xv.iter()).map(|(a, b)| a.conj() * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qft::testfn::{Grid, Preset};

    fn tf(p: Preset) -> TestFunction {
        TestFunction::from_preset(p, Grid::default()).unwrap()
    }

    #[test]
    fn smallest_space_shape() {
        let s = TruncatedQftSpace::new(1, 1, 1.0).unwrap();
        assert_eq!(s.dim(), 4);
        let h = s.supercharge() * s.supercharge();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(h[(i, j)].norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn dimension_guard() {
        assert!(matches!(TruncatedQftSpace::new(6, 4, 1.0), Err(SusyError::DimensionOverflow { .. })));
    }

    #[test]
    fn clifford_and_vacuum_two_point() {
        let s = TruncatedQftSpace::new(2, 2, 1.0).unwrap();
        let f = tf(Preset::gaussian());
        let g = tf(Preset::translated_gaussian(0.5));
        let (cf, cg) = (s.clifford(&f), s.clifford(&g));
        let anti = &cf * &cg + &cg * &cf;
        let expected = s.projected_fer(&f, &g) + s.projected_fer(&g, &f);
        assert!((anti - s.identity() * expected).norm() < 1e-13);
        assert!((&cf - cf.adjoint()).norm() < 1e-15);
        let w = s.vacuum();
        assert!((expectation(&(&cf * &cg), &w) - s.projected_fer(&f, &g)).norm() < 1e-14);
        let (jf, jg) = (s.boson_field(&f), s.boson_field(&g));
        assert!((expectation(&(&jf * &jg), &w) - s.projected_bos(&f, &g)).norm() < 1e-14);
    }

    #[test]
    fn supercharge_relations() {
        let s = TruncatedQftSpace::new(2, 3, 1.0).unwrap();
        let f = tf(Preset::hermite(1));
        let w = s.vacuum();
        let qw = s.supercharge() * nalgebra::DVector::from_column_slice(&w);
        assert!(qw.norm() < 1e-15);
        let g = s.gamma();
        assert!((g * s.supercharge() * g + s.supercharge()).norm() < 1e-15);
        assert!((s.delta_s(&s.clifford(&f)) - s.boson_field(&f)).norm() < 1e-13);
        let low = s.low_occupation(s.shape().cutoff - 1);
        let lhs = s.delta_s(&s.boson_field(&f));
        let rhs = s.clifford(&f.derive()) * Complex64::new(0.0, 1.0);
        assert!(restricted_norm(&(lhs - rhs), &low) < 1e-12);
    }
}
