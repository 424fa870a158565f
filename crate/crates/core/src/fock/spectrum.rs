use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::linalg::{self, DMat};
use super::susy::SusyOperators;
use crate::car::Parity;
use crate::error::{Result, SusyError};

/// Eigenvalues below `KERNEL_RTOL * ||H||` count as zero.
pub const KERNEL_RTOL: f64 = 1e-10;
/// Relative tolerance for eigenvalue clustering and doublet pairing.
pub const DOUBLET_RTOL: f64 = 1e-8;

/// Eigen-decomposition of one conserved block (fixed particle number or parity).
#[derive(Debug, Clone)]
pub struct SectorEigen {
    pub indices: Vec<usize>,
    pub parity: Parity,
    pub values: Vec<f64>,
    pub vectors: DMat,
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub dim: usize,
    pub h_norm: f64,
    pub sectors: Vec<SectorEigen>,
    pub blocked_by_number: bool,
}

impl Spectrum {
    /// Diagonalizes `H` block by block. Blocks are particle-number sectors
    /// when `[H, N] = 0`, else the two parity sectors (`[H, Gamma] = 0` always).
    pub fn compute(ops: &SusyOperators) -> Result<Self> {
        let dim = ops.dim();
        let herm = linalg::frobenius(&(&ops.h - &linalg::adjoint(&ops.h)));
        let scale = 1.0 + linalg::frobenius(&ops.h);
        if herm > 1e-12 * scale {
            return Err(SusyError::NonHermitian { residual: herm });
        }
        let by_number = ops.conserves_number();
        let mut blocks: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for s in 0..dim {
            let key = if by_number { s.count_ones() } else { s.count_ones() % 2 };
            blocks.entry(key).or_default().push(s);
        }
        let sectors = blocks
            .into_par_iter()
            .map(|(key, indices)| {
                let block = linalg::submatrix(&ops.h, &indices);
                let (values, vectors) = linalg::hermitian_eigen(&block);
                SectorEigen { indices, parity: Parity::of_degree(key as usize), values, vectors }
            })
            .collect();
        Ok(Spectrum { dim, h_norm: ops.h_norm(), sectors, blocked_by_number: by_number })
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.sectors.iter().flat_map(|s| s.values.iter().copied()).collect();
        all.sort_by(f64::total_cmp);
        all
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    fn kernel_tol(&self) -> f64 {
        KERNEL_RTOL * self.h_norm.max(f64::MIN_POSITIVE)
    }

    /// Full-space eigenvectors with eigenvalue within `tol` of `lambda`, by parity.
    pub fn eigenspace(&self, lambda: f64, tol: f64, parity: Parity) -> Vec<Vec<Complex64>> {
        let mut out = Vec::new();
        for sec in self.sectors.iter().filter(|s| s.parity == parity) {
            for (k, v) in sec.values.iter().enumerate() {
                if (v - lambda).abs() <= tol {
                    let mut full = vec![Complex64::new(0.0, 0.0); self.dim];
                    for (r, &i) in sec.indices.iter().enumerate() {
                        full[i] = sec.vectors[(r, k)];
                    }
                    out.push(full);
                }
            }
        }
        out
    }

    /// Orthonormal basis of `ker H`, by parity.
    pub fn kernel(&self, parity: Parity) -> Vec<Vec<Complex64>> {
        self.eigenspace(0.0, self.kernel_tol(), parity)
    }

    /// Distinct eigenvalue clusters above the kernel, ascending.
    fn positive_levels(&self) -> Vec<f64> {
        let tol = DOUBLET_RTOL * self.h_norm.max(f64::MIN_POSITIVE);
        let mut levels: Vec<f64> = Vec::new();
        for v in self.eigenvalues() {
            if v <= tol.max(self.kernel_tol()) {
                continue;
            }
            match levels.last() {
                Some(l) if (v - l).abs() <= tol => {}
                _ => levels.push(v),
            }
        }
        levels
    }
}

/// One non-zero energy level and its boson/fermion pairing.
#[derive(Debug, Clone, Serialize)]
pub struct Doublet {
    pub energy: f64,
    pub multiplicity_even: usize,
    pub multiplicity_odd: usize,
    /// `||P_even Q_s1 V_odd - Q_s1 V_odd||`: `Q_s1` maps the odd eigenspace into the even one.
    pub leakage: f64,
    /// Smallest singular value of `Q_s1` restricted to the odd eigenspace, divided by `sqrt(E)`
    /// (1 for an exact bijection).
    pub min_singular_ratio: f64,
    pub paired: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub dim: usize,
    pub h_norm: f64,
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    pub kernel_dim_even: usize,
    pub kernel_dim_odd: usize,
    pub witten_index: i64,
    pub doublets: Vec<Doublet>,
    pub qs1_qs2_anticommutator: f64,
    pub blocked_by_number: bool,
    pub all_paired: bool,
}

fn doublet(ops: &SusyOperators, spec: &Spectrum, energy: f64) -> Doublet {
    let tol = DOUBLET_RTOL * spec.h_norm.max(f64::MIN_POSITIVE);
    let even = spec.eigenspace(energy, tol, Parity::Even);
    let odd = spec.eigenspace(energy, tol, Parity::Odd);
    let mut leakage = 0.0_f64;
    let mut images = DMat::zeros(spec.dim, odd.len());
    for (k, v) in odd.iter().enumerate() {
        let w = linalg::apply(&ops.qs1, v);
        let mut rest = w.clone();
        for e in &even {
            let c = linalg::inner(e, &w);
            rest.iter_mut().zip(e).for_each(|(r, x)| *r -= c * x);
        }
        leakage = leakage.max(linalg::vnorm(&rest));
        for (i, x) in w.into_iter().enumerate() {
            images[(i, k)] = x;
        }
    }
    let min_singular_ratio = if odd.is_empty() {
        0.0
    } else {
        images.singular_values().iter().fold(f64::INFINITY, |m, s| m.min(*s)) / energy.sqrt()
    };
    let pair_tol = DOUBLET_RTOL.sqrt() * 1e2;
    let paired = even.len() == odd.len()
        && !odd.is_empty()
        && leakage <= pair_tol * energy.sqrt()
        && (min_singular_ratio - 1.0).abs() <= pair_tol;
    Doublet {
        energy,
        multiplicity_even: even.len(),
        multiplicity_odd: odd.len(),
        leakage,
        min_singular_ratio,
        paired,
    }
}

pub fn spectral_report(ops: &SusyOperators) -> Result<SpectralReport> {
    let spec = Spectrum::compute(ops)?;
    Ok(report_from(ops, &spec))
}

pub fn report_from(ops: &SusyOperators, spec: &Spectrum) -> SpectralReport {
    let kernel_dim_even = spec.kernel(Parity::Even).len();
    let kernel_dim_odd = spec.kernel(Parity::Odd).len();
    let doublets: Vec<Doublet> =
        spec.positive_levels().into_par_iter().map(|e| doublet(ops, spec, e)).collect();
    let all_paired = doublets.iter().all(|d| d.paired);
    SpectralReport {
        dim: spec.dim,
        h_norm: spec.h_norm,
        eigenvalues: spec.eigenvalues(),
        min_eigenvalue: spec.min_eigenvalue(),
        kernel_dim_even,
        kernel_dim_odd,
        witten_index: kernel_dim_even as i64 - kernel_dim_odd as i64,
        doublets,
        qs1_qs2_anticommutator: linalg::frobenius(&linalg::anticommutator(&ops.qs1, &ops.qs2)),
        blocked_by_number: spec.blocked_by_number,
        all_paired,
    }
}
