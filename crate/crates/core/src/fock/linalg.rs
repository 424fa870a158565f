//! Sparse and dense complex matrix helpers shared by the Fock and field-theory backends.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sprs::{CsMat, TriMat};

pub type SpMat = CsMat<Complex64>;
pub type DMat = DMatrix<Complex64>;
pub type DVec = DVector<Complex64>;

/// Dense solvers are used up to this dimension; above it, iterative estimates.
pub const DENSE_LIMIT: usize = 1 << 10;

pub fn identity(n: usize) -> SpMat {
    CsMat::eye(n)
}

pub fn zeros(n: usize) -> SpMat {
    CsMat::zero((n, n))
}

pub fn diagonal(values: &[Complex64]) -> SpMat {
    let n = values.len();
    let mut t = TriMat::new((n, n));
    for (i, v) in values.iter().enumerate() {
        if *v != Complex64::new(0.0, 0.0) {
            t.add_triplet(i, i, *v);
        }
    }
    t.to_csr()
}

/// Conjugate transpose.
pub fn adjoint(a: &SpMat) -> SpMat {
    let t: SpMat = a.transpose_view().to_csr();
    t.map(|v| v.conj())
}

pub fn scale(a: &SpMat, c: Complex64) -> SpMat {
    a.map(|v| v * c)
}

pub fn add(a: &SpMat, b: &SpMat) -> SpMat {
    a + b
}

pub fn sub(a: &SpMat, b: &SpMat) -> SpMat {
    a - b
}

pub fn mul(a: &SpMat, b: &SpMat) -> SpMat {
    a * b
}

pub fn commutator(a: &SpMat, b: &SpMat) -> SpMat {
    &(a * b) - &(b * a)
}

pub fn anticommutator(a: &SpMat, b: &SpMat) -> SpMat {
    &(a * b) + &(b * a)
}

/// Frobenius norm; an upper bound on the spectral norm.
pub fn frobenius(a: &SpMat) -> f64 {
    a.data().iter().map(|v| v.norm_sqr()).fold(0.0, |s, x| s + x).sqrt()
}

pub fn max_abs(a: &SpMat) -> f64 {
    a.data().iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn to_dense(a: &SpMat) -> DMat {
    let mut d = DMat::zeros(a.rows(), a.cols());
    for (v, (i, j)) in a.iter() {
        d[(i, j)] += *v;
    }
    d
}

pub fn from_dense(d: &DMat) -> SpMat {
    let mut t = TriMat::new((d.nrows(), d.ncols()));
    for j in 0..d.ncols() {
        for i in 0..d.nrows() {
            let v = d[(i, j)];
            if v.norm() > 0.0 {
                t.add_triplet(i, j, v);
            }
        }
    }
    t.to_csr()
}

pub fn apply(a: &SpMat, v: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.rows()];
    for (row, vec) in a.outer_iterator().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (col, x) in vec.iter() {
            acc += x * v[col];
        }
        out[row] = acc;
    }
    out
}

pub fn vnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).fold(0.0, |s, x| s + x).sqrt()
}

pub fn inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// Largest singular value: exact SVD for small matrices, power iteration on
/// `A^dagger A` otherwise.
pub fn spectral_norm(a: &SpMat) -> f64 {
    if a.nnz() == 0 {
        return 0.0;
    }
    if a.rows().max(a.cols()) <= DENSE_LIMIT {
        return dense_spectral_norm(&to_dense(a));
    }
    power_norm(a, 400, 1e-13)
}

pub fn dense_spectral_norm(d: &DMat) -> f64 {
    if d.is_empty() {
        return 0.0;
    }
    if d.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return f64::NAN;
    }
    let scale = d.iter().fold(0.0_f64, |m, x| m.max(x.norm()));
    if scale == 0.0 {
        return 0.0;
    }
    // Entries far below the largest one cannot move the norm but can stall the SVD.
    let unit = d.map(|x| {
        let y = x / scale;
        if y.norm() < 1e-30 { Complex64::new(0.0, 0.0) } else { y }
    });
    let sigma = match nalgebra::SVD::try_new(unit.clone(), false, false, f64::EPSILON * 5.0, 10_000) {
        Some(svd) => svd.singular_values.iter().fold(0.0_f64, |m, v| m.max(*v)),
        None => {
            let (vals, _) = hermitian_eigen(&(unit.adjoint() * &unit));
            vals.last().copied().unwrap_or(0.0).max(0.0).sqrt()
        }
    };
    scale * sigma
}

fn power_norm(a: &SpMat, iters: usize, rtol: f64) -> f64 {
    let ah = adjoint(a);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<Complex64> = (0..a.cols())
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let n0 = vnorm(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut est = 0.0;
    for _ in 0..iters {
        let w = apply(&ah, &apply(a, &v));
        let nw = vnorm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        let next = nw.sqrt();
        v = w.into_iter().map(|x| x / nw).collect();
        if (next - est).abs() <= rtol * next {
            return next;
        }
        est = next;
    }
    est
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending, vectors as columns.
pub fn hermitian_eigen(h: &DMat) -> (Vec<f64>, DMat) {
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), DMat::zeros(0, 0));
    }
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Restriction `P^T A P` to the listed basis indices.
pub fn submatrix(a: &SpMat, idx: &[usize]) -> DMat {
    let mut pos = vec![usize::MAX; a.rows().max(a.cols())];
    for (k, &i) in idx.iter().enumerate() {
        pos[i] = k;
    }
    let mut d = DMat::zeros(idx.len(), idx.len());
    for (k, &i) in idx.iter().enumerate() {
        if let Some(row) = a.outer_view(i) {
            for (j, v) in row.iter() {
                if pos[j] != usize::MAX {
                    d[(k, pos[j])] += *v;
                }
            }
        }
    }
    d
}

/// Orthonormal basis for the column span of `m` (rank-revealing via SVD).
pub fn column_space(m: &DMat, tol: f64) -> DMat {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DMat::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > tol)
        .map(|(i, _)| i)
        .collect();
    let mut out = DMat::zeros(m.nrows(), keep.len());
    for (k, &i) in keep.iter().enumerate() {
        out.set_column(k, &u.column(i));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn adjoint_conjugates_and_transposes() {
        let mut t = TriMat::new((2, 2));
        t.add_triplet(0, 1, Complex64::new(1.0, 2.0));
        let a: SpMat = t.to_csr();
        let ah = adjoint(&a);
        assert_eq!(to_dense(&ah)[(1, 0)], Complex64::new(1.0, -2.0));
    }

    #[test]
    fn power_iteration_matches_dense_norm() {
        let n = DENSE_LIMIT + 8;
        let vals: Vec<Complex64> = (0..n).map(|i| c((i % 7) as f64 - 3.5)).collect();
        let d = diagonal(&vals);
        assert!((spectral_norm(&d) - 3.5).abs() < 1e-9);
    }

    #[test]
    fn eigen_is_sorted() {
        let d = diagonal(&[c(3.0), c(-1.0), c(2.0)]);
        let (vals, _) = hermitian_eigen(&to_dense(&d));
        assert_eq!(vals, vec![-1.0, 2.0, 3.0]);
    }
}
