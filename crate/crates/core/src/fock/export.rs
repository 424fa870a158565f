//! Matrix Market coordinate export.

use std::io::{self, Write};

use super::linalg::SpMat;

/// Writes `m` as a `complex general` Matrix Market coordinate file (1-based indices).
pub fn write_matrix_market<W: Write>(m: &SpMat, mut out: W) -> io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate complex general")?;
    writeln!(out, "{} {} {}", m.rows(), m.cols(), m.nnz())?;
    let mut entries: Vec<(usize, usize, num_complex::Complex64)> =
        m.iter().map(|(v, (i, j))| (i, j, *v)).collect();
    entries.sort_by_key(|(i, j, _)| (*j, *i));
    for (i, j, v) in entries {
        writeln!(out, "{} {} {:e} {:e}", i + 1, j + 1, v.re, v.im)?;
    }
    Ok(())
}
