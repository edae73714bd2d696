//! Normalized graph Laplacian and symmetric eigenvalues for small matrices.

use crate::error::{Error, Result};
use crate::similarity::SimilarityMatrix;

/// Off-diagonal magnitude (relative to max(1, ‖A‖_F)) at which Jacobi stops.
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;
pub const MAX_SWEEPS: usize = 100;
/// Inputs whose transpose differs by more than this (scaled) are rejected.
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianResult {
    pub matrix: Vec<Vec<f64>>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
}

/// L = I − D^{-1/2} G D^{-1/2} with D_ii = Σ_j g_ij.
///
/// The unit diagonal of `G` guarantees every degree is at least 1.
pub fn normalized_laplacian(g: &SimilarityMatrix) -> Vec<Vec<f64>> {
    let n = g.n();
    let inv_sqrt_deg: Vec<f64> = g
        .rows()
        .iter()
        .map(|row| 1.0 / row.iter().sum::<f64>().sqrt())
        .collect();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = f64::from(u8::from(i == j)) - inv_sqrt_deg[i] * g.get(i, j) * inv_sqrt_deg[j];
            l[i][j] = v;
            l[j][i] = v;
        }
    }
    l
}

pub fn laplacian_spectrum(g: &SimilarityMatrix) -> Result<LaplacianResult> {
    let matrix = normalized_laplacian(g);
    let eigenvalues = sym_eigenvalues(&matrix)?;
    Ok(LaplacianResult { matrix, eigenvalues })
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations,
/// sorted ascending. Values are reported raw (no clamping).
pub fn sym_eigenvalues(a: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if let Some(bad) = a.iter().flatten().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("matrix entry {bad} is not finite")));
    }

    let scale = a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (a[i][j] - a[j][i]).abs();
            if gap > SYMMETRY_TOL * scale {
                return Err(Error::NotSymmetric { row: i, col: j, gap });
            }
        }
    }

    let mut m: Vec<Vec<f64>> = a.to_vec();
    // Work on the symmetric part so tiny input asymmetries cannot drift.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[i][j] + m[j][i]);
            m[i][j] = v;
            m[j][i] = v;
        }
    }

    let tol = OFF_DIAGONAL_TOL * scale;
    let mut sweeps = 0;
    loop {
        let off = max_off_diagonal(&m);
        if off < tol {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off_diagonal: off });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut m, p, q);
            }
        }
        sweeps += 1;
    }

    let mut eig: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

fn max_off_diagonal(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut off = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            off = off.max(m[i][j].abs());
        }
    }
    off
}

/// Applies the plane rotation that zeroes m[p][q].
fn rotate(m: &mut [Vec<f64>], p: usize, q: usize) {
    let apq = m[p][q];
    if apq == 0.0 {
        return;
    }
    let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    m[p][p] -= t * apq;
    m[q][q] += t * apq;
    m[p][q] = 0.0;
    m[q][p] = 0.0;
    for r in 0..m.len() {
        if r == p || r == q {
            continue;
        }
        let arp = m[r][p];
        let arq = m[r][q];
        let new_rp = c * arp - s * arq;
        let new_rq = s * arp + c * arq;
        m[r][p] = new_rp;
        m[p][r] = new_rp;
        m[r][q] = new_rq;
        m[q][r] = new_rq;
    }
}
