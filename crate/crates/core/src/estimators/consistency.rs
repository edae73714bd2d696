//! Consistency estimators built from sample-to-sample similarity.

use crate::error::Result;
use crate::similarity::SimilarityMatrix;
use crate::spectral::laplacian_spectrum;

use super::sampling::SemanticClustering;

/// 1 − trace(D)/M² where D_ii = Σ_j g_ij.
pub fn deg_mat(g: &SimilarityMatrix) -> f64 {
    let m = g.n() as f64;
    let degree_sum: f64 = g.rows().iter().map(|r| r.iter().sum::<f64>()).sum();
    1.0 - degree_sum / (m * m)
}

/// Σ_i max(0, 1 − λ_i) over the normalized Laplacian spectrum.
pub fn eig_val_laplacian(g: &SimilarityMatrix) -> Result<f64> {
    let spectrum = laplacian_spectrum(g)?;
    Ok(spectrum.eigenvalues.iter().map(|l| (1.0 - l).max(0.0)).sum())
}

pub fn num_sem_sets(clustering: &SemanticClustering) -> f64 {
    clustering.num_clusters as f64
}

/// Mean dissimilarity (1 − g_{*i}) of the target to each sample.
pub fn ave_dissimilarity(target_row: &[f64]) -> f64 {
    target_row.iter().map(|g| 1.0 - g).sum::<f64>() / target_row.len() as f64
}
