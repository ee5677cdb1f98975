//! PCA projection plus per-dimension standardization of encoder features.
//!
//! `z = (W(f − μ_f) − μ_z) ⊘ (σ_z + ε)` with `W` holding the top principal
//! directions as orthonormal rows. Standard deviations are population
//! (`1/N`) statistics.

use crate::error::{Error, Result};
use crate::linalg::{dot, symmetric_eigen, Matrix};

pub const DEFAULT_EPSILON: f64 = 1e-8;
pub const DEFAULT_LATENT_DIM: usize = 128;
/// Feature widths above this use the `N × N` Gram matrix instead of the
/// `D × D` covariance.
pub const COVARIANCE_LIMIT: usize = 4096;

/// Eigenvalues at or below this fraction of the leading one count as zero.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    /// `d_z × D`, rows orthonormal, ordered by decreasing variance.
    pub projection: Matrix,
    pub mean: Vec<f64>,
    /// Variance along each row of `projection`.
    pub explained_variance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentSpaceModel {
    pub projection: Matrix,
    pub feature_mean: Vec<f64>,
    pub latent_mean: Vec<f64>,
    pub latent_std: Vec<f64>,
    pub epsilon: f64,
    pub z_ref: Vec<f64>,
}

fn check_rows(features: &[Vec<f64>]) -> Result<usize> {
    let d = features.first().map_or(0, Vec::len);
    for (i, f) in features.iter().enumerate() {
        if f.len() != d {
            return Err(Error::Dimension(format!("feature {i} has width {}, expected {d}", f.len())));
        }
        if f.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("feature {i} has non-finite entries")));
        }
    }
    Ok(d)
}

fn mean_of(rows: &[Vec<f64>], width: usize) -> Vec<f64> {
    let mut mean = vec![0.0; width];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    let n = rows.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Flip each row so its largest-magnitude entry is positive (ties go to the
/// lowest index).
fn fix_sign(row: &mut [f64]) {
    let mut best = 0;
    for (i, x) in row.iter().enumerate() {
        if x.abs() > row[best].abs() {
            best = i;
        }
    }
    if row[best] < 0.0 {
        row.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Top-`latent_dim` principal directions of `features`.
pub fn fit_pca(features: &[Vec<f64>], latent_dim: usize) -> Result<Pca> {
    let n = features.len();
    let d = check_rows(features)?;
    if latent_dim == 0 {
        return Err(Error::Fit("latent dimension must be at least 1".into()));
    }
    if n < latent_dim {
        return Err(Error::Fit(format!("{n} samples cannot support {latent_dim} components")));
    }
    if d < latent_dim {
        return Err(Error::Fit(format!("feature width {d} is below latent dimension {latent_dim}")));
    }

    let mean = mean_of(features, d);
    let centered: Vec<Vec<f64>> =
        features.iter().map(|f| f.iter().zip(&mean).map(|(x, m)| x - m).collect()).collect();
    let nf = n as f64;

    let (values, directions) = if d <= COVARIANCE_LIMIT {
        let mut cov = Matrix::zeros(d, d);
        for row in &centered {
            for i in 0..d {
                let ri = row[i];
                if ri == 0.0 {
                    continue;
                }
                let crow = cov.row_mut(i);
                for j in i..d {
                    crow[j] += ri * row[j];
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                let v = cov.get(i, j) / nf;
                cov.set(i, j, v);
                cov.set(j, i, v);
            }
        }
        let eig = symmetric_eigen(&cov)?;
        let mut dirs = Matrix::zeros(latent_dim, d);
        for k in 0..latent_dim {
            dirs.row_mut(k).copy_from_slice(eig.vectors.row(k));
        }
        (eig.values[..latent_dim].to_vec(), dirs)
    } else {
        // Gram trick: if G u = λ u with G = X Xᵀ / N, then Xᵀ u / ‖Xᵀ u‖ is a
        // unit eigenvector of the covariance with the same eigenvalue.
        let mut gram = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = dot(&centered[i], &centered[j]) / nf;
                gram.set(i, j, v);
                gram.set(j, i, v);
            }
        }
        let eig = symmetric_eigen(&gram)?;
        let mut dirs = Matrix::zeros(latent_dim, d);
        for k in 0..latent_dim {
            let u = eig.vectors.row(k);
            let row = dirs.row_mut(k);
            for (ui, xi) in u.iter().zip(&centered) {
                for (r, x) in row.iter_mut().zip(xi) {
                    *r += ui * x;
                }
            }
            let norm = dot(row, row).sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|r| *r /= norm);
            }
        }
        (eig.values[..latent_dim].to_vec(), dirs)
    };

    let lead = values.first().copied().unwrap_or(0.0);
    if let Some(k) = values.iter().position(|&v| v <= RANK_TOLERANCE * lead.max(f64::MIN_POSITIVE)) {
        return Err(Error::Fit(format!(
            "centered features have rank {k}, component {} of {latent_dim} has no variance",
            k + 1
        )));
    }

    let mut projection = directions;
    for k in 0..latent_dim {
        fix_sign(projection.row_mut(k));
    }
    Ok(Pca { projection, mean, explained_variance: values })
}

/// `W (f − μ_f)`.
pub fn project(pca_projection: &Matrix, feature_mean: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != feature_mean.len() {
        return Err(Error::Dimension(format!(
            "feature width {} does not match model width {}",
            f.len(),
            feature_mean.len()
        )));
    }
    let centered: Vec<f64> = f.iter().zip(feature_mean).map(|(x, m)| x - m).collect();
    pca_projection.matvec(&centered)
}

/// Per-dimension mean and population standard deviation.
pub fn fit_standardizer(projected: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    if projected.len() < 2 {
        return Err(Error::Fit(format!(
            "standardization needs at least 2 samples, got {}",
            projected.len()
        )));
    }
    let d = check_rows(projected)?;
    let mean = mean_of(projected, d);
    let mut var = vec![0.0; d];
    for r in projected {
        for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let n = projected.len() as f64;
    Ok((mean, var.into_iter().map(|v| (v / n).sqrt()).collect()))
}

impl LatentSpaceModel {
    /// PCA, standardization, and `z_ref` from the frame at `rest_index`.
    pub fn fit(features: &[Vec<f64>], latent_dim: usize, epsilon: f64, rest_index: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        let pca = fit_pca(features, latent_dim)?;
        let projected = features
            .iter()
            .map(|f| project(&pca.projection, &pca.mean, f))
            .collect::<Result<Vec<_>>>()?;
        let (latent_mean, latent_std) = fit_standardizer(&projected)?;
        let mut model = LatentSpaceModel {
            projection: pca.projection,
            feature_mean: pca.mean,
            latent_mean,
            latent_std,
            epsilon,
            z_ref: vec![0.0; latent_dim],
        };
        model.z_ref = model.extract_reference(features, rest_index)?;
        Ok(model)
    }

    pub fn latent_dim(&self) -> usize {
        self.projection.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.projection.cols()
    }

    /// Standardized latent of one feature vector.
    pub fn encode(&self, f: &[f64]) -> Result<Vec<f64>> {
        let raw = project(&self.projection, &self.feature_mean, f)?;
        Ok(raw
            .iter()
            .zip(&self.latent_mean)
            .zip(&self.latent_std)
            .map(|((z, m), s)| (z - m) / (s + self.epsilon))
            .collect())
    }

    /// Encoding of `features[rest_index]`.
    pub fn extract_reference(&self, features: &[Vec<f64>], rest_index: usize) -> Result<Vec<f64>> {
        if features.is_empty() {
            return Err(Error::InvalidInput("cannot extract a reference from an empty sequence".into()));
        }
        let f = features.get(rest_index).ok_or_else(|| {
            Error::InvalidInput(format!("rest frame {rest_index} out of range for {} frames", features.len()))
        })?;
        self.encode(f)
    }

    /// `max |W Wᵀ − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let wwt = self.projection.matmul(&self.projection.transpose()).expect("square product");
        wwt.max_abs_diff(&Matrix::identity(self.latent_dim()))
    }
}
