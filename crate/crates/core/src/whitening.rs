//! Whitening of correlated test items.
//!
//! The standardized per-block count vector of a template battery has
//! covariance `Sigma` (the template correlation matrix). Decomposing
//! `Sigma = L D L^T` gives the forward map `D^{-1/2} L^T`, which carries the
//! correlated vector to one with identity covariance; running the chi-square
//! test on the transformed components yields mutually independent test
//! items. This is the same transform as diagonalizing `Sigma^{-1}` and
//! scaling, without ever inverting the matrix.
//!
//! Perfectly correlated template pairs make `Sigma` singular;
//! [`rank_analysis`] identifies the dependent template groups so the caller
//! can drop one member of each before building the transform.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitstream::BitSequence;
use crate::matching::{standardized_counts, MatchingError};
use crate::specfun::{chi2_sf, SpecfunError};
use crate::templates::{CorrelationMatrix, Template};

/// Default relative threshold below which an eigenvalue counts as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-10;

/// Errors from eigendecomposition and whitening.
#[derive(Debug, Error, PartialEq)]
pub enum WhiteningError {
    #[error("matrix entry ({row},{col}) breaks symmetry by {delta}")]
    Asymmetric { row: usize, col: usize, delta: f64 },
    #[error("matrix data length {len} does not match dimension {dim}")]
    ShapeMismatch { len: usize, dim: usize },
    #[error("eigendecomposition failed to converge")]
    NoConvergence,
    #[error("correlation matrix is singular; dependent template groups: {}",
            format_groups(.groups))]
    Singular { groups: Vec<Vec<Template>> },
    #[error("transform was built for a different template list")]
    TemplateMismatch,
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

fn format_groups(groups: &[Vec<Template>]) -> String {
    groups
        .iter()
        .map(|g| {
            let names: Vec<String> = g.iter().map(|t| t.to_string()).collect();
            format!("{{{}}}", names.join(", "))
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Spectral decomposition of a symmetric matrix.
///
/// Eigenvalues are sorted descending. Eigenvector `k` is stored as row `k`
/// of the internal matrix and normalized so that its largest-magnitude
/// component is positive, which fixes the output bit-for-bit for a given
/// input.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    dim: usize,
    eigenvalues: Vec<f64>,
    /// Row `k` holds eigenvector `k`.
    vectors: Vec<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// The eigenvector paired with `eigenvalues()[k]`.
    pub fn eigenvector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.dim..(k + 1) * self.dim]
    }

    /// Reconstructs the decomposed matrix as `sum_k lambda_k v_k v_k^T`.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for k in 0..n {
            let lambda = self.eigenvalues[k];
            let v = self.eigenvector(k);
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] += lambda * v[i] * v[j];
                }
            }
        }
        out
    }
}

/// Symmetry tolerance the decomposition insists on.
const SYMMETRY_TOL: f64 = 1e-12;

/// Full spectral decomposition of a symmetric matrix given in row-major
/// order, by cyclic Jacobi rotations.
pub fn eigendecompose(matrix: &[f64], dim: usize) -> Result<EigenDecomposition, WhiteningError> {
    if matrix.len() != dim * dim {
        return Err(WhiteningError::ShapeMismatch { len: matrix.len(), dim });
    }
    for i in 0..dim {
        for j in i + 1..dim {
            let delta = (matrix[i * dim + j] - matrix[j * dim + i]).abs();
            if delta > SYMMETRY_TOL {
                return Err(WhiteningError::Asymmetric { row: i, col: j, delta });
            }
        }
    }
    if dim == 0 {
        return Ok(EigenDecomposition { dim, eigenvalues: vec![], vectors: vec![] });
    }

    let n = dim;
    let mut a = matrix.to_vec();
    // Accumulated rotations; column k converges to eigenvector k.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = (frob * 1e-15).max(f64::MIN_POSITIVE);

    let mut converged = false;
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= target {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for i in 0..n {
                    if i != p && i != q {
                        let aip = a[i * n + p];
                        let aiq = a[i * n + q];
                        a[i * n + p] = c * aip - s * aiq;
                        a[p * n + i] = a[i * n + p];
                        a[i * n + q] = s * aip + c * aiq;
                        a[q * n + i] = a[i * n + q];
                    }
                }
                for i in 0..n {
                    let vip = v[i * n + p];
                    let viq = v[i * n + q];
                    v[i * n + p] = c * vip - s * viq;
                    v[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }
    if !converged {
        return Err(WhiteningError::NoConvergence);
    }

    // Sort descending; ties keep the lower original index first.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[j * n + j]
            .partial_cmp(&a[i * n + i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });

    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = vec![0.0; n * n];
    for (k, &src) in order.iter().enumerate() {
        eigenvalues.push(a[src * n + src]);
        // Find the dominant component to fix the sign.
        let mut dominant = 0;
        for i in 1..n {
            if v[i * n + src].abs() > v[dominant * n + src].abs() {
                dominant = i;
            }
        }
        let flip = if v[dominant * n + src] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[k * n + i] = flip * v[i * n + src];
        }
    }
    Ok(EigenDecomposition { dim: n, eigenvalues, vectors })
}

/// Rank of a correlation matrix at a relative eigenvalue tolerance, plus the
/// template groups responsible for each lost dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct RankAnalysis {
    pub rank: usize,
    /// Eigenvalues classified as zero, in the decomposition's order.
    pub zero_eigenvalues: Vec<f64>,
    /// Linearly dependent template groups, each sorted, ordered by first
    /// member.
    pub dependent_groups: Vec<Vec<Template>>,
}

/// Detects rank deficiency and identifies the dependent template groups.
///
/// Zero eigenvalues of a correlation matrix are typically degenerate, so the
/// individual computed null eigenvectors are an arbitrary basis of the null
/// space. Grouping therefore works with the projector onto the null space,
/// which is basis independent: template `i` participates when the projector
/// diagonal exceeds `1/(2R)` (for a single null vector this is exactly the
/// component test `|v_i| > 1/sqrt(2R)`), and templates are grouped by the
/// off-diagonal entries linking them.
pub fn rank_analysis(
    sigma: &CorrelationMatrix,
    tol: f64,
) -> Result<RankAnalysis, WhiteningError> {
    let eig = eigendecompose(sigma.entries(), sigma.dim())?;
    let n = sigma.dim();
    if n == 0 {
        return Ok(RankAnalysis { rank: 0, zero_eigenvalues: vec![], dependent_groups: vec![] });
    }
    let lambda_max = eig.eigenvalues()[0].max(0.0);
    let cutoff = tol * lambda_max;
    let zero_idx: Vec<usize> =
        (0..n).filter(|&k| eig.eigenvalues()[k] < cutoff).collect();
    let zero_eigenvalues: Vec<f64> = zero_idx.iter().map(|&k| eig.eigenvalues()[k]).collect();
    let rank = n - zero_idx.len();

    // Projector onto the null space.
    let mut proj = vec![0.0; n * n];
    for &k in &zero_idx {
        let v = eig.eigenvector(k);
        for i in 0..n {
            for j in 0..n {
                proj[i * n + j] += v[i] * v[j];
            }
        }
    }
    let threshold = 1.0 / (2.0 * n as f64);
    let members: Vec<usize> = (0..n).filter(|&i| proj[i * n + i] > threshold).collect();

    // Connected components over members linked by significant projector
    // entries.
    let mut group_of: Vec<Option<usize>> = vec![None; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &start in &members {
        if group_of[start].is_some() {
            continue;
        }
        let gid = groups.len();
        let mut stack = vec![start];
        let mut component = Vec::new();
        group_of[start] = Some(gid);
        while let Some(i) = stack.pop() {
            component.push(i);
            for &j in &members {
                if group_of[j].is_none() && proj[i * n + j].abs() > threshold {
                    group_of[j] = Some(gid);
                    stack.push(j);
                }
            }
        }
        component.sort_unstable();
        groups.push(component);
    }
    groups.sort_by_key(|g| g[0]);
    let dependent_groups = groups
        .into_iter()
        .map(|g| g.into_iter().map(|i| sigma.templates()[i]).collect())
        .collect();
    Ok(RankAnalysis { rank, zero_eigenvalues, dependent_groups })
}

/// The whitening map for a full-rank template battery, serializable so an
/// experiment can pin the exact transform it used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiteningTransform {
    templates: Vec<Template>,
    /// Row-major `R x R` forward map; transformed components are
    /// `forward * standardized_counts_row`.
    forward: Vec<Vec<f64>>,
    /// Templates excluded beforehand to make the matrix full rank.
    removed: Vec<Template>,
    /// Relative zero-eigenvalue tolerance used during construction.
    tolerance: f64,
}

impl WhiteningTransform {
    /// Builds the forward map `D^{-1/2} L^T` from a full-rank correlation
    /// matrix.
    ///
    /// Fails with the dependent template groups when any eigenvalue falls
    /// below `tol` times the largest.
    pub fn build(sigma: &CorrelationMatrix, tol: f64) -> Result<Self, WhiteningError> {
        let analysis = rank_analysis(sigma, tol)?;
        if analysis.rank < sigma.dim() {
            return Err(WhiteningError::Singular { groups: analysis.dependent_groups });
        }
        let eig = eigendecompose(sigma.entries(), sigma.dim())?;
        let n = sigma.dim();
        let mut forward = Vec::with_capacity(n);
        for k in 0..n {
            let scale = 1.0 / eig.eigenvalues()[k].sqrt();
            forward.push(eig.eigenvector(k).iter().map(|&x| x * scale).collect());
        }
        Ok(WhiteningTransform {
            templates: sigma.templates().to_vec(),
            forward,
            removed: Vec::new(),
            tolerance: tol,
        })
    }

    /// Records which templates were dropped before the matrix was built.
    pub fn with_removed(mut self, removed: Vec<Template>) -> Self {
        self.removed = removed;
        self
    }

    /// Template order the transform expects.
    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    /// Templates excluded for rank deficiency.
    pub fn removed(&self) -> &[Template] {
        &self.removed
    }

    /// Zero-eigenvalue tolerance used during construction.
    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Number of transformed test items.
    pub fn dim(&self) -> usize {
        self.templates.len()
    }

    /// Row-major forward map entries.
    pub fn forward(&self) -> &[Vec<f64>] {
        &self.forward
    }

    /// Applies the forward map to one standardized count row.
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        self.forward
            .iter()
            .map(|fr| fr.iter().zip(row).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Per-item p-values of a battery run, transformed and raw.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatteryResult {
    /// One p-value per transformed component, indexed by eigen-order rather
    /// than by template.
    pub item_p_values: Vec<f64>,
    /// Per-template p-values before the transform.
    pub raw_p_values: Option<Vec<f64>>,
}

/// Runs the whitened battery: standardize counts, map each block vector
/// through the transform, and test each transformed component with a
/// chi-square on `blocks` degrees of freedom.
pub fn orthogonal_battery(
    seq: &BitSequence,
    templates: &[Template],
    blocks: usize,
    transform: &WhiteningTransform,
) -> Result<BatteryResult, WhiteningError> {
    if transform.templates() != templates {
        return Err(WhiteningError::TemplateMismatch);
    }
    let std = standardized_counts(seq, templates, blocks)?;
    let r = templates.len();
    let mut transformed_sq = vec![0.0; r];
    let mut raw_sq = vec![0.0; r];
    for j in 0..blocks {
        let row = std.row(j);
        let mapped = transform.apply(row);
        for k in 0..r {
            transformed_sq[k] += mapped[k] * mapped[k];
            raw_sq[k] += row[k] * row[k];
        }
    }
    let item_p_values = transformed_sq
        .iter()
        .map(|&chi| chi2_sf(blocks as u32, chi))
        .collect::<Result<Vec<_>, _>>()?;
    let raw_p_values = raw_sq
        .iter()
        .map(|&chi| chi2_sf(blocks as u32, chi))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BatteryResult { item_p_values, raw_p_values: Some(raw_p_values) })
}

/// Per-template p-values without any transform.
pub fn raw_battery(
    seq: &BitSequence,
    templates: &[Template],
    blocks: usize,
) -> Result<Vec<f64>, WhiteningError> {
    let std = standardized_counts(seq, templates, blocks)?;
    (0..templates.len())
        .map(|r| chi2_sf(blocks as u32, std.chi_obs(r)).map_err(WhiteningError::from))
        .collect()
}
