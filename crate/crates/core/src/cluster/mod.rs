//! Handover-driven station clustering and its geographic baseline.
//!
//! The data-driven pipeline: handover counts are row-normalized into a
//! transition matrix `H`, symmetrized into edge weights
//! `W[i][j] = H[i][j] + H[j][i]`, reduced to the random-walk normalized
//! Laplacian `L = I - D^-1 W`, embedded through the eigenvectors of the
//! smallest eigenvalues, and partitioned by size-constrained K-means. The
//! baseline applies the same constrained K-means directly to station
//! coordinates.

mod flow;
mod kmeans;

pub use kmeans::{assign_with_bounds, constrained_kmeans, KMEANS_MAX_ITER, KMEANS_RESTARTS};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::telemetry::{HandoverCounts, Station, StationId};

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("infeasible size bounds: {0}")]
    Infeasible(String),
    #[error("eigensolver failed to converge: {0}")]
    Convergence(String),
}

/// Clustering strategy tag carried on every assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    DataDriven,
    Geographic,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::DataDriven => f.write_str("data-driven"),
            Strategy::Geographic => f.write_str("geographic"),
        }
    }
}

/// Which data window an assignment was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SourceWindow {
    #[default]
    Static,
    Window {
        start: i64,
        len: i64,
    },
}

/// A station-to-controller map with its size bounds and provenance.
///
/// Serialized as `{strategy, n_clusters, min_size, max_size, labels}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub strategy: Strategy,
    pub n_clusters: usize,
    pub min_size: usize,
    pub max_size: usize,
    pub labels: Vec<usize>,
    #[serde(skip)]
    pub source_window: SourceWindow,
}

impl ClusterAssignment {
    pub fn n_stations(&self) -> usize {
        self.labels.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.n_clusters];
        for &label in &self.labels {
            sizes[label] += 1;
        }
        sizes
    }

    pub fn members(&self, cluster: usize) -> Vec<StationId> {
        self.labels
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l == cluster)
            .map(|(i, _)| StationId(i as u32))
            .collect()
    }

    /// True when every cluster size lies inside the declared bounds.
    pub fn satisfies_bounds(&self) -> bool {
        self.cluster_sizes()
            .iter()
            .all(|&s| (self.min_size..=self.max_size).contains(&s))
    }
}

/// Spectral embedding: rows are stations, columns the eigenvectors of the
/// `n_clusters` smallest Laplacian eigenvalues.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    pub coords: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

/// The full graph bundle produced from one window of handover counts.
#[derive(Debug, Clone)]
pub struct TransitionGraph {
    pub h: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub degrees: DVector<f64>,
    pub laplacian: DMatrix<f64>,
}

impl TransitionGraph {
    pub fn from_counts(counts: &HandoverCounts) -> Result<Self, ClusterError> {
        let h = transition_matrix(counts);
        let w = weight_graph(&h)?;
        let (laplacian, degrees) = normalized_laplacian(&w);
        Ok(TransitionGraph {
            h,
            w,
            degrees,
            laplacian,
        })
    }
}

/// Row-normalized transition probabilities: `H[i][j]` is the fraction of
/// station `i`'s outgoing handovers that target `j`; rows with no outgoing
/// handovers stay all-zero.
pub fn transition_matrix(counts: &HandoverCounts) -> DMatrix<f64> {
    let n = counts.n();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        let row_sum = counts.row_sum(i);
        if row_sum == 0 {
            continue;
        }
        let inv = 1.0 / row_sum as f64;
        for j in 0..n {
            h[(i, j)] = counts.get(i, j) as f64 * inv;
        }
    }
    h
}

/// Symmetric edge weights `W[i][j] = H[i][j] + H[j][i]`, zero diagonal.
pub fn weight_graph(h: &DMatrix<f64>) -> Result<DMatrix<f64>, ClusterError> {
    if h.nrows() != h.ncols() {
        return Err(ClusterError::Shape(format!(
            "transition matrix must be square, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let mut w = h + h.transpose();
    for i in 0..w.nrows() {
        w[(i, i)] = 0.0;
    }
    Ok(w)
}

/// Random-walk normalized Laplacian `L = I - D^-1 W` and the degree vector
/// `D[i] = sum_j W[i][j]`.
///
/// Degree-zero stations are regularized with a unit self-loop before
/// normalization, which zeroes their Laplacian row and column and leaves
/// them as eigenvalue-0 singleton components placed freely by the
/// size-constrained assignment.
pub fn normalized_laplacian(w: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = w.nrows();
    debug_assert_eq!(n, w.ncols(), "weight matrix must be square");
    let degrees = DVector::from_fn(n, |i, _| w.row(i).sum());
    let mut l = DMatrix::identity(n, n);
    for i in 0..n {
        if degrees[i] > 0.0 {
            let inv = 1.0 / degrees[i];
            for j in 0..n {
                l[(i, j)] -= w[(i, j)] * inv;
            }
        } else {
            // Unit self-loop: I - D'^-1 W' has an all-zero row here.
            l[(i, i)] = 0.0;
        }
    }
    (l, degrees)
}

/// Eigenpairs of the random-walk Laplacian for the `n_clusters` smallest
/// eigenvalues, computed through the symmetric form
/// `L_sym = I - D^-1/2 W D^-1/2` and mapped back via `u = D^-1/2 u_sym`.
/// Columns are unit-norm with a deterministic sign (first nonzero entry
/// positive); eigenvalues come back ascending.
pub fn spectral_embed(
    laplacian: &DMatrix<f64>,
    degrees: &DVector<f64>,
    n_clusters: usize,
) -> Result<SpectralEmbedding, ClusterError> {
    let n = laplacian.nrows();
    if laplacian.ncols() != n || degrees.len() != n {
        return Err(ClusterError::Shape("laplacian/degree shape mismatch".into()));
    }
    if n_clusters == 0 || n_clusters > n {
        return Err(ClusterError::Shape(format!(
            "need 1 <= n_clusters <= {n}, got {n_clusters}"
        )));
    }
    let d_reg: Vec<f64> = (0..n)
        .map(|i| if degrees[i] > 0.0 { degrees[i] } else { 1.0 })
        .collect();
    // L_sym = D^1/2 L D^-1/2; symmetrize to stamp out rounding asymmetry.
    let mut l_sym = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            l_sym[(i, j)] = laplacian[(i, j)] * (d_reg[i] / d_reg[j]).sqrt();
        }
    }
    let l_sym = (&l_sym + l_sym.transpose()) * 0.5;

    let eigen = SymmetricEigen::try_new(l_sym, f64::EPSILON, 100_000)
        .ok_or_else(|| ClusterError::Convergence(format!("symmetric eigensolve on {n}x{n}")))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));

    let mut coords = DMatrix::zeros(n, n_clusters);
    let mut eigenvalues = Vec::with_capacity(n_clusters);
    for (col, &idx) in order.iter().take(n_clusters).enumerate() {
        eigenvalues.push(eigen.eigenvalues[idx]);
        let mut u: Vec<f64> = (0..n)
            .map(|i| eigen.eigenvectors[(i, idx)] / d_reg[i].sqrt())
            .collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let sign = u
                .iter()
                .find(|v| v.abs() > 1e-12)
                .map_or(1.0, |v| v.signum());
            for v in &mut u {
                *v *= sign / norm;
            }
        }
        for i in 0..n {
            coords[(i, col)] = u[i];
        }
    }
    Ok(SpectralEmbedding {
        coords,
        eigenvalues,
    })
}

/// Default cluster size bounds: `floor(0.8 n/k)` and `ceil(1.2 n/k)`,
/// computed in exact integer arithmetic.
pub fn size_bounds(n_stations: usize, n_clusters: usize) -> (usize, usize) {
    let min = 4 * n_stations / (5 * n_clusters);
    let max = (6 * n_stations).div_ceil(5 * n_clusters);
    (min, max)
}

/// Full data-driven pipeline over one window of handover counts.
pub fn cluster_data_driven(
    counts: &HandoverCounts,
    n_clusters: usize,
    seed: u64,
) -> Result<ClusterAssignment, ClusterError> {
    let n = counts.n();
    if n_clusters == 0 || n_clusters > n {
        return Err(ClusterError::Shape(format!(
            "need 1 <= n_clusters <= {n}, got {n_clusters}"
        )));
    }
    let graph = TransitionGraph::from_counts(counts)?;
    let embedding = spectral_embed(&graph.laplacian, &graph.degrees, n_clusters)?;
    let (min_size, max_size) = size_bounds(n, n_clusters);
    let labels = constrained_kmeans(&embedding.coords, n_clusters, min_size, max_size, seed)?;
    Ok(ClusterAssignment {
        strategy: Strategy::DataDriven,
        n_clusters,
        min_size,
        max_size,
        labels,
        source_window: SourceWindow::Window {
            start: counts.window_start,
            len: counts.window_len,
        },
    })
}

/// Geographic baseline: constrained K-means directly on (lat, lon) rows,
/// with the same size bounds as the data-driven pipeline. Ignores events
/// entirely.
pub fn cluster_geographic(
    stations: &[Station],
    n_clusters: usize,
    seed: u64,
) -> Result<ClusterAssignment, ClusterError> {
    let n = stations.len();
    if n_clusters == 0 || n_clusters > n {
        return Err(ClusterError::Shape(format!(
            "need 1 <= n_clusters <= {n}, got {n_clusters}"
        )));
    }
    let points = DMatrix::from_fn(
        n,
        2,
        |i, c| if c == 0 { stations[i].lat } else { stations[i].lon },
    );
    let (min_size, max_size) = size_bounds(n, n_clusters);
    let labels = constrained_kmeans(&points, n_clusters, min_size, max_size, seed)?;
    Ok(ClusterAssignment {
        strategy: Strategy::Geographic,
        n_clusters,
        min_size,
        max_size,
        labels,
        source_window: SourceWindow::Static,
    })
}
