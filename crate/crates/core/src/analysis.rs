//! Post-hoc analysis of learned node filter weights and graph diagnostics.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::Dense;
use crate::poly::{filter_response, BasisKind};
use crate::rng::{rng_for, stream};
use crate::scalar::Scalar;
use crate::spectra::symmetric_eigen;

pub const DEFAULT_CLUSTERS: usize = 5;
pub const MAX_LLOYD_ITERATIONS: usize = 300;

/// k-means partition of the rows of a weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightClustering<T> {
    pub assignments: Vec<usize>,
    /// `k × (K+1)`
    pub centroids: Dense<T>,
    pub inertia: T,
    /// Inertia after each Lloyd update, first to last.
    pub inertia_trace: Vec<T>,
    pub iterations: usize,
}

impl<T: Scalar> WeightClustering<T> {
    pub fn k(&self) -> usize {
        self.centroids.rows()
    }
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

fn nearest<T: Scalar>(row: &[T], centroids: &Dense<T>) -> (usize, T) {
    let mut best = (0, sq_dist(row, centroids.row(0)));
    for c in 1..centroids.rows() {
        let d = sq_dist(row, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations until assignments stop
/// changing (at most [`MAX_LLOYD_ITERATIONS`]). An empty cluster is moved to
/// the point farthest from its own centroid, unless every point already
/// sits on its centroid.
pub fn cluster_weights<T: Scalar>(b: &Dense<T>, k: usize, seed: u64) -> Result<WeightClustering<T>> {
    let (n, dim) = b.shape();
    if k == 0 || n < k {
        return Err(Error::InvalidArgument(format!("cannot form {k} clusters from {n} rows")));
    }
    let mut rng = rng_for(seed, &[stream::CLUSTER]);
    let mut centroids = Dense::zeros(k, dim);
    let first = rng.gen_range(0..n);
    centroids.row_mut(0).copy_from_slice(b.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(b.row(i), centroids.row(0)).as_f64()).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    idx = i;
                    break;
                }
                r -= w;
            }
            idx
        } else {
            rng.gen_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(b.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(b.row(i), centroids.row(c)).as_f64());
        }
    }

    let mut assignments = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < MAX_LLOYD_ITERATIONS {
        let next: Vec<usize> = (0..n).map(|i| nearest(b.row(i), &centroids).0).collect();
        if next == assignments {
            break;
        }
        assignments = next;
        iterations += 1;

        let mut sums: Dense<T> = Dense::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            for (s, &v) in sums.row_mut(c).iter_mut().zip(b.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = T::one() / T::of_usize(counts[c]);
                for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
        trace.push(inertia(b, &assignments, &centroids));
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let (far, dist) = (0..n)
                .map(|i| (i, sq_dist(b.row(i), centroids.row(assignments[i]))))
                .fold((0, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if dist > T::zero() {
                centroids.row_mut(c).copy_from_slice(b.row(far));
            }
        }
    }
    Ok(WeightClustering {
        inertia: inertia(b, &assignments, &centroids),
        assignments,
        centroids,
        inertia_trace: trace,
        iterations,
    })
}

fn inertia<T: Scalar>(b: &Dense<T>, assignments: &[usize], centroids: &Dense<T>) -> T {
    assignments
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (i, &c)| acc + sq_dist(b.row(i), centroids.row(c)))
}

/// `g(λ)` of every centroid on `grid`; one curve per cluster.
pub fn centroid_curves<T: Scalar>(clustering: &WeightClustering<T>, kind: &BasisKind<T>, grid: &[T]) -> Vec<Vec<T>> {
    (0..clustering.k())
        .map(|c| filter_response(clustering.centroids.row(c), kind, grid))
        .collect()
}

/// Local label homophily of every node whose `k`-hop subgraph has edges.
pub fn homophily_histogram<T: Scalar>(graph: &Graph<T>, k: usize) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for i in 0..graph.num_nodes() {
        if let Some(h) = graph.local_label_homophily(i, k)? {
            out.push((i, h));
        }
    }
    Ok(out)
}

/// Projection of the rows onto the top two principal axes (`N × 2`).
/// Missing axes (fewer than two columns) are left at zero.
pub fn pca_2d<T: Scalar>(b: &Dense<T>) -> Result<Dense<T>> {
    let (n, d) = b.shape();
    if n == 0 {
        return Ok(Dense::zeros(0, 2));
    }
    let mut centered = b.clone();
    for c in 0..d {
        let col = b.column(c);
        let mean = col.iter().copied().sum::<T>() / T::of_usize(n);
        let shifted: Vec<T> = col.iter().map(|&v| v - mean).collect();
        centered.set_column(c, &shifted);
    }
    let cov = centered.t_matmul(&centered)?;
    let dec = symmetric_eigen(&cov)?;
    let mut out = Dense::zeros(n, 2);
    for axis in 0..d.min(2) {
        let u = dec.vector(d - 1 - axis);
        let proj = centered.matmul(&Dense::column_vector(&u))?;
        out.set_column(axis, proj.as_slice());
    }
    Ok(out)
}

/// Sample standard deviation (zero below two values).
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}
