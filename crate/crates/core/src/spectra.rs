//! Laplacian eigendecomposition, graph Fourier transforms and global/local
//! graph frequencies.

use crate::error::{Error, Result};
use crate::graph::{Graph, SparseOperator};
use crate::linalg::Dense;
use crate::scalar::Scalar;

/// Largest operator the dense eigensolver accepts by default.
pub const DEFAULT_DENSE_LIMIT: usize = 20_000;

/// Eigenpairs of a symmetric operator, eigenvalues ascending, eigenvectors
/// stored as the columns of `eigenvectors`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition<T> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: Dense<T>,
}

impl<T: Scalar> SpectralDecomposition<T> {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// The n-th eigenvector (0-based).
    pub fn vector(&self, n: usize) -> Vec<T> {
        self.eigenvectors.column(n)
    }

    /// `U · diag(g(λ)) · Uᵀ · x`
    pub fn apply_spectral(&self, response: impl Fn(T) -> T, x: &Dense<T>) -> Result<Dense<T>> {
        let mut s = fourier(&self.eigenvectors, x)?;
        for (n, &lambda) in self.eigenvalues.iter().enumerate() {
            let g = response(lambda);
            for v in s.row_mut(n) {
                *v *= g;
            }
        }
        inverse_fourier(&self.eigenvectors, &s)
    }
}

/// Full eigendecomposition of a symmetric sparse operator.
///
/// Eigenvectors follow a fixed sign convention: the entry of largest
/// magnitude is positive, ties going to the lowest index.
pub fn eigendecompose<T: Scalar>(op: &SparseOperator<T>) -> Result<SpectralDecomposition<T>> {
    eigendecompose_with_limit(op, DEFAULT_DENSE_LIMIT)
}

pub fn eigendecompose_with_limit<T: Scalar>(
    op: &SparseOperator<T>,
    limit: usize,
) -> Result<SpectralDecomposition<T>> {
    let n = op.dim();
    if n > limit {
        return Err(Error::TooLarge { n, limit });
    }
    if !op.check_symmetric() {
        return Err(Error::NotSymmetric);
    }
    symmetric_eigen(&op.to_dense())
}

/// Eigendecomposition of a dense symmetric matrix (Householder
/// tridiagonalization followed by implicit QL).
pub fn symmetric_eigen<T: Scalar>(a: &Dense<T>) -> Result<SpectralDecomposition<T>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::ShapeMismatch {
            op: "symmetric_eigen",
            left: a.shape(),
            right: a.shape(),
        });
    }
    if n == 0 {
        return Ok(SpectralDecomposition {
            eigenvalues: Vec::new(),
            eigenvectors: Dense::zeros(0, 0),
        });
    }
    let mut v: Vec<Vec<T>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tridiagonalize(&mut v, &mut d, &mut e);
    tridiagonal_ql(&mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap().then(i.cmp(&j)));
    let mut vectors = Dense::zeros(n, n);
    let tie = T::of(1e-10);
    for (col, &src) in order.iter().enumerate() {
        let mut u: Vec<T> = (0..n).map(|r| v[r][src]).collect();
        let max = u.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let lead = u
            .iter()
            .position(|x| x.abs() >= max * (T::one() - tie))
            .unwrap_or(0);
        if u[lead] < T::zero() {
            for x in &mut u {
                *x = -*x;
            }
        }
        vectors.set_column(col, &u);
    }
    Ok(SpectralDecomposition {
        eigenvalues: order.iter().map(|&i| d[i]).collect(),
        eigenvectors: vectors,
    })
}

// Householder reduction to tridiagonal form (after the EISPACK tred2 routine).
fn tridiagonalize<T: Scalar>(v: &mut [Vec<T>], d: &mut [T], e: &mut [T]) {
    let n = d.len();
    d.copy_from_slice(&v[n - 1][..n]);
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = T::zero();
                v[j][i] = T::zero();
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for j in 0..i {
                e[j] = T::zero();
            }
            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in j + 1..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let t = f * e[k] + g * d[k];
                    v[k][j] -= t;
                }
                d[j] = v[i - 1][j];
                v[i][j] = T::zero();
            }
        }
        d[i] = h;
    }
    // Accumulate transformations.
    for i in 0..n - 1 {
        v[n - 1][i] = v[i][i];
        v[i][i] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    let t = g * d[k];
                    v[k][j] -= t;
                }
            }
        }
        for k in 0..=i {
            v[k][i + 1] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = T::zero();
    }
    v[n - 1][n - 1] = T::one();
    e[0] = T::zero();
}

// Implicit QL iterations on the tridiagonal form (after EISPACK tql2).
fn tridiagonal_ql<T: Scalar>(v: &mut [Vec<T>], d: &mut [T], e: &mut [T]) -> Result<()> {
    const MAX_SWEEPS: usize = 60;
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();

    let mut f = T::zero();
    let mut tst1 = T::zero();
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_SWEEPS {
                    return Err(Error::NoConvergence);
                }
                let two = T::one() + T::one();
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    Ok(())
}

/// Dirichlet energy of `u` under the normalized Laplacian, summed edge by edge.
pub fn global_frequency<T: Scalar>(graph: &Graph<T>, u: &[T]) -> T {
    edge_energy(graph, u, graph.edges())
}

/// `uᵀ L̂ u`
pub fn rayleigh_quotient<T: Scalar>(op: &SparseOperator<T>, u: &[T]) -> T {
    let mut acc = T::zero();
    for (i, &ui) in u.iter().enumerate() {
        for (j, v) in op.row(i) {
            acc += ui * v * u[j];
        }
    }
    acc
}

fn edge_energy<T: Scalar>(graph: &Graph<T>, u: &[T], edges: &[(usize, usize)]) -> T {
    let scaled = |i: usize| u[i] / T::of_usize(graph.degree(i)).sqrt();
    edges.iter().fold(T::zero(), |acc, &(p, q)| {
        let diff = scaled(p) - scaled(q);
        acc + diff * diff
    })
}

/// Restriction of the edge-sum frequency to the edges induced by the k-hop
/// neighborhood of node `i` (global degrees are kept).
pub fn local_graph_frequency<T: Scalar>(graph: &Graph<T>, u: &[T], i: usize, k: usize) -> Result<T> {
    let hood = graph.k_hop(i, k)?;
    Ok(edge_energy(graph, u, &hood.edges))
}

/// `S = Uᵀ X`
pub fn fourier<T: Scalar>(u: &Dense<T>, x: &Dense<T>) -> Result<Dense<T>> {
    u.t_matmul(x)
}

/// `X = U S`
pub fn inverse_fourier<T: Scalar>(u: &Dense<T>, s: &Dense<T>) -> Result<Dense<T>> {
    u.matmul(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyBand {
    Low,
    Mid,
    High,
}

impl FrequencyBand {
    /// 1-based eigen-index after ascending sort: 1, ⌈N/2⌉, or N.
    pub fn eigen_index(self, n: usize) -> usize {
        match self {
            FrequencyBand::Low => 1,
            FrequencyBand::Mid => n.div_ceil(2).max(1),
            FrequencyBand::High => n,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FrequencyBand::Low => "low",
            FrequencyBand::Mid => "mid",
            FrequencyBand::High => "high",
        }
    }
}

impl std::str::FromStr for FrequencyBand {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(FrequencyBand::Low),
            "mid" | "middle" => Ok(FrequencyBand::Mid),
            "high" => Ok(FrequencyBand::High),
            other => Err(Error::InvalidArgument(format!("unknown frequency band {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FrequencyHistogram<T> {
    /// 1-based index into the ascending spectrum.
    pub eigen_index: usize,
    pub lambda_global: T,
    pub k: usize,
    /// `(node, λ_{n,i})` for nodes whose k-hop subgraph has edges.
    pub values: Vec<(usize, T)>,
}

pub fn frequency_histogram<T: Scalar>(
    graph: &Graph<T>,
    decomposition: &SpectralDecomposition<T>,
    band: FrequencyBand,
    k: usize,
) -> Result<FrequencyHistogram<T>> {
    if decomposition.is_empty() {
        return Err(Error::InvalidArgument("empty decomposition".into()));
    }
    let eigen_index = band.eigen_index(decomposition.len());
    let u = decomposition.vector(eigen_index - 1);
    let mut values = Vec::new();
    for i in 0..graph.num_nodes() {
        let hood = graph.k_hop(i, k)?;
        if hood.edges.is_empty() {
            continue;
        }
        values.push((i, edge_energy(graph, &u, &hood.edges)));
    }
    Ok(FrequencyHistogram {
        eigen_index,
        lambda_global: decomposition.eigenvalues[eigen_index - 1],
        k,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(usize, usize)], n: usize) -> Graph<f64> {
        Graph::build(edges, n, Dense::zeros(n, 1), vec![0; n], 1).unwrap()
    }

    #[test]
    fn k2_closed_form() {
        let g = graph(&[(0, 1)], 2);
        let dec = eigendecompose(&g.normalized_operators().laplacian).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!(dec.eigenvalues[0].abs() < 1e-14);
        assert!((dec.eigenvalues[1] - 2.0).abs() < 1e-14);
        let u0 = dec.vector(0);
        let u1 = dec.vector(1);
        assert!((u0[0] - h).abs() < 1e-14 && (u0[1] - h).abs() < 1e-14);
        assert!((u1[0] - h).abs() < 1e-14 && (u1[1] + h).abs() < 1e-14);

        assert!(global_frequency(&g, &u0).abs() < 1e-14);
        assert!((global_frequency(&g, &u1) - 2.0).abs() < 1e-14);

        let s = fourier(&dec.eigenvectors, &Dense::column_vector(&[1.0, 0.0])).unwrap();
        assert!((s[(0, 0)] - h).abs() < 1e-14 && (s[(1, 0)] - h).abs() < 1e-14);
    }

    #[test]
    fn triangle_spectrum() {
        let g = graph(&[(0, 1), (1, 2), (0, 2)], 3);
        let dec = eigendecompose(&g.normalized_operators().laplacian).unwrap();
        let expected = [0.0, 1.5, 1.5];
        for (got, want) in dec.eigenvalues.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
        // Mid band of N=3 is the 2nd eigenvalue.
        assert_eq!(FrequencyBand::Mid.eigen_index(3), 2);
    }

    #[test]
    fn edgeless_spectrum_is_diagonal() {
        let g = graph(&[], 4);
        let dec = eigendecompose(&g.normalized_operators().laplacian).unwrap();
        assert!(dec.eigenvalues.iter().all(|&l| l == 1.0));
    }

    #[test]
    fn rejects_asymmetric_and_oversized() {
        let m = Dense::from_vec(2, 2, vec![1.0, 2.0, 0.0, 1.0]).unwrap();
        let op = SparseOperator::from_dense(&m).unwrap();
        assert!(matches!(eigendecompose(&op), Err(Error::NotSymmetric)));
        let g = graph(&[(0, 1), (1, 2)], 3);
        assert!(matches!(
            eigendecompose_with_limit(&g.normalized_operators().laplacian, 2),
            Err(Error::TooLarge { n: 3, limit: 2 })
        ));
    }

    #[test]
    fn fourier_of_eigenvector_is_unit() {
        let g = graph(&[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)], 4);
        let dec = eigendecompose(&g.normalized_operators().laplacian).unwrap();
        let x = Dense::column_vector(&dec.vector(0));
        let s = fourier(&dec.eigenvectors, &x).unwrap();
        assert!((s[(0, 0)] - 1.0).abs() < 1e-12);
        for n in 1..4 {
            assert!(s[(n, 0)].abs() < 1e-12);
        }
    }

    #[test]
    fn path_endpoint_local_frequency_is_single_edge() {
        let g = graph(&[(0, 1), (1, 2)], 3);
        let dec = eigendecompose(&g.normalized_operators().laplacian).unwrap();
        let u = dec.vector(2);
        let local = local_graph_frequency(&g, &u, 0, 1).unwrap();
        let single = (u[0] / 1.0 - u[1] / 2f64.sqrt()).powi(2);
        assert!((local - single).abs() < 1e-14);
        // Full coverage reproduces the eigenvalue.
        let full = local_graph_frequency(&g, &u, 1, 1).unwrap();
        assert!((full - dec.eigenvalues[2]).abs() < 1e-12);
    }

    #[test]
    fn low_band_histogram_is_zero_on_connected_graph() {
        let g = graph(&[(0, 1), (1, 2), (2, 3), (1, 3)], 4);
        let dec = eigendecompose(&g.normalized_operators().laplacian).unwrap();
        let h = frequency_histogram(&g, &dec, FrequencyBand::Low, 2).unwrap();
        assert_eq!(h.eigen_index, 1);
        assert_eq!(h.values.len(), 4);
        assert!(h.values.iter().all(|&(_, v)| v.abs() < 1e-14));
    }

    #[test]
    fn histogram_drops_isolated_nodes() {
        let g = graph(&[(0, 1)], 3);
        let dec = eigendecompose(&g.normalized_operators().laplacian).unwrap();
        let h = frequency_histogram(&g, &dec, FrequencyBand::High, 1).unwrap();
        assert_eq!(h.values.iter().map(|v| v.0).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn single_precision_instantiation() {
        let g: Graph<f32> =
            Graph::build(&[(0, 1), (1, 2), (0, 2)], 3, Dense::zeros(3, 1), vec![0; 3], 1).unwrap();
        let dec = eigendecompose(&g.normalized_operators().laplacian).unwrap();
        assert!((dec.eigenvalues[2] - 1.5).abs() < 1e-5);
    }
}
