//! Undirected graphs with node features and labels, the symmetric
//! normalized adjacency/Laplacian pair, and label-locality diagnostics.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::Dense;
use crate::scalar::Scalar;

/// Simple undirected graph with node features and integer class labels.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted lexicographically.
#[derive(Debug, Clone)]
pub struct Graph<T> {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    features: Dense<T>,
    labels: Vec<usize>,
    class_count: usize,
}

/// Symmetric-normalized operators of a graph.
#[derive(Debug, Clone)]
pub struct GraphOperators<T> {
    /// `Â = D^{-1/2} A D^{-1/2}`
    pub adjacency: SparseOperator<T>,
    /// `L̂ = I − Â`
    pub laplacian: SparseOperator<T>,
    /// `2I − L̂ = I + Â`, the complementary factor of the Bernstein basis.
    pub shifted: SparseOperator<T>,
}

/// Node set and induced edge set of a k-hop neighborhood.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    pub nodes: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

impl<T: Scalar> Graph<T> {
    /// Builds a graph from a raw edge list: symmetrizes, drops self-loops and
    /// duplicate edges.
    pub fn build(
        edge_list: &[(usize, usize)],
        num_nodes: usize,
        features: Dense<T>,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        if features.rows() != num_nodes {
            return Err(Error::RowCount(features.rows(), num_nodes));
        }
        if labels.len() != num_nodes {
            return Err(Error::RowCount(labels.len(), num_nodes));
        }
        if let Some((node, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= class_count) {
            return Err(Error::LabelOutOfRange {
                node,
                label,
                class_count,
            });
        }
        let mut edges = Vec::with_capacity(edge_list.len());
        for &(a, b) in edge_list {
            for index in [a, b] {
                if index >= num_nodes {
                    return Err(Error::NodeOutOfRange { index, num_nodes });
                }
            }
            if a != b {
                edges.push((a.min(b), a.max(b)));
            }
        }
        edges.sort_unstable();
        edges.dedup();

        let mut neighbors = vec![Vec::new(); num_nodes];
        for &(u, v) in &edges {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Graph {
            num_nodes,
            edges,
            neighbors,
            features,
            labels,
            class_count,
        })
    }

    /// Same as [`Graph::build`] with features given as rows, so ragged input is reported.
    pub fn from_feature_rows(
        edge_list: &[(usize, usize)],
        num_nodes: usize,
        features: &[Vec<T>],
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        let features = if features.is_empty() {
            Dense::zeros(num_nodes, 0)
        } else {
            Dense::from_rows(features)?
        };
        Self::build(edge_list, num_nodes, features, labels, class_count)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn features(&self) -> &Dense<T> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    /// Returns the graph with the same content but node `i` renamed to `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let edges: Vec<_> = self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        let mut labels = vec![0; self.num_nodes];
        for (i, &p) in perm.iter().enumerate() {
            labels[p] = self.labels[i];
        }
        Self::build(
            &edges,
            self.num_nodes,
            self.features.permute_rows(perm),
            labels,
            self.class_count,
        )
    }

    /// Returns the same nodes, features and labels with a different edge set.
    pub fn with_edges(&self, edge_list: &[(usize, usize)]) -> Result<Self> {
        Self::build(
            edge_list,
            self.num_nodes,
            self.features.clone(),
            self.labels.clone(),
            self.class_count,
        )
    }

    fn inv_sqrt_degrees(&self) -> Vec<T> {
        self.neighbors
            .iter()
            .map(|n| {
                if n.is_empty() {
                    T::zero()
                } else {
                    T::one() / T::of_usize(n.len()).sqrt()
                }
            })
            .collect()
    }

    /// `Â` and `L̂ = I − Â`. Isolated nodes get a zero row in `Â`.
    pub fn normalized_operators(&self) -> GraphOperators<T> {
        let inv = self.inv_sqrt_degrees();
        let n = self.num_nodes;
        let mut adj = Vec::with_capacity(n);
        let mut lap = Vec::with_capacity(n);
        let mut shifted = Vec::with_capacity(n);
        for i in 0..n {
            let row: Vec<(usize, T)> = self.neighbors[i]
                .iter()
                .map(|&j| (j, inv[i] * inv[j]))
                .collect();
            let with_diag = |diag: T, sign: T| {
                let mut r: Vec<(usize, T)> = row.iter().map(|&(j, v)| (j, sign * v)).collect();
                let pos = r.partition_point(|&(j, _)| j < i);
                r.insert(pos, (i, diag));
                r
            };
            lap.push(with_diag(T::one(), -T::one()));
            shifted.push(with_diag(T::one(), T::one()));
            adj.push(row);
        }
        GraphOperators {
            adjacency: SparseOperator::from_rows(n, adj, true),
            laplacian: SparseOperator::from_rows(n, lap, true),
            shifted: SparseOperator::from_rows(n, shifted, true),
        }
    }

    /// Random-walk transition matrix `A D^{-1}` (column-stochastic on non-isolated nodes).
    pub fn random_walk_operator(&self) -> SparseOperator<T> {
        let rows = (0..self.num_nodes)
            .map(|i| {
                self.neighbors[i]
                    .iter()
                    .map(|&j| (j, T::one() / T::of_usize(self.degree(j))))
                    .collect()
            })
            .collect();
        SparseOperator::from_rows(self.num_nodes, rows, false)
    }

    /// Fraction of edges joining same-label endpoints.
    pub fn edge_homophily(&self) -> Result<f64> {
        homophily_of(&self.edges, &self.labels).ok_or(Error::EmptyEdgeSet)
    }

    /// Nodes within hop distance `k` of `i` (including `i`) and the edges
    /// they induce.
    pub fn k_hop(&self, i: usize, k: usize) -> Result<Neighborhood> {
        if i >= self.num_nodes {
            return Err(Error::NodeOutOfRange {
                index: i,
                num_nodes: self.num_nodes,
            });
        }
        let mut dist = vec![usize::MAX; self.num_nodes];
        dist[i] = 0;
        let mut queue = VecDeque::from([i]);
        let mut nodes = vec![i];
        while let Some(u) = queue.pop_front() {
            if dist[u] == k {
                continue;
            }
            for &v in &self.neighbors[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    nodes.push(v);
                    queue.push_back(v);
                }
            }
        }
        nodes.sort_unstable();
        let mut edges = Vec::new();
        for &u in &nodes {
            for &v in &self.neighbors[u] {
                if u < v && dist[v] != usize::MAX {
                    edges.push((u, v));
                }
            }
        }
        edges.sort_unstable();
        Ok(Neighborhood { nodes, edges })
    }

    /// Edge homophily of the subgraph induced by the k-hop neighborhood of
    /// `i`; `None` when that subgraph has no edges.
    pub fn local_label_homophily(&self, i: usize, k: usize) -> Result<Option<f64>> {
        let hood = self.k_hop(i, k)?;
        Ok(homophily_of(&hood.edges, &self.labels))
    }
}

fn homophily_of(edges: &[(usize, usize)], labels: &[usize]) -> Option<f64> {
    if edges.is_empty() {
        return None;
    }
    let same = edges.iter().filter(|&&(u, v)| labels[u] == labels[v]).count();
    Some(same as f64 / edges.len() as f64)
}

/// Square sparse matrix in compressed-row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator<T> {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
    symmetric: bool,
}

impl<T: Scalar> SparseOperator<T> {
    /// Rows must list `(column, value)` pairs in increasing column order.
    pub fn from_rows(dim: usize, rows: Vec<Vec<(usize, T)>>, symmetric: bool) -> Self {
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        SparseOperator {
            dim,
            row_ptr,
            col_idx,
            values,
            symmetric,
        }
    }

    pub fn from_dense(m: &Dense<T>) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::ShapeMismatch {
                op: "sparse_from_dense",
                left: m.shape(),
                right: m.shape(),
            });
        }
        let rows = (0..m.rows())
            .map(|r| {
                m.row(r)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != T::zero())
                    .map(|(c, &v)| (c, v))
                    .collect()
            })
            .collect();
        let mut op = Self::from_rows(m.rows(), rows, false);
        op.symmetric = op.check_symmetric();
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Whether the operator was built as symmetric.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.row(r)
            .find(|&(j, _)| j == c)
            .map_or(T::zero(), |(_, v)| v)
    }

    /// Verifies `(i,j) == (j,i)` for every stored entry.
    pub fn check_symmetric(&self) -> bool {
        (0..self.dim).all(|r| self.row(r).all(|(c, v)| self.get(c, r) == v))
    }

    pub fn to_dense(&self) -> Dense<T> {
        let mut m = Dense::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// `self · x` for a dense `x` with `dim` rows.
    pub fn matmul(&self, x: &Dense<T>) -> Result<Dense<T>> {
        if x.rows() != self.dim {
            return Err(Error::ShapeMismatch {
                op: "spmm",
                left: (self.dim, self.dim),
                right: x.shape(),
            });
        }
        let mut out = Dense::zeros(self.dim, x.cols());
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                let src = x.row(c).to_vec();
                for (o, s) in out.row_mut(r).iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · x`
    pub fn t_matmul(&self, x: &Dense<T>) -> Result<Dense<T>> {
        if self.symmetric {
            return self.matmul(x);
        }
        if x.rows() != self.dim {
            return Err(Error::ShapeMismatch {
                op: "spmm_t",
                left: (self.dim, self.dim),
                right: x.shape(),
            });
        }
        let mut out = Dense::zeros(self.dim, x.cols());
        for r in 0..self.dim {
            let src = x.row(r).to_vec();
            for (c, v) in self.row(r) {
                for (o, &s) in out.row_mut(c).iter_mut().zip(&src) {
                    *o += v * s;
                }
            }
        }
        Ok(out)
    }
}
