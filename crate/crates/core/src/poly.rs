//! Polynomial filter bases on the Laplacian spectrum `[0, 2]`, shared
//! (homogeneous) and per-node (diverse) filtering, and coefficient rescaling
//! under `λ ↦ ξλ`.
//!
//! Three bases are supported:
//!
//! * `Monomial`: `P_k(λ) = (1 − λ)^k`, i.e. powers of `Â`.
//! * `Bernstein` of order `K`: `P_k(λ) = 2^{-K} C(K,k) (2 − λ)^{K−k} λ^k`.
//! * `Jacobi(a, b)`: `P_k^{a,b}(1 − λ)` through the three-term recurrence.
//!
//! Matrix application never touches an eigendecomposition; it runs the same
//! recurrences through [`SignalAlgebra`], which is implemented both for plain
//! dense matrices and for the autodiff tape.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::GraphOperators;
use crate::linalg::{solve, Dense};
use crate::rng::{rng_for, stream};
use crate::scalar::{Field, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub enum BasisKind<F> {
    Monomial,
    Bernstein,
    Jacobi { a: F, b: F },
}

impl<F: Field> BasisKind<F> {
    pub fn jacobi(a: F, b: F) -> Result<Self> {
        let minus_one = -F::one();
        if a <= minus_one || b <= minus_one {
            return Err(Error::InvalidArgument(format!(
                "Jacobi parameters must exceed -1, got a={a:?}, b={b:?}"
            )));
        }
        Ok(BasisKind::Jacobi { a, b })
    }

    pub fn name(&self) -> &'static str {
        match self {
            BasisKind::Monomial => "monomial",
            BasisKind::Bernstein => "bernstein",
            BasisKind::Jacobi { .. } => "jacobi",
        }
    }
}

fn binomial(n: usize, k: usize) -> i64 {
    let k = k.min(n - k);
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

/// Coefficients `(A_n, B_n, C_n)` of
/// `P_n(x) = (A_n x + B_n) P_{n−1}(x) − C_n P_{n−2}(x)` for `n ≥ 2`.
fn jacobi_recurrence<F: Field>(n: usize, a: &F, b: &F) -> (F, F, F) {
    let n_f = F::from_int(n as i64);
    let two = F::from_int(2);
    let ab = a.clone() + b.clone();
    let s = two.clone() * n_f.clone() + ab.clone();
    let one = F::one();
    let den = two.clone() * n_f.clone() * (n_f.clone() + ab) * (s.clone() - two.clone());
    let lead = s.clone() - one.clone();
    let a_n = lead.clone() * s.clone() * (s.clone() - two.clone()) / den.clone();
    let b_n = lead * (a.clone() * a.clone() - b.clone() * b.clone()) / den.clone();
    let c_n = two
        * (n_f.clone() + a.clone() - one.clone())
        * (n_f + b.clone() - one)
        * s
        / den;
    (a_n, b_n, c_n)
}

/// Evaluates every basis function `P_0..P_K` at `lambda`.
pub fn basis_values<F: Field>(kind: &BasisKind<F>, order: usize, lambda: F) -> Vec<F> {
    let one = F::one();
    let two = F::from_int(2);
    match kind {
        BasisKind::Monomial => {
            let x = one.clone() - lambda;
            let mut out = Vec::with_capacity(order + 1);
            let mut p = one;
            for _ in 0..=order {
                out.push(p.clone());
                p = p * x.clone();
            }
            out
        }
        BasisKind::Bernstein => {
            let scale = F::ratio(1, 1i64 << order);
            (0..=order)
                .map(|k| {
                    let mut v = scale.clone() * F::from_int(binomial(order, k));
                    for _ in 0..order - k {
                        v = v * (two.clone() - lambda.clone());
                    }
                    for _ in 0..k {
                        v = v * lambda.clone();
                    }
                    v
                })
                .collect()
        }
        BasisKind::Jacobi { a, b } => {
            let x = one.clone() - lambda;
            let mut out = Vec::with_capacity(order + 1);
            out.push(one.clone());
            if order >= 1 {
                out.push(
                    (a.clone() - b.clone()) / two.clone()
                        + (a.clone() + b.clone() + two.clone()) * x.clone() / two,
                );
            }
            for n in 2..=order {
                let (a_n, b_n, c_n) = jacobi_recurrence(n, a, b);
                let next = (a_n * x.clone() + b_n) * out[n - 1].clone() - c_n * out[n - 2].clone();
                out.push(next);
            }
            out
        }
    }
}

/// `P_k(λ)` for a polynomial of order `order` (the Bernstein basis depends on it).
pub fn basis_eval<F: Field>(kind: &BasisKind<F>, k: usize, order: usize, lambda: F) -> Result<F> {
    if k > order {
        if matches!(kind, BasisKind::Bernstein) {
            return Err(Error::OrderOutOfRange { k, order });
        }
        return Ok(basis_values(kind, k, lambda).pop().unwrap());
    }
    Ok(basis_values(kind, order, lambda).swap_remove(k))
}

/// Which normalized operator a propagation step multiplies by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Propagator {
    Adjacency,
    Laplacian,
    /// `2I − L̂`
    Shifted,
}

/// Linear operations on graph signals needed to run basis recurrences.
pub trait SignalAlgebra<T> {
    type Signal: Clone;

    fn propagate(&mut self, by: Propagator, x: &Self::Signal) -> Result<Self::Signal>;
    /// `a·x + b·y`
    fn combine(&mut self, a: T, x: &Self::Signal, b: T, y: &Self::Signal) -> Result<Self::Signal>;
    fn scale(&mut self, a: T, x: &Self::Signal) -> Self::Signal;
}

/// [`SignalAlgebra`] on plain dense matrices.
pub struct DenseAlgebra<'a, T> {
    pub ops: &'a GraphOperators<T>,
}

impl<T: Scalar> SignalAlgebra<T> for DenseAlgebra<'_, T> {
    type Signal = Dense<T>;

    fn propagate(&mut self, by: Propagator, x: &Dense<T>) -> Result<Dense<T>> {
        match by {
            Propagator::Adjacency => self.ops.adjacency.matmul(x),
            Propagator::Laplacian => self.ops.laplacian.matmul(x),
            Propagator::Shifted => self.ops.shifted.matmul(x),
        }
    }

    fn combine(&mut self, a: T, x: &Dense<T>, b: T, y: &Dense<T>) -> Result<Dense<T>> {
        x.zip_map(y, "combine", |p, q| a * p + b * q)
    }

    fn scale(&mut self, a: T, x: &Dense<T>) -> Dense<T> {
        x.scale(a)
    }
}

/// Runs the basis recurrence: returns `[P_k(L̂) x]` for `k = 0..=order`.
pub fn apply_basis_with<T: Scalar, A: SignalAlgebra<T>>(
    alg: &mut A,
    kind: &BasisKind<T>,
    order: usize,
    x: &A::Signal,
) -> Result<Vec<A::Signal>> {
    let mut terms = Vec::with_capacity(order + 1);
    match kind {
        BasisKind::Monomial => {
            terms.push(x.clone());
            for k in 1..=order {
                let next = alg.propagate(Propagator::Adjacency, &terms[k - 1])?;
                terms.push(next);
            }
        }
        BasisKind::Bernstein => {
            let mut lap_powers = Vec::with_capacity(order + 1);
            lap_powers.push(x.clone());
            for k in 1..=order {
                let next = alg.propagate(Propagator::Laplacian, &lap_powers[k - 1])?;
                lap_powers.push(next);
            }
            let scale = T::one() / T::of(2f64.powi(order as i32));
            for (k, base) in lap_powers.iter().enumerate() {
                let mut y = base.clone();
                for _ in 0..order - k {
                    y = alg.propagate(Propagator::Shifted, &y)?;
                }
                let c = scale * T::of(binomial(order, k) as f64);
                terms.push(alg.scale(c, &y));
            }
        }
        BasisKind::Jacobi { a, b } => {
            let (a, b) = (*a, *b);
            let two = T::of(2.0);
            terms.push(x.clone());
            if order >= 1 {
                let ax = alg.propagate(Propagator::Adjacency, x)?;
                let p1 = alg.combine((a - b) / two, x, (a + b + two) / two, &ax)?;
                terms.push(p1);
            }
            for n in 2..=order {
                let (a_n, b_n, c_n) = jacobi_recurrence(n, &a, &b);
                let ap = alg.propagate(Propagator::Adjacency, &terms[n - 1])?;
                let partial = alg.combine(a_n, &ap, b_n, &terms[n - 1])?;
                let next = alg.combine(T::one(), &partial, -c_n, &terms[n - 2])?;
                terms.push(next);
            }
        }
    }
    Ok(terms)
}

/// `[P_k(L̂) X]_{k=0..=order}` on dense matrices.
pub fn apply_basis<T: Scalar>(
    kind: &BasisKind<T>,
    order: usize,
    ops: &GraphOperators<T>,
    x: &Dense<T>,
) -> Result<Vec<Dense<T>>> {
    if x.rows() != ops.adjacency.dim() {
        return Err(Error::ShapeMismatch {
            op: "apply_basis",
            left: (ops.adjacency.dim(), ops.adjacency.dim()),
            right: x.shape(),
        });
    }
    apply_basis_with(&mut DenseAlgebra { ops }, kind, order, x)
}

/// Filter weights: one vector shared by every node or one row per node.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientSet<T> {
    Shared(Vec<T>),
    /// `N × (K+1)`, entry `(i, k)` is `β_{k,i}`.
    PerNode(Dense<T>),
}

impl<T: Scalar> CoefficientSet<T> {
    pub fn order(&self) -> usize {
        match self {
            CoefficientSet::Shared(a) => a.len().saturating_sub(1),
            CoefficientSet::PerNode(b) => b.cols().saturating_sub(1),
        }
    }
}

/// `Σ_k α_k terms[k]`, accumulated left to right.
pub fn combine_shared<T: Scalar>(terms: &[Dense<T>], alpha: &[T]) -> Result<Dense<T>> {
    if terms.len() != alpha.len() || terms.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} coefficients for {} basis terms",
            alpha.len(),
            terms.len()
        )));
    }
    let mut z = Dense::zeros(terms[0].rows(), terms[0].cols());
    for (t, &a) in terms.iter().zip(alpha) {
        z.axpy(a, t)?;
    }
    Ok(z)
}

/// Row `i` of the result is `Σ_k B[i][k] · terms[k][i]`, accumulated left to right.
pub fn combine_per_node<T: Scalar>(terms: &[Dense<T>], weights: &Dense<T>) -> Result<Dense<T>> {
    if terms.is_empty() || weights.cols() != terms.len() {
        return Err(Error::InvalidArgument(format!(
            "{} weight columns for {} basis terms",
            weights.cols(),
            terms.len()
        )));
    }
    let (n, d) = terms[0].shape();
    if weights.rows() != n {
        return Err(Error::RowCount(weights.rows(), n));
    }
    let mut z = Dense::zeros(n, d);
    for (k, t) in terms.iter().enumerate() {
        for i in 0..n {
            let beta = weights[(i, k)];
            for (o, &v) in z.row_mut(i).iter_mut().zip(t.row(i)) {
                *o += beta * v;
            }
        }
    }
    Ok(z)
}

/// `Z = Σ_k α_k P_k(L̂) X`
pub fn homogeneous_filter<T: Scalar>(
    coeffs: &CoefficientSet<T>,
    kind: &BasisKind<T>,
    ops: &GraphOperators<T>,
    x: &Dense<T>,
) -> Result<Dense<T>> {
    let CoefficientSet::Shared(alpha) = coeffs else {
        return Err(Error::InvalidArgument(
            "homogeneous filtering needs shared coefficients".into(),
        ));
    };
    if alpha.is_empty() {
        return Err(Error::InvalidArgument("empty coefficient vector".into()));
    }
    let terms = apply_basis(kind, alpha.len() - 1, ops, x)?;
    combine_shared(&terms, alpha)
}

/// `Z = Σ_k diag(β_{k,·}) P_k(L̂) X` with `B` given as `N × (K+1)`.
pub fn diverse_filter<T: Scalar>(
    weights: &Dense<T>,
    kind: &BasisKind<T>,
    ops: &GraphOperators<T>,
    x: &Dense<T>,
) -> Result<Dense<T>> {
    if weights.rows() != x.rows() {
        return Err(Error::RowCount(weights.rows(), x.rows()));
    }
    if weights.cols() == 0 {
        return Err(Error::InvalidArgument("empty coefficient matrix".into()));
    }
    let terms = apply_basis(kind, weights.cols() - 1, ops, x)?;
    combine_per_node(&terms, weights)
}

/// `g(λ) = Σ_k w_k P_k(λ)` on every grid point.
pub fn filter_response<T: Scalar>(weights: &[T], kind: &BasisKind<T>, grid: &[T]) -> Vec<T> {
    if weights.is_empty() {
        return vec![T::zero(); grid.len()];
    }
    let order = weights.len() - 1;
    grid.iter()
        .map(|&lambda| {
            basis_values(kind, order, lambda)
                .iter()
                .zip(weights)
                .fold(T::zero(), |acc, (&p, &w)| acc + w * p)
        })
        .collect()
}

/// `points` evenly spaced values covering `[0, 2]`.
pub fn spectrum_grid<T: Scalar>(points: usize) -> Vec<T> {
    match points {
        0 => Vec::new(),
        1 => vec![T::zero()],
        _ => (0..points)
            .map(|i| T::of(2.0 * i as f64 / (points - 1) as f64))
            .collect(),
    }
}

/// Number of grid points used to verify [`rescale_coefficients`].
pub const RESCALE_CHECK_POINTS: usize = 64;

fn chebyshev_nodes<T: Scalar>(count: usize) -> Vec<T> {
    (0..count)
        .map(|j| {
            let theta = std::f64::consts::PI * (2 * j + 1) as f64 / (2 * count) as f64;
            T::of(1.0 - theta.cos())
        })
        .collect()
}

/// Coefficients `β` in the same basis with `Σ α_k P_k(ξ·x) = Σ β_k P_k(x)`.
///
/// Goes through the power series: `α` is converted to monomial coefficients
/// by interpolation at Chebyshev nodes on `[0, 2]`, each degree-`k`
/// coefficient is multiplied by `ξ^k`, and the result is converted back.
/// The monomials are taken in `x/2` so the Vandermonde system stays
/// well-conditioned up to order 10 and beyond.
pub fn rescale_coefficients<T: Scalar>(alpha: &[T], xi: T, kind: &BasisKind<T>) -> Result<Vec<T>> {
    if alpha.is_empty() {
        return Err(Error::InvalidArgument("empty coefficient vector".into()));
    }
    if xi == T::one() {
        return Ok(alpha.to_vec());
    }
    let order = alpha.len() - 1;
    let nodes = chebyshev_nodes::<T>(order + 1);
    let half = T::of(0.5);

    let vandermonde: Vec<Vec<T>> = nodes
        .iter()
        .map(|&x| {
            let t = x * half;
            let mut p = T::one();
            (0..=order)
                .map(|_| {
                    let v = p;
                    p *= t;
                    v
                })
                .collect()
        })
        .collect();
    let f_at_nodes = filter_response(alpha, kind, &nodes);
    let mut power = solve(&vandermonde, &f_at_nodes)?;

    let mut xi_k = T::one();
    for w in power.iter_mut() {
        *w *= xi_k;
        xi_k *= xi;
    }

    let g_at_nodes: Vec<T> = vandermonde
        .iter()
        .map(|row| row.iter().zip(&power).fold(T::zero(), |acc, (&v, &w)| acc + v * w))
        .collect();
    let basis_matrix: Vec<Vec<T>> = nodes
        .iter()
        .map(|&x| basis_values(kind, order, x))
        .collect();
    solve(&basis_matrix, &g_at_nodes)
}

/// `max |Σ α_k P_k(ξx) − Σ β_k P_k(x)|` over `points` grid values of `x ∈ [0, 2]`.
pub fn rescale_error<T: Scalar>(
    alpha: &[T],
    beta: &[T],
    xi: T,
    kind: &BasisKind<T>,
    points: usize,
) -> T {
    let grid = spectrum_grid::<T>(points);
    let scaled: Vec<T> = grid.iter().map(|&x| xi * x).collect();
    let f = filter_response(alpha, kind, &scaled);
    let g = filter_response(beta, kind, &grid);
    f.iter()
        .zip(&g)
        .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
}

/// Worst case over randomized [`rescale_coefficients`] checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleReport {
    pub trials: usize,
    pub max_error: f64,
    /// `ξ` of the worst trial.
    pub worst_xi: f64,
}

/// Runs `trials` checks with `α_k ~ U(−1, 1)` and `ξ ~ U(0.05, 1)` (or the
/// fixed `xi`), each measured by [`rescale_error`] on
/// [`RESCALE_CHECK_POINTS`] grid points.
pub fn rescale_trials<T: Scalar>(
    kind: &BasisKind<T>,
    order: usize,
    trials: usize,
    seed: u64,
    xi: Option<f64>,
) -> Result<RescaleReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let mut rng = rng_for(seed, &[stream::TRIALS]);
    let mut report = RescaleReport {
        trials,
        max_error: 0.0,
        worst_xi: f64::NAN,
    };
    for trial in 0..trials {
        let alpha: Vec<T> = (0..=order).map(|_| T::of(rng.gen_range(-1.0..=1.0))).collect();
        let x = xi.unwrap_or_else(|| rng.gen_range(0.05..=1.0));
        let beta = rescale_coefficients(&alpha, T::of(x), kind)?;
        let err = rescale_error(&alpha, &beta, T::of(x), kind, RESCALE_CHECK_POINTS).as_f64();
        if trial == 0 || !(err <= report.max_error) {
            report.max_error = err;
            report.worst_xi = x;
        }
    }
    Ok(report)
}
