//! Seeded random graphs for tests, demos and smoke runs.

use rand::Rng as _;

use crate::error::Result;
use crate::graph::Graph;
use crate::linalg::Dense;
use crate::rng::{rng_for, Rng};
use crate::scalar::Scalar;

fn uniform_features<T: Scalar>(n: usize, f: usize, rng: &mut Rng) -> Dense<T> {
    let data = (0..n * f).map(|_| T::of(rng.gen_range(-1.0..1.0))).collect();
    Dense::from_vec(n, f, data).expect("length matches shape")
}

/// `G(n, p)` with uniform random labels and features in `[-1, 1)`.
pub fn erdos_renyi<T: Scalar>(
    n: usize,
    p: f64,
    num_features: usize,
    num_classes: usize,
    seed: u64,
) -> Result<Graph<T>> {
    let mut rng = rng_for(seed, &[0xE5]);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let labels = (0..n).map(|_| rng.gen_range(0..num_classes)).collect();
    let features = uniform_features(n, num_features, &mut rng);
    Graph::build(&edges, n, features, labels, num_classes)
}

/// Two-block-type stochastic block model with balanced classes: nodes of the
/// same class connect with probability `p_in`, others with `p_out`
/// (`p_out > p_in` gives a heterophilic graph). Features are a class
/// prototype scaled by `signal` plus uniform noise.
pub fn block_model<T: Scalar>(
    n: usize,
    num_classes: usize,
    p_in: f64,
    p_out: f64,
    num_features: usize,
    signal: f64,
    seed: u64,
) -> Result<Graph<T>> {
    let mut rng = rng_for(seed, &[0x5B]);
    let labels: Vec<usize> = (0..n).map(|i| i % num_classes).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let prototypes = uniform_features::<T>(num_classes, num_features, &mut rng);
    let mut features = uniform_features::<T>(n, num_features, &mut rng);
    for i in 0..n {
        let proto = prototypes.row(labels[i]).to_vec();
        for (x, p) in features.row_mut(i).iter_mut().zip(proto) {
            *x += T::of(signal) * p;
        }
    }
    Graph::build(&edges, n, features, labels, num_classes)
}
