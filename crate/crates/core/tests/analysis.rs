use dsf_core::analysis::{cluster_weights, centroid_curves, pca_2d, sample_std};
use dsf_core::poly::{filter_response, spectrum_grid};
use dsf_core::rng::rng_for;
use dsf_core::{BasisKind, Dense};
use proptest::prelude::*;
use rand::Rng as _;

fn blobs(n: usize, dim: usize, seed: u64) -> Dense {
    let mut rng = rng_for(seed, &[]);
    let mut m = Dense::zeros(n, dim);
    for i in 0..n {
        let center = (i % 4) as f64 * 3.0;
        for v in m.row_mut(i) {
            *v = center + rng.gen_range(-1.0..1.0);
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn inertia_never_increases(n in 5..80usize, dim in 1..6usize, k in 1..6usize, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let b = blobs(n, dim, seed);
        let c = cluster_weights(&b, k, seed).unwrap();
        for w in c.inertia_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
        prop_assert!(c.iterations <= 300);
        prop_assert!(c.assignments.iter().all(|&a| a < k));
        prop_assert_eq!(c.inertia_trace.len(), c.iterations);
    }

    #[test]
    fn centroid_curve_is_the_member_average(n in 8..60usize, seed in any::<u64>()) {
        let order = 4;
        let b = blobs(n, order + 1, seed);
        let c = cluster_weights(&b, 3, seed).unwrap();
        let kind = BasisKind::jacobi(1.0, 1.0).unwrap();
        let grid: Vec<f64> = spectrum_grid(21);
        let curves = centroid_curves(&c, &kind, &grid);
        for (cluster, curve) in curves.iter().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| c.assignments[i] == cluster).collect();
            if members.is_empty() {
                continue;
            }
            let mut mean = vec![0.0; grid.len()];
            for &i in &members {
                for (m, v) in mean.iter_mut().zip(filter_response(b.row(i), &kind, &grid)) {
                    *m += v / members.len() as f64;
                }
            }
            for (a, e) in curve.iter().zip(&mean) {
                prop_assert!((a - e).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn clustering_is_seeded() {
    let b = blobs(50, 3, 1);
    let a = cluster_weights(&b, 4, 7).unwrap();
    let again = cluster_weights(&b, 4, 7).unwrap();
    assert_eq!(a.assignments, again.assignments);
    assert!(cluster_weights(&b, 0, 7).is_err());
    assert!(cluster_weights(&b, 51, 7).is_err());
}

#[test]
fn projection_orders_axes_by_variance() {
    let b = blobs(40, 4, 3);
    let p = pca_2d(&b).unwrap();
    assert_eq!(p.shape(), (40, 2));
    let (c0, c1) = (p.column(0), p.column(1));
    assert!(c0.iter().sum::<f64>().abs() < 1e-9 && c1.iter().sum::<f64>().abs() < 1e-9);
    assert!(sample_std(&c0) >= sample_std(&c1));
    let dot: f64 = c0.iter().zip(&c1).map(|(x, y)| x * y).sum();
    assert!(dot.abs() < 1e-8);
}

#[test]
fn sample_std_examples() {
    assert_eq!(sample_std(&[4.0]), 0.0);
    assert!((sample_std(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
}
