use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geometry::Norm;
use crate::linalg::norm2;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic seed derived from a base seed and the bit patterns of a point.
pub fn point_seed(seed: u64, x: &[f64]) -> u64 {
    x.iter()
        .fold(mix64(seed), |h, v| mix64(h ^ v.to_bits()))
}

/// Uniform in `[0, 1]` from a seed.
pub fn unit_from_seed(seed: u64) -> f64 {
    (mix64(seed) >> 11) as f64 / ((1u64 << 53) - 1) as f64
}

/// `f_val - delta * u` with `u` in `[0, 1]` drawn from the seed.
pub fn perturb_value(f_val: f64, delta: f64, seed: u64) -> f64 {
    if delta == 0.0 {
        return f_val;
    }
    f_val - delta * unit_from_seed(seed)
}

/// `g + e` with `|e|_* = radius` exactly. For the l2 norm `e` points in a random
/// direction; for the l1 norm (dual l-inf) `e` is a random sign vector.
pub fn perturb_gradient(g: &[f64], radius: f64, seed: u64, norm: Norm) -> Vec<f64> {
    if radius == 0.0 || g.is_empty() {
        return g.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e: Vec<f64> = match norm {
        Norm::L2 => loop {
            let d: Vec<f64> = (0..g.len()).map(|_| rng.sample(StandardNormal)).collect();
            let len = norm2(&d);
            if len > 1e-12 {
                break d.into_iter().map(|v| radius * v / len).collect();
            }
        },
        Norm::L1 => (0..g.len())
            .map(|_| if rng.random::<bool>() { radius } else { -radius })
            .collect(),
    };
    g.iter().zip(e).map(|(a, b)| a + b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm_inf, sub};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_perturbations_are_identities() {
        assert_eq!(perturb_gradient(&[1.0, -2.0], 0.0, 3, Norm::L2), vec![1.0, -2.0]);
        assert_eq!(perturb_value(1.25, 0.0, 3), 1.25);
    }

    #[test]
    fn gradient_perturbation_hits_the_boundary() {
        let out = perturb_gradient(&[1.0, 0.0], 0.1, 42, Norm::L2);
        assert_abs_diff_eq!(norm2(&sub(&out, &[1.0, 0.0])), 0.1, epsilon = 1e-12);
        let out = perturb_gradient(&[1.0, 0.0, 3.0], 0.1, 42, Norm::L1);
        assert_abs_diff_eq!(norm_inf(&sub(&out, &[1.0, 0.0, 3.0])), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn value_perturbation_stays_in_interval() {
        let v = perturb_value(1.0, 0.2, 9);
        assert!((0.8..=1.0).contains(&v));
    }

    proptest! {
        #[test]
        fn perturbations_are_deterministic(
            g in prop::collection::vec(-10.0f64..10.0, 1..8),
            r in 0.0f64..2.0,
            seed: u64,
        ) {
            prop_assert_eq!(
                perturb_gradient(&g, r, seed, Norm::L2),
                perturb_gradient(&g, r, seed, Norm::L2)
            );
            let v = perturb_value(g[0], r, seed);
            prop_assert_eq!(v, perturb_value(g[0], r, seed));
            prop_assert!(v <= g[0] && v >= g[0] - r);
        }
    }
}
