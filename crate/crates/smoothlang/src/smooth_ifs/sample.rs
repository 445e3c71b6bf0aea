//! Pre-committed random map choices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::IfsError;

/// Samples `t` map indices in `[0, n)`, uniformly or per `weights`.
///
/// The sequence is a pure function of the arguments: the choices are made
/// before any evaluation so that every rerun walks the same maps. Weights
/// must sum to 1 within 1e-9.
pub fn sample_choices(
    n: usize,
    t: usize,
    seed: u64,
    weights: Option<&[f64]>,
) -> Result<Vec<u32>, IfsError> {
    if n == 0 {
        return Err(IfsError::InvalidModel("need at least one map".into()));
    }
    if t == 0 {
        return Err(IfsError::InvalidModel("need at least one iteration".into()));
    }
    let cumulative = match weights {
        None => None,
        Some(ws) => {
            if ws.len() != n {
                return Err(IfsError::WrongWeightCount {
                    expected: n,
                    got: ws.len(),
                });
            }
            if let Some((index, &value)) = ws
                .iter()
                .enumerate()
                .find(|(_, w)| !w.is_finite() || **w < 0.0)
            {
                return Err(IfsError::InvalidWeight { index, value });
            }
            let sum: f64 = ws.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(IfsError::WeightsDontSumToOne { sum });
            }
            let mut running = 0.0;
            let cdf: Vec<f64> = ws
                .iter()
                .map(|w| {
                    running += w;
                    running
                })
                .collect();
            Some(cdf)
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let choices = (0..t)
        .map(|_| match &cumulative {
            None => rng.gen_range(0..n) as u32,
            Some(cdf) => {
                let u: f64 = rng.gen();
                // partition_point never returns n for u < 1: the last CDF
                // entry is 1 within rounding, and gen() is in [0, 1).
                cdf.partition_point(|&edge| edge <= u).min(n - 1) as u32
            }
        })
        .collect();
    Ok(choices)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_gives_the_same_sequence() {
        let a = sample_choices(4, 1000, 7, None).unwrap();
        let b = sample_choices(4, 1000, 7, None).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().any(|&c| c != a[0]), "sequence should vary");
    }

    #[test]
    fn different_seeds_differ() {
        let a = sample_choices(4, 1000, 7, None).unwrap();
        let b = sample_choices(4, 1000, 8, None).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn single_map_yields_zeros() {
        let choices = sample_choices(1, 50, 3, None).unwrap();
        assert!(choices.iter().all(|&c| c == 0));
    }

    #[test]
    fn uniform_frequencies_settle_near_a_quarter() {
        let choices = sample_choices(4, 100_000, 42, None).unwrap();
        for map in 0..4u32 {
            let count = choices.iter().filter(|&&c| c == map).count();
            let frequency = count as f64 / choices.len() as f64;
            assert!(
                (frequency - 0.25).abs() < 0.01,
                "map {map} frequency {frequency}"
            );
        }
    }

    #[test]
    fn weighted_frequencies_follow_the_weights() {
        let weights = [0.01, 0.85, 0.07, 0.07];
        let choices = sample_choices(4, 100_000, 42, Some(&weights)).unwrap();
        for (map, &weight) in weights.iter().enumerate() {
            let count = choices.iter().filter(|&&c| c == map as u32).count();
            let frequency = count as f64 / choices.len() as f64;
            assert!(
                (frequency - weight).abs() < 0.01,
                "map {map} frequency {frequency} vs weight {weight}"
            );
        }
    }

    #[test]
    fn bad_weights_are_rejected() {
        assert!(matches!(
            sample_choices(2, 10, 0, Some(&[0.5])),
            Err(IfsError::WrongWeightCount {
                expected: 2,
                got: 1
            })
        ));
        assert!(matches!(
            sample_choices(2, 10, 0, Some(&[0.7, 0.4])),
            Err(IfsError::WeightsDontSumToOne { .. })
        ));
        assert!(matches!(
            sample_choices(2, 10, 0, Some(&[-0.2, 1.2])),
            Err(IfsError::InvalidWeight { index: 0, .. })
        ));
    }

    #[test]
    fn empty_requests_are_rejected() {
        assert!(sample_choices(0, 10, 0, None).is_err());
        assert!(sample_choices(3, 0, 0, None).is_err());
    }
}
