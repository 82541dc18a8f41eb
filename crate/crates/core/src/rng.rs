//! Per-trial random streams and the deterministic parallel trial driver.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::stats::RunningStats;

pub type TrialRng = Xoshiro256PlusPlus;

/// Trials per work item. Fixed so the merge order never depends on scheduling.
const BATCH: u64 = 1024;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for `trial` under the master `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> TrialRng {
    let key = splitmix64(seed) ^ splitmix64(trial.wrapping_mul(0xD1B5_4A32_D192_ED03) ^ 0x5851_F42D_4C95_7F2D);
    TrialRng::seed_from_u64(key)
}

/// Fair coin flips drawn 64 at a time.
#[derive(Debug, Default)]
pub struct CoinFlips {
    bits: u64,
    left: u32,
}

impl CoinFlips {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn flip<R: RngCore>(&mut self, rng: &mut R) -> bool {
        if self.left == 0 {
            self.bits = rng.next_u64();
            self.left = 64;
        }
        let b = self.bits & 1 == 1;
        self.bits >>= 1;
        self.left -= 1;
        b
    }
}

/// Runs `n_trials` independent trials and merges their statistics in batch
/// order, so the result is bit-identical for any thread count.
pub fn run_trials<F>(n_trials: u64, seed: u64, trial: F) -> RunningStats
where
    F: Fn(&mut TrialRng) -> f64 + Sync,
{
    let batches = n_trials.div_ceil(BATCH);
    let parts: Vec<RunningStats> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let start = b * BATCH;
            let end = (start + BATCH).min(n_trials);
            let mut stats = RunningStats::new();
            for i in start..end {
                let mut rng = trial_rng(seed, i);
                stats.push(trial(&mut rng));
            }
            stats
        })
        .collect();
    let mut total = RunningStats::new();
    for p in &parts {
        total.merge(p);
    }
    total
}

/// Vector form of [`run_trials`]: each trial fills `width` outputs, and
/// every output slot gets its own statistics, merged in the same fixed order.
pub fn run_trials_vec<F>(n_trials: u64, seed: u64, width: usize, trial: F) -> Vec<RunningStats>
where
    F: Fn(&mut TrialRng, &mut [f64]) + Sync,
{
    let batches = n_trials.div_ceil(BATCH);
    let parts: Vec<Vec<RunningStats>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let start = b * BATCH;
            let end = (start + BATCH).min(n_trials);
            let mut stats = vec![RunningStats::new(); width];
            let mut out = vec![0.0; width];
            for i in start..end {
                let mut rng = trial_rng(seed, i);
                trial(&mut rng, &mut out);
                for (s, v) in stats.iter_mut().zip(&out) {
                    s.push(*v);
                }
            }
            stats
        })
        .collect();
    let mut total = vec![RunningStats::new(); width];
    for p in &parts {
        for (t, s) in total.iter_mut().zip(p) {
            t.merge(s);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = trial_rng(7, 3).random();
        let b: u64 = trial_rng(7, 3).random();
        let c: u64 = trial_rng(7, 4).random();
        let d: u64 = trial_rng(8, 3).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn run_trials_is_deterministic() {
        let f = |rng: &mut TrialRng| rng.random::<f64>();
        let s1 = run_trials(5000, 11, f);
        let s2 = run_trials(5000, 11, f);
        assert_eq!(s1, s2);
        assert_eq!(s1.count(), 5000);
        assert!((s1.mean() - 0.5).abs() < 4.0 * s1.std_error());
    }

    #[test]
    fn vector_runner_matches_scalar() {
        let f = |rng: &mut TrialRng| rng.random::<f64>();
        let scalar = run_trials(3000, 5, f);
        let vector = run_trials_vec(3000, 5, 2, |rng, out| {
            let v = rng.random::<f64>();
            out[0] = v;
            out[1] = 2.0 * v;
        });
        assert_eq!(vector[0], scalar);
        assert!((vector[1].mean() - 2.0 * scalar.mean()).abs() < 1e-15);
    }

    #[test]
    fn coin_is_fair() {
        let mut rng = trial_rng(1, 1);
        let mut coins = CoinFlips::new();
        let heads = (0..100_000).filter(|_| coins.flip(&mut rng)).count();
        assert!((heads as f64 - 50_000.0).abs() < 4.0 * 158.2);
    }
}
