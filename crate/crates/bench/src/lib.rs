//! Inputs shared by the benchmarks.

use nonstat_core::MultivariateSeries;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

/// Gaussian white noise, `t` rows by `l` columns.
pub fn white_noise(t: usize, l: usize, seed: u64) -> MultivariateSeries {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let v = (0..t * l).map(|_| rng.sample(StandardNormal)).collect();
    MultivariateSeries::new(t, l, v, None).expect("shape is consistent")
}

/// Two wind speed columns drifting around 8 m/s.
pub fn wind_speeds(t: usize, seed: u64) -> MultivariateSeries {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut x = [0.0f64; 2];
    let mut v = Vec::with_capacity(2 * t);
    for _ in 0..t {
        for xi in &mut x {
            let z: f64 = rng.sample(StandardNormal);
            *xi = 0.8 * *xi + 1.5 * z;
            v.push((8.0 + *xi).max(0.0));
        }
    }
    MultivariateSeries::new(t, 2, v, None).expect("shape is consistent")
}
