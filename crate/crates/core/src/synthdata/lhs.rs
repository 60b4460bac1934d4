use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Latin hypercube design of `n` points in `[0, 1)^dims`.
///
/// Per dimension: a Fisher-Yates permutation of the strata, then one uniform
/// offset per point, both drawn from ChaCha8 seeded with `seed`.
pub fn latin_hypercube_sample(n: usize, dims: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidInput("latin hypercube needs n >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![vec![0.0; dims]; n];
    let inv = 1.0 / n as f64;
    let mut perm: Vec<usize> = (0..n).collect();
    for d in 0..dims {
        perm.iter_mut().enumerate().for_each(|(i, p)| *p = i);
        perm.shuffle(&mut rng);
        for (row, &stratum) in out.iter_mut().zip(&perm) {
            let off: f64 = rng.gen();
            let mut v = (stratum as f64 + off) * inv;
            // keep rounding from pushing v into the next stratum
            while v > 0.0 && (v * n as f64).floor() as usize > stratum {
                v = f64::from_bits(v.to_bits() - 1);
            }
            row[d] = v;
        }
    }
    Ok(out)
}
