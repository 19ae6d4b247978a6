//! Binomial coefficients and exact uniform draws over big-integer ranges.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Pascal's triangle up to row `n_max`, storing only the first
/// `⌊i/2⌋ + 1` entries of row `i`; the rest follow from `C(i, j) = C(i, i−j)`.
#[derive(Debug, Clone)]
pub struct PascalCache {
    rows: Vec<Vec<BigUint>>,
    zero: BigUint,
}

impl PascalCache {
    pub fn new(n_max: usize) -> Self {
        let mut cache = PascalCache {
            rows: Vec::with_capacity(n_max + 1),
            zero: BigUint::zero(),
        };
        cache.extend_to(n_max);
        cache
    }

    pub fn n_max(&self) -> usize {
        self.rows.len() - 1
    }

    /// Grows the triangle so that rows `0..=n` are available.
    pub fn extend_to(&mut self, n: usize) {
        while self.rows.len() <= n {
            let i = self.rows.len();
            let half = i / 2;
            let mut row = Vec::with_capacity(half + 1);
            row.push(BigUint::one());
            for j in 1..=half {
                // C(i, j) = C(i-1, j-1) + C(i-1, j), with j ≤ i-1 here.
                let prev = &self.rows[i - 1];
                let value = self.stored(prev, i - 1, j - 1) + self.stored(prev, i - 1, j);
                row.push(value);
            }
            self.rows.push(row);
        }
    }

    fn stored<'a>(&'a self, row: &'a [BigUint], n: usize, k: usize) -> &'a BigUint {
        let k = k.min(n - k);
        &row[k]
    }

    /// Number of big integers held, `G(n_max)`.
    pub fn stored_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `C(n, k)`, zero when `k < 0` or `k > n`.
    pub fn binom(&self, n: usize, k: i64) -> Result<&BigUint> {
        if n >= self.rows.len() {
            return Err(Error::PascalRange {
                n,
                n_max: self.n_max(),
            });
        }
        if k < 0 || k as u64 > n as u64 {
            return Ok(&self.zero);
        }
        let k = k as usize;
        Ok(self.stored(&self.rows[n], n, k))
    }

    /// `C(n, k)` for callers that already ensured `n ≤ n_max`.
    pub(crate) fn get(&self, n: usize, k: usize) -> &BigUint {
        if k > n {
            return &self.zero;
        }
        self.stored(&self.rows[n], n, k)
    }
}

/// Closed form of the half-triangle storage count for rows `0..=n`.
pub fn half_pascal_size(n: usize) -> usize {
    if n.is_multiple_of(2) {
        (n / 2 + 1) * (n / 2 + 1)
    } else {
        (n + 1) * (n + 3) / 4
    }
}

/// Seeded ChaCha20 stream with exact integer-range draws.
///
/// [`RandomSource::uniform_inclusive`] is the only way randomness is consumed
/// by the samplers; [`RandomSource::draws`] counts its calls.
#[derive(Debug, Clone)]
pub struct RandomSource {
    rng: ChaCha20Rng,
    draws: u64,
}

impl RandomSource {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
            draws: 0,
        }
    }

    /// Independent stream for concurrent job `job` under the same seed.
    pub fn for_job(seed: u64, job: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(job.wrapping_add(1));
        Self { rng, draws: 0 }
    }

    /// Number of `uniform_inclusive*` calls so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform value in `[1..=n]`.
    ///
    /// Draws `⌈b/32⌉` little-endian 32-bit words where `b` is the bit length
    /// of `n − 1`, masks the excess high bits and rejects values `≥ n`.
    pub fn uniform_inclusive(&mut self, n: &BigUint) -> Result<BigUint> {
        if n.is_zero() {
            return Err(Error::InvalidRequest("uniform draw over an empty range".into()));
        }
        if let Some(small) = n.to_u64() {
            return Ok(BigUint::from(self.uniform_u64(small)));
        }
        self.draws += 1;
        let bound = n - 1u32;
        let bits = bound.bits();
        let words = bits.div_ceil(32) as usize;
        let top_mask = mask(bits);
        loop {
            let mut digits: Vec<u32> = (0..words).map(|_| self.rng.next_u32()).collect();
            if let Some(last) = digits.last_mut() {
                *last &= top_mask;
            }
            let x = BigUint::new(digits);
            if x <= bound {
                return Ok(x + 1u32);
            }
        }
    }

    /// Uniform value in `[1..=n]` for machine-sized `n ≥ 1`, consuming the
    /// stream exactly as [`RandomSource::uniform_inclusive`] does.
    pub fn uniform_inclusive_u64(&mut self, n: u64) -> Result<u64> {
        if n == 0 {
            return Err(Error::InvalidRequest("uniform draw over an empty range".into()));
        }
        Ok(self.uniform_u64(n))
    }

    fn uniform_u64(&mut self, n: u64) -> u64 {
        self.draws += 1;
        let bound = n - 1;
        let bits = u64::BITS - bound.leading_zeros();
        if bits == 0 {
            return 1;
        }
        loop {
            let x = if bits <= 32 {
                u64::from(self.rng.next_u32() & mask(u64::from(bits)))
            } else {
                let lo = u64::from(self.rng.next_u32());
                let hi = u64::from(self.rng.next_u32() & mask(u64::from(bits)));
                lo | (hi << 32)
            };
            if x <= bound {
                return x + 1;
            }
        }
    }
}

fn mask(bits: u64) -> u32 {
    match bits % 32 {
        0 => u32::MAX,
        r => (1u32 << r) - 1,
    }
}
