//! Transaction weighting through the upper triangle utility.
//!
//! `vutu(t, ℓ, i)` is the summed utility of all length-`ℓ` itemsets inside the
//! first `i` items of `t`. It is never tabulated: the closed form
//! `C(i−1, ℓ−1) × prefix(i)` gives any entry from the prefix sums.

use num_bigint::BigUint;
use num_traits::Zero;

use crate::combinatorics::PascalCache;
use crate::error::{Error, Result};
use crate::qdb::{LengthUtility, QuantitativeDatabase, QuantitativeTransaction};

/// Summed utility of all length-`len` itemsets among the first `i` items.
///
/// `i` is 1-based. Zero when `len` is 0 or exceeds `i`.
pub fn vutu(
    t: &QuantitativeTransaction,
    len: usize,
    i: usize,
    cache: &PascalCache,
) -> Result<BigUint> {
    if i == 0 || i > t.len() {
        return Err(Error::Position {
            position: i,
            len: t.len(),
        });
    }
    if i - 1 > cache.n_max() {
        return Err(Error::PascalRange {
            n: i - 1,
            n_max: cache.n_max(),
        });
    }
    Ok(vutu_unchecked(t, len, i, cache))
}

/// [`vutu`] without range checks; `i = 0` yields zero.
pub(crate) fn vutu_unchecked(
    t: &QuantitativeTransaction,
    len: usize,
    i: usize,
    cache: &PascalCache,
) -> BigUint {
    if len == 0 || len > i {
        return BigUint::zero();
    }
    cache.get(i - 1, len - 1) * t.prefix(i)
}

/// Per-length masses `vutu(ℓ, |t|) × f'(ℓ)` and their sum `W(t)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionWeight {
    min_len: usize,
    per_length: Option<Vec<BigUint>>,
    total: BigUint,
}

impl TransactionWeight {
    pub fn total(&self) -> &BigUint {
        &self.total
    }

    /// `(ℓ, mass)` pairs over the admissible lengths, or `None` when the
    /// total came from the unconstrained closed form and the per-length
    /// masses were not materialized.
    pub fn per_length(&self) -> Option<impl Iterator<Item = (usize, &BigUint)> + '_> {
        self.per_length
            .as_ref()
            .map(|v| v.iter().enumerate().map(|(k, m)| (self.min_len + k, m)))
    }

    /// Per-length masses, computing them if only the total is known.
    pub fn length_masses(
        &self,
        t: &QuantitativeTransaction,
        utility: &LengthUtility,
        cache: &PascalCache,
    ) -> Vec<(usize, BigUint)> {
        match &self.per_length {
            Some(v) => v
                .iter()
                .enumerate()
                .map(|(k, m)| (self.min_len + k, m.clone()))
                .collect(),
            None => length_masses(t, utility, cache),
        }
    }
}

/// `(ℓ, vutu(ℓ, |t|) × f'(ℓ))` for every admissible length of `t`.
pub fn length_masses(
    t: &QuantitativeTransaction,
    utility: &LengthUtility,
    cache: &PascalCache,
) -> Vec<(usize, BigUint)> {
    let n = t.len();
    utility
        .lengths_for(n)
        .map(|len| {
            let m = vutu_unchecked(t, len, n, cache) * utility.scaled_factor(len);
            (len, m)
        })
        .collect()
}

fn check_cache(t: &QuantitativeTransaction, cache: &PascalCache) -> Result<()> {
    if t.len() > cache.n_max() + 1 {
        return Err(Error::PascalRange {
            n: t.len() - 1,
            n_max: cache.n_max(),
        });
    }
    Ok(())
}

/// Weighs one transaction.
///
/// For unconstrained HUP the total is `2^(|t|−1) × prefix(|t|)` and the
/// per-length masses are left to be computed on demand.
pub fn weigh_transaction(
    t: &QuantitativeTransaction,
    utility: &LengthUtility,
    cache: &PascalCache,
) -> Result<TransactionWeight> {
    check_cache(t, cache)?;
    if utility.is_unconstrained_hup() {
        return Ok(TransactionWeight {
            min_len: 1,
            per_length: None,
            total: unconstrained_total(t),
        });
    }
    let per_length: Vec<BigUint> = length_masses(t, utility, cache)
        .into_iter()
        .map(|(_, m)| m)
        .collect();
    let total = per_length.iter().sum();
    Ok(TransactionWeight {
        min_len: utility.min_len(),
        per_length: Some(per_length),
        total,
    })
}

fn unconstrained_total(t: &QuantitativeTransaction) -> BigUint {
    if t.is_empty() {
        return BigUint::zero();
    }
    BigUint::from(t.total_utility()) << (t.len() - 1)
}

/// `W(t)` only, without keeping per-length masses.
pub fn transaction_total(
    t: &QuantitativeTransaction,
    utility: &LengthUtility,
    cache: &PascalCache,
) -> Result<BigUint> {
    check_cache(t, cache)?;
    if utility.is_unconstrained_hup() {
        return Ok(unconstrained_total(t));
    }
    let n = t.len();
    let coefficient: BigUint = utility
        .lengths_for(n)
        .map(|len| cache.get(n - 1, len - 1) * utility.scaled_factor(len))
        .sum();
    Ok(coefficient * t.prefix(n))
}

/// Cumulative transaction weights for drawing a transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightIndex {
    cumulative: Vec<BigUint>,
    utility: LengthUtility,
}

impl WeightIndex {
    /// Builds the index from per-transaction totals in id order.
    pub fn from_weights(weights: impl IntoIterator<Item = BigUint>, utility: LengthUtility) -> Result<Self> {
        let mut acc = BigUint::zero();
        let cumulative: Vec<BigUint> = weights
            .into_iter()
            .map(|w| {
                acc += w;
                acc.clone()
            })
            .collect();
        if acc.is_zero() {
            return Err(Error::ZeroMass);
        }
        Ok(Self {
            cumulative,
            utility,
        })
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    /// Grand total `Z`.
    pub fn total(&self) -> &BigUint {
        self.cumulative.last().expect("index is never empty")
    }

    pub fn cumulative(&self) -> &[BigUint] {
        &self.cumulative
    }

    pub fn utility(&self) -> &LengthUtility {
        &self.utility
    }

    /// `W(t_id)`.
    pub fn weight(&self, id: usize) -> BigUint {
        match id {
            0 => self.cumulative[0].clone(),
            _ => &self.cumulative[id] - &self.cumulative[id - 1],
        }
    }

    pub fn weights(&self) -> Vec<BigUint> {
        (0..self.len()).map(|id| self.weight(id)).collect()
    }

    /// Transaction owning `alpha ∈ [1..Z]`: the unique `j` with
    /// `cum(j−1) < alpha ≤ cum(j)`.
    pub fn locate(&self, alpha: &BigUint) -> usize {
        self.cumulative.partition_point(|c| c < alpha)
    }
}

/// Weighs every transaction of `db`.
pub fn build_weight_index(
    db: &QuantitativeDatabase,
    utility: &LengthUtility,
    cache: &PascalCache,
) -> Result<WeightIndex> {
    let weights = db
        .transactions()
        .iter()
        .map(|t| transaction_total(t, utility, cache))
        .collect::<Result<Vec<_>>>()?;
    WeightIndex::from_weights(weights, utility.clone())
}

/// Pascal triangle with rows up to the longest transaction of `db`, enough
/// for weighting and drawing.
pub fn cache_for(db: &QuantitativeDatabase) -> PascalCache {
    PascalCache::new(db.max_transaction_len())
}
