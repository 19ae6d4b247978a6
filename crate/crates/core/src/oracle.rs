//! Brute-force ground truth for the samplers.
//!
//! Everything here is deliberately slow and direct: subset enumeration,
//! the three-case recurrence for upper triangle utilities with independently
//! computed binomials, and position-by-position acceptance. These are the
//! references the fast paths are tested against.

use std::collections::{BTreeMap, HashMap};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::combinatorics::{PascalCache, RandomSource};
use crate::error::{Error, Result};
use crate::qdb::{ItemId, LengthUtility, QuantitativeDatabase, QuantitativeTransaction};
use crate::sampler::SampleRecord;
use crate::weighting::vutu;

/// Default cap on `Σ_t 2^|t|` for [`enumerate`].
pub const DEFAULT_SUBSET_CAP: u128 = 1 << 24;

/// Upper triangle utility from its defining recurrence:
///
/// ```text
/// V(ℓ, i) = 0                                   if ℓ > i
/// V(1, i) = w(t[1]) + … + w(t[i])
/// V(ℓ, i) = C(i−1, ℓ−1)·w(t[i]) + V(ℓ−1, i−1) + V(ℓ, i−1)
/// ```
///
/// Fills an `ℓ × i` table, `O(ℓ·i)`.
pub fn vutu_recursive(t: &QuantitativeTransaction, len: usize, i: usize) -> Result<BigUint> {
    if i == 0 || i > t.len() {
        return Err(Error::Position {
            position: i,
            len: t.len(),
        });
    }
    if len == 0 || len > i {
        return Ok(BigUint::zero());
    }
    // table[l][j] for l in 0..=len, j in 0..=i; row 0 unused.
    let mut table = vec![vec![BigUint::zero(); i + 1]; len + 1];
    for j in 1..=i {
        let w = BigUint::from(t.weight_at(j));
        table[1][j] = &table[1][j - 1] + &w;
        for l in 2..=len.min(j) {
            let with_item = num_integer::binomial(BigUint::from(j - 1), BigUint::from(l - 1)) * &w;
            table[l][j] = with_item + &table[l - 1][j - 1] + &table[l][j - 1];
        }
    }
    Ok(table[len][i].clone())
}

/// Position-by-position selection of the next item.
///
/// Scans `i = bound, bound−1, …` and accepts `t[i]` when `alpha` falls in its
/// acceptance share `P(t[i] | Y, r)`, whose numerator and denominator are
///
/// ```text
/// vutu(r, i) − vutu(r, i−1) + C(i−1, r−1)·u(Y)
/// vutu(r, i) + C(i, r)·u(Y)
/// ```
///
/// A rejected `alpha` stays uniform on the shrunken interval, so one value
/// serves the whole scan.
pub fn sequential_select(
    t: &QuantitativeTransaction,
    r: usize,
    y_utility: u128,
    bound: usize,
    alpha: &BigUint,
    cache: &PascalCache,
) -> Result<usize> {
    let y = BigUint::from(y_utility);
    for i in (1..=bound).rev() {
        let here = vutu(t, r, i, cache)?;
        let before = if i > 1 {
            vutu(t, r, i - 1, cache)?
        } else {
            BigUint::zero()
        };
        let numerator = &here - &before + cache.binom(i - 1, r as i64 - 1)? * &y;
        let denominator = here + cache.binom(i, r as i64)? * &y;
        if alpha > &(denominator - numerator) {
            return Ok(i);
        }
    }
    Err(Error::InvalidRequest(format!(
        "alpha {alpha} selected no position below {bound}"
    )))
}

/// Exact probability of one pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternMass {
    pub items: Vec<ItemId>,
    /// `u(X, D)`.
    pub utility: BigUint,
    /// `u(X, D) · f'(|X|)`, an integer.
    pub scaled_mass: BigUint,
    pub probability: BigRational,
}

impl PatternMass {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// `P(X) = u(X, D)·f(|X|) / Z′` over every admissible pattern, keyed by sorted
/// labels.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    patterns: BTreeMap<Vec<String>, PatternMass>,
    normalizer: BigRational,
    scaled_normalizer: BigUint,
}

impl ExactDistribution {
    /// `Z′ = Σ u(X, D)·f(|X|)`.
    pub fn normalizer(&self) -> &BigRational {
        &self.normalizer
    }

    /// `Z′` with the length-utility denominators cleared; comparable with a
    /// weight index total.
    pub fn scaled_normalizer(&self) -> &BigUint {
        &self.scaled_normalizer
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn get(&self, key: &[String]) -> Option<&PatternMass> {
        self.patterns.get(key)
    }

    pub fn probability(&self, key: &[String]) -> BigRational {
        self.patterns
            .get(key)
            .map_or_else(BigRational::zero, |p| p.probability.clone())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<String>, &PatternMass)> {
        self.patterns.iter()
    }

    /// Inverse-CDF draws straight from the exact distribution.
    pub fn sample_keys(&self, n: usize, rng: &mut RandomSource) -> Result<Vec<Vec<String>>> {
        let mut acc = BigUint::zero();
        let cumulative: Vec<(BigUint, &Vec<String>)> = self
            .patterns
            .iter()
            .map(|(k, p)| {
                acc += &p.scaled_mass;
                (acc.clone(), k)
            })
            .collect();
        (0..n)
            .map(|_| {
                let alpha = rng.uniform_inclusive(&self.scaled_normalizer)?;
                let pos = cumulative.partition_point(|(c, _)| c < &alpha);
                Ok(cumulative[pos].1.clone())
            })
            .collect()
    }
}

/// Enumerates every subset of every transaction whose length is admissible
/// and aggregates utilities per itemset.
pub fn enumerate(
    db: &QuantitativeDatabase,
    utility: &LengthUtility,
    cap: u128,
) -> Result<ExactDistribution> {
    let mut needed: u128 = 0;
    for t in db.transactions() {
        let subsets = if t.len() >= 127 {
            u128::MAX
        } else {
            1u128 << t.len()
        };
        needed = needed.saturating_add(subsets);
    }
    if needed > cap {
        return Err(Error::EnumerationCap { needed, cap });
    }

    let mut utilities: HashMap<Vec<ItemId>, u128> = HashMap::new();
    for t in db.transactions() {
        let n = t.len();
        for mask in 1u64..(1u64 << n) {
            let len = mask.count_ones() as usize;
            if !utility.contains(len) {
                continue;
            }
            let mut items = Vec::with_capacity(len);
            let mut u = 0u128;
            for bit in 0..n {
                if mask & (1 << bit) != 0 {
                    items.push(t.item_at(bit + 1));
                    u += u128::from(t.weight_at(bit + 1));
                }
            }
            *utilities.entry(items).or_insert(0) += u;
        }
    }

    let scale = BigInt::from(utility.scale().clone());
    let mut normalizer = BigRational::zero();
    let mut scaled_normalizer = BigUint::zero();
    let mut patterns = BTreeMap::new();
    for (items, u) in utilities {
        let len = items.len();
        let u = BigUint::from(u);
        let weighted = BigRational::from_integer(BigInt::from(u.clone())) * utility.factor(len);
        let scaled = &weighted * BigRational::from_integer(scale.clone());
        debug_assert!(scaled.is_integer());
        let scaled_mass = scaled
            .to_integer()
            .to_biguint()
            .expect("masses are non-negative");
        normalizer += &weighted;
        scaled_normalizer += &scaled_mass;
        let mut key = db.labels_of(&items);
        key.sort_unstable();
        patterns.insert(
            key,
            PatternMass {
                items,
                utility: u,
                scaled_mass,
                probability: weighted,
            },
        );
    }
    if normalizer.is_zero() {
        return Err(Error::ZeroMass);
    }
    for p in patterns.values_mut() {
        p.probability = &p.probability / &normalizer;
    }
    Ok(ExactDistribution {
        patterns,
        normalizer,
        scaled_normalizer,
    })
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub bins: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PatternZScore {
    pub items: Vec<String>,
    pub expected: f64,
    pub observed: f64,
    pub z: f64,
}

/// Agreement between a sample and an exact distribution.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalReport {
    pub draws: usize,
    pub distinct_observed: usize,
    pub outside_support: usize,
    pub tv_distance: f64,
    pub chi_square: ChiSquareResult,
    pub z_scores: Vec<PatternZScore>,
}

impl EmpiricalReport {
    pub fn max_abs_z(&self) -> f64 {
        self.z_scores
            .iter()
            .map(|z| z.z.abs())
            .fold(0.0, f64::max)
    }
}

/// Minimum expected count for a pattern to get its own chi-square bin.
pub const CHI_SQUARE_MIN_EXPECTED: f64 = 5.0;

pub fn compare_records(dist: &ExactDistribution, sample: &[SampleRecord]) -> Result<EmpiricalReport> {
    compare_empirical(dist, sample.iter().map(SampleRecord::pattern_key))
}

/// Total-variation distance, chi-square goodness of fit and per-pattern
/// z-scores of a sample of pattern keys (sorted labels) against `dist`.
///
/// Patterns expected fewer than [`CHI_SQUARE_MIN_EXPECTED`] times are pooled
/// into one bin. Any observation outside the support makes the statistic
/// infinite.
pub fn compare_empirical<I>(dist: &ExactDistribution, sample: I) -> Result<EmpiricalReport>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut counts: HashMap<Vec<String>, usize> = HashMap::new();
    let mut draws = 0usize;
    for key in sample {
        *counts.entry(key).or_insert(0) += 1;
        draws += 1;
    }
    if draws == 0 {
        return Err(Error::InvalidRequest("empirical sample is empty".into()));
    }
    let n = draws as f64;

    let mut tv = 0.0;
    let mut outside = 0usize;
    for (key, &c) in &counts {
        if dist.get(key).is_none() {
            outside += c;
            tv += c as f64 / n;
        }
    }

    let mut regular: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0f64, 0.0f64);
    let mut z_scores = Vec::with_capacity(dist.len());
    for (key, mass) in dist.iter() {
        let p = mass.probability.to_f64().unwrap_or(0.0);
        let observed = counts.get(key).copied().unwrap_or(0) as f64;
        let p_hat = observed / n;
        tv += (p_hat - p).abs();
        let sigma = (p * (1.0 - p) / n).sqrt();
        z_scores.push(PatternZScore {
            items: key.clone(),
            expected: p,
            observed: p_hat,
            z: if sigma > 0.0 { (p_hat - p) / sigma } else { 0.0 },
        });
        let expected = p * n;
        if expected >= CHI_SQUARE_MIN_EXPECTED {
            regular.push((observed, expected));
        } else {
            pooled.0 += observed;
            pooled.1 += expected;
        }
    }
    if pooled.1 > 0.0 || pooled.0 > 0.0 {
        if pooled.1 >= CHI_SQUARE_MIN_EXPECTED || regular.is_empty() {
            regular.push(pooled);
        } else {
            // fold an undersized pool into the smallest regular bin
            let smallest = regular
                .iter_mut()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty");
            smallest.0 += pooled.0;
            smallest.1 += pooled.1;
        }
    }

    let chi_square = if outside > 0 {
        ChiSquareResult {
            statistic: f64::INFINITY,
            degrees_of_freedom: regular.len(),
            p_value: 0.0,
            bins: regular.len() + 1,
        }
    } else if regular.len() < 2 {
        ChiSquareResult {
            statistic: 0.0,
            degrees_of_freedom: 0,
            p_value: 1.0,
            bins: regular.len(),
        }
    } else {
        let statistic: f64 = regular
            .iter()
            .map(|&(o, e)| (o - e) * (o - e) / e)
            .sum();
        let df = regular.len() - 1;
        let p_value = ChiSquared::new(df as f64)
            .map(|d| d.sf(statistic))
            .unwrap_or(0.0);
        ChiSquareResult {
            statistic,
            degrees_of_freedom: df,
            p_value,
            bins: regular.len(),
        }
    };

    Ok(EmpiricalReport {
        draws,
        distinct_observed: counts.len(),
        outside_support: outside,
        tv_distance: tv / 2.0,
        chi_square,
        z_scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Average utility of sampled patterns normalized over the union of all
/// compared samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepresentativenessReport {
    pub method: String,
    pub draws: usize,
    pub mean_normalized_utility: f64,
    pub confidence_interval_95: (f64, f64),
    /// Fewer than two draws: the interval collapses to the mean.
    pub degenerate: bool,
    pub histogram: Vec<HistogramBin>,
    pub values: Vec<f64>,
}

const HISTOGRAM_BINS: usize = 10;

/// Scores each record by `(u(X, D)/|X|) / S`, where `S` is the summed average
/// utility of the distinct patterns in the union of all samples, and reports
/// the mean with a normal 95% interval per method.
pub fn representativeness(
    db: &QuantitativeDatabase,
    samples: &[(&str, &[SampleRecord])],
) -> Result<Vec<RepresentativenessReport>> {
    let mut average: HashMap<Vec<String>, f64> = HashMap::new();
    for (_, records) in samples {
        for r in records.iter() {
            let key = r.pattern_key();
            if average.contains_key(&key) {
                continue;
            }
            let ids = db
                .resolve(&key)
                .ok_or_else(|| Error::InvalidRequest(format!("unknown items in {key:?}")))?;
            let u = db.utility_of(&ids).to_f64().unwrap_or(f64::INFINITY);
            average.insert(key, u / ids.len() as f64);
        }
    }
    let total: f64 = average.values().sum();

    let per_method: Vec<(String, Vec<f64>)> = samples
        .iter()
        .map(|(name, records)| {
            let values = records
                .iter()
                .map(|r| {
                    if total > 0.0 {
                        average[&r.pattern_key()] / total
                    } else {
                        0.0
                    }
                })
                .collect();
            (name.to_string(), values)
        })
        .collect();
    let max = per_method
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold(0.0, f64::max);

    Ok(per_method
        .into_iter()
        .map(|(method, values)| summarize(method, values, max))
        .collect())
}

fn summarize(method: String, values: Vec<f64>, max: f64) -> RepresentativenessReport {
    let n = values.len();
    let mean = if n > 0 {
        values.iter().sum::<f64>() / n as f64
    } else {
        0.0
    };
    let degenerate = n < 2;
    let ci = if degenerate {
        (mean, mean)
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let half = 1.96 * (var / n as f64).sqrt();
        (mean - half, mean + half)
    };
    let width = if max > 0.0 { max / HISTOGRAM_BINS as f64 } else { 1.0 };
    let mut histogram: Vec<HistogramBin> = (0..HISTOGRAM_BINS)
        .map(|b| HistogramBin {
            lower: b as f64 * width,
            upper: (b + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for v in &values {
        let b = ((v / width) as usize).min(HISTOGRAM_BINS - 1);
        histogram[b].count += 1;
    }
    RepresentativenessReport {
        method,
        draws: n,
        mean_normalized_utility: mean,
        confidence_interval_95: ci,
        degenerate,
        histogram,
        values,
    }
}
