//! Drawing patterns proportionally to their length-weighted utility.
//!
//! A draw takes a transaction with probability `W(t)/Z`, a length with
//! probability `vutu(ℓ, |t|)·f'(ℓ)/W(t)`, then the items one at a time from
//! the right end of the transaction. With `r` items still to pick, a set `Y`
//! already picked and candidates restricted to the first `b` positions, the
//! mass of every completion restricted to the first `i` positions is
//!
//! ```text
//! cum(i) = vutu(r, i) + C(i, r) · u(Y)
//! ```
//!
//! One uniform `α ∈ [1..cum(b)]` selects the position `i` with
//! `cum(i−1) < α ≤ cum(i)`, found by binary search.

use std::io::Write;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{PascalCache, RandomSource};
use crate::error::{Error, Result};
use crate::qdb::{LengthUtility, Pattern, QuantitativeDatabase, QuantitativeTransaction};
use crate::weighting::{vutu_unchecked, WeightIndex};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRequest {
    pub utility: LengthUtility,
    pub k: usize,
    pub seed: u64,
}

impl SampleRequest {
    pub fn new(utility: LengthUtility, k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidRequest("k must be at least 1".into()));
        }
        Ok(Self { utility, k, seed })
    }
}

/// One sampled pattern. `items` are labels in the transaction's item order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub transaction: usize,
    pub length: usize,
    pub utility: u128,
    pub items: Vec<String>,
}

impl SampleRecord {
    /// Order-independent identity of the pattern: its labels sorted.
    pub fn pattern_key(&self) -> Vec<String> {
        let mut k = self.items.clone();
        k.sort_unstable();
        k
    }
}

/// Writes one JSON object per line.
pub fn write_jsonl<W: Write>(records: &[SampleRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Draws a transaction id with probability `W(t)/Z`.
pub fn draw_transaction(index: &WeightIndex, rng: &mut RandomSource) -> Result<usize> {
    let alpha = rng.uniform_inclusive(index.total())?;
    Ok(index.locate(&alpha))
}

/// Length owning `alpha ∈ [1..W(t)]` when lengths are laid out in increasing
/// order with masses `vutu(ℓ, |t|)·f'(ℓ)`.
pub fn locate_length(
    t: &QuantitativeTransaction,
    utility: &LengthUtility,
    alpha: &BigUint,
    cache: &PascalCache,
) -> Option<usize> {
    let n = t.len();
    let mut acc = BigUint::default();
    for len in utility.lengths_for(n) {
        acc += vutu_unchecked(t, len, n, cache) * utility.scaled_factor(len);
        if &acc >= alpha {
            return Some(len);
        }
    }
    None
}

/// Draws a pattern length for `t`, whose weight is `total`.
pub fn draw_length(
    t: &QuantitativeTransaction,
    total: &BigUint,
    utility: &LengthUtility,
    rng: &mut RandomSource,
    cache: &PascalCache,
) -> Result<usize> {
    let alpha = rng.uniform_inclusive(total)?;
    locate_length(t, utility, &alpha, cache).ok_or(Error::ZeroMass)
}

/// Mass of all ways to complete `Y` (utility `y_utility`) with `r` items
/// taken from the first `i` positions: `vutu(r, i) + C(i, r)·u(Y)`.
pub fn cum(
    t: &QuantitativeTransaction,
    r: usize,
    y_utility: u128,
    i: usize,
    cache: &PascalCache,
) -> BigUint {
    if i == 0 {
        return BigUint::default();
    }
    let mut mass = vutu_unchecked(t, r, i, cache);
    if y_utility > 0 {
        mass += cache.get(i, r) * y_utility;
    }
    mass
}

/// Smallest position `i ∈ [r..bound]` with `cum(i) ≥ alpha`, i.e. the one with
/// `cum(i−1) < alpha ≤ cum(i)`.
pub fn select_position(
    t: &QuantitativeTransaction,
    r: usize,
    y_utility: u128,
    bound: usize,
    alpha: &BigUint,
    cache: &PascalCache,
) -> usize {
    // cum(r−1) = 0 < alpha, so the answer lies in [r..bound].
    let (mut lo, mut hi) = (r, bound);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if &cum(t, r, y_utility, mid, cache) >= alpha {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Draws `len` distinct positions of `t` (1-based, ascending) with
/// probability proportional to the utility of the itemset they form.
/// Consumes exactly `len` uniform draws.
pub fn draw_items(
    t: &QuantitativeTransaction,
    len: usize,
    rng: &mut RandomSource,
    cache: &PascalCache,
) -> Result<Vec<usize>> {
    if len == 0 || len > t.len() {
        return Err(Error::InvalidRequest(format!(
            "cannot draw {len} items from a transaction of length {}",
            t.len()
        )));
    }
    if t.len() > cache.n_max() {
        return Err(Error::PascalRange {
            n: t.len(),
            n_max: cache.n_max(),
        });
    }
    let mut positions = Vec::with_capacity(len);
    let mut bound = t.len();
    let mut y_utility = 0u128;
    for r in (1..=len).rev() {
        let total = cum(t, r, y_utility, bound, cache);
        let alpha = rng.uniform_inclusive(&total)?;
        let i = select_position(t, r, y_utility, bound, &alpha, cache);
        positions.push(i);
        y_utility += u128::from(t.weight_at(i));
        bound = i - 1;
    }
    positions.reverse();
    Ok(positions)
}

/// A pattern drawn from one transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Draw {
    pub pattern: Pattern,
    pub utility: u128,
}

impl Draw {
    pub fn len(&self) -> usize {
        self.pattern.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pattern.is_empty()
    }
}

/// Length draw followed by item draws inside an already chosen transaction
/// of weight `total`.
pub fn draw_from_transaction(
    t: &QuantitativeTransaction,
    total: &BigUint,
    utility: &LengthUtility,
    rng: &mut RandomSource,
    cache: &PascalCache,
) -> Result<Draw> {
    let len = draw_length(t, total, utility, rng, cache)?;
    let positions = draw_items(t, len, rng, cache)?;
    let mut utility_sum = 0u128;
    let items = positions
        .iter()
        .map(|&i| {
            utility_sum += u128::from(t.weight_at(i));
            t.item_at(i)
        })
        .collect();
    Ok(Draw {
        pattern: Pattern::new(items, t.id())?,
        utility: utility_sum,
    })
}

/// In-memory sampler over a weighted database.
#[derive(Debug, Clone, Copy)]
pub struct Sampler<'a> {
    db: &'a QuantitativeDatabase,
    index: &'a WeightIndex,
    cache: &'a PascalCache,
}

impl<'a> Sampler<'a> {
    pub fn new(
        db: &'a QuantitativeDatabase,
        index: &'a WeightIndex,
        cache: &'a PascalCache,
    ) -> Result<Self> {
        if index.len() != db.len() {
            return Err(Error::InvalidRequest(format!(
                "weight index covers {} transactions, database has {}",
                index.len(),
                db.len()
            )));
        }
        if db.max_transaction_len() > cache.n_max() {
            return Err(Error::PascalRange {
                n: db.max_transaction_len(),
                n_max: cache.n_max(),
            });
        }
        Ok(Self { db, index, cache })
    }

    pub fn utility(&self) -> &LengthUtility {
        self.index.utility()
    }

    /// One pattern; consumes `2 + ℓ` uniform draws.
    pub fn draw(&self, rng: &mut RandomSource) -> Result<Draw> {
        let id = draw_transaction(self.index, rng)?;
        let t = self.db.transaction(id);
        let total = self.index.weight(id);
        draw_from_transaction(t, &total, self.index.utility(), rng, self.cache)
    }

    pub fn record(&self, draw: &Draw) -> SampleRecord {
        SampleRecord {
            transaction: draw.pattern.source_transaction(),
            length: draw.len(),
            utility: draw.utility,
            items: self.db.labels_of(draw.pattern.items()),
        }
    }

    /// `k` independent draws.
    pub fn sample(&self, k: usize, rng: &mut RandomSource) -> Result<Vec<SampleRecord>> {
        (0..k).map(|_| self.draw(rng).map(|d| self.record(&d))).collect()
    }
}

/// Draws `req.k` patterns with replacement, seeded by `req.seed`.
pub fn sample_patterns(
    db: &QuantitativeDatabase,
    index: &WeightIndex,
    cache: &PascalCache,
    req: &SampleRequest,
) -> Result<Vec<SampleRecord>> {
    check_request(index, req)?;
    let sampler = Sampler::new(db, index, cache)?;
    let mut rng = RandomSource::from_seed(req.seed);
    sampler.sample(req.k, &mut rng)
}

/// Like [`sample_patterns`] but splits the `k` draws over `jobs` threads, each
/// with its own stream derived from `(seed, job)`. Output is in job order and
/// depends only on `(req, jobs)`.
pub fn sample_patterns_concurrent(
    db: &QuantitativeDatabase,
    index: &WeightIndex,
    cache: &PascalCache,
    req: &SampleRequest,
    jobs: usize,
) -> Result<Vec<SampleRecord>> {
    check_request(index, req)?;
    let sampler = Sampler::new(db, index, cache)?;
    let jobs = jobs.clamp(1, req.k);
    let per_job = req.k / jobs;
    let extra = req.k % jobs;
    let parts: Vec<Result<Vec<SampleRecord>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|j| {
                let count = per_job + usize::from(j < extra);
                scope.spawn(move || {
                    let mut rng = RandomSource::for_job(req.seed, j as u64);
                    sampler.sample(count, &mut rng)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampling thread panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(req.k);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

fn check_request(index: &WeightIndex, req: &SampleRequest) -> Result<()> {
    if req.k == 0 {
        return Err(Error::InvalidRequest("k must be at least 1".into()));
    }
    if &req.utility != index.utility() {
        return Err(Error::InvalidRequest(format!(
            "index was built for {}, request asks for {}",
            index.utility(),
            req.utility
        )));
    }
    Ok(())
}

/// Baseline: a uniform eligible transaction, a uniform admissible length and
/// uniform items without replacement. Utility plays no role.
pub fn bootstrap_sample(db: &QuantitativeDatabase, req: &SampleRequest) -> Result<Vec<SampleRecord>> {
    if req.k == 0 {
        return Err(Error::InvalidRequest("k must be at least 1".into()));
    }
    let u = &req.utility;
    let eligible: Vec<usize> = db
        .transactions()
        .iter()
        .filter(|t| t.len() >= u.min_len())
        .map(|t| t.id())
        .collect();
    if eligible.is_empty() {
        return Err(Error::ZeroMass);
    }
    let mut rng = RandomSource::from_seed(req.seed);
    let mut out = Vec::with_capacity(req.k);
    let mut scratch: Vec<usize> = Vec::new();
    for _ in 0..req.k {
        let pick = rng.uniform_inclusive_u64(eligible.len() as u64)? as usize - 1;
        let t = db.transaction(eligible[pick]);
        let lengths = u.lengths_for(t.len());
        let span = (lengths.end() - lengths.start() + 1) as u64;
        let len = lengths.start() + rng.uniform_inclusive_u64(span)? as usize - 1;
        scratch.clear();
        scratch.extend(1..=t.len());
        for k in 0..len {
            let remaining = (scratch.len() - k) as u64;
            let j = k + rng.uniform_inclusive_u64(remaining)? as usize - 1;
            scratch.swap(k, j);
        }
        let mut positions = scratch[..len].to_vec();
        positions.sort_unstable();
        let utility = positions.iter().map(|&i| u128::from(t.weight_at(i))).sum();
        let items: Vec<_> = positions.iter().map(|&i| t.item_at(i)).collect();
        out.push(SampleRecord {
            transaction: t.id(),
            length: len,
            utility,
            items: db.labels_of(&items),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qdb::{parse_qdb_str, PriceTable};
    use crate::weighting::{build_weight_index, cache_for, length_masses};
    use num_traits::ToPrimitive;

    fn t1() -> QuantitativeTransaction {
        QuantitativeTransaction::from_weights(0, &[44, 12, 75, 34]).unwrap()
    }

    fn toy() -> QuantitativeDatabase {
        parse_qdb_str("a:44 b:12 c:75 d:34\na:44\nb:12\nc:75 d:34\n", PriceTable::new()).unwrap()
    }

    fn n(v: u32) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn cum_examples() {
        let c = PascalCache::new(4);
        let t = t1();
        assert_eq!(cum(&t, 2, 0, 4, &c), n(495));
        assert_eq!(cum(&t, 1, 75, 2, &c), n(206));
        assert_eq!(cum(&t, 1, 75, 1, &c), n(119));
        assert_eq!(cum(&t, 1, 75, 0, &c), n(0));
    }

    #[test]
    fn select_position_boundaries() {
        let c = PascalCache::new(4);
        let t = t1();
        // cum(r=2, i) over i = 1..4 is 0, 56, 262, 495
        assert_eq!(select_position(&t, 2, 0, 4, &n(100), &c), 3);
        assert_eq!(select_position(&t, 2, 0, 4, &n(1), &c), 2);
        assert_eq!(select_position(&t, 2, 0, 4, &n(56), &c), 2);
        assert_eq!(select_position(&t, 2, 0, 4, &n(57), &c), 3);
        assert_eq!(select_position(&t, 2, 0, 4, &n(263), &c), 4);
        assert_eq!(select_position(&t, 2, 0, 4, &n(495), &c), 4);
    }

    #[test]
    fn length_masses_for_t1() {
        let c = PascalCache::new(4);
        let m = length_masses(&t1(), &LengthUtility::unconstrained(), &c);
        assert_eq!(m[0], (1, n(165)));
        assert_eq!(m[1], (2, n(495)));
        assert_eq!(locate_length(&t1(), &LengthUtility::unconstrained(), &n(165), &c), Some(1));
        assert_eq!(locate_length(&t1(), &LengthUtility::unconstrained(), &n(166), &c), Some(2));
        assert_eq!(locate_length(&t1(), &LengthUtility::unconstrained(), &n(1320), &c), Some(4));
        assert_eq!(locate_length(&t1(), &LengthUtility::unconstrained(), &n(1321), &c), None);
    }

    #[test]
    fn full_length_draw_is_whole_transaction() {
        let c = PascalCache::new(4);
        let mut rng = RandomSource::from_seed(3);
        for _ in 0..50 {
            assert_eq!(draw_items(&t1(), 4, &mut rng, &c).unwrap(), vec![1, 2, 3, 4]);
        }
        assert!(draw_items(&t1(), 5, &mut rng, &c).is_err());
        assert!(draw_items(&t1(), 0, &mut rng, &c).is_err());
    }

    #[test]
    fn pairs_of_t1_follow_utility() {
        // P({1,3} | ℓ=2) = 119/495
        let c = PascalCache::new(4);
        let t = t1();
        let mut rng = RandomSource::from_seed(11);
        let draws = 100_000;
        let mut hits = 0;
        for _ in 0..draws {
            if draw_items(&t, 2, &mut rng, &c).unwrap() == vec![1, 3] {
                hits += 1;
            }
        }
        let p = 119.0 / 495.0;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        let p_hat = hits as f64 / draws as f64;
        assert!((p_hat - p).abs() < 4.0 * sigma, "{p_hat} vs {p}");
    }

    #[test]
    fn single_item_transaction() {
        let c = PascalCache::new(1);
        let t = QuantitativeTransaction::from_weights(0, &[9]).unwrap();
        let mut rng = RandomSource::from_seed(0);
        let d = draw_from_transaction(&t, &n(9), &LengthUtility::unconstrained(), &mut rng, &c).unwrap();
        assert_eq!(d.pattern.items().len(), 1);
        assert_eq!(d.utility, 9);
    }

    #[test]
    fn draw_budget_is_two_plus_length() {
        let db = toy();
        let c = cache_for(&db);
        let idx = build_weight_index(&db, &LengthUtility::unconstrained(), &c).unwrap();
        let s = Sampler::new(&db, &idx, &c).unwrap();
        let mut rng = RandomSource::from_seed(5);
        for _ in 0..2000 {
            let before = rng.draws();
            let d = s.draw(&mut rng).unwrap();
            assert_eq!(rng.draws() - before, 2 + d.len() as u64);
        }
    }

    #[test]
    fn transaction_frequency_matches_weight() {
        let db = toy();
        let c = cache_for(&db);
        let idx = build_weight_index(&db, &LengthUtility::unconstrained(), &c).unwrap();
        let mut rng = RandomSource::from_seed(8);
        let draws = 100_000;
        let t1_hits = (0..draws)
            .filter(|_| draw_transaction(&idx, &mut rng).unwrap() == 0)
            .count();
        let p = 1320.0 / 1594.0;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        let p_hat = t1_hits as f64 / draws as f64;
        assert!((p_hat - p).abs() < 3.0 * sigma, "{p_hat} vs {p}");
    }

    #[test]
    fn request_validation() {
        assert!(SampleRequest::new(LengthUtility::unconstrained(), 0, 1).is_err());
        let db = toy();
        let c = cache_for(&db);
        let idx = build_weight_index(&db, &LengthUtility::unconstrained(), &c).unwrap();
        let other = SampleRequest::new(LengthUtility::hup(1, Some(2)).unwrap(), 3, 1).unwrap();
        assert!(matches!(
            sample_patterns(&db, &idx, &c, &other),
            Err(Error::InvalidRequest(_))
        ));
    }

    #[test]
    fn samples_are_deterministic_and_constrained() {
        let db = toy();
        let c = cache_for(&db);
        let u = LengthUtility::hup(2, Some(3)).unwrap();
        let idx = build_weight_index(&db, &u, &c).unwrap();
        let req = SampleRequest::new(u, 500, 99).unwrap();
        let a = sample_patterns(&db, &idx, &c, &req).unwrap();
        let b = sample_patterns(&db, &idx, &c, &req).unwrap();
        assert_eq!(a, b);
        for r in &a {
            assert!((2..=3).contains(&r.length));
            assert_eq!(r.items.len(), r.length);
            let ids = db.resolve(&r.items).unwrap();
            assert!(db.transaction(r.transaction).contains_all(&ids));
            assert_eq!(db.transaction(r.transaction).utility_of(&ids), r.utility);
        }
        let c1 = sample_patterns_concurrent(&db, &idx, &c, &req, 3).unwrap();
        let c2 = sample_patterns_concurrent(&db, &idx, &c, &req, 3).unwrap();
        assert_eq!(c1.len(), 500);
        assert_eq!(c1, c2);
    }

    #[test]
    fn singletons_only() {
        let db = toy();
        let c = cache_for(&db);
        let u = LengthUtility::hup(1, Some(1)).unwrap();
        let idx = build_weight_index(&db, &u, &c).unwrap();
        assert_eq!(idx.total().to_u32(), Some(165 + 44 + 12 + 109));
        let req = SampleRequest::new(u, 20_000, 4).unwrap();
        let recs = sample_patterns(&db, &idx, &c, &req).unwrap();
        assert!(recs.iter().all(|r| r.length == 1));
        let c_hits = recs.iter().filter(|r| r.items == ["c"]).count();
        let p: f64 = 150.0 / 330.0;
        let sigma = (p * (1.0 - p) / 20_000.0).sqrt();
        assert!((c_hits as f64 / 20_000.0 - p).abs() < 4.0 * sigma);
    }

    #[test]
    fn bootstrap_examples() {
        let single = parse_qdb_str("x:5", PriceTable::new()).unwrap();
        let req = SampleRequest::new(LengthUtility::unconstrained(), 10, 1).unwrap();
        let recs = bootstrap_sample(&single, &req).unwrap();
        assert!(recs.iter().all(|r| r.items == ["x"] && r.utility == 5));

        let req = SampleRequest::new(LengthUtility::hup(3, None).unwrap(), 10, 1).unwrap();
        let recs = bootstrap_sample(&toy(), &req).unwrap();
        assert!(recs.iter().all(|r| r.transaction == 0 && r.length >= 3));
        let req = SampleRequest::new(LengthUtility::hup(5, None).unwrap(), 10, 1).unwrap();
        assert!(matches!(bootstrap_sample(&toy(), &req), Err(Error::ZeroMass)));
    }

    #[test]
    fn bootstrap_singletons_are_uniform() {
        // P(a specific singleton of t1) = 1/4 · 1/4
        let req = SampleRequest::new(LengthUtility::hup(1, Some(1)).unwrap(), 80_000, 6).unwrap();
        let recs = bootstrap_sample(&toy(), &req).unwrap();
        let hits = recs.iter().filter(|r| r.transaction == 0 && r.items == ["b"]).count();
        let p: f64 = 1.0 / 16.0;
        let sigma = (p * (1.0 - p) / 80_000.0).sqrt();
        assert!((hits as f64 / 80_000.0 - p).abs() < 4.0 * sigma);
    }

    #[test]
    fn jsonl_lines() {
        let rec = SampleRecord {
            transaction: 3,
            length: 2,
            utility: 109,
            items: vec!["c".into(), "d".into()],
        };
        let mut buf = Vec::new();
        write_jsonl(&[rec.clone(), rec], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(
            text.lines().next().unwrap(),
            r#"{"transaction":3,"length":2,"utility":109,"items":["c","d"]}"#
        );
    }
}
