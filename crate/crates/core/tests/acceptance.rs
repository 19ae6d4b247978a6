//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::alloc::{GlobalAlloc, Layout, System};
use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use hupsamp_core::combinatorics::{half_pascal_size, PascalCache, RandomSource};
use hupsamp_core::disk::{select_ids, stream_draw, stream_weigh};
use hupsamp_core::gen::GenConfig;
use hupsamp_core::oracle::{
    compare_records, enumerate, representativeness, sequential_select,
    vutu_recursive, DEFAULT_SUBSET_CAP,
};
use hupsamp_core::profile::{
    merge_subprofiles, pattern_to_subprofile, profile_to_qdb, Direction, PredicateWeights, Profile,
};
use hupsamp_core::qdb::{
    parse_qdb_str, LengthUtility, PriceTable, QuantitativeDatabase, QuantitativeTransaction,
    UtilityMode,
};
use hupsamp_core::sampler::{
    bootstrap_sample, cum, locate_length, sample_patterns, select_position, SampleRecord,
    SampleRequest, Sampler,
};
use hupsamp_core::weighting::{
    build_weight_index, cache_for, length_masses, transaction_total, vutu,
};
use hupsamp_core::Error;
use num_bigint::BigUint;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Counting;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            let now = CURRENT.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

/// Starts a measurement window; returns the live bytes at its start.
fn reset_peak() -> usize {
    let now = CURRENT.load(Ordering::Relaxed);
    PEAK.store(now, Ordering::Relaxed);
    now
}

fn peak_since(base: usize) -> usize {
    PEAK.load(Ordering::Relaxed).saturating_sub(base)
}

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    }};
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

const TOY: &str = "a:44 b:12 c:75 d:34\na:44\nb:12\nc:75 d:34\n";

fn toy() -> QuantitativeDatabase {
    parse_qdb_str(TOY, PriceTable::new()).unwrap()
}

fn toy_profile() -> Profile {
    Profile::from_json(&fs::read_to_string(fixtures().join("toy_profile.json")).unwrap()).unwrap()
}

fn toy_weights() -> PredicateWeights {
    serde_json::from_str(&fs::read_to_string(fixtures().join("toy_predicate_weights.json")).unwrap())
        .unwrap()
}

fn key(labels: &[&str]) -> Vec<String> {
    labels.iter().map(|s| s.to_string()).collect()
}

fn within_sigmas(hits: usize, n: usize, p: f64, sigmas: f64) -> (bool, f64) {
    let observed = hits as f64 / n as f64;
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    ((observed - p).abs() <= sigmas * sigma, (observed - p) / sigma)
}

fn ratio(a: u64, b: u64) -> BigRational {
    BigRational::new(a.into(), b.into())
}

fn random_transaction(rng: &mut ChaCha8Rng, max_len: usize, max_weight: u64) -> QuantitativeTransaction {
    let len = rng.random_range(1..=max_len);
    let weights: Vec<u64> = (0..len).map(|_| rng.random_range(1..=max_weight)).collect();
    QuantitativeTransaction::from_weights(0, &weights).unwrap()
}

fn exact_distribution() -> Outcome {
    let start = Instant::now();
    let db = toy();
    let u = LengthUtility::unconstrained();
    let dist = enumerate(&db, &u, DEFAULT_SUBSET_CAP).map_err(|e| e.to_string())?;
    ensure!(
        dist.scaled_normalizer() == &BigUint::from(1594u32),
        "Z' = {}",
        dist.scaled_normalizer()
    );
    let cache = cache_for(&db);
    let index = build_weight_index(&db, &u, &cache).map_err(|e| e.to_string())?;
    let n = 200_000;
    let req = SampleRequest::new(u, n, 20240601).unwrap();
    let sample = sample_patterns(&db, &index, &cache, &req).map_err(|e| e.to_string())?;
    let report = compare_records(&dist, &sample).map_err(|e| e.to_string())?;
    ensure!(report.tv_distance < 0.01, "tv = {}", report.tv_distance);
    ensure!(report.chi_square.p_value > 0.001, "chi-square p = {}", report.chi_square.p_value);
    let ac = sample.iter().filter(|r| r.pattern_key() == key(&["a", "c"])).count();
    let (ok_ac, z_ac) = within_sigmas(ac, n, 119.0 / 1594.0, 3.0);
    ensure!(ok_ac, "P(ac) off by {z_ac:.2} sigma");
    let t1 = sample.iter().filter(|r| r.transaction == 0).count();
    let (ok_t1, z_t1) = within_sigmas(t1, n, 1320.0 / 1594.0, 3.0);
    ensure!(ok_t1, "P(t1) off by {z_t1:.2} sigma");
    let elapsed = start.elapsed().as_secs_f64();
    ensure!(elapsed < 60.0, "took {elapsed:.1} s");
    Ok(format!(
        "Z'=1594 tv={:.4} chi2 p={:.3} z(ac)={z_ac:.2} z(t1)={z_t1:.2} {elapsed:.2}s",
        report.tv_distance, report.chi_square.p_value
    ))
}

fn worked_numbers() -> Outcome {
    let t1 = QuantitativeTransaction::from_weights(0, &[44, 12, 75, 34]).unwrap();
    let cache = PascalCache::new(4);
    let table: [[u32; 4]; 4] = [
        [44, 56, 131, 165],
        [0, 56, 262, 495],
        [0, 0, 131, 495],
        [0, 0, 0, 165],
    ];
    for (l, row) in table.iter().enumerate() {
        for (i, &want) in row.iter().enumerate() {
            let closed = vutu(&t1, l + 1, i + 1, &cache).map_err(|e| e.to_string())?;
            let recursive = vutu_recursive(&t1, l + 1, i + 1).map_err(|e| e.to_string())?;
            ensure!(
                closed == BigUint::from(want) && recursive == BigUint::from(want),
                "V({}, {}) = {closed} / {recursive}, want {want}",
                l + 1,
                i + 1
            );
        }
    }
    let u = LengthUtility::unconstrained();
    let masses = length_masses(&t1, &u, &cache);
    let per_length: BigUint = masses.iter().map(|(_, m)| m.clone()).sum();
    let closed = BigUint::from(165u32) << 3;
    let total = transaction_total(&t1, &u, &cache).map_err(|e| e.to_string())?;
    ensure!(
        per_length == BigUint::from(1320u32) && closed == per_length && total == per_length,
        "W(t1): sum {per_length}, closed {closed}, weighted {total}"
    );
    // count the α values the length draw maps to ℓ = 2
    let hits = (1u32..=1320)
        .filter(|&a| locate_length(&t1, &u, &BigUint::from(a), &cache) == Some(2))
        .count() as u64;
    let p2 = ratio(hits, 1320);
    ensure!(p2 == ratio(495, 1320), "P(len 2 | t1) = {p2}");
    Ok("upper-triangle table 16/16 both paths, W(t1)=1320=2^3*165, P(len 2|t1)=495/1320".into())
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let transactions = 1500;
    let mut cells = 0usize;
    for _ in 0..transactions {
        let t = random_transaction(&mut rng, 12, 100);
        let n = t.len();
        let cache = PascalCache::new(n);
        for i in 1..=n {
            for l in 1..=i {
                let closed = vutu(&t, l, i, &cache).unwrap();
                let rec = vutu_recursive(&t, l, i).unwrap();
                ensure!(closed == rec, "closed form {closed} != recurrence {rec} at ({l},{i})");
                let mirror = vutu(&t, i - l + 1, i, &cache).unwrap();
                ensure!(closed == mirror, "symmetry fails at ({l},{i})");
                cells += 1;
            }
        }
        let sum: BigUint = (1..=n).map(|l| vutu(&t, l, n, &cache).unwrap()).sum();
        let total = transaction_total(&t, &LengthUtility::unconstrained(), &cache).unwrap();
        let closed = BigUint::from(t.total_utility()) << (n - 1);
        ensure!(sum == total && total == closed, "W mismatch: {sum} {total} {closed}");
    }
    for n in 0..=64 {
        let stored = PascalCache::new(n).stored_count();
        let g = if n % 2 == 0 { (n / 2 + 1).pow(2) } else { (n + 1) * (n + 3) / 4 };
        ensure!(stored == g && half_pascal_size(n) == g, "G({n}): stored {stored}, want {g}");
    }
    let mut dbs = 0;
    for round in 0..300 {
        let db = random_db(&mut rng, 6, 8);
        let u = random_utility(&mut rng, db.max_transaction_len());
        let cache = cache_for(&db);
        let index = build_weight_index(&db, &u, &cache);
        let dist = enumerate(&db, &u, DEFAULT_SUBSET_CAP);
        match (index, dist) {
            (Ok(i), Ok(d)) => ensure!(
                i.total() == d.scaled_normalizer(),
                "round {round}: Z {} != Z' {} under {u}",
                i.total(),
                d.scaled_normalizer()
            ),
            (Err(Error::ZeroMass), Err(Error::ZeroMass)) => {}
            (a, b) => return Err(format!("round {round}: {:?} vs {:?}", a.err(), b.err())),
        }
        dbs += 1;
    }
    Ok(format!(
        "{transactions} transactions, {cells} cells, G(0..=64), Z=Z' on {dbs} databases"
    ))
}

fn random_db(rng: &mut ChaCha8Rng, max_transactions: usize, max_len: usize) -> QuantitativeDatabase {
    let alphabet = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"];
    let mut text = String::new();
    for _ in 0..rng.random_range(1..=max_transactions) {
        let len = rng.random_range(1..=max_len);
        let picked = rand::seq::index::sample(rng, alphabet.len(), len);
        for k in picked {
            text.push_str(&format!("{}:{} ", alphabet[k], rng.random_range(1..=20)));
        }
        text.push('\n');
    }
    let prices: PriceTable = alphabet
        .iter()
        .map(|l| (l.to_string(), rng.random_range(1..=5)))
        .collect();
    parse_qdb_str(&text, prices).unwrap()
}

fn random_utility(rng: &mut ChaCha8Rng, max_len: usize) -> LengthUtility {
    let m = rng.random_range(1..=max_len.max(1) + 1);
    let upper = rng.random_range(m..=max_len.max(m) + 1);
    match rng.random_range(0..3) {
        0 => LengthUtility::hup(m, None).unwrap(),
        1 => LengthUtility::hup(m, Some(upper)).unwrap(),
        _ => LengthUtility::haup(m, upper).unwrap(),
    }
}

fn sequential_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let triples = 10_000;
    let mut boundary_hits = 0;
    for k in 0..triples {
        let t = random_transaction(&mut rng, 12, 100);
        let n = t.len();
        let cache = PascalCache::new(n);
        let len = rng.random_range(1..=n);
        // state after drawing len − r items from positions above the bound
        let r = rng.random_range(1..=len);
        let bound = rng.random_range(r..=n - (len - r));
        let above = rand::seq::index::sample(&mut rng, n - bound, len - r);
        let y: u128 = above
            .iter()
            .map(|p| u128::from(t.weight_at(bound + 1 + p)))
            .sum();
        let top = cum(&t, r, y, bound, &cache);
        let alpha = match k % 4 {
            0 => BigUint::from(1u32),
            1 => top.clone(),
            _ => RandomSource::from_seed(k as u64).uniform_inclusive(&top).unwrap(),
        };
        let fast = select_position(&t, r, y, bound, &alpha, &cache);
        let slow = sequential_select(&t, r, y, bound, &alpha, &cache).map_err(|e| e.to_string())?;
        ensure!(fast == slow, "triple {k}: binary search {fast}, sequential {slow}");
        if fast == bound || fast == r {
            boundary_hits += 1;
        }
    }
    Ok(format!("{triples} triples agree ({boundary_hits} at interval ends)"))
}

fn write_db(path: &Path, db: &QuantitativeDatabase) {
    fs::write(path, db.to_qdb_text()).unwrap();
}

fn disk_equivalence(dir: &Path) -> Outcome {
    let profile_db = profile_to_qdb(&toy_profile(), &toy_weights(), Direction::Both)
        .unwrap()
        .db;
    let generated = GenConfig {
        transactions: 300,
        avg_len: 4,
        items: 15,
        max_quantity: 9,
        seed: 2,
    }
    .build(PriceTable::new())
    .unwrap();
    let fixtures: Vec<(&str, QuantitativeDatabase)> =
        vec![("toy", toy()), ("profile", profile_db), ("generated", generated)];
    let utilities = [
        LengthUtility::unconstrained(),
        LengthUtility::hup(2, Some(3)).unwrap(),
        LengthUtility::haup(1, 3).unwrap(),
    ];
    let mut lists = 0;
    for (name, db) in &fixtures {
        let path = dir.join(format!("{name}.qdb"));
        write_db(&path, db);
        for u in &utilities {
            let cache = cache_for(db);
            let mem = build_weight_index(db, u, &cache).map_err(|e| e.to_string())?;
            let mut dcache = PascalCache::new(0);
            let dw = stream_weigh(&path, u, db.prices(), &mut dcache).map_err(|e| e.to_string())?;
            ensure!(mem.weights() == dw.weights(), "{name} under {u}: weight lists differ");
            lists += 1;
        }
    }

    let db = toy();
    let path = dir.join("toy.qdb");
    let u = LengthUtility::unconstrained();
    let n = 200_000;
    let cache = cache_for(&db);
    let index = build_weight_index(&db, &u, &cache).unwrap();
    let mem = sample_patterns(&db, &index, &cache, &SampleRequest::new(u.clone(), n, 77).unwrap())
        .map_err(|e| e.to_string())?;
    let mut dcache = PascalCache::new(0);
    let dw = stream_weigh(&path, &u, &PriceTable::new(), &mut dcache).unwrap();
    let mut rng = RandomSource::from_seed(78);
    let ids = select_ids(&dw, n, &mut rng).unwrap();
    let disk = stream_draw(&dw, &ids, &mut rng, &mut dcache).map_err(|e| e.to_string())?;
    ensure!(disk.len() == n, "disk sample has {} records", disk.len());
    let tv = empirical_tv(&mem, &disk);
    ensure!(tv < 0.01, "tv(disk, memory) = {tv}");
    let dist = enumerate(&db, &u, DEFAULT_SUBSET_CAP).unwrap();
    let disk_report = compare_records(&dist, &disk).unwrap();

    let (peak_weigh, peak_draw, bound, file_bytes, padded_peak) = memory_ceiling(dir)?;
    Ok(format!(
        "{lists} identical weight lists; tv(disk, memory)={tv:.4}, disk vs exact p={:.3}; \
         10^6 transactions ({:.0} MiB file): peak {:.1} MiB weigh / {:.1} MiB draw, \
         padded file peak {:.1} MiB, bound {:.1} MiB",
        disk_report.chi_square.p_value,
        file_bytes as f64 / 1048576.0,
        peak_weigh as f64 / 1048576.0,
        peak_draw as f64 / 1048576.0,
        padded_peak as f64 / 1048576.0,
        bound as f64 / 1048576.0,
    ))
}

fn empirical_tv(a: &[SampleRecord], b: &[SampleRecord]) -> f64 {
    let mut counts: HashMap<Vec<String>, (f64, f64)> = HashMap::new();
    for r in a {
        counts.entry(r.pattern_key()).or_default().0 += 1.0 / a.len() as f64;
    }
    for r in b {
        counts.entry(r.pattern_key()).or_default().1 += 1.0 / b.len() as f64;
    }
    counts.values().map(|(p, q)| (p - q).abs()).sum::<f64>() / 2.0
}

/// Peak heap use of both passes over a generated 10^6-transaction file, and
/// over a copy with the same transactions and much longer labels.
fn memory_ceiling(dir: &Path) -> Result<(usize, usize, usize, u64, usize), String> {
    let transactions = 1_000_000;
    let cfg = GenConfig {
        transactions,
        avg_len: 10,
        items: 1000,
        max_quantity: 10,
        seed: 99,
    };
    let path = dir.join("big.qdb");
    cfg.write(BufWriter::new(fs::File::create(&path).unwrap()))
        .map_err(|e| e.to_string())?;
    let padded = dir.join("big-padded.qdb");
    {
        let text = fs::read_to_string(&path).unwrap();
        let mut out = BufWriter::new(fs::File::create(&padded).unwrap());
        for token in text.split_inclusive([' ', '\n']) {
            out.write_all(b"a-considerably-longer-item-label-").unwrap();
            out.write_all(token.as_bytes()).unwrap();
        }
        out.flush().unwrap();
    }
    let file_bytes = fs::metadata(&path).unwrap().len();
    let padded_bytes = fs::metadata(&padded).unwrap().len();
    let bound = transactions * 96 + (8 << 20);
    let u = LengthUtility::hup(1, Some(10)).unwrap();

    let run = |p: &Path| -> Result<(usize, usize), String> {
        let base = reset_peak();
        let mut cache = PascalCache::new(0);
        let dw = stream_weigh(p, &u, &PriceTable::new(), &mut cache).map_err(|e| e.to_string())?;
        let weigh = peak_since(base);
        let mut rng = RandomSource::from_seed(5);
        let ids = select_ids(&dw, 1000, &mut rng).map_err(|e| e.to_string())?;
        let base_draw = reset_peak();
        let records = stream_draw(&dw, &ids, &mut rng, &mut cache).map_err(|e| e.to_string())?;
        let draw = peak_since(base_draw);
        ensure!(records.len() == 1000, "draw returned {} records", records.len());
        ensure!(dw.len() == transactions, "weighed {} transactions", dw.len());
        Ok((weigh, draw))
    };
    let (weigh, draw) = run(&path)?;
    let (padded_weigh, padded_draw) = run(&padded)?;
    ensure!(weigh < bound, "pass one peaked at {weigh} bytes, bound {bound}");
    ensure!(draw < bound, "pass two peaked at {draw} bytes, bound {bound}");
    ensure!(
        padded_weigh < bound && padded_draw < bound,
        "padded file ({padded_bytes} bytes) peaked at {padded_weigh}/{padded_draw}"
    );
    ensure!(
        (padded_weigh as f64) < weigh as f64 * 1.05 + 1048576.0,
        "peak grew with payload: {weigh} -> {padded_weigh}"
    );
    ensure!(
        (weigh as u64) < file_bytes,
        "peak {weigh} is not below the file size {file_bytes}"
    );
    fs::remove_file(&path).ok();
    fs::remove_file(&padded).ok();
    Ok((weigh, draw, bound, file_bytes, padded_weigh))
}

fn constraints_and_budget() -> Outcome {
    let db = GenConfig {
        transactions: 500,
        avg_len: 5,
        items: 30,
        max_quantity: 9,
        seed: 8,
    }
    .build(PriceTable::new())
    .unwrap();
    let cache = cache_for(&db);
    let mut configs = Vec::new();
    for mode in [UtilityMode::Hup, UtilityMode::Haup] {
        for m in 1..=5 {
            for upper in m..=10 {
                configs.push(LengthUtility::new(mode, m, Some(upper)).unwrap());
            }
            if mode == UtilityMode::Hup {
                configs.push(LengthUtility::hup(m, None).unwrap());
            }
        }
    }
    let mut patterns = 0;
    for (c, u) in configs.iter().enumerate() {
        let index = build_weight_index(&db, u, &cache).map_err(|e| e.to_string())?;
        let sampler = Sampler::new(&db, &index, &cache).unwrap();
        let mut rng = RandomSource::from_seed(c as u64);
        for _ in 0..500 {
            let before = rng.draws();
            let d = sampler.draw(&mut rng).map_err(|e| e.to_string())?;
            let used = rng.draws() - before;
            ensure!(u.contains(d.len()), "length {} outside {u}", d.len());
            ensure!(used == 2 + d.len() as u64, "{used} draws for a length-{} pattern", d.len());
            patterns += 1;
        }
    }
    Ok(format!("{patterns} patterns over {} constraints: lengths in range, 2+len draws each", configs.len()))
}

fn baseline_separation() -> Outcome {
    let db = profile_to_qdb(&toy_profile(), &toy_weights(), Direction::Both)
        .unwrap()
        .db;
    let u = LengthUtility::unconstrained();
    let cache = cache_for(&db);
    let index = build_weight_index(&db, &u, &cache).unwrap();
    let n = 10_000;
    let exact = sample_patterns(&db, &index, &cache, &SampleRequest::new(u.clone(), n, 1).unwrap())
        .map_err(|e| e.to_string())?;
    let boot = bootstrap_sample(&db, &SampleRequest::new(u.clone(), n, 2).unwrap())
        .map_err(|e| e.to_string())?;
    let reports = representativeness(&db, &[("exact", &exact), ("bootstrap", &boot)])
        .map_err(|e| e.to_string())?;
    let (e, b) = (&reports[0], &reports[1]);
    ensure!(
        e.mean_normalized_utility > b.mean_normalized_utility,
        "exact mean {} <= bootstrap mean {}",
        e.mean_normalized_utility,
        b.mean_normalized_utility
    );
    let dist = enumerate(&db, &u, DEFAULT_SUBSET_CAP).unwrap();
    let report = compare_records(&dist, &boot).unwrap();
    ensure!(report.chi_square.p_value < 1e-6, "bootstrap p = {}", report.chi_square.p_value);
    Ok(format!(
        "mean normalized utility exact {:.5} [{:.5}, {:.5}] vs bootstrap {:.5} [{:.5}, {:.5}]; \
         bootstrap chi2={:.0} p={:.1e}",
        e.mean_normalized_utility,
        e.confidence_interval_95.0,
        e.confidence_interval_95.1,
        b.mean_normalized_utility,
        b.confidence_interval_95.0,
        b.confidence_interval_95.1,
        report.chi_square.statistic,
        report.chi_square.p_value,
    ))
}

fn performance_smoke(dir: &Path) -> Outcome {
    let cfg = GenConfig {
        transactions: 1_000_000,
        avg_len: 10,
        items: 1000,
        max_quantity: 10,
        seed: 4,
    };
    let path = dir.join("perf.qdb");
    cfg.write(BufWriter::new(fs::File::create(&path).unwrap()))
        .map_err(|e| e.to_string())?;
    let u = LengthUtility::hup(1, Some(10)).unwrap();
    let start = Instant::now();
    let db = hupsamp_core::qdb::parse_qdb(
        std::io::BufReader::new(fs::File::open(&path).unwrap()),
        PriceTable::new(),
    )
    .map_err(|e| e.to_string())?;
    let parsed = start.elapsed().as_secs_f64();
    let cache = cache_for(&db);
    let index = build_weight_index(&db, &u, &cache).map_err(|e| e.to_string())?;
    let preprocess = start.elapsed().as_secs_f64();
    fs::remove_file(&path).ok();
    ensure!(preprocess < 60.0, "preprocessing took {preprocess:.1} s");
    let draws = 10_000;
    let sampler = Sampler::new(&db, &index, &cache).unwrap();
    let mut rng = RandomSource::from_seed(6);
    let start = Instant::now();
    for _ in 0..draws {
        sampler.draw(&mut rng).map_err(|e| e.to_string())?;
    }
    let per_pattern = start.elapsed().as_secs_f64() * 1000.0 / draws as f64;
    ensure!(per_pattern < 5.0, "{per_pattern:.3} ms per pattern");
    Ok(format!(
        "|D|=10^6 avg len {:.2}: preprocess {preprocess:.2}s (parse {parsed:.2}s), {per_pattern:.4} ms/pattern",
        db.stats().avg_len
    ))
}

fn subprofile_fidelity() -> Outcome {
    let profile = toy_profile();
    let s = pattern_to_subprofile(&["l2", "l4"], &profile).map_err(|e| e.to_string())?;
    let nodes: Vec<Vec<String>> = s.nodes.iter().map(|n| n.labels.clone()).collect();
    ensure!(
        nodes == vec![key(&["C1", "C3"]), key(&["C4"]), key(&["e1", "e2"])],
        "nodes {nodes:?}"
    );
    ensure!(s.triples() == 2, "{} edges", s.triples());

    let (n, max_len) = (10, 5);
    let db = profile_to_qdb(&profile, &toy_weights(), Direction::Both).unwrap().db;
    let u = LengthUtility::haup(1, max_len).unwrap();
    let cache = cache_for(&db);
    let index = build_weight_index(&db, &u, &cache).unwrap();
    let records = sample_patterns(&db, &index, &cache, &SampleRequest::new(u, n, 1).unwrap())
        .map_err(|e| e.to_string())?;
    let parts = records
        .iter()
        .map(|r| pattern_to_subprofile(&r.items, &profile))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let merged = merge_subprofiles(&parts);
    ensure!(merged.triples() <= max_len * n, "{} triples", merged.triples());

    // a larger profile where the bound can bite
    let big = chain_profile(60);
    let big_db = profile_to_qdb(&big, &PredicateWeights::new(), Direction::Both).unwrap().db;
    let cache = cache_for(&big_db);
    let index = build_weight_index(&big_db, &u_haup(max_len), &cache).unwrap();
    let records = sample_patterns(&big_db, &index, &cache, &SampleRequest::new(u_haup(max_len), n, 9).unwrap())
        .unwrap();
    let parts: Vec<_> = records
        .iter()
        .map(|r| pattern_to_subprofile(&r.items, &big).unwrap())
        .collect();
    let big_merged = merge_subprofiles(&parts);
    ensure!(big_merged.triples() <= max_len * n, "{} triples on the larger profile", big_merged.triples());
    Ok(format!(
        "pattern l2,l4 -> {{C1,C3}} {{C4}} {{e1,e2}} with 2 edges; merged N=10 M=5: {} and {} triples <= 50",
        merged.triples(),
        big_merged.triples()
    ))
}

fn u_haup(max_len: usize) -> LengthUtility {
    LengthUtility::haup(1, max_len).unwrap()
}

/// Hub node with `spokes` outgoing edges to distinct leaves.
fn chain_profile(spokes: usize) -> Profile {
    let mut nodes = vec![serde_json::json!({"id": "hub", "concepts": ["H"]})];
    let mut edges = Vec::new();
    for k in 0..spokes {
        nodes.push(serde_json::json!({"id": format!("n{k}"), "concepts": [format!("C{k}")]}));
        edges.push(serde_json::json!({
            "id": format!("e{k}"), "source": "hub", "predicate": format!("P{}", k % 3),
            "target": format!("n{k}"), "weight": 1 + k % 7
        }));
    }
    serde_json::from_value(serde_json::json!({"nodes": nodes, "edges": edges})).unwrap()
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let criteria: Vec<Criterion> = vec![
        ("exact distribution reproduction", Box::new(exact_distribution)),
        ("worked-example numbers", Box::new(worked_numbers)),
        ("closed-form and property suites", Box::new(property_suites)),
        ("sequential and binary-search selection agree", Box::new(sequential_equivalence)),
        ("disk and in-memory equivalence", Box::new(|| disk_equivalence(dir.path()))),
        ("length constraints and draw budget", Box::new(constraints_and_budget)),
        ("separation from the bootstrap baseline", Box::new(baseline_separation)),
        ("performance smoke at 10^6 transactions", Box::new(|| performance_smoke(dir.path()))),
        ("sub-profile fidelity", Box::new(subprofile_fidelity)),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(o) => o,
            Err(panic) => Err(panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{}] {name} ({secs:.1}s): {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name} ({secs:.1}s): {why}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

