//! Two-pass sampling straight from a qDB text file.
//!
//! Pass one weighs each transaction and keeps only its weight. Pass two
//! re-reads the file and draws patterns from the selected transactions,
//! stopping as soon as the sample is complete. Items inside a transaction
//! are ordered by label, so no dictionary is needed.

use std::collections::btree_map;
use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::fs::File;
use std::hash::Hasher;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::combinatorics::{PascalCache, RandomSource};
use crate::error::{Error, Result};
use crate::qdb::{tokenize_line, ItemId, LengthUtility, PriceTable, QuantitativeTransaction};
use crate::sampler::{draw_from_transaction, SampleRecord};
use crate::weighting::transaction_total;

/// What pass two checks to make sure it reads the file pass one weighed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingerprint {
    pub bytes: u64,
    pub transactions: usize,
    pub checksum: u64,
    pub modified: Option<SystemTime>,
}

/// Per-transaction weights of a file, in id order.
#[derive(Debug, Clone)]
pub struct DiskWeights {
    path: PathBuf,
    utility: LengthUtility,
    prices: PriceTable,
    weights: Vec<BigUint>,
    total: BigUint,
    max_len: usize,
    fingerprint: Fingerprint,
}

impl DiskWeights {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn utility(&self) -> &LengthUtility {
        &self.utility
    }

    pub fn weights(&self) -> &[BigUint] {
        &self.weights
    }

    pub fn total(&self) -> &BigUint {
        &self.total
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn max_transaction_len(&self) -> usize {
        self.max_len
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }
}

/// Line reader that tracks bytes, a running checksum and line numbers.
struct Lines {
    reader: BufReader<File>,
    buf: Vec<u8>,
    lineno: usize,
    bytes: u64,
    hasher: DefaultHasher,
}

impl Lines {
    fn open(path: &Path) -> Result<Self> {
        Ok(Self {
            reader: BufReader::with_capacity(1 << 16, File::open(path)?),
            buf: Vec::new(),
            lineno: 0,
            bytes: 0,
            hasher: DefaultHasher::new(),
        })
    }

    fn next_line(&mut self) -> Result<Option<(usize, &str)>> {
        self.buf.clear();
        let n = self
            .reader
            .read_until(b'\n', &mut self.buf)
            .map_err(|source| Error::IoAtLine {
                line: self.lineno + 1,
                source,
            })?;
        if n == 0 {
            return Ok(None);
        }
        self.lineno += 1;
        self.bytes += n as u64;
        self.hasher.write(&self.buf);
        let lineno = self.lineno;
        std::str::from_utf8(&self.buf)
            .map(|line| Some((lineno, line)))
            .map_err(|_| Error::parse(self.lineno, "line is not valid UTF-8"))
    }
}

/// Builds a transaction from one line's tokens, items sorted by label.
/// Returns the labels in position order alongside.
fn label_ordered<'a>(
    mut tokens: Vec<(&'a str, u64)>,
    id: usize,
    prices: &PriceTable,
    lineno: usize,
) -> Result<(QuantitativeTransaction, Vec<&'a str>)> {
    tokens.sort_unstable_by(|a, b| a.0.cmp(b.0));
    let mut labels: Vec<&str> = Vec::with_capacity(tokens.len());
    let mut raw: Vec<(ItemId, u64, u64)> = Vec::with_capacity(tokens.len());
    for (label, quantity) in tokens {
        if labels.last() == Some(&label) {
            let last = raw.last_mut().expect("parallel to labels");
            last.1 = last
                .1
                .checked_add(quantity)
                .ok_or_else(|| Error::parse(lineno, format!("quantity of {label:?} overflows")))?;
        } else {
            raw.push((ItemId(labels.len() as u32), quantity, prices.price(label)));
            labels.push(label);
        }
    }
    let t = QuantitativeTransaction::new(id, raw).map_err(|e| match e {
        Error::InvalidRequest(m) => Error::parse(lineno, m),
        other => other,
    })?;
    Ok((t, labels))
}

fn modified(path: &Path) -> Result<(u64, Option<SystemTime>)> {
    let meta = std::fs::metadata(path)?;
    Ok((meta.len(), meta.modified().ok()))
}

/// Pass one: weighs every transaction of the file at `path`. `cache` is
/// grown as longer transactions appear.
pub fn stream_weigh(
    path: impl AsRef<Path>,
    utility: &LengthUtility,
    prices: &PriceTable,
    cache: &mut PascalCache,
) -> Result<DiskWeights> {
    let path = path.as_ref();
    let (_, mtime) = modified(path)?;
    let mut lines = Lines::open(path)?;
    let mut weights = Vec::new();
    let mut total = BigUint::zero();
    let mut max_len = 0;
    while let Some((lineno, line)) = lines.next_line()? {
        let Some(tokens) = tokenize_line(line, lineno)? else {
            continue;
        };
        let (t, _) = label_ordered(tokens, weights.len(), prices, lineno)?;
        if t.len() > cache.n_max() {
            cache.extend_to(t.len());
        }
        max_len = max_len.max(t.len());
        let w = transaction_total(&t, utility, cache)?;
        total += &w;
        weights.push(w);
    }
    if total.is_zero() {
        return Err(Error::ZeroMass);
    }
    let fingerprint = Fingerprint {
        bytes: lines.bytes,
        transactions: weights.len(),
        checksum: lines.hasher.finish(),
        modified: mtime,
    };
    weights.shrink_to_fit();
    Ok(DiskWeights {
        path: path.to_path_buf(),
        utility: utility.clone(),
        prices: prices.clone(),
        weights,
        total,
        max_len,
        fingerprint,
    })
}

/// Transaction ids drawn with replacement, with multiplicities.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SelectedIds {
    counts: BTreeMap<usize, usize>,
    total: usize,
}

impl SelectedIds {
    /// Sum of multiplicities.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn multiplicity(&self, id: usize) -> usize {
        self.counts.get(&id).copied().unwrap_or(0)
    }

    /// `(id, multiplicity)` in increasing id order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.counts.iter().map(|(&id, &c)| (id, c))
    }

    pub fn insert(&mut self, id: usize, count: usize) {
        if count > 0 {
            *self.counts.entry(id).or_insert(0) += count;
            self.total += count;
        }
    }
}

/// Draws `k` transaction ids with probability `W/Z` each. The `k` uniforms
/// are sorted and matched against the weight list in one sweep.
pub fn select_ids(dw: &DiskWeights, k: usize, rng: &mut RandomSource) -> Result<SelectedIds> {
    if dw.total.is_zero() {
        return Err(Error::ZeroMass);
    }
    let mut alphas = (0..k)
        .map(|_| rng.uniform_inclusive(&dw.total))
        .collect::<Result<Vec<_>>>()?;
    alphas.sort_unstable();
    let mut selected = SelectedIds::default();
    let mut acc = BigUint::zero();
    let mut next = alphas.iter().peekable();
    for (id, w) in dw.weights.iter().enumerate() {
        acc += w;
        let mut count = 0;
        while next.next_if(|a| **a <= acc).is_some() {
            count += 1;
        }
        selected.insert(id, count);
        if next.peek().is_none() {
            break;
        }
    }
    Ok(selected)
}

/// Pass two: draws `multiplicity` patterns from every selected transaction,
/// in file order. Fails if the file no longer matches `dw`.
pub fn stream_draw(
    dw: &DiskWeights,
    ids: &SelectedIds,
    rng: &mut RandomSource,
    cache: &mut PascalCache,
) -> Result<Vec<SampleRecord>> {
    let mut out = Vec::with_capacity(ids.total());
    if ids.is_empty() {
        return Ok(out);
    }
    let changed = |reason: String| Error::SourceChanged {
        path: dw.path.clone(),
        reason,
    };
    let (bytes, mtime) = modified(&dw.path)?;
    if bytes != dw.fingerprint.bytes {
        return Err(changed(format!(
            "size is {bytes} bytes, was {}",
            dw.fingerprint.bytes
        )));
    }
    if mtime != dw.fingerprint.modified {
        return Err(changed("modification time differs".into()));
    }
    if dw.max_len > cache.n_max() {
        cache.extend_to(dw.max_len);
    }

    let mut lines = Lines::open(&dw.path)?;
    let mut pending: btree_map::Iter<'_, usize, usize> = ids.counts.iter();
    let mut target = pending.next();
    let mut id = 0usize;
    while let Some((lineno, line)) = lines.next_line()? {
        let Some(tokens) = tokenize_line(line, lineno)? else {
            continue;
        };
        if let Some((&want, &count)) = target {
            if want == id {
                let (t, labels) = label_ordered(tokens, id, &dw.prices, lineno)?;
                let w = dw
                    .weights
                    .get(id)
                    .ok_or_else(|| changed(format!("transaction {id} was not weighed")))?;
                if t.len() > cache.n_max() {
                    return Err(changed(format!("transaction {id} grew to {} items", t.len())));
                }
                for _ in 0..count {
                    let draw = draw_from_transaction(&t, w, &dw.utility, rng, cache)?;
                    out.push(SampleRecord {
                        transaction: id,
                        length: draw.len(),
                        utility: draw.utility,
                        items: draw
                            .pattern
                            .items()
                            .iter()
                            .map(|i| labels[i.index()].to_string())
                            .collect(),
                    });
                }
                target = pending.next();
                if target.is_none() {
                    return Ok(out);
                }
            }
        }
        id += 1;
    }
    if id != dw.fingerprint.transactions {
        return Err(changed(format!(
            "{id} transactions, was {}",
            dw.fingerprint.transactions
        )));
    }
    if lines.bytes != dw.fingerprint.bytes || lines.hasher.finish() != dw.fingerprint.checksum {
        return Err(changed("content checksum differs".into()));
    }
    Err(changed(format!(
        "selected transaction {} not found",
        target.map_or(0, |(&t, _)| t)
    )))
}

/// Both passes with `k` draws seeded by `seed`.
pub fn stream_sample(
    path: impl AsRef<Path>,
    utility: &LengthUtility,
    prices: &PriceTable,
    k: usize,
    seed: u64,
) -> Result<(DiskWeights, Vec<SampleRecord>)> {
    let mut cache = PascalCache::new(0);
    let dw = stream_weigh(path, utility, prices, &mut cache)?;
    let mut rng = RandomSource::from_seed(seed);
    let ids = select_ids(&dw, k, &mut rng)?;
    let records = stream_draw(&dw, &ids, &mut rng, &mut cache)?;
    Ok((dw, records))
}
