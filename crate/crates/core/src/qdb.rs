//! Items, quantitative transactions and databases.
//!
//! A quantitative database is read from a line-oriented text format where each
//! non-comment line is one transaction made of whitespace-separated
//! `label:quantity` tokens:
//!
//! ```text
//! # toy database
//! A:22 B:12 C:25 D:34
//! A:22
//! ```
//!
//! Item weights are `quantity × price`, where prices come from a separate
//! [`PriceTable`] (one `label price` pair per line, default price 1). Items are
//! interned in first-seen order and that order is the total order used by the
//! sampler inside every transaction.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::ops::RangeInclusive;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense index of an interned item. The index order is the item order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u32);

impl ItemId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Bijection between item labels and [`ItemId`]s.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dictionary {
    labels: Vec<String>,
    index: HashMap<String, ItemId>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, label: &str) -> ItemId {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = ItemId(u32::try_from(self.labels.len()).expect("more than u32::MAX items"));
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), id);
        id
    }

    pub fn get(&self, label: &str) -> Option<ItemId> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: ItemId) -> &str {
        &self.labels[id.index()]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// User-defined strictly positive item prices, keyed by label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceTable {
    prices: HashMap<String, u64>,
}

impl PriceTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, label: impl Into<String>, price: u64) -> Result<()> {
        let label = label.into();
        if price == 0 {
            return Err(Error::InvalidRequest(format!(
                "price of {label} must be a positive integer"
            )));
        }
        self.prices.insert(label, price);
        Ok(())
    }

    pub fn price(&self, label: &str) -> u64 {
        self.prices.get(label).copied().unwrap_or(1)
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.prices.iter().map(|(l, &p)| (l.as_str(), p))
    }

    /// Reads `label price` lines. The price is the last whitespace-separated
    /// token so labels may contain spaces.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut table = PriceTable::new();
        for (n, line) in reader.lines().enumerate() {
            let lineno = n + 1;
            let line = line.map_err(|source| Error::IoAtLine {
                line: lineno,
                source,
            })?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (label, price) = line
                .rsplit_once(char::is_whitespace)
                .ok_or_else(|| Error::parse(lineno, format!("expected `label price`, got {line:?}")))?;
            let label = label.trim();
            if label.is_empty() {
                return Err(Error::parse(lineno, "empty label"));
            }
            let price = parse_positive(price, lineno, "price")?;
            table.prices.insert(label.to_owned(), price);
        }
        Ok(table)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        Self::parse(text.as_bytes())
    }
}

impl FromIterator<(String, u64)> for PriceTable {
    /// Zero prices are dropped (they fall back to the default of 1).
    fn from_iter<I: IntoIterator<Item = (String, u64)>>(iter: I) -> Self {
        PriceTable {
            prices: iter.into_iter().filter(|(_, p)| *p > 0).collect(),
        }
    }
}

/// One weighted item of a transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub item: ItemId,
    pub quantity: u64,
    /// Effective weight `quantity × price`.
    pub weight: u64,
}

/// A set of weighted items sorted by item order, with prefix utility sums.
///
/// Positions are 1-based in every method that takes a `position` or `i`,
/// matching the prefix array where `prefix(0) == 0` and
/// `prefix(len) == total utility`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantitativeTransaction {
    id: usize,
    entries: Vec<Entry>,
    prefix: Vec<u128>,
}

impl QuantitativeTransaction {
    /// Builds a transaction from `(item, quantity, price)` triples. Entries
    /// may come in any order; duplicated items are rejected.
    pub fn new(id: usize, mut raw: Vec<(ItemId, u64, u64)>) -> Result<Self> {
        raw.sort_unstable_by_key(|r| r.0);
        let mut entries = Vec::with_capacity(raw.len());
        for (k, &(item, quantity, price)) in raw.iter().enumerate() {
            if k > 0 && raw[k - 1].0 == item {
                return Err(Error::InvalidRequest(format!("duplicate item {item}")));
            }
            if quantity == 0 || price == 0 {
                return Err(Error::InvalidRequest(format!(
                    "item {item} has a non-positive quantity or price"
                )));
            }
            let weight = quantity.checked_mul(price).ok_or_else(|| {
                Error::InvalidRequest(format!("weight of item {item} overflows 64 bits"))
            })?;
            entries.push(Entry {
                item,
                quantity,
                weight,
            });
        }
        Ok(Self::from_entries(id, entries))
    }

    /// Transaction over items `0..weights.len()` with unit prices.
    pub fn from_weights(id: usize, weights: &[u64]) -> Result<Self> {
        let raw = weights
            .iter()
            .enumerate()
            .map(|(k, &w)| (ItemId(k as u32), w, 1))
            .collect();
        Self::new(id, raw)
    }

    fn from_entries(id: usize, entries: Vec<Entry>) -> Self {
        let mut prefix = Vec::with_capacity(entries.len() + 1);
        let mut acc = 0u128;
        prefix.push(acc);
        for e in &entries {
            acc += u128::from(e.weight);
            prefix.push(acc);
        }
        Self {
            id,
            entries,
            prefix,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    /// Item at 1-based position `i`.
    pub fn item_at(&self, i: usize) -> ItemId {
        self.entries[i - 1].item
    }

    /// Weight of the item at 1-based position `i`.
    pub fn weight_at(&self, i: usize) -> u64 {
        self.entries[i - 1].weight
    }

    pub fn weights(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|e| e.weight)
    }

    /// Sum of the first `i` weights; `prefix(0) == 0`.
    pub fn prefix(&self, i: usize) -> u128 {
        self.prefix[i]
    }

    pub fn prefix_sums(&self) -> &[u128] {
        &self.prefix
    }

    pub fn total_utility(&self) -> u128 {
        self.prefix[self.entries.len()]
    }

    /// 1-based position of `item`, if present.
    pub fn position_of(&self, item: ItemId) -> Option<usize> {
        self.entries
            .binary_search_by_key(&item, |e| e.item)
            .ok()
            .map(|k| k + 1)
    }

    pub fn contains_all(&self, items: &[ItemId]) -> bool {
        items.iter().all(|&x| self.position_of(x).is_some())
    }

    /// Utility of an itemset in this transaction: the sum of its item weights
    /// when every item occurs, zero otherwise.
    pub fn utility_of(&self, items: &[ItemId]) -> u128 {
        let mut sum = 0u128;
        for &x in items {
            match self.position_of(x) {
                Some(p) => sum += u128::from(self.weight_at(p)),
                None => return 0,
            }
        }
        sum
    }
}

/// Summary counts of a database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DbStats {
    pub transactions: usize,
    pub items: usize,
    pub entries: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub avg_len: f64,
}

impl DbStats {
    pub(crate) fn from_lengths(lengths: impl Iterator<Item = usize>, items: usize) -> Self {
        let mut stats = DbStats {
            transactions: 0,
            items,
            entries: 0,
            min_len: 0,
            max_len: 0,
            avg_len: 0.0,
        };
        for len in lengths {
            stats.min_len = if stats.transactions == 0 {
                len
            } else {
                stats.min_len.min(len)
            };
            stats.max_len = stats.max_len.max(len);
            stats.transactions += 1;
            stats.entries += len;
        }
        if stats.transactions > 0 {
            stats.avg_len = stats.entries as f64 / stats.transactions as f64;
        }
        stats
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantitativeDatabase {
    transactions: Vec<QuantitativeTransaction>,
    dictionary: Dictionary,
    prices: PriceTable,
}

impl QuantitativeDatabase {
    pub fn transactions(&self) -> &[QuantitativeTransaction] {
        &self.transactions
    }

    pub fn transaction(&self, id: usize) -> &QuantitativeTransaction {
        &self.transactions[id]
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    pub fn prices(&self) -> &PriceTable {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    pub fn max_transaction_len(&self) -> usize {
        self.transactions.iter().map(|t| t.len()).max().unwrap_or(0)
    }

    pub fn stats(&self) -> DbStats {
        DbStats::from_lengths(
            self.transactions.iter().map(|t| t.len()),
            self.dictionary.len(),
        )
    }

    pub fn label(&self, id: ItemId) -> &str {
        self.dictionary.label(id)
    }

    pub fn labels_of(&self, items: &[ItemId]) -> Vec<String> {
        items.iter().map(|&x| self.label(x).to_owned()).collect()
    }

    /// Resolves labels to item ids; `None` when a label is unknown.
    pub fn resolve(&self, labels: &[impl AsRef<str>]) -> Option<Vec<ItemId>> {
        let mut ids = labels
            .iter()
            .map(|l| self.dictionary.get(l.as_ref()))
            .collect::<Option<Vec<_>>>()?;
        ids.sort_unstable();
        ids.dedup();
        Some(ids)
    }

    /// Utility of an itemset in the whole database.
    pub fn utility_of(&self, items: &[ItemId]) -> BigUint {
        self.transactions
            .iter()
            .map(|t| t.utility_of(items))
            .filter(|&u| u > 0)
            .fold(BigUint::zero(), |acc, u| acc + u)
    }

    /// Writes the text format; the price table is not included.
    pub fn write_qdb<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for t in &self.transactions {
            let mut first = true;
            for e in t.entries() {
                if !first {
                    out.write_all(b" ")?;
                }
                first = false;
                write!(out, "{}:{}", self.label(e.item), e.quantity)?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_qdb_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_qdb(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("labels are UTF-8")
    }

    /// Writes the price table in `label price` form, sorted by label.
    pub fn write_prices<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut rows: Vec<_> = self.prices.iter().collect();
        rows.sort_unstable();
        for (label, price) in rows {
            writeln!(out, "{label} {price}")?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&QdbDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: QdbDocument = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// Incremental construction of a database with interned labels.
#[derive(Debug, Default)]
pub struct QdbBuilder {
    dictionary: Dictionary,
    prices: PriceTable,
    transactions: Vec<QuantitativeTransaction>,
}

impl QdbBuilder {
    pub fn new(prices: PriceTable) -> Self {
        Self {
            prices,
            ..Self::default()
        }
    }

    pub fn intern(&mut self, label: &str) -> ItemId {
        self.dictionary.intern(label)
    }

    /// Appends a transaction of `(label, quantity)` pairs. Repeated labels
    /// have their quantities summed. Empty transactions are skipped and
    /// `None` is returned.
    pub fn push<'a, I>(&mut self, items: I) -> Result<Option<usize>>
    where
        I: IntoIterator<Item = (&'a str, u64)>,
    {
        let mut raw: Vec<(ItemId, u64, u64)> = Vec::new();
        for (label, quantity) in items {
            let id = self.dictionary.intern(label);
            raw.push((id, quantity, self.prices.price(label)));
        }
        if raw.is_empty() {
            return Ok(None);
        }
        raw.sort_unstable_by_key(|r| r.0);
        let mut merged: Vec<(ItemId, u64, u64)> = Vec::with_capacity(raw.len());
        for r in raw {
            match merged.last_mut() {
                Some(last) if last.0 == r.0 => {
                    last.1 = last.1.checked_add(r.1).ok_or_else(|| {
                        Error::InvalidRequest(format!("quantity of {} overflows", r.0))
                    })?;
                }
                _ => merged.push(r),
            }
        }
        let id = self.transactions.len();
        self.transactions
            .push(QuantitativeTransaction::new(id, merged)?);
        Ok(Some(id))
    }

    pub fn finish(self) -> QuantitativeDatabase {
        QuantitativeDatabase {
            transactions: self.transactions,
            dictionary: self.dictionary,
            prices: self.prices,
        }
    }
}

/// Splits one line of the text format into `(label, quantity)` tokens.
/// Returns `None` for blank and comment lines.
pub(crate) fn tokenize_line(line: &str, lineno: usize) -> Result<Option<Vec<(&str, u64)>>> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let mut out = Vec::new();
    for token in line.split_whitespace() {
        let (label, quantity) = token
            .rsplit_once(':')
            .ok_or_else(|| Error::parse(lineno, format!("malformed token {token:?}, expected label:quantity")))?;
        if label.is_empty() {
            return Err(Error::parse(lineno, format!("empty label in token {token:?}")));
        }
        out.push((label, parse_positive(quantity, lineno, "quantity")?));
    }
    Ok(Some(out))
}

fn parse_positive(text: &str, lineno: usize, what: &str) -> Result<u64> {
    let text = text.trim();
    if text.starts_with('-') || text.chars().all(|c| c == '0') {
        return Err(Error::parse(
            lineno,
            format!("{what} {text:?} is not a positive integer"),
        ));
    }
    text.parse::<u64>().map_err(|_| {
        Error::parse(
            lineno,
            format!("{what} {text:?} is not a positive integer"),
        )
    })
}

/// Parses the text format. Transaction ids are assigned to non-empty lines
/// in file order.
pub fn parse_qdb<R: BufRead>(reader: R, prices: PriceTable) -> Result<QuantitativeDatabase> {
    let mut builder = QdbBuilder::new(prices);
    for (n, line) in reader.lines().enumerate() {
        let lineno = n + 1;
        let line = line.map_err(|source| Error::IoAtLine {
            line: lineno,
            source,
        })?;
        if let Some(tokens) = tokenize_line(&line, lineno)? {
            builder.push(tokens).map_err(|e| match e {
                Error::InvalidRequest(m) => Error::parse(lineno, m),
                other => other,
            })?;
        }
    }
    Ok(builder.finish())
}

pub fn parse_qdb_str(text: &str, prices: PriceTable) -> Result<QuantitativeDatabase> {
    parse_qdb(text.as_bytes(), prices)
}

/// JSON form of a database. `prefix` is emitted for inspection and checked
/// on load.
#[derive(Debug, Serialize, Deserialize)]
struct QdbDocument {
    items: Vec<String>,
    prices: PriceTable,
    transactions: Vec<TransactionDocument>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TransactionDocument {
    id: usize,
    entries: Vec<Entry>,
    #[serde(default)]
    prefix: Option<Vec<u128>>,
}

impl From<&QuantitativeDatabase> for QdbDocument {
    fn from(db: &QuantitativeDatabase) -> Self {
        QdbDocument {
            items: db.dictionary.labels.clone(),
            prices: db.prices.clone(),
            transactions: db
                .transactions
                .iter()
                .map(|t| TransactionDocument {
                    id: t.id,
                    entries: t.entries.clone(),
                    prefix: Some(t.prefix.clone()),
                })
                .collect(),
        }
    }
}

impl TryFrom<QdbDocument> for QuantitativeDatabase {
    type Error = Error;

    fn try_from(doc: QdbDocument) -> Result<Self> {
        let mut dictionary = Dictionary::new();
        for label in &doc.items {
            if dictionary.get(label).is_some() {
                return Err(Error::InvalidRequest(format!("duplicate item label {label}")));
            }
            dictionary.intern(label);
        }
        let mut transactions = Vec::with_capacity(doc.transactions.len());
        for (k, td) in doc.transactions.into_iter().enumerate() {
            if td.id != k {
                return Err(Error::InvalidRequest(format!(
                    "transaction ids must be 0..n, found {} at {k}",
                    td.id
                )));
            }
            let mut raw = Vec::with_capacity(td.entries.len());
            for e in &td.entries {
                if e.item.index() >= dictionary.len() {
                    return Err(Error::InvalidRequest(format!("unknown item {}", e.item)));
                }
                let price = doc.prices.price(dictionary.label(e.item));
                if e.quantity.checked_mul(price) != Some(e.weight) {
                    return Err(Error::InvalidRequest(format!(
                        "weight of {} in transaction {k} is not quantity × price",
                        e.item
                    )));
                }
                raw.push((e.item, e.quantity, price));
            }
            let t = QuantitativeTransaction::new(k, raw)?;
            if let Some(prefix) = td.prefix {
                if prefix != t.prefix {
                    return Err(Error::InvalidRequest(format!(
                        "prefix sums of transaction {k} do not match its weights"
                    )));
                }
            }
            transactions.push(t);
        }
        Ok(QuantitativeDatabase {
            transactions,
            dictionary,
            prices: doc.prices,
        })
    }
}

/// A non-empty itemset drawn from one source transaction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pattern {
    items: Vec<ItemId>,
    source_transaction: usize,
}

impl Pattern {
    /// `items` must be non-empty and strictly increasing.
    pub fn new(items: Vec<ItemId>, source_transaction: usize) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidRequest("pattern must be non-empty".into()));
        }
        if items.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidRequest(
                "pattern items must be strictly sorted".into(),
            ));
        }
        Ok(Self {
            items,
            source_transaction,
        })
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn source_transaction(&self) -> usize {
        self.source_transaction
    }
}

/// Utility of a pattern in one transaction (zero unless it is a subset).
pub fn pattern_utility_in_transaction(pattern: &Pattern, t: &QuantitativeTransaction) -> u128 {
    t.utility_of(pattern.items())
}

/// Utility of an itemset summed over all transactions of the database.
pub fn pattern_utility_in_database(items: &[ItemId], db: &QuantitativeDatabase) -> BigUint {
    db.utility_of(items)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UtilityMode {
    /// Plain utility, `f(ℓ) = 1`.
    Hup,
    /// Average utility, `f(ℓ) = 1/ℓ`.
    Haup,
}

impl fmt::Display for UtilityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UtilityMode::Hup => f.write_str("hup"),
            UtilityMode::Haup => f.write_str("haup"),
        }
    }
}

impl std::str::FromStr for UtilityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hup" => Ok(UtilityMode::Hup),
            "haup" => Ok(UtilityMode::Haup),
            other => Err(Error::InvalidConstraint(format!("unknown mode {other:?}"))),
        }
    }
}

/// Length-based utility `f` over `[min_len..max_len]`, zero outside.
///
/// HAUP weights are rational, so every mass is multiplied by a common
/// `scale = lcm(min_len..=max_len)`; [`LengthUtility::scaled_factor`] returns
/// the integer `f(ℓ) × scale`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LengthUtility {
    mode: UtilityMode,
    min_len: usize,
    max_len: Option<usize>,
    scale: BigUint,
}

impl LengthUtility {
    /// `max_len = None` means unbounded.
    pub fn new(mode: UtilityMode, min_len: usize, max_len: Option<usize>) -> Result<Self> {
        if min_len == 0 {
            return Err(Error::InvalidConstraint("minimum length must be ≥ 1".into()));
        }
        if let Some(max) = max_len {
            if max < min_len {
                return Err(Error::InvalidConstraint(format!(
                    "maximum length {max} is below minimum length {min_len}"
                )));
            }
        }
        let scale = match (mode, max_len) {
            (UtilityMode::Hup, _) => BigUint::one(),
            (UtilityMode::Haup, None) => {
                return Err(Error::InvalidConstraint(
                    "average utility (haup) needs a finite maximum length".into(),
                ))
            }
            (UtilityMode::Haup, Some(max)) => (min_len..=max)
                .fold(BigUint::one(), |acc, l| acc.lcm(&BigUint::from(l))),
        };
        Ok(Self {
            mode,
            min_len,
            max_len,
            scale,
        })
    }

    pub fn hup(min_len: usize, max_len: Option<usize>) -> Result<Self> {
        Self::new(UtilityMode::Hup, min_len, max_len)
    }

    pub fn haup(min_len: usize, max_len: usize) -> Result<Self> {
        Self::new(UtilityMode::Haup, min_len, Some(max_len))
    }

    /// HUP over every length.
    pub fn unconstrained() -> Self {
        Self::hup(1, None).expect("valid constraint")
    }

    pub fn mode(&self) -> UtilityMode {
        self.mode
    }

    pub fn min_len(&self) -> usize {
        self.min_len
    }

    pub fn max_len(&self) -> Option<usize> {
        self.max_len
    }

    /// True for HUP with `[1..∞]`, where transaction weights have a closed form.
    pub fn is_unconstrained_hup(&self) -> bool {
        self.mode == UtilityMode::Hup && self.min_len == 1 && self.max_len.is_none()
    }

    pub fn contains(&self, len: usize) -> bool {
        len >= self.min_len && self.max_len.is_none_or(|m| len <= m)
    }

    /// Admissible pattern lengths inside a transaction of length `len`
    /// (possibly empty).
    pub fn lengths_for(&self, len: usize) -> RangeInclusive<usize> {
        let upper = self.max_len.map_or(len, |m| m.min(len));
        self.min_len..=upper
    }

    /// Exact `f(ℓ)`.
    pub fn factor(&self, len: usize) -> BigRational {
        if !self.contains(len) {
            return BigRational::zero();
        }
        match self.mode {
            UtilityMode::Hup => BigRational::one(),
            UtilityMode::Haup => BigRational::new(1.into(), len.into()),
        }
    }

    /// Common denominator cleared from every `f(ℓ)`.
    pub fn scale(&self) -> &BigUint {
        &self.scale
    }

    /// Integer weight `f(ℓ) × scale`.
    pub fn scaled_factor(&self, len: usize) -> BigUint {
        if !self.contains(len) {
            return BigUint::zero();
        }
        match self.mode {
            UtilityMode::Hup => BigUint::one(),
            UtilityMode::Haup => &self.scale / BigUint::from(len),
        }
    }
}

impl fmt::Display for LengthUtility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.max_len {
            Some(m) => write!(f, "{}[{}..{}]", self.mode, self.min_len, m),
            None => write!(f, "{}[{}..inf]", self.mode, self.min_len),
        }
    }
}
