//! Synthetic qDB generator for benchmarks and scale tests.

use std::io::Write;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::qdb::{PriceTable, QdbBuilder, QuantitativeDatabase};

/// Transactions have a uniform length in `1..=2·avg_len−1` over `items`
/// distinct labels `i0, i1, …`, with quantities uniform in
/// `1..=max_quantity`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenConfig {
    pub transactions: usize,
    pub avg_len: usize,
    pub items: usize,
    pub max_quantity: u64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            transactions: 1000,
            avg_len: 10,
            items: 1000,
            max_quantity: 10,
            seed: 0,
        }
    }
}

impl GenConfig {
    fn check(&self) -> Result<()> {
        if self.avg_len == 0 || self.max_quantity == 0 {
            return Err(Error::InvalidRequest(
                "avg length and max quantity must be positive".into(),
            ));
        }
        if self.items < 2 * self.avg_len - 1 {
            return Err(Error::InvalidRequest(format!(
                "{} items cannot fill transactions of length {}",
                self.items,
                2 * self.avg_len - 1
            )));
        }
        Ok(())
    }

    /// Longest possible transaction.
    pub fn max_len(&self) -> usize {
        2 * self.avg_len - 1
    }

    /// Streams the text format to `out`.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        self.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut line = String::new();
        for _ in 0..self.transactions {
            line.clear();
            for (k, item) in self.draw(&mut rng).into_iter().enumerate() {
                if k > 0 {
                    line.push(' ');
                }
                use std::fmt::Write as _;
                let q = rng.random_range(1..=self.max_quantity);
                let _ = write!(line, "i{item}:{q}");
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    /// Same content as [`GenConfig::write`], built in memory.
    pub fn build(&self, prices: PriceTable) -> Result<QuantitativeDatabase> {
        self.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut builder = QdbBuilder::new(prices);
        let mut labels = Vec::new();
        for _ in 0..self.transactions {
            labels.clear();
            for item in self.draw(&mut rng) {
                labels.push((format!("i{item}"), rng.random_range(1..=self.max_quantity)));
            }
            builder.push(labels.iter().map(|(l, q)| (l.as_str(), *q)))?;
        }
        Ok(builder.finish())
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let len = rng.random_range(1..=self.max_len());
        index::sample(rng, self.items, len).into_vec()
    }
}

impl std::str::FromStr for GenConfig {
    type Err = Error;

    /// `n=1000000,avg=10,items=1000,qmax=10,seed=1`; omitted keys keep their
    /// defaults.
    fn from_str(s: &str) -> Result<Self> {
        let mut cfg = GenConfig::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidRequest(format!("expected key=value, got {part:?}")))?;
            let value: u64 = value
                .trim()
                .parse()
                .map_err(|_| Error::InvalidRequest(format!("{key}: {value:?} is not an integer")))?;
            match key.trim() {
                "n" => cfg.transactions = value as usize,
                "avg" => cfg.avg_len = value as usize,
                "items" => cfg.items = value as usize,
                "qmax" => cfg.max_quantity = value,
                "seed" => cfg.seed = value,
                other => {
                    return Err(Error::InvalidRequest(format!("unknown generator key {other:?}")))
                }
            }
        }
        Ok(cfg)
    }
}
