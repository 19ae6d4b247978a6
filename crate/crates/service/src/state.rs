use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use hupsamp_core::profile::{profile_to_qdb, Direction, PredicateWeights, Profile};
use hupsamp_core::qdb::{LengthUtility, QuantitativeDatabase};
use hupsamp_core::weighting::{build_weight_index, cache_for};
use hupsamp_core::{PascalCache, WeightIndex};
use tokio::sync::OnceCell;

use crate::error::ApiError;
use crate::Config;

/// A database with its weight index, ready to sample.
#[derive(Debug)]
pub struct Prepared {
    pub db: Arc<QuantitativeDatabase>,
    pub cache: PascalCache,
    pub index: WeightIndex,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct IndexKey {
    pub source: String,
    pub utility: LengthUtility,
    pub weights: Vec<(String, u64)>,
    pub direction: Direction,
}

type Slot = Arc<OnceCell<Arc<Prepared>>>;

#[derive(Debug)]
pub(crate) enum Source {
    Profile(Arc<Profile>),
    Qdb(Arc<QuantitativeDatabase>),
}

/// Uploaded documents and their weight indexes.
#[derive(Debug)]
pub struct AppState {
    pub config: Config,
    sources: RwLock<HashMap<String, Arc<Source>>>,
    indexes: Mutex<HashMap<IndexKey, Slot>>,
    next_id: AtomicU64,
    builds: AtomicU64,
}

impl AppState {
    pub fn new(config: Config) -> Self {
        Self {
            config,
            sources: RwLock::default(),
            indexes: Mutex::default(),
            next_id: AtomicU64::new(1),
            builds: AtomicU64::new(0),
        }
    }

    /// Number of weight indexes built so far.
    pub fn index_builds(&self) -> u64 {
        self.builds.load(Ordering::Relaxed)
    }

    pub(crate) fn insert(&self, prefix: &str, source: Source) -> String {
        let id = format!("{prefix}{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        self.sources
            .write()
            .expect("source map poisoned")
            .insert(id.clone(), Arc::new(source));
        id
    }

    pub(crate) fn get(&self, id: &str) -> Option<Arc<Source>> {
        self.sources
            .read()
            .expect("source map poisoned")
            .get(id)
            .cloned()
    }

    pub(crate) fn profile(&self, id: &str) -> Result<Arc<Profile>, ApiError> {
        match self.get(id).as_deref() {
            Some(Source::Profile(p)) => Ok(p.clone()),
            _ => Err(ApiError::not_found("profile", id)),
        }
    }

    pub(crate) fn qdb(&self, id: &str) -> Result<Arc<QuantitativeDatabase>, ApiError> {
        match self.get(id).as_deref() {
            Some(Source::Qdb(db)) => Ok(db.clone()),
            _ => Err(ApiError::not_found("qdb", id)),
        }
    }

    /// Returns the index for `key`, building it once. Concurrent callers
    /// with the same key wait for a single build; a failed build is not
    /// remembered.
    pub(crate) async fn prepared(&self, key: IndexKey, source: Arc<Source>) -> Result<Arc<Prepared>, ApiError> {
        let slot = self
            .indexes
            .lock()
            .expect("index map poisoned")
            .entry(key.clone())
            .or_default()
            .clone();
        slot.get_or_try_init(|| async {
            let built = tokio::task::spawn_blocking(move || build(&key, &source))
                .await
                .map_err(|e| ApiError::internal(format!("index build panicked: {e}")))??;
            self.builds.fetch_add(1, Ordering::Relaxed);
            Ok(Arc::new(built))
        })
        .await
        .cloned()
    }
}

fn build(key: &IndexKey, source: &Source) -> Result<Prepared, ApiError> {
    let db = match source {
        Source::Qdb(db) => db.clone(),
        Source::Profile(p) => {
            let weights: PredicateWeights = key.weights.iter().cloned().collect();
            Arc::new(profile_to_qdb(p, &weights, key.direction)?.db)
        }
    };
    let cache = cache_for(&db);
    let index = build_weight_index(&db, &key.utility, &cache)?;
    Ok(Prepared { db, cache, index })
}
