use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::header::CONTENT_TYPE;
use axum::http::HeaderMap;
use axum::routing::{get, post};
use axum::{Json, Router};
use hupsamp_core::profile::{merge_subprofiles, pattern_to_subprofile, Direction, PredicateWeights, Profile, ProfileStats, SubProfile};
use hupsamp_core::qdb::{parse_qdb_str, DbStats, LengthUtility, PriceTable, UtilityMode};
use hupsamp_core::sampler::{sample_patterns, SampleRecord, SampleRequest};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::state::{AppState, IndexKey, Source};

/// Seeds generated by the service stay below 2^53 so that JSON clients
/// holding them as doubles can replay them exactly.
const FRESH_SEED_MASK: u64 = (1 << 53) - 1;

pub fn router(state: Arc<AppState>) -> Router {
    let limit = state.config.max_body_bytes;
    Router::new()
        .route("/api/profiles", post(upload_profile))
        .route("/api/profiles/{id}/stats", get(profile_stats))
        .route("/api/profiles/{id}/sample", post(sample_profile))
        .route("/api/qdbs", post(upload_qdb))
        .route("/api/qdbs/{id}/stats", get(qdb_stats))
        .route("/api/qdbs/{id}/sample", post(sample_qdb))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UploadResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qdb_id: Option<String>,
    pub stats: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SampleBody {
    #[serde(default = "one")]
    pub min_len: usize,
    #[serde(default)]
    pub max_len: Option<usize>,
    #[serde(default = "hup")]
    pub mode: UtilityMode,
    pub k: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub predicate_weights: Option<PredicateWeights>,
    #[serde(default)]
    pub direction: Option<Direction>,
}

fn one() -> usize {
    1
}

fn hup() -> UtilityMode {
    UtilityMode::Hup
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Timings {
    pub preprocess_ms: f64,
    pub draw_ms_per_pattern: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SampleResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qdb_id: Option<String>,
    pub seed: u64,
    pub records: Vec<SampleRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_profile: Option<SubProfile>,
    pub timings: Timings,
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

fn persist(state: &AppState, name: &str, body: &[u8]) {
    if let Some(dir) = &state.config.data_dir {
        if let Err(e) = std::fs::write(dir.join(name), body) {
            tracing::warn!("could not store {name}: {e}");
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value, ApiError> {
    serde_json::to_value(v).map_err(|e| ApiError::internal(e.to_string()))
}

async fn upload_profile(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<UploadResponse>, ApiError> {
    let profile: Profile = parse_json(&body)?;
    if profile.edges.len() > state.config.max_edges {
        return Err(ApiError::too_large(format!(
            "profile has {} edges, the limit is {}",
            profile.edges.len(),
            state.config.max_edges
        )));
    }
    let stats = profile.stats(&PredicateWeights::new(), Direction::Both)?;
    let id = state.insert("p", Source::Profile(Arc::new(profile)));
    persist(&state, &format!("{id}.json"), &body);
    Ok(Json(UploadResponse {
        profile_id: Some(id),
        qdb_id: None,
        stats: to_value(&stats)?,
    }))
}

async fn profile_stats(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<ProfileStats>, ApiError> {
    let profile = state.profile(&id)?;
    Ok(Json(profile.stats(&PredicateWeights::new(), Direction::Both)?))
}

#[derive(Deserialize)]
struct QdbUpload {
    text: String,
    #[serde(default)]
    prices: PriceTable,
}

/// Accepts either the qDB text format as the raw body or a JSON object
/// `{"text": ..., "prices": {...}}`.
async fn upload_qdb(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<UploadResponse>, ApiError> {
    let is_json = headers
        .get(CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    let upload = if is_json {
        parse_json::<QdbUpload>(&body)?
    } else {
        QdbUpload {
            text: String::from_utf8(body.to_vec()).map_err(|_| ApiError::bad_request("body is not UTF-8"))?,
            prices: PriceTable::new(),
        }
    };
    for (label, price) in upload.prices.iter() {
        if price == 0 {
            return Err(ApiError::bad_request(format!("price of {label:?} is 0")));
        }
    }
    let db = parse_qdb_str(&upload.text, upload.prices)?;
    let stats = db.stats();
    if stats.entries > state.config.max_entries {
        return Err(ApiError::too_large(format!(
            "qDB has {} item occurrences, the limit is {}",
            stats.entries, state.config.max_entries
        )));
    }
    let id = state.insert("q", Source::Qdb(Arc::new(db)));
    persist(&state, &format!("{id}.qdb"), upload.text.as_bytes());
    Ok(Json(UploadResponse {
        profile_id: None,
        qdb_id: Some(id),
        stats: to_value(&stats)?,
    }))
}

async fn qdb_stats(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<DbStats>, ApiError> {
    Ok(Json(state.qdb(&id)?.stats()))
}

async fn sample_profile(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SampleResponse>, ApiError> {
    let body: SampleBody = parse_json(&body)?;
    let profile = state.profile(&id)?;
    let weights = body.predicate_weights.clone().unwrap_or_default();
    weights.validate()?;
    let key = IndexKey {
        source: id.clone(),
        utility: utility(&state, &body)?,
        weights: weights.canonical(),
        direction: body.direction.unwrap_or_default(),
    };
    let (seed, records, timings) = run(&state, key, &body).await?;
    let (records, sub_profile) = tokio::task::spawn_blocking(move || {
        let parts = records
            .iter()
            .map(|r| pattern_to_subprofile(&r.items, &profile))
            .collect::<Result<Vec<_>, _>>()?;
        Ok::<_, ApiError>((records, merge_subprofiles(&parts)))
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(SampleResponse {
        profile_id: Some(id),
        qdb_id: None,
        seed,
        records,
        sub_profile: Some(sub_profile),
        timings,
    }))
}

async fn sample_qdb(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SampleResponse>, ApiError> {
    let body: SampleBody = parse_json(&body)?;
    state.qdb(&id)?;
    if body.predicate_weights.is_some() || body.direction.is_some() {
        return Err(ApiError::bad_request(
            "predicateWeights and direction apply to profiles only",
        ));
    }
    let key = IndexKey {
        source: id.clone(),
        utility: utility(&state, &body)?,
        weights: Vec::new(),
        direction: Direction::default(),
    };
    let (seed, records, timings) = run(&state, key, &body).await?;
    Ok(Json(SampleResponse {
        profile_id: None,
        qdb_id: Some(id),
        seed,
        records,
        sub_profile: None,
        timings,
    }))
}

fn utility(state: &AppState, body: &SampleBody) -> Result<LengthUtility, ApiError> {
    if body.k == 0 {
        return Err(ApiError::bad_request("k must be at least 1"));
    }
    if body.k > state.config.max_k {
        return Err(ApiError::bad_request(format!(
            "k = {} exceeds the limit of {}",
            body.k, state.config.max_k
        )));
    }
    Ok(LengthUtility::new(body.mode, body.min_len, body.max_len)?)
}

async fn run(
    state: &AppState,
    key: IndexKey,
    body: &SampleBody,
) -> Result<(u64, Vec<SampleRecord>, Timings), ApiError> {
    let seed = body.seed.unwrap_or_else(|| rand::random::<u64>() & FRESH_SEED_MASK);
    let source = state
        .get(&key.source)
        .ok_or_else(|| ApiError::not_found("upload", &key.source))?;
    let request = SampleRequest::new(key.utility.clone(), body.k, seed)?;
    let start = Instant::now();
    let prepared = state.prepared(key, source).await?;
    let preprocess_ms = start.elapsed().as_secs_f64() * 1e3;
    let k = body.k;
    let (records, draw_ms) = tokio::task::spawn_blocking(move || {
        let start = Instant::now();
        let records = sample_patterns(&prepared.db, &prepared.index, &prepared.cache, &request);
        (records, start.elapsed().as_secs_f64() * 1e3)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok((
        seed,
        records?,
        Timings {
            preprocess_ms,
            draw_ms_per_pattern: draw_ms / k as f64,
        },
    ))
}
