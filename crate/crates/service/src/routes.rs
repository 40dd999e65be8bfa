use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::HeaderMap;
use axum::routing::{get, post};
use axum::{Json, Router};
use num_bigint::BigUint;
use serde::de::DeserializeOwned;

use lrms_core::crypto::DomainParams;
use lrms_core::registry::Session;
use lrms_core::trading::cert::Certificate;
use lrms_core::trading::deed::Role;
use lrms_core::trading::listing::{ListingFilter, ListingStatus, Listing};

use crate::error::ApiError;
use crate::state::{unix_now, AppState};
use crate::views::*;

type Shared = Arc<AppState>;
type ApiResult<T> = Result<Json<T>, ApiError>;

const DEFAULT_VALIDITY_DAYS: u32 = 365;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/ca/certificates", post(issue_certificate))
        .route("/ca/certificates/{serial}", get(get_certificate))
        .route("/auth/challenges", post(issue_challenge))
        .route("/auth/sessions", post(open_session))
        .route("/lrd/records", get(retrieve_records).post(register_record))
        .route("/listings", get(search_listings).post(post_listing))
        .route("/listings/{id}", get(get_listing))
        .route("/listings/{id}/withdraw", post(withdraw_listing))
        .route("/deeds", post(create_deed))
        .route("/deeds/{id}", get(get_deed))
        .route("/deeds/{id}/signatures", post(sign_deed))
        .route("/deeds/{id}/abandon", post(abandon_deed))
        .route("/deeds/{id}/settle", post(settle_deed))
        .route("/chain/blocks/{id}", get(get_block))
        .route("/chain/tip", get(chain_tip))
        .route("/chain/verify", get(verify_chain))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .method_not_allowed_fallback(|| async { ApiError::new("method-not-allowed", "method not allowed") })
        .with_state(state)
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

fn parse_u64(raw: &str, what: &str) -> Result<u64, ApiError> {
    raw.parse().map_err(|_| ApiError::bad_request(format!("{what} must be an unsigned integer")))
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers.get("authorization")?.to_str().ok()?.strip_prefix("Bearer ").map(str::trim)
}

fn session(state: &AppState, headers: &HeaderMap) -> Result<Session, ApiError> {
    let token = bearer(headers).ok_or_else(|| ApiError::new("invalid-session", "missing bearer token"))?;
    Ok(state.registry.authenticate(token, unix_now())?)
}

fn certificate(state: &AppState, serial: u64) -> Result<Certificate, ApiError> {
    state.certs.get(serial).ok_or_else(|| ApiError::new("invalid-certificate", format!("no certificate {serial}")))
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))?
}

async fn health(State(state): State<Shared>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        height: state.ledger.height(),
        bank_id: state.config.bank_id.clone(),
        ca_id: state.ca.public().issuer_id,
        key_bits: state.params.bits(),
    })
}

async fn issue_certificate(State(state): State<Shared>, body: Bytes) -> ApiResult<Certificate> {
    let req: IssueCertificateRequest = parse_body(&body)?;
    let beta = BigUint::parse_bytes(req.subject_beta.as_bytes(), 10)
        .ok_or_else(|| ApiError::new("invalid-public-key", "subject_beta must be a decimal integer"))?;
    blocking(move || {
        let params = match req.subject_params {
            Some(p) if p != state.params => DomainParams::new(p.p().clone(), p.alpha().clone(), &mut rand::thread_rng())
                .map_err(|e| ApiError::new("invalid-public-key", e.to_string()))?,
            _ => state.params.clone(),
        };
        let days = req.validity_days.unwrap_or(DEFAULT_VALIDITY_DAYS);
        let cert = state.certs.issue(&state.ca, &req.subject_id, &params, &beta, days, unix_now(), &mut rand::thread_rng())?;
        Ok(Json(cert))
    })
    .await
}

async fn get_certificate(State(state): State<Shared>, Path(serial): Path<String>) -> ApiResult<Certificate> {
    let serial = parse_u64(&serial, "serial")?;
    state.certs.get(serial).map(Json).ok_or_else(|| ApiError::not_found(format!("no certificate {serial}")))
}

async fn issue_challenge(State(state): State<Shared>, body: Bytes) -> ApiResult<lrms_core::registry::LoginChallenge> {
    let req: ChallengeRequest = parse_body(&body)?;
    if req.subject_id.is_empty() {
        return Err(ApiError::bad_request("subject_id is required"));
    }
    Ok(Json(state.registry.issue_challenge(&req.subject_id, unix_now(), &mut rand::thread_rng())))
}

async fn open_session(State(state): State<Shared>, body: Bytes) -> ApiResult<Session> {
    let req: SessionRequest = parse_body(&body)?;
    blocking(move || {
        let cert = certificate(&state, req.cert_serial)?;
        let s = state.registry.verify_challenge(&req.challenge_id, &req.signature, &cert, unix_now(), &mut rand::thread_rng())?;
        Ok(Json(s))
    })
    .await
}

async fn retrieve_records(
    State(state): State<Shared>,
    headers: HeaderMap,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<RecordsResponse> {
    let session = session(&state, &headers)?;
    let owner = q.get("owner").cloned().unwrap_or_else(|| session.subject_id.clone());
    let records = state.registry.retrieve_record(&session, &owner)?;
    Ok(Json(RecordsResponse { owner, records: records.into_iter().map(RecordView::from).collect() }))
}

async fn register_record(State(state): State<Shared>, headers: HeaderMap, body: Bytes) -> ApiResult<RegisterResponse> {
    if let Some(expected) = &state.config.registrar_token {
        if bearer(&headers) != Some(expected.as_str()) {
            return Err(ApiError::new("unauthorized", "registrar token required"));
        }
    }
    let req: RegisterRequest = parse_body(&body)?;
    blocking(move || {
        let cert = certificate(&state, req.cert_serial)?;
        let block_id = state.registry.register_record(
            &cert,
            &req.land,
            &req.seller_name,
            &req.buyer_name,
            &req.tx_label,
            unix_now(),
            &mut rand::thread_rng(),
        )?;
        Ok(Json(RegisterResponse {
            block_id,
            owner_id: cert.subject_id.clone(),
            key_fingerprint: hex::encode(cert.key_fingerprint()),
        }))
    })
    .await
}

fn listing_filter(q: &HashMap<String, String>) -> Result<ListingFilter, ApiError> {
    let num = |key: &str| -> Result<Option<u64>, ApiError> { q.get(key).map(|v| parse_u64(v, key)).transpose() };
    let price = |key: &str| -> Result<Option<f64>, ApiError> {
        q.get(key)
            .map(|v| v.parse::<f64>().map_err(|_| ApiError::bad_request(format!("{key} must be a number"))))
            .transpose()
    };
    let status = q
        .get("status")
        .map(|s| ListingStatus::parse(s).ok_or_else(|| ApiError::bad_request(format!("unknown status {s:?}"))))
        .transpose()?;
    Ok(ListingFilter {
        dag: num("dag")?,
        khatiayan: num("khatiayan")?,
        min_price: price("min_price")?,
        max_price: price("max_price")?,
        status,
    })
}

async fn search_listings(State(state): State<Shared>, Query(q): Query<HashMap<String, String>>) -> ApiResult<Vec<Listing>> {
    let filter = listing_filter(&q)?;
    Ok(Json(state.market.search_listings(&filter)))
}

async fn post_listing(State(state): State<Shared>, headers: HeaderMap, body: Bytes) -> ApiResult<Listing> {
    let session = session(&state, &headers)?;
    let req: PostListingRequest = parse_body(&body)?;
    let listing = state.market.post_listing(&session, req.dag_number, req.khatiayan_number, req.asking_price, unix_now())?;
    Ok(Json(listing))
}

async fn get_listing(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Listing> {
    Ok(Json(state.market.get_listing(&id)?))
}

async fn withdraw_listing(State(state): State<Shared>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult<Listing> {
    let session = session(&state, &headers)?;
    Ok(Json(state.market.withdraw_listing(&session, &id)?))
}

async fn create_deed(State(state): State<Shared>, headers: HeaderMap, body: Bytes) -> ApiResult<DeedView> {
    let session = session(&state, &headers)?;
    let req: CreateDeedRequest = parse_body(&body)?;
    let deed = state.market.create_deed(&req.listing_id, &session, req.agreed_price, unix_now(), &mut rand::thread_rng())?;
    Ok(Json(deed.into()))
}

async fn get_deed(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<DeedView> {
    Ok(Json(state.market.get_deed(&id)?.into()))
}

async fn sign_deed(State(state): State<Shared>, Path(id): Path<String>, body: Bytes) -> ApiResult<DeedView> {
    let req: SignDeedRequest = parse_body(&body)?;
    let role: Role = req.role.parse()?;
    blocking(move || {
        let deed = state.market.sign_deed(&id, role, req.signature, req.cert_serial, unix_now())?;
        Ok(Json(deed.into()))
    })
    .await
}

async fn abandon_deed(State(state): State<Shared>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult<DeedView> {
    let session = session(&state, &headers)?;
    Ok(Json(state.market.abandon_deed(&id, &session)?.into()))
}

async fn settle_deed(State(state): State<Shared>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult<SettleResponse> {
    let session = session(&state, &headers)?;
    let deed = state.market.get_deed(&id)?;
    if ![&deed.seller_id, &deed.buyer_id, &deed.bank_id].contains(&&session.subject_id) {
        return Err(ApiError::new("wrong-party", "only a party to the deed may settle it"));
    }
    blocking(move || {
        let (deed, block_id) = state.market.settle_and_register(&id, unix_now(), &mut rand::thread_rng())?;
        Ok(Json(SettleResponse { deed: deed.into(), block_id }))
    })
    .await
}

async fn get_block(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<BlockView> {
    let id = parse_u64(&id, "block id")?;
    let block = state.ledger.get_block(id)?;
    Ok(Json(BlockView::from(block.as_ref())))
}

async fn chain_tip(State(state): State<Shared>) -> Json<BlockView> {
    Json(BlockView::from(state.ledger.tip().as_ref()))
}

async fn verify_chain(State(state): State<Shared>) -> Result<Json<VerifyResponse>, ApiError> {
    blocking(move || {
        let height = state.ledger.height();
        let violation = state.ledger.verify().err();
        Ok(Json(VerifyResponse { ok: violation.is_none(), height, violation: violation.as_ref().map(ViolationView::from) }))
    })
    .await
}
