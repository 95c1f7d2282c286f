//! HTTP API of the platform and a blocking client for it.
//!
//! All routes take `Authorization: Bearer <token>`. Bodies are JSON except
//! batch ingestion, which takes the text frame from [`crate::batch`].
//!
//! | method | path                                   | role                     |
//! |--------|----------------------------------------|--------------------------|
//! | POST   | `/v1/ingest`                           | gateway                  |
//! | POST   | `/v1/register`                         | clinician                |
//! | POST   | `/v1/resolve-identity`                 | any (clinician succeeds) |
//! | GET    | `/v1/subjects`                         | readers                  |
//! | GET    | `/v1/subjects/{p}/events`              | readers                  |
//! | GET    | `/v1/subjects/{p}/results`             | readers                  |
//! | POST   | `/v1/subjects/{p}/results`             | analyst, clinician       |
//! | POST   | `/v1/subjects/{p}/rescore`             | readers                  |
//!
//! Readers are the clinician, analyst and location-analysis roles. Event
//! queries take `from`, `to` (UTC seconds, `to` exclusive), optional
//! comma-separated `kinds`, `offset` and `limit`. Result queries take
//! optional `from`/`to` dates and `version`.
//!
//! Errors are `{"status": <http status>, "code": "<machine code>",
//! "message": "..."}`.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::oneshot;

use carewatch_core::{DeviceKind, Pseudonym, Timestamp};

use crate::batch::IngestAck;
use crate::gateway::{Transport, TransportError};
use crate::platform::{
    AnalysisResults, Credential, EventPage, EventQuery, Identity, Platform, PlatformError, Rescored, StoredResults,
    SubjectSummary, ThresholdOverrides,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
}

fn status_of(e: &PlatformError) -> StatusCode {
    match e {
        PlatformError::Unauthorized => StatusCode::UNAUTHORIZED,
        PlatformError::Forbidden { .. } | PlatformError::Denied(_) => StatusCode::FORBIDDEN,
        PlatformError::UnknownPseudonym(_) | PlatformError::NoResults(_) => StatusCode::NOT_FOUND,
        PlatformError::AlreadyRegistered(_) | PlatformError::DigestMismatch { .. } => StatusCode::CONFLICT,
        PlatformError::MalformedBatch(_)
        | PlatformError::MalformedResults(_)
        | PlatformError::InvalidRange { .. }
        | PlatformError::InvalidThresholds(_) => StatusCode::BAD_REQUEST,
        PlatformError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

struct Failure(PlatformError);

impl From<PlatformError> for Failure {
    fn from(e: PlatformError) -> Self {
        Failure(e)
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        let status = status_of(&self.0);
        let body = ApiError { status: status.as_u16(), code: self.0.code().to_owned(), message: self.0.to_string() };
        (status, Json(body)).into_response()
    }
}

fn bad_request(code: &str, message: String) -> Response {
    let body = ApiError { status: 400, code: code.to_owned(), message };
    (StatusCode::BAD_REQUEST, Json(body)).into_response()
}

type Shared = Arc<Platform>;

fn caller<'a>(p: &'a Platform, headers: &HeaderMap) -> Option<&'a Credential> {
    let token = headers.get("authorization")?.to_str().ok()?.strip_prefix("Bearer ")?;
    p.credential(token.trim())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestResponse {
    pub status: IngestAck,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegisterResponse {
    pub pseudonym: Pseudonym,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolveRequest {
    pub pseudonym: Pseudonym,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoreResponse {
    pub version: u32,
}

/// `results` is absent when nothing was stored yet.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultsResponse {
    pub pseudonym: Pseudonym,
    pub results: Option<StoredResults>,
}

#[derive(Debug, Deserialize)]
struct EventParams {
    from: Timestamp,
    to: Timestamp,
    kinds: Option<String>,
    #[serde(default)]
    offset: usize,
    limit: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct ResultParams {
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
    version: Option<u32>,
}

async fn ingest(State(p): State<Shared>, headers: HeaderMap, body: String) -> Result<Json<IngestResponse>, Failure> {
    let status = p.ingest(caller(&p, &headers), &body)?;
    Ok(Json(IngestResponse { status }))
}

async fn register(
    State(p): State<Shared>,
    headers: HeaderMap,
    Json(identity): Json<Identity>,
) -> Result<Json<RegisterResponse>, Failure> {
    Ok(Json(RegisterResponse { pseudonym: p.register(caller(&p, &headers), identity)? }))
}

async fn resolve(
    State(p): State<Shared>,
    headers: HeaderMap,
    Json(req): Json<ResolveRequest>,
) -> Result<Json<Identity>, Failure> {
    Ok(Json(p.resolve_identity(caller(&p, &headers), &req.pseudonym)?))
}

async fn subjects(State(p): State<Shared>, headers: HeaderMap) -> Result<Json<Vec<SubjectSummary>>, Failure> {
    Ok(Json(p.subjects(caller(&p, &headers))?))
}

async fn events(
    State(p): State<Shared>,
    headers: HeaderMap,
    Path(pseudonym): Path<String>,
    Query(q): Query<EventParams>,
) -> Response {
    let kinds = match q.kinds.as_deref().filter(|k| !k.is_empty()) {
        None => None,
        Some(list) => match list.split(',').map(|k| k.trim().parse::<DeviceKind>()).collect::<Result<BTreeSet<_>, _>>()
        {
            Ok(k) => Some(k),
            Err(_) => return bad_request("invalid-kinds", format!("unknown kind in `{list}`")),
        },
    };
    let query = EventQuery { from: q.from, to: q.to, kinds, offset: q.offset, limit: q.limit };
    match p.query_events(caller(&p, &headers), &Pseudonym::new(pseudonym), &query) {
        Ok(page) => Json(page).into_response(),
        Err(e) => Failure(e).into_response(),
    }
}

async fn get_results(
    State(p): State<Shared>,
    headers: HeaderMap,
    Path(pseudonym): Path<String>,
    Query(q): Query<ResultParams>,
) -> Response {
    let range = match (q.from, q.to) {
        (None, None) => None,
        (from, to) => Some((from.unwrap_or(NaiveDate::MIN), to.unwrap_or(NaiveDate::MAX))),
    };
    let pseudonym = Pseudonym::new(pseudonym);
    match p.query_results(caller(&p, &headers), &pseudonym, range, q.version) {
        Ok(results) => Json(ResultsResponse { pseudonym, results }).into_response(),
        Err(e) => Failure(e).into_response(),
    }
}

async fn post_results(
    State(p): State<Shared>,
    headers: HeaderMap,
    Path(pseudonym): Path<String>,
    Json(results): Json<AnalysisResults>,
) -> Result<Json<StoreResponse>, Failure> {
    let version = p.store_results(caller(&p, &headers), &Pseudonym::new(pseudonym), results)?;
    Ok(Json(StoreResponse { version }))
}

async fn rescore(
    State(p): State<Shared>,
    headers: HeaderMap,
    Path(pseudonym): Path<String>,
    Json(overrides): Json<ThresholdOverrides>,
) -> Result<Json<Rescored>, Failure> {
    Ok(Json(p.rescore(caller(&p, &headers), &Pseudonym::new(pseudonym), &overrides)?))
}

pub fn router(platform: Shared) -> Router {
    Router::new()
        .route("/v1/ingest", post(ingest))
        .route("/v1/register", post(register))
        .route("/v1/resolve-identity", post(resolve))
        .route("/v1/subjects", get(subjects))
        .route("/v1/subjects/{pseudonym}/events", get(events))
        .route("/v1/subjects/{pseudonym}/results", get(get_results).post(post_results))
        .route("/v1/subjects/{pseudonym}/rescore", post(rescore))
        .with_state(platform)
}

/// Serves the API until the process ends.
pub fn serve_forever(platform: Shared, addr: SocketAddr) -> std::io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!("platform listening on {}", listener.local_addr()?);
        axum::serve(listener, router(platform)).await
    })
}

/// A server on a background thread, stopped on drop.
pub struct Server {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

impl Server {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub fn start(platform: Shared, addr: SocketAddr) -> std::io::Result<Self> {
        let listener = std::net::TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener)?;
                axum::serve(listener, router(platform))
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
            })
        });
        Ok(Self { addr, stop: Some(tx), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) -> std::io::Result<()> {
        self.shutdown()
    }

    fn shutdown(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("platform unreachable: {0}")]
    Unreachable(String),
    #[error("platform error {}: {}", .0.code, .0.message)]
    Api(ApiError),
    #[error("unexpected response: {0}")]
    Protocol(String),
}

impl ClientError {
    /// Machine code for API errors.
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Api(e) => Some(&e.code),
            _ => None,
        }
    }
}

/// Blocking client for the platform API. Must not be used from inside an
/// async runtime.
#[derive(Debug, Clone)]
pub struct PlatformClient {
    base: String,
    token: String,
    http: reqwest::blocking::Client,
}

impl PlatformClient {
    pub fn new(base: &str, token: &str) -> Self {
        let http = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(120))
            .build()
            .expect("http client");
        Self { base: base.trim_end_matches('/').to_owned(), token: token.to_owned(), http }
    }

    fn send<T: for<'de> Deserialize<'de>>(&self, req: reqwest::blocking::RequestBuilder) -> Result<T, ClientError> {
        let resp = req.bearer_auth(&self.token).send().map_err(|e| ClientError::Unreachable(e.to_string()))?;
        let status = resp.status();
        let body = resp.text().map_err(|e| ClientError::Unreachable(e.to_string()))?;
        if status.is_success() {
            serde_json::from_str(&body).map_err(|e| ClientError::Protocol(format!("{e}: {body}")))
        } else {
            match serde_json::from_str::<ApiError>(&body) {
                Ok(e) => Err(ClientError::Api(e)),
                Err(_) => Err(ClientError::Protocol(format!("status {status}: {body}"))),
            }
        }
    }

    fn json<B: Serialize>(
        &self,
        req: reqwest::blocking::RequestBuilder,
        body: &B,
    ) -> reqwest::blocking::RequestBuilder {
        req.header("content-type", "application/json").body(serde_json::to_vec(body).expect("body serializes"))
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn ingest(&self, frame: &str) -> Result<IngestAck, ClientError> {
        let req = self.http.post(self.url("/v1/ingest")).header("content-type", "text/plain").body(frame.to_owned());
        Ok(self.send::<IngestResponse>(req)?.status)
    }

    pub fn register(&self, identity: &Identity) -> Result<Pseudonym, ClientError> {
        let req = self.json(self.http.post(self.url("/v1/register")), identity);
        Ok(self.send::<RegisterResponse>(req)?.pseudonym)
    }

    pub fn resolve_identity(&self, pseudonym: &Pseudonym) -> Result<Identity, ClientError> {
        let req = self
            .json(self.http.post(self.url("/v1/resolve-identity")), &ResolveRequest { pseudonym: pseudonym.clone() });
        self.send(req)
    }

    pub fn subjects(&self) -> Result<Vec<SubjectSummary>, ClientError> {
        self.send(self.http.get(self.url("/v1/subjects")))
    }

    pub fn events(&self, pseudonym: &Pseudonym, q: &EventQuery) -> Result<EventPage, ClientError> {
        let mut params = vec![("from", q.from.to_string()), ("to", q.to.to_string()), ("offset", q.offset.to_string())];
        if let Some(k) = &q.kinds {
            params.push(("kinds", k.iter().map(|k| k.tag()).collect::<Vec<_>>().join(",")));
        }
        if let Some(l) = q.limit {
            params.push(("limit", l.to_string()));
        }
        let url = reqwest::Url::parse_with_params(&self.url(&format!("/v1/subjects/{pseudonym}/events")), &params)
            .map_err(|e| ClientError::Protocol(e.to_string()))?;
        self.send(self.http.get(url))
    }

    pub fn results(
        &self,
        pseudonym: &Pseudonym,
        range: Option<(NaiveDate, NaiveDate)>,
        version: Option<u32>,
    ) -> Result<Option<StoredResults>, ClientError> {
        let mut params = Vec::new();
        if let Some((from, to)) = range {
            params.push(("from", from.to_string()));
            params.push(("to", to.to_string()));
        }
        if let Some(v) = version {
            params.push(("version", v.to_string()));
        }
        let url = reqwest::Url::parse_with_params(&self.url(&format!("/v1/subjects/{pseudonym}/results")), &params)
            .map_err(|e| ClientError::Protocol(e.to_string()))?;
        Ok(self.send::<ResultsResponse>(self.http.get(url))?.results)
    }

    pub fn store_results(&self, pseudonym: &Pseudonym, results: &AnalysisResults) -> Result<u32, ClientError> {
        let req = self.json(self.http.post(self.url(&format!("/v1/subjects/{pseudonym}/results"))), results);
        Ok(self.send::<StoreResponse>(req)?.version)
    }

    pub fn rescore(&self, pseudonym: &Pseudonym, overrides: &ThresholdOverrides) -> Result<Rescored, ClientError> {
        let req = self.json(self.http.post(self.url(&format!("/v1/subjects/{pseudonym}/rescore"))), overrides);
        self.send(req)
    }
}

impl Transport for PlatformClient {
    fn send(&self, frame: &str) -> Result<IngestAck, TransportError> {
        self.ingest(frame).map_err(|e| match e {
            ClientError::Unreachable(why) => TransportError::Unreachable(why),
            ClientError::Api(e) => TransportError::Rejected { code: e.code, message: e.message },
            ClientError::Protocol(m) => TransportError::Rejected { code: "protocol".into(), message: m },
        })
    }
}
