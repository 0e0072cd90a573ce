//! HTTP+JSON API over an [`AnnotationStore`].
//!
//! | method | path                | body / query                         |
//! |--------|---------------------|--------------------------------------|
//! | GET    | `/api/session`      | `?annotator=` optional               |
//! | GET    | `/api/next`         | `?annotator=` required               |
//! | POST   | `/api/labels`       | `{tweet_id, annotator_id, label}`    |
//! | GET    | `/api/ties`         |                                      |
//! | POST   | `/api/adjudications`| `{tweet_id, label}`                  |
//! | GET    | `/api/agreement`    |                                      |
//! | POST   | `/api/finalize`     |                                      |
//!
//! Errors come back as `{"error": "..."}` with a 4xx status for bad requests.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::annotation::{self, AnnotationRecord, AnnotationStore, LabelClass, Vote};
use crate::error::Error;

#[derive(Clone)]
pub struct AppState {
    store: Arc<Mutex<AnnotationStore>>,
    finalize_output: Option<PathBuf>,
}

impl AppState {
    /// `finalize_output` is where `POST /api/finalize` writes the labeled
    /// dataset; without it the result is only returned.
    pub fn new(store: AnnotationStore, finalize_output: Option<PathBuf>) -> Self {
        AppState {
            store: Arc::new(Mutex::new(store)),
            finalize_output,
        }
    }

    fn lock(&self) -> MutexGuard<'_, AnnotationStore> {
        self.store.lock().unwrap_or_else(|p| p.into_inner())
    }
}

pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn bad_request(msg: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: json!({ "error": msg.into() }),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Validation(_) | Error::Schema(_) | Error::Contract(_) => StatusCode::BAD_REQUEST,
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::UnresolvedTies(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut body = json!({ "error": e.to_string() });
        if let Error::UnresolvedTies(ids) = &e {
            body["unresolved"] = json!(ids);
        }
        ApiError { status, body }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError {
            status: r.status(),
            body: json!({ "error": r.body_text() }),
        }
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Deserialize)]
struct AnnotatorQuery {
    annotator: Option<String>,
}

#[derive(Serialize)]
struct Progress {
    labeled: usize,
    total: usize,
}

#[derive(Serialize)]
struct HistoryItem {
    tweet_id: String,
    label: LabelClass,
}

#[derive(Serialize)]
struct SessionView {
    tweets: usize,
    annotators: Vec<String>,
    labeled_tweets: usize,
    open_ties: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    annotator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    progress: Option<Progress>,
    #[serde(skip_serializing_if = "Option::is_none")]
    history: Option<Vec<HistoryItem>>,
}

fn progress(store: &AnnotationStore, annotator: &str) -> Progress {
    let labeled = store
        .dataset()
        .records()
        .iter()
        .filter(|r| store.label_of(&r.id, annotator).is_some())
        .count();
    Progress {
        labeled,
        total: store.dataset().len(),
    }
}

#[derive(Serialize)]
struct TieView {
    tweet_id: String,
    text: String,
    #[serde(flatten)]
    vote: Vote,
}

fn open_ties(store: &AnnotationStore) -> Vec<TieView> {
    store
        .ties()
        .into_iter()
        .filter(|o| !store.adjudications().contains_key(&o.tweet_id))
        .map(|o| TieView {
            text: store.dataset().get(&o.tweet_id).map(|r| r.text.clone()).unwrap_or_default(),
            tweet_id: o.tweet_id,
            vote: o.vote,
        })
        .collect()
}

async fn session(
    State(st): State<AppState>,
    q: Result<Query<AnnotatorQuery>, QueryRejection>,
) -> ApiResult<SessionView> {
    let Query(q) = q?;
    let store = st.lock();
    let annotator = q.annotator.filter(|a| !a.trim().is_empty());
    let history = annotator.as_ref().map(|a| {
        store
            .records()
            .into_iter()
            .filter(|r| &r.annotator_id == a)
            .map(|r| HistoryItem {
                tweet_id: r.tweet_id,
                label: r.label,
            })
            .collect()
    });
    let labeled_tweets = store
        .dataset()
        .records()
        .iter()
        .filter(|r| !store.labels_for(&r.id).is_empty())
        .count();
    Ok(Json(SessionView {
        tweets: store.dataset().len(),
        annotators: store.annotators().into_iter().collect(),
        labeled_tweets,
        open_ties: open_ties(&store).len(),
        progress: annotator.as_deref().map(|a| progress(&store, a)),
        annotator,
        history,
    }))
}

#[derive(Serialize)]
struct TweetView {
    id: String,
    text: String,
}

#[derive(Serialize)]
struct NextView {
    tweet: Option<TweetView>,
    progress: Progress,
}

async fn next(State(st): State<AppState>, q: Result<Query<AnnotatorQuery>, QueryRejection>) -> ApiResult<NextView> {
    let Query(q) = q?;
    let annotator = q
        .annotator
        .filter(|a| !a.trim().is_empty())
        .ok_or_else(|| ApiError::bad_request("query parameter `annotator` is required"))?;
    let store = st.lock();
    Ok(Json(NextView {
        tweet: store.next_for(&annotator).map(|r| TweetView {
            id: r.id.clone(),
            text: r.text.clone(),
        }),
        progress: progress(&store, &annotator),
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelRequest {
    tweet_id: String,
    annotator_id: String,
    label: String,
}

#[derive(Serialize)]
struct LabelResponse {
    record: AnnotationRecord,
    vote: Vote,
}

async fn post_label(
    State(st): State<AppState>,
    body: Result<Json<LabelRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<LabelResponse>), ApiError> {
    let Json(req) = body?;
    let label: LabelClass = req.label.parse()?;
    let mut store = st.lock();
    let record = store.record_label(&req.tweet_id, &req.annotator_id, label)?;
    let vote = store.vote(&req.tweet_id)?.vote;
    Ok((StatusCode::CREATED, Json(LabelResponse { record, vote })))
}

async fn ties(State(st): State<AppState>) -> ApiResult<Vec<TieView>> {
    Ok(Json(open_ties(&st.lock())))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AdjudicationRequest {
    tweet_id: String,
    label: String,
}

async fn post_adjudication(
    State(st): State<AppState>,
    body: Result<Json<AdjudicationRequest>, JsonRejection>,
) -> ApiResult<serde_json::Value> {
    let Json(req) = body?;
    let label: LabelClass = req.label.parse()?;
    let mut store = st.lock();
    let outcome = store.vote(&req.tweet_id)?;
    if !outcome.vote.needs_adjudication() {
        return Err(ApiError {
            status: StatusCode::CONFLICT,
            body: json!({ "error": format!("tweet {} is not awaiting adjudication", req.tweet_id) }),
        });
    }
    store.adjudicate(&req.tweet_id, label)?;
    Ok(Json(json!({ "tweet_id": req.tweet_id, "label": label, "open_ties": open_ties(&store).len() })))
}

async fn agreement(State(st): State<AppState>) -> ApiResult<annotation::AgreementReport> {
    Ok(Json(annotation::agreement_stats(&st.lock())))
}

#[derive(Serialize)]
struct FinalizeView {
    labeled: usize,
    class_counts: BTreeMap<LabelClass, usize>,
    excluded: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<String>,
}

async fn finalize(State(st): State<AppState>) -> ApiResult<FinalizeView> {
    let store = st.lock();
    let ld = annotation::finalize(&store, store.adjudications())?;
    if let Some(out) = &st.finalize_output {
        ld.save(out)?;
    }
    Ok(Json(FinalizeView {
        labeled: ld.len(),
        class_counts: ld.class_counts().clone(),
        excluded: ld.excluded().to_vec(),
        output: st.finalize_output.as_ref().map(|p| p.display().to_string()),
    }))
}

/// The API routes, plus static files from `static_dir` at `/` when given.
pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/session", get(session))
        .route("/api/next", get(next))
        .route("/api/labels", post(post_label))
        .route("/api/ties", get(ties))
        .route("/api/adjudications", post(post_adjudication))
        .route("/api/agreement", get(agreement))
        .route("/api/finalize", post(finalize))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Binds `addr`, reporting an occupied port as a user-facing error.
pub async fn bind(addr: SocketAddr) -> crate::Result<tokio::net::TcpListener> {
    tokio::net::TcpListener::bind(addr).await.map_err(|e| {
        if e.kind() == std::io::ErrorKind::AddrInUse {
            Error::Validation(format!("port {} is already in use", addr.port()))
        } else {
            Error::Io {
                path: PathBuf::from(addr.to_string()),
                source: e,
            }
        }
    })
}

/// Serves until `shutdown` resolves. Every label write has already reached
/// the journal, so stopping finalizes nothing implicitly.
pub async fn serve(
    listener: tokio::net::TcpListener,
    app: Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> crate::Result<()> {
    let addr = listener.local_addr().ok();
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| Error::Io {
            path: PathBuf::from(addr.map(|a| a.to_string()).unwrap_or_default()),
            source: e,
        })
}
