//! Read-only JSON API over a pipeline output directory.
//!
//! [`ResultStore::load`] reads every state's artifacts once; [`handle`] maps
//! a GET path and query string to a status and JSON body without touching the
//! network, and [`router`] wraps it for axum.

mod api;
mod store;

use std::sync::Arc;

use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode, Uri};
use axum::response::IntoResponse;
use axum::Router;

pub use api::{handle, Response};
pub use store::{ResultStore, StateData, VoteKey};

async fn dispatch(State(store): State<Arc<ResultStore>>, method: Method, uri: Uri) -> axum::response::Response {
    let reply = if method == Method::GET || method == Method::HEAD {
        handle(&store, uri.path(), uri.query().unwrap_or(""))
    } else {
        Response { status: 405, body: r#"{"error":"method_not_allowed","message":"the API is read-only"}"#.into() }
    };
    let status = StatusCode::from_u16(reply.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let mut resp = (status, reply.body).into_response();
    let headers = resp.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    headers.insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, HeaderValue::from_static("*"));
    resp
}

pub fn router(store: Arc<ResultStore>) -> Router {
    Router::new().fallback(dispatch).with_state(store)
}

/// Serves until the listener fails.
pub async fn serve(store: Arc<ResultStore>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(store)).await
}
