//! HTTP API over the projection, scenario store and experiment estimators.

pub mod api;
pub mod config;
pub mod error;

use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::http::{HeaderValue, Method};
use axum::routing::{get, post};
use axum::Router;
use ontrack_core::io::ScenarioStore;
use tower_http::cors::{Any, CorsLayer};
use tower_http::limit::RequestBodyLimitLayer;
use tower_http::trace::TraceLayer;

pub use config::ServiceConfig;
pub use error::{ApiError, ErrorCode};

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<ScenarioStore>,
}

impl AppState {
    pub fn open(config: &ServiceConfig) -> anyhow::Result<Self> {
        Ok(Self {
            store: Arc::new(ScenarioStore::open(&config.store_dir)?),
        })
    }
}

pub fn router(state: AppState, config: &ServiceConfig) -> anyhow::Result<Router> {
    let api = Router::new()
        .route("/health", get(api::health))
        .route("/projection", post(api::projection))
        .route("/required-rate", post(api::required_rate))
        .route("/whatif", post(api::what_if))
        .route("/scenarios", post(api::create_scenario).get(api::list_scenarios))
        .route("/scenarios/{id}", get(api::get_scenario))
        .route("/analyze", post(api::analyze));
    let mut app = Router::new()
        .nest("/api/v1", api)
        .with_state(state)
        .layer(DefaultBodyLimit::disable())
        .layer(RequestBodyLimitLayer::new(config.max_upload_bytes))
        .layer(TraceLayer::new_for_http());
    if let Some(origin) = &config.cors_origin {
        let cors = CorsLayer::new()
            .allow_origin(origin.parse::<HeaderValue>()?)
            .allow_methods([Method::GET, Method::POST])
            .allow_headers(Any);
        app = app.layer(cors);
    }
    Ok(app)
}

pub async fn serve(config: ServiceConfig) -> anyhow::Result<()> {
    let state = AppState::open(&config)?;
    let app = router(state, &config)?;
    let listener = tokio::net::TcpListener::bind((config.host.as_str(), config.port)).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        })
        .await?;
    Ok(())
}
