//! Request and response bodies, and the handlers that map them onto the core.

use axum::body::Bytes;
use axum::extract::{FromRequest, Multipart, Path, Request, State};
use axum::http::StatusCode;
use axum::Json;
use ontrack_core::experiment::{
    het_effects, itt, late, AgeCutpoints, ArmCoding, CovarianceKind, EstimatorOptions,
    GroupIndicator, Outcome, RegressionFit,
};
use ontrack_core::io::{parse_roster_str, LoadOptions, Scenario, ScenarioSummary};
use ontrack_core::projection::{
    project_retirement_income, required_contribution_rate, required_rate_with_balance, whatif,
    Assumptions, EmployeeProfile, IncomeProjection, Money, ProjectionDisplay,
};
use ontrack_core::FieldError;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::AppState;

/// JSON body whose deserialization errors name the offending field.
pub struct JsonBody<T>(pub T);

pub fn parse_json<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = match e.path().to_string() {
            p if p == "." => "body".to_string(),
            p => p,
        };
        ApiError::field(&path, e.inner().to_string())
    })?;
    de.end()
        .map_err(|e| ApiError::field("body", e.to_string()))?;
    Ok(value)
}

impl<S, T> FromRequest<S> for JsonBody<T>
where
    S: Send + Sync,
    T: DeserializeOwned,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError::field("body", e.body_text()).with_status(e.status()))?;
        parse_json(&bytes).map(JsonBody)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionRequest {
    pub profile: EmployeeProfile,
    #[serde(default)]
    pub assumptions: Assumptions,
}

/// A projection plus its display rounding, goal check and input warnings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResponse {
    #[serde(flatten)]
    pub projection: IncomeProjection,
    pub display: ProjectionDisplay,
    pub on_track: bool,
    pub warnings: Vec<FieldError>,
}

fn respond(
    profile: &EmployeeProfile,
    assumptions: &Assumptions,
    projection: IncomeProjection,
) -> ProjectionResponse {
    let warnings = profile
        .validate()
        .unwrap_or_default()
        .into_iter()
        .map(|w| w.nested("profile"))
        .collect();
    ProjectionResponse {
        display: projection.display(),
        on_track: projection.on_track(assumptions.goal_replacement),
        projection,
        warnings,
    }
}

pub async fn projection(
    JsonBody(req): JsonBody<ProjectionRequest>,
) -> Result<Json<ProjectionResponse>, ApiError> {
    let result = project_retirement_income(&req.profile, &req.assumptions)?;
    Ok(Json(respond(&req.profile, &req.assumptions, result)))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequiredRateRequest {
    pub p: f64,
    pub d: f64,
    pub r: f64,
    pub n: u32,
    #[serde(default)]
    pub balance: Option<Money>,
    #[serde(default)]
    pub salary: Option<Money>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequiredRateResponse {
    pub rate: f64,
}

pub async fn required_rate(
    JsonBody(req): JsonBody<RequiredRateRequest>,
) -> Result<Json<RequiredRateResponse>, ApiError> {
    let rate = match (req.balance, req.salary) {
        (None, _) => required_contribution_rate(req.p, req.d, req.r, req.n)?,
        (Some(balance), Some(salary)) => {
            required_rate_with_balance(req.p, req.d, req.r, req.n, balance, salary)?
        }
        (Some(_), None) => {
            return Err(ApiError::field("salary", "salary is required when balance is given"))
        }
    };
    Ok(Json(RequiredRateResponse { rate }))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    pub profile: EmployeeProfile,
    #[serde(default)]
    pub assumptions: Assumptions,
    #[serde(default)]
    pub delta_c: f64,
    #[serde(default)]
    pub lump_sum: Money,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfResponse {
    pub baseline: ProjectionResponse,
    pub adjusted: ProjectionResponse,
}

pub async fn what_if(
    JsonBody(req): JsonBody<WhatIfRequest>,
) -> Result<Json<WhatIfResponse>, ApiError> {
    let w = whatif(&req.profile, &req.assumptions, req.delta_c, req.lump_sum)?;
    let mut adjusted_profile = req.profile.clone();
    adjusted_profile.contribution_rate += req.delta_c;
    Ok(Json(WhatIfResponse {
        baseline: respond(&req.profile, &req.assumptions, w.baseline),
        adjusted: respond(&adjusted_profile, &req.assumptions, w.adjusted),
    }))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRequest {
    pub profile: EmployeeProfile,
    #[serde(default)]
    pub assumptions: Assumptions,
    #[serde(default)]
    pub label: Option<String>,
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

pub async fn create_scenario(
    State(state): State<AppState>,
    JsonBody(req): JsonBody<ScenarioRequest>,
) -> Result<Json<Scenario>, ApiError> {
    let scenario = Scenario::new(req.profile, req.assumptions, req.label)?;
    let store = state.store.clone();
    blocking(move || {
        store.save(&scenario)?;
        Ok(Json(scenario))
    })
    .await
}

pub async fn list_scenarios(
    State(state): State<AppState>,
) -> Result<Json<Vec<ScenarioSummary>>, ApiError> {
    let store = state.store.clone();
    blocking(move || Ok(Json(store.list()?))).await
}

pub async fn get_scenario(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Scenario>, ApiError> {
    let store = state.store.clone();
    blocking(move || Ok(Json(store.get(&id)?))).await
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Itt,
    Late,
    Het,
}

fn default_estimators() -> Vec<Estimator> {
    vec![Estimator::Itt, Estimator::Late]
}

/// The `options` part of an analysis upload.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeOptions {
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default)]
    pub outcome: Outcome,
    #[serde(default)]
    pub covariance: CovarianceKind,
    /// Defaults to on for itt and late and off for het.
    #[serde(default)]
    pub fixed_effects: Option<bool>,
    #[serde(default)]
    pub arms: ArmCoding,
    #[serde(default)]
    pub cutpoints: AgeCutpoints,
    #[serde(default)]
    pub group: Option<GroupIndicator>,
    #[serde(default)]
    pub max_row_errors: usize,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        parse_json(b"{}").expect("empty options parse")
    }
}

impl AnalyzeOptions {
    fn estimator_options(&self, default_fe: bool) -> EstimatorOptions {
        EstimatorOptions {
            outcome: self.outcome,
            covariance: self.covariance,
            fixed_effects: self.fixed_effects.unwrap_or(default_fe),
            arms: self.arms,
            cutpoints: self.cutpoints,
        }
    }
}

pub fn run_analysis(roster_csv: &str, opts: &AnalyzeOptions) -> Result<Vec<RegressionFit>, ApiError> {
    if opts.estimators.is_empty() {
        return Err(ApiError::field("options.estimators", "choose at least one of itt, late, het"));
    }
    if opts.estimators.contains(&Estimator::Het) && opts.group.is_none() {
        return Err(ApiError::field("options.group", "het requires a group indicator"));
    }
    if !opts.cutpoints.is_valid() {
        return Err(ApiError::field("options.cutpoints", "cutpoints must be strictly increasing"));
    }
    let (roster, _) = parse_roster_str(
        roster_csv,
        &LoadOptions {
            max_row_errors: opts.max_row_errors,
        },
    )?;
    opts.estimators
        .iter()
        .map(|e| {
            Ok(match e {
                Estimator::Itt => itt(&roster, &opts.estimator_options(true))?,
                Estimator::Late => late(&roster, &opts.estimator_options(true))?,
                Estimator::Het => het_effects(
                    &roster,
                    &opts.estimator_options(false),
                    opts.group.expect("checked above"),
                )?,
            })
        })
        .collect()
}

/// Multipart upload: a `roster` CSV part and an optional `options` JSON part.
pub async fn analyze(mut multipart: Multipart) -> Result<Json<Vec<RegressionFit>>, ApiError> {
    let mut roster = None;
    let mut options = AnalyzeOptions::default();
    loop {
        let field = multipart.next_field().await.map_err(multipart_error)?;
        let Some(field) = field else { break };
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field.bytes().await.map_err(multipart_error)?;
        match name.as_str() {
            "roster" => {
                let text = String::from_utf8(bytes.to_vec())
                    .map_err(|_| ApiError::field("roster", "roster must be UTF-8 text"))?;
                roster = Some(text);
            }
            "options" => {
                options = parse_json(&bytes).map_err(|mut e| {
                    for f in &mut e.field_errors {
                        f.path = format!("options.{}", f.path);
                    }
                    e
                })?
            }
            other => return Err(ApiError::field(other, "unexpected form field")),
        }
    }
    let roster = roster.ok_or_else(|| ApiError::field("roster", "a roster CSV part is required"))?;
    blocking(move || run_analysis(&roster, &options).map(Json)).await
}

fn multipart_error(e: axum::extract::multipart::MultipartError) -> ApiError {
    let status = e.status();
    let err = ApiError::field("roster", e.body_text());
    if status == StatusCode::PAYLOAD_TOO_LARGE {
        err.with_status(status)
    } else {
        err
    }
}

pub async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}
