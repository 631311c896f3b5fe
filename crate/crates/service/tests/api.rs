use axum::body::{to_bytes, Body};
use axum::http::{header, Request, StatusCode};
use axum::Router;
use ontrack_core::experiment::{simulate_population, AgeCutpoints, DgpParams};
use ontrack_core::io::roster_to_csv;
use ontrack_service::{router, AppState, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(dir: &std::path::Path) -> Router {
    app_with(ServiceConfig {
        store_dir: dir.to_path_buf(),
        ..ServiceConfig::default()
    })
}

fn app_with(cfg: ServiceConfig) -> Router {
    router(AppState::open(&cfg).unwrap(), &cfg).unwrap()
}

fn reference_profile() -> Value {
    json!({
        "gender": "male",
        "age": 30,
        "retirement_age": 65,
        "balance": 70000.0,
        "salary": 200000.0,
        "contribution_rate": 0.075
    })
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, bytes.to_vec())
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn multipart(parts: &[(&str, &str)]) -> (String, Vec<u8>) {
    let boundary = "ontrack-test-boundary";
    let mut body = Vec::new();
    for (name, content) in parts {
        body.extend_from_slice(
            format!("--{boundary}\r\nContent-Disposition: form-data; name=\"{name}\"; filename=\"{name}\"\r\n\r\n")
                .as_bytes(),
        );
        body.extend_from_slice(content.as_bytes());
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={boundary}"), body)
}

async fn upload(app: &Router, parts: &[(&str, &str)]) -> (StatusCode, Value) {
    let (ctype, body) = multipart(parts);
    let req = Request::post("/api/v1/analyze")
        .header(header::CONTENT_TYPE, ctype)
        .body(Body::from(body))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap())
}

#[tokio::test]
async fn health() {
    let dir = tempfile::tempdir().unwrap();
    let (status, body) = call_json(&app(dir.path()), "GET", "/api/v1/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn projection_band_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let req = json!({ "profile": reference_profile() });
    let (status, first) = call(&app, "POST", "/api/v1/projection", Some(req.clone())).await;
    assert_eq!(status, StatusCode::OK);
    let (_, second) = call(&app, "POST", "/api/v1/projection", Some(req)).await;
    assert_eq!(first, second);

    let body: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(body["display"]["replacement_pct_lo"], 26);
    assert_eq!(body["display"]["replacement_pct_hi"], 39);
    assert!(body["replacement_lo"].as_f64().unwrap() < body["replacement_hi"].as_f64().unwrap());
    assert_eq!(body["years"], 35);
    assert!(body["warnings"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn slider_raises_band() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let req = json!({ "profile": reference_profile(), "delta_c": 0.075 });
    let (status, body) = call_json(&app, "POST", "/api/v1/whatif", Some(req)).await;
    assert_eq!(status, StatusCode::OK);
    for k in ["replacement_lo", "replacement_hi"] {
        assert!(body["adjusted"][k].as_f64().unwrap() > body["baseline"][k].as_f64().unwrap());
    }
}

#[tokio::test]
async fn zero_delta_whatif_matches_projection() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (_, proj) =
        call_json(&app, "POST", "/api/v1/projection", Some(json!({ "profile": reference_profile() }))).await;
    let req = json!({ "profile": reference_profile(), "delta_c": 0.0, "lump_sum": 0.0 });
    let (status, w) = call_json(&app, "POST", "/api/v1/whatif", Some(req)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(w["baseline"], proj);
    assert_eq!(w["adjusted"], proj);
}

#[tokio::test]
async fn required_rate() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let req = json!({ "p": 0.75, "d": 0.04, "r": 0.05, "n": 40 });
    let (status, body) = call_json(&app, "POST", "/api/v1/required-rate", Some(req)).await;
    assert_eq!(status, StatusCode::OK);
    assert!((body["rate"].as_f64().unwrap() - 0.1552).abs() < 5e-5);

    let req = json!({ "p": 0.75, "d": 0.04, "r": 0.05, "n": 40, "balance": 0.0, "salary": 100000.0 });
    let (_, with_zero) = call_json(&app, "POST", "/api/v1/required-rate", Some(req)).await;
    assert!((with_zero["rate"].as_f64().unwrap() / body["rate"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let req = json!({ "p": 0.75, "d": 0.0, "r": 0.05, "n": 40 });
    let (status, err) = call_json(&app, "POST", "/api/v1/required-rate", Some(req)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["field_errors"][0]["path"], "d");

    let req = json!({ "p": -1.0, "d": 0.0, "r": 0.05, "n": 0 });
    let (status, err) = call_json(&app, "POST", "/api/v1/required-rate", Some(req)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let paths: Vec<&str> =
        err["field_errors"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(paths, ["p", "d", "n"]);

    let req = json!({ "p": 0.75, "d": 0.04, "r": 0.05, "n": 40, "balance": 10.0 });
    let (status, err) = call_json(&app, "POST", "/api/v1/required-rate", Some(req)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["field_errors"][0]["path"], "salary");
}

#[tokio::test]
async fn validation_envelope_names_fields() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());

    let mut profile = reference_profile();
    profile["age"] = json!(70);
    profile["contribution_rate"] = json!(1.5);
    let (status, err) =
        call_json(&app, "POST", "/api/v1/projection", Some(json!({ "profile": profile }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "validation");
    let paths: Vec<&str> = err["field_errors"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["path"].as_str().unwrap())
        .collect();
    assert!(paths.contains(&"profile.contribution_rate"), "{paths:?}");
    assert!(paths.len() >= 2, "{paths:?}");

    let mut profile = reference_profile();
    profile["age"] = json!("thirty");
    let (status, err) =
        call_json(&app, "POST", "/api/v1/projection", Some(json!({ "profile": profile }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["field_errors"][0]["path"], "profile.age");

    let (status, err) = call_json(&app, "POST", "/api/v1/projection", Some(json!("profile"))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["field_errors"][0]["path"], "body");

    let req = Request::post("/api/v1/projection")
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from("{not json"))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn scenarios_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let req = json!({ "profile": reference_profile(), "label": "baseline" });
    let (status, saved) = call_json(&app, "POST", "/api/v1/scenarios", Some(req)).await;
    assert_eq!(status, StatusCode::OK);
    let id = saved["id"].as_str().unwrap().to_string();
    assert_eq!(saved["v"], 1);

    let (status, got) = call_json(&app, "GET", &format!("/api/v1/scenarios/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(got, saved);

    // A fresh router on the same directory sees the saved scenario.
    let reopened = self::app(dir.path());
    let (_, list) = call_json(&reopened, "GET", "/api/v1/scenarios", None).await;
    let list = list.as_array().unwrap();
    assert_eq!(list.len(), 1);
    assert_eq!(list[0]["id"], id.as_str());
    assert_eq!(list[0]["label"], "baseline");
    assert_eq!(list[0]["replacement_lo"], saved["result"]["replacement_lo"]);

    let (status, err) = call_json(&app, "GET", "/api/v1/scenarios/doesnotexist", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "not_found");
}

fn sample_roster_csv() -> String {
    let dgp = DgpParams {
        n: 400,
        ..DgpParams::default()
    };
    roster_to_csv(&simulate_population(&dgp, &AgeCutpoints::default(), 11).unwrap())
}

#[tokio::test]
async fn analyze_upload() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let csv = sample_roster_csv();

    let (status, fits) = upload(&app, &[("roster", &csv)]).await;
    assert_eq!(status, StatusCode::OK, "{fits}");
    let fits = fits.as_array().unwrap();
    assert_eq!(fits.len(), 2);
    assert_eq!(fits[0]["estimator"], "itt");
    assert_eq!(fits[1]["estimator"], "late");
    assert!(fits[1]["first_stage_f"].as_f64().unwrap() > 10.0);

    let opts = r#"{"estimators": ["het"], "group": "male"}"#;
    let (status, fits) = upload(&app, &[("options", opts), ("roster", &csv)]).await;
    assert_eq!(status, StatusCode::OK, "{fits}");
    assert_eq!(fits.as_array().unwrap().len(), 1);

    let (status, err) = upload(&app, &[("options", r#"{"estimators": ["het"]}"#), ("roster", &csv)]).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["field_errors"][0]["path"], "options.group");

    let (status, err) = upload(&app, &[("options", r#"{"estimators": ["ols"]}"#), ("roster", &csv)]).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(err["field_errors"][0]["path"].as_str().unwrap().starts_with("options.estimators"));

    let (status, err) = upload(&app, &[("options", "{}")]).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["field_errors"][0]["path"], "roster");
}

#[tokio::test]
async fn analyze_reports_bad_rows() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let csv = sample_roster_csv();
    let mut lines: Vec<String> = csv.lines().map(String::from).collect();
    let cols: Vec<&str> = lines[3].split(',').collect();
    let broken = std::iter::once(cols[0])
        .chain(std::iter::once("abc"))
        .chain(cols[2..].iter().copied())
        .collect::<Vec<_>>()
        .join(",");
    lines[3] = broken;
    let csv = lines.join("\n") + "\n";

    let (status, err) = upload(&app, &[("roster", &csv)]).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let path = err["field_errors"][0]["path"].as_str().unwrap();
    assert!(path.starts_with("roster.line4"), "{path}");

    let (status, _) = upload(&app, &[("options", r#"{"max_row_errors": 1}"#), ("roster", &csv)]).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn oversize_upload_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_with(ServiceConfig {
        store_dir: dir.path().to_path_buf(),
        max_upload_bytes: 1024,
        ..ServiceConfig::default()
    });
    let (status, err) = upload(&app, &[("roster", &sample_roster_csv())]).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(err["code"], "validation");
}

#[tokio::test]
async fn cors_header_for_configured_origin() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_with(ServiceConfig {
        store_dir: dir.path().to_path_buf(),
        cors_origin: Some("http://localhost:5173".into()),
        ..ServiceConfig::default()
    });
    let req = Request::get("/api/v1/health")
        .header(header::ORIGIN, "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(
        resp.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN],
        "http://localhost:5173"
    );
}
