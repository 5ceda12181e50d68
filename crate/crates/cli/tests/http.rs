use std::sync::OnceLock;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use distforest::cohort::{synth_cohort, CohortMarginals, LinkModel};
use distforest::{fit_forest, Dataset, Feature, ForestConfig, Model};
use distforest_cli::service::router;
use distforest_cli::wire::ServedModel;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn model() -> &'static Model {
    static MODEL: OnceLock<Model> = OnceLock::new();
    MODEL.get_or_init(|| {
        let data = synth_cohort(&CohortMarginals::reference(), 200, 11, &LinkModel::default()).unwrap();
        let config = ForestConfig {
            num_trees: 300,
            ..ForestConfig::default()
        };
        Model::new(fit_forest(&data, &config).unwrap(), data).unwrap()
    })
}

fn app() -> Router {
    router(Some(ServedModel::new(model().clone()).unwrap()))
}

fn body_for(data: &Dataset, row: usize) -> Value {
    let x = data.features()[row];
    let mut body = serde_json::Map::new();
    for f in Feature::ALL {
        let v = x.get(f);
        body.insert(
            f.name().to_string(),
            if f == Feature::LymphNodes && v < 0.0 {
                Value::Null
            } else {
                json!(v)
            },
        );
    }
    Value::Object(body)
}

fn patient() -> Value {
    json!({
        "age": 58, "tumor_size": 1.8, "p53": 12, "sbr_grade": 2, "mitotic_grade": 2,
        "er": 95, "pr": 40, "ki67": 25, "lymph_nodes": 0
    })
}

async fn call(app: Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Option<String>, Vec<u8>) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let response = app.oneshot(request).await.unwrap();
    let status = response.status();
    let content_type = response
        .headers()
        .get(header::CONTENT_TYPE)
        .map(|v| v.to_str().unwrap().to_string());
    let bytes = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, content_type, bytes)
}

async fn post_json(app: Router, uri: &str, body: &Value) -> (StatusCode, Value) {
    let (status, _, bytes) = call(app, "POST", uri, Some(body.to_string())).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

#[tokio::test]
async fn predict_returns_a_normalized_document() {
    let (status, content_type, bytes) = call(app(), "POST", "/api/v1/predict", Some(patient().to_string())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(content_type.as_deref(), Some("application/json"));
    let doc: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(doc["schema_version"], "distforest-api/v1");
    assert_eq!(doc["model_version"].as_str().unwrap().len(), 16);

    let summary = &doc["summary"];
    let binary = &summary["binary_probs"];
    let le = binary["le_high_cut"].as_f64().unwrap();
    let gt = binary["gt_high_cut"].as_f64().unwrap();
    assert!((le + gt - 1.0).abs() <= 1e-9);
    let classes = &summary["class_probs"];
    let total: f64 = ["low", "intermediate", "high"]
        .iter()
        .map(|k| classes[k].as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() <= 1e-9);
    for p in [le, gt] {
        assert!((0.0..=1.0).contains(&p));
    }

    let histogram = doc["histogram"].as_array().unwrap();
    assert_eq!(histogram.len(), 20);
    let mass: f64 = histogram.iter().map(|b| b[2].as_f64().unwrap()).sum();
    assert!((mass - 1.0).abs() <= 1e-9);
    assert_eq!(histogram[0][0], 0.0);
    assert_eq!(histogram[19][1], 100.0);

    let lo = summary["credible_interval_90"]["lo"].as_f64().unwrap();
    let hi = summary["credible_interval_90"]["hi"].as_f64().unwrap();
    let median = summary["median"].as_f64().unwrap();
    assert!(lo <= median && median <= hi);

    let neighbors = doc["neighbors"]["entries"].as_array().unwrap();
    assert_eq!(neighbors.len(), 10);
    assert!(neighbors.iter().all(|n| n["id"].as_str().unwrap().starts_with("row-")));
}

#[tokio::test]
async fn identical_requests_identical_responses() {
    let body = patient().to_string();
    let calls = (0..4).map(|_| call(app(), "POST", "/api/v1/predict", Some(body.clone())));
    let results = concurrently(calls).await;
    for r in &results[1..] {
        assert_eq!(r.2, results[0].2);
    }
}

async fn concurrently<F: std::future::Future + Send + 'static>(calls: impl Iterator<Item = F>) -> Vec<F::Output>
where
    F::Output: Send + 'static,
{
    let handles: Vec<_> = calls.map(tokio::spawn).collect();
    let mut out = Vec::new();
    for h in handles {
        out.push(h.await.unwrap());
    }
    out
}

#[tokio::test]
async fn training_patient_is_its_own_top_neighbor() {
    let data = model().data();
    for row in (0..data.len()).step_by(23) {
        let (status, doc) = post_json(app(), "/api/v1/predict", &body_for(data, row)).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(doc["neighbors"]["entries"][0]["id"], format!("row-{row}"));
        assert_eq!(doc["neighbors"]["entries"][0]["odx_score"], data.responses()[row]);
    }
}

#[tokio::test]
async fn malformed_bodies_are_400_with_field_errors() {
    let (status, _, bytes) = call(app(), "POST", "/api/v1/predict", Some("{not json".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let doc: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(doc["fields"][0]["field"], "body");

    let mut missing = patient();
    missing.as_object_mut().unwrap().remove("ki67");
    let (status, doc) = post_json(app(), "/api/v1/predict", &missing).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(doc["fields"][0]["field"], "ki67");
    assert_eq!(doc["fields"][0]["message"], "missing");

    let mut typed = patient();
    typed["age"] = json!("old");
    let (status, doc) = post_json(app(), "/api/v1/predict", &typed).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(doc["fields"][0]["field"], "age");

    let mut scored = patient();
    scored["odx_score"] = json!(18);
    let (status, _) = post_json(app(), "/api/v1/predict", &scored).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn out_of_range_values_are_422() {
    let mut body = patient();
    body["ki67"] = json!(250);
    body["sbr_grade"] = json!(4);
    let (status, doc) = post_json(app(), "/api/v1/predict", &body).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let fields: Vec<&str> = doc["fields"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["field"].as_str().unwrap())
        .collect();
    assert_eq!(fields, ["sbr_grade", "ki67"]);

    let mut body = patient();
    body["k"] = json!(0);
    let (status, _) = post_json(app(), "/api/v1/neighbors", &body).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn unloaded_service_answers_503() {
    for (method, uri, body) in [
        ("POST", "/api/v1/predict", Some(patient().to_string())),
        ("POST", "/api/v1/neighbors", Some(patient().to_string())),
        ("GET", "/api/v1/model/info", None),
    ] {
        let (status, _, bytes) = call(router(None), method, uri, body).await;
        assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE, "{uri}");
        let doc: Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(doc["error"], "model not loaded");
    }
}

#[tokio::test]
async fn neighbors_respect_k_and_order() {
    let mut body = patient();
    body["k"] = json!(3);
    let (status, doc) = post_json(app(), "/api/v1/neighbors", &body).await;
    assert_eq!(status, StatusCode::OK);
    let entries = doc["neighbors"]["entries"].as_array().unwrap();
    assert!(entries.len() <= 3);
    let weights: Vec<f64> = entries.iter().map(|e| e["weight"].as_f64().unwrap()).collect();
    assert!(weights.windows(2).all(|w| w[0] >= w[1]));
    let ranks: Vec<u64> = entries.iter().map(|e| e["rank"].as_u64().unwrap()).collect();
    assert_eq!(ranks, [1, 2, 3]);
    for key in ["odx_score", "ki67", "p53", "er", "pr", "age", "tumor_size"] {
        assert!(doc["profile"][key].is_number(), "{key}");
    }
    // no free-text identifiers leak through
    assert!(entries.iter().all(|e| e["features"].get("id").is_none()));

    let (_, doc) = post_json(app(), "/api/v1/neighbors", &patient()).await;
    assert_eq!(doc["neighbors"]["k"], 10);
}

#[tokio::test]
async fn info_matches_the_model() {
    let (status, _, bytes) = call(app(), "GET", "/api/v1/model/info", None).await;
    assert_eq!(status, StatusCode::OK);
    let doc: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(doc["num_trees"], 300);
    assert_eq!(doc["num_rows"], 200);
    assert_eq!(doc["seed"], 42);
    assert_eq!(doc["format"], "distforest-model/v1");
    assert_eq!(doc["features"].as_array().unwrap().len(), 9);
    assert_eq!(doc["dataset_fingerprint"], model().data().fingerprint());
}

#[tokio::test]
async fn unknown_route_is_404() {
    let (status, _, _) = call(app(), "GET", "/api/v2/predict", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
