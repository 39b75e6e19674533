//! Scripted client sessions against the annotation HTTP API.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use moodcall::annotation::{aggregate_all, label_records, router, AnnotationService, RatingLog};
use moodcall::dsp::decode_wav_bytes;
use moodcall::sampling::{select_segments, SamplingPlan, Selection};
use moodcall::synth::{generate_corpus, SynthConfig};

fn small_selection(dir: &Path) -> Selection {
    let cfg = SynthConfig {
        n_subjects: 3,
        segments_per_call: 2,
        segment_s: (3.2, 3.6),
        seed: 4,
        ..SynthConfig::default()
    };
    let (corpus, _) = generate_corpus(&cfg, dir).unwrap();
    let plan = SamplingPlan {
        assessment_cap: 2,
        personal_count: 6,
        ..SamplingPlan::new(8)
    };
    select_segments(&corpus.manifest, &corpus.manifest.segments, &plan).unwrap()
}

fn app(dir: &Path, sel: &Selection) -> (Router, Arc<AnnotationService>) {
    let svc = Arc::new(
        AnnotationService::new(
            sel.segments.clone(),
            ["ann1".to_string(), "ann2".to_string()],
            &dir.join("ratings.jsonl"),
            dir,
        )
        .unwrap(),
    );
    (router(svc.clone()), svc)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, bytes) = call(app, method, uri, body).await;
    (s, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

/// Walks a whole queue, rating everything except one flag-only submission.
async fn annotate_all(app: &Router, annotator: &str) -> (Vec<String>, String) {
    let (s, info) = call_json(app, "POST", "/sessions", Some(json!({"annotator_id": annotator}))).await;
    assert_eq!(s, StatusCode::CREATED);
    let sid = info["session_id"].as_str().unwrap().to_string();
    let mut seen = Vec::new();
    let mut flagged = String::new();
    loop {
        let (s, next) = call_json(app, "GET", &format!("/sessions/{sid}/next"), None).await;
        assert_eq!(s, StatusCode::OK);
        if next["complete"].as_bool().unwrap() {
            assert!(next["segment_id"].is_null());
            break;
        }
        let seg = next["segment_id"].as_str().unwrap().to_string();
        let body = if seen.is_empty() {
            flagged = seg.clone();
            json!({"session_id": sid, "segment_id": seg, "flags": ["noise_dominant"]})
        } else {
            json!({"session_id": sid, "segment_id": seg, "activation": 7, "valence": 3})
        };
        let (s, _) = call_json(app, "POST", "/ratings", Some(body)).await;
        assert_eq!(s, StatusCode::OK);
        seen.push(seg);
    }
    (seen, flagged)
}

#[tokio::test]
async fn queue_covers_selection_once_grouped_by_subject() {
    let dir = tempfile::tempdir().unwrap();
    let sel = small_selection(dir.path());
    let (app, svc) = app(dir.path(), &sel);
    let (seen, _) = annotate_all(&app, "ann1").await;

    let expected: BTreeSet<&str> = sel.segments.iter().map(|s| s.segment_id.as_str()).collect();
    let got: BTreeSet<&str> = seen.iter().map(String::as_str).collect();
    assert_eq!(seen.len(), sel.segments.len());
    assert_eq!(got, expected);

    // subjects appear as contiguous blocks
    let subject_of = |id: &str| sel.segments.iter().find(|s| s.segment_id == id).unwrap().subject_id.clone();
    let mut order: Vec<String> = seen.iter().map(|id| subject_of(id)).collect();
    order.dedup();
    let distinct: BTreeSet<&String> = order.iter().collect();
    assert_eq!(order.len(), distinct.len());

    assert_eq!(svc.records().unwrap().len(), sel.segments.len());
}

#[tokio::test]
async fn log_and_aggregation_reflect_every_submission() {
    let dir = tempfile::tempdir().unwrap();
    let sel = small_selection(dir.path());
    let (app, _) = app(dir.path(), &sel);
    let (_, flagged1) = annotate_all(&app, "ann1").await;
    let (_, flagged2) = annotate_all(&app, "ann2").await;

    let records = RatingLog::read(&dir.path().join("ratings.jsonl")).unwrap();
    assert_eq!(records.len(), 2 * sel.segments.len());
    assert_eq!(records.iter().filter(|r| !r.has_ratings()).count(), 2);

    let labels = aggregate_all(&records);
    assert_eq!(labels.len(), sel.segments.len());
    for l in &labels {
        let flagged = l.segment_id == flagged1 || l.segment_id == flagged2;
        assert_eq!(l.excluded, flagged, "{}", l.segment_id);
        if !flagged {
            assert_eq!(l.activation, Some(0.5));
            assert_eq!(l.valence, Some(-0.5));
        }
    }
    let training = label_records(&labels, &sel.segments).unwrap();
    let n_flagged = if flagged1 == flagged2 { 1 } else { 2 };
    assert_eq!(training.len(), sel.segments.len() - n_flagged);

    let (s, stats) = call_json(&app, "GET", "/stats", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(stats["n_records"], json!(2 * sel.segments.len()));
}

#[tokio::test]
async fn session_resumes_from_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let sel = small_selection(dir.path());
    let sid = {
        let (app, _) = app(dir.path(), &sel);
        let (_, info) = call_json(&app, "POST", "/sessions", Some(json!({"annotator_id": "ann1"}))).await;
        let sid = info["session_id"].as_str().unwrap().to_string();
        let (_, next) = call_json(&app, "GET", &format!("/sessions/{sid}/next"), None).await;
        let body = json!({"session_id": sid, "segment_id": next["segment_id"], "activation": 5, "valence": 5});
        assert_eq!(call(&app, "POST", "/ratings", Some(body)).await.0, StatusCode::OK);
        sid
    };
    let (app, _) = app(dir.path(), &sel);
    let (_, info) = call_json(&app, "POST", "/sessions", Some(json!({"annotator_id": "ann1"}))).await;
    assert_eq!(info["session_id"].as_str().unwrap(), sid);
    assert_eq!(info["progress"]["done"], json!(1));
    assert_eq!(info["progress"]["total"], json!(sel.segments.len()));
}

#[tokio::test]
async fn audio_endpoint_serves_the_segment_span() {
    let dir = tempfile::tempdir().unwrap();
    let sel = small_selection(dir.path());
    let (app, _) = app(dir.path(), &sel);
    let seg = &sel.segments[0];
    let (s, bytes) = call(&app, "GET", &format!("/segments/{}/audio", seg.segment_id), None).await;
    assert_eq!(s, StatusCode::OK);
    let audio = decode_wav_bytes(&bytes).unwrap();
    assert!((audio.duration_s() - (seg.end_s - seg.start_s)).abs() < 0.01);
    assert_eq!(call(&app, "GET", "/segments/nope/audio", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn bad_requests_map_to_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let sel = small_selection(dir.path());
    let (app, svc) = app(dir.path(), &sel);

    let (s, err) = call_json(&app, "POST", "/sessions", Some(json!({"annotator_id": "mallory"}))).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    assert_eq!(err["error"], json!("auth"));
    assert_eq!(call(&app, "GET", "/sessions/none/next", None).await.0, StatusCode::NOT_FOUND);

    let (_, info) = call_json(&app, "POST", "/sessions", Some(json!({"annotator_id": "ann1"}))).await;
    let sid = info["session_id"].as_str().unwrap();
    let seg = &sel.segments[0].segment_id;
    let cases = [
        (json!({"session_id": sid, "segment_id": seg, "activation": 10, "valence": 5}), StatusCode::BAD_REQUEST),
        (json!({"session_id": sid, "segment_id": seg, "activation": 0, "valence": 5}), StatusCode::BAD_REQUEST),
        (json!({"session_id": sid, "segment_id": seg, "activation": 3}), StatusCode::BAD_REQUEST),
        (json!({"session_id": sid, "segment_id": seg}), StatusCode::BAD_REQUEST),
        (json!({"session_id": sid, "segment_id": seg, "flags": ["bogus"]}), StatusCode::BAD_REQUEST),
        (json!({"session_id": sid, "segment_id": seg, "activation": 5, "valence": 5, "extra": 1}), StatusCode::BAD_REQUEST),
        (json!({"session_id": sid, "segment_id": "nope", "activation": 5, "valence": 5}), StatusCode::NOT_FOUND),
        (json!({"session_id": "other", "segment_id": seg, "activation": 5, "valence": 5}), StatusCode::NOT_FOUND),
        (
            json!({"session_id": sid, "annotator_id": "ann2", "segment_id": seg, "activation": 5, "valence": 5}),
            StatusCode::UNAUTHORIZED,
        ),
    ];
    for (body, want) in cases {
        let (s, _) = call_json(&app, "POST", "/ratings", Some(body.clone())).await;
        assert_eq!(s, want, "{body}");
    }
    let (s, _) = call(&app, "POST", "/ratings", None).await;
    assert!(s.is_client_error());
    assert!(svc.records().unwrap().is_empty(), "rejected submissions must not reach the log");
}
