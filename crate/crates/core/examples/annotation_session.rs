//! A scripted annotator working through the HTTP API in-process, followed by
//! aggregation of the resulting log into training labels.

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use moodcall::annotation::{aggregate_all, label_records, router, AnnotationService, RatingLog};
use moodcall::sampling::{select_segments, SamplingPlan};
use moodcall::synth::{generate_corpus, SynthConfig};

async fn request(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> Value {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(|b| Body::from(b.to_string())).unwrap_or_default())
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap()
}

#[tokio::main]
async fn main() -> moodcall::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| moodcall::Error::Config(e.to_string()))?;
    let (corpus, _) = generate_corpus(
        &SynthConfig {
            n_subjects: 2,
            segments_per_call: 2,
            seed: 1,
            ..SynthConfig::default()
        },
        dir.path(),
    )?;
    let plan = SamplingPlan {
        assessment_cap: 1,
        personal_count: 4,
        ..SamplingPlan::new(2)
    };
    let sel = select_segments(&corpus.manifest, &corpus.manifest.segments, &plan)?;
    let log = dir.path().join("ratings.jsonl");
    let annotators = ["alice".to_string(), "bob".to_string()];
    let svc = AnnotationService::new(sel.segments.clone(), annotators.clone(), &log, dir.path())?;
    let app = router(Arc::new(svc));

    for (k, who) in annotators.iter().enumerate() {
        let info = request(&app, "POST", "/sessions", Some(json!({ "annotator_id": who }))).await;
        let sid = info["session_id"].as_str().unwrap().to_string();
        let mut i = 0;
        loop {
            let next = request(&app, "GET", &format!("/sessions/{sid}/next"), None).await;
            if next["complete"] == json!(true) {
                break;
            }
            let rating = json!({
                "session_id": sid,
                "segment_id": next["segment_id"],
                "activation": 3 + (i + k) % 5,
                "valence": 4 + i % 3,
            });
            request(&app, "POST", "/ratings", Some(rating)).await;
            i += 1;
        }
        println!("{who}: rated {i} segments in session {sid}");
    }

    let labels = aggregate_all(&RatingLog::read(&log)?);
    for l in label_records(&labels, &sel.segments)? {
        println!("{:<18} activation {:+.3} valence {:+.3}", l.segment_id, l.activation, l.valence);
    }
    Ok(())
}
