use std::sync::Arc;

use sqac_cli::service::{
    router, AppState, ArtifactPaths, ErrorBody, HealthResponse, SeasonalityResponse, Snapshot,
    SuggestResponse,
};
use sqac_core::index::{save_index, CompletionIndex, IndexEntry};
use sqac_core::ranker::L2Config;
use sqac_core::seasonnet::{corpus_vocab, save_model, Embeddings, SeasonModel};
use sqac_core::Month;

fn entries() -> Vec<IndexEntry> {
    vec![
        IndexEntry::new("memory foam mattress", 900, 100.0),
        IndexEntry::new("memorial day flowers", 300, 75.0),
        IndexEntry::new("memory card", 650, 50.0),
        IndexEntry::new("garden hose", 100, 20.0),
    ]
}

fn model() -> SeasonModel {
    let vocab = corpus_vocab(
        entries()
            .iter()
            .map(|e| e.query.as_str())
            .collect::<Vec<_>>()
            .iter()
            .copied(),
        1,
    );
    SeasonModel::new(Embeddings::random_uniform(vocab, 8, 0.05, 3), &[8], 0.2, 3).unwrap()
}

async fn spawn(state: AppState) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, router(Arc::new(state)))
            .await
            .unwrap()
    });
    format!("http://{addr}")
}

async fn in_memory() -> String {
    let snap = Snapshot::new(CompletionIndex::build(entries()).unwrap(), model());
    spawn(AppState::in_memory(snap, L2Config::default())).await
}

#[tokio::test]
async fn complete_returns_the_documented_shape() {
    let base = in_memory().await;
    let resp = reqwest::get(format!("{base}/complete?prefix=Memo&month=5"))
        .await
        .unwrap();
    assert_eq!(resp.status(), 200);
    let json: serde_json::Value = resp.json().await.unwrap();
    let mut keys: Vec<&str> = json
        .as_object()
        .unwrap()
        .keys()
        .map(String::as_str)
        .collect();
    keys.sort();
    assert_eq!(keys, ["latency_micros", "month", "prefix", "suggestions"]);
    let mut item_keys: Vec<&str> = json["suggestions"][0]
        .as_object()
        .unwrap()
        .keys()
        .map(String::as_str)
        .collect();
    item_keys.sort();
    assert_eq!(
        item_keys,
        ["final_score", "l1_score", "query", "rank", "seasonality"]
    );

    let body: SuggestResponse = serde_json::from_value(json).unwrap();
    assert_eq!(body.prefix, "memo");
    assert_eq!(body.month, 5);
    assert_eq!(body.suggestions.len(), 3);
    assert!(body
        .suggestions
        .iter()
        .enumerate()
        .all(|(i, s)| s.rank == i + 1));
}

#[tokio::test]
async fn alpha_zero_follows_l1_and_k_truncates() {
    let base = in_memory().await;
    let body: SuggestResponse =
        reqwest::get(format!("{base}/complete?prefix=mem&month=5&alpha=0&k=2"))
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
    let names: Vec<&str> = body.suggestions.iter().map(|s| s.query.as_str()).collect();
    assert_eq!(names, ["memory foam mattress", "memorial day flowers"]);
}

#[tokio::test]
async fn month_defaults_to_the_current_month() {
    use chrono::Datelike;
    let base = in_memory().await;
    let body: SuggestResponse = reqwest::get(format!("{base}/complete?prefix=g"))
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(u32::from(body.month), chrono::Utc::now().month());
    assert_eq!(body.suggestions[0].query, "garden hose");
}

#[tokio::test]
async fn bad_requests_are_400_with_a_message() {
    let base = in_memory().await;
    for query in [
        "prefix=m&month=13",
        "prefix=m&month=0",
        "prefix=m&month=may",
        "prefix=m&alpha=1.5",
        "prefix=m&k=0",
    ] {
        let resp = reqwest::get(format!("{base}/complete?{query}"))
            .await
            .unwrap();
        assert_eq!(resp.status(), 400, "{query}");
        let err: ErrorBody = resp.json().await.unwrap();
        assert!(!err.error.is_empty());
    }
    for query in ["", "?q=", "?q=%20", "?q=hose&month=13"] {
        let resp = reqwest::get(format!("{base}/seasonality{query}"))
            .await
            .unwrap();
        assert_eq!(resp.status(), 400, "{query}");
    }
}

#[tokio::test]
async fn empty_prefix_completes_to_the_global_top_k() {
    let base = in_memory().await;
    for query in ["", "prefix=", "prefix=%20%20"] {
        let body: SuggestResponse =
            reqwest::get(format!("{base}/complete?{query}&month=3&alpha=0&k=3"))
                .await
                .unwrap()
                .json()
                .await
                .unwrap();
        let names: Vec<&str> = body.suggestions.iter().map(|s| s.query.as_str()).collect();
        assert_eq!(
            names,
            [
                "memory foam mattress",
                "memorial day flowers",
                "memory card"
            ],
            "{query}"
        );
    }
}

#[tokio::test]
async fn repeated_requests_give_identical_suggestions() {
    let base = in_memory().await;
    let url = format!("{base}/complete?prefix=me&month=5&alpha=0.3");
    let first: SuggestResponse = reqwest::get(&url).await.unwrap().json().await.unwrap();
    for _ in 0..5 {
        let again: SuggestResponse = reqwest::get(&url).await.unwrap().json().await.unwrap();
        assert_eq!(again.suggestions, first.suggestions);
        assert_eq!((again.prefix.as_str(), again.month), ("me", 5));
    }
}

#[tokio::test]
async fn zero_model_scores_every_month_zero() {
    let vocab = corpus_vocab(["garden hose"], 1);
    let zero =
        SeasonModel::zeros(Embeddings::random_uniform(vocab, 4, 0.05, 1), &[4], 0.2).unwrap();
    let snap = Snapshot::new(CompletionIndex::build(entries()).unwrap(), zero);
    let base = spawn(AppState::in_memory(snap, L2Config::default())).await;
    let body: SeasonalityResponse = reqwest::get(format!("{base}/seasonality?q=garden%20hose"))
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(body.profile, vec![0.0; 12]);
}

#[tokio::test]
async fn month_override_replaces_the_wall_clock() {
    let snap = Snapshot::new(CompletionIndex::build(entries()).unwrap(), model());
    let state =
        AppState::in_memory(snap, L2Config::default()).with_month(Some(Month::new(2).unwrap()));
    let base = spawn(state).await;
    let body: SuggestResponse = reqwest::get(format!("{base}/complete?prefix=g"))
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(body.month, 2);
    let body: SuggestResponse = reqwest::get(format!("{base}/complete?prefix=g&month=9"))
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(body.month, 9);
}

#[tokio::test]
async fn unloaded_service_is_503_until_reload() {
    let dir = tempfile::tempdir().unwrap();
    let paths = ArtifactPaths {
        model: dir.path().join("model.sqac"),
        index: dir.path().join("index.sqix"),
    };
    let base = spawn(AppState::unloaded(paths.clone(), L2Config::default()).unwrap()).await;
    for path in ["/complete?prefix=m", "/seasonality?q=hose", "/healthz"] {
        let resp = reqwest::get(format!("{base}{path}")).await.unwrap();
        assert_eq!(resp.status(), 503, "{path}");
    }
    save_model(&model(), &paths.model).unwrap();
    save_index(&CompletionIndex::build(entries()).unwrap(), &paths.index).unwrap();
    let client = reqwest::Client::new();
    let resp = client.post(format!("{base}/reload")).send().await.unwrap();
    assert_eq!(resp.status(), 200);
    let resp = reqwest::get(format!("{base}/complete?prefix=m"))
        .await
        .unwrap();
    assert_eq!(resp.status(), 200);
}

#[tokio::test]
async fn unknown_prefix_is_an_empty_list() {
    let base = in_memory().await;
    let body: SuggestResponse = reqwest::get(format!("{base}/complete?prefix=zzz&month=1"))
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert!(body.suggestions.is_empty());
}

#[tokio::test]
async fn seasonality_profile_matches_the_model() {
    let base = in_memory().await;
    let m = model();
    let body: SeasonalityResponse =
        reqwest::get(format!("{base}/seasonality?q=Garden%20Hose&month=7"))
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
    assert_eq!(body.query, "garden hose");
    assert_eq!(body.profile, m.predict_all("garden hose").to_vec());
    assert_eq!(body.seasonality, body.profile[6]);
}

#[tokio::test]
async fn cors_headers_are_sent() {
    let base = in_memory().await;
    let client = reqwest::Client::new();
    let resp = client
        .get(format!("{base}/complete?prefix=m&month=1"))
        .header("Origin", "http://localhost:5173")
        .send()
        .await
        .unwrap();
    assert_eq!(resp.headers()["access-control-allow-origin"], "*");
    let pre = client
        .request(reqwest::Method::OPTIONS, format!("{base}/complete"))
        .header("Origin", "http://localhost:5173")
        .header("Access-Control-Request-Method", "GET")
        .send()
        .await
        .unwrap();
    assert!(pre.status().is_success());
    assert!(pre.headers().contains_key("access-control-allow-methods"));
}

#[tokio::test]
async fn reload_swaps_artifacts_and_survives_failures() {
    let dir = tempfile::tempdir().unwrap();
    let paths = ArtifactPaths {
        model: dir.path().join("model.sqac"),
        index: dir.path().join("index.sqix"),
    };
    save_model(&model(), &paths.model).unwrap();
    save_index(&CompletionIndex::build(entries()).unwrap(), &paths.index).unwrap();
    let base = spawn(AppState::load(paths.clone(), L2Config::default()).unwrap()).await;
    let client = reqwest::Client::new();

    let health: HealthResponse = reqwest::get(format!("{base}/healthz"))
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!((health.status.as_str(), health.entries), ("ok", 4));
    assert_eq!(health.version, env!("CARGO_PKG_VERSION"));

    let mut more = entries();
    more.push(IndexEntry::new("gardening gloves", 10, 5.0));
    save_index(&CompletionIndex::build(more).unwrap(), &paths.index).unwrap();
    let resp = client.post(format!("{base}/reload")).send().await.unwrap();
    assert_eq!(resp.status(), 200);
    let health: HealthResponse = resp.json().await.unwrap();
    assert_eq!(health.entries, 5);

    std::fs::write(&paths.index, b"not an index").unwrap();
    let resp = client.post(format!("{base}/reload")).send().await.unwrap();
    assert_eq!(resp.status(), 503);
    let body: SuggestResponse = reqwest::get(format!("{base}/complete?prefix=gard&month=4"))
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(body.suggestions.len(), 2);
}

#[test]
fn missing_artifacts_fail_startup() {
    let dir = tempfile::tempdir().unwrap();
    let paths = ArtifactPaths {
        model: dir.path().join("nope.sqac"),
        index: dir.path().join("nope.sqix"),
    };
    assert!(AppState::load(paths, L2Config::default()).is_err());
}
