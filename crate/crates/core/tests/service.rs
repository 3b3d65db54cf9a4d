use serde_json::{json, Value};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;
use zoneseg::email::Email;
use zoneseg::encoder::{EncoderBackend, EncoderError, EncoderSpec, ServiceClient, ServiceConfig};

/// Minimal embedding service: each line maps to `[len, 0.5, 0.5, ...]` of
/// width `reported` (what the body's `dim` says) and `actual` entries.
struct Mock {
    url: String,
    requests: Arc<AtomicUsize>,
}

fn spawn_mock(reported: usize, actual: usize, delay: Duration) -> Mock {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}", server.server_addr().to_ip().unwrap());
    let requests = Arc::new(AtomicUsize::new(0));
    let counter = requests.clone();
    thread::spawn(move || {
        for mut req in server.incoming_requests() {
            counter.fetch_add(1, Ordering::SeqCst);
            let body = match req.url() {
                "/v1/health" => json!({"status": "ok", "model": "mock", "dim": reported}),
                "/v1/embed" => {
                    let mut text = String::new();
                    req.as_reader().read_to_string(&mut text).unwrap();
                    let v: Value = serde_json::from_str(&text).unwrap();
                    let rows: Vec<Vec<f64>> = v["lines"]
                        .as_array()
                        .unwrap()
                        .iter()
                        .map(|l| {
                            let mut r = vec![0.5; actual];
                            r[0] = l.as_str().unwrap().chars().count() as f64;
                            r
                        })
                        .collect();
                    thread::sleep(delay);
                    json!({"dim": reported, "embeddings": rows})
                }
                _ => {
                    let _ = req.respond(tiny_http::Response::from_string("nope").with_status_code(404));
                    continue;
                }
            };
            let _ = req.respond(tiny_http::Response::from_string(body.to_string()));
        }
    });
    Mock { url, requests }
}

fn lines(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn two_lines_two_vectors() {
    let mock = spawn_mock(8, 8, Duration::ZERO);
    let client = ServiceClient::connect(ServiceConfig::new(&mock.url)).unwrap();
    assert_eq!(client.dim(), 8);
    let out = client.embed(&lines(&["hello", "wörld!"])).unwrap();
    assert_eq!(out.len(), 2);
    assert!(out.iter().all(|e| e.dim() == 8));
    assert_eq!(out[1].values()[0], 6.0);
}

#[test]
fn empty_request_is_rejected_locally() {
    let mock = spawn_mock(8, 8, Duration::ZERO);
    let mut cfg = ServiceConfig::new(&mock.url);
    cfg.dim = Some(8);
    let client = ServiceClient::connect(cfg).unwrap();
    assert!(matches!(client.embed(&[]), Err(EncoderError::EmptyRequest)));
    assert_eq!(mock.requests.load(Ordering::SeqCst), 0);
}

#[test]
fn wider_service_than_configured() {
    let mock = spawn_mock(4096, 4096, Duration::ZERO);
    let mut cfg = ServiceConfig::new(&mock.url);
    cfg.dim = Some(3072);
    let client = ServiceClient::connect(cfg).unwrap();
    assert!(matches!(
        client.embed(&lines(&["x"])),
        Err(EncoderError::DimMismatch { expected: 3072, found: 4096 })
    ));
}

#[test]
fn rows_disagreeing_with_reported_dim() {
    let mock = spawn_mock(4, 3, Duration::ZERO);
    let client = ServiceClient::connect(ServiceConfig::new(&mock.url)).unwrap();
    assert!(matches!(
        client.embed(&lines(&["x"])),
        Err(EncoderError::DimMismatch { expected: 4, found: 3 })
    ));
}

#[test]
fn timeout_is_reported() {
    let mock = spawn_mock(4, 4, Duration::from_millis(800));
    let mut cfg = ServiceConfig::new(&mock.url);
    cfg.dim = Some(4);
    cfg.timeout = Duration::from_millis(100);
    let client = ServiceClient::connect(cfg).unwrap();
    assert!(matches!(client.embed(&lines(&["x"])), Err(EncoderError::Timeout(_))));
}

#[test]
fn unreachable_service_is_a_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    assert!(matches!(
        ServiceClient::connect(ServiceConfig::new(url)),
        Err(EncoderError::Transport(_))
    ));
}

#[test]
fn batches_keep_order_under_concurrency() {
    let mock = spawn_mock(4, 4, Duration::from_millis(5));
    let mut cfg = ServiceConfig::new(&mock.url);
    cfg.max_in_flight = 3;
    let client = ServiceClient::connect(cfg).unwrap();
    let batches: Vec<Vec<String>> = (1..=9).map(|n| vec!["x".repeat(n); n]).collect();
    let out = client.embed_batches(&batches).unwrap();
    for (n, b) in (1..=9).zip(&out) {
        assert_eq!(b.len(), n);
        assert!(b.iter().all(|e| e.values()[0] == n as f64));
    }
}

#[test]
fn service_backend_encodes_emails() {
    let mock = spawn_mock(4, 4, Duration::ZERO);
    let spec: EncoderSpec = format!("service:{}", mock.url).parse().unwrap();
    let backend = spec.open().unwrap();
    assert!(matches!(backend, EncoderBackend::Service(_)));
    assert_eq!(backend.dim(), 4);
    let email = Email::new("e", "en", lines(&["ab", "", "abcd"])).unwrap();
    let out = backend.encode_email(&email).unwrap();
    assert_eq!(out.iter().map(|e| e.values()[0]).collect::<Vec<_>>(), [2.0, 0.0, 4.0]);
}
