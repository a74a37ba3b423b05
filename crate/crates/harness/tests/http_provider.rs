//! HTTP provider against a throwaway local server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use base64::Engine as _;
use ifsbench::corpus::CorpusItem;
use ifsbench::provider::{
    Candidate, CandidateProvider, HttpProvider, ProviderError, Request, RESPONSE_FILE,
};
use ifsbench_core::catalog::FractalKind;
use ifsbench_core::raster::LineColor;
use tempfile::TempDir;

#[derive(Debug, Clone)]
struct Seen {
    authorization: Option<String>,
    body: serde_json::Value,
}

/// Serves `replies` (status, body) in order, one per connection, and
/// records what each request carried.
fn serve(replies: Vec<(u16, &'static str)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/generate", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut len = 0;
            let mut auth = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    match k.to_ascii_lowercase().as_str() {
                        "content-length" => len = v.trim().parse().unwrap(),
                        "authorization" => auth = Some(v.trim().to_string()),
                        _ => {}
                    }
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Seen {
                authorization: auth,
                body: serde_json::from_slice(&buf).unwrap(),
            });
            let mut stream = reader.into_inner();
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn provider(endpoint: String) -> HttpProvider {
    HttpProvider {
        endpoint,
        api_key: Some("secret".into()),
        attempts: 3,
        backoff: Duration::from_millis(10),
        request_timeout: Duration::from_secs(10),
    }
}

struct Fixture {
    dir: TempDir,
    item: CorpusItem,
}

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        std::fs::write(dir.path().join("image.png"), b"\x89PNG fake").unwrap();
        Self {
            dir,
            item: CorpusItem::new(FractalKind::KochCurve, 2, LineColor::Green),
        }
    }

    fn fetch(&self, p: &HttpProvider) -> Result<Candidate, ProviderError> {
        p.fetch(&Request {
            item: &self.item,
            image_path: &self.dir.path().join("image.png"),
            prompt: "draw it",
            audit_dir: self.dir.path(),
        })
    }

    fn audit(&self) -> String {
        std::fs::read_to_string(self.dir.path().join(RESPONSE_FILE)).unwrap()
    }
}

#[test]
fn successful_reply_yields_source_and_audit_file() {
    let (url, seen) = serve(vec![(200, r#"{"code": "MOVE 10\n"}"#)]);
    let fx = Fixture::new();
    let got = fx.fetch(&provider(url)).unwrap();
    assert_eq!(got, Candidate::Source("MOVE 10\n".into()));
    assert_eq!(fx.audit(), r#"{"code": "MOVE 10\n"}"#);

    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 1);
    assert_eq!(seen[0].authorization.as_deref(), Some("Bearer secret"));
    assert_eq!(seen[0].body["prompt"], "draw it");
    assert_eq!(seen[0].body["id"], fx.item.id);
    let png = base64::engine::general_purpose::STANDARD
        .decode(seen[0].body["image"].as_str().unwrap())
        .unwrap();
    assert_eq!(png, b"\x89PNG fake");
}

#[test]
fn server_errors_are_retried() {
    let (url, seen) = serve(vec![
        (503, "{}"),
        (500, "{}"),
        (200, r#"{"refusal": "no"}"#),
    ]);
    let fx = Fixture::new();
    let got = fx.fetch(&provider(url)).unwrap();
    assert_eq!(got, Candidate::Refusal("no".into()));
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn exhausted_retries_are_a_transport_failure() {
    let (url, seen) = serve(vec![(500, "{}"), (500, "{}"), (500, "{}")]);
    let fx = Fixture::new();
    let err = fx.fetch(&provider(url)).unwrap_err();
    assert!(matches!(err, ProviderError::Transport(_)), "{err}");
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen) = serve(vec![(401, r#"{"error": "bad key"}"#)]);
    let fx = Fixture::new();
    let err = fx.fetch(&provider(url)).unwrap_err();
    assert!(
        matches!(err, ProviderError::Transport(ref m) if m.contains("401")),
        "{err}"
    );
    assert_eq!(seen.lock().unwrap().len(), 1);
    assert!(fx.audit().contains("bad key"));
}

#[test]
fn malformed_reply_is_a_schema_failure() {
    let (url, _) = serve(vec![(200, r#"{"text": "hello"}"#)]);
    let fx = Fixture::new();
    let err = fx.fetch(&provider(url)).unwrap_err();
    assert!(matches!(err, ProviderError::Schema(_)), "{err}");
}

#[test]
fn unreachable_endpoint_is_a_transport_failure() {
    // Bind then drop to get a port nobody listens on.
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let fx = Fixture::new();
    let mut p = provider(format!("http://127.0.0.1:{port}/x"));
    p.attempts = 2;
    let err = fx.fetch(&p).unwrap_err();
    assert!(
        matches!(err, ProviderError::Transport(ref m) if m.contains("2 attempts")),
        "{err}"
    );
}
