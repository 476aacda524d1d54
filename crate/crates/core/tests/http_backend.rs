use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use inot_core::backend::{Backend, BackendError, ChatMessage, CompletionRequest, HttpBackend, HttpConfig, TokenSource};
use serde_json::Value;

/// Serves canned (status, body) responses in order, one per connection,
/// and records each request's headers and JSON body.
struct MockServer {
    base_url: String,
    requests: Arc<Mutex<Vec<(String, Value)>>>,
}

fn serve(responses: Vec<(u16, String)>) -> MockServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base_url = format!("http://{}/v1", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&requests);
    std::thread::spawn(move || {
        for (status, body) in responses {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream);
            let mut headers = String::new();
            let mut length = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                headers.push_str(&line);
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push((headers, serde_json::from_slice(&buf).unwrap_or(Value::Null)));
            let mut stream = reader.into_inner();
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    MockServer { base_url, requests }
}

fn backend(server: &MockServer) -> HttpBackend {
    let mut config = HttpConfig::new(server.base_url.clone());
    config.base_backoff = Duration::from_millis(5);
    config.timeout = Duration::from_secs(5);
    config.api_key = Some("test-key".into());
    HttpBackend::new(config).unwrap()
}

fn request() -> CompletionRequest {
    CompletionRequest::new("gpt-4o", vec![ChatMessage::system("be brief"), ChatMessage::user("2+2?")], 0.0)
}

const OK: &str = r#"{"choices":[{"message":{"role":"assistant","content":"Answer: 4"}}],"usage":{"prompt_tokens":12,"completion_tokens":3}}"#;

#[test]
fn success_uses_provider_usage_and_wire_format() {
    let server = serve(vec![(200, OK.into())]);
    let c = backend(&server).complete(&request()).unwrap();
    assert_eq!(c.text, "Answer: 4");
    assert_eq!((c.prompt_tokens, c.completion_tokens), (12, 3));
    assert_eq!(c.token_source, TokenSource::Provider);
    let reqs = server.requests.lock().unwrap();
    let (headers, body) = &reqs[0];
    assert!(headers.starts_with("POST /v1/chat/completions"));
    assert!(headers.to_ascii_lowercase().contains("authorization: bearer test-key"));
    assert_eq!(body["model"], "gpt-4o");
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][1]["content"], "2+2?");
}

#[test]
fn retries_transient_errors() {
    let server = serve(vec![(503, "{}".into()), (429, "{}".into()), (200, OK.into())]);
    let c = backend(&server).complete(&request()).unwrap();
    assert_eq!(c.text, "Answer: 4");
    assert_eq!(server.requests.lock().unwrap().len(), 3);
}

#[test]
fn gives_up_after_three_attempts() {
    let server = serve(vec![(500, "{}".into()); 3]);
    match backend(&server).complete(&request()) {
        Err(BackendError::Unavailable { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("expected Unavailable, got {other:?}"),
    }
}

#[test]
fn client_errors_are_not_retried() {
    let server = serve(vec![(400, r#"{"error":"bad"}"#.into()), (200, OK.into())]);
    assert!(matches!(
        backend(&server).complete(&request()),
        Err(BackendError::Provider { status: 400, .. })
    ));
    assert_eq!(server.requests.lock().unwrap().len(), 1);
}

#[test]
fn missing_usage_falls_back_to_approximation() {
    let body = r#"{"choices":[{"message":{"content":"Answer: 4"}}]}"#;
    let server = serve(vec![(200, body.into())]);
    let c = backend(&server).complete(&request()).unwrap();
    assert_eq!(c.token_source, TokenSource::Approx);
    assert_eq!(c.completion_tokens, 3);
}

#[test]
fn malformed_bodies() {
    for body in ["not json", r#"{"choices":[{"message":{"content":""}}]}"#, r#"{"choices":[]}"#] {
        let server = serve(vec![(200, body.into())]);
        assert!(matches!(
            backend(&server).complete(&request()),
            Err(BackendError::MalformedResponse(_))
        ));
    }
}

#[test]
fn unreachable_host_is_unavailable() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut config = HttpConfig::new(format!("http://127.0.0.1:{port}/v1"));
    config.base_backoff = Duration::from_millis(1);
    config.max_attempts = 2;
    let err = HttpBackend::new(config).unwrap().complete(&request()).unwrap_err();
    assert!(matches!(err, BackendError::Unavailable { attempts: 2, .. }), "{err:?}");
}
