//! The remote backend against a local HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;

use serde_json::Value;

use emomas::error::Error;
use emomas::llm::{BackendConfig, Caller, ChatBackend, ChatMessage, ChatRequest, RemoteBackend};

struct Seen {
    auth: Option<String>,
    body: Value,
}

/// Serves one canned response per entry in `replies`, in order.
fn serve(replies: Vec<(u16, String)>) -> (String, mpsc::Receiver<Seen>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            let mut auth = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = Some(line["authorization:".len()..].trim().to_string());
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            tx.send(Seen { auth, body: serde_json::from_slice(&buf).unwrap() }).unwrap();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, rx)
}

fn completion(text: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

fn backend(url: &str, key: Option<&str>, retries: u32) -> RemoteBackend {
    let cfg = BackendConfig {
        retries,
        backoff_ms: 1,
        timeout_secs: 5.0,
        ..BackendConfig::remote(url, "test-model")
    };
    RemoteBackend::with_transport(cfg, key.map(String::from), Box::new(emomas::llm::ReqwestTransport::default())).unwrap()
}

#[test]
fn sends_openai_request_and_reads_first_choice() {
    let (url, seen) = serve(vec![(200, completion("[EMO:joy] Hello"))]);
    let b = backend(&url, Some("sk-test"), 0);
    let msgs = [ChatMessage::system("be brief"), ChatMessage::user("hi")];
    let reply = b.chat(&ChatRequest::new(Caller::Negotiator, 1, &msgs, 0.3)).unwrap();
    assert_eq!(reply, "[EMO:joy] Hello");

    let s = seen.recv().unwrap();
    assert_eq!(s.auth.as_deref(), Some("Bearer sk-test"));
    assert_eq!(s.body["model"], "test-model");
    assert_eq!(s.body["temperature"], 0.3);
    assert_eq!(s.body["messages"][0]["role"], "system");
    assert_eq!(s.body["messages"][1], serde_json::json!({"role": "user", "content": "hi"}));
}

#[test]
fn retries_server_errors_then_succeeds() {
    let (url, seen) = serve(vec![(503, "{}".into()), (429, "{}".into()), (200, completion("ok"))]);
    let b = backend(&url, None, 2);
    let msgs = [ChatMessage::user("hi")];
    assert_eq!(b.chat(&ChatRequest::new(Caller::Opponent, 2, &msgs, 0.7)).unwrap(), "ok");
    assert_eq!(seen.iter().take(3).filter(|s| s.auth.is_none()).count(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, _seen) = serve(vec![(401, r#"{"error":"bad key"}"#.into())]);
    let b = backend(&url, Some("nope"), 3);
    let msgs = [ChatMessage::user("hi")];
    match b.chat(&ChatRequest::new(Caller::Judge, 1, &msgs, 0.0)) {
        Err(Error::BackendRejected { status, body }) => {
            assert_eq!(status, 401);
            assert!(body.contains("bad key"));
        }
        other => panic!("expected rejection, got {other:?}"),
    }
}

#[test]
fn malformed_bodies_exhaust_retries() {
    let (url, _seen) = serve(vec![(200, "not json".into()), (200, r#"{"choices":[]}"#.into())]);
    let b = backend(&url, None, 1);
    let msgs = [ChatMessage::user("hi")];
    match b.chat(&ChatRequest::new(Caller::Evaluator, 1, &msgs, 0.0)) {
        Err(Error::BackendUnavailable { attempts, reason }) => {
            assert_eq!(attempts, 2);
            assert!(reason.contains("choices"), "{reason}");
        }
        other => panic!("expected unavailable, got {other:?}"),
    }
}

#[test]
fn unreachable_endpoint_is_unavailable() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let b = backend(&format!("http://127.0.0.1:{port}/v1/chat/completions"), None, 0);
    let msgs = [ChatMessage::user("hi")];
    assert!(matches!(
        b.chat(&ChatRequest::new(Caller::Negotiator, 1, &msgs, 0.0)),
        Err(Error::BackendUnavailable { attempts: 1, .. })
    ));
}
