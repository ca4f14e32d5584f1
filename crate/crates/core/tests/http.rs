//! HTTP backend against a throwaway local server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use causal_simt_core::backends::{HttpBackend, HttpBackendConfig};
use causal_simt_core::engine::{BackendError, TranslatorBackend, Unit, UnitRequest};

#[derive(Clone)]
enum Reply {
    Json(u16, String),
    Stall(Duration),
}

fn completion(text: &str, finish: &str) -> Reply {
    let body = serde_json::json!({"choices": [{"text": text, "finish_reason": finish}]});
    Reply::Json(200, body.to_string())
}

struct Captured {
    headers: String,
    body: serde_json::Value,
}

fn read_request(stream: &mut TcpStream) -> Option<Captured> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut headers = String::new();
    let mut len = 0;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).ok()? == 0 {
            return None;
        }
        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            len = v.trim().parse().ok()?;
        }
        if line == "\r\n" {
            break;
        }
        headers.push_str(&line);
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).ok()?;
    Some(Captured {
        headers,
        body: serde_json::from_slice(&body).ok()?,
    })
}

/// Serves `replies` in order, one per connection, and records requests.
fn serve(replies: Vec<Reply>) -> (String, Arc<Mutex<Vec<Captured>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for reply in replies {
            let Ok((mut stream, _)) = listener.accept() else {
                return;
            };
            let Some(req) = read_request(&mut stream) else {
                continue;
            };
            log.lock().unwrap().push(req);
            match reply {
                Reply::Json(status, body) => {
                    let _ = write!(
                        stream,
                        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                        body.len()
                    );
                }
                Reply::Stall(d) => thread::sleep(d),
            }
        }
    });
    (url, seen)
}

fn backend(url: &str, retries: u32) -> HttpBackend {
    HttpBackend::new(HttpBackendConfig {
        endpoint_url: url.into(),
        retries,
        timeout_ms: 500,
        ..Default::default()
    })
    .unwrap()
}

fn ask(b: &mut HttpBackend, target: &[String]) -> Result<Unit, BackendError> {
    b.next_unit(&UnitRequest {
        prompt: "<s>[INST]\nTranslate this text: I [/INST]",
        partial_source: &["I".to_string()],
        partial_target: target,
        source_complete: false,
        suppress_wait: false,
    })
}

#[test]
fn parses_units_and_sends_greedy_request() {
    let (url, seen) = serve(vec![
        completion("Ich habe", "length"),
        completion("<WAIT>", "stop"),
        completion("", "stop"),
    ]);
    let mut b = backend(&url, 0);
    assert_eq!(ask(&mut b, &[]), Ok(Unit::Word("Ich".into())));
    assert_eq!(ask(&mut b, &["Ich".into()]), Ok(Unit::Wait));
    assert_eq!(ask(&mut b, &["Ich".into()]), Ok(Unit::Eos));

    let seen = seen.lock().unwrap();
    let body = &seen[0].body;
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["top_p"], 0.7);
    assert_eq!(body["max_tokens"], 12);
    assert_eq!(body["stop"], serde_json::json!([" ", "<WAIT>", "</s>"]));
    assert!(body["prompt"].as_str().unwrap().ends_with("[/INST]"));
    assert!(seen[1].body["prompt"]
        .as_str()
        .unwrap()
        .ends_with("[/INST] "));
}

#[test]
fn bearer_token_from_environment() {
    std::env::set_var("SIMT_TEST_TOKEN_HTTP", "sekrit");
    let (url, seen) = serve(vec![completion("Hallo", "stop")]);
    let mut b = HttpBackend::new(HttpBackendConfig {
        endpoint_url: url,
        api_key_env: Some("SIMT_TEST_TOKEN_HTTP".into()),
        ..Default::default()
    })
    .unwrap();
    ask(&mut b, &[]).unwrap();
    let headers = seen.lock().unwrap()[0].headers.to_ascii_lowercase();
    assert!(
        headers.contains("authorization: bearer sekrit"),
        "{headers}"
    );
}

#[test]
fn retries_then_succeeds() {
    let err = Reply::Json(500, "{}".into());
    let (url, seen) = serve(vec![err.clone(), err, completion("Ja", "stop")]);
    assert_eq!(ask(&mut backend(&url, 2), &[]), Ok(Unit::Word("Ja".into())));
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn exactly_retries_reattempts() {
    let err = Reply::Json(503, "{}".into());
    let (url, seen) = serve(vec![err.clone(), err.clone(), err.clone(), err]);
    match ask(&mut backend(&url, 1), &[]) {
        Err(BackendError::BackendUnavailable { attempts: 2, .. }) => {}
        other => panic!("unexpected {other:?}"),
    }
    thread::sleep(Duration::from_millis(50));
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn timeout_is_unavailable() {
    let (url, _) = serve(vec![Reply::Stall(Duration::from_secs(2))]);
    assert!(matches!(
        ask(&mut backend(&url, 0), &[]),
        Err(BackendError::BackendUnavailable { attempts: 1, .. })
    ));
}

#[test]
fn unreachable_is_unavailable() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let url = format!("http://127.0.0.1:{port}/v1/completions");
    assert!(matches!(
        ask(&mut backend(&url, 1), &[]),
        Err(BackendError::BackendUnavailable { attempts: 2, .. })
    ));
}

#[test]
fn whitespace_and_garbage_are_malformed() {
    let (url, _) = serve(vec![
        completion("  \n", "stop"),
        Reply::Json(200, "not json".into()),
    ]);
    let mut b = backend(&url, 0);
    assert!(matches!(
        ask(&mut b, &[]),
        Err(BackendError::MalformedResponse { .. })
    ));
    assert!(matches!(
        ask(&mut b, &[]),
        Err(BackendError::MalformedResponse { .. })
    ));
}
