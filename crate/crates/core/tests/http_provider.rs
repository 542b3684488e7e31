use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::Value;
use vqaug::augment::{augment_dataset, AugmentOptions, ProviderConfig, ProviderError, RetryPolicy};
use vqaug::{Dataset, QAItem};

struct Seen {
    authorization: Option<String>,
    body: Value,
}

/// Serve one canned `(status, body)` per connection, recording requests.
fn serve(script: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/generate", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in script {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let (mut length, mut auth) = (0, None);
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    match k.to_ascii_lowercase().as_str() {
                        "content-length" => length = v.trim().parse().unwrap(),
                        "authorization" => auth = Some(v.trim().to_string()),
                        _ => {}
                    }
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Seen { authorization: auth, body: serde_json::from_slice(&buf).unwrap() });
            let mut stream = stream;
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

fn config(endpoint: String, max_attempts: u32) -> ProviderConfig {
    ProviderConfig {
        provider_id: "local".into(),
        model: "tiny".into(),
        endpoint,
        auth_env_var: "LOCAL_TOKEN".into(),
        request_timeout: 5.0,
        max_parallel: 1,
        retry: RetryPolicy { max_attempts, base_backoff: 0.01, backoff_multiplier: 2.0 },
        temperature: Some(0.2),
    }
}

fn env() -> HashMap<String, String> {
    HashMap::from([("LOCAL_TOKEN".to_string(), "s3cret".to_string())])
}

#[test]
fn retries_transient_statuses_then_succeeds() {
    let ok = r#"{"text": "Which organ is visible?; What organ does the scan show?"}"#.to_string();
    let (url, seen) = serve(vec![(503, "busy".into()), (429, "slow down".into()), (200, ok)]);
    let provider = config(url, 3).connect(&env(), 0).unwrap();
    let out = provider.generate("prompt text").unwrap();
    assert_eq!(out, "Which organ is visible?; What organ does the scan show?");
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    assert!(seen.iter().all(|s| s.authorization.as_deref() == Some("Bearer s3cret")));
    assert_eq!(seen[0].body["model"], "tiny");
    assert_eq!(seen[0].body["prompt"], "prompt text");
    assert_eq!(seen[0].body["temperature"], 0.2);
}

#[test]
fn gives_up_after_max_attempts() {
    let (url, seen) = serve(vec![(500, "a".into()), (502, "b".into())]);
    let provider = config(url, 2).connect(&env(), 0).unwrap();
    match provider.generate("p") {
        Err(ProviderError::Exhausted { attempts: 2, last }) => {
            assert_eq!(*last, ProviderError::Status { status: 502, body: "b".into() })
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen) = serve(vec![(400, "bad".into()), (200, r#"{"text": "x?"}"#.into())]);
    let provider = config(url, 3).connect(&env(), 0).unwrap();
    assert_eq!(provider.generate("p"), Err(ProviderError::Status { status: 400, body: "bad".into() }));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn malformed_success_body_is_a_bad_response() {
    let (url, _) = serve(vec![(200, r#"{"choices": []}"#.into())]);
    let provider = config(url, 3).connect(&env(), 0).unwrap();
    assert!(matches!(provider.generate("p"), Err(ProviderError::BadResponse(_))));
}

#[test]
fn missing_credential_is_reported_by_name() {
    let err = config("http://127.0.0.1:9".into(), 1).connect(&HashMap::new(), 0).err().unwrap();
    assert_eq!(err, ProviderError::MissingCredential("LOCAL_TOKEN".into()));
}

#[test]
fn failed_anchor_is_skipped_and_the_run_continues() {
    let ok = r#"{"text": "Which organ is visible?; What organ does the scan show?"}"#.to_string();
    let (url, _) = serve(vec![(400, "refused".into()), (200, ok)]);
    let provider = config(url, 1).connect(&env(), 0).unwrap();
    let ds = Dataset::new(
        "d",
        vec![
            QAItem::original("1", "img1", "What organ is this?", "Liver"),
            QAItem::original("2", "img2", "Which organ is shown?", "Liver"),
        ],
    )
    .unwrap();
    let out = augment_dataset(&ds, provider.as_ref(), AugmentOptions { n: 2, max_parallel: 1 }, None).unwrap();
    assert_eq!(out.failed_anchors(), ["1"]);
    assert_eq!(out.dataset.len(), 4);
    assert!(out.dataset.get("2-v1").is_some() && out.dataset.get("1-v1").is_none());
}
