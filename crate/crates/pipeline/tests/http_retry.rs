use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use spacegen::client::{ClientError, CompletionClient, CompletionRequest, EndpointConfig, HttpClient, RetryPolicy};

struct Seen {
    authorization: Option<String>,
    body: serde_json::Value,
}

/// Serves one canned (status, body) per connection, recording each request.
fn serve(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    let handle = thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            let mut auth = None;
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            assert!(line.starts_with("POST /v1/chat/completions "), "{line}");
            loop {
                line.clear();
                reader.read_line(&mut line).unwrap();
                let l = line.trim_end();
                if l.is_empty() {
                    break;
                }
                let (k, v) = l.split_once(':').unwrap();
                match k.to_ascii_lowercase().as_str() {
                    "content-length" => len = v.trim().parse().unwrap(),
                    "authorization" => auth = Some(v.trim().to_string()),
                    _ => {}
                }
            }
            let mut buf = vec![0u8; len];
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
    (url, seen, handle)
}

fn completion(text: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

fn failure() -> (u16, String) {
    (500, r#"{"error": {"message": "overloaded"}}"#.to_string())
}

fn config(url: String, retries: u32, key_env: &str) -> EndpointConfig {
    EndpointConfig {
        base_url: url,
        model: "test-model".into(),
        api_key_env: key_env.into(),
        timeout_secs: 10,
        retry: RetryPolicy { retries, base_delay_ms: 5 },
    }
}

#[test]
fn retries_server_errors_then_succeeds() {
    let (url, seen, handle) = serve(vec![failure(), failure(), failure(), (200, completion("P1\n1.0 1.0 1.0"))]);
    std::env::set_var("SPACEGEN_TEST_KEY_A", "secret-token");
    let client = HttpClient::new(&config(url, 3, "SPACEGEN_TEST_KEY_A")).unwrap();
    let req = CompletionRequest { seed: Some(7), ..CompletionRequest::new("hello") };
    assert_eq!(client.complete(&req).unwrap(), "P1\n1.0 1.0 1.0");
    handle.join().unwrap();
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 4);
    for s in seen.iter() {
        assert_eq!(s.authorization.as_deref(), Some("Bearer secret-token"));
        assert_eq!(s.body["model"], "test-model");
        assert_eq!(s.body["messages"][0]["content"], "hello");
        assert_eq!(s.body["temperature"], 0.9);
        assert_eq!(s.body["top_p"], 0.9);
        assert_eq!(s.body["seed"], 7);
    }
}

#[test]
fn gives_up_after_retry_budget() {
    let (url, seen, handle) = serve(vec![failure(), failure(), failure()]);
    let client = HttpClient::new(&config(url, 2, "SPACEGEN_TEST_KEY_UNSET")).unwrap();
    match client.complete(&CompletionRequest::new("x")) {
        Err(ClientError::Endpoint { status: 500, message }) => assert_eq!(message, "overloaded"),
        other => panic!("unexpected {other:?}"),
    }
    handle.join().unwrap();
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    assert!(seen[0].authorization.is_none());
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen, handle) = serve(vec![(400, r#"{"error": {"message": "bad request"}}"#.into())]);
    let client = HttpClient::new(&config(url, 3, "SPACEGEN_TEST_KEY_UNSET")).unwrap();
    assert!(matches!(client.complete(&CompletionRequest::new("x")), Err(ClientError::Endpoint { status: 400, .. })));
    handle.join().unwrap();
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn malformed_body_is_a_response_error() {
    let (url, _, handle) = serve(vec![(200, r#"{"choices": []}"#.into())]);
    let client = HttpClient::new(&config(url, 0, "SPACEGEN_TEST_KEY_UNSET")).unwrap();
    assert!(matches!(client.complete(&CompletionRequest::new("x")), Err(ClientError::Response(_))));
    handle.join().unwrap();
}
