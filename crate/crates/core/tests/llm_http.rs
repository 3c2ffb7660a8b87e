//! The chat client and model-backed agents against a local fake endpoint.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use mindgames_core::agents::{LlmPersuader, PersuaderKind, DEFAULT_MESSAGE_CHARS};
use mindgames_core::classify::{classify_structured, Classifier, ClassifierKind, ClassifyError, StructuredClassifier};
use mindgames_core::forge::{generate, GenerateOptions};
use mindgames_core::llm::{build_classifier, ChatClient, HttpChatClient, LlmClassifier, LlmClientConfig, LlmError};
use mindgames_core::scenario;
use mindgames_core::session::{run_bot_game, Condition, SessionConfig};

struct Request {
    headers: String,
    body: serde_json::Value,
}

enum Reply {
    Ok(String),
    Status(u16, String),
    Stall(Duration),
}

/// Serves queued replies, one per connection, and records each request.
fn fake_endpoint(replies: Vec<Reply>) -> (String, Arc<Mutex<Vec<Request>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for reply in replies {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut headers = String::new();
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                headers.push_str(&line);
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            log.lock().unwrap().push(Request { headers, body: serde_json::from_slice(&body).unwrap() });
            let (status, text) = match reply {
                Reply::Ok(content) => (
                    200,
                    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string(),
                ),
                Reply::Status(s, body) => (s, body),
                Reply::Stall(d) => {
                    thread::sleep(d);
                    continue;
                }
            };
            let mut stream = stream;
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{text}",
                text.len()
            );
        }
    });
    (url, seen)
}

fn client(endpoint: String, key_env: &str, retries: u32) -> Arc<HttpChatClient> {
    Arc::new(
        HttpChatClient::new(LlmClientConfig {
            endpoint,
            model: "test-model".into(),
            credential_env: key_env.into(),
            timeout_secs: 1,
            max_retries: retries,
        })
        .unwrap(),
    )
}

const REPLY: &str = r#"{"disclosures":[{"proposal":"A","attribute":0,"effect":1}],"info_appeals":[null],"motivational_appeal":false}"#;

#[test]
fn classification_over_http_carries_key_and_model() {
    std::env::set_var("MG_TEST_KEY_A", "sk-test-123");
    let (url, seen) = fake_endpoint(vec![Reply::Ok(format!("```json\n{REPLY}\n```"))]);
    let c = LlmClassifier::new(client(url, "MG_TEST_KEY_A", 0));
    let got = c.classify("A raises costs. What do you know?", &scenario::by_id("llm").unwrap()).unwrap();
    assert_eq!(got, classify_structured("DISCLOSE A 0 +1\nASK-INFO").unwrap());
    let seen = seen.lock().unwrap();
    assert!(seen[0].headers.to_ascii_lowercase().contains("authorization: bearer sk-test-123"));
    assert_eq!(seen[0].body["model"], "test-model");
    assert_eq!(seen[0].body["messages"][0]["role"], "system");
}

#[test]
fn invalid_reply_is_retried() {
    let (url, seen) = fake_endpoint(vec![Reply::Ok("not json".into()), Reply::Ok(REPLY.into())]);
    let c = LlmClassifier::new(client(url, "MG_TEST_KEY_UNSET", 1));
    assert!(c.classify("hello", &scenario::by_id("moon").unwrap()).is_ok());
    assert_eq!(seen.lock().unwrap().len(), 2);

    let (url, _) = fake_endpoint(vec![Reply::Ok("{}".into()), Reply::Ok("[]".into())]);
    let c = LlmClassifier::new(client(url, "MG_TEST_KEY_UNSET", 1));
    assert!(matches!(
        c.classify("hello", &scenario::by_id("moon").unwrap()),
        Err(ClassifyError::InvalidReply { attempts: 2, .. })
    ));
}

#[test]
fn error_status_is_reported_with_key_redacted() {
    std::env::set_var("MG_TEST_KEY_B", "sk-leaky-456");
    let (url, _) = fake_endpoint(vec![Reply::Status(500, "bad key sk-leaky-456".into())]);
    let err = client(url, "MG_TEST_KEY_B", 0).complete(&[]).unwrap_err();
    match err {
        LlmError::Status { status, body } => {
            assert_eq!(status, 500);
            assert!(!body.contains("sk-leaky-456"));
            assert!(body.contains("[REDACTED]"));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn slow_endpoint_times_out() {
    let (url, _) = fake_endpoint(vec![Reply::Stall(Duration::from_secs(3))]);
    assert!(matches!(client(url, "MG_TEST_KEY_UNSET", 0).complete(&[]), Err(LlmError::Timeout)));
}

#[test]
fn llm_persuader_and_classifier_play_a_game() {
    let inst = generate(5, &scenario::by_id("ocean").unwrap(), 1, &GenerateOptions::default()).unwrap().remove(0);
    let witness: Vec<_> = inst.witness.cells().collect();
    let disclosures: Vec<_> = witness
        .iter()
        .map(|c| serde_json::json!({"proposal": c.proposal.label(), "attribute": c.attribute.index(), "effect": inst.matrix.effect(*c).value()}))
        .collect();
    let classified = serde_json::json!({"disclosures": disclosures, "info_appeals": [], "motivational_appeal": false}).to_string();

    let (purl, _) = fake_endpoint(vec![Reply::Ok("Let me tell you two things.".into())]);
    let (curl, cseen) = fake_endpoint(vec![Reply::Ok(classified)]);
    let mut cfg = SessionConfig::bot_game(inst.clone(), Condition::Revealed, PersuaderKind::Llm, ClassifierKind::Llm);
    cfg.max_persuader_turns = 1;
    let classifier = build_classifier(ClassifierKind::Llm, Some(client(curl, "MG_TEST_KEY_UNSET", 0))).unwrap();
    let mut persuader = LlmPersuader::new(client(purl, "MG_TEST_KEY_UNSET", 0), DEFAULT_MESSAGE_CHARS);
    let t = run_bot_game(cfg, classifier, &mut persuader).unwrap();
    assert!(t.success);
    assert!(t.incomplete.is_none());
    let prompt = cseen.lock().unwrap()[0].body["messages"].to_string();
    assert!(prompt.contains("Let me tell you two things."));
}

#[test]
fn endpoint_failure_marks_game_incomplete() {
    let inst = generate(5, &scenario::by_id("ocean").unwrap(), 1, &GenerateOptions::default()).unwrap().remove(0);
    let (url, _) = fake_endpoint(vec![Reply::Status(503, "overloaded".into())]);
    let cfg = SessionConfig::bot_game(inst.clone(), Condition::Hidden, PersuaderKind::Llm, ClassifierKind::Structured);
    let mut persuader = LlmPersuader::new(client(url, "MG_TEST_KEY_UNSET", 0), DEFAULT_MESSAGE_CHARS);
    let t = run_bot_game(cfg, Arc::new(StructuredClassifier), &mut persuader).unwrap();
    assert!(t.incomplete.as_deref().unwrap().contains("503"));
    assert_eq!(t.final_choice, inst.p_init);
}

#[test]
fn llm_kind_requires_a_client() {
    assert!(build_classifier(ClassifierKind::Llm, None).is_err());
    assert!(build_classifier(ClassifierKind::Rules, None).is_ok());
}
