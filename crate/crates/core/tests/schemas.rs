//! The wire types serialize to documents accepted by the published schemas,
//! and documents the schemas reject do not deserialize.

use impscore::backend::{EmbedRequest, EmbedResponse, HealthResponse};
use jsonschema::Validator;
use serde_json::{json, Value};

fn validator(name: &str) -> Validator {
    let path = format!("{}/schemas/{name}.schema.json", env!("CARGO_MANIFEST_DIR"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn assert_valid(v: &Validator, doc: &Value) {
    let errors: Vec<String> = v.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{doc}: {errors:?}");
}

#[test]
fn request_round_trip() {
    let v = validator("embed_request");
    let req = EmbedRequest {
        texts: vec!["a".into(), "ünï".into(), String::new()],
    };
    let doc = serde_json::to_value(&req).unwrap();
    assert_valid(&v, &doc);
    assert_eq!(serde_json::from_value::<EmbedRequest>(doc).unwrap(), req);
    assert_valid(&v, &json!({"texts": []}));
    for bad in [json!({}), json!({"texts": "a"}), json!({"texts": [1]})] {
        assert!(!v.is_valid(&bad), "{bad}");
        assert!(serde_json::from_value::<EmbedRequest>(bad).is_err());
    }
}

#[test]
fn response_round_trip() {
    let v = validator("embed_response");
    let resp = EmbedResponse {
        embeddings: vec![vec![0.5, -1.0], vec![1e-300, 3.0]],
        dim: 2,
    };
    let doc = serde_json::to_value(&resp).unwrap();
    assert_valid(&v, &doc);
    assert_eq!(serde_json::from_value::<EmbedResponse>(doc).unwrap(), resp);
    for bad in [
        json!({"embeddings": [[1.0]]}),
        json!({"embeddings": [["x"]], "dim": 1}),
        json!({"embeddings": [[1.0]], "dim": "1"}),
        json!({"embeddings": [[1.0]], "dim": 1.5}),
    ] {
        assert!(!v.is_valid(&bad), "{bad}");
        assert!(serde_json::from_value::<EmbedResponse>(bad).is_err());
    }
    assert!(!v.is_valid(&json!({"embeddings": [[1.0]], "dim": 0})));
}

#[test]
fn health_round_trip() {
    let v = validator("health");
    let h = HealthResponse {
        status: "ok".into(),
        model: "toy".into(),
        dim: 768,
    };
    let doc = serde_json::to_value(&h).unwrap();
    assert_valid(&v, &doc);
    assert_eq!(serde_json::from_value::<HealthResponse>(doc).unwrap(), h);
    for bad in [
        json!({"status": "ok", "model": "m"}),
        json!({"status": "ok", "dim": 3}),
    ] {
        assert!(!v.is_valid(&bad), "{bad}");
        assert!(serde_json::from_value::<HealthResponse>(bad).is_err());
    }
}

#[test]
fn schemas_are_draft_2020_12() {
    for name in ["embed_request", "embed_response", "health"] {
        let path = format!("{}/schemas/{name}.schema.json", env!("CARGO_MANIFEST_DIR"));
        let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(
            schema["$schema"],
            "https://json-schema.org/draft/2020-12/schema"
        );
        assert_eq!(schema["additionalProperties"], false);
    }
}
