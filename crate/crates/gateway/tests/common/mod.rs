#![allow(dead_code)]

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use changescope_core::eval::corpus::write_corpus;
use http_body_util::BodyExt;
use serde_json::Value;
use std::path::{Path, PathBuf};
use tower::ServiceExt;

pub struct Corpus {
    pub dir: tempfile::TempDir,
}

impl Corpus {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path()).unwrap();
        Self { dir }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn png(&self, rel: &str) -> Vec<u8> {
        std::fs::read(self.path(rel)).unwrap()
    }

    /// Concatenates the named scripts into one file, in order.
    pub fn joined_script(&self, ids: &[&str]) -> PathBuf {
        let mut all: Vec<Value> = Vec::new();
        for id in ids {
            let s: Vec<Value> = serde_json::from_slice(&self.png(&format!("scripts/{id}.json"))).unwrap();
            all.extend(s);
        }
        let out = self.path(&format!("joined_{}.json", ids.join("_")));
        std::fs::write(&out, serde_json::to_vec(&all).unwrap()).unwrap();
        out
    }
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Body, content_type: &str) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", content_type)
        .body(body)
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

pub async fn json(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let body = body.map_or(Body::empty(), |v| Body::from(v.to_string()));
    let (status, bytes) = call(app, method, uri, body, "application/json").await;
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

pub async fn upload(app: &Router, session: &str, role: &str, png: Vec<u8>) -> (StatusCode, Value) {
    let uri = format!("/sessions/{session}/images?role={role}");
    let (status, bytes) = call(app, Method::POST, &uri, Body::from(png), "image/png").await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

pub async fn new_session(app: &Router) -> String {
    let (status, v) = json(app, Method::POST, "/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    v["session_id"].as_str().unwrap().to_string()
}

/// Creates a session holding `<id>_pre.png` and `<id>_cur.png` of a corpus question.
pub async fn session_with_pair(app: &Router, corpus: &Corpus, id: &str) -> String {
    let s = new_session(app).await;
    let (st, _) = upload(app, &s, "pre", corpus.png(&format!("images/{id}_pre.png"))).await;
    assert_eq!(st, StatusCode::OK);
    let (st, _) = upload(app, &s, "cur", corpus.png(&format!("images/{id}_cur.png"))).await;
    assert_eq!(st, StatusCode::OK);
    s
}

pub fn exists(p: &Path) -> bool {
    p.exists()
}
