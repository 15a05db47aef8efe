//! In-process harness for the HTTP tests: one router over a fresh store with
//! a manual clock, a bootstrap admin and one monitor client.
#![allow(dead_code)]

use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::http::{header, HeaderMap, Method, Request, StatusCode};
use axum::Router;
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use http_body_util::BodyExt;
use itt_core::identity::{IdentityConfig, NewUser};
use itt_core::{ManualClock, SqliteStore, TokenPair};
use itt_gateway::{AppState, AuthClass, Mode, ROUTES};
use itt_testkit::criteria::CHEAP_KDF;
use itt_testkit::fixture::{ts, EPOCH};
use serde_json::{json, Value};
use tower::ServiceExt;

pub type Outcome = Result<String, String>;

pub const ROOT: (&str, &str) = ("root", "root-password");
pub const MONITOR: (&str, &str) = ("monitor-1", "monitor-secret-1");

#[derive(Debug, Clone)]
pub enum Cred {
    None,
    Basic(String, String),
    Bearer(String),
}

pub struct Resp {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Bytes,
}

impl Resp {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or(Value::Null)
    }

    pub fn code(&self) -> String {
        self.json()["error"]["code"]
            .as_str()
            .unwrap_or_default()
            .to_owned()
    }
}

pub struct Harness {
    pub app: Router,
    pub state: AppState,
    pub clock: ManualClock,
    pub dir: tempfile::TempDir,
}

impl Harness {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(SqliteStore::open(dir.path().join("itt.db")).unwrap());
        let clock = ManualClock::new(ts(EPOCH + 30 * 86_400));
        let state = AppState::over_sqlite(
            store,
            Arc::new(clock.clone()),
            vec![7; 32],
            IdentityConfig {
                kdf: CHEAP_KDF,
                ..Default::default()
            },
        )
        .unwrap();
        state.identity.bootstrap_admin(ROOT.0, ROOT.1).unwrap();
        state
            .identity
            .set_monitor_credential(MONITOR.0, MONITOR.1)
            .unwrap();
        Self {
            app: itt_gateway::app(
                state.clone(),
                Mode::All,
                &["http://dash.example".to_owned()],
            ),
            state,
            clock,
            dir,
        }
    }

    pub fn add_user(&self, main: &str, secondary: &[&str], admin: bool) {
        self.state
            .identity
            .create_user(
                ROOT.0,
                NewUser {
                    main_id: main.into(),
                    secondary_ids: secondary.iter().map(|s| s.to_string()).collect(),
                    password: format!("{main}-password"),
                    is_admin: admin,
                },
            )
            .unwrap();
    }

    pub fn login(&self, main: &str) -> TokenPair {
        let password = if main == ROOT.0 {
            ROOT.1.to_owned()
        } else {
            format!("{main}-password")
        };
        self.state.identity.login(main, &password).unwrap()
    }

    pub fn bearer(&self, main: &str) -> Cred {
        Cred::Bearer(self.login(main).access.token)
    }

    pub fn monitor(&self) -> Cred {
        Cred::Basic(MONITOR.0.into(), MONITOR.1.into())
    }

    pub async fn call(&self, method: &str, uri: &str, cred: &Cred, body: Option<Value>) -> Resp {
        let mut req = Request::builder()
            .method(Method::from_bytes(method.as_bytes()).unwrap())
            .uri(uri);
        match cred {
            Cred::None => {}
            Cred::Basic(id, secret) => {
                req = req.header(
                    header::AUTHORIZATION,
                    format!("Basic {}", STANDARD.encode(format!("{id}:{secret}"))),
                )
            }
            Cred::Bearer(token) => {
                req = req.header(header::AUTHORIZATION, format!("Bearer {token}"))
            }
        }
        let body = match body {
            Some(v) => {
                req = req.header(header::CONTENT_TYPE, "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        self.send(req.body(body).unwrap()).await
    }

    pub async fn send(&self, req: Request<Body>) -> Resp {
        let res = self.app.clone().oneshot(req).await.unwrap();
        let status = res.status();
        let headers = res.headers().clone();
        let body = res.into_body().collect().await.unwrap().to_bytes();
        Resp {
            status,
            headers,
            body,
        }
    }
}

fn sample_body(h: &Harness, operation_id: &str) -> Option<Value> {
    Some(match operation_id {
        "login" => json!({"identifier": "matrix-user", "password": "matrix-user-password"}),
        "refresh" => json!({"refresh_token": h.login("matrix-user").refresh.token}),
        "createUser" => json!({"main_id": "matrix-new", "password": "matrix-password"}),
        "updateUser" => json!({}),
        "changePassword" => {
            json!({"current_password": "wrong-current", "new_password": "whatever-new"})
        }
        "ingestLog" => json!({}),
        "setPolicy" => json!({"subject": "*", "data_category": "matrix", "effect": "allow"}),
        "evaluatePolicy" => json!({"owner": "root", "consumer": "root", "data_category": "c"}),
        _ => return None,
    })
}

/// A rejection by authentication or by role, as opposed to any later failure.
fn auth_rejected(r: &Resp) -> bool {
    r.status == StatusCode::UNAUTHORIZED
        || (r.status == StatusCode::FORBIDDEN && r.code() == "forbidden")
}

const KINDS: [&str; 7] = [
    "none",
    "monitor",
    "bad-basic",
    "user",
    "admin",
    "expired",
    "refresh",
];

fn admitted(class: AuthClass, kind: &str) -> bool {
    match class {
        AuthClass::Public => true,
        AuthClass::Ingest => kind == "monitor",
        AuthClass::Owner => matches!(kind, "user" | "admin"),
        AuthClass::Admin => kind == "admin",
    }
}

/// Calls every route with every kind of credential and checks that exactly
/// the kinds its class admits get past authentication. Rejections must be
/// 401 with a challenge, or 403 for a user on an admin route.
pub async fn auth_matrix(h: &Harness) -> Outcome {
    h.add_user("matrix-user", &[], false);
    let mut cells = 0;
    for route in ROUTES {
        for kind in KINDS {
            let principal = if kind == "admin" {
                ROOT.0
            } else {
                "matrix-user"
            };
            let (cred, expire) = match kind {
                "none" => (Cred::None, false),
                "monitor" => (h.monitor(), false),
                "bad-basic" => (Cred::Basic(MONITOR.0.into(), "wrong-secret".into()), false),
                "user" | "admin" => (h.bearer(principal), false),
                "expired" => (h.bearer("matrix-user"), true),
                _ => (Cred::Bearer(h.login("matrix-user").refresh.token), false),
            };
            let id = match route.operation_id {
                "deleteUser" | "deletePolicy" => "ghost",
                _ => principal,
            };
            let uri = route.path.replace("{id}", id);
            let uri = match route.operation_id {
                "resolveIdentifier" => format!("{uri}?identifier=root"),
                _ => uri,
            };
            let before = h.clock.now_ts();
            if expire {
                h.clock
                    .advance(h.state.identity.config().access_ttl_secs + 1);
            }
            let r = h
                .call(
                    route.method,
                    &uri,
                    &cred,
                    sample_body(h, route.operation_id),
                )
                .await;
            h.clock.set(before);
            cells += 1;
            let want = admitted(route.class, kind);
            let rejected = auth_rejected(&r);
            if want == rejected {
                return Err(format!(
                    "{} {} with {kind}: status {} code {:?}, expected {}",
                    route.method,
                    route.path,
                    r.status,
                    r.code(),
                    if want { "admission" } else { "rejection" }
                ));
            }
            if rejected {
                let wants_401 = !(route.class == AuthClass::Admin && kind == "user");
                if wants_401 != (r.status == StatusCode::UNAUTHORIZED) {
                    return Err(format!(
                        "{} {} with {kind}: status {}",
                        route.method, route.path, r.status
                    ));
                }
                if wants_401 && !r.headers.contains_key(header::WWW_AUTHENTICATE) {
                    return Err(format!(
                        "{} {} with {kind}: 401 without challenge",
                        route.method, route.path
                    ));
                }
            }
            if r.status.is_server_error() {
                return Err(format!(
                    "{} {} with {kind}: server error {}",
                    route.method, route.path, r.status
                ));
            }
        }
    }
    Ok(format!(
        "{} routes x {} credential kinds = {cells} cells",
        ROUTES.len(),
        KINDS.len()
    ))
}

pub trait ClockExt {
    fn now_ts(&self) -> itt_core::Timestamp;
}

impl ClockExt for ManualClock {
    fn now_ts(&self) -> itt_core::Timestamp {
        itt_core::Clock::now(self)
    }
}

/// Five users, one with a secondary id. Every owner-scoped read names every
/// owner; only one's own identifiers are accepted, and results never contain
/// another owner's data.
pub async fn owner_scoping(h: &Harness) -> Outcome {
    let users = ["u1", "u2", "u3", "u4", "u5"];
    for u in users {
        let secondary = format!("{u}@mail");
        h.add_user(u, &[secondary.as_str()], u == "u5");
    }
    let monitor = h.monitor();
    for (i, owner) in users.iter().enumerate() {
        for consumer in users.iter().skip(i % 2) {
            let r = h
                .call(
                    "POST",
                    "/api/v1/logs",
                    &monitor,
                    Some(json!({
                        "occurred_at": itt_testkit::fixture::ts(EPOCH + 29 * 86_400).to_string(),
                        "owner": format!("{owner}@mail"), "consumer": consumer,
                        "tool": "t", "data_category": "c", "access_kind": "read"
                    })),
                )
                .await;
            if r.status != StatusCode::CREATED {
                return Err(format!("seeding failed: {} {:?}", r.status, r.json()));
            }
        }
        let r = h
            .call(
                "POST",
                "/api/v1/policies",
                &h.bearer(owner),
                Some(json!({"subject": "*", "data_category": "c", "effect": "deny"})),
            )
            .await;
        if r.status != StatusCode::CREATED {
            return Err(format!("policy seeding failed: {}", r.status));
        }
    }
    let reads = [
        "/api/v1/logs",
        "/api/v1/logs/summary",
        "/api/v1/logs/export",
        "/api/v1/policies",
    ];
    let mut checks = 0;
    for caller in users {
        let cred = h.bearer(caller);
        for named in users {
            for (alias, label) in [
                (named.to_owned(), "main"),
                (format!("{named}@mail"), "secondary"),
            ] {
                for path in reads {
                    let r = h
                        .call("GET", &format!("{path}?owner={alias}"), &cred, None)
                        .await;
                    checks += 1;
                    if caller == named {
                        if r.status != StatusCode::OK {
                            return Err(format!(
                                "{caller} reading own {path} via {label} id: {}",
                                r.status
                            ));
                        }
                    } else if r.status != StatusCode::FORBIDDEN || r.code() != "owner_mismatch" {
                        return Err(format!(
                            "{caller} reading {named}'s {path}: {} {:?}",
                            r.status,
                            r.code()
                        ));
                    }
                }
            }
        }
        // unparameterized reads return only the caller's data
        let page = h
            .call("GET", "/api/v1/logs?per_page=500", &cred, None)
            .await
            .json();
        let entries = page["entries"].as_array().cloned().unwrap_or_default();
        if entries.is_empty() || entries.iter().any(|e| e["owner"] != caller) {
            return Err(format!("{caller}'s log page holds foreign or no entries"));
        }
        let rules = h.call("GET", "/api/v1/policies", &cred, None).await.json();
        let rules = rules.as_array().cloned().unwrap_or_default();
        if rules.len() != 1 || rules.iter().any(|p| p["owner"] != caller) {
            return Err(format!("{caller}'s policy list holds foreign rules"));
        }
        for other in users.iter().filter(|o| **o != caller) {
            let victim = h
                .state
                .policies
                .list_policies(other)
                .map_err(|e| e.to_string())?;
            let r = h
                .call(
                    "DELETE",
                    &format!("/api/v1/policies/{}", victim[0].policy_id),
                    &cred,
                    None,
                )
                .await;
            checks += 1;
            if r.status != StatusCode::FORBIDDEN {
                return Err(format!("{caller} deleted {other}'s policy: {}", r.status));
            }
            let r = h
                .call("GET", &format!("/api/v1/users/{other}"), &cred, None)
                .await;
            checks += 1;
            let want = if caller == "u5" {
                StatusCode::OK
            } else {
                StatusCode::FORBIDDEN
            };
            if r.status != want {
                return Err(format!(
                    "{caller} reading user {other}: {} (want {want})",
                    r.status
                ));
            }
        }
    }
    Ok(format!("{} owners, {checks} scoped requests", users.len()))
}
