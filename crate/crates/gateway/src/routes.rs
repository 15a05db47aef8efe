//! The route table. Every route, its authentication class and the service
//! that serves it are listed once here; the router and the OpenAPI tests are
//! both driven from this table.

use axum::routing::{self, MethodRouter};
use axum::Router;
use serde::Serialize;

use crate::handlers as h;
use crate::state::AppState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AuthClass {
    /// No credentials.
    Public,
    /// Monitor client, HTTP Basic.
    Ingest,
    /// Any user with an access token; data is scoped to that user.
    Owner,
    /// User with the admin flag.
    Admin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Service {
    Log,
    Sso,
    Both,
}

/// Which services one process serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Log,
    Sso,
    All,
}

impl Mode {
    pub fn serves(self, service: Service) -> bool {
        matches!(
            (self, service),
            (Mode::All, _)
                | (_, Service::Both)
                | (Mode::Log, Service::Log)
                | (Mode::Sso, Service::Sso)
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RouteSpec {
    pub method: &'static str,
    pub path: &'static str,
    pub class: AuthClass,
    pub service: Service,
    pub operation_id: &'static str,
}

const fn route(
    method: &'static str,
    path: &'static str,
    class: AuthClass,
    service: Service,
    operation_id: &'static str,
) -> RouteSpec {
    RouteSpec {
        method,
        path,
        class,
        service,
        operation_id,
    }
}

use AuthClass::{Admin, Ingest, Owner, Public};
use Service::{Both, Log, Sso};

pub const ROUTES: &[RouteSpec] = &[
    route("POST", "/api/v1/login", Public, Sso, "login"),
    route("POST", "/api/v1/logout", Owner, Sso, "logout"),
    route("POST", "/api/v1/refresh", Public, Sso, "refresh"),
    route("GET", "/api/v1/users", Admin, Sso, "listUsers"),
    route("POST", "/api/v1/users", Admin, Sso, "createUser"),
    // self or admin, checked by the identity service
    route("GET", "/api/v1/users/{id}", Owner, Sso, "getUser"),
    route("PUT", "/api/v1/users/{id}", Owner, Sso, "updateUser"),
    route("DELETE", "/api/v1/users/{id}", Admin, Sso, "deleteUser"),
    route(
        "POST",
        "/api/v1/users/{id}/password",
        Owner,
        Sso,
        "changePassword",
    ),
    route("GET", "/api/v1/resolve", Ingest, Sso, "resolveIdentifier"),
    route("POST", "/api/v1/logs", Ingest, Log, "ingestLog"),
    route("GET", "/api/v1/logs", Owner, Log, "listLogs"),
    route("GET", "/api/v1/logs/summary", Owner, Log, "summarizeLogs"),
    route("GET", "/api/v1/logs/export", Owner, Log, "exportLogs"),
    route("GET", "/api/v1/logs/verify", Admin, Log, "verifyChain"),
    route("GET", "/api/v1/policies", Owner, Log, "listPolicies"),
    route("POST", "/api/v1/policies", Owner, Log, "setPolicy"),
    route(
        "DELETE",
        "/api/v1/policies/{id}",
        Owner,
        Log,
        "deletePolicy",
    ),
    route(
        "POST",
        "/api/v1/policies/evaluate",
        Ingest,
        Log,
        "evaluatePolicy",
    ),
    route("GET", "/api/v1/openapi.json", Public, Both, "openapi"),
    route("GET", "/api/v1/health", Public, Both, "health"),
];

fn handler(operation_id: &str) -> MethodRouter<AppState> {
    use routing::{delete, get, post, put};
    match operation_id {
        "login" => post(h::login),
        "logout" => post(h::logout),
        "refresh" => post(h::refresh),
        "listUsers" => get(h::list_users),
        "createUser" => post(h::create_user),
        "getUser" => get(h::get_user),
        "updateUser" => put(h::update_user),
        "deleteUser" => delete(h::delete_user),
        "changePassword" => post(h::change_password),
        "resolveIdentifier" => get(h::resolve),
        "ingestLog" => post(h::ingest),
        "listLogs" => get(h::list_logs),
        "summarizeLogs" => get(h::summary),
        "exportLogs" => get(h::export),
        "verifyChain" => get(h::verify_chain),
        "listPolicies" => get(h::list_policies),
        "setPolicy" => post(h::set_policy),
        "deletePolicy" => delete(h::delete_policy),
        "evaluatePolicy" => post(h::evaluate),
        "openapi" => get(h::openapi),
        "health" => get(h::health),
        other => unreachable!("route table names unknown operation {other}"),
    }
}

/// Routes served in `mode`, without middleware.
pub fn router(state: AppState, mode: Mode) -> Router {
    let mut paths: Vec<(&str, MethodRouter<AppState>)> = Vec::new();
    for spec in ROUTES.iter().filter(|r| mode.serves(r.service)) {
        let methods = handler(spec.operation_id);
        match paths.iter_mut().find(|(p, _)| *p == spec.path) {
            Some((_, existing)) => *existing = std::mem::take(existing).merge(methods),
            None => paths.push((spec.path, methods)),
        }
    }
    paths
        .into_iter()
        .fold(Router::new(), |router, (path, methods)| {
            router.route(path, methods.fallback(h::method_not_allowed))
        })
        .fallback(h::not_found)
        .with_state(state)
}
