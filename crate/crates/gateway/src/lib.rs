//! HTTP front end: the log service and the single sign-on service.
//!
//! Both services share one router builder; [`routes::Mode`] picks which
//! routes a process serves.

pub mod auth;
pub mod error;
pub mod handlers;
pub mod openapi;
pub mod routes;
pub mod server;
pub mod state;

pub use routes::{AuthClass, Mode, RouteSpec, Service, ROUTES};
pub use server::{app, prepare, serve, ServerConfig};
pub use state::AppState;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
