//! `itt`, a command-line client for the log and single sign-on services.
//!
//! Exit codes: 0 success, 1 invalid input or a rejected request, 2 missing or
//! refused credentials (401/403), 3 network failure or server error (5xx),
//! 4 the log hash chain is broken.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use itt_core::model::{validate_log_submission, LogSubmission};
use itt_core::{Clock, SystemClock};
use reqwest::blocking::{Client, RequestBuilder, Response};
use reqwest::{Method, StatusCode};
use serde_json::{json, Value};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_AUTH: u8 = 2;
pub const EXIT_UNAVAILABLE: u8 = 3;
pub const EXIT_BROKEN_CHAIN: u8 = 4;

/// Process streams, injectable for tests.
pub struct Io<'a> {
    pub input: &'a mut dyn BufRead,
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

#[derive(Parser, Debug)]
#[command(
    name = "itt",
    version,
    about = "Client for the itt usage log and single sign-on services"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Base URL of the log service.
    #[arg(
        long,
        global = true,
        env = "ITT_ENDPOINT",
        default_value = "http://127.0.0.1:8081"
    )]
    pub endpoint: String,
    /// Base URL of the single sign-on service; defaults to --endpoint.
    #[arg(long, global = true, env = "ITT_SSO_ENDPOINT")]
    pub sso_endpoint: Option<String>,
    /// Access token, as printed by `auth login`.
    #[arg(long, global = true, env = "ITT_TOKEN", hide_env_values = true)]
    pub token: Option<String>,
    /// Monitor client id, for ingest routes.
    #[arg(long, global = true, env = "ITT_MONITOR_ID")]
    pub basic_id: Option<String>,
    /// Monitor secret, for ingest routes.
    #[arg(
        long,
        global = true,
        env = "ITT_MONITOR_SECRET",
        hide_env_values = true
    )]
    pub basic_secret: Option<String>,
    #[arg(long, global = true, default_value_t = 30)]
    pub timeout_secs: u64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Submit usage events (monitor credentials).
    #[command(subcommand)]
    Log(LogCmd),
    /// Manage users.
    #[command(subcommand)]
    User(UserCmd),
    /// Log in and out.
    #[command(subcommand)]
    Auth(AuthCmd),
    /// Read one's own usage log.
    #[command(subcommand)]
    Query(QueryCmd),
    /// Manage one's usage policies.
    #[command(subcommand)]
    Policy(PolicyCmd),
    /// Verify the log hash chain (administrators).
    VerifyChain,
}

#[derive(Subcommand, Debug)]
pub enum LogCmd {
    /// Record one usage.
    Emit(EmitArgs),
    /// Record usages from a JSON Lines file (or a JSON array); `-` reads stdin.
    Import {
        file: PathBuf,
        /// Keep going after a rejected event.
        #[arg(long)]
        continue_on_error: bool,
    },
}

#[derive(Args, Debug)]
pub struct EmitArgs {
    #[arg(long)]
    pub owner: String,
    #[arg(long)]
    pub consumer: String,
    #[arg(long)]
    pub tool: String,
    #[arg(long = "category")]
    pub data_category: String,
    #[arg(long, default_value = "")]
    pub purpose: String,
    #[arg(long, default_value = "read")]
    pub access_kind: String,
    /// RFC 3339; defaults to now.
    #[arg(long)]
    pub occurred_at: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum UserCmd {
    /// Create a user (administrators). The password is prompted for.
    Create {
        main_id: String,
        /// Secondary identifier; repeatable.
        #[arg(long = "secondary")]
        secondary: Vec<String>,
        #[arg(long)]
        admin: bool,
        /// Read the password from the first line of stdin instead of prompting.
        #[arg(long)]
        password_stdin: bool,
    },
    Show {
        main_id: String,
    },
    List,
    /// Replace secondary identifiers or set the admin flag.
    Update {
        main_id: String,
        /// Secondary identifier; repeatable. Replaces the current set.
        #[arg(long = "secondary")]
        secondary: Vec<String>,
        /// Remove all secondary identifiers.
        #[arg(long, conflicts_with = "secondary")]
        clear_secondary: bool,
        #[arg(long)]
        admin: Option<bool>,
    },
    Delete {
        main_id: String,
    },
    /// Change one's own password. Current and new password are prompted for.
    Passwd {
        main_id: String,
        /// Read current and new password from the first two lines of stdin.
        #[arg(long)]
        password_stdin: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum AuthCmd {
    /// Log in and print the token pair as JSON.
    Login {
        identifier: String,
        #[arg(long)]
        password_stdin: bool,
        /// Print only the access token, for `export ITT_TOKEN=$(...)`.
        #[arg(long)]
        access_token_only: bool,
    },
    /// Revoke the session of the access token in use.
    Logout,
}

#[derive(Args, Debug, Default)]
pub struct Window {
    #[arg(long)]
    pub from: Option<String>,
    #[arg(long)]
    pub to: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Order {
    Desc,
    Asc,
}

#[derive(Subcommand, Debug)]
pub enum QueryCmd {
    /// One page of entries, as JSON.
    Logs {
        #[command(flatten)]
        window: Window,
        #[arg(long)]
        consumer: Option<String>,
        #[arg(long)]
        tool: Option<String>,
        #[arg(long = "category")]
        data_category: Option<String>,
        #[arg(long)]
        page: Option<u32>,
        #[arg(long)]
        per_page: Option<u32>,
        #[arg(long, value_enum)]
        order: Option<Order>,
    },
    /// Usage counts for the last days, as JSON.
    Summary {
        #[arg(long)]
        days: Option<u32>,
    },
    /// Save the HTML report.
    Export {
        #[command(flatten)]
        window: Window,
        /// Output file; defaults to the name the server suggests.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EffectArg {
    Allow,
    Deny,
}

#[derive(Subcommand, Debug)]
pub enum PolicyCmd {
    /// Create or replace the rule for a subject and category. `*` matches any.
    Set {
        #[arg(long)]
        subject: String,
        #[arg(long = "category")]
        data_category: String,
        #[arg(long, value_enum)]
        effect: EffectArg,
    },
    List,
    Delete {
        policy_id: String,
    },
    /// Ask how a usage would be decided (monitor credentials).
    Evaluate {
        #[arg(long)]
        owner: String,
        #[arg(long)]
        consumer: String,
        #[arg(long = "category")]
        data_category: String,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Credentials(String),
    #[error("{status}: {code}: {message}")]
    Http {
        status: StatusCode,
        code: String,
        message: String,
    },
    #[error("cannot reach {url}: {reason}")]
    Network { url: String, reason: String },
    #[error("hash chain broken at entry {0}")]
    BrokenChain(u64),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) | CliError::File { .. } => EXIT_INVALID,
            CliError::Credentials(_) => EXIT_AUTH,
            CliError::Http { status, .. }
                if *status == StatusCode::UNAUTHORIZED || *status == StatusCode::FORBIDDEN =>
            {
                EXIT_AUTH
            }
            CliError::Http { status, .. } if status.is_client_error() => EXIT_INVALID,
            CliError::Http { .. } | CliError::Network { .. } => EXIT_UNAVAILABLE,
            CliError::BrokenChain(_) => EXIT_BROKEN_CHAIN,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::File {
        path: path.to_owned(),
        source,
    }
}

enum Auth<'a> {
    None,
    Bearer(&'a str),
    Basic(&'a str, &'a str),
}

enum Service {
    Log,
    Sso,
}

struct Api {
    http: Client,
    log: String,
    sso: String,
}

impl Api {
    fn new(g: &Global) -> CliResult<Self> {
        let http = Client::builder()
            .timeout(Duration::from_secs(g.timeout_secs))
            .build()
            .map_err(|e| CliError::Invalid(e.to_string()))?;
        let log = g.endpoint.trim_end_matches('/').to_owned();
        let sso = g
            .sso_endpoint
            .as_deref()
            .map(|s| s.trim_end_matches('/').to_owned())
            .unwrap_or_else(|| log.clone());
        Ok(Self { http, log, sso })
    }

    fn request(
        &self,
        method: Method,
        service: Service,
        path: &str,
        auth: Auth<'_>,
    ) -> (String, RequestBuilder) {
        let base = match service {
            Service::Log => &self.log,
            Service::Sso => &self.sso,
        };
        let url = format!("{base}/api/v1{path}");
        let mut req = self.http.request(method, &url);
        match auth {
            Auth::None => {}
            Auth::Bearer(token) => req = req.bearer_auth(token),
            Auth::Basic(id, secret) => req = req.basic_auth(id, Some(secret)),
        }
        (url, req)
    }

    fn send(&self, (url, req): (String, RequestBuilder)) -> CliResult<Response> {
        let res = req.send().map_err(|e| CliError::Network {
            url: url.clone(),
            reason: e.to_string(),
        })?;
        if res.status().is_success() {
            return Ok(res);
        }
        let status = res.status();
        let body: Value = res.json().unwrap_or(Value::Null);
        let error = &body["error"];
        let mut message = error["message"]
            .as_str()
            .unwrap_or("request failed")
            .to_owned();
        if let Some(details) = error["details"].as_array() {
            for d in details {
                message.push_str(&format!(
                    "\n  {}: {}",
                    d["field"].as_str().unwrap_or("?"),
                    d["message"].as_str().unwrap_or("")
                ));
            }
        }
        Err(CliError::Http {
            status,
            code: error["code"].as_str().unwrap_or("error").to_owned(),
            message,
        })
    }

    fn json(&self, req: (String, RequestBuilder)) -> CliResult<Value> {
        let url = req.0.clone();
        let res = self.send(req)?;
        if res.status() == StatusCode::NO_CONTENT {
            return Ok(Value::Null);
        }
        res.json().map_err(|e| CliError::Network {
            url,
            reason: format!("unreadable response: {e}"),
        })
    }
}

fn access_token(g: &Global) -> CliResult<String> {
    g.token.clone().ok_or_else(|| {
        CliError::Credentials(
            "no access token: pass --token or set ITT_TOKEN (see `itt auth login`)".into(),
        )
    })
}

fn basic(g: &Global) -> CliResult<(&str, &str)> {
    match (&g.basic_id, &g.basic_secret) {
        (Some(id), Some(secret)) => Ok((id, secret)),
        _ => Err(CliError::Credentials(
            "monitor credentials required: --basic-id and --basic-secret (or ITT_MONITOR_ID/ITT_MONITOR_SECRET)".into(),
        )),
    }
}

fn read_line(io: &mut Io<'_>) -> CliResult<String> {
    let mut line = String::new();
    io.input
        .read_line(&mut line)
        .map_err(|e| CliError::Invalid(format!("reading stdin: {e}")))?;
    let line = line.trim_end_matches(['\r', '\n']).to_owned();
    if line.is_empty() {
        return Err(CliError::Invalid("empty password on stdin".into()));
    }
    Ok(line)
}

fn password(io: &mut Io<'_>, from_stdin: bool, prompt: &str) -> CliResult<String> {
    if from_stdin {
        return read_line(io);
    }
    rpassword::prompt_password(prompt)
        .map_err(|e| CliError::Invalid(format!("reading password: {e}")))
}

fn print_json(io: &mut Io<'_>, value: &Value) {
    let _ = writeln!(
        io.out,
        "{}",
        serde_json::to_string_pretty(value).unwrap_or_default()
    );
}

fn window_params(w: &Window) -> Vec<(&'static str, String)> {
    let mut q = Vec::new();
    if let Some(f) = &w.from {
        q.push(("from", f.clone()));
    }
    if let Some(t) = &w.to {
        q.push(("to", t.clone()));
    }
    q
}

/// Parses `args` (program name first) and runs the command. Returns the exit code.
pub fn run<I, T>(args: I, mut io: Io<'_>) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(io.err, "{rendered}")
            } else {
                write!(io.out, "{rendered}")
            };
            return code;
        }
    };
    match execute(&cli, &mut io) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(io.err, "itt: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, io: &mut Io<'_>) -> CliResult<()> {
    let g = &cli.global;
    let api = Api::new(g)?;
    match &cli.command {
        Command::Log(cmd) => log_cmd(&api, g, cmd, io),
        Command::User(cmd) => user_cmd(&api, g, cmd, io),
        Command::Auth(cmd) => auth_cmd(&api, g, cmd, io),
        Command::Query(cmd) => query_cmd(&api, g, cmd, io),
        Command::Policy(cmd) => policy_cmd(&api, g, cmd, io),
        Command::VerifyChain => {
            let token = access_token(g)?;
            let verdict = api.json(api.request(
                Method::GET,
                Service::Log,
                "/logs/verify",
                Auth::Bearer(&token),
            ))?;
            print_json(io, &verdict);
            match verdict["status"].as_str() {
                Some("ok") => Ok(()),
                _ => Err(CliError::BrokenChain(
                    verdict["first_bad_seq"].as_u64().unwrap_or(0),
                )),
            }
        }
    }
}

fn log_cmd(api: &Api, g: &Global, cmd: &LogCmd, io: &mut Io<'_>) -> CliResult<()> {
    let (id, secret) = basic(g)?;
    let post = |event: &Value| {
        check_event(event)?;
        let (url, req) = api.request(Method::POST, Service::Log, "/logs", Auth::Basic(id, secret));
        api.json((url, req.json(event)))
    };
    match cmd {
        LogCmd::Emit(a) => {
            let occurred_at = a
                .occurred_at
                .clone()
                .unwrap_or_else(|| SystemClock.now().to_string());
            let entry = post(&json!({
                "occurred_at": occurred_at,
                "owner": a.owner,
                "consumer": a.consumer,
                "tool": a.tool,
                "data_category": a.data_category,
                "purpose": a.purpose,
                "access_kind": a.access_kind,
            }))?;
            print_json(io, &entry);
            Ok(())
        }
        LogCmd::Import {
            file,
            continue_on_error,
        } => {
            let text = if file.as_os_str() == "-" {
                let mut buf = String::new();
                std::io::Read::read_to_string(&mut io.input, &mut buf).map_err(file_err(file))?;
                buf
            } else {
                std::fs::read_to_string(file).map_err(file_err(file))?
            };
            let events = parse_events(&text)?;
            let (mut imported, mut failed) = (0usize, 0usize);
            let mut first_error = None;
            for (line, event) in events {
                let result = event.and_then(|e| post(&e));
                match result {
                    Ok(_) => imported += 1,
                    Err(e) => {
                        failed += 1;
                        let _ = writeln!(io.err, "itt: {}:{line}: {e}", file.display());
                        let fatal = matches!(e.exit_code(), EXIT_AUTH | EXIT_UNAVAILABLE);
                        first_error.get_or_insert(e);
                        if fatal || !continue_on_error {
                            break;
                        }
                    }
                }
            }
            let _ = writeln!(io.out, "imported={imported} failed={failed}");
            match first_error {
                None => Ok(()),
                Some(e) => Err(e),
            }
        }
    }
}

/// The server's field rules, applied locally so that a bad event fails before
/// any request is made. The server still checks everything.
fn check_event(event: &Value) -> CliResult<()> {
    let submission: LogSubmission = serde_json::from_value(event.clone())
        .map_err(|e| CliError::Invalid(format!("invalid event: {e}")))?;
    validate_log_submission(&submission, SystemClock.now())
        .map(drop)
        .map_err(|errors| {
            let mut msg = errors.to_string();
            for e in &errors.0 {
                msg.push_str(&format!("\n  {}: {}", e.field, e.message));
            }
            CliError::Invalid(msg)
        })
}

type Event = CliResult<Value>;

/// Events with their 1-based line (or array index) numbers.
fn parse_events(text: &str) -> CliResult<Vec<(usize, Event)>> {
    if text.trim_start().starts_with('[') {
        let items: Vec<Value> = serde_json::from_str(text)
            .map_err(|e| CliError::Invalid(format!("invalid JSON array: {e}")))?;
        return Ok(items
            .into_iter()
            .enumerate()
            .map(|(i, v)| (i + 1, Ok(v)))
            .collect());
    }
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            (
                i + 1,
                serde_json::from_str(l)
                    .map_err(|e| CliError::Invalid(format!("invalid JSON: {e}"))),
            )
        })
        .collect())
}

fn user_cmd(api: &Api, g: &Global, cmd: &UserCmd, io: &mut Io<'_>) -> CliResult<()> {
    let token = access_token(g)?;
    let auth = || Auth::Bearer(&token);
    let out = match cmd {
        UserCmd::Create {
            main_id,
            secondary,
            admin,
            password_stdin,
        } => {
            let pw = password(io, *password_stdin, &format!("Password for {main_id}: "))?;
            let (url, req) = api.request(Method::POST, Service::Sso, "/users", auth());
            api.json((
                url,
                req.json(&json!({"main_id": main_id, "secondary_ids": secondary, "password": pw, "is_admin": admin})),
            ))?
        }
        UserCmd::Show { main_id } => api.json(api.request(
            Method::GET,
            Service::Sso,
            &format!("/users/{main_id}"),
            auth(),
        ))?,
        UserCmd::List => api.json(api.request(Method::GET, Service::Sso, "/users", auth()))?,
        UserCmd::Update {
            main_id,
            secondary,
            clear_secondary,
            admin,
        } => {
            let mut body = serde_json::Map::new();
            if *clear_secondary || !secondary.is_empty() {
                body.insert("secondary_ids".into(), json!(secondary));
            }
            if let Some(admin) = admin {
                body.insert("is_admin".into(), json!(admin));
            }
            if body.is_empty() {
                return Err(CliError::Invalid("nothing to update".into()));
            }
            let (url, req) = api.request(
                Method::PUT,
                Service::Sso,
                &format!("/users/{main_id}"),
                auth(),
            );
            api.json((url, req.json(&body)))?
        }
        UserCmd::Delete { main_id } => {
            api.json(api.request(
                Method::DELETE,
                Service::Sso,
                &format!("/users/{main_id}"),
                auth(),
            ))?;
            let _ = writeln!(io.out, "deleted {main_id}");
            return Ok(());
        }
        UserCmd::Passwd {
            main_id,
            password_stdin,
        } => {
            let current = password(io, *password_stdin, "Current password: ")?;
            let new = password(io, *password_stdin, "New password: ")?;
            let (url, req) = api.request(
                Method::POST,
                Service::Sso,
                &format!("/users/{main_id}/password"),
                auth(),
            );
            api.json((
                url,
                req.json(&json!({"current_password": current, "new_password": new})),
            ))?;
            let _ = writeln!(io.out, "password changed; log in again");
            return Ok(());
        }
    };
    print_json(io, &out);
    Ok(())
}

fn auth_cmd(api: &Api, g: &Global, cmd: &AuthCmd, io: &mut Io<'_>) -> CliResult<()> {
    match cmd {
        AuthCmd::Login {
            identifier,
            password_stdin,
            access_token_only,
        } => {
            let pw = password(io, *password_stdin, "Password: ")?;
            let (url, req) = api.request(Method::POST, Service::Sso, "/login", Auth::None);
            let tokens = api.json((
                url,
                req.json(&json!({"identifier": identifier, "password": pw})),
            ))?;
            if *access_token_only {
                let _ = writeln!(
                    io.out,
                    "{}",
                    tokens["access_token"].as_str().unwrap_or_default()
                );
            } else {
                print_json(io, &tokens);
            }
        }
        AuthCmd::Logout => {
            let token = access_token(g)?;
            api.json(api.request(Method::POST, Service::Sso, "/logout", Auth::Bearer(&token)))?;
            let _ = writeln!(io.out, "logged out");
        }
    }
    Ok(())
}

fn query_cmd(api: &Api, g: &Global, cmd: &QueryCmd, io: &mut Io<'_>) -> CliResult<()> {
    let token = access_token(g)?;
    match cmd {
        QueryCmd::Logs {
            window,
            consumer,
            tool,
            data_category,
            page,
            per_page,
            order,
        } => {
            let mut q = window_params(window);
            let optional = [
                ("consumer", consumer),
                ("tool", tool),
                ("data_category", data_category),
            ];
            q.extend(
                optional
                    .into_iter()
                    .filter_map(|(k, v)| v.clone().map(|v| (k, v))),
            );
            q.extend(page.map(|p| ("page", p.to_string())));
            q.extend(per_page.map(|p| ("per_page", p.to_string())));
            q.extend(order.map(|o| {
                let o = match o {
                    Order::Desc => "occurred_at_desc",
                    Order::Asc => "occurred_at_asc",
                };
                ("order", o.to_owned())
            }));
            let (url, req) = api.request(Method::GET, Service::Log, "/logs", Auth::Bearer(&token));
            print_json(io, &api.json((url, req.query(&q)))?);
        }
        QueryCmd::Summary { days } => {
            let q: Vec<_> = days.map(|d| ("days", d.to_string())).into_iter().collect();
            let (url, req) = api.request(
                Method::GET,
                Service::Log,
                "/logs/summary",
                Auth::Bearer(&token),
            );
            print_json(io, &api.json((url, req.query(&q)))?);
        }
        QueryCmd::Export { window, out } => {
            let (url, req) = api.request(
                Method::GET,
                Service::Log,
                "/logs/export",
                Auth::Bearer(&token),
            );
            let res = api.send((url.clone(), req.query(&window_params(window))))?;
            let suggested = res
                .headers()
                .get(reqwest::header::CONTENT_DISPOSITION)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.split("filename=\"").nth(1))
                .and_then(|v| v.split('"').next())
                .map(|name| name.replace(['/', '\\'], "_"))
                .unwrap_or_else(|| "usage-report.html".into());
            let path = out.clone().unwrap_or_else(|| PathBuf::from(suggested));
            let body = res.bytes().map_err(|e| CliError::Network {
                url,
                reason: e.to_string(),
            })?;
            std::fs::write(&path, &body).map_err(file_err(&path))?;
            let _ = writeln!(io.out, "wrote {} ({} bytes)", path.display(), body.len());
        }
    }
    Ok(())
}

fn policy_cmd(api: &Api, g: &Global, cmd: &PolicyCmd, io: &mut Io<'_>) -> CliResult<()> {
    let out = match cmd {
        PolicyCmd::Evaluate {
            owner,
            consumer,
            data_category,
        } => {
            let (id, secret) = basic(g)?;
            let (url, req) = api.request(
                Method::POST,
                Service::Log,
                "/policies/evaluate",
                Auth::Basic(id, secret),
            );
            api.json((
                url,
                req.json(
                    &json!({"owner": owner, "consumer": consumer, "data_category": data_category}),
                ),
            ))?
        }
        PolicyCmd::Set {
            subject,
            data_category,
            effect,
        } => {
            let token = access_token(g)?;
            let effect = match effect {
                EffectArg::Allow => "allow",
                EffectArg::Deny => "deny",
            };
            let (url, req) = api.request(
                Method::POST,
                Service::Log,
                "/policies",
                Auth::Bearer(&token),
            );
            api.json((
                url,
                req.json(
                    &json!({"subject": subject, "data_category": data_category, "effect": effect}),
                ),
            ))?
        }
        PolicyCmd::List => {
            let token = access_token(g)?;
            api.json(api.request(Method::GET, Service::Log, "/policies", Auth::Bearer(&token)))?
        }
        PolicyCmd::Delete { policy_id } => {
            let token = access_token(g)?;
            api.json(api.request(
                Method::DELETE,
                Service::Log,
                &format!("/policies/{policy_id}"),
                Auth::Bearer(&token),
            ))?;
            let _ = writeln!(io.out, "deleted {policy_id}");
            return Ok(());
        }
    };
    print_json(io, &out);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_status() {
        let http = |s: u16| CliError::Http {
            status: StatusCode::from_u16(s).unwrap(),
            code: String::new(),
            message: String::new(),
        };
        assert_eq!(http(400).exit_code(), EXIT_INVALID);
        assert_eq!(http(404).exit_code(), EXIT_INVALID);
        assert_eq!(http(422).exit_code(), EXIT_INVALID);
        assert_eq!(http(401).exit_code(), EXIT_AUTH);
        assert_eq!(http(403).exit_code(), EXIT_AUTH);
        assert_eq!(http(500).exit_code(), EXIT_UNAVAILABLE);
        assert_eq!(http(503).exit_code(), EXIT_UNAVAILABLE);
        assert_eq!(CliError::BrokenChain(3).exit_code(), EXIT_BROKEN_CHAIN);
    }

    #[test]
    fn events_from_lines_or_array() {
        let lines = parse_events("{\"a\":1}\n\nnot json\n{\"b\":2}\n").unwrap();
        let numbers: Vec<_> = lines.iter().map(|(n, e)| (*n, e.is_ok())).collect();
        assert_eq!(numbers, [(1, true), (3, false), (4, true)]);
        let array = parse_events(" [{\"a\":1},{\"b\":2}]").unwrap();
        assert_eq!(array.len(), 2);
        assert!(parse_events("[{").is_err());
    }

    #[test]
    fn usage_errors_exit_1_and_help_exits_0() {
        let mut input = std::io::empty();
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let io = Io {
            input: &mut input,
            out: &mut out,
            err: &mut err,
        };
        assert_eq!(run(["itt", "frobnicate"], io), EXIT_INVALID);
        let mut input = std::io::empty();
        let io = Io {
            input: &mut input,
            out: &mut out,
            err: &mut err,
        };
        assert_eq!(run(["itt", "--help"], io), EXIT_OK);
    }
}
