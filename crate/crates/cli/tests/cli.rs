//! The `itt` client against a live in-process server.

use std::cell::RefCell;
use std::net::SocketAddr;
use std::sync::Arc;

use itt_cli::{run, Io, EXIT_AUTH, EXIT_BROKEN_CHAIN, EXIT_INVALID, EXIT_OK, EXIT_UNAVAILABLE};
use itt_core::identity::{IdentityConfig, NewUser};
use itt_core::{ManualClock, SqliteStore};
use itt_gateway::{AppState, Mode};
use itt_testkit::criteria::CHEAP_KDF;
use itt_testkit::fixture::{ts, EPOCH};

struct Server {
    addr: SocketAddr,
    state: AppState,
    dir: tempfile::TempDir,
    token: RefCell<Option<String>>,
}

const MONITOR_SECRET: &str = "monitor-secret-1";

fn start() -> Server {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(SqliteStore::open(dir.path().join("itt.db")).unwrap());
    let clock = ManualClock::new(ts(EPOCH + 30 * 86_400));
    let state = AppState::over_sqlite(
        store,
        Arc::new(clock),
        vec![9; 32],
        IdentityConfig {
            kdf: CHEAP_KDF,
            ..Default::default()
        },
    )
    .unwrap();
    state
        .identity
        .bootstrap_admin("root", "root-password")
        .unwrap();
    state
        .identity
        .set_monitor_credential("mon", MONITOR_SECRET)
        .unwrap();
    let app = itt_gateway::app(state.clone(), Mode::All, &[]);
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    listener.set_nonblocking(true).unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    Server {
        addr,
        state,
        dir,
        token: RefCell::new(None),
    }
}

struct Outcome {
    code: u8,
    out: String,
    err: String,
}

fn run_itt(args: Vec<String>, stdin: &str) -> Outcome {
    let mut input = stdin.as_bytes();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(
        args,
        Io {
            input: &mut input,
            out: &mut out,
            err: &mut err,
        },
    );
    Outcome {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

impl Server {
    fn itt(&self, args: &[&str], stdin: &str) -> Outcome {
        let mut full = vec![
            "itt".to_owned(),
            "--endpoint".into(),
            format!("http://{}", self.addr),
        ];
        if let Some(token) = self.token.borrow().clone() {
            full.extend(["--token".to_owned(), token]);
        }
        full.extend(args.iter().map(|s| s.to_string()));
        run_itt(full, stdin)
    }

    /// Logs in through the client and uses the printed token from then on.
    fn login(&self, who: &str, password: &str) -> Outcome {
        let r = self.itt(
            &[
                "auth",
                "login",
                who,
                "--password-stdin",
                "--access-token-only",
            ],
            &format!("{password}\n"),
        );
        if r.code == EXIT_OK {
            *self.token.borrow_mut() = Some(r.out.trim().to_owned());
        }
        r
    }

    fn monitor<'a>(&self, args: &[&'a str]) -> Vec<&'a str> {
        let mut v = vec!["--basic-id", "mon", "--basic-secret", MONITOR_SECRET];
        v.extend_from_slice(args);
        v
    }

    fn add_user(&self, main: &str) {
        self.state
            .identity
            .create_user(
                "root",
                NewUser {
                    main_id: main.into(),
                    secondary_ids: Default::default(),
                    password: format!("{main}-password"),
                    is_admin: false,
                },
            )
            .unwrap();
    }

    fn entries(&self) -> itt_core::ChainVerdict {
        self.state.logs.verify_chain().unwrap()
    }
}

fn occurred() -> String {
    ts(EPOCH + 29 * 86_400).to_string()
}

#[test]
fn emit_then_query_as_owner() {
    let s = start();
    s.add_user("alice");
    s.add_user("bob");
    let when = occurred();
    let r = s.itt(
        &s.monitor(&[
            "log",
            "emit",
            "--owner",
            "alice",
            "--consumer",
            "bob",
            "--tool",
            "git",
            "--category",
            "commits",
            "--occurred-at",
            &when,
        ]),
        "",
    );
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let entry: serde_json::Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(entry["seq"], 1);

    let r = s.itt(
        &["auth", "login", "alice", "--password-stdin"],
        "alice-password\n",
    );
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let pair: serde_json::Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(pair["principal"], "alice");
    assert!(!r.out.contains("alice-password"));
    let r = s.login("alice", "alice-password");
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert_eq!(r.out.trim().split('.').count(), 3, "a bare JWT");

    let r = s.itt(&["query", "summary"], "");
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let summary: serde_json::Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(summary["total"], 1);

    let r = s.itt(
        &["query", "logs", "--consumer", "bob", "--order", "asc"],
        "",
    );
    let page: serde_json::Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(page["total_count"], 1);
    assert_eq!(page["entries"][0], entry);

    let report = s.dir.path().join("report.html");
    let r = s.itt(&["query", "export", "--out", report.to_str().unwrap()], "");
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert!(std::fs::read_to_string(&report).unwrap().contains("<html"));

    let r = s.itt(&["auth", "logout"], "");
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let r = s.itt(&["query", "summary"], "");
    assert_eq!(r.code, EXIT_AUTH);
    assert!(r.err.contains("token_revoked"), "{}", r.err);
}

#[test]
fn import_counts_and_stops() {
    let s = start();
    s.add_user("alice");
    let good = format!(
        r#"{{"occurred_at":"{}","owner":"alice","consumer":"alice","tool":"t","data_category":"c","access_kind":"read"}}"#,
        occurred()
    );
    let bad = r#"{"owner":"alice"}"#;
    let unknown = good.replace("\"owner\":\"alice\"", "\"owner\":\"stranger\"");
    let file = s.dir.path().join("events.jsonl");
    std::fs::write(
        &file,
        format!("{good}\n{bad}\n{good}\nnot json\n{good}\n{unknown}\n{good}\n"),
    )
    .unwrap();
    let path = file.to_str().unwrap();

    let r = s.itt(&s.monitor(&["log", "import", path]), "");
    assert_eq!(r.code, EXIT_INVALID);
    assert_eq!(r.out.trim(), "imported=1 failed=1");
    assert!(r.err.contains("events.jsonl:2"), "{}", r.err);

    let r = s.itt(
        &s.monitor(&["log", "import", path, "--continue-on-error"]),
        "",
    );
    assert_eq!(r.code, EXIT_INVALID);
    assert_eq!(r.out.trim(), "imported=4 failed=3");

    let r = s.itt(
        &s.monitor(&["log", "import", "-"]),
        &format!("[{good},{good}]"),
    );
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert_eq!(r.out.trim(), "imported=2 failed=0");
    assert_eq!(s.entries(), itt_core::ChainVerdict::Ok { entries: 7 });
}

#[test]
fn exit_codes() {
    let s = start();
    s.add_user("alice");
    let when = occurred();
    // missing monitor credentials
    let r = s.itt(
        &[
            "log",
            "emit",
            "--owner",
            "a",
            "--consumer",
            "b",
            "--tool",
            "t",
            "--category",
            "c",
        ],
        "",
    );
    assert_eq!(r.code, EXIT_AUTH);
    // wrong monitor secret
    let r = s.itt(
        &[
            "--basic-id",
            "mon",
            "--basic-secret",
            "nope-nope",
            "log",
            "emit",
            "--owner",
            "alice",
            "--consumer",
            "alice",
            "--tool",
            "t",
            "--category",
            "c",
            "--occurred-at",
            &when,
        ],
        "",
    );
    assert_eq!(r.code, EXIT_AUTH);
    // validation failures are caught before any request
    let before = s.entries();
    let r = s.itt(
        &s.monitor(&[
            "log",
            "emit",
            "--owner",
            "alice",
            "--consumer",
            "alice",
            "--tool",
            "t",
            "--category",
            "c",
            "--access-kind",
            "write",
        ]),
        "",
    );
    assert_eq!(r.code, EXIT_INVALID);
    assert!(r.err.contains("access_kind"), "{}", r.err);
    let r = s.itt(
        &s.monitor(&[
            "log",
            "emit",
            "--owner",
            " ",
            "--consumer",
            "alice",
            "--tool",
            "t",
            "--category",
            "c",
        ]),
        "",
    );
    assert_eq!(r.code, EXIT_INVALID);
    assert!(r.err.contains("owner"), "{}", r.err);
    let r = s.itt(
        &s.monitor(&[
            "log",
            "emit",
            "--consumer",
            "alice",
            "--tool",
            "t",
            "--category",
            "c",
        ]),
        "",
    );
    assert_eq!(r.code, EXIT_INVALID);
    assert_eq!(s.entries(), before);
    // a rule only the server knows
    let r = s.itt(
        &s.monitor(&[
            "log",
            "emit",
            "--owner",
            "stranger",
            "--consumer",
            "alice",
            "--tool",
            "t",
            "--category",
            "c",
            "--occurred-at",
            &when,
        ]),
        "",
    );
    assert_eq!(r.code, EXIT_INVALID);
    assert!(r.err.contains("unknown_identifier"), "{}", r.err);
    // failed login, then no token at all
    assert_eq!(s.login("alice", "wrong-password").code, EXIT_AUTH);
    assert_eq!(s.itt(&["query", "summary"], "").code, EXIT_AUTH);
    // admin-only routes as a plain user
    assert_eq!(s.login("alice", "alice-password").code, EXIT_OK);
    assert_eq!(s.itt(&["verify-chain"], "").code, EXIT_AUTH);
    let r = s.itt(
        &["user", "create", "eve", "--password-stdin"],
        "eve-password\n",
    );
    assert_eq!(r.code, EXIT_AUTH);
    // unknown flag
    assert_eq!(s.itt(&["query", "logs", "--bogus"], "").code, EXIT_INVALID);

    // nothing listens on a freshly closed port
    let closed = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap();
    let args = [
        "itt",
        "--endpoint",
        &format!("http://{closed}"),
        "--token",
        "x",
        "query",
        "summary",
    ];
    let r = run_itt(args.iter().map(|s| s.to_string()).collect(), "");
    assert_eq!(r.code, EXIT_UNAVAILABLE);
}

#[test]
fn users_policies_and_chain() {
    let s = start();
    let r = s.login("root", "root-password");
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let r = s.itt(
        &[
            "user",
            "create",
            "carol",
            "--secondary",
            "carol@corp",
            "--password-stdin",
        ],
        "carol-password\n",
    );
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert!(!r.out.contains("carol-password"));
    assert!(!r.out.contains("argon2"));
    let r = s.itt(&["user", "update", "carol", "--secondary", "c.x"], "");
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert!(r.out.contains("c.x"));
    let r = s.itt(
        &[
            "user",
            "create",
            "dave",
            "--secondary",
            "c.x",
            "--password-stdin",
        ],
        "dave-password\n",
    );
    assert_eq!(r.code, EXIT_INVALID, "duplicate identifier is a 409");
    assert!(r.err.contains("\"c.x\""), "collision not named: {}", r.err);

    let r = s.itt(
        &[
            "policy",
            "set",
            "--subject",
            "*",
            "--category",
            "calendar",
            "--effect",
            "deny",
        ],
        "",
    );
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let rule: serde_json::Value = serde_json::from_str(&r.out).unwrap();
    let r = s.itt(
        &s.monitor(&[
            "policy",
            "evaluate",
            "--owner",
            "root",
            "--consumer",
            "c.x",
            "--category",
            "calendar",
        ]),
        "",
    );
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert!(r.out.contains("\"deny\""));
    let r = s.itt(
        &["policy", "delete", rule["policy_id"].as_str().unwrap()],
        "",
    );
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert_eq!(s.itt(&["policy", "list"], "").out.trim(), "[]");

    let when = occurred();
    let r = s.itt(
        &s.monitor(&[
            "log",
            "emit",
            "--owner",
            "root",
            "--consumer",
            "c.x",
            "--tool",
            "t",
            "--category",
            "c",
            "--occurred-at",
            &when,
        ]),
        "",
    );
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let r = s.itt(&["verify-chain"], "");
    assert_eq!(r.code, EXIT_OK, "{}", r.err);

    let db = s.dir.path().join("itt.db");
    itt_testkit::tamper::flip_random_byte(&db, 1, &mut itt_testkit::fixture::rng(5)).unwrap();
    let r = s.itt(&["verify-chain"], "");
    assert_eq!(r.code, EXIT_BROKEN_CHAIN, "{}", r.out);
    assert!(r.out.contains("broken"));
}
