//! Store-level acceptance checks. Each returns a one-line detail on success
//! and a description of the first discrepancy on failure.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use itt_core::chain::ExecMode;
use itt_core::identity::{
    IdentityConfig, IdentityError, IdentityService, KdfParams, NewUser, TokenError, TokenSigner,
};
use itt_core::model::{Effect, UsagePolicy};
use itt_core::{ChainVerdict, LogStore, ManualClock, PolicyEngine, SqliteStore};
use rand::seq::IndexedRandom;
use rand::Rng;

use crate::fixture::{self, ts, EPOCH, SPAN_DAYS};
use crate::{oracle, tamper};

pub type Outcome = Result<String, String>;

fn fail<T>(msg: impl Into<String>) -> Result<T, String> {
    Err(msg.into())
}

pub fn query_equivalence(seed: u64, entries: usize, owners: usize, queries: usize) -> Outcome {
    let started = Instant::now();
    let mut rng = fixture::rng(seed);
    let owner_ids = fixture::owners(owners);
    let sqlite = Arc::new(SqliteStore::open_in_memory().map_err(|e| e.to_string())?);
    let seeded = fixture::seed(sqlite, &mut rng, entries, &owner_ids);
    let mut nonempty = 0;
    for i in 0..queries {
        let q = fixture::random_query(&mut rng, &owner_ids);
        let page = seeded
            .store
            .query(&q)
            .map_err(|e| format!("query {i}: {e}"))?;
        let (want, want_total) = oracle::query(&seeded.entries, &q);
        if page.total_count != want_total {
            return fail(format!(
                "query {i} {q:?}: total {} != oracle {want_total}",
                page.total_count
            ));
        }
        if page.entries != want {
            return fail(format!("query {i} {q:?}: page differs from oracle"));
        }
        if page.entries.iter().any(|e| e.owner != q.owner) {
            return fail(format!("query {i}: foreign owner in result"));
        }
        nonempty += usize::from(!want.is_empty());
    }
    let secs = started.elapsed().as_secs_f64();
    if secs >= 30.0 {
        return fail(format!("took {secs:.1}s, limit 30s"));
    }
    Ok(format!(
        "{queries} queries over {entries} entries exact ({nonempty} non-empty pages), {secs:.2}s"
    ))
}

pub fn summary_equivalence(seed: u64, entries: usize, owners: usize, nows: usize) -> Outcome {
    let mut rng = fixture::rng(seed);
    let owner_ids = fixture::owners(owners);
    let sqlite = Arc::new(SqliteStore::open_in_memory().map_err(|e| e.to_string())?);
    let seeded = fixture::seed(sqlite, &mut rng, entries, &owner_ids);
    let seq_store = LogStore::new(seeded.sqlite.clone(), Arc::new(seeded.clock.clone()))
        .with_exec_mode(ExecMode::Sequential);
    let mut checked = 0;
    for i in 0..nows {
        // whole-second instants across and slightly beyond the fixture span
        let now = ts(EPOCH + rng.random_range(-86_400..(SPAN_DAYS + 8) * 86_400));
        let owner = if i % 10 == 9 {
            "nobody".to_owned()
        } else {
            owner_ids.choose(&mut rng).unwrap().clone()
        };
        let want = oracle::summary(&seeded.entries, &owner, now, 7);
        for (mode, store) in [("parallel", &seeded.store), ("sequential", &seq_store)] {
            let got = store.summarize(&owner, now, 7).map_err(|e| e.to_string())?;
            if got != want {
                return fail(format!(
                    "{mode} summary for {owner} at {now} differs from oracle"
                ));
            }
            if !got.sums_agree() {
                return fail(format!(
                    "{mode} summary for {owner} at {now}: sums disagree"
                ));
            }
        }
        checked += 1;
    }
    Ok(format!(
        "{checked} windows equal to brute force, sum identity holds"
    ))
}

pub fn tamper_evidence(seed: u64, dir: &Path, entries: usize, trials: usize) -> Outcome {
    let mut rng = fixture::rng(seed);
    let path = dir.join("tamper.db");
    let sqlite = Arc::new(SqliteStore::open(&path).map_err(|e| e.to_string())?);
    let seeded = fixture::seed(sqlite, &mut rng, entries, &fixture::owners(10));
    let seq_store = LogStore::new(seeded.sqlite.clone(), Arc::new(seeded.clock.clone()))
        .with_exec_mode(ExecMode::Sequential);

    let expect_ok = |when: &str| -> Result<(), String> {
        match seeded.store.verify_chain().map_err(|e| e.to_string())? {
            ChainVerdict::Ok { entries: n } if n == entries as u64 => Ok(()),
            other => fail(format!("{when}: expected ok, got {other:?}")),
        }
    };
    expect_ok("untampered")?;
    let stored: Vec<String> = seeded
        .entries
        .iter()
        .map(|e| e.chain_hash.clone())
        .collect();
    if oracle::chain_hashes(&seeded.entries) != stored {
        return fail("stored chain hashes differ from independent recomputation");
    }

    let mut detected = 0;
    for trial in 0..trials {
        let position = rng.random_range(1..=entries as u64);
        let m = tamper::flip_random_byte(&path, position, &mut rng).map_err(|e| e.to_string())?;
        for store in [&seeded.store, &seq_store] {
            match store.verify_chain().map_err(|e| e.to_string())? {
                ChainVerdict::Broken { first_bad_seq, .. } if first_bad_seq == position => {}
                other => {
                    return fail(format!(
                        "trial {trial}: flipped byte {} of {} at seq {position}, got {other:?}",
                        m.byte, m.column
                    ))
                }
            }
        }
        detected += 1;
        tamper::undo(&path, &m).map_err(|e| e.to_string())?;
        expect_ok(&format!("after undoing trial {trial}"))?;
    }
    Ok(format!(
        "{detected}/{trials} single-byte mutations located exactly, clean store verifies"
    ))
}

pub fn concurrent_appends(dir: &Path, writers: usize, per_writer: usize, reps: usize) -> Outcome {
    for rep in 0..reps {
        let path = dir.join(format!("concurrency-{rep}.db"));
        let sqlite = Arc::new(SqliteStore::open(&path).map_err(|e| e.to_string())?);
        let (store, _) = fixture::store_with_clock(sqlite);
        let owners = fixture::owners(writers);
        let mut seqs: Vec<u64> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..writers)
                .map(|w| {
                    let store = &store;
                    let owners = &owners;
                    s.spawn(move || {
                        let mut rng = fixture::rng((rep * writers + w) as u64);
                        (0..per_writer)
                            .map(|_| {
                                store
                                    .append(fixture::random_draft(&mut rng, owners), Effect::Allow)
                                    .map(|e| e.seq)
                            })
                            .collect::<Result<Vec<_>, _>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("writer panicked"))
                .collect::<Result<Vec<Vec<u64>>, _>>()
        })
        .map_err(|e| format!("rep {rep}: {e}"))?
        .into_iter()
        .flatten()
        .collect();
        seqs.sort_unstable();
        let total = (writers * per_writer) as u64;
        if seqs != (1..=total).collect::<Vec<_>>() {
            return fail(format!("rep {rep}: seq set is not exactly 1..={total}"));
        }
        match store.verify_chain().map_err(|e| e.to_string())? {
            ChainVerdict::Ok { entries } if entries == total => {}
            other => return fail(format!("rep {rep}: {other:?}")),
        }
    }
    Ok(format!(
        "{reps} reps of {writers}x{per_writer}: seq exactly 1..={}, chain ok",
        writers * per_writer
    ))
}

pub const CHEAP_KDF: KdfParams = KdfParams {
    memory_kib: 64,
    iterations: 1,
    parallelism: 1,
};

pub fn identity_service(clock: &ManualClock) -> Result<IdentityService, String> {
    let svc = IdentityService::new(
        Arc::new(SqliteStore::open_in_memory().map_err(|e| e.to_string())?),
        TokenSigner::new(vec![0x5a; 32]),
        Arc::new(clock.clone()),
        IdentityConfig {
            kdf: CHEAP_KDF,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    svc.bootstrap_admin("root", "root-password")
        .map_err(|e| e.to_string())?;
    Ok(svc)
}

fn expect_token_err(
    what: &str,
    got: Result<impl std::fmt::Debug, IdentityError>,
    want: TokenError,
) -> Result<(), String> {
    match got {
        Err(IdentityError::Token(e)) if e == want => Ok(()),
        other => fail(format!("{what}: expected {want:?}, got {other:?}")),
    }
}

pub fn token_lifecycle(seed: u64, tamper_positions: usize, repeat_verifies: usize) -> Outcome {
    let mut rng = fixture::rng(seed);
    let clock = ManualClock::new(ts(EPOCH));
    let svc = identity_service(&clock)?;
    let ttl = svc.config().access_ttl_secs;

    let pair = svc
        .login("root", "root-password")
        .map_err(|e| e.to_string())?;
    let v = svc
        .verify_token(&pair.access.token)
        .map_err(|e| format!("fresh token: {e}"))?;
    if v.principal != "root" {
        return fail("principal mismatch");
    }
    svc.logout(&pair.access.token).map_err(|e| e.to_string())?;
    expect_token_err(
        "after logout",
        svc.verify_token(&pair.access.token),
        TokenError::Revoked,
    )?;
    expect_token_err(
        "paired refresh after logout",
        svc.refresh(&pair.refresh.token),
        TokenError::Revoked,
    )?;

    let pair = svc
        .login("root", "root-password")
        .map_err(|e| e.to_string())?;
    clock.advance(ttl - 1);
    svc.verify_token(&pair.access.token)
        .map_err(|e| format!("one second before expiry: {e}"))?;
    clock.advance(1);
    expect_token_err(
        "at expiry",
        svc.verify_token(&pair.access.token),
        TokenError::Expired,
    )?;

    let pair = svc
        .login("root", "root-password")
        .map_err(|e| e.to_string())?;
    let token = pair.access.token.as_bytes();
    let start = pair.access.token.find('.').unwrap() + 1;
    let end = pair.access.token.rfind('.').unwrap();
    const B64URL: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";
    for _ in 0..tamper_positions {
        let pos = rng.random_range(start..end);
        let mut bytes = token.to_vec();
        while bytes[pos] == token[pos] {
            bytes[pos] = *B64URL.choose(&mut rng).unwrap();
        }
        let tampered = String::from_utf8(bytes).unwrap();
        expect_token_err(
            &format!("payload byte {pos}"),
            svc.verify_token(&tampered),
            TokenError::BadSignature,
        )?;
    }

    let rotated = svc
        .refresh(&pair.refresh.token)
        .map_err(|e| e.to_string())?;
    svc.verify_token(&rotated.access.token)
        .map_err(|e| format!("rotated access: {e}"))?;
    expect_token_err(
        "prior access after rotation",
        svc.verify_token(&pair.access.token),
        TokenError::Revoked,
    )?;
    expect_token_err(
        "prior refresh reuse",
        svc.refresh(&pair.refresh.token),
        TokenError::Revoked,
    )?;

    for i in 0..repeat_verifies {
        if i % 100 == 0 {
            // new sessions and clock movement must not resurrect anything
            svc.login("root", "root-password")
                .map_err(|e| e.to_string())?;
            clock.advance(1);
        }
        expect_token_err(
            "revoked token re-verified",
            svc.verify_token(&pair.access.token),
            TokenError::Revoked,
        )?;
    }
    Ok(format!(
        "verify/logout/expiry/rotation as contracted, {tamper_positions} payload tampers rejected, {repeat_verifies} re-verifies stay revoked"
    ))
}

pub fn attribution(seed: u64, users: usize, max_ids: usize) -> Outcome {
    let mut rng = fixture::rng(seed);
    let clock = ManualClock::new(ts(EPOCH));
    let svc = identity_service(&clock)?;
    let mut registry: Vec<(String, Vec<String>)> = Vec::new();
    for u in 0..users {
        let main = format!("user{u:02}");
        let extra = rng.random_range(0..max_ids);
        let secondary: Vec<String> = (0..extra)
            .map(|k| match k % 3 {
                0 => format!("{main}@example.org"),
                1 => format!("{main}.gh"),
                _ => format!("{main}-alias{k}"),
            })
            .collect();
        svc.create_user(
            "root",
            NewUser {
                main_id: main.clone(),
                secondary_ids: secondary.iter().cloned().collect(),
                password: "password-1".into(),
                is_admin: false,
            },
        )
        .map_err(|e| format!("create {main}: {e}"))?;
        registry.push((main, secondary));
    }
    let mut identifiers = 0;
    for (main, secondary) in &registry {
        for id in std::iter::once(main).chain(secondary) {
            let got = svc
                .resolve_identifier(id)
                .map_err(|e| format!("resolve {id}: {e}"))?;
            if &got != main {
                return fail(format!("{id} resolved to {got}, expected {main}"));
            }
            let again = svc.resolve_identifier(&got).map_err(|e| e.to_string())?;
            if again != got {
                return fail(format!("resolve not idempotent on {id}"));
            }
            identifiers += 1;
        }
    }
    for probe in ["nobody", "user99", "user00@example.com", "USER00"] {
        match svc.resolve_identifier(probe) {
            Err(IdentityError::UnknownIdentifier(_)) => {}
            other => return fail(format!("unknown {probe}: got {other:?}")),
        }
    }
    let taken: BTreeSet<&String> = registry
        .iter()
        .flat_map(|(m, s)| std::iter::once(m).chain(s))
        .collect();
    for (n, id) in taken.iter().enumerate().step_by(7) {
        let clash = svc.create_user(
            "root",
            NewUser {
                main_id: format!("newcomer{n}"),
                secondary_ids: [format!("fresh{n}"), (*id).clone()].into(),
                password: "password-1".into(),
                is_admin: false,
            },
        );
        match clash {
            Err(IdentityError::DuplicateIdentifier(named)) if &named == *id => {}
            other => return fail(format!("duplicate {id}: got {other:?}")),
        }
        if svc.resolve_identifier(&format!("fresh{n}")).is_ok() {
            return fail("rejected registration left identifiers behind");
        }
    }
    Ok(format!("{users} users, {identifiers} identifiers resolve uniquely and idempotently; duplicates named"))
}

pub const POLICY_UNIVERSE: [(&str, &str, Effect); 4] = [
    ("X", "*", Effect::Allow),
    ("X", "c", Effect::Deny),
    ("*", "*", Effect::Deny),
    ("*", "c", Effect::Allow),
];
pub const POLICY_PROBES: [(&str, &str); 4] = [("X", "c"), ("X", "d"), ("Y", "c"), ("Y", "d")];

pub fn policy_truth_table() -> Outcome {
    let mut cases = 0;
    let mut denies = 0;
    for mask in 0u32..16 {
        let clock = ManualClock::new(ts(EPOCH));
        let engine = PolicyEngine::new(
            Arc::new(SqliteStore::open_in_memory().map_err(|e| e.to_string())?),
            Arc::new(clock.clone()),
        );
        let mut rules: Vec<UsagePolicy> = Vec::new();
        for (bit, (subject, category, effect)) in POLICY_UNIVERSE.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                rules.push(
                    engine
                        .set_policy("A", subject, category, *effect)
                        .map_err(|e| e.to_string())?,
                );
                clock.advance(1);
            }
        }
        for (consumer, category) in POLICY_PROBES {
            let got = engine
                .evaluate("A", consumer, category)
                .map_err(|e| e.to_string())?;
            let want = oracle::decide(&rules, "A", consumer, category);
            if got != want {
                return fail(format!(
                    "subset {mask:04b}, probe ({consumer},{category}): {got:?} != {want:?}"
                ));
            }
            let any_deny = rules
                .iter()
                .any(|r| r.effect == Effect::Deny && r.matches(consumer, category));
            if any_deny != (got.effect == Effect::Deny) {
                return fail(format!("subset {mask:04b}: deny dominance violated"));
            }
            denies += usize::from(any_deny);
            cases += 1;
        }
    }
    Ok(format!("{cases} cases exact ({denies} deny)"))
}
