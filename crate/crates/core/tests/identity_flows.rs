use std::collections::BTreeSet;

use itt_core::identity::{IdentityError, NewUser, TokenError};
use itt_core::storage::UserChanges;
use itt_core::{LogQuery, ManualClock, SqliteStore};
use itt_testkit::criteria;
use itt_testkit::fixture::{self, ts, EPOCH};

#[test]
fn token_lifecycle() {
    criteria::token_lifecycle(21, 50, 200).unwrap();
}

#[test]
fn attribution_registry() {
    criteria::attribution(22, 20, 5).unwrap();
}

#[test]
fn serialized_users_never_carry_credentials() {
    let clock = ManualClock::new(ts(EPOCH));
    let svc = criteria::identity_service(&clock).unwrap();
    svc.create_user(
        "root",
        NewUser {
            main_id: "vz".into(),
            secondary_ids: BTreeSet::from(["vz@example.org".to_owned()]),
            password: "password-1".into(),
            is_admin: false,
        },
    )
    .unwrap();
    for user in svc.list_users("root").unwrap() {
        let json = serde_json::to_string(&user).unwrap();
        assert!(!json.contains("argon2"), "{json}");
        assert!(!json.contains(&user.credential_hash));
        assert!(!format!("{user:?}").contains(&user.credential_hash));
    }
}

#[test]
fn sessions_die_with_password_change_and_deletion() {
    let clock = ManualClock::new(ts(EPOCH));
    let svc = criteria::identity_service(&clock).unwrap();
    let new = |id: &str| NewUser {
        main_id: id.into(),
        secondary_ids: BTreeSet::new(),
        password: "password-1".into(),
        is_admin: false,
    };
    svc.create_user("root", new("a")).unwrap();
    svc.create_user("root", new("b")).unwrap();
    let a = [
        svc.login("a", "password-1").unwrap(),
        svc.login("a", "password-1").unwrap(),
    ];
    let b = svc.login("b", "password-1").unwrap();
    svc.change_password("a", "password-1", "password-2")
        .unwrap();
    for pair in &a {
        for t in [&pair.access.token, &pair.refresh.token] {
            assert!(matches!(
                svc.verify_token(t),
                Err(IdentityError::Token(TokenError::Revoked))
            ));
        }
    }
    assert!(svc.verify_token(&b.access.token).is_ok());
    svc.delete_user("root", "b").unwrap();
    assert!(svc.verify_token(&b.access.token).is_err());
    assert!(svc.login("b", "password-1").is_err());
}

#[test]
fn deleting_a_user_keeps_the_log_intact() {
    let dir = tempfile::tempdir().unwrap();
    let sqlite = std::sync::Arc::new(SqliteStore::open(dir.path().join("x.db")).unwrap());
    let mut rng = fixture::rng(9);
    let owners = vec!["a".to_owned(), "b".to_owned()];
    let seeded = fixture::seed(sqlite.clone(), &mut rng, 50, &owners);
    let clock = ManualClock::new(ts(EPOCH));
    let svc = itt_core::IdentityService::new(
        sqlite,
        itt_core::identity::TokenSigner::new(vec![1; 32]),
        std::sync::Arc::new(clock),
        itt_core::IdentityConfig {
            kdf: criteria::CHEAP_KDF,
            ..Default::default()
        },
    )
    .unwrap();
    svc.bootstrap_admin("root", "root-password").unwrap();
    for id in ["a", "b"] {
        svc.create_user(
            "root",
            NewUser {
                main_id: id.into(),
                secondary_ids: BTreeSet::new(),
                password: "password-1".into(),
                is_admin: false,
            },
        )
        .unwrap();
    }
    let before = seeded.store.query(&LogQuery::for_owner("b")).unwrap();
    svc.delete_user("root", "a").unwrap();
    assert!(matches!(
        svc.resolve_identifier("a"),
        Err(IdentityError::UnknownIdentifier(_))
    ));
    assert_eq!(
        seeded.store.query(&LogQuery::for_owner("b")).unwrap(),
        before
    );
    assert!(
        seeded
            .store
            .query(&LogQuery::for_owner("a"))
            .unwrap()
            .total_count
            > 0
    );
    assert!(matches!(
        seeded.store.verify_chain().unwrap(),
        itt_core::ChainVerdict::Ok { entries: 50 }
    ));
}

#[test]
fn self_service_limited_to_secondary_ids() {
    let clock = ManualClock::new(ts(EPOCH));
    let svc = criteria::identity_service(&clock).unwrap();
    svc.create_user(
        "root",
        NewUser {
            main_id: "a".into(),
            secondary_ids: BTreeSet::new(),
            password: "password-1".into(),
            is_admin: false,
        },
    )
    .unwrap();
    let taken = UserChanges {
        secondary_ids: Some(BTreeSet::from(["root".to_owned()])),
        is_admin: None,
    };
    assert!(matches!(
        svc.update_user("a", "a", taken),
        Err(IdentityError::DuplicateIdentifier(id)) if id == "root"
    ));
    assert!(matches!(
        svc.update_user("a", "root", UserChanges::default()),
        Err(IdentityError::NotAuthorized)
    ));
}
