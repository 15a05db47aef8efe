//! The OpenAPI 3.1 description of every route, served verbatim.

pub const DOCUMENT: &str = include_str!("openapi.json");

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use serde_json::Value;

    use super::DOCUMENT;
    use crate::routes::ROUTES;

    fn doc() -> Value {
        serde_json::from_str(DOCUMENT).unwrap()
    }

    fn resolve<'a>(doc: &'a Value, pointer: &str) -> &'a Value {
        doc.pointer(pointer.trim_start_matches('#'))
            .unwrap_or_else(|| panic!("dangling reference {pointer}"))
    }

    #[test]
    fn documents_exactly_the_routed_operations() {
        let doc = doc();
        let mut documented = BTreeSet::new();
        for (path, item) in doc["paths"].as_object().unwrap() {
            for (method, op) in item.as_object().unwrap() {
                if method == "parameters" {
                    continue;
                }
                documented.insert((
                    method.to_uppercase(),
                    path.clone(),
                    op["operationId"].as_str().unwrap().to_owned(),
                ));
            }
        }
        let routed: BTreeSet<_> = ROUTES
            .iter()
            .map(|r| {
                (
                    r.method.to_owned(),
                    r.path.to_owned(),
                    r.operation_id.to_owned(),
                )
            })
            .collect();
        assert_eq!(documented, routed);
    }

    #[test]
    fn auth_class_and_security_match_the_route_table() {
        let doc = doc();
        for r in ROUTES {
            let op = &doc["paths"][r.path][r.method.to_lowercase()];
            let class = serde_json::to_value(r.class).unwrap();
            assert_eq!(op["x-auth-class"], class, "{} {}", r.method, r.path);
            let scheme = op["security"]
                .as_array()
                .unwrap()
                .first()
                .and_then(|s| s.as_object())
                .and_then(|s| s.keys().next().cloned());
            let expected = match class.as_str().unwrap() {
                "public" => None,
                "ingest" => Some("monitorBasic".to_owned()),
                _ => Some("bearer".to_owned()),
            };
            assert_eq!(scheme, expected, "{} {}", r.method, r.path);
            if expected.is_some() {
                assert!(
                    op["responses"].get("401").is_some(),
                    "{} {} lacks 401",
                    r.method,
                    r.path
                );
            }
        }
    }

    #[test]
    fn every_reference_resolves() {
        fn walk<'a>(v: &'a Value, out: &mut Vec<&'a str>) {
            match v {
                Value::Object(map) => {
                    if let Some(Value::String(r)) = map.get("$ref") {
                        out.push(r);
                    }
                    map.values().for_each(|v| walk(v, out));
                }
                Value::Array(items) => items.iter().for_each(|v| walk(v, out)),
                _ => {}
            }
        }
        let doc = doc();
        let mut refs = Vec::new();
        walk(&doc, &mut refs);
        assert!(!refs.is_empty());
        for r in refs {
            resolve(&doc, r);
        }
    }

    #[test]
    fn entry_schema_lists_every_serialized_field() {
        let doc = doc();
        let schema = resolve(&doc, "#/components/schemas/UsageLogEntry");
        let documented: BTreeSet<_> = schema["properties"]
            .as_object()
            .unwrap()
            .keys()
            .cloned()
            .collect();
        let required: BTreeSet<_> = schema["required"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap().to_owned())
            .collect();
        let entry = itt_core::UsageLogEntry {
            entry_id: String::new(),
            seq: 0,
            occurred_at: itt_core::Timestamp::from_unix(0).unwrap(),
            recorded_at: itt_core::Timestamp::from_unix(0).unwrap(),
            owner: String::new(),
            consumer: String::new(),
            tool: String::new(),
            data_category: String::new(),
            purpose: String::new(),
            access_kind: itt_core::AccessKind::Read,
            policy_flag: itt_core::PolicyFlag::None,
            chain_hash: String::new(),
        };
        let serialized: BTreeSet<_> = serde_json::to_value(entry)
            .unwrap()
            .as_object()
            .unwrap()
            .keys()
            .cloned()
            .collect();
        assert_eq!(documented, serialized);
        assert_eq!(required, serialized);
    }

    #[test]
    fn version_is_3_1() {
        assert_eq!(doc()["openapi"], "3.1.0");
    }
}
