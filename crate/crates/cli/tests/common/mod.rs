#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn ftbn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ftbn"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

pub fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("bad JSON ({e}): {}", stdout(out)))
}

pub fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(name);
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

pub fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn type_matches(name: &str, v: &Value) -> bool {
    match name {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "number" => v.is_number(),
        "integer" => v.is_u64() || v.is_i64(),
        other => panic!("unsupported type {other}"),
    }
}

/// Checks `v` against the JSON Schema keywords used by the shipped schema
/// files, returning the path of the first violation.
pub fn conforms(s: &Value, v: &Value, at: &str) -> Result<(), String> {
    let fail = |why: &str| Err(format!("{at}: {why}"));
    let known = [
        "$schema", "$id", "title", "type", "properties", "required", "additionalProperties", "items",
        "enum", "minimum", "maximum", "exclusiveMinimum", "exclusiveMaximum", "minItems", "pattern",
    ];
    for key in s.as_object().unwrap().keys() {
        assert!(known.contains(&key.as_str()), "checker does not know keyword {key}");
    }
    if let Some(t) = s.get("type") {
        let ok = match t {
            Value::String(name) => type_matches(name, v),
            Value::Array(names) => names.iter().any(|n| type_matches(n.as_str().unwrap(), v)),
            _ => unreachable!(),
        };
        if !ok {
            return fail(&format!("expected type {t}, got {v}"));
        }
    }
    if let Some(options) = s.get("enum").and_then(Value::as_array) {
        if !options.contains(v) {
            return fail(&format!("{v} not in {options:?}"));
        }
    }
    if let Some(x) = v.as_f64() {
        let bound = |k: &str| s.get(k).and_then(Value::as_f64);
        if bound("minimum").is_some_and(|m| x < m)
            || bound("maximum").is_some_and(|m| x > m)
            || bound("exclusiveMinimum").is_some_and(|m| x <= m)
            || bound("exclusiveMaximum").is_some_and(|m| x >= m)
        {
            return fail(&format!("{x} out of range"));
        }
    }
    if let (Some(pattern), Some(text)) = (s.get("pattern").and_then(Value::as_str), v.as_str()) {
        // The only pattern in use is the identifier pattern.
        assert_eq!(pattern, "^[A-Za-z0-9_]+$");
        if text.is_empty() || !text.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return fail(&format!("{text:?} is not an identifier"));
        }
    }
    if let Some(items) = v.as_array() {
        if let Some(min) = s.get("minItems").and_then(Value::as_u64) {
            if (items.len() as u64) < min {
                return fail("too few items");
            }
        }
        if let Some(item_schema) = s.get("items") {
            for (i, item) in items.iter().enumerate() {
                conforms(item_schema, item, &format!("{at}[{i}]"))?;
            }
        }
    }
    if let Some(map) = v.as_object() {
        for key in s.get("required").and_then(Value::as_array).into_iter().flatten() {
            if !map.contains_key(key.as_str().unwrap()) {
                return fail(&format!("missing {key}"));
            }
        }
        let props = s.get("properties").and_then(Value::as_object);
        for (key, value) in map {
            let path = format!("{at}.{key}");
            match (props.and_then(|p| p.get(key)), s.get("additionalProperties")) {
                (Some(sub), _) => conforms(sub, value, &path)?,
                (None, Some(Value::Bool(false))) => return fail(&format!("unexpected key {key}")),
                (None, Some(extra @ Value::Object(_))) => conforms(extra, value, &path)?,
                (None, _) => {}
            }
        }
    }
    Ok(())
}

pub fn assert_conforms(schema_file: &str, v: &Value) {
    if let Err(e) = conforms(&schema(schema_file), v, "$") {
        panic!("{schema_file}: {e}");
    }
}
