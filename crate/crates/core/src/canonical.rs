//! Canonical JSON output: object keys sorted, floats written with 17
//! significant digits, no insignificant whitespace beyond a trailing newline.
//!
//! Two equal values always produce byte-identical documents, and every float
//! parses back to the same bits.

use std::fmt::Write;

use serde::Serialize;
use serde_json::Value;

/// Serializes `value` canonically.
pub fn to_string<T: Serialize + ?Sized>(value: &T) -> String {
    // serde_json's Map is a BTreeMap without the `preserve_order` feature, so
    // keys come out sorted.
    let tree = serde_json::to_value(value).expect("serializable data model");
    let mut out = String::new();
    write_value(&mut out, &tree);
    out.push('\n');
    out
}

/// Formats a float with 17 significant digits in scientific notation.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_value(out: &mut String, v: &Value) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                write!(out, "{u}").unwrap();
            } else if let Some(i) = n.as_i64() {
                write!(out, "{i}").unwrap();
            } else {
                out.push_str(&format_float(n.as_f64().expect("finite float")));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).unwrap()),
        Value::Array(items) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write_value(out, item);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (k, (key, item)) in map.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).unwrap());
                out.push(':');
                write_value(out, item);
            }
            out.push('}');
        }
    }
}
