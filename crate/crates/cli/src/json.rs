//! Byte-stable JSON output: sorted keys, two-space indent, floats with 17
//! significant digits in lowercase scientific notation, integers verbatim.

use serde::Serialize;
use serde_json::Value;

fn number(n: &serde_json::Number) -> String {
    if n.is_i64() || n.is_u64() {
        n.to_string()
    } else {
        match n.as_f64() {
            Some(x) if x.is_finite() => format!("{x:.16e}"),
            _ => "null".into(),
        }
    }
}

fn write(v: &Value, indent: usize, out: &mut String) {
    let pad = |k: usize| "  ".repeat(k);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => out.push_str(&number(n)),
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string")),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write(item, indent + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::to_string(k).expect("key"));
                out.push_str(": ");
                write(&map[k.as_str()], indent + 1, out);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

pub fn canonical(v: &Value) -> String {
    let mut out = String::new();
    write(v, 0, &mut out);
    out.push('\n');
    out
}

pub fn to_canonical<T: Serialize>(v: &T) -> Result<String, serde_json::Error> {
    Ok(canonical(&serde_json::to_value(v)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn formatting_is_fixed() {
        let v = json!({"b": 1, "a": [0.1, -2.5e-300, null], "c": {"z": true, "y": "s"}});
        let s = canonical(&v);
        assert_eq!(
            s,
            "{\n  \"a\": [\n    1.0000000000000001e-1,\n    -2.5000000000000000e-300,\n    null\n  ],\n  \"b\": 1,\n  \"c\": {\n    \"y\": \"s\",\n    \"z\": true\n  }\n}\n"
        );
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -1e-17] {
            let s = number(&serde_json::Number::from_f64(x).unwrap());
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn non_finite_becomes_null() {
        let v = serde_json::to_value(f64::NAN).unwrap();
        assert_eq!(canonical(&v), "null\n");
    }
}
