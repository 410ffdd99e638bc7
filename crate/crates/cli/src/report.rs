//! JSON and CSV rendering. Rationals are always `"num/den"` strings.

use mixdio::arith::fmt_rat;
use mixdio::power::{Bracket, Value};
use mixdio::Error;
use num_rational::BigRational;
use serde_json::{json, Map, Value as Json};

pub const SCHEMA: &str = "mixdio/1";

pub fn rat(x: &BigRational) -> Json {
    Json::String(fmt_rat(x))
}

/// `{"lo", "hi"}`, plus `"exact"` when the endpoints agree.
pub fn bracket(b: &Bracket) -> Json {
    let mut m = Map::new();
    m.insert("lo".into(), rat(&b.lo));
    m.insert("hi".into(), rat(&b.hi));
    if let Some(v) = b.value() {
        m.insert("exact".into(), rat(v));
    }
    Json::Object(m)
}

/// A symbolic value: exact when rational, otherwise a bracket.
pub fn value(v: &Value, bits: u32) -> Json {
    match v.as_rational() {
        Some(r) => rat(&r),
        None => bracket(&v.bracket(bits)),
    }
}

pub fn float(x: Option<f64>) -> Json {
    x.map_or(Json::Null, Json::from)
}

pub fn document(command: &str, config: Json, result: Json) -> String {
    let doc = json!({
        "schema": SCHEMA,
        "command": command,
        "config": config,
        "result": result,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("reports serialize");
    s.push('\n');
    s
}

pub fn error_json(e: &Error) -> String {
    json!({
        "schema": SCHEMA,
        "error": { "kind": e.kind(), "message": e.to_string() },
    })
    .to_string()
}

/// Renders rows as CSV with a header line.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use mixdio::arith;

    #[test]
    fn rationals_render_as_strings() {
        assert_eq!(rat(&arith::rat(1, 1)), json!("1/1"));
        let b = bracket(&Bracket::exact(arith::rat(3, 4)));
        assert_eq!(b["exact"], json!("3/4"));
        assert_eq!(float(Some(f64::NAN)), Json::Null);
    }

    #[test]
    fn errors_carry_kind() {
        let s = error_json(&Error::Undefined("x".into()));
        let v: Json = serde_json::from_str(&s).unwrap();
        assert_eq!(v["error"]["kind"], "undefined");
        assert_eq!(v["schema"], SCHEMA);
    }
}
