//! Line-delimited test files.
//!
//! ```text
//! {"name":"T1","description":"...","when":[{"name":"DETECT","payload":{}}],
//!  "expect":{"vehicle":"PossibleVRUPresent"},
//!  "match":{"light":"*","detected":1,"located":0,"tx":[0,1]}}
//! ```
//!
//! A match field is `"*"`, a single integer, or a list of integers.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use serde_json::Value as Json;
use thiserror::Error;

use super::{CodeMatch, FieldMatch, TestSpec};
use crate::chart::{Event, ENV_ORIGIN};
use crate::sim::io::{parse_payload, write_payload, Fields};

#[derive(Debug, Error)]
pub enum SpecIoError {
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn render_field(m: &FieldMatch) -> String {
    match m {
        FieldMatch::Any => "\"*\"".into(),
        FieldMatch::One(v) => v.to_string(),
        FieldMatch::Set(vs) => {
            let items: Vec<String> = vs.iter().map(u8::to_string).collect();
            format!("[{}]", items.join(","))
        }
    }
}

pub fn render_spec(spec: &TestSpec) -> String {
    let mut out = format!(
        "{{\"name\":{},\"description\":{},\"when\":[",
        quote(&spec.name),
        quote(&spec.description)
    );
    for (i, e) in spec.when.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!("{{\"name\":{},\"payload\":", quote(&e.name)));
        write_payload(&mut out, &e.payload);
        out.push('}');
    }
    out.push_str("],\"expect\":{");
    let expect: Vec<String> = spec
        .expect
        .iter()
        .map(|(c, s)| format!("{}:{}", quote(c), quote(s)))
        .collect();
    out.push_str(&expect.join(","));
    let m = &spec.code_match;
    out.push_str(&format!(
        "}},\"match\":{{\"light\":{},\"detected\":{},\"located\":{},\"tx\":{}}}}}",
        render_field(&m.light),
        render_field(&m.detected),
        render_field(&m.located),
        render_field(&m.tx)
    ));
    out
}

pub fn write_specs<W: Write>(specs: &[TestSpec], mut sink: W) -> io::Result<()> {
    for s in specs {
        sink.write_all(render_spec(s).as_bytes())?;
        sink.write_all(b"\n")?;
    }
    sink.flush()
}

pub fn read_specs<R: BufRead>(source: R) -> Result<Vec<TestSpec>, SpecIoError> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let spec = parse_spec(&line).map_err(|message| SpecIoError::Schema { line: i + 1, message })?;
        out.push(spec);
    }
    Ok(out)
}

fn small_int(json: &Json, field: &str) -> Result<u8, String> {
    json.as_u64()
        .and_then(|v| u8::try_from(v).ok())
        .ok_or_else(|| format!("match field `{field}` must hold small non-negative integers"))
}

fn parse_field(json: &Json, field: &str) -> Result<FieldMatch, String> {
    match json {
        Json::String(s) if s == "*" => Ok(FieldMatch::Any),
        Json::Array(items) => items
            .iter()
            .map(|v| small_int(v, field))
            .collect::<Result<_, _>>()
            .map(FieldMatch::Set),
        other => small_int(other, field).map(FieldMatch::One),
    }
}

fn parse_spec(line: &str) -> Result<TestSpec, String> {
    let json: Json = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let f = Fields::new(&json, &["name", "description", "when", "expect", "match"])?;

    let when = f
        .get("when")?
        .as_array()
        .ok_or("field `when` must be an array")?
        .iter()
        .map(|e| {
            let ef = Fields::new(e, &["name", "payload"])?;
            let payload = match ef.get("payload") {
                Ok(p) => parse_payload(p)?,
                Err(_) => Default::default(),
            };
            Ok(Event {
                name: ef.str("name")?.to_string(),
                payload,
                origin: ENV_ORIGIN.to_string(),
            })
        })
        .collect::<Result<Vec<_>, String>>()?;

    let expect: BTreeMap<String, String> = f
        .get("expect")?
        .as_object()
        .ok_or("field `expect` must be an object")?
        .iter()
        .map(|(c, s)| {
            s.as_str()
                .map(|s| (c.clone(), s.to_string()))
                .ok_or_else(|| format!("expected state for `{c}` must be a string"))
        })
        .collect::<Result<_, String>>()?;

    let mf = Fields::new(f.get("match")?, &["light", "detected", "located", "tx"])?;
    let field = |name: &str| match mf.get(name) {
        Ok(v) => parse_field(v, name),
        Err(_) => Ok(FieldMatch::Any),
    };
    let code_match = CodeMatch {
        light: field("light")?,
        detected: field("detected")?,
        located: field("located")?,
        tx: field("tx")?,
    };
    code_match.check()?;

    Ok(TestSpec {
        name: f.str("name")?.to_string(),
        description: f.str("description").unwrap_or_default().to_string(),
        when,
        expect,
        code_match,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::profile1_suite;

    #[test]
    fn suite_round_trip() {
        let suite = profile1_suite();
        let mut buf = Vec::new();
        write_specs(&suite, &mut buf).unwrap();
        assert_eq!(read_specs(buf.as_slice()).unwrap(), suite);
    }

    #[test]
    fn renders_match_forms() {
        let line = render_spec(&profile1_suite()[4]);
        assert!(line.contains("\"match\":{\"light\":[6,7],\"detected\":1,\"located\":1,\"tx\":0}"), "{line}");
        assert!(render_spec(&profile1_suite()[0]).contains("\"light\":\"*\""));
    }

    #[test]
    fn omitted_match_fields_are_wildcards() {
        let specs = read_specs(&br#"{"name":"x","when":[{"name":"DETECT"}],"expect":{},"match":{"tx":1}}"#[..]).unwrap();
        assert_eq!(specs[0].code_match.light, FieldMatch::Any);
        assert_eq!(specs[0].code_match.tx, FieldMatch::One(1));
        assert!(specs[0].when[0].payload.is_empty());
    }

    #[test]
    fn schema_errors_carry_line() {
        let text = "\n{\"name\":\"x\",\"when\":[],\"expect\":{},\"match\":{\"light\":9}}";
        match read_specs(text.as_bytes()) {
            Err(SpecIoError::Schema { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("out of range"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(read_specs(&b"{\"when\":[],\"expect\":{},\"match\":{}}"[..]).is_err());
    }
}
