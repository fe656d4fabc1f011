//! Line-delimited trace files.
//!
//! One scenario per line, fields in this order:
//! `id, seed_stream, jaywalker, events[{t,origin,name,payload}],
//! states{chart:[[t,state],...]}, decision_time, code, terminal`.
//! Times are seconds with exactly three decimals.

use std::io::{self, BufRead, Write};

use serde_json::{Map, Value as Json};
use thiserror::Error;

use crate::chart::{Payload, Value};
use crate::refmodel::CombinationCode;

use super::{ScenarioTrace, SimTime, StateTimeline, TraceEvent};

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

pub(crate) fn write_payload(out: &mut String, payload: &Payload) {
    out.push('{');
    for (i, (k, v)) in payload.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&quote(k));
        out.push(':');
        out.push_str(&v.to_string());
    }
    out.push('}');
}

pub(crate) fn render_trace(t: &ScenarioTrace) -> String {
    let mut out = String::with_capacity(1024);
    out.push_str(&format!(
        "{{\"id\":{},\"seed_stream\":{},\"jaywalker\":{},\"events\":[",
        t.id, t.seed_stream, t.jaywalker
    ));
    for (i, e) in t.events.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!(
            "{{\"t\":{},\"origin\":{},\"name\":{},\"payload\":",
            e.t,
            quote(&e.origin),
            quote(&e.name)
        ));
        write_payload(&mut out, &e.payload);
        out.push('}');
    }
    out.push_str("],\"states\":{");
    for (i, (chart, timeline)) in t.states.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&quote(chart));
        out.push_str(":[");
        for (j, (time, state)) in timeline.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("[{},{}]", time, quote(state)));
        }
        out.push(']');
    }
    out.push_str(&format!(
        "}},\"decision_time\":{},\"code\":\"{}\",\"terminal\":{}}}",
        t.decision_time,
        t.code,
        quote(&t.terminal)
    ));
    out
}

pub fn write_traces<W: Write>(traces: &[ScenarioTrace], mut sink: W) -> io::Result<()> {
    for t in traces {
        sink.write_all(render_trace(t).as_bytes())?;
        sink.write_all(b"\n")?;
    }
    sink.flush()
}

/// Reads traces; blank lines are skipped.
pub fn read_traces<R: BufRead>(source: R) -> Result<Vec<ScenarioTrace>, TraceIoError> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 1;
        let trace = parse_trace(&line).map_err(|message| TraceIoError::Schema { line: n, message })?;
        out.push(trace);
    }
    Ok(out)
}

pub(crate) struct Fields<'a> {
    map: &'a Map<String, Json>,
}

impl<'a> Fields<'a> {
    pub(crate) fn new(json: &'a Json, allowed: &[&str]) -> Result<Self, String> {
        let map = json.as_object().ok_or("expected a JSON object")?;
        if let Some(extra) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(format!("unknown field `{extra}`"));
        }
        Ok(Fields { map })
    }

    pub(crate) fn get(&self, name: &str) -> Result<&'a Json, String> {
        self.map.get(name).ok_or_else(|| format!("missing field `{name}`"))
    }

    pub(crate) fn str(&self, name: &str) -> Result<&'a str, String> {
        self.get(name)?
            .as_str()
            .ok_or_else(|| format!("field `{name}` must be a string"))
    }

    fn u64(&self, name: &str) -> Result<u64, String> {
        self.get(name)?
            .as_u64()
            .ok_or_else(|| format!("field `{name}` must be a non-negative integer"))
    }

    fn bool(&self, name: &str) -> Result<bool, String> {
        self.get(name)?
            .as_bool()
            .ok_or_else(|| format!("field `{name}` must be a boolean"))
    }
}

fn time(json: &Json, what: &str) -> Result<SimTime, String> {
    json.as_f64()
        .and_then(SimTime::from_secs)
        .ok_or_else(|| format!("{what} must be a non-negative number of seconds"))
}

pub(crate) fn parse_payload(json: &Json) -> Result<Payload, String> {
    let map = json.as_object().ok_or("payload must be an object")?;
    map.iter()
        .map(|(k, v)| {
            let value = match v {
                Json::Bool(b) => Value::Bool(*b),
                Json::Number(n) => Value::Int(
                    n.as_i64()
                        .ok_or_else(|| format!("payload field `{k}` must be a 64-bit integer"))?,
                ),
                _ => return Err(format!("payload field `{k}` must be a boolean or integer")),
            };
            Ok((k.clone(), value))
        })
        .collect()
}

fn parse_trace(line: &str) -> Result<ScenarioTrace, String> {
    let json: Json = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let f = Fields::new(
        &json,
        &["id", "seed_stream", "jaywalker", "events", "states", "decision_time", "code", "terminal"],
    )?;

    let events = f
        .get("events")?
        .as_array()
        .ok_or("field `events` must be an array")?
        .iter()
        .map(|e| {
            let ef = Fields::new(e, &["t", "origin", "name", "payload"])?;
            Ok(TraceEvent {
                t: time(ef.get("t")?, "event time")?,
                origin: ef.str("origin")?.to_string(),
                name: ef.str("name")?.to_string(),
                payload: parse_payload(ef.get("payload")?)?,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;

    let states: StateTimeline = f
        .get("states")?
        .as_object()
        .ok_or("field `states` must be an object")?
        .iter()
        .map(|(chart, timeline)| {
            let entries = timeline
                .as_array()
                .ok_or_else(|| format!("timeline of `{chart}` must be an array"))?
                .iter()
                .map(|entry| match entry.as_array().map(Vec::as_slice) {
                    Some([t, Json::String(s)]) => Ok((time(t, "state time")?, s.clone())),
                    _ => Err(format!("timeline entries of `{chart}` must be [t, state]")),
                })
                .collect::<Result<Vec<_>, String>>()?;
            Ok((chart.clone(), entries))
        })
        .collect::<Result<_, String>>()?;

    let code: CombinationCode = f.str("code")?.parse().map_err(|e| format!("{e}"))?;
    if !code.is_feasible() {
        return Err(format!("infeasible combination code `{code}` (located without detected)"));
    }

    Ok(ScenarioTrace {
        id: f.u64("id")?,
        seed_stream: f.u64("seed_stream")?,
        jaywalker: f.bool("jaywalker")?,
        events,
        states,
        decision_time: time(f.get("decision_time")?, "decision_time")?,
        code,
        terminal: f.str("terminal")?.to_string(),
    })
}
