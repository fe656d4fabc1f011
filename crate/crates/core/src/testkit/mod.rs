//! Chart unit tests and assignment of simulated scenarios to them.

mod io;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::chart::{dispatch, init, ChartError, Event, SystemModel};
use crate::refmodel::{events, vehicle_states, CombinationCode, LightPhase, LIGHT, RSU_LOC, VEHICLE};
use crate::sim::ScenarioTrace;

pub use io::{read_specs, render_spec, write_specs, SpecIoError};

/// Constraint on one code field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldMatch {
    Any,
    One(u8),
    Set(BTreeSet<u8>),
}

impl FieldMatch {
    pub fn set<I: IntoIterator<Item = u8>>(values: I) -> Self {
        FieldMatch::Set(values.into_iter().collect())
    }

    pub fn accepts(&self, v: u8) -> bool {
        match self {
            FieldMatch::Any => true,
            FieldMatch::One(x) => *x == v,
            FieldMatch::Set(xs) => xs.contains(&v),
        }
    }

    fn max_value(&self) -> Option<u8> {
        match self {
            FieldMatch::Any => None,
            FieldMatch::One(x) => Some(*x),
            FieldMatch::Set(xs) => xs.iter().next_back().copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeMatch {
    pub light: FieldMatch,
    pub detected: FieldMatch,
    pub located: FieldMatch,
    pub tx: FieldMatch,
}

impl CodeMatch {
    pub fn any() -> Self {
        CodeMatch {
            light: FieldMatch::Any,
            detected: FieldMatch::Any,
            located: FieldMatch::Any,
            tx: FieldMatch::Any,
        }
    }

    pub fn accepts(&self, code: CombinationCode) -> bool {
        self.light.accepts(code.light)
            && self.detected.accepts(code.detected)
            && self.located.accepts(code.located)
            && self.tx.accepts(code.tx)
    }

    /// Accepted codes as a bitmask indexed by [`CombinationCode::index`].
    pub fn mask(&self) -> u64 {
        CombinationCode::all()
            .filter(|c| self.accepts(*c))
            .fold(0, |m, c| m | 1 << c.index())
    }

    pub fn match_set(&self) -> BTreeSet<CombinationCode> {
        CombinationCode::all().filter(|c| self.accepts(*c)).collect()
    }

    fn check(&self) -> Result<(), String> {
        let fields = [
            ("light", &self.light, 7),
            ("detected", &self.detected, 1),
            ("located", &self.located, 1),
            ("tx", &self.tx, 1),
        ];
        for (name, m, max) in fields {
            if let FieldMatch::Set(xs) = m {
                if xs.is_empty() {
                    return Err(format!("match field `{name}` is an empty set"));
                }
            }
            if let Some(v) = m.max_value().filter(|v| *v > max) {
                return Err(format!("match field `{name}` value {v} out of range 0..={max}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSpec {
    pub name: String,
    pub description: String,
    pub when: Vec<Event>,
    pub expect: BTreeMap<String, String>,
    pub code_match: CodeMatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Divergence {
    /// Index into `when` of the last event that moved `chart`, or `when.len()`
    /// if the chart never left its initial state.
    pub event_index: usize,
    pub chart: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TestResult {
    pub name: String,
    pub passed: bool,
    pub actual: BTreeMap<String, String>,
    pub divergence: Option<Divergence>,
}

#[derive(Debug, Error)]
pub enum TestError {
    #[error("test `{spec}`: event `{event}` is not in the model alphabet")]
    UnknownEvent { spec: String, event: String },
    #[error("test `{spec}`: {message}")]
    InvalidSpec { spec: String, message: String },
    #[error("test `{spec}`: {source}")]
    Chart { spec: String, source: ChartError },
}

/// Checks `expect` against the model and `code_match` against field ranges.
pub fn check_spec(model: &SystemModel, spec: &TestSpec) -> Result<(), TestError> {
    let invalid = |message: String| TestError::InvalidSpec {
        spec: spec.name.clone(),
        message,
    };
    for (chart, state) in &spec.expect {
        let c = model
            .chart(chart)
            .ok_or_else(|| invalid(format!("unknown chart `{chart}`")))?;
        if !c.has_state(state) {
            return Err(invalid(format!("unknown state `{state}` in chart `{chart}`")));
        }
    }
    spec.code_match.check().map_err(invalid)?;
    let alphabet = model.alphabet();
    if let Some(e) = spec.when.iter().find(|e| !alphabet.contains(e.name.as_str())) {
        return Err(TestError::UnknownEvent {
            spec: spec.name.clone(),
            event: e.name.clone(),
        });
    }
    Ok(())
}

pub fn run_test(model: &SystemModel, spec: &TestSpec) -> Result<TestResult, TestError> {
    check_spec(model, spec)?;
    let mut config = init(model);
    let mut last_change: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, event) in spec.when.iter().enumerate() {
        let step = dispatch(model, config.clone(), event.clone()).map_err(|source| TestError::Chart {
            spec: spec.name.clone(),
            source,
        })?;
        for chart in &model.charts {
            if step.config.state_of(&chart.name) != config.state_of(&chart.name) {
                last_change.insert(&chart.name, i);
            }
        }
        config = step.config;
    }
    let actual: BTreeMap<String, String> = config.active.clone();
    let divergence = model
        .charts
        .iter()
        .filter(|c| spec.expect.get(&c.name).is_some_and(|s| Some(s) != actual.get(&c.name)))
        .map(|c| Divergence {
            event_index: last_change.get(c.name.as_str()).copied().unwrap_or(spec.when.len()),
            chart: c.name.clone(),
        })
        .min_by_key(|d| d.event_index);
    Ok(TestResult {
        name: spec.name.clone(),
        passed: divergence.is_none(),
        actual,
        divergence,
    })
}

fn zone_enter(txok: bool) -> Event {
    Event::env(events::ZONE_ENTER).with("txok", txok)
}

fn phase_elapsed() -> Event {
    Event::env(events::PHASE_ELAPSED).with(events::TOWARDS_GREEN, true)
}

fn spec(
    name: &str,
    description: &str,
    when: Vec<Event>,
    expect: &[(&str, &str)],
    code_match: CodeMatch,
) -> TestSpec {
    TestSpec {
        name: name.into(),
        description: description.into(),
        when,
        expect: expect.iter().map(|(c, s)| (c.to_string(), s.to_string())).collect(),
        code_match,
    }
}

fn cause_match(detected: u8, located: u8, tx: u8) -> CodeMatch {
    CodeMatch {
        light: FieldMatch::Any,
        detected: FieldMatch::One(detected),
        located: FieldMatch::One(located),
        tx: FieldMatch::One(tx),
    }
}

/// Tests T1 to T4 partition the causes that end in `PossibleVRUPresent`;
/// T4.1 and T4.2 narrow T4 to the two transition windows of the light.
pub fn profile1_suite() -> Vec<TestSpec> {
    use vehicle_states::POSSIBLE_VRU_PRESENT as PVP;
    let detect = || Event::env(events::DETECT);
    let locate = || Event::env(events::LOCATE);
    let timeout = || Event::env(events::TIMEOUT);
    let t4_events = || vec![detect(), locate(), zone_enter(false), timeout()];
    let window = |phases: [LightPhase; 2]| CodeMatch {
        light: FieldMatch::set(phases.map(LightPhase::index)),
        ..cause_match(1, 1, 0)
    };

    let mut t41_when: Vec<Event> = (0..5).map(|_| phase_elapsed()).collect();
    t41_when.extend(t4_events());
    let mut t42_when = vec![phase_elapsed()];
    t42_when.extend(t4_events());

    vec![
        spec(
            "T1",
            "VRU detected but not located, response received",
            vec![detect(), zone_enter(true)],
            &[(RSU_LOC, "Detected"), (VEHICLE, PVP)],
            cause_match(1, 0, 1),
        ),
        spec(
            "T2",
            "no VRU detected, transmission failed",
            vec![zone_enter(false), timeout()],
            &[(RSU_LOC, "Undetected"), (VEHICLE, PVP)],
            cause_match(0, 0, 0),
        ),
        spec(
            "T3",
            "VRU detected but not located, transmission failed",
            vec![detect(), zone_enter(false), timeout()],
            &[(RSU_LOC, "Detected"), (VEHICLE, PVP)],
            cause_match(1, 0, 0),
        ),
        spec(
            "T4",
            "VRU located, transmission failed",
            t4_events(),
            &[(RSU_LOC, "Located"), (VEHICLE, PVP)],
            cause_match(1, 1, 0),
        ),
        spec(
            "T4.1",
            "T4 while the light goes from green to red",
            t41_when,
            &[(LIGHT, LightPhase::GreenToYellow.name()), (VEHICLE, PVP)],
            window([LightPhase::GreenToYellow, LightPhase::YellowToRed]),
        ),
        spec(
            "T4.2",
            "T4 while the light goes from red to green",
            t42_when,
            &[(LIGHT, LightPhase::RedToYellow.name()), (VEHICLE, PVP)],
            window([LightPhase::RedToYellow, LightPhase::YellowToGreen]),
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpecAssignment {
    pub name: String,
    pub ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Assignment {
    pub per_spec: Vec<SpecAssignment>,
    pub unassigned: Vec<u64>,
    /// Scenarios matched by two specs whose match sets are not nested.
    pub multiply_assigned: Vec<u64>,
}

impl Assignment {
    pub fn ids_for(&self, name: &str) -> Option<&[u64]> {
        self.per_spec.iter().find(|s| s.name == name).map(|s| s.ids.as_slice())
    }
}

fn nested(a: u64, b: u64) -> bool {
    a & b == a || a & b == b
}

/// Assigns each scenario to every spec whose match accepts its code.
pub fn assign(traces: &[ScenarioTrace], specs: &[TestSpec]) -> Assignment {
    let masks: Vec<u64> = specs.iter().map(|s| s.code_match.mask()).collect();
    let hits: Vec<Vec<usize>> = traces
        .par_iter()
        .map(|t| {
            let bit = 1u64 << t.code.index();
            (0..specs.len()).filter(|&i| masks[i] & bit != 0).collect()
        })
        .collect();

    let mut out = Assignment {
        per_spec: specs
            .iter()
            .map(|s| SpecAssignment {
                name: s.name.clone(),
                ids: Vec::new(),
            })
            .collect(),
        ..Assignment::default()
    };
    for (trace, matched) in traces.iter().zip(hits) {
        if matched.is_empty() {
            out.unassigned.push(trace.id);
            continue;
        }
        for &i in &matched {
            out.per_spec[i].ids.push(trace.id);
        }
        let conflict = matched
            .iter()
            .enumerate()
            .any(|(n, &i)| matched[n + 1..].iter().any(|&j| !nested(masks[i], masks[j])));
        if conflict {
            out.multiply_assigned.push(trace.id);
        }
    }
    out
}

/// Specs with fewer than `k` scenarios, fewest first; ties keep suite order.
pub fn test_coverage(assignment: &Assignment, specs: &[TestSpec], k: usize) -> Vec<(String, usize)> {
    let mut out: Vec<(String, usize)> = specs
        .iter()
        .map(|s| {
            let n = assignment.ids_for(&s.name).map_or(0, <[u64]>::len);
            (s.name.clone(), n)
        })
        .filter(|&(_, n)| n < k)
        .collect();
    out.sort_by_key(|&(_, n)| n);
    out
}
