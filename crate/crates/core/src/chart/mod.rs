//! Flat state charts composed in parallel over a broadcast event bus.
//!
//! A [`SystemModel`] is an ordered list of [`StateChart`]s. Each chart has
//! exactly one active state; the tuple of active states plus the pending
//! internal event queue forms a [`Configuration`]. Events are dispatched with
//! run-to-completion semantics (see [`dispatch`]).

mod dispatch;
mod space;

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dispatch::{dispatch, dispatch_bounded, Step, DEFAULT_MICROSTEP_LIMIT};
pub use space::{enumerate_space, reachable, StateSpace};

/// Origin tag for events injected from outside the model.
pub const ENV_ORIGIN: &str = "env";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChartError {
    #[error("livelock: more than {limit} internal events processed in one macrostep")]
    Livelock { limit: usize },
    #[error("state space size overflows 64 bits")]
    Overflow,
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// Payload value carried by events and compared by guards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
        }
    }
}

pub type Payload = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Event {
    pub name: String,
    pub payload: Payload,
    pub origin: String,
}

impl Event {
    /// An environment event with an empty payload.
    pub fn env(name: impl Into<String>) -> Self {
        Event {
            name: name.into(),
            payload: Payload::new(),
            origin: ENV_ORIGIN.to_string(),
        }
    }

    pub fn with(mut self, field: impl Into<String>, value: impl Into<Value>) -> Self {
        self.payload.insert(field.into(), value.into());
        self
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    /// Booleans only support equality; mixed-type comparisons are false.
    fn holds(self, lhs: Value, rhs: Value) -> bool {
        match (lhs, rhs) {
            (Value::Int(a), Value::Int(b)) => match self {
                CmpOp::Eq => a == b,
                CmpOp::Ne => a != b,
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Gt => a > b,
                CmpOp::Ge => a >= b,
            },
            (Value::Bool(a), Value::Bool(b)) => match self {
                CmpOp::Eq => a == b,
                CmpOp::Ne => a != b,
                _ => false,
            },
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Atom {
    /// `field op literal` over the triggering event's payload.
    Compare { field: String, op: CmpOp, value: Value },
    /// `in(chart.state)`.
    InState { chart: String, state: String },
}

/// Conjunction of atoms. An empty guard is always true.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Guard {
    pub atoms: Vec<Atom>,
}

impl Guard {
    pub fn new(atoms: Vec<Atom>) -> Self {
        Guard { atoms }
    }

    pub fn holds(&self, payload: &Payload, active: &BTreeMap<String, String>) -> bool {
        self.atoms.iter().all(|atom| match atom {
            Atom::Compare { field, op, value } => payload
                .get(field)
                .is_some_and(|actual| op.holds(*actual, *value)),
            Atom::InState { chart, state } => active.get(chart).is_some_and(|s| s == state),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ArgValue {
    Literal(Value),
    /// `$field`: copied from the triggering event's payload.
    Field(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EventTemplate {
    pub name: String,
    pub args: Vec<(String, ArgValue)>,
}

impl EventTemplate {
    pub fn new(name: impl Into<String>) -> Self {
        EventTemplate {
            name: name.into(),
            args: Vec::new(),
        }
    }

    pub fn arg(mut self, field: impl Into<String>, value: ArgValue) -> Self {
        self.args.push((field.into(), value));
        self
    }

    /// Fields copied from a trigger that lacks them are left out of the payload.
    pub fn instantiate(&self, trigger: &Payload, origin: &str) -> Event {
        let payload = self
            .args
            .iter()
            .filter_map(|(field, arg)| {
                let value = match arg {
                    ArgValue::Literal(v) => *v,
                    ArgValue::Field(src) => *trigger.get(src)?,
                };
                Some((field.clone(), value))
            })
            .collect();
        Event {
            name: self.name.clone(),
            payload,
            origin: origin.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transition {
    pub source: String,
    pub event: String,
    pub guard: Option<Guard>,
    pub emits: Vec<EventTemplate>,
    pub target: String,
}

impl Transition {
    pub fn new(source: impl Into<String>, event: impl Into<String>, target: impl Into<String>) -> Self {
        Transition {
            source: source.into(),
            event: event.into(),
            guard: None,
            emits: Vec::new(),
            target: target.into(),
        }
    }

    pub fn guarded(mut self, atoms: Vec<Atom>) -> Self {
        self.guard = Some(Guard::new(atoms));
        self
    }

    pub fn emit(mut self, template: EventTemplate) -> Self {
        self.emits.push(template);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateChart {
    pub name: String,
    pub states: Vec<String>,
    pub initial: String,
    pub transitions: Vec<Transition>,
}

impl StateChart {
    pub fn new(name: impl Into<String>, initial: impl Into<String>) -> Self {
        StateChart {
            name: name.into(),
            states: Vec::new(),
            initial: initial.into(),
            transitions: Vec::new(),
        }
    }

    pub fn state(mut self, name: impl Into<String>) -> Self {
        self.states.push(name.into());
        self
    }

    pub fn transition(mut self, t: Transition) -> Self {
        self.transitions.push(t);
        self
    }

    pub fn has_state(&self, name: &str) -> bool {
        self.states.iter().any(|s| s == name)
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }
}

/// An ordered set of charts. Structural validity is not enforced by
/// construction so that diagnostics can report on broken models; use
/// [`SystemModel::check`] or [`SystemModel::validated`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SystemModel {
    pub charts: Vec<StateChart>,
}

impl SystemModel {
    pub fn new(charts: Vec<StateChart>) -> Self {
        SystemModel { charts }
    }

    pub fn validated(charts: Vec<StateChart>) -> Result<Self, ChartError> {
        let model = SystemModel { charts };
        model.check()?;
        Ok(model)
    }

    pub fn chart(&self, name: &str) -> Option<&StateChart> {
        self.charts.iter().find(|c| c.name == name)
    }

    /// First violated structural invariant, if any.
    pub fn check(&self) -> Result<(), ChartError> {
        let invalid = |msg: String| Err(ChartError::InvalidModel(msg));
        let mut chart_names = HashSet::new();
        for chart in &self.charts {
            if !chart_names.insert(chart.name.as_str()) {
                return invalid(format!("duplicate chart name `{}`", chart.name));
            }
            let mut states = HashSet::new();
            for s in &chart.states {
                if !states.insert(s.as_str()) {
                    return invalid(format!("duplicate state `{}` in chart `{}`", s, chart.name));
                }
            }
            if !states.contains(chart.initial.as_str()) {
                return invalid(format!("initial state `{}` not declared in chart `{}`", chart.initial, chart.name));
            }
            for t in &chart.transitions {
                for end in [&t.source, &t.target] {
                    if !states.contains(end.as_str()) {
                        return invalid(format!("unknown state `{}` in chart `{}`", end, chart.name));
                    }
                }
                for tpl in &t.emits {
                    let mut fields = HashSet::new();
                    for (f, _) in &tpl.args {
                        if !fields.insert(f.as_str()) {
                            return invalid(format!("duplicate payload field `{}` in emit `{}`", f, tpl.name));
                        }
                    }
                }
            }
        }
        for chart in &self.charts {
            for t in &chart.transitions {
                for atom in t.guard.iter().flat_map(|g| &g.atoms) {
                    if let Atom::InState { chart: c, state } = atom {
                        match self.chart(c) {
                            None => return invalid(format!("unknown chart `{c}` in in(...) guard")),
                            Some(other) if !other.has_state(state) => {
                                return invalid(format!("unknown state `{c}.{state}` in in(...) guard"))
                            }
                            Some(_) => {}
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Event names that trigger at least one transition.
    pub fn alphabet(&self) -> BTreeSet<&str> {
        self.charts
            .iter()
            .flat_map(|c| c.transitions.iter().map(|t| t.event.as_str()))
            .collect()
    }

    pub fn init(&self) -> Configuration {
        init(self)
    }
}

/// Active state per chart plus the pending internal event queue.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Configuration {
    pub active: BTreeMap<String, String>,
    pub queue: VecDeque<Event>,
}

impl Configuration {
    pub fn state_of(&self, chart: &str) -> Option<&str> {
        self.active.get(chart).map(String::as_str)
    }

    /// Active states in model chart order.
    pub fn tuple<'a>(&'a self, model: &SystemModel) -> Vec<&'a str> {
        model
            .charts
            .iter()
            .filter_map(|c| self.state_of(&c.name))
            .collect()
    }
}

/// Every chart in its initial state, empty queue.
pub fn init(model: &SystemModel) -> Configuration {
    Configuration {
        active: model
            .charts
            .iter()
            .map(|c| (c.name.clone(), c.initial.clone()))
            .collect(),
        queue: VecDeque::new(),
    }
}
