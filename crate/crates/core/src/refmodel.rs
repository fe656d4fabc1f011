//! The built-in intersection model: traffic light, RSU localization, RSU
//! V2I communication and the ego vehicle, plus the projection of a decided
//! configuration onto a 4-field combination code.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::chart::{ArgValue, Atom, CmpOp, Configuration, EventTemplate, StateChart, SystemModel, Transition, Value};

/// Canonical DSL text of [`builtin_model`].
pub const INTERSECTION_SCD: &str = include_str!("../models/intersection.scd");

pub const LIGHT: &str = "light";
pub const RSU_LOC: &str = "rsu_loc";
pub const RSU_COMM: &str = "rsu_comm";
pub const VEHICLE: &str = "vehicle";

pub mod events {
    pub const PHASE_ELAPSED: &str = "PHASE_ELAPSED";
    pub const FAILURE: &str = "FAILURE";
    pub const VRU_ARRIVE: &str = "VRU_ARRIVE";
    pub const DETECT: &str = "DETECT";
    pub const LOCATE: &str = "LOCATE";
    pub const ZONE_ENTER: &str = "ZONE_ENTER";
    pub const TIMEOUT: &str = "TIMEOUT";
    pub const REQUEST: &str = "REQUEST";
    pub const RESPONSE: &str = "RESPONSE";
    /// Payload field on `PHASE_ELAPSED` selecting the exit from `Yellow`.
    pub const TOWARDS_GREEN: &str = "towards_green";
}

pub mod vehicle_states {
    pub const APPROACHING: &str = "Approaching";
    pub const AWAITING_RESPONSE: &str = "AwaitingResponse";
    pub const FREE_TURN: &str = "FreeTurn";
    pub const STOP: &str = "Stop";
    pub const POSSIBLE_VRU_PRESENT: &str = "PossibleVRUPresent";
}

pub const RSU_LOC_STATES: [&str; 3] = ["Undetected", "Detected", "Located"];
pub const RSU_COMM_STATES: [&str; 7] = [
    "Idle",
    "SentNone_OK",
    "SentNone_Fail",
    "SentDetected_OK",
    "SentDetected_Fail",
    "SentLocated_OK",
    "SentLocated_Fail",
];
pub const VEHICLE_STATES: [&str; 5] = [
    vehicle_states::APPROACHING,
    vehicle_states::AWAITING_RESPONSE,
    vehicle_states::FREE_TURN,
    vehicle_states::STOP,
    vehicle_states::POSSIBLE_VRU_PRESENT,
];

/// Traffic light states; the discriminant is the light digit of a code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LightPhase {
    Red = 0,
    Yellow = 1,
    Green = 2,
    Off = 3,
    RedToYellow = 4,
    YellowToGreen = 5,
    GreenToYellow = 6,
    YellowToRed = 7,
}

impl LightPhase {
    pub const ALL: [LightPhase; 8] = [
        LightPhase::Red,
        LightPhase::Yellow,
        LightPhase::Green,
        LightPhase::Off,
        LightPhase::RedToYellow,
        LightPhase::YellowToGreen,
        LightPhase::GreenToYellow,
        LightPhase::YellowToRed,
    ];

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Option<Self> {
        Self::ALL.get(i as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            LightPhase::Red => "Red",
            LightPhase::Yellow => "Yellow",
            LightPhase::Green => "Green",
            LightPhase::Off => "Off",
            LightPhase::RedToYellow => "RedToYellow",
            LightPhase::YellowToGreen => "YellowToGreen",
            LightPhase::GreenToYellow => "GreenToYellow",
            LightPhase::YellowToRed => "YellowToRed",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

impl fmt::Display for LightPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error("malformed combination code `{0}`")]
    Malformed(String),
    #[error("no decision yet: rsu_comm is Idle")]
    NoDecision,
    #[error("configuration lacks chart `{0}` or holds an unknown state in it")]
    MissingChart(&'static str),
}

/// `light-detected-located-tx`, e.g. `0-1-0-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CombinationCode {
    pub light: u8,
    pub detected: u8,
    pub located: u8,
    pub tx: u8,
}

impl CombinationCode {
    pub const SPACE: usize = 64;

    pub fn new(light: u8, detected: u8, located: u8, tx: u8) -> Option<Self> {
        (light < 8 && detected < 2 && located < 2 && tx < 2).then_some(CombinationCode {
            light,
            detected,
            located,
            tx,
        })
    }

    /// Position in code-lexicographic order, `0..64`.
    pub fn index(self) -> usize {
        (self.light as usize) * 8 + (self.detected as usize) * 4 + (self.located as usize) * 2 + self.tx as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        (i < Self::SPACE).then_some(CombinationCode {
            light: (i / 8) as u8,
            detected: ((i / 4) % 2) as u8,
            located: ((i / 2) % 2) as u8,
            tx: (i % 2) as u8,
        })
    }

    /// All 64 codes in lexicographic order.
    pub fn all() -> impl Iterator<Item = CombinationCode> {
        (0..Self::SPACE).filter_map(Self::from_index)
    }

    pub fn is_feasible(self) -> bool {
        self.located == 0 || self.detected == 1
    }

    pub fn light_phase(self) -> LightPhase {
        LightPhase::from_index(self.light).expect("light digit < 8")
    }
}

impl fmt::Display for CombinationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}-{}", self.light, self.detected, self.located, self.tx)
    }
}

impl FromStr for CombinationCode {
    type Err = CodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CodeError::Malformed(s.to_string());
        let parts: Vec<u8> = s
            .split('-')
            .map(|p| if p.len() == 1 { p.parse::<u8>().ok() } else { None })
            .collect::<Option<_>>()
            .ok_or_else(bad)?;
        match parts.as_slice() {
            [l, d, lo, t] => CombinationCode::new(*l, *d, *lo, *t).ok_or_else(bad),
            _ => Err(bad()),
        }
    }
}

impl Serialize for CombinationCode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CombinationCode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Code of a decided configuration, with the light phase observed at the
/// decision instant.
pub fn project_code(config: &Configuration, light_at_decision: LightPhase) -> Result<CombinationCode, CodeError> {
    let comm = config.state_of(RSU_COMM).ok_or(CodeError::MissingChart(RSU_COMM))?;
    if !RSU_COMM_STATES.contains(&comm) {
        return Err(CodeError::MissingChart(RSU_COMM));
    }
    if comm == RSU_COMM_STATES[0] {
        return Err(CodeError::NoDecision);
    }
    let loc = config.state_of(RSU_LOC).ok_or(CodeError::MissingChart(RSU_LOC))?;
    let (detected, located) = match loc {
        "Undetected" => (0, 0),
        "Detected" => (1, 0),
        "Located" => (1, 1),
        _ => return Err(CodeError::MissingChart(RSU_LOC)),
    };
    Ok(CombinationCode {
        light: light_at_decision.index(),
        detected,
        located,
        tx: comm.ends_with("_OK") as u8,
    })
}

/// The 64-code reduced space and its 48 feasible members.
pub fn reduced_space() -> (usize, BTreeSet<CombinationCode>) {
    let feasible = CombinationCode::all().filter(|c| c.is_feasible()).collect();
    (CombinationCode::SPACE, feasible)
}

/// Vehicle terminal state a code implies under the built-in charts.
pub fn terminal_for_code(code: CombinationCode) -> &'static str {
    use vehicle_states::*;
    match (code.detected, code.located, code.tx) {
        (_, _, 0) => POSSIBLE_VRU_PRESENT,
        (0, _, _) => FREE_TURN,
        (1, 1, _) => STOP,
        _ => POSSIBLE_VRU_PRESENT,
    }
}

fn cmp_bool(field: &str, value: bool) -> Atom {
    Atom::Compare {
        field: field.to_string(),
        op: CmpOp::Eq,
        value: Value::Bool(value),
    }
}

fn in_state(chart: &str, state: &str) -> Atom {
    Atom::InState {
        chart: chart.to_string(),
        state: state.to_string(),
    }
}

fn light_chart() -> StateChart {
    use events::{FAILURE, PHASE_ELAPSED, TOWARDS_GREEN};
    use LightPhase::*;
    let mut chart = StateChart::new(LIGHT, Red.name());
    for phase in LightPhase::ALL {
        chart = chart.state(phase.name());
    }
    let nominal_next = |p: LightPhase| -> Vec<Transition> {
        let step = |to: LightPhase| Transition::new(p.name(), PHASE_ELAPSED, to.name());
        match p {
            Red => vec![step(RedToYellow)],
            RedToYellow => vec![step(Yellow)],
            Yellow => vec![
                step(YellowToGreen).guarded(vec![cmp_bool(TOWARDS_GREEN, true)]),
                step(YellowToRed).guarded(vec![cmp_bool(TOWARDS_GREEN, false)]),
            ],
            YellowToGreen => vec![step(Green)],
            Green => vec![step(GreenToYellow)],
            GreenToYellow => vec![step(Yellow)],
            YellowToRed => vec![step(Red)],
            Off => vec![],
        }
    };
    for phase in LightPhase::ALL {
        if phase == Off {
            continue;
        }
        for t in nominal_next(phase) {
            chart = chart.transition(t);
        }
        chart = chart.transition(Transition::new(phase.name(), FAILURE, Off.name()));
    }
    chart
}

fn rsu_loc_chart() -> StateChart {
    let [undetected, detected, located] = RSU_LOC_STATES;
    StateChart::new(RSU_LOC, undetected)
        .state(undetected)
        .state(detected)
        .state(located)
        .transition(Transition::new(undetected, events::DETECT, detected))
        .transition(Transition::new(detected, events::LOCATE, located))
}

fn rsu_comm_chart() -> StateChart {
    let mut chart = StateChart::new(RSU_COMM, RSU_COMM_STATES[0]);
    for s in RSU_COMM_STATES {
        chart = chart.state(s);
    }
    let outcomes = [
        ("Undetected", "SentNone", false, false),
        ("Detected", "SentDetected", true, false),
        ("Located", "SentLocated", true, true),
    ];
    for (loc, sent, detected, located) in outcomes {
        for ok in [true, false] {
            let target = format!("{sent}_{}", if ok { "OK" } else { "Fail" });
            let mut t = Transition::new(RSU_COMM_STATES[0], events::REQUEST, target)
                .guarded(vec![in_state(RSU_LOC, loc), cmp_bool("txok", ok)]);
            if ok {
                t = t.emit(
                    EventTemplate::new(events::RESPONSE)
                        .arg("detected", ArgValue::Literal(Value::Bool(detected)))
                        .arg("located", ArgValue::Literal(Value::Bool(located))),
                );
            }
            chart = chart.transition(t);
        }
    }
    chart
}

fn vehicle_chart() -> StateChart {
    use vehicle_states::*;
    let mut chart = StateChart::new(VEHICLE, APPROACHING);
    for s in VEHICLE_STATES {
        chart = chart.state(s);
    }
    chart
        .transition(
            Transition::new(APPROACHING, events::ZONE_ENTER, AWAITING_RESPONSE)
                .emit(EventTemplate::new(events::REQUEST).arg("txok", ArgValue::Field("txok".into()))),
        )
        .transition(
            Transition::new(AWAITING_RESPONSE, events::RESPONSE, FREE_TURN)
                .guarded(vec![cmp_bool("detected", false)]),
        )
        .transition(
            Transition::new(AWAITING_RESPONSE, events::RESPONSE, STOP).guarded(vec![cmp_bool("located", true)]),
        )
        .transition(
            Transition::new(AWAITING_RESPONSE, events::RESPONSE, POSSIBLE_VRU_PRESENT)
                .guarded(vec![cmp_bool("detected", true), cmp_bool("located", false)]),
        )
        .transition(Transition::new(AWAITING_RESPONSE, events::TIMEOUT, POSSIBLE_VRU_PRESENT))
}

/// The four-chart intersection model, charts ordered light, rsu_loc,
/// rsu_comm, vehicle.
pub fn builtin_model() -> SystemModel {
    SystemModel::new(vec![light_chart(), rsu_loc_chart(), rsu_comm_chart(), vehicle_chart()])
}
