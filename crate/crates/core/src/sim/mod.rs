//! Seeded discrete-event scenario generation over the intersection model.
//!
//! Randomness lives only in the environment. Each scenario draws, from its
//! own [`RngStream`] and always in this order:
//!
//! 1. light cycle offset, uniform on the tick grid over one nominal cycle;
//! 2. VRU present ~ Bernoulli(`p_vru`);
//! 3. jaywalker ~ Bernoulli(`p_jaywalk`) (kept only if a VRU is present);
//! 4. detect ~ Bernoulli(`p_detect`, scaled by `jaywalk_detect_factor` for jaywalkers);
//! 5. locate ~ Bernoulli(`p_locate`) (kept only if detected);
//! 6. txok ~ Bernoulli(`p_tx`).
//!
//! All six draws happen in every scenario, so changing one probability never
//! shifts the others. The charts themselves stay deterministic.

pub(crate) mod io;
mod rng;

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::chart::{dispatch, init, ChartError, Configuration, Event, Payload, SystemModel, ENV_ORIGIN};
use crate::refmodel::{self, events, project_code, CodeError, CombinationCode, LightPhase};

pub use io::{read_traces, write_traces, TraceIoError};
pub use rng::{stream_seed, RngStream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error("incompatible model: {0}")]
    IncompatibleModel(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Code(#[from] CodeError),
}

/// Simulation time in whole milliseconds; rendered in seconds with three
/// decimals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub fn from_secs(secs: f64) -> Option<Self> {
        let ms = (secs * 1000.0).round();
        (secs.is_finite() && ms >= 0.0 && ms < u64::MAX as f64).then_some(SimTime(ms as u64))
    }

    pub fn millis(self) -> u64 {
        self.0
    }

    pub fn secs(self) -> f64 {
        self.0 as f64 / 1000.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03}", self.0 / 1000, self.0 % 1000)
    }
}

/// Nominal light cycle order. `Yellow` is visited twice per cycle; its
/// configured duration is its total dwell per cycle and is split evenly
/// across the two visits.
const CYCLE: [(LightPhase, Option<bool>); 8] = [
    (LightPhase::Red, None),
    (LightPhase::RedToYellow, None),
    (LightPhase::Yellow, Some(true)),
    (LightPhase::YellowToGreen, None),
    (LightPhase::Green, None),
    (LightPhase::GreenToYellow, None),
    (LightPhase::Yellow, Some(false)),
    (LightPhase::YellowToRed, None),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub n_scenarios: usize,
    pub seed: u64,
    pub p_vru: f64,
    pub p_detect: f64,
    pub p_locate: f64,
    pub p_tx: f64,
    pub p_jaywalk: f64,
    /// Multiplier on `p_detect` for jaywalkers (clamped to 1).
    pub jaywalk_detect_factor: f64,
    /// Seconds per light state and cycle; `Off` is not part of the cycle.
    pub phase_durations: BTreeMap<LightPhase, f64>,
    pub response_latency: f64,
    pub timeout: f64,
    pub tick: f64,
    /// Time of `ZONE_ENTER`; VRU events fall at 1/4, 1/2 and 3/4 of it.
    pub approach_time: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        use LightPhase::*;
        SimParams {
            n_scenarios: 1000,
            seed: 0,
            p_vru: 0.5,
            p_detect: 0.90,
            p_locate: 0.75,
            p_tx: 0.90,
            p_jaywalk: 0.10,
            jaywalk_detect_factor: 1.0,
            phase_durations: [
                (Red, 10.0),
                (RedToYellow, 2.0),
                (Yellow, 3.0),
                (YellowToGreen, 2.0),
                (Green, 10.0),
                (GreenToYellow, 2.0),
                (YellowToRed, 2.0),
            ]
            .into(),
            response_latency: 0.2,
            timeout: 0.5,
            tick: 0.1,
            approach_time: 6.0,
        }
    }
}

/// Parameters resolved to the millisecond grid.
#[derive(Debug, Clone)]
struct Schedule {
    /// Dwell per cycle visit, parallel to `CYCLE`.
    visits: Vec<u64>,
    cycle: u64,
    tick: u64,
    latency: u64,
    timeout: u64,
    arrive: u64,
    detect: u64,
    locate: u64,
    zone: u64,
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        self.schedule().map(|_| ())
    }

    fn schedule(&self) -> Result<Schedule, SimError> {
        let invalid = |m: String| Err(SimError::InvalidParams(m));
        for (name, p) in [
            ("p_vru", self.p_vru),
            ("p_detect", self.p_detect),
            ("p_locate", self.p_locate),
            ("p_tx", self.p_tx),
            ("p_jaywalk", self.p_jaywalk),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return invalid(format!("{name} = {p} is not a probability"));
            }
        }
        if !(self.jaywalk_detect_factor >= 0.0 && self.jaywalk_detect_factor.is_finite()) {
            return invalid("jaywalk_detect_factor must be finite and non-negative".into());
        }
        let ms = |name: &str, secs: f64| -> Result<u64, SimError> {
            match SimTime::from_secs(secs) {
                Some(t) if secs > 0.0 && t.0 > 0 => Ok(t.0),
                _ => Err(SimError::InvalidParams(format!("{name} = {secs} must be a positive duration of at least 1 ms"))),
            }
        };
        let mut visits = Vec::with_capacity(CYCLE.len());
        let mut yellow_first = true;
        for (phase, _) in CYCLE {
            let secs = *self
                .phase_durations
                .get(&phase)
                .ok_or_else(|| SimError::InvalidParams(format!("missing duration for {phase}")))?;
            let total = ms(phase.name(), secs)?;
            let dwell = if phase == LightPhase::Yellow {
                if total < 2 {
                    return invalid("Yellow duration must cover two visits of at least 1 ms".into());
                }
                let half = total / 2;
                let first = total - half;
                let d = if yellow_first { first } else { half };
                yellow_first = false;
                d
            } else {
                total
            };
            visits.push(dwell);
        }
        let tick = ms("tick", self.tick)?;
        let latency = ms("response_latency", self.response_latency)?;
        let timeout = ms("timeout", self.timeout)?;
        if timeout <= latency {
            return invalid("timeout must exceed response_latency".into());
        }
        let zone = ms("approach_time", self.approach_time)?;
        let snap = |t: u64| t - t % tick;
        Ok(Schedule {
            cycle: visits.iter().sum(),
            visits,
            tick,
            latency,
            timeout,
            arrive: snap(zone / 4),
            detect: snap(zone / 2),
            locate: snap(zone * 3 / 4),
            zone,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub t: SimTime,
    pub origin: String,
    pub name: String,
    pub payload: Payload,
}

pub type StateTimeline = Vec<(String, Vec<(SimTime, String)>)>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioTrace {
    pub id: u64,
    pub seed_stream: u64,
    pub jaywalker: bool,
    /// Environment events and the internal events they caused, in order.
    pub events: Vec<TraceEvent>,
    /// Per chart, in model order: the initial state at t = 0 and every
    /// change observed after a macrostep.
    pub states: StateTimeline,
    pub decision_time: SimTime,
    pub code: CombinationCode,
    pub terminal: String,
}

impl ScenarioTrace {
    pub fn env_events(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(|e| e.origin == ENV_ORIGIN)
    }

    pub fn count_env(&self, name: &str) -> usize {
        self.env_events().filter(|e| e.name == name).count()
    }
}

/// Event names and charts the generator relies on.
pub fn check_compatible(model: &SystemModel) -> Result<(), SimError> {
    let alphabet = model.alphabet();
    for name in [
        events::PHASE_ELAPSED,
        events::DETECT,
        events::LOCATE,
        events::ZONE_ENTER,
        events::TIMEOUT,
        events::RESPONSE,
    ] {
        if !alphabet.contains(name) {
            return Err(SimError::IncompatibleModel(format!("no transition consumes `{name}`")));
        }
    }
    let emits_response = model
        .charts
        .iter()
        .flat_map(|c| &c.transitions)
        .flat_map(|t| &t.emits)
        .any(|e| e.name == events::RESPONSE);
    if !emits_response {
        return Err(SimError::IncompatibleModel("no transition emits `RESPONSE`".into()));
    }
    for chart in [refmodel::LIGHT, refmodel::RSU_LOC, refmodel::RSU_COMM, refmodel::VEHICLE] {
        if model.chart(chart).is_none() {
            return Err(SimError::IncompatibleModel(format!("missing chart `{chart}`")));
        }
    }
    let light = model.chart(refmodel::LIGHT).expect("checked above");
    for phase in LightPhase::ALL {
        if !light.has_state(phase.name()) {
            return Err(SimError::IncompatibleModel(format!("light chart lacks state `{phase}`")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Phase,
    VruArrive,
    Detect,
    Locate,
    ZoneEnter,
    Timeout,
}

struct Pending {
    t: u64,
    kind: Kind,
    event: Event,
}

struct Recorder<'m> {
    model: &'m SystemModel,
    config: Configuration,
    events: Vec<TraceEvent>,
    states: StateTimeline,
}

impl<'m> Recorder<'m> {
    fn new(model: &'m SystemModel) -> Self {
        let config = init(model);
        let states = model
            .charts
            .iter()
            .map(|c| (c.name.clone(), vec![(SimTime(0), c.initial.clone())]))
            .collect();
        Recorder {
            model,
            config,
            events: Vec::new(),
            states,
        }
    }

    /// Dispatches one environment event; returns whether it emitted `RESPONSE`.
    fn deliver(&mut self, t: u64, event: Event) -> Result<bool, ChartError> {
        let t = SimTime(t);
        self.events.push(TraceEvent {
            t,
            origin: event.origin.clone(),
            name: event.name.clone(),
            payload: event.payload.clone(),
        });
        let step = dispatch(self.model, std::mem::take(&mut self.config), event)?;
        let mut responded = false;
        for e in step.emitted {
            responded |= e.name == events::RESPONSE;
            self.events.push(TraceEvent {
                t,
                origin: e.origin,
                name: e.name,
                payload: e.payload,
            });
        }
        self.config = step.config;
        record_changes(&mut self.states, &self.config, t);
        Ok(responded)
    }
}

fn record_changes(states: &mut StateTimeline, config: &Configuration, t: SimTime) {
    for (chart, timeline) in states.iter_mut() {
        if let Some(now) = config.state_of(chart) {
            if timeline.last().map(|(_, s)| s.as_str()) != Some(now) {
                timeline.push((t, now.to_string()));
            }
        }
    }
}

fn phase_event(exiting: usize) -> Event {
    let ev = Event::env(events::PHASE_ELAPSED);
    match CYCLE[exiting].1 {
        Some(towards_green) => ev.with(events::TOWARDS_GREEN, towards_green),
        None => ev,
    }
}

/// Generates scenario `index` of the batch described by `params`.
pub fn simulate_one(model: &SystemModel, params: &SimParams, index: u64) -> Result<ScenarioTrace, SimError> {
    check_compatible(model)?;
    let sched = params.schedule()?;
    simulate_scheduled(model, params, &sched, index)
}

fn simulate_scheduled(
    model: &SystemModel,
    params: &SimParams,
    sched: &Schedule,
    index: u64,
) -> Result<ScenarioTrace, SimError> {
    let mut rng = RngStream::new(params.seed, index);
    let cycle_ticks = (sched.cycle / sched.tick).max(1);
    let offset = rng.below(cycle_ticks) * sched.tick % sched.cycle;
    let vru_present = rng.bernoulli(params.p_vru);
    let jaywalker = vru_present && rng.bernoulli(params.p_jaywalk);
    let p_detect = if jaywalker {
        (params.p_detect * params.jaywalk_detect_factor).min(1.0)
    } else {
        params.p_detect
    };
    let detect_draw = rng.bernoulli(p_detect);
    let locate_draw = rng.bernoulli(params.p_locate);
    let txok = rng.bernoulli(params.p_tx);
    let detected = vru_present && detect_draw;
    let located = detected && locate_draw;

    let horizon = sched.zone + sched.timeout;
    let mut pending = Vec::new();

    // Fast-forward the light from Red to the visit containing `offset`, then
    // keep the cycle running past the horizon.
    let mut visit = 0usize;
    let mut visit_end = sched.visits[0];
    while visit_end <= offset {
        pending.push(Pending {
            t: 0,
            kind: Kind::Phase,
            event: phase_event(visit),
        });
        visit = (visit + 1) % CYCLE.len();
        visit_end += sched.visits[visit];
    }
    let mut t = visit_end - offset;
    while t <= horizon {
        pending.push(Pending {
            t,
            kind: Kind::Phase,
            event: phase_event(visit),
        });
        visit = (visit + 1) % CYCLE.len();
        t += sched.visits[visit];
    }

    if vru_present {
        pending.push(Pending {
            t: sched.arrive,
            kind: Kind::VruArrive,
            event: Event::env(events::VRU_ARRIVE).with("jaywalker", jaywalker),
        });
    }
    if detected {
        pending.push(Pending {
            t: sched.detect,
            kind: Kind::Detect,
            event: Event::env(events::DETECT),
        });
    }
    if located {
        pending.push(Pending {
            t: sched.locate,
            kind: Kind::Locate,
            event: Event::env(events::LOCATE),
        });
    }
    pending.push(Pending {
        t: sched.zone,
        kind: Kind::ZoneEnter,
        event: Event::env(events::ZONE_ENTER).with("txok", txok),
    });
    pending.push(Pending {
        t: horizon,
        kind: Kind::Timeout,
        event: Event::env(events::TIMEOUT),
    });
    pending.sort_by_key(|p| (p.t, p.kind));

    let mut rec = Recorder::new(model);
    let mut decision: Option<u64> = None;
    for p in pending {
        if decision.is_some_and(|d| p.t > d) {
            break;
        }
        match p.kind {
            Kind::Timeout => {
                if decision.is_some() {
                    continue;
                }
                decision = Some(p.t);
                rec.deliver(p.t, p.event)?;
            }
            Kind::ZoneEnter => {
                if rec.deliver(p.t, p.event)? {
                    decision = Some(p.t + sched.latency);
                }
            }
            _ => {
                rec.deliver(p.t, p.event)?;
            }
        }
    }
    let decision_time = decision.expect("timeout is always scheduled");

    let light = rec
        .config
        .state_of(refmodel::LIGHT)
        .and_then(LightPhase::from_name)
        .ok_or_else(|| SimError::IncompatibleModel("light chart left the known phases".into()))?;
    let code = project_code(&rec.config, light)?;
    let terminal = rec
        .config
        .state_of(refmodel::VEHICLE)
        .unwrap_or_default()
        .to_string();

    Ok(ScenarioTrace {
        id: index,
        seed_stream: rng.stream_seed(),
        jaywalker,
        events: rec.events,
        states: rec.states,
        decision_time: SimTime(decision_time),
        code,
        terminal,
    })
}

/// Scenarios `0..n_scenarios`, generated in parallel and returned in index
/// order. Output does not depend on scheduling.
pub fn simulate_batch(model: &SystemModel, params: &SimParams) -> Result<Vec<ScenarioTrace>, SimError> {
    check_compatible(model)?;
    let sched = params.schedule()?;
    (0..params.n_scenarios as u64)
        .into_par_iter()
        .map(|i| simulate_scheduled(model, params, &sched, i))
        .collect()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplayMismatch {
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error("internal events differ after env event {index}")]
    Emitted { index: usize },
    #[error("state timeline differs")]
    Timeline,
    #[error("terminal vehicle state differs")]
    Terminal,
}

/// Re-dispatches the trace's environment events from the initial
/// configuration and checks the recorded internal events, state timeline and
/// terminal state.
pub fn replay(model: &SystemModel, trace: &ScenarioTrace) -> Result<Configuration, ReplayMismatch> {
    let mut config = init(model);
    let mut states: StateTimeline = model
        .charts
        .iter()
        .map(|c| (c.name.clone(), vec![(SimTime(0), c.initial.clone())]))
        .collect();
    let mut cursor = 0usize;
    let mut env_index = 0usize;
    while cursor < trace.events.len() {
        let rec = &trace.events[cursor];
        if rec.origin != ENV_ORIGIN {
            return Err(ReplayMismatch::Emitted { index: env_index });
        }
        let event = Event {
            name: rec.name.clone(),
            payload: rec.payload.clone(),
            origin: rec.origin.clone(),
        };
        let step = dispatch(model, config, event)?;
        cursor += 1;
        for e in &step.emitted {
            match trace.events.get(cursor) {
                Some(r) if r.t == rec.t && r.origin == e.origin && r.name == e.name && r.payload == e.payload => {
                    cursor += 1
                }
                _ => return Err(ReplayMismatch::Emitted { index: env_index }),
            }
        }
        config = step.config;
        record_changes(&mut states, &config, rec.t);
        env_index += 1;
    }
    if states != trace.states {
        return Err(ReplayMismatch::Timeline);
    }
    if config.state_of(refmodel::VEHICLE) != Some(trace.terminal.as_str()) {
        return Err(ReplayMismatch::Terminal);
    }
    Ok(config)
}
