//! Text format: round-trips, parser totality, diagnostics.

use chartcov_core::chart::{ArgValue, Atom, CmpOp, EventTemplate, Guard, StateChart, SystemModel, Transition, Value};
use chartcov_core::dsl::{parse, parse_model, pretty_print, validate, Severity};
use chartcov_core::refmodel::{builtin_model, INTERSECTION_SCD};
use proptest::prelude::*;

const OPS: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];
const EVENTS: [&str; 4] = ["GO", "STOP", "tick", "Ev_2"];
const FIELDS: [&str; 3] = ["a", "speed", "ok_1"];

fn value() -> impl Strategy<Value = Value> {
    prop_oneof![any::<bool>().prop_map(Value::Bool), (-1000i64..1000).prop_map(Value::Int)]
}

fn atom(states: usize, chart: String) -> impl Strategy<Value = Atom> {
    prop_oneof![
        (0..FIELDS.len(), 0..OPS.len(), value()).prop_map(|(f, o, v)| Atom::Compare {
            field: FIELDS[f].into(),
            op: OPS[o],
            value: v,
        }),
        (0..states).prop_map(move |s| Atom::InState {
            chart: chart.clone(),
            state: format!("S{s}"),
        }),
    ]
}

fn template() -> impl Strategy<Value = EventTemplate> {
    let arg = prop_oneof![
        value().prop_map(ArgValue::Literal),
        (0..FIELDS.len()).prop_map(|f| ArgValue::Field(FIELDS[f].into())),
    ];
    (0..EVENTS.len(), proptest::sample::subsequence(FIELDS.to_vec(), 0..=2), proptest::collection::vec(arg, 2))
        .prop_map(|(e, names, args)| EventTemplate {
            name: EVENTS[e].into(),
            args: names.into_iter().map(String::from).zip(args).collect(),
        })
}

fn chart(index: usize) -> impl Strategy<Value = StateChart> {
    (1usize..=4).prop_flat_map(move |n| {
        let name = format!("c{index}");
        let transition = (
            0..n,
            0..EVENTS.len(),
            proptest::collection::vec(atom(n, name.clone()), 0..=2),
            proptest::collection::vec(template(), 0..=2),
            0..n,
        )
            .prop_map(|(src, ev, atoms, emits, dst)| Transition {
                source: format!("S{src}"),
                event: EVENTS[ev].into(),
                guard: (!atoms.is_empty()).then(|| Guard::new(atoms)),
                emits,
                target: format!("S{dst}"),
            });
        (0..n, proptest::collection::vec(transition, 0..=5)).prop_map(move |(init, transitions)| StateChart {
            name: name.clone(),
            states: (0..n).map(|s| format!("S{s}")).collect(),
            initial: format!("S{init}"),
            transitions,
        })
    })
}

fn model() -> impl Strategy<Value = SystemModel> {
    (1usize..=3).prop_flat_map(|n| {
        (0..n)
            .map(chart)
            .collect::<Vec<_>>()
            .prop_map(SystemModel::new)
    })
}

/// Printing groups transitions under their source state; within a source the
/// order is kept, which is all that dispatch observes.
fn grouped(mut m: SystemModel) -> SystemModel {
    for c in &mut m.charts {
        let states = c.states.clone();
        c.transitions
            .sort_by_key(|t| states.iter().position(|s| *s == t.source).unwrap_or(usize::MAX));
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn print_parse_round_trip(m in model()) {
        let text = pretty_print(&m);
        let back = parse_model(&text).map_err(|d| TestCaseError::fail(format!("{d:?}\n{text}")))?;
        prop_assert_eq!(&back, &grouped(m));
        prop_assert_eq!(pretty_print(&back), text);
    }

    #[test]
    fn parser_is_total_on_arbitrary_text(text in "\\PC{0,200}") {
        check_total(&text)?;
    }

    #[test]
    fn parser_is_total_on_mutated_reference(pos in 0usize..INTERSECTION_SCD.len(), len in 0usize..12, junk in "[{}\\[\\]()=$/<>!&#a-z0-9 \n.-]{0,3}") {
        let mut text = INTERSECTION_SCD.as_bytes().to_vec();
        let end = (pos + len).min(text.len());
        text.splice(pos..end, junk.bytes());
        check_total(&String::from_utf8_lossy(&text))?;
    }
}

fn check_total(text: &str) -> Result<(), TestCaseError> {
    let parsed = parse(text);
    let chars = text.chars().count();
    let lines = text.split('\n').count();
    let has_error = parsed.diagnostics.iter().any(|d| d.is_error());
    prop_assert_eq!(parsed.model.is_none(), has_error);
    for d in &parsed.diagnostics {
        prop_assert!(d.span.start <= d.span.end && d.span.end <= text.len());
        prop_assert!(d.line >= 1 && d.line <= lines);
        prop_assert!(d.column >= 1 && d.column <= chars + 1);
        prop_assert!(!d.code.is_empty());
    }
    Ok(())
}

#[test]
fn reference_file_is_a_fixpoint() {
    let m = parse_model(INTERSECTION_SCD).unwrap();
    assert_eq!(m, builtin_model());
    let once = pretty_print(&m);
    let twice = pretty_print(&parse_model(&once).unwrap());
    assert_eq!(once, twice);
    assert!(validate(&m).is_empty());
}

#[test]
fn unknown_target_is_located() {
    let text = "statechart a {\n  initial S\n  state S {\n    on GO -> Nowhere\n  }\n}\n";
    let diags = parse_model(text).unwrap_err();
    assert_eq!(diags.len(), 1);
    let d = &diags[0];
    assert_eq!((d.line, d.column, d.code), (4, 14, "unknown-target"));
    assert_eq!(&text[d.span.start..d.span.end], "Nowhere");
}

#[test]
fn columns_count_characters() {
    let text = "# é\nstatechart a { initial S state S { on GO -> ü } }";
    let diags = parse(text).diagnostics;
    assert!(diags.iter().any(|d| d.code == "lex" && d.line == 2));
}

#[test]
fn orphan_state_warns_once() {
    let text = "statechart light {\n  initial Red\n  state Red { on PHASE_ELAPSED -> Green }\n  state Green { on PHASE_ELAPSED -> Red }\n  state Off\n}\n";
    let parsed = parse(text);
    assert!(parsed.model.is_some());
    assert_eq!(parsed.diagnostics.len(), 1);
    let d = &parsed.diagnostics[0];
    assert_eq!(d.severity, Severity::Warning);
    assert_eq!(d.code, "unreachable-state");
    assert!(d.message.contains("`Off`"));
}

#[test]
fn duplicate_chart_is_an_error() {
    let diags = parse_model("statechart a { initial S state S }\nstatechart a { initial T state T }").unwrap_err();
    assert_eq!(diags[0].code, "duplicate-chart");
    assert_eq!(diags[0].line, 2);
}
