use std::fmt::Write;

use crate::chart::{ArgValue, Atom, SystemModel, Transition};

use super::{ChartSpans, EmitSpans, ModelSpans, SourceSpan, StateSpans, TransitionSpans};

/// Canonical rendering: two-space indentation, one transition per line,
/// transitions grouped under their source state in state order.
pub fn pretty_print(model: &SystemModel) -> String {
    pretty_print_with_spans(model).0
}

/// [`pretty_print`] plus the span of every element in the produced text.
pub fn pretty_print_with_spans(model: &SystemModel) -> (String, ModelSpans) {
    let mut out = String::new();
    let mut spans = ModelSpans::default();
    for (ci, chart) in model.charts.iter().enumerate() {
        if ci > 0 {
            out.push('\n');
        }
        let mut cs = ChartSpans {
            transitions: vec![TransitionSpans::default(); chart.transitions.len()],
            ..Default::default()
        };
        let start = out.len();
        out.push_str("statechart ");
        cs.name = push_span(&mut out, &chart.name);
        out.push_str(" {\n  initial ");
        cs.initial = push_span(&mut out, &chart.initial);
        out.push('\n');
        for state in &chart.states {
            let state_start = out.len();
            out.push_str("  state ");
            let name = push_span(&mut out, state);
            let outgoing: Vec<_> = chart
                .transitions
                .iter()
                .enumerate()
                .filter(|(_, t)| t.source == *state)
                .collect();
            if !outgoing.is_empty() {
                out.push_str(" {\n");
                for (ti, t) in outgoing {
                    out.push_str("    ");
                    cs.transitions[ti] = write_transition(&mut out, t);
                    out.push('\n');
                }
                out.push_str("  }");
            }
            cs.states.push(StateSpans {
                whole: SourceSpan::new(state_start + 2, out.len()),
                name,
            });
            out.push('\n');
        }
        out.push('}');
        cs.whole = SourceSpan::new(start, out.len());
        out.push('\n');
        spans.charts.push(cs);
    }
    (out, spans)
}

fn push_span(out: &mut String, text: &str) -> SourceSpan {
    let start = out.len();
    out.push_str(text);
    SourceSpan::new(start, out.len())
}

fn write_transition(out: &mut String, t: &Transition) -> TransitionSpans {
    let start = out.len();
    let mut spans = TransitionSpans::default();
    out.push_str("on ");
    spans.event = push_span(out, &t.event);
    if let Some(guard) = &t.guard {
        out.push_str(" [");
        for (i, atom) in guard.atoms.iter().enumerate() {
            if i > 0 {
                out.push_str(" && ");
            }
            let atom_start = out.len();
            match atom {
                Atom::Compare { field, op, value } => {
                    let _ = write!(out, "{field} {} {value}", op.symbol());
                }
                Atom::InState { chart, state } => {
                    let _ = write!(out, "in({chart}.{state})");
                }
            }
            spans.atoms.push(SourceSpan::new(atom_start, out.len()));
        }
        out.push(']');
    }
    for (i, tpl) in t.emits.iter().enumerate() {
        out.push_str(if i == 0 { " / " } else { ", " });
        let emit_start = out.len();
        let mut es = EmitSpans::default();
        out.push_str("emit ");
        out.push_str(&tpl.name);
        if !tpl.args.is_empty() {
            out.push('(');
            for (ai, (field, value)) in tpl.args.iter().enumerate() {
                if ai > 0 {
                    out.push_str(", ");
                }
                let arg_start = out.len();
                match value {
                    ArgValue::Literal(v) => {
                        let _ = write!(out, "{field}={v}");
                    }
                    ArgValue::Field(src) => {
                        let _ = write!(out, "{field}=${src}");
                    }
                }
                es.args.push(SourceSpan::new(arg_start, out.len()));
            }
            out.push(')');
        }
        es.whole = SourceSpan::new(emit_start, out.len());
        spans.emits.push(es);
    }
    out.push_str(" -> ");
    spans.target = push_span(out, &t.target);
    spans.whole = SourceSpan::new(start, out.len());
    spans
}
