use std::collections::{HashMap, HashSet};

use crate::chart::{Atom, SystemModel};

use super::{Diagnostic, LineIndex, ModelSpans, Severity, TransitionSpans};

/// Semantic checks over a structurally parsed model.
///
/// Spans are looked up by index; anything without a span (a model assembled
/// in code) falls back to the enclosing chart, then to the start of input.
pub(crate) fn check(model: &SystemModel, spans: &ModelSpans, index: &LineIndex<'_>) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |sev, code, span, msg| out.push(index.diagnostic(sev, code, span, msg));

    let chart_span = |ci: usize| spans.charts.get(ci).map(|c| c.whole).unwrap_or_default();
    let tspans = |ci: usize, ti: usize| -> Option<&TransitionSpans> { spans.charts.get(ci)?.transitions.get(ti) };

    let mut seen_charts = HashSet::new();
    for (ci, chart) in model.charts.iter().enumerate() {
        let cs = spans.charts.get(ci);
        if !seen_charts.insert(chart.name.as_str()) {
            let span = cs.map_or(chart_span(ci), |c| c.name);
            push(Severity::Error, "duplicate-chart", span, format!("duplicate chart name `{}`", chart.name));
        }

        let mut seen_states = HashSet::new();
        for (si, state) in chart.states.iter().enumerate() {
            if !seen_states.insert(state.as_str()) {
                let span = cs.and_then(|c| c.states.get(si)).map_or(chart_span(ci), |s| s.name);
                push(
                    Severity::Error,
                    "duplicate-state",
                    span,
                    format!("duplicate state `{state}` in chart `{}`", chart.name),
                );
            }
        }

        if !chart.has_state(&chart.initial) {
            let span = cs.map_or(chart_span(ci), |c| c.initial);
            push(
                Severity::Error,
                "undeclared-initial",
                span,
                format!("initial state `{}` is not declared in chart `{}`", chart.initial, chart.name),
            );
        }

        for (ti, t) in chart.transitions.iter().enumerate() {
            let ts = tspans(ci, ti);
            let whole = ts.map_or(chart_span(ci), |s| s.whole);
            if !chart.has_state(&t.source) {
                push(
                    Severity::Error,
                    "unknown-source",
                    whole,
                    format!("unknown source state `{}` in chart `{}`", t.source, chart.name),
                );
            }
            if !chart.has_state(&t.target) {
                push(
                    Severity::Error,
                    "unknown-target",
                    ts.map_or(whole, |s| s.target),
                    format!("unknown target state `{}` in chart `{}`", t.target, chart.name),
                );
            }
            for (ai, atom) in t.guard.iter().flat_map(|g| g.atoms.iter()).enumerate() {
                let Atom::InState { chart: other, state } = atom else {
                    continue;
                };
                let span = ts.and_then(|s| s.atoms.get(ai).copied()).unwrap_or(whole);
                match model.chart(other) {
                    None => push(
                        Severity::Error,
                        "unknown-chart",
                        span,
                        format!("unknown chart `{other}` in in(...)"),
                    ),
                    Some(c) if !c.has_state(state) => push(
                        Severity::Error,
                        "unknown-in-state",
                        span,
                        format!("unknown state `{other}.{state}` in in(...)"),
                    ),
                    Some(_) => {}
                }
            }
            for (ei, tpl) in t.emits.iter().enumerate() {
                let es = ts.and_then(|s| s.emits.get(ei));
                let mut fields = HashSet::new();
                for (ai, (field, _)) in tpl.args.iter().enumerate() {
                    if !fields.insert(field.as_str()) {
                        let span = es
                            .and_then(|e| e.args.get(ai).copied())
                            .or(es.map(|e| e.whole))
                            .unwrap_or(whole);
                        push(
                            Severity::Error,
                            "duplicate-field",
                            span,
                            format!("duplicate payload field `{field}` in emit `{}`", tpl.name),
                        );
                    }
                }
            }
        }
    }

    // Warnings.
    let consumed = model.alphabet();
    for (ci, chart) in model.charts.iter().enumerate() {
        let cs = spans.charts.get(ci);
        let mut incoming: HashMap<&str, usize> = HashMap::new();
        for t in &chart.transitions {
            if t.source != t.target {
                *incoming.entry(t.target.as_str()).or_default() += 1;
            }
        }
        for (si, state) in chart.states.iter().enumerate() {
            if *state != chart.initial && !incoming.contains_key(state.as_str()) {
                let span = cs.and_then(|c| c.states.get(si)).map_or(chart_span(ci), |s| s.name);
                push(
                    Severity::Warning,
                    "unreachable-state",
                    span,
                    format!("unreachable state `{state}` in chart `{}`", chart.name),
                );
            }
        }
        for (ti, t) in chart.transitions.iter().enumerate() {
            for (ei, tpl) in t.emits.iter().enumerate() {
                if !consumed.contains(tpl.name.as_str()) {
                    let span = tspans(ci, ti)
                        .and_then(|s| s.emits.get(ei).map(|e| e.whole))
                        .unwrap_or(chart_span(ci));
                    push(
                        Severity::Warning,
                        "unconsumed-event",
                        span,
                        format!("event `{}` is emitted but consumed by no chart", tpl.name),
                    );
                }
            }
        }
    }
    out
}
