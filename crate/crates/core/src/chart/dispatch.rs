use super::{ChartError, Configuration, Event, SystemModel};

pub const DEFAULT_MICROSTEP_LIMIT: usize = 1024;

/// Result of one macrostep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub config: Configuration,
    /// Every internal event emitted during the macrostep, in emission order.
    pub emitted: Vec<Event>,
}

/// Dispatches `event` with the default microstep limit.
pub fn dispatch(model: &SystemModel, config: Configuration, event: Event) -> Result<Step, ChartError> {
    dispatch_bounded(model, config, event, DEFAULT_MICROSTEP_LIMIT)
}

/// Run-to-completion dispatch of one external event.
///
/// Each microstep offers one event to every chart in model order. Within a
/// chart the first transition (document order) leaving the active state whose
/// event name matches and whose guard holds fires. All guards, including
/// `in(...)`, read the configuration as it was when the microstep began.
/// Emitted events go to the back of the internal queue, which is drained
/// FIFO before returning.
pub fn dispatch_bounded(
    model: &SystemModel,
    mut config: Configuration,
    event: Event,
    microstep_limit: usize,
) -> Result<Step, ChartError> {
    let mut emitted = Vec::new();
    microstep(model, &mut config, &event, &mut emitted);

    let mut processed = 0usize;
    while let Some(internal) = config.queue.pop_front() {
        processed += 1;
        if processed > microstep_limit {
            return Err(ChartError::Livelock { limit: microstep_limit });
        }
        microstep(model, &mut config, &internal, &mut emitted);
    }
    Ok(Step { config, emitted })
}

fn microstep(model: &SystemModel, config: &mut Configuration, event: &Event, emitted: &mut Vec<Event>) {
    let snapshot = config.active.clone();
    for chart in &model.charts {
        let Some(current) = snapshot.get(&chart.name) else {
            continue;
        };
        let fired = chart.transitions.iter().find(|t| {
            t.source == *current
                && t.event == event.name
                && t.guard
                    .as_ref()
                    .is_none_or(|g| g.holds(&event.payload, &snapshot))
        });
        if let Some(t) = fired {
            config.active.insert(chart.name.clone(), t.target.clone());
            for tpl in &t.emits {
                let out = tpl.instantiate(&event.payload, &chart.name);
                config.queue.push_back(out.clone());
                emitted.push(out);
            }
        }
    }
}
