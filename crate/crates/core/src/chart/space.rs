use std::collections::BTreeSet;

use super::{dispatch, init, ChartError, Configuration, Event, SystemModel};

/// Cross product of every chart's state list, lexicographic in
/// (chart order, state document order).
#[derive(Debug, Clone)]
pub struct StateSpace<'m> {
    model: &'m SystemModel,
    count: u64,
    cursor: Option<Vec<usize>>,
}

impl<'m> StateSpace<'m> {
    pub fn total(&self) -> u64 {
        self.count
    }
}

impl<'m> Iterator for StateSpace<'m> {
    type Item = Vec<&'m str>;

    fn next(&mut self) -> Option<Self::Item> {
        let cursor = self.cursor.as_mut()?;
        let model = self.model;
        let tuple = model
            .charts
            .iter()
            .zip(cursor.iter())
            .map(|(chart, &i)| chart.states[i].as_str())
            .collect();

        // Mixed-radix increment, last chart fastest.
        let mut done = true;
        for (pos, chart) in model.charts.iter().enumerate().rev() {
            cursor[pos] += 1;
            if cursor[pos] < chart.states.len() {
                done = false;
                break;
            }
            cursor[pos] = 0;
        }
        if done {
            self.cursor = None;
        }
        Some(tuple)
    }
}

/// Size and iterator of the combined state space.
pub fn enumerate_space(model: &SystemModel) -> Result<StateSpace<'_>, ChartError> {
    let count = model
        .charts
        .iter()
        .try_fold(1u64, |acc, c| acc.checked_mul(c.states.len() as u64))
        .ok_or(ChartError::Overflow)?;
    let cursor = (count > 0).then(|| vec![0; model.charts.len()]);
    Ok(StateSpace { model, count, cursor })
}

/// Breadth-first closure of the initial configuration under every alphabet
/// event, cut off after `bound` macrosteps.
pub fn reachable(model: &SystemModel, alphabet: &[Event], bound: usize) -> Result<BTreeSet<Configuration>, ChartError> {
    let start = init(model);
    let mut seen = BTreeSet::from([start.clone()]);
    let mut frontier = vec![start];
    for _ in 0..bound {
        let mut next = Vec::new();
        for config in &frontier {
            for event in alphabet {
                let step = dispatch(model, config.clone(), event.clone())?;
                if seen.insert(step.config.clone()) {
                    next.push(step.config);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(seen)
}
