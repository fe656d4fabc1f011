use chartcov_core::refmodel::{builtin_model, project_code, LightPhase, LIGHT};
use chartcov_core::sim::{read_traces, replay, simulate_batch, simulate_one, write_traces, ScenarioTrace, SimParams, SimTime};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = SimParams> {
    (any::<u64>(), 0.0..=1.0, 0.0..=1.0, 0.0..=1.0, 0.0..=1.0, 0.0..=1.0).prop_map(|(seed, vru, det, loc, tx, jay)| SimParams {
        n_scenarios: 24,
        seed,
        p_vru: vru,
        p_detect: det,
        p_locate: loc,
        p_tx: tx,
        p_jaywalk: jay,
        ..SimParams::default()
    })
}

fn light_at(trace: &ScenarioTrace, t: SimTime) -> LightPhase {
    let (_, timeline) = trace.states.iter().find(|(c, _)| c == LIGHT).unwrap();
    let (_, state) = timeline.iter().rev().find(|(at, _)| *at <= t).unwrap();
    LightPhase::from_name(state).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_file_round_trip(p in params()) {
        let traces = simulate_batch(&builtin_model(), &p).unwrap();
        let mut buf = Vec::new();
        write_traces(&traces, &mut buf).unwrap();
        prop_assert_eq!(read_traces(buf.as_slice()).unwrap(), traces);
    }

    #[test]
    fn traces_replay_and_project(p in params()) {
        let m = builtin_model();
        for t in simulate_batch(&m, &p).unwrap() {
            prop_assert!(t.events.windows(2).all(|w| w[0].t <= w[1].t));
            let config = replay(&m, &t).map_err(|e| TestCaseError::fail(format!("{e:?}")))?;
            prop_assert_eq!(project_code(&config, light_at(&t, t.decision_time)).unwrap(), t.code);
            prop_assert!(t.code.is_feasible());
        }
    }

    #[test]
    fn streams_do_not_depend_on_batch(p in params(), i in 0u64..24) {
        let m = builtin_model();
        let batch = simulate_batch(&m, &p).unwrap();
        prop_assert_eq!(&simulate_one(&m, &p, i).unwrap(), &batch[i as usize]);
    }
}

/// Terminal vehicle state from the sampled outcomes, written out by hand.
fn inconclusive(vru: bool, detect: bool, locate: bool, tx: bool) -> bool {
    if !tx {
        return true;
    }
    vru && detect && !locate
}

#[test]
fn outcome_tree_matches_closed_form() {
    let (pv, pd, pl, pt) = (0.5, 0.9, 0.75, 0.9);
    let mut mass = 0.0;
    for bits in 0u8..16 {
        let b = |i: u8| bits & (1 << i) != 0;
        let (vru, det, loc, tx) = (b(0), b(1), b(2), b(3));
        let w = |flag: bool, p: f64| if flag { p } else { 1.0 - p };
        if inconclusive(vru, det, loc, tx) {
            mass += w(vru, pv) * w(det, pd) * w(loc, pl) * w(tx, pt);
        }
    }
    let closed = pv * (pd * (1.0 - pl) * pt + (1.0 - pt)) + (1.0 - pv) * (1.0 - pt);
    assert!((mass - closed).abs() < 1e-12);
    assert!((closed - 0.20125).abs() < 1e-12);
}

#[test]
fn localization_rates_with_certain_vru() {
    let p = SimParams {
        n_scenarios: 10_000,
        seed: 2024,
        p_vru: 1.0,
        ..SimParams::default()
    };
    let traces = simulate_batch(&builtin_model(), &p).unwrap();
    let n = traces.len() as f64;
    let frac = |f: &dyn Fn(&ScenarioTrace) -> bool| traces.iter().filter(|t| f(t)).count() as f64 / n;
    let cases: [(&str, f64, f64); 3] = [
        ("located", frac(&|t| t.code.located == 1), p.p_detect * p.p_locate),
        ("detected only", frac(&|t| t.code.detected == 1 && t.code.located == 0), p.p_detect * (1.0 - p.p_locate)),
        ("undetected", frac(&|t| t.code.detected == 0), 1.0 - p.p_detect),
    ];
    for (what, got, want) in cases {
        let sigma = (want * (1.0 - want) / n).sqrt();
        assert!((got - want).abs() <= 3.0 * sigma, "{what}: {got} vs {want} (σ={sigma})");
    }
}

#[test]
fn jaywalkers_only_with_vru() {
    let p = SimParams {
        n_scenarios: 500,
        seed: 8,
        p_vru: 0.0,
        p_jaywalk: 1.0,
        ..SimParams::default()
    };
    assert!(simulate_batch(&builtin_model(), &p).unwrap().iter().all(|t| !t.jaywalker));
}
