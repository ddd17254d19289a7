use serde_json::Value;

use qlc_core::cycles::{CycleConfig, Stability, Termination};
use qlc_core::numfmt::to_json_pretty;
use qlc_core::rotation::RotationParam;
use qlc_core::scenario::{
    fold_exhibit, run_two_cycle_scenario, sweep_max_cycles, GridSpec, Order, ScenarioConfig, SweepParams,
};
use qlc_core::QlcError;

fn fixture(name: &str) -> Value {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Structural equality with numbers compared to `tol`.
fn close(a: &Value, b: &Value, tol: f64, path: &str) -> Result<(), String> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if (x - y).abs() <= tol {
                Ok(())
            } else {
                Err(format!("{path}: {x} vs {y}"))
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => x
            .iter()
            .zip(y)
            .enumerate()
            .try_for_each(|(i, (u, v))| close(u, v, tol, &format!("{path}[{i}]"))),
        (Value::Object(x), Value::Object(y)) if x.len() == y.len() => x.iter().try_for_each(|(k, u)| match y.get(k) {
            Some(v) => close(u, v, tol, &format!("{path}.{k}")),
            None => Err(format!("{path}.{k} missing")),
        }),
        _ if a == b => Ok(()),
        _ => Err(format!("{path}: {a} vs {b}")),
    }
}

fn check_fixture(c: f64, name: &str) {
    let cfg = ScenarioConfig::default();
    let r = run_two_cycle_scenario(c, Order::GammaFirst, &cfg).unwrap();
    let text = to_json_pretty(&r).unwrap();
    close(&serde_json::from_str(&text).unwrap(), &fixture(name), 1e-9, "$").unwrap();
    let again = to_json_pretty(&run_two_cycle_scenario(c, Order::GammaFirst, &cfg).unwrap()).unwrap();
    assert_eq!(text, again, "report not bitwise reproducible");
    assert_eq!(r.verdict.count, 2);
    assert_eq!(r.verdict.stabilities, [Stability::Stable, Stability::Unstable]);
    assert!(r.verdict.nested && r.verdict.enclose_only_origin);
}

#[test]
fn c2_matches_fixture() {
    check_fixture(2.0, "scenario_c2.json");
}

#[test]
fn c15_matches_fixture() {
    check_fixture(1.5, "scenario_c1.5.json");
}

#[test]
fn c1_fails_setup() {
    let r = run_two_cycle_scenario(1.0, Order::GammaFirst, &ScenarioConfig::default());
    assert!(matches!(r, Err(QlcError::StageFailed { .. })));
}

#[test]
fn stages_in_order_and_windows_hold() {
    let r = run_two_cycle_scenario(2.0, Order::GammaFirst, &ScenarioConfig::default()).unwrap();
    let names: Vec<&str> = r.stages.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["hamiltonian", "gamma", "beta", "lambda"]);
    for s in &r.stages[1..] {
        assert_eq!(s.gamma_window, Some(true), "{}", s.name);
        assert_eq!(s.census.len(), 2);
    }
    assert_eq!(r.stages[3].trace_window, Some(true));
    assert_eq!(r.stages[2].cycles.len(), 1);
    assert!(r.loop_value(RotationParam::Beta).is_some());
    assert!(r.loop_value(RotationParam::Lambda).is_some());
}

#[test]
fn alternate_orders_reach_two_cycles() {
    for order in [Order::BetaFirst, Order::GammaLambdaFirst] {
        let r = run_two_cycle_scenario(2.0, order, &ScenarioConfig::default()).unwrap();
        assert_eq!(r.verdict.count, 2, "{order:?}");
        assert_eq!(r.verdict.stabilities, [Stability::Stable, Stability::Unstable]);
    }
}

#[test]
fn fold_from_c2_endpoint() {
    let r = run_two_cycle_scenario(2.0, Order::GammaFirst, &ScenarioConfig::default()).unwrap();
    let f = fold_exhibit(&r.final_params(), r.delta / 4.0, &CycleConfig::default()).unwrap();
    assert_eq!(f.stable_branch.termination, Termination::FoldDetected);
    assert!((f.semistable_lambda - f.lambda_fold).abs() <= 1e-4);
    assert_eq!(f.semistable.stability, Stability::SemiStable);
    assert!(f.slopes_opposite());
    assert_eq!(f.past_fold_count, 0);
    let fold = f.stable_branch.fold.unwrap();
    let step = f.stable_branch.points.windows(2).last().map(|w| (w[1].mu - w[0].mu).abs()).unwrap();
    assert!((fold.last_x - fold.partner_x).abs() < 10.0 * step.max(fold.last_step_dx.abs()));
}

#[test]
fn gamma_only_grid_has_no_cycles() {
    let grid = GridSpec::LatinHypercube {
        n: 40,
        seed: 7,
        c: (1.05, 5.0),
        lambda: (0.0, 0.0),
        trace: (0.0, 0.0),
        gamma_margin: 0.02,
        only_gamma: true,
    };
    let s = sweep_max_cycles(&grid, &CycleConfig::default()).unwrap();
    assert_eq!(s.max_count, Some(0));
    assert!(s.inconclusive.is_empty());
}

#[test]
fn empty_grid() {
    let s = sweep_max_cycles(&GridSpec::Explicit { points: vec![] }, &CycleConfig::default()).unwrap();
    assert!(s.histogram.is_empty());
    assert_eq!(s.max_count, None);
}

#[test]
fn explicit_grid_drops_inadmissible_points() {
    let points = vec![
        SweepParams {
            c: 2.0,
            gamma: 1.0,
            beta: -1.8,
            lambda: 0.824067924398929,
        },
        // gamma outside its window
        SweepParams {
            c: 2.0,
            gamma: 0.1,
            beta: 0.0,
            lambda: 0.0,
        },
    ];
    let s = sweep_max_cycles(&GridSpec::Explicit { points }, &CycleConfig::default()).unwrap();
    assert_eq!(s.evaluated, 1);
    assert_eq!(s.rejected, 1);
    assert_eq!(s.max_count, Some(2));
}

#[test]
fn grid_json_round_trip() {
    let g = GridSpec::default();
    let text = serde_json::to_string(&g).unwrap();
    assert_eq!(serde_json::from_str::<GridSpec>(&text).unwrap(), g);
    assert!(text.contains(r#""kind":"composite""#));
}
