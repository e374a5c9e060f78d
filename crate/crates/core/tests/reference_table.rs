//! Reference savings for every method and scenario, fed through the
//! comparison code; each percentage must match the reference one to 0.01.

use std::path::PathBuf;

use microgrid_rl::agents::Algorithm;
use microgrid_rl::harness::{compare, format_comparison, Method, RunSummary, Scenario};

const SCENARIOS: [Scenario; 4] = [Scenario::Basic5, Scenario::Basic9, Scenario::Forecast5, Scenario::Forecast9];

/// Savings (thousands of GBP) per scenario, then the reference percentage.
fn reference() -> Vec<(Method, [f64; 4], Option<[f64; 4]>)> {
    let dqn = |a| Method::Dqn(a);
    vec![
        (dqn(Algorithm::Dqn), [75.00, 68.58, 78.91, 76.1], None),
        (dqn(Algorithm::Ddqn), [71.46, 70.88, 81.02, 77.97], Some([-4.72, 3.35, 2.67, 2.46])),
        (dqn(Algorithm::D3qn), [75.11, 73.36, 80.69, 79.83], Some([0.15, 6.97, 2.26, 4.90])),
        (dqn(Algorithm::Per), [76.69, 72.29, 81.55, 77.76], Some([2.25, 5.41, 3.35, 2.18])),
        (dqn(Algorithm::MultiStep), [70.55, 64.95, 72.56, 76.79], Some([-5.93, -5.29, -8.05, 0.91])),
        (dqn(Algorithm::Noisy), [76.47, 73.26, 79.65, 75.98], Some([1.96, 6.82, 0.94, -0.16])),
        (dqn(Algorithm::C51), [79.25, 81.56, 85.28, 83.30], Some([5.67, 18.93, 8.07, 9.46])),
        (dqn(Algorithm::Rainbow), [79.46, 80.00, 89.33, 91.49], Some([5.95, 16.65, 13.20, 20.22])),
        (Method::Ddpg, [77.14, 77.14, 82.93, 82.93], Some([2.85, 12.48, 5.09, 8.98])),
        (Method::Lp, [79.54; 4], Some([6.05, 15.98, 0.80, 4.52])),
    ]
}

fn runs() -> Vec<RunSummary> {
    let mut out = Vec::new();
    for (method, savings, _) in reference() {
        for (scenario, k) in SCENARIOS.iter().zip(savings) {
            out.push(RunSummary {
                dir: PathBuf::from(format!("{method}-{scenario}")),
                method,
                scenario: *scenario,
                seed: 0,
                eval_savings: k * 1000.0,
                cumulative: vec![k * 1000.0],
            });
        }
    }
    out
}

#[test]
fn every_reference_percentage_is_reproduced() {
    let rows = compare(&runs(), true).unwrap();
    assert_eq!(rows.len(), 40);
    for (method, savings, percents) in reference() {
        for (i, scenario) in SCENARIOS.iter().enumerate() {
            let row = rows
                .iter()
                .find(|r| r.method == method && r.scenario == *scenario)
                .unwrap();
            assert!((row.mean_k - savings[i]).abs() < 1e-9);
            let got = row.vs_dqn.unwrap();
            let want = percents.map_or(0.0, |p| p[i]);
            assert!(
                (got - want).abs() <= 0.01,
                "{method} {scenario}: {got:.4} vs reference {want}"
            );
        }
    }
}

#[test]
fn formatted_table_lists_every_method() {
    let text = format_comparison(&compare(&runs(), true).unwrap());
    for (method, _, _) in reference() {
        assert!(text.contains(method.name()), "{method} missing from\n{text}");
    }
    assert!(text.contains("+20.22%"), "{text}");
}
