//! Writes the seeded datasets used by the extended-precision estimator
//! oracle (`tests/oracles/estimator_oracle.py`) as JSON on stdout.

use mnar_pcor::model::Mechanism;
use mnar_pcor::simulation::{simulate_sample, SimulationDesign};
use serde_json::{json, Value};

fn masked(values: &[f64], observed: &[bool]) -> Vec<Value> {
    values.iter().zip(observed).map(|(&v, &o)| if o { json!(v) } else { Value::Null }).collect()
}

fn main() {
    let a = [-0.6, -0.3, 0.0, 0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9];
    let b = [-0.4, 0.2, 0.3, 0.5, 0.7];
    let c = [(0.5, 0.4), (-0.3, 0.2), (0.2, -0.5), (0.7, 0.0), (0.0, 0.6)];

    let mut specs: Vec<(Mechanism, f64, f64, usize)> = Vec::new();
    specs.extend(a.iter().map(|&g| (Mechanism::A, g, 0.0, 200)));
    specs.extend(b.iter().map(|&g| (Mechanism::B, g, 0.0, 300)));
    specs.extend(c.iter().map(|&(g1, g2)| (Mechanism::C, g1, g2, 400)));

    let cases: Vec<Value> = specs
        .iter()
        .enumerate()
        .map(|(i, &(mechanism, g1, g2, n))| {
            let seed = 1000 + i as u64;
            let design = SimulationDesign::new(n, mechanism, g1, seed).with_gamma20(g2);
            let s = simulate_sample(&design, 0).expect("valid design");
            json!({
                "id": i,
                "mechanism": mechanism.to_string(),
                "seed": seed,
                "n": n,
                "gamma1": g1,
                "gamma2": g2,
                "x1": masked(&s.target, &s.target_observed),
                "x2": masked(&s.partner, &s.partner_observed),
                "age": s.age,
                "hypertension": s.hypertension,
            })
        })
        .collect();
    println!("{}", serde_json::to_string(&json!({ "cases": cases })).unwrap());
}
