#![allow(dead_code)]

use mnar_pcor::model::{Dataset, Mechanism, Roles};
use mnar_pcor::simulation::{simulate_sample, SimulationDesign};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn simulated(n: usize, mechanism: Mechanism, gamma0: f64, gamma20: f64, seed: u64) -> Dataset {
    let design = SimulationDesign::new(n, mechanism, gamma0, seed).with_gamma20(gamma20);
    simulate_sample(&design, 0).unwrap().to_dataset().unwrap()
}

/// Few, rarely selected rows with a Mills vector close to linear in the
/// design make the variance-correction denominator change sign for |γ| < 1.
pub fn rare_selection_dataset() -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 3000;
    let mut x1 = Vec::new();
    let mut x2 = Vec::new();
    let mut x3 = Vec::new();
    for _ in 0..n {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        let eta: f64 = rng.sample(StandardNormal);
        let e: f64 = rng.sample(StandardNormal);
        let z = -2.6 + 0.2 * a + eta > 0.0;
        x1.push(z.then_some(1.0 + 0.5 * a + 0.2 * b + e));
        x2.push(Some(a));
        x3.push(Some(0.3 * b));
    }
    let names = ["y", "x", "w"].map(String::from).to_vec();
    Dataset::new(names, vec![x1, x2, x3], Roles { target: 0, partner: 1, adjusters: vec![2] }).unwrap()
}
