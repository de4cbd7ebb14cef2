//! Small random instances shared by the integration suites.
#![allow(dead_code)]

use inattention_core::{Mdp, Sensor, SensorBank, ZeroSumGame};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Normalized vector of `n` positive weights, some of them zeroed.
pub fn simplex(rng: &mut ChaCha8Rng, n: usize, sparse: bool) -> Vec<f64> {
    loop {
        let mut w: Vec<f64> = (0..n)
            .map(|_| if sparse && rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() })
            .collect();
        let total: f64 = w.iter().sum();
        if total > 1e-3 {
            w.iter_mut().for_each(|x| *x /= total);
            return w;
        }
    }
}

fn sparse_row(p: &[f64]) -> Vec<(usize, f64)> {
    p.iter().enumerate().filter(|(_, &x)| x > 0.0).map(|(i, &x)| (i, x)).collect()
}

pub fn random_game(rng: &mut ChaCha8Rng, ns: usize, na1: usize, na2: usize, gamma: f64) -> ZeroSumGame {
    let rows = ns * na1 * na2;
    let transitions = (0..rows).map(|_| sparse_row(&simplex(rng, ns, true))).collect();
    let rewards = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
    let names = |p: &str, n: usize| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    ZeroSumGame::new(names("s", ns), names("a", na1), names("b", na2), transitions, rewards, gamma, 0, Some(1.0))
        .unwrap()
}

pub fn random_mdp(rng: &mut ChaCha8Rng, ns: usize, na: usize, gamma: f64) -> Mdp {
    let rows = ns * na;
    let transitions = (0..rows).map(|_| sparse_row(&simplex(rng, ns, true))).collect();
    let rewards = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
    let names = |p: &str, n: usize| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    Mdp::new(names("s", ns), names("a", na), transitions, rewards, gamma, 0, Some(1.0)).unwrap()
}

/// Unit-cost sensors with random likelihood rows; some are deterministic
/// partitions so beliefs can collapse.
pub fn random_bank(rng: &mut ChaCha8Rng, ns: usize, n_sensors: usize, symbols: usize, budget: f64) -> SensorBank {
    let sensors = (0..n_sensors)
        .map(|i| {
            let partition = rng.random_bool(0.3);
            let likelihood = (0..ns)
                .map(|_| {
                    if partition {
                        let mut row = vec![0.0; symbols];
                        row[rng.random_range(0..symbols)] = 1.0;
                        row
                    } else {
                        simplex(rng, symbols, false)
                    }
                })
                .collect();
            let alphabet = (0..symbols).map(|k| format!("s{i}:o{k}")).collect();
            Sensor::new(format!("sensor{i}"), alphabet, likelihood, 1.0).unwrap()
        })
        .collect();
    SensorBank::new(ns, sensors, budget).unwrap()
}
