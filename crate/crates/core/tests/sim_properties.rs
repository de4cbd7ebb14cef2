mod common;

use std::sync::Arc;

use inattention_core::scenarios::{self, GridConfig, RandomGameConfig};
use inattention_core::sim::{horizon_for, ExactOptions};
use inattention_core::{
    game_solve, ActionRule, Belief, Error, Player1Config, Player2Mode, Sensor, SensorBank, SensorPolicy, Simulator,
    StopRule, ZeroSumGame,
};

/// Two states that swap with probability 0.3; matching the state pays 1.
fn two_state_toy() -> (ZeroSumGame, SensorBank) {
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let mut transitions = Vec::new();
    let mut rewards = Vec::new();
    for s in 0..2 {
        for a1 in 0..2 {
            transitions.push(vec![(s, 0.7), (1 - s, 0.3)]);
            rewards.push(if a1 == s { 1.0 } else { 0.0 });
        }
    }
    let game = ZeroSumGame::new(names(&["x", "y"]), names(&["x", "y"]), names(&["-"]), transitions, rewards, 0.3, 0, Some(1.0)).unwrap();
    let noisy = Sensor::new("noisy", names(&["x?", "y?"]), vec![vec![0.8, 0.2], vec![0.2, 0.8]], 1.0).unwrap();
    (game, SensorBank::new(2, vec![noisy], 1.0).unwrap())
}

fn check_mc_inside(game: &ZeroSumGame, bank: &SensorBank, p1: &Player1Config, mode: Player2Mode, n: usize, tail: f64) {
    let horizon = horizon_for(tail, game.r_max(), game.discount()).max(1);
    let belief = Belief::dirac(game.n_states(), game.initial_state()).unwrap();
    let sim = Simulator::new(game, bank, p1, mode, horizon, belief).unwrap();
    let exact = sim.exact_eval(ExactOptions::new(horizon)).unwrap();
    let est = sim.estimate_return(n, 123).unwrap();
    let se = est.sd / (n as f64).sqrt();
    assert!(
        est.mean >= exact.lower - 4.0 * se && est.mean <= exact.upper + 4.0 * se,
        "{mode:?}: mean {} not in [{}, {}] ± 4·{se}",
        est.mean,
        exact.lower,
        exact.upper
    );
}

#[test]
fn two_state_toy_interval_and_monte_carlo() {
    let (game, bank) = two_state_toy();
    let sol = Arc::new(game_solve(&game, 1e-10).unwrap());
    let p1 = Player1Config::new(&game, sol, SensorPolicy::Weighted(StopRule::Budget(1.0)), ActionRule::Qmdp).unwrap();
    let horizon = horizon_for(1e-6, 1.0, 0.3);
    let belief = Belief::dirac(2, 0).unwrap();
    let sim = Simulator::new(&game, &bank, &p1, Player2Mode::Equilibrium, horizon, belief).unwrap();
    let exact = sim.exact_eval(ExactOptions::new(horizon)).unwrap();
    assert!(exact.upper - exact.lower < 2e-6);
    check_mc_inside(&game, &bank, &p1, Player2Mode::Equilibrium, 100_000, 1e-6);
}

#[test]
fn monte_carlo_agrees_with_exact_on_toys() {
    let (fig3, fig3_bank) = scenarios::fig3_game(0.5, 0.9).unwrap();
    let sol = Arc::new(game_solve(&fig3, 1e-8).unwrap());
    for rule in [ActionRule::Qmdp, ActionRule::SupportSet] {
        let p1 = Player1Config::new(&fig3, sol.clone(), SensorPolicy::Weighted(StopRule::Budget(1.0)), rule).unwrap();
        for mode in [Player2Mode::Equilibrium, Player2Mode::Deceptive] {
            check_mc_inside(&fig3, &fig3_bank, &p1, mode, 5_000, 1e-3);
        }
    }
    let mut rng = common::rng(8);
    for _ in 0..3 {
        let game = common::random_game(&mut rng, 3, 2, 2, 0.4);
        let bank = common::random_bank(&mut rng, 3, 2, 2, 1.0);
        let sol = Arc::new(game_solve(&game, 1e-9).unwrap());
        for policy in [SensorPolicy::Weighted(StopRule::Budget(1.0)), SensorPolicy::NonWeighted(1), SensorPolicy::Nothing] {
            let p1 = Player1Config::new(&game, sol.clone(), policy, ActionRule::SupportSet).unwrap();
            for mode in [Player2Mode::Equilibrium, Player2Mode::Deceptive] {
                check_mc_inside(&game, &bank, &p1, mode, 5_000, 1e-3);
            }
        }
    }
}

#[test]
fn random_selector_has_no_exact_evaluation() {
    let (game, bank) = two_state_toy();
    let sol = Arc::new(game_solve(&game, 1e-8).unwrap());
    let p1 = Player1Config::new(&game, sol, SensorPolicy::Random(1), ActionRule::Qmdp).unwrap();
    let sim = Simulator::new(&game, &bank, &p1, Player2Mode::Equilibrium, 5, Belief::dirac(2, 0).unwrap()).unwrap();
    assert!(matches!(sim.exact_eval(ExactOptions::new(5)), Err(Error::Unsupported(_))));
}

#[test]
fn node_cap_is_enforced() {
    let (game, bank) = two_state_toy();
    let sol = Arc::new(game_solve(&game, 1e-8).unwrap());
    let p1 = Player1Config::new(&game, sol, SensorPolicy::Weighted(StopRule::Budget(1.0)), ActionRule::Qmdp).unwrap();
    let sim = Simulator::new(&game, &bank, &p1, Player2Mode::Equilibrium, 40, Belief::dirac(2, 0).unwrap()).unwrap();
    let opts = ExactOptions { node_cap: 50, ..ExactOptions::new(40) };
    assert!(matches!(sim.exact_eval(opts), Err(Error::NodeCap { cap: 50 })));
}

#[test]
fn grid_episodes_pay_once() {
    let cfg = GridConfig::default();
    let (game, bank) = scenarios::line_defense(&cfg).unwrap();
    let sol = Arc::new(game_solve(&game, 1e-6).unwrap());
    for mode in [Player2Mode::Equilibrium, Player2Mode::Deceptive] {
        let e = scenarios::run_grid_experiment(&cfg, &game, &bank, sol.clone(), 1000, mode, 5).unwrap();
        assert_eq!(e.irregular_payments, 0, "{mode:?}");
        assert_eq!(e.returns.len(), 1000);
    }
    // From every line cell the next state is the terminal.
    for s in 0..cfg.terminal() {
        let (_, _, ay) = cfg.decode(s).unwrap();
        if ay == cfg.height - 1 {
            for a1 in 0..3 {
                for a2 in 0..9 {
                    assert_eq!(game.transition(s, a1, a2), &[(cfg.terminal(), 1.0)]);
                }
            }
        }
    }
}

#[test]
fn random_transition_entries_are_uniform_on_average() {
    let base = RandomGameConfig::default();
    let n = 10_000;
    let mut sums = [0.0f64; 3];
    for seed in 0..n {
        let (game, _) = scenarios::random_game(&RandomGameConfig { seed, ..base.clone() }).unwrap();
        let row = game.transition(seed as usize % 10, 1, 2);
        for (k, target) in [0usize, 4, 9].into_iter().enumerate() {
            sums[k] += row.iter().find(|&&(q, _)| q == target).map_or(0.0, |&(_, p)| p);
        }
    }
    for s in sums {
        assert!((s / n as f64 - 0.1).abs() <= 0.01, "{sums:?}");
    }
}

#[test]
fn random_games_rebuild_identically() {
    let cfg = RandomGameConfig { seed: 77, ..Default::default() };
    let (a, ab) = scenarios::random_game(&cfg).unwrap();
    let (b, bb) = scenarios::random_game(&cfg).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(ab, bb);
    assert!(a.validate().is_empty());
    for s in 0..10 {
        for a1 in 0..4 {
            for a2 in 0..4 {
                assert!((0.0..=1.0).contains(&a.reward(s, a1, a2)));
            }
        }
    }
}
