mod common;

use std::sync::Arc;

use inattention_core::agents::{deception_scores, p1_act_game, p1_act_mdp, p1_predict, p2_act};
use inattention_core::{game_solve, support_set, ActionDistribution, Belief, Player2Mode};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn deceptive_vertex_beats_every_mixture(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let game = common::random_game(&mut rng, 4, 3, 4, 0.8);
        let sol = game_solve(&game, 1e-8).unwrap();
        for s in 0..4 {
            let d1 = ActionDistribution::new(common::simplex(&mut rng, 3, true)).unwrap();
            let g = deception_scores(s, &d1, &sol);
            let chosen = p2_act(Player2Mode::Deceptive, s, &d1, &sol, &mut rng);
            for (a2, &x) in g.iter().enumerate() {
                prop_assert!(g[chosen] <= x);
                if x == g[chosen] {
                    prop_assert!(chosen <= a2, "tie must go to the lowest index");
                }
            }
            for _ in 0..1000 {
                let d2 = common::simplex(&mut rng, 4, false);
                let mixed: f64 = d2.iter().zip(&g).map(|(p, x)| p * x).sum();
                prop_assert!(g[chosen] <= mixed + 1e-9);
            }
            // Never worse for Player 2 than its own equilibrium play against d1.
            let assumed: f64 = sol.policy2.at(s).support().map(|(a2, p)| p * g[a2]).sum();
            prop_assert!(g[chosen] <= assumed + 1e-9);
            // g is r + γ E[V*] averaged over d1, up to the solver tolerance.
            let direct: f64 = d1.support().map(|(a1, p)| p * game.backup(s, a1, chosen, &sol.values)).sum();
            prop_assert!((direct - g[chosen]).abs() <= 1e-7);
        }
    }

    #[test]
    fn prediction_is_normalized_and_linear(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let mut rng = common::rng(seed);
        let game = common::random_game(&mut rng, 5, 2, 3, 0.9);
        let sol = game_solve(&game, 1e-6).unwrap();
        let b = Belief::new(common::simplex(&mut rng, 5, true)).unwrap();
        let c = Belief::new(common::simplex(&mut rng, 5, true)).unwrap();
        let mix: Vec<f64> = b.probs().iter().zip(c.probs()).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
        let mix = Belief::new(mix).unwrap();
        for a1 in 0..2 {
            let (pb, pc, pm) = (
                p1_predict(&b, a1, &sol.policy2, &game).unwrap(),
                p1_predict(&c, a1, &sol.policy2, &game).unwrap(),
                p1_predict(&mix, a1, &sol.policy2, &game).unwrap(),
            );
            for p in [&pb, &pc, &pm] {
                prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-10);
            }
            for k in 0..5 {
                prop_assert!((pm.get(k) - (lambda * pb.get(k) + (1.0 - lambda) * pc.get(k))).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn constant_reward_shift_keeps_choices(seed in any::<u64>(), c in -3.0f64..3.0) {
        let mut rng = common::rng(seed);
        let game = common::random_game(&mut rng, 4, 3, 3, 0.75);
        let shifted = game.map_rewards(|r| r + c).unwrap();
        let tol = 1e-9;
        let (a, b) = (game_solve(&game, tol).unwrap(), game_solve(&shifted, tol).unwrap());
        let shift = c / (1.0 - game.discount());
        let support = support_set(&a.policy1);
        for s in 0..4 {
            for d in support.distributions() {
                prop_assert!((b.q_dist(s, d) - a.q_dist(s, d) - shift).abs() <= 1e-6);
            }
        }
        for _ in 0..20 {
            let belief = Belief::new(common::simplex(&mut rng, 4, true)).unwrap();
            // Only compare choices whose margin is well above solver error.
            let w: Vec<f64> = (0..3).map(|a1| belief.support().map(|(s, p)| p * a.q_vs_pi2[s * 3 + a1]).sum()).collect();
            let mut sorted = w.clone();
            sorted.sort_by(|x, y| y.partial_cmp(x).unwrap());
            if sorted[0] - sorted[1] > 1e-5 {
                prop_assert_eq!(p1_act_mdp(&belief, &a.q_vs_pi2, 3), p1_act_mdp(&belief, &b.q_vs_pi2, 3));
            }
            let scores: Vec<f64> = support.distributions().iter().map(|d| belief.support().map(|(s, p)| p * a.q_dist(s, d)).sum()).collect();
            let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if scores.iter().filter(|&&x| x > best - 1e-5).count() == 1 {
                prop_assert_eq!(p1_act_game(&belief, &a, &support), p1_act_game(&belief, &b, &support_set(&a.policy1)));
            }
            let s = rng.random_range(0..4);
            let d1 = ActionDistribution::new(common::simplex(&mut rng, 3, true)).unwrap();
            let g = deception_scores(s, &d1, &a);
            let mut gs = g.clone();
            gs.sort_by(|x, y| x.partial_cmp(y).unwrap());
            if gs[1] - gs[0] > 1e-5 {
                let mut r = common::rng(0);
                prop_assert_eq!(p2_act(Player2Mode::Deceptive, s, &d1, &a, &mut r), p2_act(Player2Mode::Deceptive, s, &d1, &b, &mut r));
            }
        }
    }
}

#[test]
fn equilibrium_mode_samples_the_policy() {
    let mut rng = common::rng(3);
    let game = common::random_game(&mut rng, 3, 2, 3, 0.9);
    let sol = Arc::new(game_solve(&game, 1e-8).unwrap());
    let d1 = ActionDistribution::uniform(2);
    let mut counts = [0usize; 3];
    let n = 20_000;
    for _ in 0..n {
        counts[p2_act(Player2Mode::Equilibrium, 0, &d1, &sol, &mut rng)] += 1;
    }
    for (a2, &k) in counts.iter().enumerate() {
        let p = sol.policy2.at(0).get(a2);
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((k as f64 / n as f64 - p).abs() <= 5.0 * sd + 1e-12, "{counts:?} vs {:?}", sol.policy2.at(0));
    }
}
