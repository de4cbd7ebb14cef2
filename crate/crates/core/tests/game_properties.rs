mod common;

use inattention_core::{ActionDistribution, StationaryPolicy};
use proptest::prelude::*;

fn random_policy(rng: &mut rand_chacha::ChaCha8Rng, ns: usize, na: usize) -> StationaryPolicy {
    let dists = (0..ns).map(|_| ActionDistribution::new(common::simplex(rng, na, true)).unwrap()).collect();
    StationaryPolicy::new(dists).unwrap()
}

fn dense(row: &[(usize, f64)], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for &(q, p) in row {
        out[q] += p;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn induced_rows_are_stochastic(seed in any::<u64>(), ns in 1usize..7, na1 in 1usize..4, na2 in 1usize..4) {
        let mut rng = common::rng(seed);
        let game = common::random_game(&mut rng, ns, na1, na2, 0.9);
        let pi2 = random_policy(&mut rng, ns, na2);
        let mdp = game.induced_mdp(&pi2).unwrap();
        prop_assert!(mdp.validate().is_empty());
        for s in 0..ns {
            for a in 0..na1 {
                let total: f64 = mdp.transition(s, a).iter().map(|&(_, p)| p).sum();
                prop_assert!((total - 1.0).abs() <= 1e-10);
                prop_assert!(mdp.transition(s, a).iter().all(|&(_, p)| p >= 0.0));
            }
        }
    }

    #[test]
    fn induced_mdp_is_linear_in_the_opponent(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let mut rng = common::rng(seed);
        let (ns, na1, na2) = (4, 2, 3);
        let game = common::random_game(&mut rng, ns, na1, na2, 0.8);
        let p = random_policy(&mut rng, ns, na2);
        let q = random_policy(&mut rng, ns, na2);
        let mixed = p.mix(&q, lambda).unwrap();
        let (mp, mq, mm) = (game.induced_mdp(&p).unwrap(), game.induced_mdp(&q).unwrap(), game.induced_mdp(&mixed).unwrap());
        for s in 0..ns {
            for a in 0..na1 {
                let want_r = lambda * mp.reward(s, a) + (1.0 - lambda) * mq.reward(s, a);
                prop_assert!((mm.reward(s, a) - want_r).abs() <= 1e-12);
                let (rp, rq, rm) = (dense(mp.transition(s, a), ns), dense(mq.transition(s, a), ns), dense(mm.transition(s, a), ns));
                for k in 0..ns {
                    prop_assert!((rm[k] - (lambda * rp[k] + (1.0 - lambda) * rq[k])).abs() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn dirac_opponent_slices_the_game() {
    let mut rng = common::rng(5);
    let game = common::random_game(&mut rng, 3, 2, 3, 0.9);
    let pi2 = StationaryPolicy::deterministic(&[2, 2, 2], 3);
    let mdp = game.induced_mdp(&pi2).unwrap();
    for s in 0..3 {
        for a in 0..2 {
            assert_eq!(mdp.reward(s, a), game.reward(s, a, 2));
            assert_eq!(dense(mdp.transition(s, a), 3), dense(game.transition(s, a, 2), 3));
        }
    }
}

#[test]
fn hand_computed_two_state_mixture() {
    use inattention_core::ZeroSumGame;
    let names = |p: &str| vec![format!("{p}0"), format!("{p}1")];
    // rows (s, a1, a2); only a1 = 0 matters below
    let transitions = vec![
        vec![(0, 1.0)], vec![(1, 1.0)],
        vec![(0, 0.5), (1, 0.5)], vec![(1, 1.0)],
        vec![(0, 0.2), (1, 0.8)], vec![(0, 1.0)],
        vec![(1, 1.0)], vec![(0, 1.0)],
    ];
    let rewards = vec![1.0, -1.0, 0.0, 0.0, 0.5, 0.25, 0.0, 0.0];
    let game = ZeroSumGame::new(names("s"), names("a"), names("b"), transitions, rewards, 0.9, 0, None).unwrap();
    let mdp = game.induced_mdp(&StationaryPolicy::uniform(2, 2)).unwrap();
    assert_eq!(mdp.reward(0, 0), 0.0);
    assert_eq!(mdp.reward(1, 0), 0.375);
    assert_eq!(dense(mdp.transition(0, 0), 2), vec![0.5, 0.5]);
    assert_eq!(dense(mdp.transition(1, 0), 2), vec![0.6, 0.4]);
}
