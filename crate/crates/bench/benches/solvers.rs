use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use inattention_core::equilibrium::DeltaMode;
use inattention_core::scenarios::{self, GridConfig, RandomGameConfig};
use inattention_core::sensing::greedy_select;
use inattention_core::{
    game_solve, support_set, ActionRule, Belief, DeltaMap, Player1Config, Player2Mode, SensorPolicy, Simulator,
    StopRule,
};

fn stage_games(c: &mut Criterion) {
    let (game, _) = scenarios::line_defense(&GridConfig::default()).unwrap();
    let sol = game_solve(&game, 1e-6).unwrap();
    let s0 = game.initial_state();
    let stage = sol.stage_game(s0);
    c.bench_function("matrix_game_3x9", |b| b.iter(|| black_box(&stage).solve(1e-9).unwrap()));
}

fn shapley(c: &mut Criterion) {
    let (fig3, _) = scenarios::fig3_game(0.5, 0.9).unwrap();
    c.bench_function("shapley_fig3", |b| b.iter(|| game_solve(black_box(&fig3), 1e-6).unwrap()));
    let (random, _) = scenarios::random_game(&RandomGameConfig { seed: 3, ..Default::default() }).unwrap();
    c.bench_function("shapley_random_10x4x4", |b| b.iter(|| game_solve(black_box(&random), 1e-6).unwrap()));
    let (grid, _) = scenarios::line_defense(&GridConfig::default()).unwrap();
    let mut group = c.benchmark_group("slow");
    group.sample_size(10);
    group.bench_function("shapley_grid", |b| b.iter(|| game_solve(black_box(&grid), 1e-6).unwrap()));
    group.finish();
}

fn selection(c: &mut Criterion) {
    let (game, bank) = scenarios::random_game(&RandomGameConfig { seed: 5, ..Default::default() }).unwrap();
    let sol = game_solve(&game, 1e-6).unwrap();
    let delta = DeltaMap::compute(&sol, &DeltaMode::PerDistribution(support_set(&sol.policy1))).unwrap();
    let belief = Belief::uniform(game.n_states());
    c.bench_function("greedy_k2_of_10", |b| {
        b.iter(|| greedy_select(black_box(&belief), &bank, &delta, StopRule::Budget(2.0)).unwrap())
    });
}

fn episodes(c: &mut Criterion) {
    let (game, bank) = scenarios::random_game(&RandomGameConfig { seed: 7, ..Default::default() }).unwrap();
    let sol = Arc::new(game_solve(&game, 1e-6).unwrap());
    let p1 = Player1Config::new(&game, sol, SensorPolicy::Weighted(StopRule::Budget(2.0)), ActionRule::SupportSet).unwrap();
    let belief = Belief::dirac(game.n_states(), game.initial_state()).unwrap();
    let sim = Simulator::new(&game, &bank, &p1, Player2Mode::Deceptive, 66, belief).unwrap();
    let mut seed = 0;
    c.bench_function("random_game_episode", |b| {
        b.iter(|| {
            seed += 1;
            sim.run_episode(seed).unwrap()
        })
    });
}

criterion_group!(benches, stage_games, shapley, selection, episodes);
criterion_main!(benches);
