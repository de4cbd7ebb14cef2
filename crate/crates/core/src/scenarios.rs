//! Concrete instances: the two-state confirmation-bias MDP, the five-state
//! deception game, the line-defense grid world and random games, plus the
//! drivers that run the grid and random-game experiments.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{ActionRule, Player1Config, Player2Mode, SensorPolicy};
use crate::csv::{num, Table};
use crate::equilibrium::EquilibriumSolution;
use crate::error::{Error, Result};
use crate::game::{Belief, Mdp, SparseRow, ZeroSumGame};
use crate::sensing::{Sensor, SensorBank, StopRule};
use crate::sim::{horizon_for, ReturnEstimate, Simulator};

fn names(n: usize, prefix: &str) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn check_discount(gamma: f64) -> Result<()> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("discount {gamma} outside [0, 1)")))
    }
}

/// Two absorbing states `Left` and `Right`; the action matching the state
/// pays 1. The single sensor always reports `null`.
pub fn fig1_mdp(gamma: f64) -> Result<(Mdp, SensorBank)> {
    check_discount(gamma)?;
    let transitions = vec![vec![(0, 1.0)], vec![(0, 1.0)], vec![(1, 1.0)], vec![(1, 1.0)]];
    let rewards = vec![1.0, 0.0, 0.0, 1.0];
    let mdp = Mdp::new(strings(&["Left", "Right"]), strings(&["l", "r"]), transitions, rewards, gamma, 0, Some(1.0))?;
    let null = Sensor::new("null", strings(&["null"]), vec![vec![1.0], vec![1.0]], 1.0)?;
    Ok((mdp, SensorBank::new(2, vec![null], 1.0)?))
}

/// States `Start, LU, LD, RU, RD`. Player 2's action at `Start` picks the
/// left or right pair, each member with probability 0.5; the leaves are
/// absorbing and pay Player 1 for matching actions (`1` on the left pair,
/// `1 − ε` on the right). Sensor `up` separates `{LU, RU}`, sensor `left`
/// separates `{LU, LD}`.
pub fn fig3_game(epsilon: f64, gamma: f64) -> Result<(ZeroSumGame, SensorBank)> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} outside (0, 1)")));
    }
    check_discount(gamma)?;
    const L: usize = 0;
    const R: usize = 1;
    let mut transitions = Vec::with_capacity(20);
    let mut rewards = Vec::with_capacity(20);
    for s in 0..5 {
        for a1 in [L, R] {
            for a2 in [L, R] {
                if s == 0 {
                    let pair = if a2 == L { [1, 2] } else { [3, 4] };
                    transitions.push(vec![(pair[0], 0.5), (pair[1], 0.5)]);
                    rewards.push(0.0);
                } else {
                    transitions.push(vec![(s, 1.0)]);
                    let paid = match (s, a1) {
                        (1, L) | (2, R) => 1.0,
                        (3, R) | (4, L) => 1.0 - epsilon,
                        _ => 0.0,
                    };
                    rewards.push(paid);
                }
            }
        }
    }
    let game = ZeroSumGame::new(
        strings(&["Start", "LU", "LD", "RU", "RD"]),
        strings(&["l", "r"]),
        strings(&["l", "r"]),
        transitions,
        rewards,
        gamma,
        0,
        Some(1.0),
    )?;
    let partition = |name: &str, hits: [usize; 2]| {
        let likelihood = (0..5)
            .map(|s| if hits.contains(&s) { vec![1.0, 0.0] } else { vec![0.0, 1.0] })
            .collect();
        Sensor::new(name, vec![format!("{name}:True"), format!("{name}:False")], likelihood, 1.0)
    };
    let bank = SensorBank::new(5, vec![partition("up", [1, 3])?, partition("left", [1, 2])?], 1.0)?;
    Ok((game, bank))
}

/// Line-defense grid world. Coordinates in the config are 1-based; the
/// defense line is the row at depth `height`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    /// Defender's line coordinate.
    pub p1_start: usize,
    /// Attacker's (line coordinate, depth).
    pub p2_start: (usize, usize),
    pub move_success: f64,
    pub coupling: MoveCoupling,
    pub sensor_true: f64,
    /// Costs of the line sensor, the depth sensor and the free self sensor.
    pub costs: [f64; 3],
    pub budget: f64,
    pub gamma: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            width: 11,
            height: 11,
            p1_start: 6,
            p2_start: (7, 1),
            move_success: 0.9,
            coupling: MoveCoupling::AttackerOnly,
            sensor_true: 0.7,
            costs: [1.0, 1.0, 0.0],
            budget: 1.0,
            gamma: 0.99,
        }
    }
}

/// How the two players' move successes are correlated. Each player reaches
/// its target with probability `move_success` under both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveCoupling {
    /// One draw per step: both players move, or both stay.
    Joint,
    /// Separate draws per player.
    Independent,
    /// Only the attacker's move can fail; the defender always arrives.
    AttackerOnly,
}

/// Bank indices of the line, depth and self sensors.
pub const GRID_X_SENSOR: usize = 0;
pub const GRID_Y_SENSOR: usize = 1;
pub const GRID_SELF_SENSOR: usize = 2;

/// Attacker moves as (name, line step, depth step).
const ATTACKER_MOVES: [(&str, isize, isize); 9] = [
    ("SW", -1, -1),
    ("S", 0, -1),
    ("SE", 1, -1),
    ("W", -1, 0),
    ("stay", 0, 0),
    ("E", 1, 0),
    ("NW", -1, 1),
    ("N", 0, 1),
    ("NE", 1, 1),
];

impl GridConfig {
    pub fn n_states(&self) -> usize {
        self.width * self.width * self.height + 1
    }

    pub fn terminal(&self) -> usize {
        self.n_states() - 1
    }

    /// State index from 0-based defender coordinate and attacker cell.
    pub fn encode(&self, dx: usize, ax: usize, ay: usize) -> usize {
        (dx * self.width + ax) * self.height + ay
    }

    /// Inverse of [`encode`](Self::encode); `None` for the terminal state.
    pub fn decode(&self, s: usize) -> Option<(usize, usize, usize)> {
        if s >= self.terminal() {
            return None;
        }
        let ay = s % self.height;
        let rest = s / self.height;
        Some((rest / self.width, rest % self.width, ay))
    }

    pub fn initial_state(&self) -> usize {
        self.encode(self.p1_start - 1, self.p2_start.0 - 1, self.p2_start.1 - 1)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.width < 2 || self.height < 2 {
            return bad("grid needs at least 2 cells per side".into());
        }
        if !(1..=self.width).contains(&self.p1_start) {
            return bad(format!("defender start {} outside 1..={}", self.p1_start, self.width));
        }
        let (x, y) = self.p2_start;
        if !(1..=self.width).contains(&x) || !(1..=self.height).contains(&y) {
            return bad(format!("attacker start ({x}, {y}) outside the grid"));
        }
        for (name, p) in [("move_success", self.move_success), ("sensor_true", self.sensor_true)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} outside [0, 1]"));
            }
        }
        if self.costs.iter().any(|&c| !(c >= 0.0)) || !(self.budget >= 0.0) {
            return bad("costs and budget must be nonnegative".into());
        }
        check_discount(self.gamma)
    }

    /// Truncation horizon for episodes that never reach the line.
    pub fn horizon(&self) -> usize {
        horizon_for(1e-3, self.r_max(), self.gamma)
    }

    pub fn r_max(&self) -> f64 {
        (self.width - 1) as f64
    }
}

fn clip(x: usize, delta: isize, n: usize) -> usize {
    (x as isize + delta).clamp(0, n as isize - 1) as usize
}

/// Noisy coordinate reading: `sensor_true` on the truth, the rest split over
/// in-range neighbors.
fn coordinate_row(truth: usize, n: usize, p_true: f64) -> Vec<f64> {
    let mut row = vec![0.0; n];
    let neighbors: Vec<usize> = [truth.checked_sub(1), Some(truth + 1).filter(|&x| x < n)]
        .into_iter()
        .flatten()
        .collect();
    row[truth] = p_true;
    for &x in &neighbors {
        row[x] = (1.0 - p_true) / neighbors.len() as f64;
    }
    row
}

/// Builds the grid game and its three sensors: attacker line coordinate,
/// attacker depth, and the defender's own position (free).
pub fn line_defense(cfg: &GridConfig) -> Result<(ZeroSumGame, SensorBank)> {
    cfg.validate()?;
    let (w, h, p) = (cfg.width, cfg.height, cfg.move_success);
    let ns = cfg.n_states();
    let terminal = cfg.terminal();
    let mut transitions: Vec<SparseRow> = Vec::with_capacity(ns * 27);
    let mut rewards = Vec::with_capacity(ns * 27);
    let mut state_names = Vec::with_capacity(ns);
    for s in 0..ns {
        let Some((dx, ax, ay)) = cfg.decode(s) else {
            state_names.push("terminal".to_string());
            for _ in 0..27 {
                transitions.push(vec![(terminal, 1.0)]);
                rewards.push(0.0);
            }
            continue;
        };
        state_names.push(format!("d{}|a{},{}", dx + 1, ax + 1, ay + 1));
        for a1 in 0..3 {
            let dx_to = clip(dx, [-1, 1, 0][a1], w);
            for a2 in 0..9 {
                if ay == h - 1 {
                    transitions.push(vec![(terminal, 1.0)]);
                    rewards.push(-(dx.abs_diff(ax) as f64));
                    continue;
                }
                let (_, step_x, step_y) = ATTACKER_MOVES[a2];
                let ax_to = clip(ax, step_x, w);
                let ay_to = clip(ay, step_y, h);
                let mut row = Vec::with_capacity(4);
                match cfg.coupling {
                    MoveCoupling::Joint => {
                        row.push((cfg.encode(dx_to, ax_to, ay_to), p));
                        row.push((s, 1.0 - p));
                    }
                    MoveCoupling::AttackerOnly => {
                        row.push((cfg.encode(dx_to, ax_to, ay_to), p));
                        row.push((cfg.encode(dx_to, ax, ay), 1.0 - p));
                    }
                    MoveCoupling::Independent => {
                        for (d, pd) in [(dx_to, p), (dx, 1.0 - p)] {
                            for ((x, y), pa) in [((ax_to, ay_to), p), ((ax, ay), 1.0 - p)] {
                                row.push((cfg.encode(d, x, y), pd * pa));
                            }
                        }
                    }
                }
                transitions.push(crate::game::collapse(row));
                rewards.push(0.0);
            }
        }
    }
    let game = ZeroSumGame::new(
        state_names,
        strings(&["left", "right", "stay"]),
        ATTACKER_MOVES.iter().map(|m| m.0.to_string()).collect(),
        transitions,
        rewards,
        cfg.gamma,
        cfg.initial_state(),
        Some(cfg.r_max()),
    )?;

    let coordinate_sensor = |name: &str, prefix: &str, n: usize, pick: fn((usize, usize, usize)) -> usize, cost| {
        let likelihood = (0..ns)
            .map(|s| match cfg.decode(s) {
                Some(c) => coordinate_row(pick(c), n, cfg.sensor_true),
                None => vec![1.0 / n as f64; n],
            })
            .collect();
        Sensor::new(name, (1..=n).map(|i| format!("{prefix}{i}")).collect(), likelihood, cost)
    };
    let x = coordinate_sensor("x", "x", w, |(_, ax, _)| ax, cfg.costs[0])?;
    let y = coordinate_sensor("y", "y", h, |(_, _, ay)| ay, cfg.costs[1])?;
    let mut own_alphabet: Vec<String> = (1..=w).map(|i| format!("d{i}")).collect();
    own_alphabet.push("terminal".into());
    let own_likelihood = (0..ns)
        .map(|s| {
            let mut row = vec![0.0; w + 1];
            row[cfg.decode(s).map_or(w, |(dx, _, _)| dx)] = 1.0;
            row
        })
        .collect();
    let own = Sensor::new("self", own_alphabet, own_likelihood, cfg.costs[2])?;
    let bank = SensorBank::new(ns, vec![x, y, own], cfg.budget)?;
    Ok((game, bank))
}

/// Player 1 for the grid: the self sensor is read every step, then one
/// coordinate sensor is chosen greedily within the budget.
pub fn grid_player1(game: &ZeroSumGame, cfg: &GridConfig, solution: Arc<EquilibriumSolution>) -> Result<Player1Config> {
    let stop = StopRule::Budget(cfg.budget);
    Ok(Player1Config::new(game, solution, SensorPolicy::Weighted(stop), ActionRule::SupportSet)?
        .with_mandatory(vec![GRID_SELF_SENSOR]))
}

/// Aggregates from a batch of grid episodes.
#[derive(Debug, Clone, Serialize)]
pub struct GridExperiment {
    pub estimate: ReturnEstimate,
    /// Per step: number of live episodes, and how many chose the line
    /// sensor, the depth sensor, or neither.
    pub sensor_counts: Vec<[usize; 4]>,
    /// Per step, `[true][believed]` summed marginal belief on the attacker's
    /// line coordinate, with the per-truth episode counts.
    pub confusion: Vec<Vec<Vec<f64>>>,
    pub confusion_counts: Vec<Vec<usize>>,
    /// Episodes whose reward was not a single terminal payment.
    pub irregular_payments: usize,
    pub surprises: usize,
    pub returns: Vec<f64>,
}

struct GridEpisodeSummary {
    ret: f64,
    sensors: Vec<Option<usize>>,
    truth: Vec<usize>,
    marginals: Vec<Vec<f64>>,
    irregular: bool,
    surprises: usize,
}

impl GridExperiment {
    /// Share of live episodes that chose the depth sensor at step `t`.
    pub fn depth_share(&self, t: usize) -> Option<f64> {
        let c = self.sensor_counts.get(t)?;
        (c[0] > 0).then(|| c[2] as f64 / c[0] as f64)
    }

    pub fn sensor_csv(&self) -> String {
        let mut table = Table::new(&["t", "episodes", "x_sensor", "y_sensor", "none"]);
        for (t, c) in self.sensor_counts.iter().enumerate() {
            let n = c[0].max(1) as f64;
            table.row([t.to_string(), c[0].to_string(), num(c[1] as f64 / n), num(c[2] as f64 / n), num(c[3] as f64 / n)]);
        }
        table.into_string()
    }

    /// Columns `t, true_coord, believed_coord, mean_belief`, 1-based
    /// coordinates, rows only for truths observed at that step.
    pub fn confusion_csv(&self) -> String {
        let mut table = Table::new(&["t", "true_coord", "believed_coord", "mean_belief"]);
        for (t, (sums, counts)) in self.confusion.iter().zip(&self.confusion_counts).enumerate() {
            for (truth, (row, &n)) in sums.iter().zip(counts).enumerate() {
                if n == 0 {
                    continue;
                }
                for (believed, &v) in row.iter().enumerate() {
                    table.row([t.to_string(), (truth + 1).to_string(), (believed + 1).to_string(), num(v / n as f64)]);
                }
            }
        }
        table.into_string()
    }

    pub fn returns_csv(&self) -> String {
        let mut table = Table::new(&["run", "return"]);
        for (i, r) in self.returns.iter().enumerate() {
            table.row([i.to_string(), num(*r)]);
        }
        table.into_string()
    }
}

/// Runs `n_runs` grid episodes (seeds derived from `seed`) and aggregates returns,
/// sensor choices and line-coordinate beliefs per step.
pub fn run_grid_experiment(
    cfg: &GridConfig,
    game: &ZeroSumGame,
    bank: &SensorBank,
    solution: Arc<EquilibriumSolution>,
    n_runs: usize,
    p2: Player2Mode,
    seed: u64,
) -> Result<GridExperiment> {
    let p1 = grid_player1(game, cfg, solution)?;
    let belief = Belief::dirac(game.n_states(), game.initial_state())?;
    let sim = Simulator::new(game, bank, &p1, p2, cfg.horizon(), belief)?;
    let w = cfg.width;
    let summaries = sim.run_many(n_runs, seed, |rec| {
        let paid = rec.steps.iter().filter(|st| st.reward != 0.0).count();
        let on_line = rec.steps.iter().filter(|st| cfg.decode(st.state).is_some_and(|(_, _, ay)| ay == cfg.height - 1)).count();
        let mut summary = GridEpisodeSummary {
            ret: rec.discounted_return,
            sensors: Vec::new(),
            truth: Vec::new(),
            marginals: Vec::new(),
            irregular: paid > 1 || on_line > 1,
            surprises: rec.surprises.len(),
        };
        for st in &rec.steps {
            let Some((_, ax, _)) = cfg.decode(st.state) else { continue };
            summary.sensors.push(st.sensors.first().copied());
            summary.truth.push(ax);
            let mut marginal = vec![0.0; w];
            for &(s, p) in &st.posterior {
                if let Some((_, bx, _)) = cfg.decode(s) {
                    marginal[bx] += p;
                }
            }
            summary.marginals.push(marginal);
        }
        summary
    })?;

    let mut out = GridExperiment {
        estimate: ReturnEstimate::from_samples(&summaries.iter().map(|s| s.ret).collect::<Vec<_>>())?,
        sensor_counts: Vec::new(),
        confusion: Vec::new(),
        confusion_counts: Vec::new(),
        irregular_payments: summaries.iter().filter(|s| s.irregular).count(),
        surprises: summaries.iter().map(|s| s.surprises).sum(),
        returns: summaries.iter().map(|s| s.ret).collect(),
    };
    for s in &summaries {
        for (t, ((sensor, &truth), marginal)) in s.sensors.iter().zip(&s.truth).zip(&s.marginals).enumerate() {
            if out.sensor_counts.len() <= t {
                out.sensor_counts.push([0; 4]);
                out.confusion.push(vec![vec![0.0; w]; w]);
                out.confusion_counts.push(vec![0; w]);
            }
            let c = &mut out.sensor_counts[t];
            c[0] += 1;
            match sensor {
                Some(GRID_X_SENSOR) => c[1] += 1,
                Some(GRID_Y_SENSOR) => c[2] += 1,
                _ => c[3] += 1,
            }
            out.confusion_counts[t][truth] += 1;
            for (acc, v) in out.confusion[t][truth].iter_mut().zip(marginal) {
                *acc += v;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomGameConfig {
    pub n_states: usize,
    pub n_actions: usize,
    pub n_sensors: usize,
    pub obs_per_sensor: usize,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for RandomGameConfig {
    fn default() -> Self {
        Self { n_states: 10, n_actions: 4, n_sensors: 10, obs_per_sensor: 2, gamma: 0.9, seed: 0 }
    }
}

/// Uniform draw from the probability simplex (normalized unit exponentials).
fn simplex<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

/// Random game: uniform simplex transition rows, `U[0, 1]` rewards, uniform
/// simplex likelihood rows with unit sensor costs, and a uniformly drawn
/// initial state.
pub fn random_game(cfg: &RandomGameConfig) -> Result<(ZeroSumGame, SensorBank)> {
    if cfg.n_states == 0 || cfg.n_actions == 0 || cfg.obs_per_sensor == 0 {
        return Err(Error::InvalidParameter("random game counts must be at least 1".into()));
    }
    check_discount(cfg.gamma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (ns, na) = (cfg.n_states, cfg.n_actions);
    let rows = ns * na * na;
    let transitions: Vec<SparseRow> = (0..rows).map(|_| simplex(ns, &mut rng).into_iter().enumerate().collect()).collect();
    let rewards: Vec<f64> = (0..rows).map(|_| rng.random::<f64>()).collect();
    let sensors = (0..cfg.n_sensors)
        .map(|i| {
            let alphabet = (0..cfg.obs_per_sensor).map(|o| format!("s{i}:o{o}")).collect();
            let likelihood = (0..ns).map(|_| simplex(cfg.obs_per_sensor, &mut rng)).collect();
            Sensor::new(format!("s{i}"), alphabet, likelihood, 1.0)
        })
        .collect::<Result<Vec<_>>>()?;
    let s0 = rng.random_range(0..ns);
    let game = ZeroSumGame::new(names(ns, "s"), names(na, "a"), names(na, "b"), transitions, rewards, cfg.gamma, s0, Some(1.0))?;
    let bank = SensorBank::new(ns, sensors, 2.0)?;
    Ok((game, bank))
}

/// The sensor-selection methods compared on random games, in table order.
pub fn random_methods() -> Vec<(String, SensorPolicy)> {
    let mut out = vec![("Perfect State".to_string(), SensorPolicy::PerfectState)];
    for k in [2usize, 1] {
        out.push((format!("Wt. (k={k})"), SensorPolicy::Weighted(StopRule::Budget(k as f64))));
        out.push((format!("Non-wt. (k={k})"), SensorPolicy::NonWeighted(k)));
        out.push((format!("Random (k={k})"), SensorPolicy::Random(k)));
    }
    out.push(("No obs.".to_string(), SensorPolicy::Nothing));
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct RandomRow {
    pub method: String,
    pub policy: SensorPolicy,
    pub p2: Player2Mode,
    /// Mean over games of the per-game mean return.
    pub mean: f64,
    /// Standard deviation of the per-game means.
    pub sd: f64,
    pub per_game: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RandomExperiment {
    pub rows: Vec<RandomRow>,
    pub n_games: usize,
    pub n_runs: usize,
    /// `V*(s0)` per game.
    pub values: Vec<f64>,
}

impl RandomExperiment {
    pub fn row(&self, method: &str, p2: Player2Mode) -> Option<&RandomRow> {
        self.rows.iter().find(|r| r.method == method && r.p2 == p2)
    }

    pub fn csv(&self) -> String {
        let mut table = Table::new(&["method", "p2", "mean", "sd_over_games", "games", "runs"]);
        for r in &self.rows {
            let p2 = match r.p2 {
                Player2Mode::Equilibrium => "equilibrium",
                Player2Mode::Deceptive => "deceptive",
            };
            table.row([
                r.method.clone(),
                p2.to_string(),
                num(r.mean),
                num(r.sd),
                self.n_games.to_string(),
                self.n_runs.to_string(),
            ]);
        }
        table.into_string()
    }
}

/// Game `g` is generated from seed `seed + g`; its episodes use base seed
/// `(seed + g) · 2^32`. Every method sees the same games and seeds.
pub fn run_random_experiment(
    base: &RandomGameConfig,
    n_games: usize,
    n_runs: usize,
    seed: u64,
    tol: f64,
) -> Result<RandomExperiment> {
    let methods = random_methods();
    let modes = [Player2Mode::Equilibrium, Player2Mode::Deceptive];
    let per_game: Vec<(f64, Vec<f64>)> = (0..n_games as u64)
        .into_par_iter()
        .map(|g| {
            let game_seed = seed.wrapping_add(g);
            let cfg = RandomGameConfig { seed: game_seed, ..base.clone() };
            let (game, bank) = random_game(&cfg)?;
            let solution = Arc::new(crate::equilibrium::game_solve(&game, tol)?);
            let horizon = horizon_for(1e-3, game.r_max(), game.discount()).max(1);
            let belief = Belief::dirac(game.n_states(), game.initial_state())?;
            let episode_base = game_seed.wrapping_shl(32);
            let mut means = Vec::new();
            for (_, policy) in &methods {
                let p1 = Player1Config::new(&game, solution.clone(), *policy, ActionRule::SupportSet)?;
                for &mode in &modes {
                    if *policy == SensorPolicy::PerfectState && mode == Player2Mode::Deceptive {
                        continue;
                    }
                    let sim = Simulator::new(&game, &bank, &p1, mode, horizon, belief.clone())?;
                    means.push(sim.estimate_return(n_runs, episode_base)?.mean);
                }
            }
            Ok((solution.values[game.initial_state()], means))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut col = 0;
    for (label, policy) in &methods {
        for &mode in &modes {
            if *policy == SensorPolicy::PerfectState && mode == Player2Mode::Deceptive {
                continue;
            }
            let values: Vec<f64> = per_game.iter().map(|(_, m)| m[col]).collect();
            let est = if values.is_empty() { None } else { Some(ReturnEstimate::from_samples(&values)?) };
            rows.push(RandomRow {
                method: label.clone(),
                policy: *policy,
                p2: mode,
                mean: est.map_or(f64::NAN, |e| e.mean),
                sd: est.map_or(f64::NAN, |e| e.sd),
                per_game: values,
            });
            col += 1;
        }
    }
    Ok(RandomExperiment { rows, n_games, n_runs, values: per_game.iter().map(|(v, _)| *v).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::{bayes_obs_update, weighted_entropy_objective, JointObservation};
    use crate::equilibrium::{mdp_solve, DeltaMap};

    #[test]
    fn fig1_shape() {
        let (mdp, bank) = fig1_mdp(0.9).unwrap();
        assert!(mdp.validate().is_empty());
        let sol = mdp_solve(&mdp, 1e-10).unwrap();
        assert!((sol.values[0] - 10.0).abs() < 1e-9 && (sol.values[1] - 10.0).abs() < 1e-9);
        let b = Belief::new(vec![0.3, 0.7]).unwrap();
        let obs = JointObservation { sensors: vec![0], symbols: vec![0] };
        assert_eq!(bayes_obs_update(&b, &bank, &obs).unwrap().belief, b);
        let delta = DeltaMap::from_mdp(&sol);
        let dirac = Belief::dirac(2, 0).unwrap();
        assert_eq!(weighted_entropy_objective(&dirac, &bank, &[0], &delta).unwrap(), 0.0);
    }

    #[test]
    fn fig3_is_valid() {
        let (game, bank) = fig3_game(0.25, 0.9).unwrap();
        assert!(game.validate().is_empty());
        assert_eq!(bank.len(), 2);
        assert_eq!(game.transition(0, 1, 1), &[(3, 0.5), (4, 0.5)]);
        assert_eq!(game.reward(4, 0, 1), 0.75);
        assert!(fig3_game(0.0, 0.9).is_err());
        assert!(fig3_game(0.5, 1.0).is_err());
    }

    #[test]
    fn grid_shape() {
        let cfg = GridConfig::default();
        let (game, bank) = line_defense(&cfg).unwrap();
        assert_eq!(game.n_states(), 1332);
        assert!(game.validate().is_empty());
        assert_eq!(cfg.decode(game.initial_state()), Some((5, 6, 0)));
        for s in 0..game.n_states() - 1 {
            let (dx, ax, ay) = cfg.decode(s).unwrap();
            assert_eq!(cfg.encode(dx, ax, ay), s);
        }
        // attacker one row short of the line, moving straight up
        let s = cfg.encode(2, 8, 9);
        let row = game.transition(s, 2, 7);
        let onto_line = cfg.encode(2, 8, 10);
        assert!(row.iter().any(|&(q, p)| q == onto_line && (p - 0.9).abs() < 1e-15));
        let line = cfg.encode(2, 8, 10);
        for a1 in 0..3 {
            for a2 in 0..9 {
                assert_eq!(game.reward(line, a1, a2), -6.0);
                assert_eq!(game.transition(line, a1, a2), &[(cfg.terminal(), 1.0)]);
            }
        }
        assert!(game.is_absorbing_zero(cfg.terminal()));
        assert_eq!(bank.len(), 3);
        assert!(bank.sensors().iter().all(|sn| (0..game.n_states()).all(|s| (sn.row(s).iter().sum::<f64>() - 1.0).abs() < 1e-12)));
    }

    #[test]
    fn coordinate_noise_at_edges() {
        let edge = coordinate_row(0, 11, 0.7);
        assert_eq!(edge[0], 0.7);
        assert!((edge[1] - 0.3).abs() < 1e-15);
        let mid = coordinate_row(5, 11, 0.7);
        assert!((mid[4] - 0.15).abs() < 1e-15 && (mid[6] - 0.15).abs() < 1e-15);
    }

    #[test]
    fn grid_rejects_bad_start() {
        let cfg = GridConfig { p1_start: 12, ..Default::default() };
        assert!(matches!(line_defense(&cfg), Err(Error::InvalidParameter(_))));
        let cfg = GridConfig { p2_start: (0, 1), ..Default::default() };
        assert!(line_defense(&cfg).is_err());
    }

    #[test]
    fn random_game_is_deterministic_and_valid() {
        let cfg = RandomGameConfig { seed: 17, ..Default::default() };
        let (a, bank) = random_game(&cfg).unwrap();
        let (b, _) = random_game(&cfg).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert!(a.validate().is_empty());
        assert_eq!(bank.len(), 10);
        for s in 0..10 {
            for a1 in 0..4 {
                for a2 in 0..4 {
                    let r = a.reward(s, a1, a2);
                    assert!((0.0..=1.0).contains(&r));
                }
            }
        }
    }

    #[test]
    fn method_table_has_fifteen_rows() {
        let exp = run_random_experiment(&RandomGameConfig { n_states: 4, n_actions: 2, n_sensors: 3, ..Default::default() }, 2, 3, 1, 1e-6).unwrap();
        assert_eq!(exp.rows.len(), 15);
        assert_eq!(exp.csv().lines().count(), 16);
    }
}
