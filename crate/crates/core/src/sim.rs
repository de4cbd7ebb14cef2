//! Episode simulation, Monte-Carlo return estimates and an exact
//! finite-horizon evaluator.
//!
//! One step of the timeline at true state `s_t` with predicted belief `b_t`:
//!
//! 1. mandatory sensors are read and applied with Bayes rule;
//! 2. Player 1 selects sensors on the resulting belief, reads them and
//!    updates again, giving the posterior `b'_t`;
//! 3. Player 1 picks `d¹_t` from `b'_t` and samples `a¹_t`; Player 2 picks
//!    `a²_t`; the reward is paid and the state moves;
//! 4. Player 1 predicts `b_{t+1}` from `b'_t`, `a¹_t` and `π²*`.
//!
//! Episodes end at the horizon or on entering a zero-reward absorbing state.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::agents::{p1_predict, p2_act, Player1Config, Player2Mode, SensorPolicy};
use crate::csv::{num, Table};
use crate::error::{Error, Result};
use crate::game::{ActionDistribution, Belief, ZeroSumGame};
use crate::rng::{sample_index, sample_sparse, EpisodeRng};
use crate::sensing::{bayes_unchecked, for_each_joint, weighted_entropy_objective, JointObservation, SensorBank, DEFAULT_ENUMERATION_CAP};

pub const DEFAULT_NODE_CAP: usize = 10_000_000;

/// Sparse `(state, probability)` view of a belief.
pub type SparseBelief = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurpriseEvent {
    pub step: usize,
    pub observation: JointObservation,
    /// Predicted probability of `observation`, below the surprise threshold.
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub state: usize,
    /// Sensors chosen by the selector (mandatory ones excluded), in order.
    pub sensors: Vec<usize>,
    /// Mandatory and selected observations together.
    pub observation: JointObservation,
    /// Selector objective when the weighted selector ran.
    pub objective: Option<f64>,
    pub prior: SparseBelief,
    pub posterior: SparseBelief,
    pub d1: ActionDistribution,
    pub a1: usize,
    pub a2: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub discounted_return: f64,
    pub surprises: Vec<SurpriseEvent>,
    pub final_state: usize,
}

/// Sample mean with a 95% normal-approximation interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnEstimate {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
    pub half_width: f64,
}

impl ReturnEstimate {
    /// `sd` is the sample standard deviation; it is 0 for a single sample.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::Dimension("no samples".into()));
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            0.0
        } else {
            (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Ok(Self { mean, sd, n, half_width: 1.96 * sd / (n as f64).sqrt() })
    }
}

/// Exact expectation over all branches up to the horizon, bracketed by the
/// discounted tail and any pruned mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactEvaluation {
    pub expected: f64,
    pub tail: f64,
    pub pruned_width: f64,
    pub lower: f64,
    pub upper: f64,
    /// Largest weighted objective of a selected set over visited nodes.
    pub max_objective: f64,
    pub nodes: usize,
    pub horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactOptions {
    pub horizon: usize,
    pub node_cap: usize,
    /// Branches whose probability falls below this are dropped and their
    /// worst case added to the interval. Zero keeps everything.
    pub prune_mass: f64,
}

impl ExactOptions {
    pub fn new(horizon: usize) -> Self {
        Self { horizon, node_cap: DEFAULT_NODE_CAP, prune_mass: 0.0 }
    }
}

/// Smallest `T` with `r_max · γ^T / (1 − γ) ≤ tol`.
pub fn horizon_for(tol: f64, r_max: f64, discount: f64) -> usize {
    let scale = r_max / (1.0 - discount);
    let mut t = 0;
    let mut tail = scale;
    while tail > tol {
        t += 1;
        tail = scale * discount.powi(t as i32);
    }
    t
}

pub fn tail_bound(r_max: f64, discount: f64, horizon: usize) -> f64 {
    r_max * discount.powi(horizon as i32) / (1.0 - discount)
}

fn sparse(belief: &Belief) -> SparseBelief {
    belief.support().collect()
}

/// Runs the two players against each other on one game.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    pub game: &'a ZeroSumGame,
    pub bank: &'a SensorBank,
    pub player1: &'a Player1Config,
    pub player2: Player2Mode,
    pub horizon: usize,
    /// Player 1's belief before the first observation.
    pub initial_belief: Belief,
    /// Distribution of the true initial state.
    pub initial_distribution: Belief,
}

impl<'a> Simulator<'a> {
    /// The true initial state defaults to the game's `initial_state`.
    pub fn new(
        game: &'a ZeroSumGame,
        bank: &'a SensorBank,
        player1: &'a Player1Config,
        player2: Player2Mode,
        horizon: usize,
        initial_belief: Belief,
    ) -> Result<Self> {
        player1.check(game, bank)?;
        if initial_belief.len() != game.n_states() {
            return Err(Error::Dimension("initial belief and game differ in state count".into()));
        }
        if horizon == 0 {
            return Err(Error::Dimension("horizon must be at least 1".into()));
        }
        let initial_distribution = Belief::dirac(game.n_states(), game.initial_state())?;
        Ok(Self { game, bank, player1, player2, horizon, initial_belief, initial_distribution })
    }

    pub fn with_initial_distribution(mut self, dist: Belief) -> Result<Self> {
        if dist.len() != self.game.n_states() {
            return Err(Error::Dimension("initial distribution and game differ in state count".into()));
        }
        self.initial_distribution = dist;
        Ok(self)
    }

    fn perfect(&self) -> bool {
        self.player1.sensors == SensorPolicy::PerfectState
    }

    fn decide(&self, state: usize, posterior: &Belief) -> ActionDistribution {
        if self.perfect() {
            self.player1.solution.policy1.at(state).clone()
        } else {
            self.player1.act(posterior).1
        }
    }

    pub fn run_episode(&self, seed: u64) -> Result<EpisodeRecord> {
        let game = self.game;
        let bank = self.bank;
        let sol = &*self.player1.solution;
        let mut rng = EpisodeRng::new(seed);
        let mut state = sample_index(self.initial_distribution.probs(), &mut rng.initial);
        let mut belief = self.initial_belief.clone();
        let mut steps = Vec::new();
        let mut surprises = Vec::new();
        let mut ret = 0.0;
        let mut weight = 1.0;

        for t in 0..self.horizon {
            if game.is_absorbing_zero(state) {
                break;
            }
            let prior = sparse(&belief);
            let mut observation = JointObservation::empty();
            let (sensors, objective, posterior) = if self.perfect() {
                (Vec::new(), None, Belief::dirac(game.n_states(), state)?)
            } else {
                let mut b = self.observe(&belief, state, &self.player1.mandatory, &mut rng, &mut observation, t, &mut surprises);
                let (sensors, objective) = self.player1.select(&b, bank, &mut rng.selector)?;
                b = self.observe(&b, state, &sensors, &mut rng, &mut observation, t, &mut surprises);
                (sensors, objective, b)
            };

            let d1 = self.decide(state, &posterior);
            let a1 = sample_index(d1.probs(), &mut rng.player1);
            let a2 = p2_act(self.player2, state, &d1, sol, &mut rng.player2);
            let reward = game.reward(state, a1, a2);
            ret += weight * reward;
            weight *= game.discount();
            let next = sample_sparse(game.transition(state, a1, a2), &mut rng.transition);

            belief = if self.perfect() {
                posterior.clone()
            } else {
                p1_predict(&posterior, a1, self.player1.assumed_pi2(), game)?
            };
            steps.push(StepRecord {
                t,
                state,
                sensors,
                observation,
                objective,
                prior,
                posterior: sparse(&posterior),
                d1,
                a1,
                a2,
                reward,
            });
            state = next;
        }
        Ok(EpisodeRecord { seed, steps, discounted_return: ret, surprises, final_state: state })
    }

    /// Samples the sensors in `set` at the true state and conditions on them.
    #[allow(clippy::too_many_arguments)]
    fn observe(
        &self,
        belief: &Belief,
        state: usize,
        set: &[usize],
        rng: &mut EpisodeRng,
        log: &mut JointObservation,
        t: usize,
        surprises: &mut Vec<SurpriseEvent>,
    ) -> Belief {
        if set.is_empty() {
            return belief.clone();
        }
        let symbols: Vec<usize> = set
            .iter()
            .map(|&i| sample_index(self.bank.sensor(i).row(state), &mut rng.observation))
            .collect();
        let obs = JointObservation { sensors: set.to_vec(), symbols };
        let update = bayes_unchecked(belief, self.bank, &obs);
        if let Some(predicted) = update.surprise {
            surprises.push(SurpriseEvent { step: t, observation: obs.clone(), predicted });
        }
        log.sensors.extend_from_slice(&obs.sensors);
        log.symbols.extend_from_slice(&obs.symbols);
        update.belief
    }

    /// Runs episodes `episode_seed(base_seed, i)` for `i < n` in parallel and maps each
    /// record through `f`; results come back in run order.
    pub fn run_many<T, F>(&self, n: usize, base_seed: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(EpisodeRecord) -> T + Sync,
    {
        (0..n as u64)
            .into_par_iter()
            .map(|i| self.run_episode(crate::rng::episode_seed(base_seed, i)).map(&f))
            .collect()
    }

    pub fn estimate_return(&self, n: usize, base_seed: u64) -> Result<ReturnEstimate> {
        let returns = self.run_many(n, base_seed, |r| r.discounted_return)?;
        ReturnEstimate::from_samples(&returns)
    }

    /// Exact expected discounted return over `[0, horizon)`. Nodes are
    /// (true state, Player 1 belief) pairs merged per step; the selector
    /// must be deterministic.
    pub fn exact_eval(&self, opts: ExactOptions) -> Result<ExactEvaluation> {
        if matches!(self.player1.sensors, SensorPolicy::Random(_)) {
            return Err(Error::Unsupported("exact evaluation needs a deterministic selector".into()));
        }
        let game = self.game;
        let sol = &*self.player1.solution;
        let gamma = game.discount();
        let r_max = game.r_max();
        let weighted = matches!(self.player1.sensors, SensorPolicy::Weighted(_));
        let mut dummy = crate::rng::stream(0, crate::rng::Stream::Selector);

        let mut layer: HashMap<(usize, Vec<u64>), (Belief, f64)> = HashMap::new();
        for (s, p) in self.initial_distribution.support() {
            layer.insert((s, self.initial_belief.bits()), (self.initial_belief.clone(), p));
        }
        let mut expected = 0.0;
        let mut pruned_width = 0.0;
        let mut max_objective: f64 = 0.0;
        let mut nodes = 0usize;
        let mut discount_t = 1.0;

        for _ in 0..opts.horizon {
            nodes += layer.len();
            if nodes > opts.node_cap {
                return Err(Error::NodeCap { cap: opts.node_cap });
            }
            let mut next: HashMap<(usize, Vec<u64>), (Belief, f64)> = HashMap::new();
            let mut entries: Vec<_> = layer.into_iter().collect();
            // iteration order of the map must not leak into the float sums
            entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
            for ((state, _), (belief, mass)) in entries {
                if game.is_absorbing_zero(state) {
                    continue;
                }
                if mass < opts.prune_mass {
                    pruned_width += mass * discount_t * r_max / (1.0 - gamma);
                    continue;
                }
                let mut branches: Vec<(Belief, f64)> = Vec::new();
                if self.perfect() {
                    branches.push((belief.clone(), mass));
                } else {
                    for (b, p) in self.observation_branches(&belief, state, &self.player1.mandatory)? {
                        let (set, _) = self.player1.select(&b, self.bank, &mut dummy)?;
                        if weighted {
                            let obj = weighted_entropy_objective(&b, self.bank, &set, &self.player1.delta)?;
                            max_objective = max_objective.max(obj);
                        }
                        for (post, q) in self.observation_branches(&b, state, &set)? {
                            branches.push((post, mass * p * q));
                        }
                    }
                }
                for (posterior, m) in branches {
                    let d1 = self.decide(state, &posterior);
                    for (a1, p1) in d1.support() {
                        let predicted = if self.perfect() {
                            posterior.clone()
                        } else {
                            p1_predict(&posterior, a1, self.player1.assumed_pi2(), game)?
                        };
                        let bits = predicted.bits();
                        let a2_dist: Vec<(usize, f64)> = match self.player2 {
                            Player2Mode::Equilibrium => sol.policy2.at(state).support().collect(),
                            Player2Mode::Deceptive => vec![(p2_act(self.player2, state, &d1, sol, &mut dummy), 1.0)],
                        };
                        for (a2, p2) in a2_dist {
                            let w = m * p1 * p2;
                            expected += discount_t * w * game.reward(state, a1, a2);
                            for &(q, pq) in game.transition(state, a1, a2) {
                                let entry = next.entry((q, bits.clone())).or_insert_with(|| (predicted.clone(), 0.0));
                                entry.1 += w * pq;
                            }
                            if nodes + next.len() > opts.node_cap {
                                return Err(Error::NodeCap { cap: opts.node_cap });
                            }
                        }
                    }
                }
            }
            layer = next;
            discount_t *= gamma;
        }

        let tail = tail_bound(r_max, gamma, opts.horizon);
        Ok(ExactEvaluation {
            expected,
            tail,
            pruned_width,
            lower: expected - tail - pruned_width,
            upper: expected + tail + pruned_width,
            max_objective,
            nodes,
            horizon: opts.horizon,
        })
    }

    /// Posterior beliefs and probabilities for every observation of `set`
    /// that is possible at the true state.
    fn observation_branches(&self, belief: &Belief, state: usize, set: &[usize]) -> Result<Vec<(Belief, f64)>> {
        if set.is_empty() {
            return Ok(vec![(belief.clone(), 1.0)]);
        }
        let mut out = Vec::new();
        for_each_joint(&[(state, 1.0)], self.bank, set, DEFAULT_ENUMERATION_CAP, |symbols, w| {
            let obs = JointObservation { sensors: set.to_vec(), symbols: symbols.to_vec() };
            out.push((bayes_unchecked(belief, self.bank, &obs).belief, w[0]));
        })?;
        Ok(out)
    }
}

/// One row per step of every episode.
pub fn episodes_csv(records: &[EpisodeRecord], game: &ZeroSumGame, bank: &SensorBank) -> String {
    let mut table = Table::new(&[
        "episode", "seed", "t", "state", "sensors", "observation", "objective", "d1", "a1", "a2", "reward",
    ]);
    for (e, rec) in records.iter().enumerate() {
        for st in &rec.steps {
            let sensors: Vec<&str> = st.sensors.iter().map(|&i| bank.sensor(i).name()).collect();
            let d1: Vec<String> = st.d1.probs().iter().map(|&p| num(p)).collect();
            table.row([
                e.to_string(),
                rec.seed.to_string(),
                st.t.to_string(),
                game.state_names()[st.state].clone(),
                sensors.join(";"),
                st.observation.display(bank).to_string(),
                st.objective.map(num).unwrap_or_default(),
                d1.join(";"),
                game.action1_names()[st.a1].clone(),
                game.action2_names()[st.a2].clone(),
                num(st.reward),
            ]);
        }
    }
    table.into_string()
}

/// One summary row per episode.
pub fn summary_csv(records: &[EpisodeRecord]) -> String {
    let mut table = Table::new(&["episode", "seed", "steps", "return", "surprises"]);
    for (e, rec) in records.iter().enumerate() {
        table.row([
            e.to_string(),
            rec.seed.to_string(),
            rec.steps.len().to_string(),
            num(rec.discounted_return),
            rec.surprises.len().to_string(),
        ]);
    }
    table.into_string()
}
