//! Decision rules for both players.
//!
//! Player 1 acts on its posterior belief using `Q*` of the fully observed
//! game, assuming Player 2 plays `π²*`, and predicts its next belief with
//! that same assumption. Player 2 either samples `π²*` or, knowing Player
//! 1's belief, picks the action that minimizes Player 1's one-step
//! expected value against the distribution Player 1 is about to use.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{argmax_first, support_set, DeltaMap, DeltaMode, EquilibriumSolution, SupportSet};
use crate::error::{Error, Result};
use crate::game::{ActionDistribution, Belief, StationaryPolicy, ZeroSumGame};
use crate::rng::sample_index;
use crate::sensing::{
    greedy_over, random_subset, state_entropy_on, weighted_objective_on, SensorBank, StopRule,
};

/// How Player 1 picks its sensors each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorPolicy {
    /// Greedy on the value-weighted entropy objective.
    Weighted(StopRule),
    /// Greedy on `H(S | ω)`, `k` sensors.
    NonWeighted(usize),
    /// `k` sensors uniformly at random.
    Random(usize),
    All,
    Nothing,
    /// Player 1 observes the state directly and plays `π¹*`.
    PerfectState,
}

/// Which distributions Player 1 optimizes over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionRule {
    /// Best single action for the belief-weighted `Q*` (single-agent form).
    Qmdp,
    /// Best element of the equilibrium support set.
    SupportSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Player2Mode {
    Equilibrium,
    Deceptive,
}

/// Everything Player 1 derives from the solved game.
#[derive(Debug, Clone)]
pub struct Player1Config {
    pub sensors: SensorPolicy,
    /// Sensors read every step before selection, e.g. free self-localization.
    pub mandatory: Vec<usize>,
    pub action_rule: ActionRule,
    pub solution: Arc<EquilibriumSolution>,
    pub support: SupportSet,
    pub delta: DeltaMap,
}

impl Player1Config {
    /// Support set and Δ are derived from `solution`; Δ spreads over single
    /// actions for [`ActionRule::Qmdp`] and over the support set otherwise.
    pub fn new(
        game: &ZeroSumGame,
        solution: Arc<EquilibriumSolution>,
        sensors: SensorPolicy,
        action_rule: ActionRule,
    ) -> Result<Self> {
        solution.check_game(game)?;
        let support = support_set(&solution.policy1);
        let mode = match action_rule {
            ActionRule::Qmdp => DeltaMode::PerAction,
            ActionRule::SupportSet => DeltaMode::PerDistribution(support.clone()),
        };
        let delta = DeltaMap::compute(&solution, &mode)?;
        Ok(Self { sensors, mandatory: Vec::new(), action_rule, solution, support, delta })
    }

    pub fn with_mandatory(mut self, mandatory: Vec<usize>) -> Self {
        self.mandatory = mandatory;
        self
    }

    pub fn with_sensors(mut self, sensors: SensorPolicy) -> Self {
        self.sensors = sensors;
        self
    }

    pub fn assumed_pi2(&self) -> &StationaryPolicy {
        &self.solution.policy2
    }

    pub fn check(&self, game: &ZeroSumGame, bank: &SensorBank) -> Result<()> {
        self.solution.check_game(game)?;
        if bank.n_states() != game.n_states() {
            return Err(Error::ConfigMismatch("sensor bank and game differ in state count".into()));
        }
        if let Some(&i) = self.mandatory.iter().find(|&&i| i >= bank.len()) {
            return Err(Error::ConfigMismatch(format!("mandatory sensor {i} not in bank")));
        }
        if let SensorPolicy::NonWeighted(k) | SensorPolicy::Random(k) = self.sensors {
            let available = bank.len() - self.mandatory.len();
            if k > available {
                return Err(Error::TooManySensors { k, n: available });
            }
        }
        Ok(())
    }

    /// Sensors eligible for selection (everything but the mandatory ones).
    pub(crate) fn candidates(&self, bank: &SensorBank) -> Vec<usize> {
        (0..bank.len()).filter(|i| !self.mandatory.contains(i)).collect()
    }

    /// Chooses the sensor set for `belief` (already conditioned on the
    /// mandatory sensors). Returns the set and, for the weighted selector,
    /// its objective value.
    pub fn select<R: Rng + ?Sized>(
        &self,
        belief: &Belief,
        bank: &SensorBank,
        rng: &mut R,
    ) -> Result<(Vec<usize>, Option<f64>)> {
        let candidates = self.candidates(bank);
        let spent = bank.cost_of(&self.mandatory);
        Ok(match self.sensors {
            SensorPolicy::Weighted(stop) => {
                let support: Vec<(usize, f64)> = belief.support().collect();
                let sel = greedy_over(bank, &candidates, spent, stop, |set| {
                    weighted_objective_on(&support, bank, set, &self.delta)
                })?;
                (sel.sensors, Some(sel.objective))
            }
            SensorPolicy::NonWeighted(k) => {
                let support: Vec<(usize, f64)> = belief.support().collect();
                let sel = greedy_over(bank, &candidates, spent, StopRule::Count(k), |set| {
                    state_entropy_on(&support, bank, set)
                })?;
                (sel.sensors, None)
            }
            SensorPolicy::Random(k) => (random_subset(&candidates, k, rng), None),
            SensorPolicy::All => (candidates, None),
            SensorPolicy::Nothing | SensorPolicy::PerfectState => (Vec::new(), None),
        })
    }

    /// Player 1's action distribution for a posterior belief. The index is
    /// the position in the support set when that rule is in use.
    pub fn act(&self, posterior: &Belief) -> (Option<usize>, ActionDistribution) {
        match self.action_rule {
            ActionRule::Qmdp => {
                let a = p1_act_mdp(posterior, &self.solution.q_vs_pi2, self.solution.n_actions1);
                (None, ActionDistribution::dirac(self.solution.n_actions1, a))
            }
            ActionRule::SupportSet => {
                let i = p1_act_game(posterior, &self.solution, &self.support);
                (Some(i), self.support.get(i).clone())
            }
        }
    }
}

/// `Σ_s b(s) · q(s, ·)` for a row-major `(s, a)` table.
fn belief_weighted(belief: &Belief, q: &[f64], n_actions: usize) -> Vec<f64> {
    let mut w = vec![0.0; n_actions];
    for (s, p) in belief.support() {
        for (wa, &qa) in w.iter_mut().zip(&q[s * n_actions..(s + 1) * n_actions]) {
            *wa += p * qa;
        }
    }
    w
}

/// Q_MDP action: `argmax_a Σ_s b(s) Q*(s, a)`, lowest index on ties.
/// `q` is row-major over `(s, a)`.
pub fn p1_act_mdp(posterior: &Belief, q: &[f64], n_actions: usize) -> usize {
    argmax_first(&belief_weighted(posterior, q, n_actions))
}

/// Index into `support` of `argmax_d Σ_s b(s) Q*(s, d)`, first on ties.
pub fn p1_act_game(posterior: &Belief, solution: &EquilibriumSolution, support: &SupportSet) -> usize {
    let w = belief_weighted(posterior, &solution.q_vs_pi2, solution.n_actions1);
    let scores: Vec<f64> = support
        .distributions()
        .iter()
        .map(|d| d.support().map(|(a, p)| p * w[a]).sum())
        .collect();
    argmax_first(&scores)
}

/// Prediction step: push the posterior through the dynamics under Player
/// 1's own action and the assumed Player 2 policy.
pub fn p1_predict(posterior: &Belief, a1: usize, assumed_pi2: &StationaryPolicy, game: &ZeroSumGame) -> Result<Belief> {
    if posterior.len() != game.n_states() || assumed_pi2.n_states() != game.n_states() {
        return Err(Error::Dimension("belief, policy and game differ in state count".into()));
    }
    if a1 >= game.n_actions1() {
        return Err(Error::Dimension(format!("action {a1} out of range")));
    }
    let mut next = vec![0.0; game.n_states()];
    for (s, b) in posterior.support() {
        for (a2, p2) in assumed_pi2.at(s).support() {
            let w = b * p2;
            for &(q, p) in game.transition(s, a1, a2) {
                next[q] += w * p;
            }
        }
    }
    Belief::from_weights(next)
}

/// `g(a2) = Σ_a1 d1(a1) (r(s,a1,a2) + γ E[V*(s')])` for every `a2`.
pub fn deception_scores(state: usize, d1: &ActionDistribution, solution: &EquilibriumSolution) -> Vec<f64> {
    (0..solution.n_actions2)
        .map(|a2| d1.support().map(|(a1, p)| p * solution.q(state, a1, a2)).sum())
        .collect()
}

/// Player 2's action at true state `state`, given the distribution `d1`
/// Player 1 derived from its belief. Deceptive play returns the minimizing
/// vertex, lowest index on ties.
pub fn p2_act<R: Rng + ?Sized>(
    mode: Player2Mode,
    state: usize,
    d1: &ActionDistribution,
    solution: &EquilibriumSolution,
    rng: &mut R,
) -> usize {
    match mode {
        Player2Mode::Equilibrium => sample_index(solution.policy2.at(state).probs(), rng),
        Player2Mode::Deceptive => {
            let neg: Vec<f64> = deception_scores(state, d1, solution).into_iter().map(|g| -g).collect();
            argmax_first(&neg)
        }
    }
}
