//! Optimal values for MDPs and security values for zero-sum stochastic
//! games, plus the quantities derived from them that drive perception: the
//! support set of Player 1's equilibrium distributions and the per-state
//! stakes map Δ.

mod matrix_game;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{ActionDistribution, Mdp, StationaryPolicy, ZeroSumGame};

pub use matrix_game::{solve_matrix_game, MatrixGame, MatrixGameSolution};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const MAX_SWEEPS: usize = 10_000_000;
/// L∞ distance below which two equilibrium distributions are the same.
pub const DEDUP_TOL: f64 = 1e-9;
/// Relative tolerance for "equal" when breaking ties toward the lowest index.
pub const TIE_TOL: f64 = 1e-9;

/// Index of the first entry within [`TIE_TOL`] of the maximum.
pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = TIE_TOL * best.abs().max(1.0);
    values.iter().position(|&v| v >= best - slack).unwrap_or(0)
}

/// Stop once successive iterates are this close; guarantees the fixed point
/// is within `tol` in sup norm.
fn stopping_residual(tol: f64, discount: f64) -> f64 {
    if discount == 0.0 {
        f64::INFINITY
    } else {
        tol * (1.0 - discount) / discount
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct MdpSolution {
    pub values: Vec<f64>,
    /// `Q*(s, a)` row-major over `(s, a)`.
    pub q: Vec<f64>,
    pub policy: StationaryPolicy,
    pub n_actions: usize,
    pub residual: f64,
    pub sweeps: usize,
}

impl MdpSolution {
    pub fn q(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.n_actions + a]
    }

    pub fn q_row(&self, s: usize) -> &[f64] {
        &self.q[s * self.n_actions..(s + 1) * self.n_actions]
    }
}

/// Value iteration to within `tol` of `V*`, greedy policy with lowest-index
/// ties.
pub fn mdp_solve(mdp: &Mdp, tol: f64) -> Result<MdpSolution> {
    let violations = mdp.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidGame(violations));
    }
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let threshold = stopping_residual(tol, mdp.discount());
    let mut v = vec![0.0; ns];
    let mut sweeps = 0;
    let mut residual;
    loop {
        let next: Vec<f64> = (0..ns)
            .map(|s| (0..na).map(|a| mdp.backup(s, a, &v)).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        residual = sup_diff(&next, &v);
        v = next;
        sweeps += 1;
        if residual <= threshold {
            break;
        }
        if sweeps >= MAX_SWEEPS {
            return Err(Error::NotConverged { iterations: sweeps, residual });
        }
    }
    let q: Vec<f64> = (0..ns).flat_map(|s| (0..na).map(move |a| (s, a))).map(|(s, a)| mdp.backup(s, a, &v)).collect();
    let greedy: Vec<usize> = (0..ns).map(|s| argmax_first(&q[s * na..(s + 1) * na])).collect();
    let values: Vec<f64> = (0..ns).map(|s| q[s * na + greedy[s]]).collect();
    Ok(MdpSolution {
        residual: sup_diff(&values, &v),
        values,
        q,
        policy: StationaryPolicy::deterministic(&greedy, na),
        n_actions: na,
        sweeps,
    })
}

/// Value of a fixed stationary policy, to within `tol`.
pub fn policy_evaluation(mdp: &Mdp, policy: &StationaryPolicy, tol: f64) -> Result<Vec<f64>> {
    if policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions() {
        return Err(Error::Dimension("policy does not match the MDP".into()));
    }
    let threshold = stopping_residual(tol, mdp.discount());
    let mut v = vec![0.0; mdp.n_states()];
    for sweep in 1..=MAX_SWEEPS {
        let next: Vec<f64> = (0..mdp.n_states())
            .map(|s| policy.at(s).support().map(|(a, p)| p * mdp.backup(s, a, &v)).sum())
            .collect();
        let residual = sup_diff(&next, &v);
        v = next;
        if residual <= threshold {
            return Ok(v);
        }
        if sweep == MAX_SWEEPS {
            return Err(Error::NotConverged { iterations: sweep, residual });
        }
    }
    unreachable!()
}

/// Security values, equilibrium policies and `Q*` of a zero-sum game.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub values: Vec<f64>,
    pub policy1: StationaryPolicy,
    pub policy2: StationaryPolicy,
    /// `Q*(s, a1, a2)` flattened as `(s * |A1| + a1) * |A2| + a2`.
    pub q: Vec<f64>,
    /// `Q*(s, a1)` against `π²*(s)`, flattened as `s * |A1| + a1`.
    pub q_vs_pi2: Vec<f64>,
    pub n_actions1: usize,
    pub n_actions2: usize,
    pub discount: f64,
    pub r_max: f64,
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub tol: f64,
    pub game_fingerprint: u64,
}

impl EquilibriumSolution {
    pub fn n_states(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn q(&self, s: usize, a1: usize, a2: usize) -> f64 {
        self.q[(s * self.n_actions1 + a1) * self.n_actions2 + a2]
    }

    /// `Q*(s, a1)` with Player 2 on its equilibrium distribution at `s`.
    #[inline]
    pub fn q_action(&self, s: usize, a1: usize) -> f64 {
        self.q_vs_pi2[s * self.n_actions1 + a1]
    }

    pub fn q_actions(&self, s: usize) -> &[f64] {
        &self.q_vs_pi2[s * self.n_actions1..(s + 1) * self.n_actions1]
    }

    /// `Q*(s, d1) = d1ᵀ Q*(s) π²*(s)`.
    pub fn q_dist(&self, s: usize, d1: &ActionDistribution) -> f64 {
        d1.support().map(|(a, p)| p * self.q_action(s, a)).sum()
    }

    /// `Q*(s, d1, d2) = d1ᵀ Q*(s) d2`.
    pub fn q_bilinear(&self, s: usize, d1: &ActionDistribution, d2: &ActionDistribution) -> f64 {
        let mut total = 0.0;
        for (a1, p1) in d1.support() {
            for (a2, p2) in d2.support() {
                total += p1 * p2 * self.q(s, a1, a2);
            }
        }
        total
    }

    pub fn stage_game(&self, s: usize) -> MatrixGame {
        let start = s * self.n_actions1 * self.n_actions2;
        let end = start + self.n_actions1 * self.n_actions2;
        MatrixGame::new(self.n_actions1, self.n_actions2, self.q[start..end].to_vec())
            .expect("stage games are finite")
    }

    pub fn check_game(&self, game: &ZeroSumGame) -> Result<()> {
        if game.fingerprint() != self.game_fingerprint {
            return Err(Error::ConfigMismatch("solution was computed for a different game".into()));
        }
        Ok(())
    }
}

fn stage_matrix(game: &ZeroSumGame, s: usize, v: &[f64]) -> MatrixGame {
    let (n1, n2) = (game.n_actions1(), game.n_actions2());
    let mut payoff = Vec::with_capacity(n1 * n2);
    for a1 in 0..n1 {
        for a2 in 0..n2 {
            payoff.push(game.backup(s, a1, a2, v));
        }
    }
    MatrixGame::new(n1, n2, payoff).expect("backups of a valid game are finite")
}

fn stage_error(s: usize, e: Error) -> Error {
    Error::MatrixGame(format!("state {s}: {e}"))
}

/// Shapley iteration: each sweep replaces `V(s)` by the value of the stage
/// game `r(s,·,·) + γ Σ P V`, solving states in parallel.
pub fn game_solve(game: &ZeroSumGame, tol: f64) -> Result<EquilibriumSolution> {
    game.ensure_valid()?;
    let ns = game.n_states();
    // Stage LPs are certified to well below the outer tolerance.
    let lp_tol = (tol * 1e-3).max(1e-12);
    let threshold = stopping_residual(tol, game.discount());
    let mut v = vec![0.0; ns];
    let mut history = Vec::new();
    loop {
        let next: Vec<f64> = (0..ns)
            .into_par_iter()
            .map(|s| stage_matrix(game, s, &v).solve(lp_tol).map(|sol| sol.value).map_err(|e| stage_error(s, e)))
            .collect::<Result<_>>()?;
        let residual = sup_diff(&next, &v);
        v = next;
        history.push(residual);
        if residual <= threshold {
            break;
        }
        if history.len() >= MAX_SWEEPS {
            return Err(Error::NotConverged { iterations: history.len(), residual });
        }
    }

    let (n1, n2) = (game.n_actions1(), game.n_actions2());
    let q: Vec<f64> = (0..ns)
        .flat_map(|s| (0..n1).flat_map(move |a1| (0..n2).map(move |a2| (s, a1, a2))))
        .map(|(s, a1, a2)| game.backup(s, a1, a2, &v))
        .collect();
    let stages: Vec<MatrixGameSolution> = (0..ns)
        .into_par_iter()
        .map(|s| {
            MatrixGame::new(n1, n2, q[s * n1 * n2..(s + 1) * n1 * n2].to_vec())
                .and_then(|m| m.solve(lp_tol))
                .map_err(|e| stage_error(s, e))
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = stages.iter().map(|st| st.value).collect();
    let policy1 = StationaryPolicy::new(stages.iter().map(|st| st.row_strategy.clone()).collect())?;
    let policy2 = StationaryPolicy::new(stages.iter().map(|st| st.col_strategy.clone()).collect())?;
    let mut q_vs_pi2 = Vec::with_capacity(ns * n1);
    for s in 0..ns {
        for a1 in 0..n1 {
            q_vs_pi2.push(policy2.at(s).support().map(|(a2, p)| p * q[(s * n1 + a1) * n2 + a2]).sum());
        }
    }
    Ok(EquilibriumSolution {
        residual: sup_diff(&values, &v),
        values,
        policy1,
        policy2,
        q,
        q_vs_pi2,
        n_actions1: n1,
        n_actions2: n2,
        discount: game.discount(),
        r_max: game.r_max(),
        residual_history: history,
        tol,
        game_fingerprint: game.fingerprint(),
    })
}

/// Distinct action distributions Player 1 uses under its equilibrium
/// policy, in order of first occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSet {
    distributions: Vec<ActionDistribution>,
}

impl SupportSet {
    pub fn new(distributions: Vec<ActionDistribution>) -> Result<Self> {
        if distributions.is_empty() {
            return Err(Error::EmptySupport);
        }
        Ok(Self { distributions })
    }

    pub fn distributions(&self) -> &[ActionDistribution] {
        &self.distributions
    }

    pub fn len(&self) -> usize {
        self.distributions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distributions.is_empty()
    }

    pub fn get(&self, i: usize) -> &ActionDistribution {
        &self.distributions[i]
    }
}

pub fn support_set(policy1: &StationaryPolicy) -> SupportSet {
    let mut out: Vec<ActionDistribution> = Vec::new();
    for d in policy1.iter() {
        if !out.iter().any(|k| k.linf_distance(d) <= DEDUP_TOL) {
            out.push(d.clone());
        }
    }
    SupportSet { distributions: out }
}

#[derive(Debug, Clone)]
pub enum DeltaMode {
    /// Spread of `Q*(s, a)` over single actions.
    PerAction,
    /// Spread of `Q*(s, d)` over the equilibrium support set.
    PerDistribution(SupportSet),
}

/// Per-state spread of values Player 1 can realize: how much is at stake
/// when the state is misjudged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaMap {
    values: Vec<f64>,
}

impl DeltaMap {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::NonFinite(format!("delta weight {v}")));
        }
        Ok(Self { values })
    }

    pub fn from_mdp(solution: &MdpSolution) -> Self {
        let values = (0..solution.values.len()).map(|s| spread(solution.q_row(s).iter().copied())).collect();
        Self { values }
    }

    pub fn compute(solution: &EquilibriumSolution, mode: &DeltaMode) -> Result<Self> {
        let values: Vec<f64> = match mode {
            DeltaMode::PerAction => {
                (0..solution.n_states()).map(|s| spread(solution.q_actions(s).iter().copied())).collect()
            }
            DeltaMode::PerDistribution(support) => {
                if support.is_empty() {
                    return Err(Error::EmptySupport);
                }
                (0..solution.n_states())
                    .map(|s| spread(support.distributions().iter().map(|d| solution.q_dist(s, d))))
                    .collect()
            }
        };
        // Spreads at round-off level are ties, not information.
        let scale = solution.q.iter().fold(1.0_f64, |m, q| m.max(q.abs()));
        let floor = ROUNDOFF_SPREAD * scale;
        let values = values.into_iter().map(|d: f64| if d <= floor { 0.0 } else { d }).collect();
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, s: usize) -> f64 {
        self.values[s]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Relative size below which a spread of values counts as zero.
const ROUNDOFF_SPREAD: f64 = 1e-12;

fn spread(xs: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    (hi - lo).max(0.0)
}

pub fn delta_map(solution: &EquilibriumSolution, mode: &DeltaMode) -> Result<DeltaMap> {
    DeltaMap::compute(solution, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    #[test]
    fn fig1_values_and_delta() {
        let (mdp, _) = scenarios::fig1_mdp(0.9).unwrap();
        let sol = mdp_solve(&mdp, 1e-9).unwrap();
        for s in 0..2 {
            assert!((sol.values[s] - 10.0).abs() < 1e-9);
        }
        assert!((sol.q(0, 0) - 10.0).abs() < 1e-9);
        assert!((sol.q(0, 1) - 9.0).abs() < 1e-9);
        let delta = DeltaMap::from_mdp(&sol);
        assert!((delta.get(0) - 1.0).abs() < 1e-9);
        assert_eq!(sol.policy.at(0).probs(), [1.0, 0.0]);
        assert_eq!(sol.policy.at(1).probs(), [0.0, 1.0]);
    }

    #[test]
    fn single_state_geometric_series() {
        let mdp = Mdp::new(
            vec!["s".into()],
            vec!["a".into(), "b".into()],
            vec![vec![(0, 1.0)], vec![(0, 1.0)]],
            vec![1.0, 1.0],
            0.75,
            0,
            None,
        )
        .unwrap();
        let sol = mdp_solve(&mdp, 1e-10).unwrap();
        assert!((sol.values[0] - 4.0).abs() < 1e-10);
        // tie goes to the first action
        assert_eq!(sol.policy.at(0).probs(), [1.0, 0.0]);
    }

    #[test]
    fn fig3_security_value() {
        let (game, _) = scenarios::fig3_game(0.5, 0.9).unwrap();
        let sol = game_solve(&game, 1e-6).unwrap();
        assert!((sol.values[0] - 4.5).abs() < 1e-6);
        assert_eq!(sol.policy2.at(0).probs(), [0.0, 1.0]);
    }

    #[test]
    fn game_with_irrelevant_opponent_matches_mdp() {
        let (game, _) = scenarios::random_game(&scenarios::RandomGameConfig { seed: 5, ..Default::default() }).unwrap();
        // Rewards and transitions copied from a2 = 0 for every a2.
        let mut doc = game.to_document();
        for s in 0..doc.states.len() {
            for a1 in 0..doc.actions1.len() {
                for a2 in 1..doc.actions2.len() {
                    doc.transitions[s][a1][a2] = doc.transitions[s][a1][0].clone();
                    doc.rewards[s][a1][a2] = doc.rewards[s][a1][0];
                }
            }
        }
        let game = ZeroSumGame::from_document(doc).unwrap();
        let sol = game_solve(&game, 1e-7).unwrap();
        let mdp = game.induced_mdp(&StationaryPolicy::deterministic(&vec![0; game.n_states()], game.n_actions2())).unwrap();
        let msol = mdp_solve(&mdp, 1e-7).unwrap();
        for s in 0..game.n_states() {
            assert!((sol.values[s] - msol.values[s]).abs() < 2e-7);
        }
    }

    #[test]
    fn support_set_dedups_in_first_occurrence_order() {
        let p = StationaryPolicy::deterministic(&[1, 1, 0, 1, 0], 3);
        let d = support_set(&p);
        assert_eq!(d.len(), 2);
        assert_eq!(d.get(0).probs(), [0.0, 1.0, 0.0]);
        assert_eq!(d.get(1).probs(), [1.0, 0.0, 0.0]);
        assert_eq!(support_set(&StationaryPolicy::uniform(4, 2)).len(), 1);
    }

    #[test]
    fn singleton_support_gives_zero_delta() {
        let (game, _) = scenarios::random_game(&scenarios::RandomGameConfig { seed: 2, ..Default::default() }).unwrap();
        let sol = game_solve(&game, 1e-6).unwrap();
        let single = SupportSet::new(vec![sol.policy1.at(0).clone()]).unwrap();
        let delta = DeltaMap::compute(&sol, &DeltaMode::PerDistribution(single)).unwrap();
        assert!(delta.values().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn flat_state_has_zero_delta() {
        let sol = MdpSolution {
            values: vec![1.0],
            q: vec![1.0, 1.0, 1.0],
            policy: StationaryPolicy::deterministic(&[0], 3),
            n_actions: 3,
            residual: 0.0,
            sweeps: 1,
        };
        assert_eq!(DeltaMap::from_mdp(&sol).get(0), 0.0);
    }

    #[test]
    fn empty_support_is_an_error() {
        assert!(matches!(SupportSet::new(vec![]), Err(Error::EmptySupport)));
    }
}
