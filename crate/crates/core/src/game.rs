//! Games, MDPs, policies and beliefs.
//!
//! States and actions are dense integer indices. Transition rows are kept
//! sparse (only non-zero successors) so the 1332-state line-defense game
//! fits comfortably in memory; the JSON form is the dense nested array.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on probability sums of input data.
pub const INPUT_SUM_TOL: f64 = 1e-12;
/// Tolerance on probability sums of computed beliefs.
pub const BELIEF_SUM_TOL: f64 = 1e-10;

/// Sparse probability row: `(successor, probability)` pairs, sorted by
/// successor, zero entries omitted.
pub type SparseRow = Vec<(usize, f64)>;

fn check_simplex(probs: &[f64], tol: f64, what: &str) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidDistribution(format!("{what} is empty")));
    }
    if let Some(p) = probs.iter().find(|p| !p.is_finite()) {
        return Err(Error::InvalidDistribution(format!("{what} has entry {p}")));
    }
    if let Some(p) = probs.iter().find(|&&p| p < 0.0) {
        return Err(Error::InvalidDistribution(format!("{what} has negative entry {p}")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::InvalidDistribution(format!("{what} sums to {sum}")));
    }
    Ok(())
}

/// A mixed strategy over one player's action set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDistribution {
    probs: Vec<f64>,
}

impl ActionDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_simplex(&probs, INPUT_SUM_TOL, "action distribution")?;
        Ok(Self { probs })
    }

    /// Clamps tiny negatives from solver round-off and renormalizes.
    pub(crate) fn from_solver(mut probs: Vec<f64>) -> Self {
        for p in probs.iter_mut() {
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= sum;
        }
        Self { probs }
    }

    pub fn dirac(n: usize, action: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[action] = 1.0;
        Self { probs }
    }

    pub fn uniform(n: usize) -> Self {
        Self { probs: vec![1.0 / n as f64; n] }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, action: usize) -> f64 {
        self.probs[action]
    }

    /// Indices with positive probability.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs.iter().copied().enumerate().filter(|&(_, p)| p > 0.0)
    }

    pub fn linf_distance(&self, other: &Self) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// One action distribution per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryPolicy {
    dists: Vec<ActionDistribution>,
}

impl StationaryPolicy {
    pub fn new(dists: Vec<ActionDistribution>) -> Result<Self> {
        if let Some(first) = dists.first() {
            if dists.iter().any(|d| d.len() != first.len()) {
                return Err(Error::Dimension(
                    "policy distributions have differing action counts".into(),
                ));
            }
        }
        Ok(Self { dists })
    }

    pub fn deterministic(actions: &[usize], n_actions: usize) -> Self {
        Self {
            dists: actions
                .iter()
                .map(|&a| ActionDistribution::dirac(n_actions, a))
                .collect(),
        }
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self { dists: vec![ActionDistribution::uniform(n_actions); n_states] }
    }

    pub fn at(&self, state: usize) -> &ActionDistribution {
        &self.dists[state]
    }

    pub fn n_states(&self) -> usize {
        self.dists.len()
    }

    pub fn n_actions(&self) -> usize {
        self.dists.first().map_or(0, ActionDistribution::len)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ActionDistribution> {
        self.dists.iter()
    }

    /// Entrywise `weight * self + (1 - weight) * other`.
    pub fn mix(&self, other: &Self, weight: f64) -> Result<Self> {
        if self.n_states() != other.n_states() || self.n_actions() != other.n_actions() {
            return Err(Error::Dimension("policies differ in shape".into()));
        }
        let dists = self
            .dists
            .iter()
            .zip(&other.dists)
            .map(|(a, b)| ActionDistribution {
                probs: a
                    .probs
                    .iter()
                    .zip(&b.probs)
                    .map(|(x, y)| weight * x + (1.0 - weight) * y)
                    .collect(),
            })
            .collect();
        Ok(Self { dists })
    }
}

/// Probability vector over game states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    probs: Vec<f64>,
}

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_simplex(&probs, BELIEF_SUM_TOL, "belief")?;
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights. Fails if they sum to zero.
    pub fn from_weights(mut weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::DegenerateBelief);
        }
        for w in weights.iter_mut() {
            *w /= sum;
        }
        Ok(Self { probs: weights })
    }

    pub fn dirac(n_states: usize, state: usize) -> Result<Self> {
        if state >= n_states {
            return Err(Error::UnknownState { index: state, count: n_states });
        }
        let mut probs = vec![0.0; n_states];
        probs[state] = 1.0;
        Ok(Self { probs })
    }

    pub fn uniform(n_states: usize) -> Self {
        Self { probs: vec![1.0 / n_states as f64; n_states] }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, state: usize) -> f64 {
        self.probs[state]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// States with positive probability.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs.iter().copied().enumerate().filter(|&(_, p)| p > 0.0)
    }

    pub fn is_normalized(&self) -> bool {
        check_simplex(&self.probs, BELIEF_SUM_TOL, "belief").is_ok()
    }

    /// Exact bit pattern, used as a hash key when merging identical beliefs.
    pub(crate) fn bits(&self) -> Vec<u64> {
        self.probs.iter().map(|p| p.to_bits()).collect()
    }
}

/// A single invariant violation found by [`ZeroSumGame::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RowSum { state: usize, a1: usize, a2: usize, sum: f64 },
    NegativeProbability { state: usize, a1: usize, a2: usize, successor: usize, p: f64 },
    Reward { state: usize, a1: usize, a2: usize, reward: f64, r_max: f64 },
    Discount(f64),
    InitialState(usize),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::RowSum { state, a1, a2, sum } => {
                write!(f, "transition row (s={state}, a1={a1}, a2={a2}) sums to {sum}")
            }
            Violation::NegativeProbability { state, a1, a2, successor, p } => write!(
                f,
                "transition (s={state}, a1={a1}, a2={a2}) -> {successor} has probability {p}"
            ),
            Violation::Reward { state, a1, a2, reward, r_max } => write!(
                f,
                "reward (s={state}, a1={a1}, a2={a2}) = {reward} exceeds r_max {r_max}"
            ),
            Violation::Discount(g) => write!(f, "discount {g} outside [0, 1)"),
            Violation::InitialState(s) => write!(f, "initial state {s} out of range"),
        }
    }
}

/// Two-player zero-sum stochastic game. Player 1 receives `reward`,
/// Player 2 its negation.
#[derive(Debug, Clone)]
pub struct ZeroSumGame {
    states: Vec<String>,
    actions1: Vec<String>,
    actions2: Vec<String>,
    transitions: Vec<SparseRow>,
    rewards: Vec<f64>,
    discount: f64,
    initial_state: usize,
    r_max: f64,
    fingerprint: u64,
}

impl ZeroSumGame {
    /// Builds a game from sparse rows indexed `(s * |A1| + a1) * |A2| + a2`.
    ///
    /// Only shapes are checked here; stochasticity and reward bounds are
    /// reported by [`validate`](Self::validate). When `r_max` is `None` it
    /// is taken as the largest absolute reward.
    pub fn new(
        states: Vec<String>,
        actions1: Vec<String>,
        actions2: Vec<String>,
        transitions: Vec<SparseRow>,
        rewards: Vec<f64>,
        discount: f64,
        initial_state: usize,
        r_max: Option<f64>,
    ) -> Result<Self> {
        let (ns, n1, n2) = (states.len(), actions1.len(), actions2.len());
        if ns == 0 || n1 == 0 || n2 == 0 {
            return Err(Error::Dimension("game needs at least one state and action".into()));
        }
        let rows = ns * n1 * n2;
        if transitions.len() != rows || rewards.len() != rows {
            return Err(Error::Dimension(format!(
                "expected {rows} transition rows and rewards, got {} and {}",
                transitions.len(),
                rewards.len()
            )));
        }
        for row in &transitions {
            if let Some(&(q, _)) = row.iter().find(|&&(q, _)| q >= ns) {
                return Err(Error::UnknownState { index: q, count: ns });
            }
        }
        if let Some(r) = rewards.iter().find(|r| !r.is_finite()) {
            return Err(Error::NonFinite(format!("reward {r}")));
        }
        let transitions: Vec<SparseRow> = transitions
            .into_iter()
            .map(|mut row| {
                row.retain(|&(_, p)| p.to_bits() != 0);
                row.sort_by_key(|&(q, _)| q);
                row
            })
            .collect();
        let r_max = r_max.unwrap_or_else(|| rewards.iter().fold(0.0, |m, r| f64::max(m, r.abs())));
        let fingerprint = fingerprint(&transitions, &rewards, discount, initial_state, [ns, n1, n2]);
        Ok(Self {
            states,
            actions1,
            actions2,
            transitions,
            rewards,
            discount,
            initial_state,
            r_max,
            fingerprint,
        })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions1(&self) -> usize {
        self.actions1.len()
    }

    pub fn n_actions2(&self) -> usize {
        self.actions2.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn action1_names(&self) -> &[String] {
        &self.actions1
    }

    pub fn action2_names(&self) -> &[String] {
        &self.actions2
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Content hash over dynamics and rewards; used to check that solver
    /// outputs and agent configurations belong to the same game.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    #[inline]
    fn row_index(&self, s: usize, a1: usize, a2: usize) -> usize {
        (s * self.actions1.len() + a1) * self.actions2.len() + a2
    }

    #[inline]
    pub fn transition(&self, s: usize, a1: usize, a2: usize) -> &[(usize, f64)] {
        &self.transitions[self.row_index(s, a1, a2)]
    }

    #[inline]
    pub fn reward(&self, s: usize, a1: usize, a2: usize) -> f64 {
        self.rewards[self.row_index(s, a1, a2)]
    }

    /// `r(s,a1,a2) + γ Σ_q P(s,a1,a2,q) v(q)`
    #[inline]
    pub fn backup(&self, s: usize, a1: usize, a2: usize, values: &[f64]) -> f64 {
        let row = self.row_index(s, a1, a2);
        let cont: f64 = self.transitions[row].iter().map(|&(q, p)| p * values[q]).sum();
        self.rewards[row] + self.discount * cont
    }

    /// True when every action pair keeps `s` in place with zero reward.
    pub fn is_absorbing_zero(&self, s: usize) -> bool {
        (0..self.n_actions1()).all(|a1| {
            (0..self.n_actions2()).all(|a2| {
                self.reward(s, a1, a2) == 0.0 && self.transition(s, a1, a2) == [(s, 1.0)]
            })
        })
    }

    /// Lists every violated invariant; an empty list means the game is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for s in 0..self.n_states() {
            for a1 in 0..self.n_actions1() {
                for a2 in 0..self.n_actions2() {
                    let row = self.transition(s, a1, a2);
                    for &(q, p) in row {
                        if p < 0.0 || !p.is_finite() {
                            out.push(Violation::NegativeProbability { state: s, a1, a2, successor: q, p });
                        }
                    }
                    let sum: f64 = row.iter().map(|&(_, p)| p).sum();
                    if !((sum - 1.0).abs() <= INPUT_SUM_TOL) {
                        out.push(Violation::RowSum { state: s, a1, a2, sum });
                    }
                    let r = self.reward(s, a1, a2);
                    if r.abs() > self.r_max {
                        out.push(Violation::Reward { state: s, a1, a2, reward: r, r_max: self.r_max });
                    }
                }
            }
        }
        if !(0.0..1.0).contains(&self.discount) {
            out.push(Violation::Discount(self.discount));
        }
        if self.initial_state >= self.n_states() {
            out.push(Violation::InitialState(self.initial_state));
        }
        out
    }

    pub(crate) fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidGame(violations))
        }
    }

    /// Same game with rewards mapped through `f`; `r_max` is recomputed.
    pub fn map_rewards(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.states.clone(),
            self.actions1.clone(),
            self.actions2.clone(),
            self.transitions.clone(),
            self.rewards.iter().map(|&r| f(r)).collect(),
            self.discount,
            self.initial_state,
            None,
        )
    }

    /// The MDP faced by Player 1 when Player 2 plays `pi2`.
    pub fn induced_mdp(&self, pi2: &StationaryPolicy) -> Result<Mdp> {
        if pi2.n_states() != self.n_states() || pi2.n_actions() != self.n_actions2() {
            return Err(Error::Dimension(format!(
                "policy is {}x{}, game has {} states and {} Player 2 actions",
                pi2.n_states(),
                pi2.n_actions(),
                self.n_states(),
                self.n_actions2()
            )));
        }
        let (ns, n1) = (self.n_states(), self.n_actions1());
        let mut transitions = Vec::with_capacity(ns * n1);
        let mut rewards = Vec::with_capacity(ns * n1);
        for s in 0..ns {
            let d2 = pi2.at(s);
            for a1 in 0..n1 {
                let mut reward = 0.0;
                let mut merged: SparseRow = Vec::new();
                for (a2, w) in d2.support() {
                    reward += w * self.reward(s, a1, a2);
                    merged.extend(self.transition(s, a1, a2).iter().map(|&(q, p)| (q, w * p)));
                }
                transitions.push(collapse(merged));
                rewards.push(reward);
            }
        }
        Mdp::new(
            self.states.clone(),
            self.actions1.clone(),
            transitions,
            rewards,
            self.discount,
            self.initial_state,
            Some(self.r_max),
        )
    }

    pub fn to_document(&self) -> GameDocument {
        let (ns, n1, n2) = (self.n_states(), self.n_actions1(), self.n_actions2());
        let mut transitions = Vec::with_capacity(ns);
        let mut rewards = Vec::with_capacity(ns);
        for s in 0..ns {
            let mut t1 = Vec::with_capacity(n1);
            let mut r1 = Vec::with_capacity(n1);
            for a1 in 0..n1 {
                let mut t2 = Vec::with_capacity(n2);
                let mut r2 = Vec::with_capacity(n2);
                for a2 in 0..n2 {
                    let mut dense = vec![0.0; ns];
                    for &(q, p) in self.transition(s, a1, a2) {
                        dense[q] = p;
                    }
                    t2.push(dense);
                    r2.push(self.reward(s, a1, a2));
                }
                t1.push(t2);
                r1.push(r2);
            }
            transitions.push(t1);
            rewards.push(r1);
        }
        GameDocument {
            states: self.states.clone(),
            actions1: self.actions1.clone(),
            actions2: self.actions2.clone(),
            gamma: self.discount,
            initial_state: self.initial_state,
            transitions,
            rewards,
            r_max: Some(self.r_max),
        }
    }

    pub fn from_document(doc: GameDocument) -> Result<Self> {
        let (ns, n1, n2) = (doc.states.len(), doc.actions1.len(), doc.actions2.len());
        let shape_err = |what: &str| Error::Dimension(format!("`{what}` does not match the declared states/actions"));
        if doc.transitions.len() != ns || doc.rewards.len() != ns {
            return Err(shape_err("transitions"));
        }
        let mut transitions = Vec::with_capacity(ns * n1 * n2);
        let mut rewards = Vec::with_capacity(ns * n1 * n2);
        for (t1, r1) in doc.transitions.into_iter().zip(doc.rewards) {
            if t1.len() != n1 || r1.len() != n1 {
                return Err(shape_err("transitions"));
            }
            for (t2, r2) in t1.into_iter().zip(r1) {
                if t2.len() != n2 || r2.len() != n2 {
                    return Err(shape_err("rewards"));
                }
                for (dense, r) in t2.into_iter().zip(r2) {
                    if dense.len() != ns {
                        return Err(shape_err("transitions"));
                    }
                    transitions.push(
                        dense.into_iter().enumerate().filter(|&(_, p)| p.to_bits() != 0).collect(),
                    );
                    rewards.push(r);
                }
            }
        }
        Self::new(
            doc.states,
            doc.actions1,
            doc.actions2,
            transitions,
            rewards,
            doc.gamma,
            doc.initial_state,
            doc.r_max,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }
}

/// Dense JSON form of a game. `transitions` is indexed `[s][a1][a2][s']`,
/// `rewards` `[s][a1][a2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameDocument {
    pub states: Vec<String>,
    pub actions1: Vec<String>,
    pub actions2: Vec<String>,
    pub gamma: f64,
    pub initial_state: usize,
    pub transitions: Vec<Vec<Vec<Vec<f64>>>>,
    pub rewards: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
}

/// Single-agent Markov decision process.
#[derive(Debug, Clone)]
pub struct Mdp {
    states: Vec<String>,
    actions: Vec<String>,
    transitions: Vec<SparseRow>,
    rewards: Vec<f64>,
    discount: f64,
    initial_state: usize,
    r_max: f64,
}

impl Mdp {
    /// Rows are indexed `s * |A| + a`.
    pub fn new(
        states: Vec<String>,
        actions: Vec<String>,
        transitions: Vec<SparseRow>,
        rewards: Vec<f64>,
        discount: f64,
        initial_state: usize,
        r_max: Option<f64>,
    ) -> Result<Self> {
        let rows = states.len() * actions.len();
        if rows == 0 || transitions.len() != rows || rewards.len() != rows {
            return Err(Error::Dimension(format!(
                "expected {rows} MDP rows, got {} transitions and {} rewards",
                transitions.len(),
                rewards.len()
            )));
        }
        let ns = states.len();
        for row in &transitions {
            if let Some(&(q, _)) = row.iter().find(|&&(q, _)| q >= ns) {
                return Err(Error::UnknownState { index: q, count: ns });
            }
        }
        let r_max = r_max.unwrap_or_else(|| rewards.iter().fold(0.0, |m, r| f64::max(m, r.abs())));
        Ok(Self { states, actions, transitions, rewards, discount, initial_state, r_max })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    #[inline]
    pub fn transition(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[s * self.actions.len() + a]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.actions.len() + a]
    }

    #[inline]
    pub fn backup(&self, s: usize, a: usize, values: &[f64]) -> f64 {
        let cont: f64 = self.transition(s, a).iter().map(|&(q, p)| p * values[q]).sum();
        self.reward(s, a) + self.discount * cont
    }

    /// Lists violated invariants, reusing the game violation kinds with
    /// Player 2's action fixed at 0.
    pub fn validate(&self) -> Vec<Violation> {
        self.as_game().map(|g| g.validate()).unwrap_or_default()
    }

    /// The same problem as a game in which Player 2 has a single action.
    pub fn as_game(&self) -> Result<ZeroSumGame> {
        ZeroSumGame::new(
            self.states.clone(),
            self.actions.clone(),
            vec!["-".to_string()],
            self.transitions.clone(),
            self.rewards.clone(),
            self.discount,
            self.initial_state,
            Some(self.r_max),
        )
    }
}

/// Sums duplicate successors and drops zeros.
pub(crate) fn collapse(mut row: SparseRow) -> SparseRow {
    row.sort_by_key(|&(q, _)| q);
    let mut out: SparseRow = Vec::with_capacity(row.len());
    for (q, p) in row {
        match out.last_mut() {
            Some(last) if last.0 == q => last.1 += p,
            _ => out.push((q, p)),
        }
    }
    out.retain(|&(_, p)| p != 0.0);
    out
}

fn fingerprint(rows: &[SparseRow], rewards: &[f64], discount: f64, s0: usize, dims: [usize; 3]) -> u64 {
    // FNV-1a over the raw bits
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |x: u64| {
        for byte in x.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    for d in dims {
        eat(d as u64);
    }
    eat(discount.to_bits());
    eat(s0 as u64);
    for r in rewards {
        eat(r.to_bits());
    }
    for row in rows {
        eat(row.len() as u64);
        for &(q, p) in row {
            eat(q as u64);
            eat(p.to_bits());
        }
    }
    h
}
