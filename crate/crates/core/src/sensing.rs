//! Sensors, Bayes observation updates and online sensor selection.
//!
//! Sensors are conditionally independent given the state and have
//! pairwise disjoint alphabets, so a joint observation is one symbol per
//! selected sensor and its likelihood is the product of the per-sensor
//! likelihoods. Joint observations are enumerated exactly.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::DeltaMap;
use crate::error::{Error, Result};
use crate::game::{Belief, INPUT_SUM_TOL};

/// Default bound on the number of joint symbols enumerated per query.
pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;
/// Observation probabilities below this are treated as impossible.
pub const SURPRISE_THRESHOLD: f64 = 1e-12;
const COST_SLACK: f64 = 1e-12;

/// Binary entropy in bits. `p` may overshoot `[0, 1]` by `1e-12`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(p >= -INPUT_SUM_TOL && p <= 1.0 + INPUT_SUM_TOL) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    Ok(h2(p.clamp(0.0, 1.0)))
}

#[inline]
fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

/// `total * h(part / total)` without the division blowing up at the ends.
#[inline]
fn weighted_h2(part: f64, total: f64) -> f64 {
    let rest = total - part;
    if part <= 0.0 || rest <= 0.0 {
        return 0.0;
    }
    -part * (part / total).log2() - rest * (rest / total).log2()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sensor {
    name: String,
    alphabet: Vec<String>,
    /// `O(s, ω)` row-major over `(s, ω)`.
    likelihood: Vec<f64>,
    cost: f64,
}

impl Sensor {
    pub fn new(name: impl Into<String>, alphabet: Vec<String>, likelihood: Vec<Vec<f64>>, cost: f64) -> Result<Self> {
        let name = name.into();
        let k = alphabet.len();
        if k == 0 {
            return Err(Error::InvalidSensorBank(format!("sensor `{name}` has an empty alphabet")));
        }
        if !(cost >= 0.0) || !cost.is_finite() {
            return Err(Error::InvalidSensorBank(format!("sensor `{name}` has cost {cost}")));
        }
        for (s, row) in likelihood.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidSensorBank(format!(
                    "sensor `{name}` row {s} has {} entries for {k} symbols",
                    row.len()
                )));
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > INPUT_SUM_TOL {
                return Err(Error::InvalidSensorBank(format!("sensor `{name}` row {s} sums to {sum}")));
            }
        }
        Ok(Self { name, alphabet, likelihood: likelihood.concat(), cost })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn n_states(&self) -> usize {
        self.likelihood.len() / self.alphabet.len()
    }

    #[inline]
    pub fn likelihood(&self, s: usize, symbol: usize) -> f64 {
        self.likelihood[s * self.alphabet.len() + symbol]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        let k = self.alphabet.len();
        &self.likelihood[s * k..(s + 1) * k]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorBank {
    sensors: Vec<Sensor>,
    budget: f64,
    n_states: usize,
}

impl SensorBank {
    pub fn new(n_states: usize, sensors: Vec<Sensor>, budget: f64) -> Result<Self> {
        if !(budget >= 0.0) {
            return Err(Error::InvalidSensorBank(format!("budget {budget}")));
        }
        let mut seen = std::collections::HashSet::new();
        for sensor in &sensors {
            if sensor.n_states() != n_states {
                return Err(Error::InvalidSensorBank(format!(
                    "sensor `{}` covers {} states, expected {n_states}",
                    sensor.name,
                    sensor.n_states()
                )));
            }
            for symbol in &sensor.alphabet {
                if !seen.insert(symbol.as_str()) {
                    return Err(Error::InvalidSensorBank(format!("symbol `{symbol}` appears in two alphabets")));
                }
            }
        }
        Ok(Self { sensors, budget, n_states })
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn sensor(&self, i: usize) -> &Sensor {
        &self.sensors[i]
    }

    pub fn sensors(&self) -> &[Sensor] {
        &self.sensors
    }

    pub fn cost_of(&self, set: &[usize]) -> f64 {
        set.iter().map(|&i| self.sensors[i].cost).sum()
    }

    fn check_indices(&self, set: &[usize]) -> Result<()> {
        for (k, &i) in set.iter().enumerate() {
            if i >= self.sensors.len() {
                return Err(Error::InvalidSensorBank(format!("sensor index {i} out of range")));
            }
            if set[..k].contains(&i) {
                return Err(Error::InvalidSensorBank(format!("sensor {i} selected twice")));
            }
        }
        Ok(())
    }

    fn check_belief(&self, belief: &Belief) -> Result<()> {
        if belief.len() != self.n_states {
            return Err(Error::Dimension(format!(
                "belief over {} states, sensors over {}",
                belief.len(),
                self.n_states
            )));
        }
        Ok(())
    }

    pub fn to_document(&self) -> SensorBankDocument {
        SensorBankDocument {
            sensors: self
                .sensors
                .iter()
                .map(|s| SensorDocument {
                    name: Some(s.name.clone()),
                    alphabet: s.alphabet.clone(),
                    likelihood: (0..self.n_states).map(|q| s.row(q).to_vec()).collect(),
                    cost: s.cost,
                })
                .collect(),
            budget: self.budget,
        }
    }

    pub fn from_document(n_states: usize, doc: SensorBankDocument) -> Result<Self> {
        let sensors = doc
            .sensors
            .into_iter()
            .enumerate()
            .map(|(i, d)| Sensor::new(d.name.unwrap_or_else(|| format!("sensor{i}")), d.alphabet, d.likelihood, d.cost))
            .collect::<Result<_>>()?;
        Self::new(n_states, sensors, doc.budget)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub alphabet: Vec<String>,
    /// `[s][ω]`
    pub likelihood: Vec<Vec<f64>>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorBankDocument {
    pub sensors: Vec<SensorDocument>,
    #[serde(default)]
    pub budget: f64,
}

/// One symbol (alphabet index) per selected sensor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct JointObservation {
    pub sensors: Vec<usize>,
    pub symbols: Vec<usize>,
}

impl JointObservation {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    /// Likelihood of this observation in state `s`.
    pub fn likelihood(&self, bank: &SensorBank, s: usize) -> f64 {
        self.sensors
            .iter()
            .zip(&self.symbols)
            .map(|(&i, &w)| bank.sensor(i).likelihood(s, w))
            .product()
    }

    /// Symbol names joined with `+`.
    pub fn display<'a>(&'a self, bank: &'a SensorBank) -> impl fmt::Display + 'a {
        struct D<'a>(&'a JointObservation, &'a SensorBank);
        impl fmt::Display for D<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                for (k, (&i, &w)) in self.0.sensors.iter().zip(&self.0.symbols).enumerate() {
                    if k > 0 {
                        f.write_str("+")?;
                    }
                    f.write_str(&self.1.sensor(i).alphabet()[w])?;
                }
                Ok(())
            }
        }
        D(self, bank)
    }
}

/// Visits every joint observation of `set` with non-zero probability under
/// `support`, passing the unnormalized posterior weights `b(s)·Π O(s, ω)`
/// aligned with `support`.
pub(crate) fn for_each_joint(
    support: &[(usize, f64)],
    bank: &SensorBank,
    set: &[usize],
    cap: usize,
    mut visit: impl FnMut(&[usize], &[f64]),
) -> Result<()> {
    let size: u128 = set.iter().map(|&i| bank.sensor(i).alphabet().len() as u128).product();
    if size > cap as u128 {
        return Err(Error::EnumerationCap { size, cap });
    }
    let mut levels: Vec<Vec<f64>> = vec![support.iter().map(|&(_, p)| p).collect()];
    levels.resize(set.len() + 1, vec![0.0; support.len()]);
    let mut symbols = vec![0; set.len()];
    recurse(0, support, bank, set, &mut levels, &mut symbols, &mut visit);
    Ok(())
}

fn recurse(
    depth: usize,
    support: &[(usize, f64)],
    bank: &SensorBank,
    set: &[usize],
    levels: &mut [Vec<f64>],
    symbols: &mut [usize],
    visit: &mut impl FnMut(&[usize], &[f64]),
) {
    if depth == set.len() {
        visit(symbols, &levels[depth]);
        return;
    }
    let sensor = bank.sensor(set[depth]);
    for w in 0..sensor.alphabet().len() {
        let (head, tail) = levels.split_at_mut(depth + 1);
        let (cur, next) = (&head[depth], &mut tail[0]);
        let mut any = false;
        for (k, &(s, _)) in support.iter().enumerate() {
            let x = cur[k] * sensor.likelihood(s, w);
            next[k] = x;
            any |= x > 0.0;
        }
        if any {
            symbols[depth] = w;
            recurse(depth + 1, support, bank, set, levels, symbols, visit);
        }
    }
}

/// Distribution of the joint observation of `set` under `belief`.
pub fn joint_obs_dist(belief: &Belief, bank: &SensorBank, set: &[usize]) -> Result<Vec<(JointObservation, f64)>> {
    joint_obs_dist_capped(belief, bank, set, DEFAULT_ENUMERATION_CAP)
}

pub fn joint_obs_dist_capped(
    belief: &Belief,
    bank: &SensorBank,
    set: &[usize],
    cap: usize,
) -> Result<Vec<(JointObservation, f64)>> {
    bank.check_belief(belief)?;
    bank.check_indices(set)?;
    let support: Vec<(usize, f64)> = belief.support().collect();
    let mut out = Vec::new();
    for_each_joint(&support, bank, set, cap, |symbols, weights| {
        let p: f64 = weights.iter().sum();
        if p > 0.0 {
            out.push((JointObservation { sensors: set.to_vec(), symbols: symbols.to_vec() }, p));
        }
    })?;
    Ok(out)
}

/// Result of conditioning a belief on an observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationUpdate {
    pub belief: Belief,
    /// Predicted probability of the observation when it fell below
    /// [`SURPRISE_THRESHOLD`]; the prior is then returned unchanged.
    pub surprise: Option<f64>,
}

/// Bayes rule on the selected sensors' joint observation.
pub fn bayes_obs_update(belief: &Belief, bank: &SensorBank, obs: &JointObservation) -> Result<ObservationUpdate> {
    bank.check_belief(belief)?;
    bank.check_indices(&obs.sensors)?;
    if obs.sensors.len() != obs.symbols.len() {
        return Err(Error::Dimension("one symbol per selected sensor".into()));
    }
    for (&i, &w) in obs.sensors.iter().zip(&obs.symbols) {
        if w >= bank.sensor(i).alphabet().len() {
            return Err(Error::InvalidSensorBank(format!("symbol {w} out of range for sensor {i}")));
        }
    }
    Ok(bayes_unchecked(belief, bank, obs))
}

pub(crate) fn bayes_unchecked(belief: &Belief, bank: &SensorBank, obs: &JointObservation) -> ObservationUpdate {
    if obs.is_empty() {
        return ObservationUpdate { belief: belief.clone(), surprise: None };
    }
    let mut weights = vec![0.0; belief.len()];
    let mut total = 0.0;
    for (s, p) in belief.support() {
        let w = p * obs.likelihood(bank, s);
        weights[s] = w;
        total += w;
    }
    if total < SURPRISE_THRESHOLD {
        return ObservationUpdate { belief: belief.clone(), surprise: Some(total) };
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
    ObservationUpdate { belief: Belief::from_weights(weights).expect("positive total"), surprise: None }
}

/// `Σ_s Δ(s) · H(1_s(S) | ω_I)`: value-weighted binary entropy of the state
/// indicators after observing the sensors in `set`.
pub fn weighted_entropy_objective(belief: &Belief, bank: &SensorBank, set: &[usize], delta: &DeltaMap) -> Result<f64> {
    bank.check_belief(belief)?;
    bank.check_indices(set)?;
    if delta.len() != belief.len() {
        return Err(Error::Dimension("delta map and belief differ in length".into()));
    }
    let support: Vec<(usize, f64)> = belief.support().collect();
    weighted_objective_on(&support, bank, set, delta)
}

pub(crate) fn weighted_objective_on(
    support: &[(usize, f64)],
    bank: &SensorBank,
    set: &[usize],
    delta: &DeltaMap,
) -> Result<f64> {
    let mut total = 0.0;
    for_each_joint(support, bank, set, DEFAULT_ENUMERATION_CAP, |_, weights| {
        let p: f64 = weights.iter().sum();
        for (&w, &(s, _)) in weights.iter().zip(support) {
            let d = delta.get(s);
            if d > 0.0 {
                total += d * weighted_h2(w, p);
            }
        }
    })?;
    Ok(total)
}

/// `H(S | ω_I)` in bits.
pub fn state_entropy_objective(belief: &Belief, bank: &SensorBank, set: &[usize]) -> Result<f64> {
    bank.check_belief(belief)?;
    bank.check_indices(set)?;
    let support: Vec<(usize, f64)> = belief.support().collect();
    state_entropy_on(&support, bank, set)
}

pub(crate) fn state_entropy_on(support: &[(usize, f64)], bank: &SensorBank, set: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for_each_joint(support, bank, set, DEFAULT_ENUMERATION_CAP, |_, weights| {
        let p: f64 = weights.iter().sum();
        for &w in weights {
            if w > 0.0 {
                total -= w * (w / p).log2();
            }
        }
    })?;
    Ok(total.max(0.0))
}

/// When the greedy selector stops adding sensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Add only sensors that keep the total cost within the budget.
    Budget(f64),
    /// Stop once the objective is at or below the threshold.
    Threshold(f64),
    /// Select exactly this many sensors (fewer if the bank runs out).
    Count(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Chosen sensors in selection order.
    pub sensors: Vec<usize>,
    /// Objective of the final set.
    pub objective: f64,
}

/// Greedy minimization of `objective` over subsets of `candidates`.
/// `spent` is the cost already committed outside the candidates.
pub(crate) fn greedy_over(
    bank: &SensorBank,
    candidates: &[usize],
    spent: f64,
    stop: StopRule,
    mut objective: impl FnMut(&[usize]) -> Result<f64>,
) -> Result<Selection> {
    let mut chosen: Vec<usize> = Vec::new();
    let mut cost = spent;
    let mut current = objective(&chosen)?;
    let mut trial = Vec::with_capacity(candidates.len());
    loop {
        match stop {
            StopRule::Threshold(alpha) if current <= alpha => break,
            StopRule::Count(k) if chosen.len() >= k => break,
            _ => {}
        }
        let mut best: Option<(usize, f64)> = None;
        for &j in candidates {
            if chosen.contains(&j) {
                continue;
            }
            if let StopRule::Budget(c) = stop {
                if cost + bank.sensor(j).cost() > c + COST_SLACK {
                    continue;
                }
            }
            trial.clear();
            trial.extend_from_slice(&chosen);
            trial.push(j);
            let value = objective(&trial)?;
            // strict comparison keeps the lowest index on ties
            if best.is_none_or(|(_, b)| value < b) {
                best = Some((j, value));
            }
        }
        let Some((j, value)) = best else { break };
        chosen.push(j);
        cost += bank.sensor(j).cost();
        current = value;
    }
    Ok(Selection { sensors: chosen, objective: current })
}

/// Greedy selection minimizing the value-weighted entropy objective.
pub fn greedy_select(belief: &Belief, bank: &SensorBank, delta: &DeltaMap, stop: StopRule) -> Result<Selection> {
    bank.check_belief(belief)?;
    if delta.len() != belief.len() {
        return Err(Error::Dimension("delta map and belief differ in length".into()));
    }
    let support: Vec<(usize, f64)> = belief.support().collect();
    let all: Vec<usize> = (0..bank.len()).collect();
    greedy_over(bank, &all, 0.0, stop, |set| weighted_objective_on(&support, bank, set, delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    /// Greedy on the full-state conditional entropy `H(S | ω)`.
    NonWeightedEntropy,
    /// `k` distinct sensors uniformly at random.
    Random,
    All,
    None,
}

/// Reference selectors. `rng` is only drawn from by [`BaselineMethod::Random`].
pub fn baseline_select<R: Rng + ?Sized>(
    belief: &Belief,
    bank: &SensorBank,
    k: usize,
    method: BaselineMethod,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if k > bank.len() {
        return Err(Error::TooManySensors { k, n: bank.len() });
    }
    bank.check_belief(belief)?;
    let all: Vec<usize> = (0..bank.len()).collect();
    Ok(match method {
        BaselineMethod::NonWeightedEntropy => {
            let support: Vec<(usize, f64)> = belief.support().collect();
            greedy_over(bank, &all, 0.0, StopRule::Count(k), |set| state_entropy_on(&support, bank, set))?.sensors
        }
        BaselineMethod::Random => random_subset(&all, k, rng),
        BaselineMethod::All => all,
        BaselineMethod::None => Vec::new(),
    })
}

pub(crate) fn random_subset<R: Rng + ?Sized>(candidates: &[usize], k: usize, rng: &mut R) -> Vec<usize> {
    rand::seq::index::sample(rng, candidates.len(), k.min(candidates.len()))
        .into_iter()
        .map(|i| candidates[i])
        .collect()
}
