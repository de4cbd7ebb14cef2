//! Rational-inattention sensor selection and deceptive deviations in
//! two-player zero-sum stochastic games.
//!
//! Player 1 maintains a belief over the game state, chooses a subset of
//! sensors each step by minimizing a value-weighted binary-entropy
//! objective, and acts on the belief with a Q_MDP-style rule. Player 2
//! either follows its equilibrium (security) policy or myopically exploits
//! Player 1's belief.
//!
//! The crate is organized bottom-up:
//!
//! * [`game`]: games, MDPs, policies, beliefs and their JSON form.
//! * [`equilibrium`]: matrix-game LP, value iteration, Shapley iteration,
//!   support sets and the per-state stakes map Δ.
//! * [`sensing`]: sensor banks, Bayes observation updates, the weighted
//!   entropy objective and the greedy / baseline selectors.
//! * [`agents`]: action and prediction rules for both players.
//! * [`sim`]: the per-step episode timeline, Monte-Carlo estimation and an
//!   exact finite-horizon evaluator.
//! * [`scenarios`]: the concrete example games and experiment drivers.

pub mod agents;
pub mod csv;
pub mod equilibrium;
pub mod error;
pub mod game;
pub mod rng;
pub mod scenarios;
pub mod sensing;
pub mod sim;

pub use agents::{ActionRule, Player1Config, Player2Mode, SensorPolicy};
pub use equilibrium::{
    game_solve, mdp_solve, solve_matrix_game, support_set, DeltaMap, DeltaMode,
    EquilibriumSolution, MatrixGame, MatrixGameSolution, MdpSolution, SupportSet,
};
pub use error::{Error, Result};
pub use game::{ActionDistribution, Belief, Mdp, StationaryPolicy, ZeroSumGame};
pub use sensing::{JointObservation, Sensor, SensorBank, StopRule};
pub use sim::{EpisodeRecord, ReturnEstimate, Simulator, SurpriseEvent};
