//! Command implementations behind the `inattention` binary.
//!
//! Each command resolves a scenario (a builtin name with flag overrides, or
//! a JSON document with a `scenario` field), loads or computes the
//! equilibrium solution through an on-disk cache, writes CSV outputs and a
//! `manifest.json` listing every output with its SHA-256 digest.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use inattention_core::csv::{num, Table};
use inattention_core::game::GameDocument;
use inattention_core::scenarios::{self, GridConfig, RandomGameConfig};
use inattention_core::sensing::SensorBankDocument;
use inattention_core::sim::{episodes_csv, horizon_for, summary_csv};
use inattention_core::{
    game_solve, ActionRule, Belief, EquilibriumSolution, Player1Config, Player2Mode, ReturnEstimate, SensorBank,
    SensorPolicy, Simulator, StopRule, ZeroSumGame,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const CACHE_ENV: &str = "INATTENTION_CACHE_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}

impl From<inattention_core::Error> for CliError {
    fn from(e: inattention_core::Error) -> Self {
        use inattention_core::Error as E;
        match e {
            E::NotConverged { .. } | E::MatrixGame(_) | E::DegenerateBelief | E::NodeCap { .. } | E::NonFinite(_) => {
                CliError::Numerical(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// A scenario document. Builtins take their usual parameters; `custom`
/// carries a full game and sensor bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum ScenarioConfig {
    Fig1 {
        #[serde(default = "default_fig_gamma")]
        gamma: f64,
    },
    Fig3 {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_fig_gamma")]
        gamma: f64,
    },
    Grid(GridConfig),
    Random(RandomGameConfig),
    Custom {
        game: GameDocument,
        sensors: SensorBankDocument,
    },
}

fn default_fig_gamma() -> f64 {
    0.9
}

fn default_epsilon() -> f64 {
    0.5
}

/// Overrides given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub epsilon: Option<f64>,
    pub gamma: Option<f64>,
}

impl ScenarioConfig {
    pub fn builtin(name: &str) -> CliResult<Self> {
        Ok(match name {
            "fig1" => Self::Fig1 { gamma: default_fig_gamma() },
            "fig3" => Self::Fig3 { epsilon: default_epsilon(), gamma: default_fig_gamma() },
            "grid" => Self::Grid(GridConfig::default()),
            "random" => Self::Random(RandomGameConfig::default()),
            other => return Err(CliError::Config(format!("unknown scenario `{other}` (expected fig1, fig3, grid or random)"))),
        })
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Fig1 { .. } => "fig1",
            Self::Fig3 { .. } => "fig3",
            Self::Grid(_) => "grid",
            Self::Random(_) => "random",
            Self::Custom { .. } => "custom",
        }
    }

    pub fn apply(&mut self, o: &Overrides) -> CliResult<()> {
        if let Some(e) = o.epsilon {
            match self {
                Self::Fig3 { epsilon, .. } => *epsilon = e,
                _ => return Err(CliError::Config("--epsilon only applies to fig3".into())),
            }
        }
        if let Some(g) = o.gamma {
            match self {
                Self::Fig1 { gamma } | Self::Fig3 { gamma, .. } => *gamma = g,
                Self::Grid(c) => c.gamma = g,
                Self::Random(c) => c.gamma = g,
                Self::Custom { game, .. } => game.gamma = g,
            }
        }
        Ok(())
    }

    pub fn build(&self) -> CliResult<(ZeroSumGame, SensorBank)> {
        Ok(match self {
            Self::Fig1 { gamma } => {
                let (mdp, bank) = scenarios::fig1_mdp(*gamma)?;
                (mdp.as_game()?, bank)
            }
            Self::Fig3 { epsilon, gamma } => scenarios::fig3_game(*epsilon, *gamma)?,
            Self::Grid(c) => scenarios::line_defense(c)?,
            Self::Random(c) => scenarios::random_game(c)?,
            Self::Custom { game, sensors } => {
                let game = ZeroSumGame::from_document(game.clone())?;
                let bank = SensorBank::from_document(game.n_states(), sensors.clone())?;
                (game, bank)
            }
        })
    }

    /// Player 1 as used by the experiments for this scenario.
    pub fn player1(&self, game: &ZeroSumGame, bank: &SensorBank, solution: Arc<EquilibriumSolution>) -> CliResult<Player1Config> {
        Ok(match self {
            Self::Grid(c) => scenarios::grid_player1(game, c, solution)?,
            _ => {
                let policy = SensorPolicy::Weighted(StopRule::Budget(bank.budget()));
                Player1Config::new(game, solution, policy, ActionRule::SupportSet)?
            }
        })
    }

    pub fn horizon(&self, game: &ZeroSumGame) -> usize {
        match self {
            Self::Grid(c) => c.horizon(),
            _ => horizon_for(1e-3, game.r_max(), game.discount()).max(1),
        }
    }

    fn canonical(&self) -> String {
        serde_json::to_string(self).expect("scenario config serializes")
    }
}

/// Where the scenario comes from: a builtin name or a config file.
#[derive(Debug, Clone, Default)]
pub struct ScenarioSource {
    pub scenario: Option<String>,
    pub config: Option<PathBuf>,
    pub overrides: Overrides,
}

impl ScenarioSource {
    pub fn resolve(&self) -> CliResult<ScenarioConfig> {
        let mut cfg = match (&self.scenario, &self.config) {
            (Some(_), Some(_)) => return Err(CliError::Config("give either --scenario or --config, not both".into())),
            (None, None) => return Err(CliError::Config("one of --scenario or --config is required".into())),
            (Some(name), None) => ScenarioConfig::builtin(name)?,
            (None, Some(path)) => ScenarioConfig::load(path)?,
        };
        cfg.apply(&self.overrides)?;
        Ok(cfg)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

/// Record of one command invocation. Everything except
/// `wall_clock_seconds` is a function of the flags and the build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario: String,
    pub config_path: Option<String>,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub tool_version: String,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputFile>,
}

/// Writes output files into one directory and tracks their digests.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<OutputFile>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(io_err(root))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(io_err(&path))?;
        self.files.push(OutputFile { path: name.to_string(), sha256: sha256_hex(contents.as_bytes()) });
        Ok(())
    }

    pub fn finish(mut self, mut manifest: RunManifest) -> CliResult<RunManifest> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        manifest.outputs = self.files;
        let path = self.root.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(io_err(&path))?;
        Ok(manifest)
    }
}

fn manifest(command: &str, cfg: &ScenarioConfig, source: &ScenarioSource, seeds: Vec<u64>, started: Instant) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        scenario: cfg.name().to_string(),
        config_path: source.config.as_ref().map(|p| p.display().to_string()),
        config_sha256: sha256_hex(cfg.canonical().as_bytes()),
        seeds,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        outputs: Vec::new(),
    }
}

/// Cache directory: `$INATTENTION_CACHE_DIR`, else `~/.cache/inattention`,
/// else a directory under the system temp dir.
pub fn cache_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(CACHE_ENV) {
        return PathBuf::from(dir);
    }
    match std::env::var_os("HOME") {
        Some(home) => PathBuf::from(home).join(".cache").join("inattention"),
        None => std::env::temp_dir().join("inattention-cache"),
    }
}

/// Solves the scenario's game, reusing a cached solution keyed by the
/// scenario document, the tolerance and the tool version.
pub fn solve_cached(cfg: &ScenarioConfig, game: &ZeroSumGame, tol: f64) -> CliResult<Arc<EquilibriumSolution>> {
    if !(tol > 0.0) {
        return Err(CliError::Config(format!("--tol must be positive, got {tol}")));
    }
    let key = sha256_hex(format!("{}|{tol:e}|{}", cfg.canonical(), env!("CARGO_PKG_VERSION")).as_bytes());
    let path = cache_dir().join(format!("{}-{}.json", cfg.name(), &key[..16]));
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(sol) = serde_json::from_str::<EquilibriumSolution>(&text) {
            if sol.check_game(game).is_ok() {
                return Ok(Arc::new(sol));
            }
        }
    }
    let sol = game_solve(game, tol)?;
    // The cache is an optimization; failing to write it is not an error.
    if fs::create_dir_all(path.parent().expect("cache file has a parent")).is_ok() {
        let tmp = path.with_extension("json.tmp");
        if fs::write(&tmp, serde_json::to_string(&sol).expect("solution serializes")).is_ok() {
            let _ = fs::rename(&tmp, &path);
        }
    }
    Ok(Arc::new(sol))
}

/// `state,name,value,p1:<action>...,p2:<action>...`
pub fn values_csv(game: &ZeroSumGame, sol: &EquilibriumSolution) -> String {
    let mut header = vec!["state".to_string(), "name".to_string(), "value".to_string()];
    header.extend(game.action1_names().iter().map(|a| format!("p1:{a}")));
    header.extend(game.action2_names().iter().map(|a| format!("p2:{a}")));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new(&refs);
    for s in 0..game.n_states() {
        let mut row = vec![s.to_string(), game.state_names()[s].clone(), num(sol.values[s])];
        row.extend(sol.policy1.at(s).probs().iter().map(|&p| num(p)));
        row.extend(sol.policy2.at(s).probs().iter().map(|&p| num(p)));
        table.row(row);
    }
    table.into_string()
}

#[derive(Debug, Clone)]
pub struct SolveArgs {
    pub source: ScenarioSource,
    pub tol: f64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub initial_value: f64,
    pub residual: f64,
    pub sweeps: usize,
    pub manifest: RunManifest,
}

pub fn cmd_solve(args: &SolveArgs) -> CliResult<SolveReport> {
    let started = Instant::now();
    let cfg = args.source.resolve()?;
    let (game, _) = cfg.build()?;
    let sol = solve_cached(&cfg, &game, args.tol)?;
    let mut out = OutputDir::create(&args.out)?;
    out.write("values.csv", &values_csv(&game, &sol))?;
    let manifest = out.finish(manifest("solve", &cfg, &args.source, Vec::new(), started))?;
    Ok(SolveReport {
        initial_value: sol.values[game.initial_state()],
        residual: sol.residual,
        sweeps: sol.residual_history.len(),
        manifest,
    })
}

pub fn parse_p2(text: &str) -> CliResult<Player2Mode> {
    match text {
        "equilibrium" => Ok(Player2Mode::Equilibrium),
        "deceptive" => Ok(Player2Mode::Deceptive),
        other => Err(CliError::Config(format!("unknown --p2 mode `{other}` (expected equilibrium or deceptive)"))),
    }
}

fn mode_name(mode: Player2Mode) -> &'static str {
    match mode {
        Player2Mode::Equilibrium => "equilibrium",
        Player2Mode::Deceptive => "deceptive",
    }
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub source: ScenarioSource,
    pub p2: Player2Mode,
    pub runs: usize,
    pub seed: u64,
    pub tol: f64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateReport {
    pub estimate: ReturnEstimate,
    pub manifest: RunManifest,
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<SimulateReport> {
    let started = Instant::now();
    if args.runs == 0 {
        return Err(CliError::Config("--runs must be at least 1".into()));
    }
    let cfg = args.source.resolve()?;
    let (game, bank) = cfg.build()?;
    let sol = solve_cached(&cfg, &game, args.tol)?;
    let p1 = cfg.player1(&game, &bank, sol)?;
    let belief = Belief::dirac(game.n_states(), game.initial_state())?;
    let sim = Simulator::new(&game, &bank, &p1, args.p2, cfg.horizon(&game), belief)?;
    let records = sim.run_many(args.runs, args.seed, |r| r)?;
    let returns: Vec<f64> = records.iter().map(|r| r.discounted_return).collect();
    let estimate = ReturnEstimate::from_samples(&returns)?;

    let mut out = OutputDir::create(&args.out)?;
    out.write("episodes.csv", &episodes_csv(&records, &game, &bank))?;
    out.write("summary.csv", &summary_csv(&records))?;
    out.write("estimate.csv", &estimate_csv(&[(mode_name(args.p2), estimate)]))?;
    let manifest = out.finish(manifest("simulate", &cfg, &args.source, vec![args.seed], started))?;
    Ok(SimulateReport { estimate, manifest })
}

fn estimate_csv(rows: &[(&str, ReturnEstimate)]) -> String {
    let mut table = Table::new(&["p2", "mean", "sd", "n", "ci95_half_width"]);
    for (mode, e) in rows {
        table.row([mode.to_string(), num(e.mean), num(e.sd), e.n.to_string(), num(e.half_width)]);
    }
    table.into_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentName {
    Grid,
    Random,
}

impl std::str::FromStr for ExperimentName {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "grid" => Ok(Self::Grid),
            "random" => Ok(Self::Random),
            other => Err(CliError::Config(format!("unknown experiment `{other}` (expected grid or random)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentArgs {
    pub name: ExperimentName,
    pub config: Option<PathBuf>,
    pub overrides: Overrides,
    /// `None` runs both modes.
    pub p2: Option<Player2Mode>,
    pub runs: usize,
    pub games: usize,
    pub seed: u64,
    pub tol: f64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentReport {
    Grid { estimates: Vec<(Player2Mode, ReturnEstimate)>, manifest: RunManifest },
    Random { table: String, manifest: RunManifest },
}

pub fn cmd_experiment(args: &ExperimentArgs) -> CliResult<ExperimentReport> {
    let started = Instant::now();
    if args.runs == 0 {
        return Err(CliError::Config("--runs must be at least 1".into()));
    }
    let source = ScenarioSource {
        scenario: args.config.is_none().then(|| match args.name {
            ExperimentName::Grid => "grid".to_string(),
            ExperimentName::Random => "random".to_string(),
        }),
        config: args.config.clone(),
        overrides: args.overrides.clone(),
    };
    let cfg = source.resolve()?;
    let mut out = OutputDir::create(&args.out)?;
    match (args.name, &cfg) {
        (ExperimentName::Grid, ScenarioConfig::Grid(grid)) => {
            let (game, bank) = cfg.build()?;
            let sol = solve_cached(&cfg, &game, args.tol)?;
            let modes = match args.p2 {
                Some(m) => vec![m],
                None => vec![Player2Mode::Equilibrium, Player2Mode::Deceptive],
            };
            let mut estimates = Vec::new();
            for mode in modes {
                let e = scenarios::run_grid_experiment(grid, &game, &bank, sol.clone(), args.runs, mode, args.seed)?;
                let tag = mode_name(mode);
                out.write(&format!("returns_{tag}.csv"), &e.returns_csv())?;
                out.write(&format!("sensors_{tag}.csv"), &e.sensor_csv())?;
                out.write(&format!("confusion_{tag}.csv"), &e.confusion_csv())?;
                estimates.push((mode, e.estimate));
            }
            let rows: Vec<(&str, ReturnEstimate)> = estimates.iter().map(|(m, e)| (mode_name(*m), *e)).collect();
            out.write("estimate.csv", &estimate_csv(&rows))?;
            let manifest = out.finish(manifest("experiment grid", &cfg, &source, vec![args.seed], started))?;
            Ok(ExperimentReport::Grid { estimates, manifest })
        }
        (ExperimentName::Random, ScenarioConfig::Random(base)) => {
            if args.games == 0 {
                return Err(CliError::Config("--games must be at least 1".into()));
            }
            let result = scenarios::run_random_experiment(base, args.games, args.runs, args.seed, args.tol)?;
            let table = result.csv();
            out.write("random.csv", &table)?;
            let seeds = (0..args.games as u64).map(|g| args.seed.wrapping_add(g)).collect();
            let manifest = out.finish(manifest("experiment random", &cfg, &source, seeds, started))?;
            Ok(ExperimentReport::Random { table, manifest })
        }
        (name, other) => Err(CliError::Config(format!(
            "experiment {name:?} needs a {} scenario, got {}",
            match name {
                ExperimentName::Grid => "grid",
                ExperimentName::Random => "random",
            },
            other.name()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tagged_config_round_trips() {
        let cfg = ScenarioConfig::from_json(r#"{"scenario": "fig3", "epsilon": 0.25}"#).unwrap();
        assert_eq!(cfg, ScenarioConfig::Fig3 { epsilon: 0.25, gamma: 0.9 });
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ScenarioConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn grid_fields_are_checked() {
        let cfg = ScenarioConfig::from_json(r#"{"scenario": "grid", "gamma": 0.95}"#).unwrap();
        assert!(matches!(cfg, ScenarioConfig::Grid(ref g) if g.gamma == 0.95 && g.width == 11));
        let err = ScenarioConfig::from_json(r#"{"scenario": "grid", "widht": 5}"#).unwrap_err();
        assert!(err.to_string().contains("widht"), "{err}");
    }

    #[test]
    fn empty_document_is_a_config_error() {
        let err = ScenarioConfig::from_json("").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn solver_failures_map_to_exit_3() {
        let e: CliError = inattention_core::Error::NotConverged { iterations: 1, residual: 1.0 }.into();
        assert_eq!(e.exit_code(), 3);
        let e: CliError = inattention_core::Error::InvalidParameter("x".into()).into();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn epsilon_override_needs_fig3() {
        let mut cfg = ScenarioConfig::builtin("grid").unwrap();
        assert!(cfg.apply(&Overrides { epsilon: Some(0.1), gamma: None }).is_err());
    }
}
