//! JSON scenario documents.
//!
//! A document describes either a finite game or a power-control scenario,
//! plus optional sections consumed by individual subcommands. Unknown keys
//! are rejected everywhere.

use std::path::Path;

use serde::{Deserialize, Serialize};
use spectrum_games::continuous::{GridFill, IwOptions, PowerScenario, SolverOptions};
use spectrum_games::experiments::{EnsembleConfig, KnowledgeProfile};
use spectrum_games::learning::LearnerSpec;
use spectrum_games::matrix::{build_power_game_2x2, build_power_game_grid, NormalFormGame};
use spectrum_games::spectrum::{generate_multipath_channels, ChannelSet, FrequencyGrid, NoiseProfile, PowerBudget};
use spectrum_games::Execution;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    MatrixGame,
    PowerGame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub version: u32,
    pub kind: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learners: Option<Vec<LearnerSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning: Option<LearningSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knowledge: Option<KnowledgeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ce: Option<CeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSection {
    pub grid: GridSpec,
    pub channels: ChannelSource,
    pub noise: NoiseSpec,
    pub budgets: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub bins: usize,
    pub band: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSource {
    /// `gains[tx][rx][k]`, squared magnitudes.
    Gains(Vec<Vec<Vec<f64>>>),
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    /// Falls back to the run seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "two")]
    pub users: usize,
    pub tap_count: usize,
    #[serde(default = "one")]
    pub direct_power: f64,
    #[serde(default = "half")]
    pub cross_power: f64,
}

fn two() -> usize {
    2
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

/// A single level shared by every user and bin, or a `[user][k]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Level(f64),
    Table(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixSection {
    Table(PayoffTable),
    /// Concentrate/Spread game built from the power section.
    ConcentrateSpread {
        concentrate_bins: [usize; 2],
    },
    /// Simplex-grid allocations of the power section as actions.
    PowerGrid {
        levels: usize,
        #[serde(default = "exact")]
        fill: GridFill,
    },
}

fn exact() -> GridFill {
    GridFill::Exact
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffTable {
    pub actions: Vec<Vec<String>>,
    pub payoffs: Vec<PayoffEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffEntry {
    /// One action name per player.
    pub profile: Vec<String>,
    pub utilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningSection {
    pub rounds: usize,
    /// `[start, len]` of the averaging window; the whole run when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub profiles: Vec<KnowledgeProfile>,
    /// Start profile of best-response dynamics in finite games (action names).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub welfare_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub budget_pairs: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine_rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_cap: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallel: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

/// Everything a subcommand may need, built and cross-checked up front.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub doc: ScenarioDocument,
    /// `--seed`, else the document seed, else 0.
    pub seed: u64,
    /// Whether either the flag or the document set the seed.
    pub seed_given: bool,
    pub power: Option<PowerScenario>,
    pub game: Option<NormalFormGame>,
    pub solver: SolverOptions,
}

impl ScenarioDocument {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let doc: ScenarioDocument = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if doc.version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "field `version`: unsupported version {}, expected {SCHEMA_VERSION}",
                doc.version
            )));
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize")
    }

    /// Validates every section against the others and builds the scenario
    /// objects. `seed_override` wins over the document seed.
    pub fn resolve(self, seed_override: Option<u64>) -> Result<Resolved, CliError> {
        let given = seed_override.or(self.seed);
        let seed = given.unwrap_or(0);
        let power = match &self.power {
            Some(p) => Some(p.build(seed).map_err(|e| field("power", e))?),
            None => None,
        };
        if self.kind == ScenarioKind::PowerGame && power.is_none() {
            return Err(CliError::Config("field `power`: required for kind power_game".into()));
        }
        let game = match &self.matrix {
            Some(MatrixSection::Table(t)) => Some(t.build()?),
            Some(MatrixSection::ConcentrateSpread { concentrate_bins }) => {
                let sc = power.as_ref().ok_or_else(|| {
                    CliError::Config("field `matrix.concentrate_spread`: needs a `power` section".into())
                })?;
                Some(build_power_game_2x2(sc, *concentrate_bins).map_err(|e| field("matrix.concentrate_spread", e))?)
            }
            Some(MatrixSection::PowerGrid { levels, fill }) => {
                let sc = power
                    .as_ref()
                    .ok_or_else(|| CliError::Config("field `matrix.power_grid`: needs a `power` section".into()))?;
                Some(build_power_game_grid(sc, *levels, *fill).map_err(|e| field("matrix.power_grid", e))?)
            }
            None => None,
        };
        if self.kind == ScenarioKind::MatrixGame && game.is_none() {
            return Err(CliError::Config("field `matrix`: required for kind matrix_game".into()));
        }
        let users = power.as_ref().map(PowerScenario::user_count).or(game.as_ref().map(NormalFormGame::player_count));
        let check_len = |what: &str, len: usize| -> Result<(), CliError> {
            match users {
                Some(n) if n != len => Err(CliError::Config(format!("field `{what}`: {len} entries for {n} users"))),
                _ => Ok(()),
            }
        };
        if let Some(learners) = &self.learners {
            check_len("learners", learners.len())?;
        }
        if let Some(k) = &self.knowledge {
            for p in &k.profiles {
                check_len("knowledge.profiles", p.levels().len())?;
            }
            if let Some(w) = &k.welfare_weights {
                check_len("knowledge.welfare_weights", w.len())?;
            }
            if let (Some(start), Some(g)) = (&k.start, &game) {
                action_indices(g, start).map_err(|e| CliError::Config(format!("field `knowledge.start`: {e}")))?;
            }
        }
        if let Some(s) = &self.sweep {
            for b in &s.budget_pairs {
                check_len("sweep.budget_pairs", b.len())?;
            }
            for w in &s.weights {
                check_len("sweep.weights", w.len())?;
            }
        }
        if let (Some(ce), Some(g)) = (&self.ce, &game) {
            if let Some(d) = &ce.distribution {
                if d.len() != g.profile_count() {
                    return Err(CliError::Config(format!(
                        "field `ce.distribution`: {} entries for {} joint profiles",
                        d.len(),
                        g.profile_count()
                    )));
                }
            }
            if let Some(w) = &ce.weights {
                check_len("ce.weights", w.len())?;
            }
        }
        if let Some(e) = &self.ensemble {
            if e.budgets.len() != 2 {
                return Err(CliError::Config("field `ensemble.budgets`: ensembles have two users".into()));
            }
        }
        let solver = self.solver.clone().unwrap_or_default().options();
        Ok(Resolved { doc: self, seed, seed_given: given.is_some(), power, game, solver })
    }
}

fn field(name: &str, e: spectrum_games::Error) -> CliError {
    CliError::Config(format!("field `{name}`: {e}"))
}

impl PowerSection {
    pub fn build(&self, seed: u64) -> spectrum_games::Result<PowerScenario> {
        let grid = FrequencyGrid::new(self.grid.bins, self.grid.band)?;
        let channels = match &self.channels {
            ChannelSource::Gains(g) => ChannelSet::from_nested(g)?,
            ChannelSource::Generator(g) => generate_multipath_channels(
                g.seed.unwrap_or(seed),
                g.users,
                &grid,
                g.tap_count,
                g.direct_power,
                g.cross_power,
            )?,
        };
        let noise = match &self.noise {
            NoiseSpec::Level(level) => NoiseProfile::uniform(channels.user_count(), self.grid.bins, *level)?,
            NoiseSpec::Table(rows) => NoiseProfile::new(rows)?,
        };
        PowerScenario::new(grid, channels, noise, PowerBudget::new(self.budgets.clone())?)
    }
}

impl PayoffTable {
    pub fn build(&self) -> Result<NormalFormGame, CliError> {
        let entries = self
            .payoffs
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let profile = self
                    .indices(&e.profile)
                    .map_err(|msg| CliError::Config(format!("field `matrix.table.payoffs[{i}].profile`: {msg}")))?;
                Ok((profile, e.utilities.clone()))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        NormalFormGame::from_table(self.actions.clone(), &entries).map_err(|e| field("matrix.table", e))
    }

    fn indices(&self, names: &[String]) -> Result<Vec<usize>, String> {
        if names.len() != self.actions.len() {
            return Err(format!("{} actions for {} players", names.len(), self.actions.len()));
        }
        names
            .iter()
            .zip(&self.actions)
            .map(|(n, acts)| acts.iter().position(|a| a == n).ok_or_else(|| format!("unknown action '{n}'")))
            .collect()
    }
}

/// Maps action names to indices, one per player.
pub fn action_indices(game: &NormalFormGame, names: &[String]) -> Result<Vec<usize>, String> {
    if names.len() != game.player_count() {
        return Err(format!("{} actions for {} players", names.len(), game.player_count()));
    }
    names
        .iter()
        .enumerate()
        .map(|(n, name)| {
            game.action_names()[n]
                .iter()
                .position(|a| a == name)
                .ok_or_else(|| format!("unknown action '{name}' for player {}", n + 1))
        })
        .collect()
}

impl SolverSection {
    pub fn options(&self) -> SolverOptions {
        let d = SolverOptions::default();
        SolverOptions {
            iw: IwOptions { tol: self.tol.unwrap_or(d.iw.tol), max_iter: self.max_iter.unwrap_or(d.iw.max_iter) },
            levels: self.levels.unwrap_or(d.levels),
            refine_rounds: self.refine_rounds.unwrap_or(d.refine_rounds),
            oracle_cap: self.oracle_cap.map_or(d.oracle_cap, u128::from),
            execution: match self.parallel {
                Some(false) => Execution::Sequential,
                _ => Execution::Parallel,
            },
        }
    }
}
