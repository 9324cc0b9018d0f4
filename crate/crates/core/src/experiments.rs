//! Scenario-level studies: the value of knowledge, seeded channel ensembles
//! comparing the Stackelberg outcome with the IW equilibrium, and joined
//! rate-region tables.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::continuous::{
    iterative_water_filling, rate_region_sweep, stackelberg_leader_search, weighted_sum_optimize, PowerScenario,
    RegionMethod, RegionSample, SolverOptions,
};
use crate::error::{dim, invalid, Error, Result};
use crate::matrix::{best_response_dynamics, max_weighted_profile, stackelberg_finite, NormalFormGame};
use crate::spectrum::{generate_multipath_channels, FrequencyGrid, NoiseProfile, PowerAllocation, PowerBudget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeLevel {
    #[serde(alias = "priv")]
    Private,
    #[serde(alias = "heter")]
    HeterogeneousLeader,
    #[serde(alias = "comp")]
    Complete,
}

impl FromStr for KnowledgeLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "priv" | "private" => Ok(KnowledgeLevel::Private),
            "heter" | "heterogeneous_leader" => Ok(KnowledgeLevel::HeterogeneousLeader),
            "comp" | "complete" => Ok(KnowledgeLevel::Complete),
            other => Err(invalid(format!("unknown knowledge level '{other}'"))),
        }
    }
}

impl fmt::Display for KnowledgeLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KnowledgeLevel::Private => "priv",
            KnowledgeLevel::HeterogeneousLeader => "heter",
            KnowledgeLevel::Complete => "comp",
        })
    }
}

/// How knowledge is spread over the users.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnowledgeRegime {
    AllPrivate,
    Leader(usize),
    AllComplete,
}

/// Per-user knowledge levels. At most one user may be a heterogeneous
/// leader, and complete knowledge is held by everyone or no one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<KnowledgeLevel>", into = "Vec<KnowledgeLevel>")]
pub struct KnowledgeProfile(Vec<KnowledgeLevel>);

impl KnowledgeProfile {
    pub fn new(levels: Vec<KnowledgeLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(invalid("knowledge profile is empty"));
        }
        let leaders = levels.iter().filter(|l| **l == KnowledgeLevel::HeterogeneousLeader).count();
        if leaders > 1 {
            return Err(invalid("at most one user can hold heterogeneous knowledge"));
        }
        let complete = levels.iter().filter(|l| **l == KnowledgeLevel::Complete).count();
        if complete != 0 && complete != levels.len() {
            return Err(invalid("complete knowledge must be held by all users or none"));
        }
        Ok(KnowledgeProfile(levels))
    }

    pub fn levels(&self) -> &[KnowledgeLevel] {
        &self.0
    }

    pub fn regime(&self) -> KnowledgeRegime {
        if self.0[0] == KnowledgeLevel::Complete {
            KnowledgeRegime::AllComplete
        } else if let Some(n) = self.0.iter().position(|l| *l == KnowledgeLevel::HeterogeneousLeader) {
            KnowledgeRegime::Leader(n)
        } else {
            KnowledgeRegime::AllPrivate
        }
    }
}

impl FromStr for KnowledgeProfile {
    type Err = Error;

    /// Comma-separated levels, e.g. `heter,priv`.
    fn from_str(s: &str) -> Result<Self> {
        KnowledgeProfile::new(s.split(',').map(str::parse).collect::<Result<_>>()?)
    }
}

impl fmt::Display for KnowledgeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl TryFrom<Vec<KnowledgeLevel>> for KnowledgeProfile {
    type Error = Error;

    fn try_from(levels: Vec<KnowledgeLevel>) -> Result<Self> {
        KnowledgeProfile::new(levels)
    }
}

impl From<KnowledgeProfile> for Vec<KnowledgeLevel> {
    fn from(p: KnowledgeProfile) -> Self {
        p.0
    }
}

/// Scenario handed to [`value_of_knowledge`].
#[derive(Debug, Clone)]
pub enum KnowledgeScenario<'a> {
    /// Finite game; private users run best-response dynamics from `start`.
    Finite {
        game: &'a NormalFormGame,
        start: Vec<usize>,
    },
    Power(&'a PowerScenario),
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct KnowledgeOptions {
    pub solver: SolverOptions,
    /// Welfare weights for complete knowledge; all ones when absent.
    pub welfare_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnowledgeOutcome {
    pub utilities: Vec<f64>,
    /// Joint action reached in a finite game.
    pub profile: Option<Vec<usize>>,
    /// Joint PSD reached in a power game.
    pub allocation: Option<PowerAllocation>,
    /// False when an inner IW run hit its iteration cap.
    pub converged: bool,
}

/// Utilities induced when every user plays the policy its knowledge supports:
/// best response for private users, Stackelberg commitment for a
/// heterogeneous leader, and the welfare optimum under complete knowledge.
pub fn value_of_knowledge(
    scenario: &KnowledgeScenario<'_>,
    profile: &KnowledgeProfile,
    opts: &KnowledgeOptions,
) -> Result<KnowledgeOutcome> {
    let users = match scenario {
        KnowledgeScenario::Finite { game, .. } => game.player_count(),
        KnowledgeScenario::Power(sc) => sc.user_count(),
    };
    if profile.levels().len() != users {
        return Err(dim(format!("knowledge profile has {} entries for {users} users", profile.levels().len())));
    }
    let weights = opts.welfare_weights.clone().unwrap_or_else(|| vec![1.0; users]);
    match (scenario, profile.regime()) {
        (KnowledgeScenario::Finite { game, start }, regime) => {
            let joint = match regime {
                KnowledgeRegime::AllPrivate => best_response_dynamics(game, start, 4 * game.profile_count())?,
                KnowledgeRegime::Leader(n) => stackelberg_finite(game, n)?.profile,
                KnowledgeRegime::AllComplete => max_weighted_profile(game, &weights)?,
            };
            Ok(KnowledgeOutcome {
                utilities: game.utilities(&joint).to_vec(),
                profile: Some(joint),
                allocation: None,
                converged: true,
            })
        }
        (KnowledgeScenario::Power(sc), KnowledgeRegime::AllPrivate) => {
            let iw = iterative_water_filling(sc, opts.solver.iw)?;
            Ok(KnowledgeOutcome {
                utilities: iw.rates,
                profile: None,
                allocation: Some(iw.allocation),
                converged: iw.converged,
            })
        }
        (KnowledgeScenario::Power(sc), KnowledgeRegime::Leader(n)) => {
            let st = stackelberg_leader_search(sc, n, &opts.solver)?;
            Ok(KnowledgeOutcome {
                allocation: Some(st.allocation()),
                utilities: st.rates,
                profile: None,
                converged: st.nash_converged,
            })
        }
        (KnowledgeScenario::Power(sc), KnowledgeRegime::AllComplete) => {
            let opt = weighted_sum_optimize(sc, &weights, &opts.solver)?;
            Ok(KnowledgeOutcome {
                utilities: opt.sample.rates,
                profile: None,
                allocation: Some(opt.allocation),
                converged: true,
            })
        }
    }
}

/// Parameters of a random-channel ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub realizations: usize,
    pub seed: u64,
    pub bin_count: usize,
    pub total_band: f64,
    pub budgets: Vec<f64>,
    pub noise_level: f64,
    pub tap_count: usize,
    pub direct_power: f64,
    pub cross_power: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            realizations: 100,
            seed: 0,
            bin_count: 8,
            total_band: 8.0,
            budgets: vec![8.0, 8.0],
            noise_level: 0.1,
            tap_count: 4,
            direct_power: 1.0,
            cross_power: 0.5,
        }
    }
}

impl EnsembleConfig {
    pub fn grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::new(self.bin_count, self.total_band)
    }

    /// Channel-generator seed of realization `index` on its `attempt`-th draw.
    pub fn realization_seed(&self, index: usize, attempt: usize) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng.set_word_pos(2 * attempt as u128);
        rng.random()
    }

    /// Power scenario of one channel draw.
    pub fn scenario(&self, channel_seed: u64) -> Result<PowerScenario> {
        let grid = self.grid()?;
        let channels =
            generate_multipath_channels(channel_seed, 2, &grid, self.tap_count, self.direct_power, self.cross_power)?;
        PowerScenario::new(
            grid,
            channels,
            NoiseProfile::uniform(2, self.bin_count, self.noise_level)?,
            PowerBudget::new(self.budgets.clone())?,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleRealization {
    pub index: usize,
    pub channel_seed: u64,
    /// Draws discarded because IW did not converge.
    pub skipped: usize,
    pub nash_rates: Vec<f64>,
    pub stackelberg_rates: Vec<f64>,
    /// `R'_n / R_n^nash` per user.
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// `counts.len() + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

pub const HISTOGRAM_BINS: usize = 20;

impl Histogram {
    /// Uniform bins over `[min, max]` of the data; the last bin is closed.
    pub fn uniform(values: &[f64], bins: usize) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
        let mut counts = vec![0; bins];
        for v in values {
            let i = if width > 0.0 { (((v - lo) / width) as usize).min(bins - 1) } else { 0 };
            counts[i] += 1;
        }
        Histogram { edges, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub realizations: Vec<EnsembleRealization>,
    pub skipped: usize,
    pub mean_ratios: Vec<f64>,
    pub histograms: Vec<Histogram>,
}

impl EnsembleReport {
    pub fn ratios(&self, user: usize) -> Vec<f64> {
        self.realizations.iter().map(|r| r.ratios[user]).collect()
    }
}

/// Draws `realizations` two-user channels, keeps those on which IW converges
/// (redrawing the rest), and compares the leader-search outcome with user 1
/// leading against the IW equilibrium.
pub fn channel_ensemble_study(cfg: &EnsembleConfig, opts: &SolverOptions) -> Result<EnsembleReport> {
    if cfg.realizations == 0 {
        return Err(invalid("ensemble needs at least one realization"));
    }
    if cfg.budgets.len() != 2 {
        return Err(dim("ensemble scenarios have two users"));
    }
    let m = cfg.realizations;
    let results = opts.execution.map_range(m, |index| -> Result<EnsembleRealization> {
        // Beyond m redraws the whole study is unstable anyway.
        for attempt in 0..=m {
            let channel_seed = cfg.realization_seed(index, attempt);
            let sc = cfg.scenario(channel_seed)?;
            let st = stackelberg_leader_search(&sc, 0, opts)?;
            if !st.nash_converged || st.nash_rates.iter().any(|r| *r <= 0.0) {
                continue;
            }
            let ratios = st.rates.iter().zip(&st.nash_rates).map(|(s, n)| s / n).collect();
            return Ok(EnsembleRealization {
                index,
                channel_seed,
                skipped: attempt,
                nash_rates: st.nash_rates,
                stackelberg_rates: st.rates,
                ratios,
            });
        }
        Err(Error::EnsembleUnstable { skipped: m + 1, attempted: m })
    });
    let mut realizations = Vec::with_capacity(m);
    let mut skipped = 0;
    for r in results {
        match r {
            Ok(r) => {
                skipped += r.skipped;
                realizations.push(r);
            }
            Err(Error::EnsembleUnstable { skipped: s, .. }) => skipped += s,
            Err(e) => return Err(e),
        }
    }
    if skipped > m {
        return Err(Error::EnsembleUnstable { skipped, attempted: m + skipped });
    }
    let mean_ratios = (0..2).map(|n| realizations.iter().map(|r| r.ratios[n]).sum::<f64>() / m as f64).collect();
    let histograms = (0..2)
        .map(|n| Histogram::uniform(&realizations.iter().map(|r| r.ratios[n]).collect::<Vec<_>>(), HISTOGRAM_BINS))
        .collect();
    Ok(EnsembleReport { realizations, skipped, mean_ratios, histograms })
}

/// IW and Stackelberg samples over `budget_pairs` followed by Pareto samples
/// over `weights`, as one table.
pub fn region_comparison(
    sc: &PowerScenario,
    budget_pairs: &[Vec<f64>],
    weights: &[Vec<f64>],
    opts: &SolverOptions,
) -> Result<Vec<RegionSample>> {
    if sc.user_count() != 2 {
        return Err(dim("region comparison needs two users"));
    }
    let mut out = rate_region_sweep(RegionMethod::Iw, sc, budget_pairs, opts)?;
    out.extend(rate_region_sweep(RegionMethod::Stackelberg, sc, budget_pairs, opts)?);
    out.extend(rate_region_sweep(RegionMethod::Pareto, sc, weights, opts)?);
    Ok(out)
}
