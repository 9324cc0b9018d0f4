use serde::Serialize;

use super::equilibrium::MixedStrategy;
use super::game::NormalFormGame;
use super::lp::{maximize, Constraint, LinearProgram, LpOutcome, Relation};
use crate::error::{dim, invalid, Error, Result};

/// Largest joint-profile count [`optimize_ce`] accepts.
pub const CE_LP_MAX_PROFILES: usize = 64;

/// Probability mass over joint profiles, indexed like the game's payoff tensor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointDistribution(Vec<f64>);

impl JointDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid("distribution must be non-empty"));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid("probabilities must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("probabilities sum to {total}")));
        }
        Ok(JointDistribution(probs))
    }

    pub fn point_mass(game: &NormalFormGame, profile: &[usize]) -> Self {
        let mut probs = vec![0.0; game.profile_count()];
        probs[game.profile_index(profile)] = 1.0;
        JointDistribution(probs)
    }

    /// Uniform over the listed profiles.
    pub fn uniform_over(game: &NormalFormGame, profiles: &[Vec<usize>]) -> Result<Self> {
        if profiles.is_empty() {
            return Err(invalid("need at least one profile"));
        }
        let mut probs = vec![0.0; game.profile_count()];
        let w = 1.0 / profiles.len() as f64;
        for p in profiles {
            probs[game.profile_index(p)] += w;
        }
        Self::new(probs)
    }

    /// Product distribution of independent mixed strategies.
    pub fn product(game: &NormalFormGame, mixed: &MixedStrategy) -> Self {
        let probs = game.profiles().map(|p| p.iter().enumerate().map(|(n, a)| mixed.player(n)[*a]).product()).collect();
        JointDistribution(probs)
    }

    /// Convex combination `Σ λ_i μ_i`.
    pub fn mixture(parts: &[(f64, &JointDistribution)]) -> Result<Self> {
        let len = parts.first().map_or(0, |(_, d)| d.0.len());
        if parts.iter().any(|(_, d)| d.0.len() != len) {
            return Err(dim("mixture components disagree on profile count"));
        }
        let mut probs = vec![0.0; len];
        for (w, d) in parts {
            for (p, q) in probs.iter_mut().zip(&d.0) {
                *p += w * q;
            }
        }
        Self::new(probs)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn expected_utilities(&self, game: &NormalFormGame) -> Vec<f64> {
        let mut out = vec![0.0; game.player_count()];
        for (idx, mu) in self.0.iter().enumerate() {
            if *mu > 0.0 {
                for (o, u) in out.iter_mut().zip(game.utilities_at(idx)) {
                    *o += mu * u;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CeCheck {
    pub is_ce: bool,
    /// Largest expected gain from disobeying any recommendation (≥ 0).
    pub max_violation: f64,
}

/// Obedience gains `Σ_{a_-n} μ(a_n, a_-n)·(u_n(a'_n, a_-n) − u_n(a_n, a_-n))`
/// for every `(player, recommended, deviation)` triple.
fn obedience_gains(game: &NormalFormGame) -> Vec<(usize, usize, usize, Vec<f64>)> {
    let mut out = Vec::new();
    for n in 0..game.player_count() {
        for rec in 0..game.action_count(n) {
            for dev in (0..game.action_count(n)).filter(|d| *d != rec) {
                let coef = game
                    .profiles()
                    .map(|p| if p[n] == rec { game.deviation_payoff(&p, n, dev) - game.payoff(&p, n) } else { 0.0 })
                    .collect();
                out.push((n, rec, dev, coef));
            }
        }
    }
    out
}

/// Checks the correlated-equilibrium obedience constraints with slack `tol`.
pub fn is_correlated_equilibrium(game: &NormalFormGame, dist: &JointDistribution, tol: f64) -> Result<CeCheck> {
    if dist.0.len() != game.profile_count() {
        return Err(dim(format!(
            "distribution has {} entries, game has {} profiles",
            dist.0.len(),
            game.profile_count()
        )));
    }
    let max_violation = obedience_gains(game)
        .into_iter()
        .map(|(_, _, _, coef)| coef.iter().zip(&dist.0).map(|(c, m)| c * m).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(CeCheck { is_ce: max_violation <= tol, max_violation })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CeOptimum {
    pub distribution: JointDistribution,
    pub value: f64,
}

/// Maximizes `Σ_n w_n E_μ[u_n]` over the correlated-equilibrium polytope.
pub fn optimize_ce(game: &NormalFormGame, weights: &[f64]) -> Result<CeOptimum> {
    if weights.len() != game.player_count() {
        return Err(dim(format!("{} weights for {} players", weights.len(), game.player_count())));
    }
    let profiles = game.profile_count();
    if profiles > CE_LP_MAX_PROFILES {
        return Err(invalid(format!("CE program limited to {CE_LP_MAX_PROFILES} joint profiles, game has {profiles}")));
    }
    let objective: Vec<f64> =
        (0..profiles).map(|i| weights.iter().zip(game.utilities_at(i)).map(|(w, u)| w * u).sum()).collect();
    let mut constraints: Vec<Constraint> = obedience_gains(game)
        .into_iter()
        .map(|(_, _, _, coefficients)| Constraint { coefficients, relation: Relation::Le, rhs: 0.0 })
        .collect();
    constraints.push(Constraint { coefficients: vec![1.0; profiles], relation: Relation::Eq, rhs: 1.0 });
    let lp = LinearProgram { objective: objective.clone(), constraints };
    match maximize(&lp) {
        LpOutcome::Optimal { x, .. } => {
            let mut probs: Vec<f64> = x.into_iter().map(|p| if p < 1e-13 { 0.0 } else { p }).collect();
            let total: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= total);
            let value = probs.iter().zip(&objective).map(|(p, o)| p * o).sum();
            Ok(CeOptimum { distribution: JointDistribution::new(probs)?, value })
        }
        other => Err(Error::LinearProgram(format!("correlated-equilibrium program returned {other:?}"))),
    }
}
