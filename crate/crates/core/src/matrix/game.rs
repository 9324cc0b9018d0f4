use serde::Serialize;

use crate::continuous::{grid_rows, GridFill, PowerScenario};
use crate::error::{dim, invalid, Error, Result};
use crate::spectrum::{achievable_rates, two_channel_example, PowerAllocation};

/// Finite game with a fully populated payoff tensor.
///
/// Joint profiles are indexed in mixed radix with player 0 as the most
/// significant digit, so a 2×2 game enumerates `(0,0), (0,1), (1,0), (1,1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalFormGame {
    action_names: Vec<Vec<String>>,
    /// `payoffs[profile * N + player]`
    payoffs: Vec<f64>,
}

impl NormalFormGame {
    /// Builds the tensor by calling `utility(profile)` for every joint profile.
    pub fn from_fn(action_names: Vec<Vec<String>>, mut utility: impl FnMut(&[usize]) -> Vec<f64>) -> Result<Self> {
        if action_names.is_empty() {
            return Err(invalid("a game needs at least one player"));
        }
        if let Some(p) = action_names.iter().position(Vec::is_empty) {
            return Err(invalid(format!("player {p} has no actions")));
        }
        let players = action_names.len();
        let counts: Vec<usize> = action_names.iter().map(Vec::len).collect();
        let total: usize = counts.iter().product();
        let mut payoffs = Vec::with_capacity(total * players);
        let mut profile = vec![0; players];
        for idx in 0..total {
            decode(idx, &counts, &mut profile);
            let u = utility(&profile);
            if u.len() != players {
                return Err(dim(format!("profile {profile:?} has {} utilities for {players} players", u.len())));
            }
            if let Some(bad) = u.iter().find(|v| !v.is_finite()) {
                return Err(invalid(format!("payoff at {profile:?} is not finite: {bad}")));
            }
            payoffs.extend(u);
        }
        Ok(NormalFormGame { action_names, payoffs })
    }

    /// Builds from explicit `(profile, utilities)` entries; every profile must appear exactly once.
    pub fn from_table(action_names: Vec<Vec<String>>, entries: &[(Vec<usize>, Vec<f64>)]) -> Result<Self> {
        let counts: Vec<usize> = action_names.iter().map(Vec::len).collect();
        let total: usize = counts.iter().product();
        let mut slots: Vec<Option<&Vec<f64>>> = vec![None; total];
        for (profile, u) in entries {
            if profile.len() != counts.len() || profile.iter().zip(&counts).any(|(a, c)| a >= c) {
                return Err(dim(format!("profile {profile:?} does not fit action counts {counts:?}")));
            }
            let idx = encode(profile, &counts);
            if slots[idx].replace(u).is_some() {
                return Err(invalid(format!("profile {profile:?} listed twice")));
            }
        }
        if let Some(missing) = slots.iter().position(Option::is_none) {
            let mut p = vec![0; counts.len()];
            decode(missing, &counts, &mut p);
            return Err(invalid(format!("payoff table misses profile {p:?}")));
        }
        Self::from_fn(action_names, |p| slots[encode(p, &counts)].unwrap().clone())
    }

    pub fn player_count(&self) -> usize {
        self.action_names.len()
    }

    pub fn action_count(&self, player: usize) -> usize {
        self.action_names[player].len()
    }

    pub fn action_counts(&self) -> Vec<usize> {
        self.action_names.iter().map(Vec::len).collect()
    }

    pub fn action_names(&self) -> &[Vec<String>] {
        &self.action_names
    }

    pub fn action_name(&self, player: usize, action: usize) -> &str {
        &self.action_names[player][action]
    }

    pub fn profile_count(&self) -> usize {
        self.payoffs.len() / self.player_count()
    }

    pub fn profile_index(&self, profile: &[usize]) -> usize {
        encode(profile, &self.action_counts())
    }

    pub fn profile_at(&self, index: usize) -> Vec<usize> {
        let mut p = vec![0; self.player_count()];
        decode(index, &self.action_counts(), &mut p);
        p
    }

    pub fn profiles(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.profile_count()).map(|i| self.profile_at(i))
    }

    pub fn utilities(&self, profile: &[usize]) -> &[f64] {
        self.utilities_at(self.profile_index(profile))
    }

    pub fn utilities_at(&self, index: usize) -> &[f64] {
        let n = self.player_count();
        &self.payoffs[index * n..(index + 1) * n]
    }

    pub fn payoff(&self, profile: &[usize], player: usize) -> f64 {
        self.utilities(profile)[player]
    }

    /// Payoff to `player` when it deviates to `action` and everyone else keeps `profile`.
    pub fn deviation_payoff(&self, profile: &[usize], player: usize, action: usize) -> f64 {
        let mut p = profile.to_vec();
        p[player] = action;
        self.payoff(&p, player)
    }

    /// Smallest and largest payoff over all players and profiles.
    pub fn payoff_range(&self) -> (f64, f64) {
        self.payoffs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
    }

    pub fn profile_label(&self, profile: &[usize]) -> String {
        let names: Vec<&str> = profile.iter().enumerate().map(|(n, a)| self.action_name(n, *a)).collect();
        format!("({})", names.join(","))
    }
}

fn encode(profile: &[usize], counts: &[usize]) -> usize {
    profile.iter().zip(counts).fold(0, |acc, (a, c)| acc * c + a)
}

fn decode(mut index: usize, counts: &[usize], out: &mut [usize]) {
    for (slot, c) in out.iter_mut().zip(counts).rev() {
        *slot = index % c;
        index /= c;
    }
}

pub const CONCENTRATE: usize = 0;
pub const SPREAD: usize = 1;

/// Two-action power game: each user either puts its whole budget into its
/// own bin (`Concentrate`) or splits it evenly over all bins (`Spread`).
/// Payoffs are achievable rates computed from the scenario.
pub fn build_power_game_2x2(sc: &PowerScenario, concentrate_bins: [usize; 2]) -> Result<NormalFormGame> {
    if sc.user_count() != 2 {
        return Err(invalid("the Concentrate/Spread game has two users"));
    }
    let k = sc.bin_count();
    if concentrate_bins.iter().any(|b| *b >= k) {
        return Err(dim(format!("concentrate bins {concentrate_bins:?} outside {k} bins")));
    }
    let df = sc.grid.bin_width();
    let row = |user: usize, action: usize| -> Vec<f64> {
        let budget_psd = sc.budgets.get(user) / df;
        if action == CONCENTRATE {
            let mut r = vec![0.0; k];
            r[concentrate_bins[user]] = budget_psd;
            r
        } else {
            vec![budget_psd / k as f64; k]
        }
    };
    let names = vec![vec!["Concentrate".to_string(), "Spread".to_string()]; 2];
    let mut failure = None;
    let game = NormalFormGame::from_fn(names, |p| {
        let alloc = PowerAllocation::from_rows(&[row(0, p[0]), row(1, p[1])]).expect("rows are valid");
        match achievable_rates(&alloc, &sc.channels, &sc.noise, &sc.grid) {
            Ok(r) => r,
            Err(e) => {
                failure = Some(e);
                vec![0.0, 0.0]
            }
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(game),
    }
}

/// The two-channel Concentrate/Spread example with user 1 concentrating in
/// bin 0 and user 2 in bin 1.
pub fn two_channel_game() -> NormalFormGame {
    let (ch, noise, budgets, grid) = two_channel_example();
    let sc = PowerScenario::new(grid, ch, noise, budgets).expect("static scenario");
    build_power_game_2x2(&sc, [0, 1]).expect("static scenario")
}

pub const AGGRESS: usize = 0;
pub const BACKOFF: usize = 1;

/// Two users contending for a shared medium: Aggress or Backoff.
pub fn build_contention_game() -> NormalFormGame {
    let names = vec![vec!["Aggress".to_string(), "Backoff".to_string()]; 2];
    NormalFormGame::from_fn(names, |p| match (p[0], p[1]) {
        (AGGRESS, AGGRESS) => vec![0.0, 0.0],
        (AGGRESS, BACKOFF) => vec![7.0, 2.0],
        (BACKOFF, AGGRESS) => vec![2.0, 7.0],
        _ => vec![6.0, 6.0],
    })
    .expect("static game")
}

/// Largest joint profile count [`build_power_game_grid`] will tabulate.
pub const MAX_GRID_PROFILES: u128 = 1_000_000;

/// Finite power game whose actions are each user's `levels`-step simplex
/// allocations of its budget. Action names list the level counts per bin,
/// e.g. `"6/4"`. Fails with `OracleScaleExceeded` past [`MAX_GRID_PROFILES`].
pub fn build_power_game_grid(sc: &PowerScenario, levels: usize, fill: GridFill) -> Result<NormalFormGame> {
    if levels == 0 {
        return Err(invalid("need at least one power level"));
    }
    let df = sc.grid.bin_width();
    let rows: Vec<Vec<Vec<f64>>> =
        (0..sc.user_count()).map(|n| grid_rows(sc.budgets.get(n), &sc.grid, levels, fill)).collect();
    let profiles = rows.iter().fold(1u128, |acc, r| acc.saturating_mul(r.len() as u128));
    if profiles > MAX_GRID_PROFILES {
        return Err(Error::OracleScaleExceeded { evaluations: profiles, cap: MAX_GRID_PROFILES });
    }
    let names: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(n, user_rows)| {
            let unit = sc.budgets.get(n) / (levels as f64 * df);
            user_rows
                .iter()
                .map(|r| r.iter().map(|p| format!("{}", (p / unit).round() as usize)).collect::<Vec<_>>().join("/"))
                .collect()
        })
        .collect();
    let mut alloc = PowerAllocation::zeros(sc.user_count(), sc.bin_count());
    NormalFormGame::from_fn(names, |p| {
        for (n, a) in p.iter().enumerate() {
            alloc.set_row(n, &rows[n][*a]).expect("grid rows are valid");
        }
        sc.rates(&alloc).expect("scenario validated")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{ChannelSet, FrequencyGrid, NoiseProfile, PowerBudget};

    #[test]
    fn two_channel_payoffs_match_published_matrix() {
        let g = two_channel_game();
        let cells = [
            ([CONCENTRATE, SPREAD], [2.12, 3.22]),
            ([CONCENTRATE, CONCENTRATE], [3.46, 3.46]),
            ([SPREAD, SPREAD], [2.83, 2.42]),
            ([SPREAD, CONCENTRATE], [3.59, 2.12]),
        ];
        for (profile, want) in cells {
            let got = g.utilities(&profile);
            for n in 0..2 {
                assert!((got[n] - want[n]).abs() <= 0.01, "{profile:?}: {got:?}");
            }
        }
    }

    #[test]
    fn decoupled_power_game_ignores_opponent() {
        let (ch, noise, budgets, grid) = two_channel_example();
        let sc = PowerScenario::new(grid, ch.decoupled(), noise, budgets).unwrap();
        let g = build_power_game_2x2(&sc, [0, 1]).unwrap();
        for a in 0..2 {
            assert_eq!(g.payoff(&[a, 0], 0), g.payoff(&[a, 1], 0));
            assert_eq!(g.payoff(&[0, a], 1), g.payoff(&[1, a], 1));
        }
    }

    #[test]
    fn symmetric_cross_gains_give_swap_symmetry() {
        let sc = PowerScenario::new(
            FrequencyGrid::unit(2).unwrap(),
            ChannelSet::flat(&[1.0, 1.0], 0.4, 2).unwrap(),
            NoiseProfile::uniform(2, 2, 1.0).unwrap(),
            PowerBudget::new(vec![10.0, 10.0]).unwrap(),
        )
        .unwrap();
        let g = build_power_game_2x2(&sc, [0, 1]).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert!((g.payoff(&[a, b], 0) - g.payoff(&[b, a], 1)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn contention_cells_and_symmetry() {
        let g = build_contention_game();
        assert_eq!(g.utilities(&[AGGRESS, BACKOFF]), &[7.0, 2.0]);
        assert_eq!(g.utilities(&[BACKOFF, BACKOFF]), &[6.0, 6.0]);
        for a in 0..2 {
            for b in 0..2 {
                assert_eq!(g.payoff(&[a, b], 0), g.payoff(&[b, a], 1));
            }
        }
        assert_eq!(g.profile_label(&[0, 1]), "(Aggress,Backoff)");
    }

    #[test]
    fn profile_indexing_round_trips() {
        let names = vec![vec!["a".into(), "b".into()], vec!["x".into(), "y".into(), "z".into()]];
        let g = NormalFormGame::from_fn(names, |p| vec![p[0] as f64, p[1] as f64]).unwrap();
        for i in 0..g.profile_count() {
            assert_eq!(g.profile_index(&g.profile_at(i)), i);
        }
        assert_eq!(g.profile_at(1), vec![0, 1]);
        assert_eq!(g.profile_at(3), vec![1, 0]);
    }

    #[test]
    fn table_must_be_complete() {
        let names = vec![vec!["a".into(), "b".into()]; 2];
        let entries = vec![(vec![0, 0], vec![1.0, 1.0]), (vec![0, 1], vec![0.0, 0.0])];
        assert!(NormalFormGame::from_table(names.clone(), &entries).is_err());
        let dup = vec![(vec![0, 0], vec![1.0, 1.0]), (vec![0, 0], vec![0.0, 0.0])];
        assert!(NormalFormGame::from_table(names, &dup).is_err());
    }

    #[test]
    fn grid_game_actions_cover_full_budget_splits() {
        let (ch, noise, budgets, grid) = two_channel_example();
        let sc = PowerScenario::new(grid, ch, noise, budgets).unwrap();
        let g = build_power_game_grid(&sc, 10, GridFill::Exact).unwrap();
        assert_eq!(g.action_counts(), vec![11, 11]);
        assert_eq!(g.action_name(0, 10), "10/0");
        // "10/0" vs "0/10" is Concentrate/Concentrate
        assert!((g.payoff(&[10, 0], 0) - 11f64.log2()).abs() < 1e-12);
    }
}
