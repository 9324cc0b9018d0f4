use serde::Serialize;

use super::game::NormalFormGame;
use crate::error::{invalid, Error, Result};

/// Payoff differences at or below this are treated as ties.
pub const TIE_TOL: f64 = 1e-12;

/// All maximizers of `player`'s payoff against the other entries of `profile`
/// (the player's own entry is ignored), in ascending action order.
pub fn best_response(game: &NormalFormGame, player: usize, profile: &[usize]) -> Vec<usize> {
    let values: Vec<f64> = (0..game.action_count(player)).map(|a| game.deviation_payoff(profile, player, a)).collect();
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..values.len()).filter(|a| values[*a] >= best - TIE_TOL).collect()
}

/// The action strictly better than every alternative against every opponent profile.
pub fn strictly_dominant_action(game: &NormalFormGame, player: usize) -> Option<usize> {
    let actions = game.action_count(player);
    (0..actions).find(|&a| {
        game.profiles().filter(|p| p[player] == a).all(|p| {
            let own = game.payoff(&p, player);
            (0..actions).filter(|b| *b != a).all(|b| own > game.deviation_payoff(&p, player, b) + TIE_TOL)
        })
    })
}

/// Every profile where each player already plays a best response.
pub fn pure_nash(game: &NormalFormGame) -> Vec<Vec<usize>> {
    game.profiles().filter(|p| (0..game.player_count()).all(|n| best_response(game, n, p).contains(&p[n]))).collect()
}

/// Independent per-player distributions over own actions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedStrategy(pub Vec<Vec<f64>>);

impl MixedStrategy {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        for (n, p) in probs.iter().enumerate() {
            if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(invalid(format!("player {n} has a negative or non-finite probability")));
            }
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(invalid(format!("player {n}'s probabilities sum to {total}")));
            }
        }
        Ok(MixedStrategy(probs))
    }

    pub fn player(&self, n: usize) -> &[f64] {
        &self.0[n]
    }

    /// Expected payoff of every player.
    pub fn expected_utilities(&self, game: &NormalFormGame) -> Vec<f64> {
        let mut out = vec![0.0; game.player_count()];
        for (idx, p) in game.profiles().enumerate() {
            let weight: f64 = p.iter().enumerate().map(|(n, a)| self.0[n][*a]).product();
            for (o, u) in out.iter_mut().zip(game.utilities_at(idx)) {
                *o += weight * u;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedNash {
    pub strategy: MixedStrategy,
    pub values: Vec<f64>,
}

/// Interior mixed equilibrium of a 2×2 game from the two indifference conditions.
///
/// Each player's mix makes the *other* player indifferent. Games with no
/// interior solution (dominance, degenerate payoffs) yield [`Error::Degenerate`].
pub fn mixed_nash_2x2(game: &NormalFormGame) -> Result<MixedNash> {
    if game.action_counts() != [2, 2] {
        return Err(invalid("mixed_nash_2x2 needs two players with two actions each"));
    }
    let u = |n: usize, a: usize, b: usize| game.payoff(&[a, b], n);
    // p = P(player 0 plays action 0) makes player 1 indifferent between its columns.
    let den_p = (u(1, 0, 0) - u(1, 1, 0)) - (u(1, 0, 1) - u(1, 1, 1));
    // q = P(player 1 plays action 0) makes player 0 indifferent between its rows.
    let den_q = (u(0, 0, 0) - u(0, 0, 1)) - (u(0, 1, 0) - u(0, 1, 1));
    if den_p.abs() <= TIE_TOL || den_q.abs() <= TIE_TOL {
        return Err(Error::Degenerate("indifference system is singular".into()));
    }
    let p = (u(1, 1, 1) - u(1, 1, 0)) / den_p;
    let q = (u(0, 1, 1) - u(0, 0, 1)) / den_q;
    let interior = |x: f64| x > 0.0 && x < 1.0;
    if !(interior(p) && interior(q)) {
        return Err(Error::Degenerate(format!("indifference solution (p = {p}, q = {q}) is not interior")));
    }
    let strategy = MixedStrategy(vec![vec![p, 1.0 - p], vec![q, 1.0 - q]]);
    let values = strategy.expected_utilities(game);
    Ok(MixedNash { strategy, values })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteStackelberg {
    pub leader: usize,
    pub profile: Vec<usize>,
    pub utilities: Vec<f64>,
}

/// Leader commits to the action maximizing its payoff given the follower's
/// best response. Follower ties are broken in the leader's favour; leader
/// ties keep the lowest action index.
pub fn stackelberg_finite(game: &NormalFormGame, leader: usize) -> Result<FiniteStackelberg> {
    if game.player_count() != 2 || leader > 1 {
        return Err(invalid("finite Stackelberg analysis needs two players and leader 0 or 1"));
    }
    let follower = 1 - leader;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for a in 0..game.action_count(leader) {
        let mut probe = vec![0; 2];
        probe[leader] = a;
        let response = best_response(game, follower, &probe)
            .into_iter()
            .map(|b| {
                let mut p = probe.clone();
                p[follower] = b;
                p
            })
            .fold(None::<Vec<usize>>, |acc, p| match acc {
                Some(q) if game.payoff(&q, leader) >= game.payoff(&p, leader) => Some(q),
                _ => Some(p),
            })
            .expect("best response set is never empty");
        let value = game.payoff(&response, leader);
        if best.as_ref().is_none_or(|(v, _)| value > *v + TIE_TOL) {
            best = Some((value, response));
        }
    }
    let (_, profile) = best.expect("leader has at least one action");
    let utilities = game.utilities(&profile).to_vec();
    Ok(FiniteStackelberg { leader, profile, utilities })
}

/// Round-robin best-response dynamics from `start`: each player in turn
/// switches to its lowest-index best response if its current action is not
/// one. Stops at a pure equilibrium or after `max_steps` single-player moves.
pub fn best_response_dynamics(game: &NormalFormGame, start: &[usize], max_steps: usize) -> Result<Vec<usize>> {
    if start.len() != game.player_count() || start.iter().enumerate().any(|(n, a)| *a >= game.action_count(n)) {
        return Err(invalid(format!("start profile {start:?} does not fit the game")));
    }
    let mut profile = start.to_vec();
    let players = game.player_count();
    let mut stable = 0;
    let mut steps = 0;
    let mut n = 0;
    while stable < players {
        let br = best_response(game, n, &profile);
        if br.contains(&profile[n]) {
            stable += 1;
        } else {
            if steps == max_steps {
                return Err(Error::NoPureNashReached { steps });
            }
            profile[n] = br[0];
            steps += 1;
            stable = 1;
        }
        n = (n + 1) % players;
    }
    Ok(profile)
}

/// Profile maximizing `Σ w_n u_n`; ties keep the lowest profile index.
pub fn max_weighted_profile(game: &NormalFormGame, weights: &[f64]) -> Result<Vec<usize>> {
    if weights.len() != game.player_count() {
        return Err(invalid("one weight per player required"));
    }
    let mut best: Option<(f64, usize)> = None;
    for idx in 0..game.profile_count() {
        let v: f64 = weights.iter().zip(game.utilities_at(idx)).map(|(w, u)| w * u).sum();
        if best.is_none_or(|(b, _)| v > b + TIE_TOL) {
            best = Some((v, idx));
        }
    }
    Ok(game.profile_at(best.expect("games have at least one profile").1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::game::{build_contention_game, two_channel_game, AGGRESS, BACKOFF, CONCENTRATE, SPREAD};

    fn constant_game() -> NormalFormGame {
        let names = vec![vec!["a".into(), "b".into(), "c".into()], vec!["x".into(), "y".into()]];
        NormalFormGame::from_fn(names, |_| vec![1.0, 1.0]).unwrap()
    }

    fn matching_pennies() -> NormalFormGame {
        let names = vec![vec!["H".into(), "T".into()]; 2];
        NormalFormGame::from_fn(names, |p| if p[0] == p[1] { vec![1.0, -1.0] } else { vec![-1.0, 1.0] }).unwrap()
    }

    #[test]
    fn contention_best_responses() {
        let g = build_contention_game();
        assert_eq!(best_response(&g, 1, &[AGGRESS, 0]), vec![BACKOFF]);
        assert_eq!(best_response(&g, 1, &[BACKOFF, 0]), vec![AGGRESS]);
        assert_eq!(best_response(&g, 0, &[0, AGGRESS]), vec![BACKOFF]);
    }

    #[test]
    fn constant_game_ties_everything() {
        let g = constant_game();
        assert_eq!(best_response(&g, 0, &[0, 1]), vec![0, 1, 2]);
        assert_eq!(pure_nash(&g).len(), 6);
    }

    #[test]
    fn dominance() {
        assert_eq!(strictly_dominant_action(&two_channel_game(), 0), Some(SPREAD));
        let g = build_contention_game();
        assert_eq!(strictly_dominant_action(&g, 0), None);
        assert_eq!(strictly_dominant_action(&g, 1), None);
        let names = vec![vec!["only".into()], vec!["x".into(), "y".into()]];
        let single = NormalFormGame::from_fn(names, |p| vec![0.0, p[1] as f64]).unwrap();
        assert_eq!(strictly_dominant_action(&single, 0), Some(0));
    }

    #[test]
    fn pure_equilibria() {
        let g = two_channel_game();
        let ne = pure_nash(&g);
        assert_eq!(ne, vec![vec![SPREAD, SPREAD]]);
        let u = g.utilities(&ne[0]);
        assert!((u[0] - 2.83).abs() < 0.005 && (u[1] - 2.42).abs() < 0.005);
        assert_eq!(pure_nash(&build_contention_game()), vec![vec![AGGRESS, BACKOFF], vec![BACKOFF, AGGRESS]]);
    }

    #[test]
    fn decoupled_pure_nash_is_product_of_dominant_actions() {
        use crate::continuous::PowerScenario;
        use crate::matrix::game::build_power_game_2x2;
        use crate::spectrum::two_channel_example;
        let (ch, noise, budgets, grid) = two_channel_example();
        let sc = PowerScenario::new(grid, ch.decoupled(), noise, budgets).unwrap();
        let g = build_power_game_2x2(&sc, [0, 1]).unwrap();
        let d0 = strictly_dominant_action(&g, 0).unwrap();
        let d1 = strictly_dominant_action(&g, 1).unwrap();
        assert_eq!(pure_nash(&g), vec![vec![d0, d1]]);
        let st = stackelberg_finite(&g, 0).unwrap();
        assert_eq!(st.profile, vec![d0, d1]);
    }

    #[test]
    fn contention_mixed_equilibrium() {
        let m = mixed_nash_2x2(&build_contention_game()).unwrap();
        for n in 0..2 {
            assert!((m.strategy.player(n)[AGGRESS] - 1.0 / 3.0).abs() < 1e-12);
            assert!((m.values[n] - 14.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_equilibrium_makes_players_indifferent() {
        for g in [build_contention_game(), matching_pennies()] {
            let m = mixed_nash_2x2(&g).unwrap();
            for n in 0..2 {
                let other = 1 - n;
                let mix = m.strategy.player(other);
                let value = |a: usize| -> f64 {
                    (0..2)
                        .map(|b| {
                            let mut p = vec![0; 2];
                            p[n] = a;
                            p[other] = b;
                            mix[b] * g.payoff(&p, n)
                        })
                        .sum()
                };
                assert!((value(0) - value(1)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn matching_pennies_mixes_evenly() {
        let m = mixed_nash_2x2(&matching_pennies()).unwrap();
        assert_eq!(m.strategy.0, vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert!(m.values.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn dominance_precludes_interior_mix() {
        assert!(matches!(mixed_nash_2x2(&two_channel_game()), Err(Error::Degenerate(_))));
        assert!(mixed_nash_2x2(&constant_game()).is_err());
    }

    #[test]
    fn finite_stackelberg() {
        let st = stackelberg_finite(&two_channel_game(), 0).unwrap();
        assert_eq!(st.profile, vec![CONCENTRATE, CONCENTRATE]);
        assert!((st.utilities[0] - 3.46).abs() < 0.005 && (st.utilities[1] - 3.46).abs() < 0.005);
        let st = stackelberg_finite(&build_contention_game(), 0).unwrap();
        assert_eq!(st.profile, vec![AGGRESS, BACKOFF]);
        assert_eq!(st.utilities, vec![7.0, 2.0]);
    }

    #[test]
    fn stackelberg_leader_weakly_beats_every_nash() {
        for g in [two_channel_game(), build_contention_game()] {
            for leader in 0..2 {
                let st = stackelberg_finite(&g, leader).unwrap();
                for ne in pure_nash(&g) {
                    assert!(st.utilities[leader] >= g.payoff(&ne, leader) - 1e-12);
                }
            }
        }
    }

    #[test]
    fn dynamics_reach_equilibrium_or_report_cycle() {
        let g = two_channel_game();
        assert_eq!(best_response_dynamics(&g, &[CONCENTRATE, CONCENTRATE], 16).unwrap(), vec![SPREAD, SPREAD]);
        let mp = matching_pennies();
        assert_eq!(best_response_dynamics(&mp, &[0, 0], 16), Err(Error::NoPureNashReached { steps: 16 }));
    }

    #[test]
    fn max_sum_profile_of_contention_game() {
        assert_eq!(max_weighted_profile(&build_contention_game(), &[1.0, 1.0]).unwrap(), vec![BACKOFF, BACKOFF]);
    }
}
