//! Repeated play of a finite game by adaptive learners.
//!
//! Every round each learner picks an action from its own state, the joint
//! profile is scored on the game, each learner receives an observation
//! (the full joint action or only its own payoff) and updates its state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim, invalid, Error, Result};
use crate::matrix::equilibrium::{best_response, TIE_TOL};
use crate::matrix::{JointDistribution, NormalFormGame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    RegretMatching,
    FictitiousPlay,
    Reinforcement,
    BestResponseMyopic,
    Fixed,
}

impl LearnerKind {
    /// What the learner observes by default: payoff-based reinforcement sees
    /// only its own payoff, everything else sees the joint action.
    pub fn default_observation(self) -> ObservationMode {
        match self {
            LearnerKind::Reinforcement => ObservationMode::OwnPayoff,
            _ => ObservationMode::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMode {
    Full,
    OwnPayoff,
}

/// Serializable learner assignment. `action` is the fixed action for
/// [`LearnerKind::Fixed`] and the opening action for
/// [`LearnerKind::BestResponseMyopic`]; other kinds ignore it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    #[serde(default)]
    pub action: Option<usize>,
    #[serde(default)]
    pub observation: Option<ObservationMode>,
}

impl LearnerSpec {
    pub fn of(kind: LearnerKind) -> Self {
        LearnerSpec { kind, action: None, observation: None }
    }

    pub fn with_action(kind: LearnerKind, action: usize) -> Self {
        LearnerSpec { kind, action: Some(action), observation: None }
    }
}

/// What a learner sees after a round.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub own_action: usize,
    pub own_payoff: f64,
    /// Full joint action, when observable.
    pub joint: Option<&'a [usize]>,
    /// Explicitly exchanged information, when an information source is attached.
    pub information: Option<&'a [f64]>,
}

/// Regret matching with inertia on conditional regrets.
///
/// `regret[j][k]` accumulates `u(k, a_-) − u(j, a_-)` over the rounds in
/// which `j` was played. The switch probability from the previous action
/// `j` to `k` is `max(0, regret[j][k] / t) / inertia`; the remaining mass
/// stays on `j`. Column sums of the matrix give the unconditional regrets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretMatcher {
    player: usize,
    actions: usize,
    regret: Vec<f64>,
    rounds: usize,
    last: Option<usize>,
    inertia: f64,
}

impl RegretMatcher {
    pub fn new(game: &NormalFormGame, player: usize) -> Self {
        let actions = game.action_count(player);
        let widest = game.action_counts().into_iter().max().unwrap_or(1);
        let (lo, hi) = game.payoff_range();
        RegretMatcher {
            player,
            actions,
            regret: vec![0.0; actions * actions],
            rounds: 0,
            last: None,
            inertia: 2.0 * (widest as f64 - 1.0) * (hi - lo),
        }
    }

    pub fn inertia(&self) -> f64 {
        self.inertia
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn last_action(&self) -> Option<usize> {
        self.last
    }

    /// Average regret for having played `from` instead of `to`, clipped at 0.
    pub fn conditional_regret(&self, from: usize, to: usize) -> f64 {
        if self.rounds == 0 {
            return 0.0;
        }
        (self.regret[from * self.actions + to] / self.rounds as f64).max(0.0)
    }

    /// Unconditional regret of each action over the whole history, clipped at 0.
    pub fn regrets(&self) -> Vec<f64> {
        if self.rounds == 0 {
            return vec![0.0; self.actions];
        }
        (0..self.actions)
            .map(|k| {
                let col: f64 = (0..self.actions).map(|j| self.regret[j * self.actions + k]).sum();
                (col / self.rounds as f64).max(0.0)
            })
            .collect()
    }

    /// Distribution of the next action.
    pub fn next_distribution(&self) -> Vec<f64> {
        let Some(prev) = self.last else {
            return vec![1.0 / self.actions as f64; self.actions];
        };
        let mut probs = vec![0.0; self.actions];
        if self.inertia > 0.0 {
            for (k, p) in probs.iter_mut().enumerate() {
                if k != prev {
                    *p = self.conditional_regret(prev, k) / self.inertia;
                }
            }
        }
        probs[prev] = 1.0 - probs.iter().sum::<f64>();
        probs
    }

    fn select(&mut self, rng: &mut ChaCha8Rng) -> usize {
        sample(&self.next_distribution(), rng)
    }

    fn observe(&mut self, game: &NormalFormGame, obs: &Observation<'_>) {
        self.rounds += 1;
        self.last = Some(obs.own_action);
        let Some(joint) = obs.joint else {
            return;
        };
        let played = game.payoff(joint, self.player);
        let j = obs.own_action;
        for k in 0..self.actions {
            self.regret[j * self.actions + k] += game.deviation_payoff(joint, self.player, k) - played;
        }
    }
}

/// Best response to the empirical frequencies of each opponent's actions,
/// treated as independent. Starts from a uniform belief.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FictitiousPlayer {
    player: usize,
    /// Per opponent action counts; the learner's own slot stays empty.
    counts: Vec<Vec<u64>>,
}

impl FictitiousPlayer {
    pub fn new(game: &NormalFormGame, player: usize) -> Self {
        let counts = (0..game.player_count())
            .map(|m| if m == player { Vec::new() } else { vec![0; game.action_count(m)] })
            .collect();
        FictitiousPlayer { player, counts }
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    /// Seeds the belief as if `opponent` had been seen playing each action `counts[a]` times.
    pub fn set_counts(&mut self, opponent: usize, counts: Vec<u64>) -> Result<()> {
        if opponent == self.player || counts.len() != self.counts[opponent].len() {
            return Err(dim("count vector does not fit the opponent's actions"));
        }
        self.counts[opponent] = counts;
        Ok(())
    }

    /// Unnormalized expected payoff of each own action under the belief.
    pub fn action_values(&self, game: &NormalFormGame) -> Vec<f64> {
        let weights: Vec<Vec<f64>> =
            self.counts
                .iter()
                .map(|c| {
                    if c.iter().sum::<u64>() == 0 {
                        vec![1.0; c.len()]
                    } else {
                        c.iter().map(|x| *x as f64).collect()
                    }
                })
                .collect();
        let mut values = vec![0.0; game.action_count(self.player)];
        for p in game.profiles() {
            let w: f64 = p.iter().enumerate().filter(|(m, _)| *m != self.player).map(|(m, a)| weights[m][*a]).product();
            if w > 0.0 {
                values[p[self.player]] += w * game.payoff(&p, self.player);
            }
        }
        // Every own action receives each opponent profile once.
        values
    }

    fn select(&self, game: &NormalFormGame) -> usize {
        let values = self.action_values(game);
        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut best = 0;
        for (a, v) in values.iter().enumerate().skip(1) {
            if *v > values[best] + TIE_TOL * scale {
                best = a;
            }
        }
        best
    }

    fn observe(&mut self, obs: &Observation<'_>) {
        if let Some(joint) = obs.joint {
            for (m, a) in joint.iter().enumerate() {
                if m != self.player {
                    self.counts[m][*a] += 1;
                }
            }
        }
    }
}

/// Cumulative-propensity reinforcement. Payoffs are shifted by the game's
/// minimum so every increment is nonnegative; propensities start at the
/// payoff span. Only the learner's own action and payoff are ever used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reinforcer {
    propensities: Vec<f64>,
    shift: f64,
}

impl Reinforcer {
    pub fn new(game: &NormalFormGame, player: usize) -> Self {
        let (lo, hi) = game.payoff_range();
        let floor = if hi > lo { hi - lo } else { 1.0 };
        Reinforcer { propensities: vec![floor; game.action_count(player)], shift: -lo }
    }

    pub fn propensities(&self) -> &[f64] {
        &self.propensities
    }

    pub fn distribution(&self) -> Vec<f64> {
        let total: f64 = self.propensities.iter().sum();
        self.propensities.iter().map(|p| p / total).collect()
    }

    /// Credits `payoff` (before shifting) to `action`.
    pub fn reinforce(&mut self, action: usize, payoff: f64) {
        self.propensities[action] += (payoff + self.shift).max(0.0);
    }

    fn select(&self, rng: &mut ChaCha8Rng) -> usize {
        sample(&self.distribution(), rng)
    }
}

/// Plays the best response to the opponents' previous-round actions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MyopicResponder {
    player: usize,
    opening: usize,
    last_joint: Option<Vec<usize>>,
}

impl MyopicResponder {
    fn select(&self, game: &NormalFormGame) -> usize {
        match &self.last_joint {
            None => self.opening,
            Some(joint) => best_response(game, self.player, joint)[0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LearnerState {
    RegretMatching(RegretMatcher),
    FictitiousPlay(FictitiousPlayer),
    Reinforcement(Reinforcer),
    BestResponseMyopic(MyopicResponder),
    Fixed { action: usize },
}

/// Beliefs about opponents' private state and the shared resource. The
/// resource is static and private state is unobserved in every scenario
/// here, so these are carried but never updated.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StaticBeliefs {
    pub opponent_state: Option<Vec<f64>>,
    pub resource: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Learner {
    pub player: usize,
    pub state: LearnerState,
    pub observation: ObservationMode,
    pub static_beliefs: StaticBeliefs,
}

impl Learner {
    pub fn new(game: &NormalFormGame, player: usize, spec: LearnerSpec) -> Result<Self> {
        if player >= game.player_count() {
            return Err(dim(format!("player {player} out of range")));
        }
        let check_action = |a: usize| -> Result<usize> {
            if a < game.action_count(player) {
                Ok(a)
            } else {
                Err(invalid(format!("action {a} out of range for player {player}")))
            }
        };
        let state = match spec.kind {
            LearnerKind::RegretMatching => LearnerState::RegretMatching(RegretMatcher::new(game, player)),
            LearnerKind::FictitiousPlay => LearnerState::FictitiousPlay(FictitiousPlayer::new(game, player)),
            LearnerKind::Reinforcement => LearnerState::Reinforcement(Reinforcer::new(game, player)),
            LearnerKind::BestResponseMyopic => LearnerState::BestResponseMyopic(MyopicResponder {
                player,
                opening: check_action(spec.action.unwrap_or(0))?,
                last_joint: None,
            }),
            LearnerKind::Fixed => {
                let action =
                    spec.action.ok_or_else(|| invalid(format!("fixed learner for player {player} needs an action")))?;
                LearnerState::Fixed { action: check_action(action)? }
            }
        };
        Ok(Learner {
            player,
            state,
            observation: spec.observation.unwrap_or(spec.kind.default_observation()),
            static_beliefs: StaticBeliefs::default(),
        })
    }

    pub fn kind(&self) -> LearnerKind {
        match self.state {
            LearnerState::RegretMatching(_) => LearnerKind::RegretMatching,
            LearnerState::FictitiousPlay(_) => LearnerKind::FictitiousPlay,
            LearnerState::Reinforcement(_) => LearnerKind::Reinforcement,
            LearnerState::BestResponseMyopic(_) => LearnerKind::BestResponseMyopic,
            LearnerState::Fixed { .. } => LearnerKind::Fixed,
        }
    }

    pub fn select(&mut self, game: &NormalFormGame, rng: &mut ChaCha8Rng) -> usize {
        match &mut self.state {
            LearnerState::RegretMatching(s) => s.select(rng),
            LearnerState::FictitiousPlay(s) => s.select(game),
            LearnerState::Reinforcement(s) => s.select(rng),
            LearnerState::BestResponseMyopic(s) => s.select(game),
            LearnerState::Fixed { action } => *action,
        }
    }

    pub fn observe(&mut self, game: &NormalFormGame, obs: &Observation<'_>) {
        match &mut self.state {
            LearnerState::RegretMatching(s) => s.observe(game, obs),
            LearnerState::FictitiousPlay(s) => s.observe(obs),
            LearnerState::Reinforcement(s) => s.reinforce(obs.own_action, obs.own_payoff),
            LearnerState::BestResponseMyopic(s) => {
                if let Some(joint) = obs.joint {
                    s.last_joint = Some(joint.to_vec());
                }
            }
            LearnerState::Fixed { .. } => {}
        }
    }
}

/// Source of explicitly exchanged information, queried once per player per round.
pub trait InformationSource {
    fn message(&self, round: usize, player: usize) -> Option<Vec<f64>>;
}

/// Per-round record of a repeated game.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearningTrace {
    action_counts: Vec<usize>,
    actions: Vec<usize>,
    utilities: Vec<f64>,
    /// Unconditional regrets after each round, players concatenated.
    regrets: Vec<f64>,
}

impl LearningTrace {
    pub fn player_count(&self) -> usize {
        self.action_counts.len()
    }

    pub fn rounds(&self) -> usize {
        self.actions.len() / self.player_count()
    }

    /// Joint action of round `t` (0-based).
    pub fn profile(&self, t: usize) -> &[usize] {
        let n = self.player_count();
        &self.actions[t * n..(t + 1) * n]
    }

    pub fn utilities(&self, t: usize) -> &[f64] {
        let n = self.player_count();
        &self.utilities[t * n..(t + 1) * n]
    }

    /// Regret vector of `player` after round `t` (0-based), as accumulated incrementally.
    pub fn regrets(&self, t: usize, player: usize) -> &[f64] {
        let stride: usize = self.action_counts.iter().sum();
        let offset: usize = self.action_counts[..player].iter().sum();
        let start = t * stride + offset;
        &self.regrets[start..start + self.action_counts[player]]
    }

    /// Largest regret of any player for any action after the last round.
    pub fn final_max_regret(&self) -> f64 {
        let last = self.rounds() - 1;
        (0..self.player_count()).flat_map(|n| self.regrets(last, n).iter().copied()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeatedGameRun {
    pub trace: LearningTrace,
    pub learners: Vec<Learner>,
}

/// Independent random stream for `player`, derived from the run seed.
pub fn player_rng(seed: u64, player: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(player as u64);
    rng
}

pub fn run_repeated_game(
    game: &NormalFormGame,
    learners: Vec<Learner>,
    rounds: usize,
    seed: u64,
) -> Result<RepeatedGameRun> {
    run_repeated_game_with(game, learners, rounds, seed, None)
}

pub fn run_repeated_game_with(
    game: &NormalFormGame,
    mut learners: Vec<Learner>,
    rounds: usize,
    seed: u64,
    information: Option<&dyn InformationSource>,
) -> Result<RepeatedGameRun> {
    let players = game.player_count();
    if rounds == 0 {
        return Err(invalid("a repeated game needs at least one round"));
    }
    if learners.len() != players {
        return Err(dim(format!("{} learners for {players} players", learners.len())));
    }
    if learners.iter().enumerate().any(|(n, l)| l.player != n) {
        return Err(invalid("learners must be listed in player order"));
    }
    let action_counts = game.action_counts();
    let stride: usize = action_counts.iter().sum();
    let mut rngs: Vec<ChaCha8Rng> = (0..players).map(|n| player_rng(seed, n)).collect();
    let mut trace = LearningTrace {
        action_counts: action_counts.clone(),
        actions: Vec::with_capacity(rounds * players),
        utilities: Vec::with_capacity(rounds * players),
        regrets: Vec::with_capacity(rounds * stride),
    };
    let mut cumulative: Vec<Vec<f64>> = action_counts.iter().map(|c| vec![0.0; *c]).collect();
    let mut joint = vec![0; players];
    for t in 0..rounds {
        for (n, learner) in learners.iter_mut().enumerate() {
            joint[n] = learner.select(game, &mut rngs[n]);
        }
        let payoff = game.utilities(&joint).to_vec();
        for (n, learner) in learners.iter_mut().enumerate() {
            let message = information.and_then(|src| src.message(t, n));
            let obs = Observation {
                own_action: joint[n],
                own_payoff: payoff[n],
                joint: (learner.observation == ObservationMode::Full).then_some(joint.as_slice()),
                information: message.as_deref(),
            };
            learner.observe(game, &obs);
        }
        for (n, cum) in cumulative.iter_mut().enumerate() {
            for (k, c) in cum.iter_mut().enumerate() {
                *c += game.deviation_payoff(&joint, n, k) - payoff[n];
            }
            let inv = 1.0 / (t + 1) as f64;
            trace.regrets.extend(cum.iter().map(|c| (c * inv).max(0.0)));
        }
        trace.actions.extend_from_slice(&joint);
        trace.utilities.extend(payoff);
    }
    Ok(RepeatedGameRun { trace, learners })
}

/// Regret of `player` after the first `t` rounds, recomputed from the trace:
/// `max(0, (1/t)·Σ_{t'≤t} [u(a', a_-^{t'}) − u(a^{t'})])` for every `a'`.
pub fn regret_vector(trace: &LearningTrace, game: &NormalFormGame, player: usize, t: usize) -> Result<Vec<f64>> {
    if t == 0 || t > trace.rounds() {
        return Err(invalid(format!("regret horizon {t} outside 1..={}", trace.rounds())));
    }
    let mut sums = vec![0.0; game.action_count(player)];
    for r in 0..t {
        let p = trace.profile(r);
        let played = game.payoff(p, player);
        for (k, s) in sums.iter_mut().enumerate() {
            *s += game.deviation_payoff(p, player, k) - played;
        }
    }
    Ok(sums.into_iter().map(|s| (s / t as f64).max(0.0)).collect())
}

/// Frequency of each joint profile over the whole trace.
pub fn empirical_joint_distribution(trace: &LearningTrace, game: &NormalFormGame) -> Result<JointDistribution> {
    if trace.action_counts != game.action_counts() {
        return Err(dim("trace and game disagree on action counts"));
    }
    let mut counts = vec![0u64; game.profile_count()];
    for t in 0..trace.rounds() {
        counts[game.profile_index(trace.profile(t))] += 1;
    }
    let total = trace.rounds() as f64;
    let mut probs: Vec<f64> = counts.iter().map(|c| *c as f64 / total).collect();
    // absorb rounding so the mass sums to one
    let drift = 1.0 - probs.iter().sum::<f64>();
    if let Some(max) = probs.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        *max += drift;
    }
    JointDistribution::new(probs)
}

/// Time-average utility vector over rounds `start..start + len`.
pub fn value_of_learning(trace: &LearningTrace, start: usize, len: usize) -> Result<Vec<f64>> {
    if len == 0 {
        return Err(Error::EmptyWindow);
    }
    if start + len > trace.rounds() {
        return Err(invalid(format!("window {start}..{} exceeds {} rounds", start + len, trace.rounds())));
    }
    let mut out = vec![0.0; trace.player_count()];
    for t in start..start + len {
        for (o, u) in out.iter_mut().zip(trace.utilities(t)) {
            *o += u;
        }
    }
    out.iter_mut().for_each(|o| *o /= len as f64);
    Ok(out)
}

fn sample(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}
