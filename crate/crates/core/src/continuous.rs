//! Equilibria of the discretized-PSD power control game.

use serde::{Deserialize, Serialize};

use crate::error::{dim, invalid, Error, Result};
use crate::exec::Execution;
use crate::spectrum::{
    achievable_rates, effective_noise, link_rate, water_fill, ChannelSet, FrequencyGrid, NoiseProfile, PowerAllocation,
    PowerBudget, WaterFill,
};

/// Everything needed to evaluate the power game: grid, gains, noise and budgets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerScenario {
    pub grid: FrequencyGrid,
    pub channels: ChannelSet,
    pub noise: NoiseProfile,
    pub budgets: PowerBudget,
}

impl PowerScenario {
    pub fn new(grid: FrequencyGrid, channels: ChannelSet, noise: NoiseProfile, budgets: PowerBudget) -> Result<Self> {
        let n = channels.user_count();
        let k = grid.bin_count();
        if channels.bin_count() != k || noise.bin_count() != k {
            return Err(dim(format!(
                "grid has {k} bins, channels {}, noise {}",
                channels.bin_count(),
                noise.bin_count()
            )));
        }
        if noise.user_count() != n || budgets.len() != n {
            return Err(dim(format!(
                "channels describe {n} users, noise {}, budgets {}",
                noise.user_count(),
                budgets.len()
            )));
        }
        Ok(PowerScenario { grid, channels, noise, budgets })
    }

    pub fn user_count(&self) -> usize {
        self.channels.user_count()
    }

    pub fn bin_count(&self) -> usize {
        self.grid.bin_count()
    }

    pub fn with_budgets(&self, budgets: &[f64]) -> Result<Self> {
        Self::new(self.grid, self.channels.clone(), self.noise.clone(), PowerBudget::new(budgets.to_vec())?)
    }

    pub fn with_channels(&self, channels: ChannelSet) -> Result<Self> {
        Self::new(self.grid, channels, self.noise.clone(), self.budgets.clone())
    }

    pub fn rates(&self, alloc: &PowerAllocation) -> Result<Vec<f64>> {
        achievable_rates(alloc, &self.channels, &self.noise, &self.grid)
    }

    /// Water-filling response of `user` to everyone else's current PSD.
    pub fn best_response(&self, user: usize, alloc: &PowerAllocation) -> Result<WaterFill> {
        let seen = effective_noise(user, alloc, &self.channels, &self.noise)?;
        water_fill(self.channels.direct(user), &seen, self.budgets.get(user), &self.grid)
    }

    /// Largest max-norm gap between any user's row and its water-filling response.
    pub fn best_response_gap(&self, alloc: &PowerAllocation) -> Result<f64> {
        let mut gap: f64 = 0.0;
        for n in 0..self.user_count() {
            let wf = self.best_response(n, alloc)?;
            for (a, b) in alloc.row(n).iter().zip(&wf.psd) {
                gap = gap.max((a - b).abs());
            }
        }
        Ok(gap)
    }

    fn require_two_users(&self) -> Result<()> {
        if self.user_count() != 2 {
            return Err(invalid(format!(
                "leader/follower analysis is defined for two users, scenario has {}",
                self.user_count()
            )));
        }
        Ok(())
    }

    /// Rates of a two-user pair of rows without building an allocation.
    fn pair_rates(&self, rows: [&[f64]; 2]) -> [f64; 2] {
        let df = self.grid.bin_width();
        let mut out = [0.0; 2];
        for (n, slot) in out.iter_mut().enumerate() {
            let other = 1 - n;
            let interference: Vec<f64> = self
                .noise
                .row(n)
                .iter()
                .zip(rows[other])
                .zip(self.channels.gains(other, n))
                .map(|((s, p), g)| s + p * g)
                .collect();
            *slot = link_rate(rows[n], self.channels.direct(n), &interference, df);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IwOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IwOptions {
    fn default() -> Self {
        IwOptions { tol: 1e-8, max_iter: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IwResult {
    pub allocation: PowerAllocation,
    pub rates: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Max PSD change over the last sweep.
    pub residual: f64,
}

/// Gauss-Seidel iterative water-filling starting from silence.
///
/// Non-convergence is reported through `converged = false`, not an error.
pub fn iterative_water_filling(sc: &PowerScenario, opts: IwOptions) -> Result<IwResult> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(invalid("IW tolerance must be positive"));
    }
    if opts.max_iter == 0 {
        return Err(invalid("IW needs at least one sweep"));
    }
    let mut alloc = PowerAllocation::zeros(sc.user_count(), sc.bin_count());
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        residual = 0.0;
        for n in 0..sc.user_count() {
            let wf = sc.best_response(n, &alloc)?;
            for (old, new) in alloc.row(n).iter().zip(&wf.psd) {
                residual = residual.max((old - new).abs());
            }
            alloc.set_row(n, &wf.psd)?;
        }
        if residual <= opts.tol {
            break;
        }
    }
    let rates = sc.rates(&alloc)?;
    Ok(IwResult { allocation: alloc, rates, iterations, converged: residual <= opts.tol, residual })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FollowerResponse {
    pub follower_psd: Vec<f64>,
    pub rates: Vec<f64>,
}

/// Lower level of the leader/follower program: the follower water-fills
/// against the leader's committed PSD.
pub fn follower_response_rates(sc: &PowerScenario, leader: usize, leader_psd: &[f64]) -> Result<FollowerResponse> {
    sc.require_two_users()?;
    if leader > 1 {
        return Err(dim(format!("leader index {leader} out of range")));
    }
    if leader_psd.len() != sc.bin_count() {
        return Err(dim(format!("leader PSD has {} bins, expected {}", leader_psd.len(), sc.bin_count())));
    }
    let follower = 1 - leader;
    let mut alloc = PowerAllocation::zeros(2, sc.bin_count());
    alloc.set_row(leader, leader_psd)?;
    let wf = sc.best_response(follower, &alloc)?;
    alloc.set_row(follower, &wf.psd)?;
    let rates = sc.pair_rates([alloc.row(0), alloc.row(1)]).to_vec();
    Ok(FollowerResponse { follower_psd: wf.psd, rates })
}

/// How much of the budget a simplex grid point may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridFill {
    /// Level counts sum exactly to `L` (full budget).
    Exact,
    /// Level counts sum to at most `L` (silence allowed).
    AtMost,
}

/// Nonnegative integer vectors of length `bins` summing to `levels` (or at
/// most `levels`), in ascending lexicographic order.
pub fn simplex_points(bins: usize, levels: usize, fill: GridFill) -> Vec<Vec<usize>> {
    fn recurse(prefix: &mut Vec<usize>, bins: usize, left: usize, fill: GridFill, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == bins {
            match fill {
                GridFill::Exact => {
                    prefix.push(left);
                    out.push(prefix.clone());
                    prefix.pop();
                }
                GridFill::AtMost => {
                    for last in 0..=left {
                        prefix.push(last);
                        out.push(prefix.clone());
                        prefix.pop();
                    }
                }
            }
            return;
        }
        for c in 0..=left {
            prefix.push(c);
            recurse(prefix, bins, left - c, fill, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if bins > 0 {
        recurse(&mut Vec::with_capacity(bins), bins, levels, fill, &mut out);
    }
    out
}

/// Number of points [`simplex_points`] would return.
pub fn simplex_point_count(bins: usize, levels: usize, fill: GridFill) -> u128 {
    let free = match fill {
        GridFill::Exact => bins.saturating_sub(1),
        GridFill::AtMost => bins,
    };
    // C(levels + free, free)
    let mut c: u128 = 1;
    for i in 1..=free as u128 {
        c = c * (levels as u128 + i) / i;
    }
    c
}

/// PSD rows of the `levels`-step simplex grid for one user's budget.
pub fn grid_rows(budget: f64, grid: &FrequencyGrid, levels: usize, fill: GridFill) -> Vec<Vec<f64>> {
    let unit = budget / (levels as f64 * grid.bin_width());
    simplex_points(grid.bin_count(), levels, fill)
        .into_iter()
        .map(|p| p.into_iter().map(|c| c as f64 * unit).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub iw: IwOptions,
    /// Budget split count for simplex grids and coordinate-descent steps.
    pub levels: usize,
    /// Extra step-halving rounds of leader refinement.
    pub refine_rounds: usize,
    /// Largest joint-allocation count the exhaustive oracle will enumerate.
    pub oracle_cap: u128,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            iw: IwOptions::default(),
            levels: 10,
            refine_rounds: 3,
            oracle_cap: 5_000_000,
            execution: Execution::default(),
        }
    }
}

/// Bin count up to which the leader enumerates the full simplex grid.
pub const LEADER_GRID_MAX_BINS: usize = 4;

const MAX_DESCENT_PASSES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StackelbergResult {
    pub leader: usize,
    pub leader_psd: Vec<f64>,
    pub follower_psd: Vec<f64>,
    pub rates: Vec<f64>,
    pub candidates_evaluated: usize,
    /// Leader rate at the IW equilibrium used as the starting candidate.
    pub nash_rates: Vec<f64>,
    pub nash_converged: bool,
}

impl StackelbergResult {
    pub fn allocation(&self) -> PowerAllocation {
        let mut rows = vec![Vec::new(), Vec::new()];
        rows[self.leader] = self.leader_psd.clone();
        rows[1 - self.leader] = self.follower_psd.clone();
        PowerAllocation::from_rows(&rows).expect("rows come from the same grid")
    }
}

struct Candidate {
    leader_psd: Vec<f64>,
    response: FollowerResponse,
}

impl Candidate {
    fn leader_rate(&self, leader: usize) -> f64 {
        self.response.rates[leader]
    }
}

fn evaluate(sc: &PowerScenario, leader: usize, psd: Vec<f64>) -> Result<Candidate> {
    let response = follower_response_rates(sc, leader, &psd)?;
    Ok(Candidate { leader_psd: psd, response })
}

/// Picks the candidate with the highest leader rate; earlier entries win ties.
fn best_of(sc: &PowerScenario, leader: usize, rows: &[Vec<f64>], exec: Execution) -> Result<Candidate> {
    let evaluated: Vec<Result<Candidate>> = exec.map(rows, |row| evaluate(sc, leader, row.clone()));
    let mut best: Option<Candidate> = None;
    for cand in evaluated {
        let cand = cand?;
        if best.as_ref().is_none_or(|b| cand.leader_rate(leader) > b.leader_rate(leader)) {
            best = Some(cand);
        }
    }
    best.ok_or_else(|| invalid("no leader candidates supplied"))
}

/// Leader-optimal choice among an explicit candidate set.
pub fn stackelberg_over_candidates(
    sc: &PowerScenario,
    leader: usize,
    candidates: &[Vec<f64>],
    exec: Execution,
) -> Result<StackelbergResult> {
    sc.require_two_users()?;
    let best = best_of(sc, leader, candidates, exec)?;
    Ok(StackelbergResult {
        leader,
        leader_psd: best.leader_psd,
        follower_psd: best.response.follower_psd,
        rates: best.response.rates,
        candidates_evaluated: candidates.len(),
        nash_rates: Vec::new(),
        nash_converged: false,
    })
}

/// Moves of one descent pass: transfer `step` power between two bins, shed it
/// from a bin, or add unused budget to a bin.
fn neighbour_rows(row: &[f64], step_psd: f64, budget_psd: f64) -> Vec<Vec<f64>> {
    let k = row.len();
    let used: f64 = row.iter().sum();
    let mut out = Vec::with_capacity(k * (k + 1));
    let take = |v: f64| (v - step_psd).max(0.0);
    for from in 0..k {
        if row[from] <= 0.0 {
            continue;
        }
        let moved = row[from].min(step_psd);
        for to in 0..k {
            if to == from {
                continue;
            }
            let mut next = row.to_vec();
            next[from] = take(row[from]);
            next[to] += moved;
            out.push(next);
        }
        let mut shed = row.to_vec();
        shed[from] = take(row[from]);
        out.push(shed);
    }
    let spare = budget_psd - used;
    if spare > 1e-12 * budget_psd {
        let add = spare.min(step_psd);
        for to in 0..k {
            let mut next = row.to_vec();
            next[to] += add;
            out.push(next);
        }
    }
    out
}

/// Best-improvement coordinate descent on the leader's rate with step
/// halving after each round.
fn refine(
    sc: &PowerScenario,
    leader: usize,
    start: Candidate,
    first_step: f64,
    rounds: usize,
    exec: Execution,
    evaluated: &mut usize,
) -> Result<Candidate> {
    let budget_psd = sc.budgets.get(leader) / sc.grid.bin_width();
    let mut current = start;
    let mut step_psd = first_step / sc.grid.bin_width();
    for _ in 0..rounds {
        for _ in 0..MAX_DESCENT_PASSES {
            let moves = neighbour_rows(&current.leader_psd, step_psd, budget_psd);
            if moves.is_empty() {
                break;
            }
            *evaluated += moves.len();
            let best = best_of(sc, leader, &moves, exec)?;
            let gain = best.leader_rate(leader) - current.leader_rate(leader);
            if gain > 1e-12 * current.leader_rate(leader).abs().max(1.0) {
                current = best;
            } else {
                break;
            }
        }
        step_psd *= 0.5;
    }
    Ok(current)
}

/// Sub-optimal search over the leader's PSD, each candidate scored with the
/// follower's exact water-filling response.
///
/// With at most [`LEADER_GRID_MAX_BINS`] bins the whole `levels`-step simplex
/// grid is enumerated and the winner refined with half steps; with more bins,
/// coordinate descent starts from the IW equilibrium with step
/// `budget / levels`. The IW equilibrium is always a candidate, so the leader
/// never ends below its equilibrium rate.
pub fn stackelberg_leader_search(sc: &PowerScenario, leader: usize, opts: &SolverOptions) -> Result<StackelbergResult> {
    sc.require_two_users()?;
    if leader > 1 {
        return Err(dim(format!("leader index {leader} out of range")));
    }
    if opts.levels < 2 {
        return Err(invalid("leader search needs at least 2 levels"));
    }
    let iw = iterative_water_filling(sc, opts.iw)?;
    let nash_row = iw.allocation.row(leader).to_vec();
    let budget = sc.budgets.get(leader);
    let step = budget / opts.levels as f64;
    let mut evaluated = 1;
    let nash = evaluate(sc, leader, nash_row.clone())?;

    let best = if sc.bin_count() <= LEADER_GRID_MAX_BINS {
        let mut rows = vec![nash_row];
        rows.extend(grid_rows(budget, &sc.grid, opts.levels, GridFill::AtMost));
        evaluated = rows.len();
        let start = best_of(sc, leader, &rows, opts.execution)?;
        refine(sc, leader, start, 0.5 * step, opts.refine_rounds, opts.execution, &mut evaluated)?
    } else {
        refine(sc, leader, nash, step, 1 + opts.refine_rounds, opts.execution, &mut evaluated)?
    };
    Ok(StackelbergResult {
        leader,
        leader_psd: best.leader_psd,
        follower_psd: best.response.follower_psd,
        rates: best.response.rates,
        candidates_evaluated: evaluated,
        nash_rates: iw.rates,
        nash_converged: iw.converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionMethod {
    Iw,
    Stackelberg,
    Pareto,
}

impl RegionMethod {
    pub fn name(self) -> &'static str {
        match self {
            RegionMethod::Iw => "iw",
            RegionMethod::Stackelberg => "stackelberg",
            RegionMethod::Pareto => "pareto",
        }
    }
}

/// One point of a rate region. `params` holds the budget pair for IW and
/// Stackelberg samples and the weight vector for Pareto samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionSample {
    pub method: RegionMethod,
    pub params: Vec<f64>,
    pub rates: Vec<f64>,
    pub converged: bool,
}

impl RegionSample {
    /// Componentwise `self ≥ other`.
    pub fn weakly_dominates(&self, other: &[f64]) -> bool {
        self.rates.iter().zip(other).all(|(a, b)| a >= b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedSumOptimum {
    pub sample: RegionSample,
    pub allocation: PowerAllocation,
    pub objective: f64,
    pub evaluated: u128,
}

fn oracle_grid(sc: &PowerScenario, levels: usize, cap: u128) -> Result<Vec<Vec<Vec<f64>>>> {
    if levels == 0 {
        return Err(invalid("grid oracle needs at least one level"));
    }
    let per_user = simplex_point_count(sc.bin_count(), levels, GridFill::AtMost);
    let total = per_user.checked_pow(sc.user_count() as u32).unwrap_or(u128::MAX);
    if total > cap {
        return Err(Error::OracleScaleExceeded { evaluations: total, cap });
    }
    Ok((0..sc.user_count()).map(|n| grid_rows(sc.budgets.get(n), &sc.grid, levels, GridFill::AtMost)).collect())
}

/// Calls `visit(joint_index, rates)` for every joint grid allocation whose
/// first user's choice is `first`, in lexicographic order.
fn for_each_joint(sc: &PowerScenario, rows: &[Vec<Vec<f64>>], first: usize, mut visit: impl FnMut(&[usize], &[f64])) {
    let users = rows.len();
    let mut idx = vec![0usize; users];
    idx[0] = first;
    let mut alloc = PowerAllocation::zeros(users, sc.bin_count());
    let mut rates = vec![0.0; users];
    loop {
        if users == 2 {
            rates.copy_from_slice(&sc.pair_rates([&rows[0][idx[0]], &rows[1][idx[1]]]));
        } else {
            for (n, &i) in idx.iter().enumerate() {
                alloc.set_row(n, &rows[n][i]).expect("grid rows are valid");
            }
            rates = sc.rates(&alloc).expect("shapes validated");
        }
        visit(&idx, &rates);
        // odometer over users 1..N
        let mut pos = users;
        loop {
            if pos == 1 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < rows[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
        if users == 1 {
            return;
        }
    }
}

/// Exhaustive maximization of `Σ w_n R_n` over every user's `levels`-step
/// simplex grid (silence allowed). Ties keep the lexicographically first
/// joint allocation.
pub fn weighted_sum_optimize(sc: &PowerScenario, weights: &[f64], opts: &SolverOptions) -> Result<WeightedSumOptimum> {
    if weights.len() != sc.user_count() {
        return Err(dim(format!("{} weights for {} users", weights.len(), sc.user_count())));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(invalid("weights must be nonnegative with positive sum"));
    }
    let rows = oracle_grid(sc, opts.levels, opts.oracle_cap)?;
    let chunks = opts.execution.map_range(rows[0].len(), |first| {
        let mut best: Option<(f64, Vec<usize>)> = None;
        for_each_joint(sc, &rows, first, |idx, rates| {
            let value: f64 = weights.iter().zip(rates).map(|(w, r)| w * r).sum();
            if best.as_ref().is_none_or(|(b, _)| value > *b) {
                best = Some((value, idx.to_vec()));
            }
        });
        best.expect("every chunk has at least one joint allocation")
    });
    let (objective, idx) =
        chunks.into_iter().reduce(|acc, next| if next.0 > acc.0 { next } else { acc }).expect("grid is non-empty");
    let chosen: Vec<Vec<f64>> = idx.iter().enumerate().map(|(n, &i)| rows[n][i].clone()).collect();
    let allocation = PowerAllocation::from_rows(&chosen)?;
    let rates = sc.rates(&allocation)?;
    let evaluated = rows.iter().map(|r| r.len() as u128).product();
    Ok(WeightedSumOptimum {
        sample: RegionSample { method: RegionMethod::Pareto, params: weights.to_vec(), rates, converged: true },
        allocation,
        objective,
        evaluated,
    })
}

/// Non-dominated rate vectors among all joint grid allocations.
pub fn grid_rate_frontier(sc: &PowerScenario, opts: &SolverOptions) -> Result<Vec<Vec<f64>>> {
    let rows = oracle_grid(sc, opts.levels, opts.oracle_cap)?;
    let chunks = opts.execution.map_range(rows[0].len(), |first| {
        let mut pts = Vec::new();
        for_each_joint(sc, &rows, first, |_, rates| pts.push(rates.to_vec()));
        pareto_filter(pts)
    });
    Ok(pareto_filter(chunks.into_iter().flatten().collect()))
}

/// Keeps the points not weakly dominated by a different point; duplicates collapse.
pub fn pareto_filter(mut pts: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    pts.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup();
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for p in pts {
        let dominated = kept.iter().any(|q| q.iter().zip(&p).all(|(a, b)| a >= b));
        if !dominated {
            kept.push(p);
        }
    }
    kept
}

/// One sample per sweep point: budget vectors for IW/Stackelberg (leader is
/// user 0), weight vectors for Pareto.
pub fn rate_region_sweep(
    method: RegionMethod,
    sc: &PowerScenario,
    points: &[Vec<f64>],
    opts: &SolverOptions,
) -> Result<Vec<RegionSample>> {
    // Parallelism lives inside each point's solver.
    let inner = *opts;
    points
        .iter()
        .map(|p| -> Result<RegionSample> {
            match method {
                RegionMethod::Pareto => Ok(weighted_sum_optimize(sc, p, &inner)?.sample),
                RegionMethod::Iw => {
                    let scp = sc.with_budgets(p)?;
                    let iw = iterative_water_filling(&scp, inner.iw)?;
                    Ok(RegionSample { method, params: p.clone(), rates: iw.rates, converged: iw.converged })
                }
                RegionMethod::Stackelberg => {
                    let scp = sc.with_budgets(p)?;
                    let st = stackelberg_leader_search(&scp, 0, &inner)?;
                    Ok(RegionSample { method, params: p.clone(), rates: st.rates, converged: st.nash_converged })
                }
            }
        })
        .collect()
}
