//! Discretized frequency-selective interference channel.
//!
//! The band `[0, F_s]` is split into `K` uniform bins of width `Δf`, so every
//! spectral integral becomes a Riemann sum. Channel gains are stored as power
//! gains `|H_ij(f_k)|²` (transmitter `i` to receiver `j`).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{dim, invalid, Error, Result};

/// Relative slack allowed on a user's power budget.
pub const BUDGET_REL_TOL: f64 = 1e-9;

const BISECTION_MAX_ITER: usize = 200;
const BISECTION_RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyGrid {
    bin_count: usize,
    total_band: f64,
}

impl FrequencyGrid {
    pub fn new(bin_count: usize, total_band: f64) -> Result<Self> {
        if bin_count == 0 {
            return Err(invalid("frequency grid needs at least one bin"));
        }
        if !(total_band.is_finite() && total_band > 0.0) {
            return Err(invalid(format!("total band must be positive, got {total_band}")));
        }
        Ok(FrequencyGrid { bin_count, total_band })
    }

    /// Grid with unit-width bins (`F_s = K`).
    pub fn unit(bin_count: usize) -> Result<Self> {
        Self::new(bin_count, bin_count as f64)
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    pub fn total_band(&self) -> f64 {
        self.total_band
    }

    pub fn bin_width(&self) -> f64 {
        self.total_band / self.bin_count as f64
    }
}

/// Power gains `gain2[i][j][k] = |H_ij(f_k)|²` for every transmitter/receiver pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelSet {
    user_count: usize,
    bin_count: usize,
    gain2: Vec<f64>,
}

impl ChannelSet {
    /// Builds from a nested `[tx][rx][bin]` table.
    pub fn from_nested(gain2: &[Vec<Vec<f64>>]) -> Result<Self> {
        let users = gain2.len();
        if users == 0 {
            return Err(invalid("channel set needs at least one user"));
        }
        let bins = gain2[0].first().map_or(0, Vec::len);
        if bins == 0 {
            return Err(invalid("channel set needs at least one bin"));
        }
        let mut flat = Vec::with_capacity(users * users * bins);
        for (i, rows) in gain2.iter().enumerate() {
            if rows.len() != users {
                return Err(dim(format!("transmitter {i} lists {} receivers, expected {users}", rows.len())));
            }
            for (j, row) in rows.iter().enumerate() {
                if row.len() != bins {
                    return Err(dim(format!("gain {i}->{j} has {} bins, expected {bins}", row.len())));
                }
                flat.extend_from_slice(row);
            }
        }
        Self::from_flat(users, bins, flat)
    }

    pub fn from_flat(user_count: usize, bin_count: usize, gain2: Vec<f64>) -> Result<Self> {
        if gain2.len() != user_count * user_count * bin_count {
            return Err(dim(format!(
                "flat gain table has {} entries, expected {}",
                gain2.len(),
                user_count * user_count * bin_count
            )));
        }
        if let Some(bad) = gain2.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(invalid(format!("channel gains must be finite and nonnegative, found {bad}")));
        }
        Ok(ChannelSet { user_count, bin_count, gain2 })
    }

    /// Channel set whose gains do not depend on frequency.
    pub fn flat(direct: &[f64], cross: f64, bin_count: usize) -> Result<Self> {
        let n = direct.len();
        let mut nested = vec![vec![vec![cross; bin_count]; n]; n];
        for (i, d) in direct.iter().enumerate() {
            nested[i][i] = vec![*d; bin_count];
        }
        Self::from_nested(&nested)
    }

    pub fn user_count(&self) -> usize {
        self.user_count
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    /// Gain row for transmitter `tx` toward receiver `rx`.
    pub fn gains(&self, tx: usize, rx: usize) -> &[f64] {
        let start = (tx * self.user_count + rx) * self.bin_count;
        &self.gain2[start..start + self.bin_count]
    }

    pub fn gain(&self, tx: usize, rx: usize, bin: usize) -> f64 {
        self.gains(tx, rx)[bin]
    }

    pub fn direct(&self, user: usize) -> &[f64] {
        self.gains(user, user)
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.user_count).map(|i| (0..self.user_count).map(|j| self.gains(i, j).to_vec()).collect()).collect()
    }

    /// Copy with every cross gain set to zero.
    pub fn decoupled(&self) -> ChannelSet {
        let mut out = self.clone();
        for i in 0..self.user_count {
            for j in 0..self.user_count {
                if i != j {
                    let start = (i * self.user_count + j) * self.bin_count;
                    out.gain2[start..start + self.bin_count].fill(0.0);
                }
            }
        }
        out
    }
}

/// Receiver noise PSD `σ_n(f_k)`, strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseProfile {
    bin_count: usize,
    psd: Vec<f64>,
}

impl NoiseProfile {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let bins = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || bins == 0 {
            return Err(invalid("noise profile must be non-empty"));
        }
        let mut psd = Vec::with_capacity(rows.len() * bins);
        for (n, row) in rows.iter().enumerate() {
            if row.len() != bins {
                return Err(dim(format!("noise row {n} has {} bins, expected {bins}", row.len())));
            }
            if let Some(bad) = row.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(invalid(format!("noise PSD must be positive, found {bad}")));
            }
            psd.extend_from_slice(row);
        }
        Ok(NoiseProfile { bin_count: bins, psd })
    }

    pub fn uniform(users: usize, bins: usize, level: f64) -> Result<Self> {
        Self::new(&vec![vec![level; bins]; users])
    }

    pub fn user_count(&self) -> usize {
        self.psd.len() / self.bin_count
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    pub fn row(&self, user: usize) -> &[f64] {
        &self.psd[user * self.bin_count..(user + 1) * self.bin_count]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.psd.chunks(self.bin_count).map(<[f64]>::to_vec).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerBudget(Vec<f64>);

impl PowerBudget {
    pub fn new(budget: Vec<f64>) -> Result<Self> {
        if budget.is_empty() {
            return Err(invalid("power budget needs at least one user"));
        }
        if let Some(bad) = budget.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(invalid(format!("power budgets must be positive, found {bad}")));
        }
        Ok(PowerBudget(budget))
    }

    pub fn get(&self, user: usize) -> f64 {
        self.0[user]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-user, per-bin transmit PSD.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerAllocation {
    bin_count: usize,
    psd: Vec<f64>,
}

impl PowerAllocation {
    pub fn zeros(users: usize, bins: usize) -> Self {
        PowerAllocation { bin_count: bins, psd: vec![0.0; users * bins] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let bins = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || bins == 0 {
            return Err(invalid("allocation must be non-empty"));
        }
        let mut alloc = Self::zeros(rows.len(), bins);
        for (n, row) in rows.iter().enumerate() {
            alloc.set_row(n, row)?;
        }
        Ok(alloc)
    }

    pub fn user_count(&self) -> usize {
        self.psd.len() / self.bin_count
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    pub fn row(&self, user: usize) -> &[f64] {
        &self.psd[user * self.bin_count..(user + 1) * self.bin_count]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.psd.chunks(self.bin_count).map(<[f64]>::to_vec).collect()
    }

    pub fn set_row(&mut self, user: usize, row: &[f64]) -> Result<()> {
        if row.len() != self.bin_count {
            return Err(dim(format!("row has {} bins, expected {}", row.len(), self.bin_count)));
        }
        if let Some(bad) = row.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(invalid(format!("PSD entries must be finite and nonnegative, found {bad}")));
        }
        self.psd[user * self.bin_count..(user + 1) * self.bin_count].copy_from_slice(row);
        Ok(())
    }

    /// Total power `Σ_k P[k]·Δf` spent by `user`.
    pub fn power(&self, user: usize, grid: &FrequencyGrid) -> f64 {
        self.row(user).iter().sum::<f64>() * grid.bin_width()
    }

    /// Checks every user against its budget with [`BUDGET_REL_TOL`] slack.
    pub fn check_budget(&self, budgets: &PowerBudget, grid: &FrequencyGrid) -> Result<()> {
        if budgets.len() != self.user_count() {
            return Err(dim("allocation and budget disagree on user count"));
        }
        for n in 0..self.user_count() {
            let used = self.power(n, grid);
            let cap = budgets.get(n);
            if used > cap + BUDGET_REL_TOL * cap {
                return Err(invalid(format!("user {n} spends {used}, budget is {cap}")));
            }
        }
        Ok(())
    }

    /// Max-norm distance between two allocations of equal shape.
    pub fn max_abs_diff(&self, other: &PowerAllocation) -> f64 {
        self.psd.iter().zip(&other.psd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn check_shapes(user: usize, alloc: &PowerAllocation, ch: &ChannelSet, noise: &NoiseProfile) -> Result<()> {
    let n = ch.user_count();
    let k = ch.bin_count();
    if alloc.user_count() != n || noise.user_count() != n {
        return Err(dim(format!(
            "user counts disagree: channels {n}, allocation {}, noise {}",
            alloc.user_count(),
            noise.user_count()
        )));
    }
    if alloc.bin_count() != k || noise.bin_count() != k {
        return Err(dim(format!(
            "bin counts disagree: channels {k}, allocation {}, noise {}",
            alloc.bin_count(),
            noise.bin_count()
        )));
    }
    if user >= n {
        return Err(dim(format!("user index {user} out of range for {n} users")));
    }
    Ok(())
}

/// Noise plus interference PSD seen by receiver `user`.
pub fn effective_noise(
    user: usize,
    alloc: &PowerAllocation,
    ch: &ChannelSet,
    noise: &NoiseProfile,
) -> Result<Vec<f64>> {
    check_shapes(user, alloc, ch, noise)?;
    let mut out = noise.row(user).to_vec();
    for j in (0..ch.user_count()).filter(|&j| j != user) {
        for ((o, p), g) in out.iter_mut().zip(alloc.row(j)).zip(ch.gains(j, user)) {
            *o += p * g;
        }
    }
    Ok(out)
}

/// Rate (bits/s) of a single link given its PSD, gain and noise-plus-interference.
pub(crate) fn link_rate(psd: &[f64], gain: &[f64], interference: &[f64], bin_width: f64) -> f64 {
    psd.iter().zip(gain).zip(interference).map(|((p, g), i)| (p * g / i).ln_1p()).sum::<f64>() * bin_width
        / std::f64::consts::LN_2
}

/// Achievable rate of `user` treating interference as noise (log base 2).
pub fn achievable_rate(
    user: usize,
    alloc: &PowerAllocation,
    ch: &ChannelSet,
    noise: &NoiseProfile,
    grid: &FrequencyGrid,
) -> Result<f64> {
    if grid.bin_count() != ch.bin_count() {
        return Err(dim("grid and channel set disagree on bin count"));
    }
    let interference = effective_noise(user, alloc, ch, noise)?;
    Ok(link_rate(alloc.row(user), ch.direct(user), &interference, grid.bin_width()))
}

/// Rates of every user.
pub fn achievable_rates(
    alloc: &PowerAllocation,
    ch: &ChannelSet,
    noise: &NoiseProfile,
    grid: &FrequencyGrid,
) -> Result<Vec<f64>> {
    (0..ch.user_count()).map(|n| achievable_rate(n, alloc, ch, noise, grid)).collect()
}

/// Single-user water-filling solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaterFill {
    pub psd: Vec<f64>,
    pub level: f64,
}

/// Maximizes `Σ_k Δf·log(1 + P[k]·gain[k]/noise[k])` subject to `Σ_k P[k]·Δf = budget`.
///
/// The water level is bracketed and bisected; the active set found by the
/// bisection then fixes the level in closed form so the budget is met to
/// rounding error. Bins with zero gain never receive power.
pub fn water_fill(gain: &[f64], noise_psd: &[f64], budget: f64, grid: &FrequencyGrid) -> Result<WaterFill> {
    let k = grid.bin_count();
    if gain.len() != k || noise_psd.len() != k {
        return Err(dim(format!(
            "water_fill got {} gains and {} noise bins for a {k}-bin grid",
            gain.len(),
            noise_psd.len()
        )));
    }
    if !(budget.is_finite() && budget > 0.0) {
        return Err(invalid(format!("budget must be positive, got {budget}")));
    }
    if let Some(bad) = noise_psd.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(invalid(format!("noise PSD must be positive, found {bad}")));
    }
    if let Some(bad) = gain.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(invalid(format!("gains must be finite and nonnegative, found {bad}")));
    }
    let df = grid.bin_width();
    // Floor height per bin; None for dead bins.
    let floors: Vec<Option<f64>> = gain.iter().zip(noise_psd).map(|(g, s)| (*g > 0.0).then(|| s / g)).collect();
    let live: Vec<f64> = floors.iter().flatten().copied().collect();
    if live.is_empty() {
        return Err(Error::NoUsableSpectrum);
    }
    let min_floor = live.iter().copied().fold(f64::INFINITY, f64::min);
    let max_floor = live.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let spent = |level: f64| live.iter().map(|f| (level - f).max(0.0)).sum::<f64>() * df;

    let mut lo = min_floor;
    let mut hi = min_floor + budget / (df * live.len() as f64) + max_floor;
    let mut level = 0.5 * (lo + hi);
    for _ in 0..BISECTION_MAX_ITER {
        level = 0.5 * (lo + hi);
        let residual = spent(level) - budget;
        if residual.abs() <= BISECTION_RESIDUAL_TOL {
            break;
        }
        if residual > 0.0 {
            hi = level;
        } else {
            lo = level;
        }
    }

    // Fix the level exactly on the active set, shrinking it if a bin drops out.
    let mut active: Vec<bool> = floors.iter().map(|f| f.is_some_and(|f| f < level)).collect();
    if !active.iter().any(|a| *a) {
        let idx = floors.iter().position(|f| *f == Some(min_floor)).expect("minimum floor comes from a live bin");
        active[idx] = true;
    }
    loop {
        let count = active.iter().filter(|a| **a).count() as f64;
        let floor_sum: f64 = floors.iter().zip(&active).filter(|(_, a)| **a).map(|(f, _)| f.unwrap()).sum();
        level = (budget / df + floor_sum) / count;
        let mut changed = false;
        for (f, a) in floors.iter().zip(active.iter_mut()) {
            if *a && f.unwrap() >= level && count > 1.0 {
                *a = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let psd = floors.iter().zip(&active).map(|(f, a)| if *a { (level - f.unwrap()).max(0.0) } else { 0.0 }).collect();
    Ok(WaterFill { psd, level })
}

/// A complex channel tap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tap {
    pub re: f64,
    pub im: f64,
}

impl Tap {
    pub fn power(&self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

/// Random multipath taps for every `(tx, rx)` pair, indexed `[tx][rx][tap]`.
///
/// Taps are i.i.d. circular-symmetric Gaussian, rescaled so the total tap
/// power is exactly `direct_power` on direct links and `cross_power` on cross
/// links.
pub fn generate_multipath_taps(
    seed: u64,
    users: usize,
    tap_count: usize,
    direct_power: f64,
    cross_power: f64,
) -> Result<Vec<Vec<Vec<Tap>>>> {
    if tap_count == 0 {
        return Err(invalid("tap_count must be at least 1"));
    }
    if users == 0 {
        return Err(invalid("need at least one user"));
    }
    if !(direct_power.is_finite() && direct_power >= 0.0 && cross_power.is_finite() && cross_power >= 0.0) {
        return Err(invalid("link powers must be finite and nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(users);
    for i in 0..users {
        let mut row = Vec::with_capacity(users);
        for j in 0..users {
            let target = if i == j { direct_power } else { cross_power };
            let mut taps: Vec<Tap> = Vec::with_capacity(tap_count);
            let total = loop {
                taps.clear();
                for _ in 0..tap_count {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    taps.push(Tap { re, im });
                }
                let total: f64 = taps.iter().map(Tap::power).sum();
                if total > 0.0 {
                    break total;
                }
            };
            let scale = (target / total).sqrt();
            for t in &mut taps {
                t.re *= scale;
                t.im *= scale;
            }
            row.push(taps);
        }
        out.push(row);
    }
    Ok(out)
}

/// Squared magnitude of the `K`-point DFT of each tap vector.
pub fn channels_from_taps(taps: &[Vec<Vec<Tap>>], grid: &FrequencyGrid) -> Result<ChannelSet> {
    let k = grid.bin_count();
    let nested: Vec<Vec<Vec<f64>>> = taps
        .iter()
        .map(|row| {
            row.iter()
                .map(|link| {
                    (0..k)
                        .map(|bin| {
                            let (mut re, mut im) = (0.0, 0.0);
                            for (l, t) in link.iter().enumerate() {
                                let phase = -2.0 * std::f64::consts::PI * ((bin * l) % k) as f64 / k as f64;
                                let (s, c) = phase.sin_cos();
                                re += t.re * c - t.im * s;
                                im += t.re * s + t.im * c;
                            }
                            re * re + im * im
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    ChannelSet::from_nested(&nested)
}

/// Seeded frequency-selective channel realization.
pub fn generate_multipath_channels(
    seed: u64,
    users: usize,
    grid: &FrequencyGrid,
    tap_count: usize,
    direct_power: f64,
    cross_power: f64,
) -> Result<ChannelSet> {
    let taps = generate_multipath_taps(seed, users, tap_count, direct_power, cross_power)?;
    channels_from_taps(&taps, grid)
}

/// The two-bin, two-user setup of the Concentrate/Spread power game:
/// unit direct gains and noise, cross gain 0.8 from user 1 in bin 1 and 0.4
/// everywhere else, budgets of 10.
pub fn two_channel_example() -> (ChannelSet, NoiseProfile, PowerBudget, FrequencyGrid) {
    let gain2 = vec![vec![vec![1.0, 1.0], vec![0.8, 0.4]], vec![vec![0.4, 0.4], vec![1.0, 1.0]]];
    (
        ChannelSet::from_nested(&gain2).expect("static table"),
        NoiseProfile::uniform(2, 2, 1.0).expect("static noise"),
        PowerBudget::new(vec![10.0, 10.0]).expect("static budget"),
        FrequencyGrid::new(2, 2.0).expect("static grid"),
    )
}
