//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs as a plain binary (`harness = false`) and exits non-zero if any
//! criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectrum_games::continuous::{
    grid_rate_frontier, iterative_water_filling, stackelberg_leader_search, GridFill, IwOptions, PowerScenario,
    SolverOptions,
};
use spectrum_games::experiments::{
    channel_ensemble_study, value_of_knowledge, EnsembleConfig, KnowledgeOptions, KnowledgeProfile, KnowledgeScenario,
};
use spectrum_games::learning::{
    empirical_joint_distribution, run_repeated_game, value_of_learning, Learner, LearnerKind, LearnerSpec,
};
use spectrum_games::matrix::game::{AGGRESS, BACKOFF, CONCENTRATE, SPREAD};
use spectrum_games::matrix::{
    build_contention_game, build_power_game_2x2, build_power_game_grid, is_correlated_equilibrium, mixed_nash_2x2,
    optimize_ce, pure_nash, stackelberg_finite, strictly_dominant_action, JointDistribution, NormalFormGame,
};
use spectrum_games::spectrum::{two_channel_example, water_fill, FrequencyGrid};

type Failure = Box<dyn std::error::Error>;
type Outcome = Result<String, Failure>;
type Criterion = (&'static str, fn() -> Outcome);

fn fig6_scenario() -> PowerScenario {
    let (ch, noise, budgets, grid) = two_channel_example();
    PowerScenario::new(grid, ch, noise, budgets).unwrap()
}

fn fig6_game() -> NormalFormGame {
    build_power_game_2x2(&fig6_scenario(), [0, 1]).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), Failure> {
    if ok {
        Ok(())
    } else {
        Err(msg().into())
    }
}

fn within(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn c1_fig6_payoffs() -> Outcome {
    let g = fig6_game();
    let cells = [
        ([CONCENTRATE, SPREAD], [2.12, 3.22]),
        ([CONCENTRATE, CONCENTRATE], [3.46, 3.46]),
        ([SPREAD, SPREAD], [2.83, 2.42]),
        ([SPREAD, CONCENTRATE], [3.59, 2.12]),
    ];
    let mut worst: f64 = 0.0;
    for (p, want) in cells {
        let got = g.utilities(&p);
        for (x, y) in got.iter().zip(want) {
            worst = worst.max((x - y).abs());
        }
        ensure(within(got, &want, 0.01), || format!("{} = {got:?}, want {want:?}", g.profile_label(&p)))?;
    }
    Ok(format!("8 entries, worst deviation {worst:.4}"))
}

fn c2_fig6_chain() -> Outcome {
    let g = fig6_game();
    ensure(strictly_dominant_action(&g, 0) == Some(SPREAD), || "user 1 has no dominant Spread".into())?;
    let ne = pure_nash(&g);
    ensure(ne == vec![vec![SPREAD, SPREAD]], || format!("pure NE {ne:?}"))?;
    let ne_u = g.utilities(&ne[0]);
    ensure(within(ne_u, &[2.83, 2.42], 0.01), || format!("NE value {ne_u:?}"))?;
    let st = stackelberg_finite(&g, 0)?;
    ensure(st.profile == vec![CONCENTRATE, CONCENTRATE], || format!("leader outcome {:?}", st.profile))?;
    ensure(within(&st.utilities, &[3.46, 3.46], 0.01), || format!("leader value {:?}", st.utilities))?;
    Ok(format!(
        "dominant Spread, NE ({:.3}, {:.3}), leader (C,C) ({:.3}, {:.3})",
        ne_u[0], ne_u[1], st.utilities[0], st.utilities[1]
    ))
}

fn c3_contention() -> Outcome {
    let g = build_contention_game();
    let mut ne = pure_nash(&g);
    ne.sort();
    ensure(ne == vec![vec![AGGRESS, BACKOFF], vec![BACKOFF, AGGRESS]], || format!("pure NE {ne:?}"))?;
    let mixed = mixed_nash_2x2(&g)?;
    for n in 0..2 {
        let p = mixed.strategy.player(n)[AGGRESS];
        ensure((p - 1.0 / 3.0).abs() <= 1e-9, || format!("player {n} aggress prob {p}"))?;
        ensure((mixed.values[n] - 14.0 / 3.0).abs() <= 1e-9, || format!("mixed value {:?}", mixed.values))?;
    }
    let three =
        JointDistribution::uniform_over(&g, &[vec![AGGRESS, BACKOFF], vec![BACKOFF, AGGRESS], vec![BACKOFF, BACKOFF]])?;
    let check = is_correlated_equilibrium(&g, &three, 1e-12)?;
    ensure(check.is_ce, || format!("uniform-over-three violation {}", check.max_violation))?;
    let v = three.expected_utilities(&g);
    ensure(v == vec![5.0, 5.0], || format!("CE value {v:?}"))?;
    Ok(format!("mixed p = {:.12}, value {:.12}, CE value (5, 5)", mixed.strategy.player(0)[0], mixed.values[0]))
}

fn c4_ce_lp() -> Outcome {
    let g = build_contention_game();
    let opt = optimize_ce(&g, &[1.0, 1.0])?;
    ensure((opt.value - 10.5).abs() <= 1e-6, || format!("LP value {}", opt.value))?;
    let check = is_correlated_equilibrium(&g, &opt.distribution, 1e-9)?;
    ensure(check.is_ce, || format!("LP optimum violates obedience by {}", check.max_violation))?;
    // Exhaustive oracle over the 0.01-step grid of the 3-simplex.
    let steps = 100usize;
    let mut best = f64::NEG_INFINITY;
    let mut points = 0usize;
    for a in 0..=steps {
        for b in 0..=steps - a {
            for c in 0..=steps - a - b {
                let d = steps - a - b - c;
                let probs: Vec<f64> = [a, b, c, d].iter().map(|x| *x as f64 / steps as f64).collect();
                let dist = JointDistribution::new(probs)?;
                points += 1;
                if is_correlated_equilibrium(&g, &dist, 1e-9)?.is_ce {
                    best = best.max(dist.expected_utilities(&g).iter().sum());
                }
            }
        }
    }
    ensure((best - 10.5).abs() <= 0.05, || format!("grid oracle best {best}"))?;
    Ok(format!("LP {:.9}, grid oracle {best:.4} over {points} points", opt.value))
}

fn rate(psd: &[f64], gain: &[f64], noise: &[f64], df: f64) -> f64 {
    psd.iter().zip(gain).zip(noise).map(|((p, g), s)| df * (1.0 + p * g / s).log2()).sum()
}

fn c5_water_fill_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sizes = [2usize, 8, 64];
    let (mut worst_budget, mut worst_kkt): (f64, f64) = (0.0, 0.0);
    for i in 0..200 {
        let k = sizes[i % sizes.len()];
        let grid = FrequencyGrid::new(k, rng.random_range(0.5..(2.0 * k as f64)))?;
        let df = grid.bin_width();
        let gain: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..3.0)).collect();
        let noise: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..2.0)).collect();
        let budget = rng.random_range(0.1..50.0);
        let wf = water_fill(&gain, &noise, budget, &grid)?;

        let spent: f64 = wf.psd.iter().sum::<f64>() * df;
        let rel = (spent - budget).abs() / budget;
        worst_budget = worst_budget.max(rel);
        ensure(rel <= 1e-9, || format!("instance {i}: spent {spent}, budget {budget}"))?;

        for (b, ((p, g), s)) in wf.psd.iter().zip(&gain).zip(&noise).enumerate() {
            let floor = s / g;
            let gap = if *p > 0.0 { (p + floor - wf.level).abs() } else { (wf.level - floor).max(0.0) };
            worst_kkt = worst_kkt.max(gap);
            ensure(gap <= 1e-6, || format!("instance {i} bin {b}: KKT gap {gap}"))?;
        }

        let best = rate(&wf.psd, &gain, &noise, df);
        for j in 0..1000 {
            let raw: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln()).collect();
            let total: f64 = raw.iter().sum();
            let used = budget * rng.random::<f64>().sqrt();
            let psd: Vec<f64> = raw.iter().map(|x| x / total * used / df).collect();
            let r = rate(&psd, &gain, &noise, df);
            ensure(r <= best + 1e-9 * best.max(1.0), || format!("instance {i} allocation {j}: {r} beats {best}"))?;
        }
    }
    Ok(format!("200 instances, worst budget rel {worst_budget:.1e}, worst KKT gap {worst_kkt:.1e}"))
}

fn ensemble_scenarios(count: usize) -> Result<Vec<PowerScenario>, Failure> {
    let cfg = EnsembleConfig::default();
    (0..count).map(|i| Ok(cfg.scenario(cfg.realization_seed(i, 0))?)).collect()
}

fn c6_iw_fixed_point() -> Outcome {
    let mut converged = 0;
    let mut worst: f64 = 0.0;
    for (i, sc) in ensemble_scenarios(50)?.iter().enumerate() {
        let iw = iterative_water_filling(sc, IwOptions::default())?;
        if !iw.converged {
            continue;
        }
        converged += 1;
        for n in 0..sc.user_count() {
            let br = sc.best_response(n, &iw.allocation)?;
            let gap = br.psd.iter().zip(iw.allocation.row(n)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst = worst.max(gap);
            ensure(gap <= 1e-6, || format!("ensemble {i} user {n}: best-response gap {gap}"))?;
        }
    }
    ensure(converged > 0, || "IW converged on none of the 50 ensembles".into())?;
    Ok(format!("{converged}/50 converged, worst gap {worst:.1e}"))
}

fn c7_leader_advantage() -> Outcome {
    let opts = SolverOptions::default();
    let mut checked = 0;
    for (i, sc) in ensemble_scenarios(50)?.iter().enumerate() {
        let iw = iterative_water_filling(sc, opts.iw)?;
        if !iw.converged {
            continue;
        }
        checked += 1;
        let st = stackelberg_leader_search(sc, 0, &opts)?;
        ensure(st.rates[0] >= iw.rates[0] - 1e-9, || {
            format!("ensemble {i}: leader {} below IW {}", st.rates[0], iw.rates[0])
        })?;
    }
    let report = channel_ensemble_study(&EnsembleConfig::default(), &opts)?;
    let m = &report.mean_ratios;
    ensure(m[0] > 1.0 && m[1] > 1.0, || format!("mean ratios {m:?}"))?;
    Ok(format!("leader >= IW on {checked}/50, mean ratios ({:.4}, {:.4}) over 100", m[0], m[1]))
}

fn c8_pareto_dominance() -> Outcome {
    let mut misses = Vec::new();
    for (k, levels) in [(2usize, 65usize), (4, 12)] {
        let cfg = EnsembleConfig {
            bin_count: k,
            total_band: k as f64,
            budgets: vec![k as f64, k as f64],
            ..EnsembleConfig::default()
        };
        let opts = SolverOptions { levels, ..SolverOptions::default() };
        for i in 0..10 {
            let sc = cfg.scenario(cfg.realization_seed(i, 0))?;
            let iw = iterative_water_filling(&sc, opts.iw)?;
            let frontier = grid_rate_frontier(&sc, &opts)?;
            let covered = frontier.iter().any(|p| p.iter().zip(&iw.rates).all(|(a, b)| *a >= b - 1e-9));
            if !covered {
                let shortfall = frontier
                    .iter()
                    .map(|p| p.iter().zip(&iw.rates).map(|(a, b)| (b - a).max(0.0)).fold(0.0, f64::max))
                    .fold(f64::INFINITY, f64::min);
                misses.push(format!("K={k} seed {i} short by {shortfall:.2e}"));
            }
        }
    }
    if misses.is_empty() {
        Ok("frontier covers IW on 20/20 channels".into())
    } else {
        Err(format!("{}/20 uncovered: {}", misses.len(), misses.join("; ")).into())
    }
}

fn rm_run(g: &NormalFormGame, rounds: usize, seed: u64) -> Result<spectrum_games::learning::RepeatedGameRun, Failure> {
    let learners = (0..2)
        .map(|i| Learner::new(g, i, LearnerSpec::of(LearnerKind::RegretMatching)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(run_repeated_game(g, learners, rounds, seed)?)
}

fn c9_regret_matching() -> Outcome {
    const T: usize = 200_000;
    let g = build_contention_game();
    let mut worst_regret: f64 = 0.0;
    for seed in 0..5 {
        let run = rm_run(&g, T, seed)?;
        let regret = run.trace.final_max_regret();
        worst_regret = worst_regret.max(regret);
        ensure(regret <= 0.05, || format!("contention seed {seed}: regret {regret}"))?;
        let dist = empirical_joint_distribution(&run.trace, &g)?;
        let check = is_correlated_equilibrium(&g, &dist, 0.05)?;
        ensure(check.is_ce, || format!("contention seed {seed}: CE violation {}", check.max_violation))?;
    }
    let sc = fig6_scenario();
    let grid_game = build_power_game_grid(&sc, 10, GridFill::Exact)?;
    let nash = iterative_water_filling(&sc, IwOptions::default())?.rates;
    let mut worst_margin = f64::INFINITY;
    for seed in 0..5 {
        let run = rm_run(&grid_game, T, seed)?;
        let avg = value_of_learning(&run.trace, 0, T)?;
        for n in 0..2 {
            worst_margin = worst_margin.min(avg[n] - nash[n]);
        }
        ensure(avg.iter().zip(&nash).all(|(a, b)| *a >= b - 0.05), || {
            format!("power seed {seed}: average {avg:?} vs IW {nash:?}")
        })?;
    }
    Ok(format!("max regret {worst_regret:.2e}, power game margin over IW {worst_margin:+.4}"))
}

fn c10_value_of_knowledge() -> Outcome {
    let g = fig6_game();
    let scenario = KnowledgeScenario::Finite { game: &g, start: vec![CONCENTRATE, CONCENTRATE] };
    let opts = KnowledgeOptions::default();
    let private = value_of_knowledge(&scenario, &"priv,priv".parse::<KnowledgeProfile>()?, &opts)?.utilities;
    let leader = value_of_knowledge(&scenario, &"heter,priv".parse::<KnowledgeProfile>()?, &opts)?.utilities;
    ensure(within(&private, &[2.83, 2.42], 0.01), || format!("priv,priv {private:?}"))?;
    ensure(within(&leader, &[3.46, 3.46], 0.01), || format!("heter,priv {leader:?}"))?;
    ensure(leader.iter().zip(&private).all(|(a, b)| a > b), || "no componentwise improvement".into())?;
    Ok(format!("priv ({:.3}, {:.3}) < heter ({:.3}, {:.3})", private[0], private[1], leader[0], leader[1]))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run_cli(args: &[&str], config: &Path, out: &Path) -> Result<Vec<u8>, Failure> {
    let output = Command::new(env!("CARGO_BIN_EXE_spectrum-games"))
        .args(args)
        .arg("--config")
        .arg(config)
        .args(["--seed", "7", "--out"])
        .arg(out)
        .output()?;
    ensure(output.status.success(), || {
        format!("{args:?} exited {:?}: {}", output.status.code(), String::from_utf8_lossy(&output.stderr))
    })?;
    Ok(output.stdout)
}

fn snapshot(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, Failure> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let bytes = std::fs::read(&path)?;
        files.push((path.file_name().unwrap().to_string_lossy().into_owned(), bytes));
    }
    files.sort();
    Ok(files)
}

fn c11_determinism() -> Outcome {
    let runs: [(&[&str], &str); 12] = [
        (&["waterfill"], "fig6.json"),
        (&["iw"], "fig6.json"),
        (&["stackelberg"], "fig6.json"),
        (&["pareto"], "fig6.json"),
        (&["region"], "fig6.json"),
        (&["matrix", "solve"], "contention.json"),
        (&["ce", "check"], "contention.json"),
        (&["ce", "optimize"], "contention.json"),
        (&["learn", "--rounds", "20000"], "contention.json"),
        (&["learn"], "fig6.json"),
        (&["vok"], "fig6.json"),
        (&["ensemble", "--realizations", "20"], "ensemble_default.json"),
    ];
    let tmp = tempfile::tempdir()?;
    let mut files = 0;
    for (i, (args, config)) in runs.iter().enumerate() {
        let a = tmp.path().join(format!("{i}a"));
        let b = tmp.path().join(format!("{i}b"));
        let out_a = run_cli(args, &fixture(config), &a)?;
        let out_b = run_cli(args, &fixture(config), &b)?;
        ensure(out_a == out_b, || format!("{args:?}: stdout differs"))?;
        let (sa, sb) = (snapshot(&a)?, snapshot(&b)?);
        ensure(!sa.is_empty() && sa == sb, || format!("{args:?}: output files differ"))?;
        files += sa.len();
    }
    Ok(format!("{} subcommand runs, {files} files byte-identical", runs.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("two-bin payoff matrix", c1_fig6_payoffs),
        ("two-bin analysis chain", c2_fig6_chain),
        ("contention game equilibria", c3_contention),
        ("CE linear program vs grid oracle", c4_ce_lp),
        ("water-filling properties", c5_water_fill_properties),
        ("IW fixed point", c6_iw_fixed_point),
        ("leader advantage", c7_leader_advantage),
        ("grid frontier dominates IW", c8_pareto_dominance),
        ("regret-matching convergence", c9_regret_matching),
        ("value of knowledge", c10_value_of_knowledge),
        ("CLI determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
