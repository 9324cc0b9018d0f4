use spectrum_games::continuous::{
    iterative_water_filling, rate_region_sweep, stackelberg_leader_search, GridFill, PowerScenario, RegionMethod,
    RegionSample,
};
use spectrum_games::experiments::{
    channel_ensemble_study, region_comparison, value_of_knowledge, KnowledgeLevel, KnowledgeOptions, KnowledgeProfile,
    KnowledgeScenario,
};
use spectrum_games::learning::{
    empirical_joint_distribution, run_repeated_game, value_of_learning, Learner, LearnerKind, LearnerSpec,
};
use spectrum_games::matrix::{
    build_power_game_grid, is_correlated_equilibrium, mixed_nash_2x2, optimize_ce, pure_nash, stackelberg_finite,
    strictly_dominant_action, JointDistribution, NormalFormGame,
};
use spectrum_games::spectrum::{water_fill, PowerAllocation};
use spectrum_games::Error;

use crate::document::{action_indices, Resolved};
use crate::report::{int, num, text, Report, Table};
use crate::{CeCommand, CliError, Command, GameView, MatrixCommand};

const DEFAULT_ROUNDS: usize = 10_000;
const LEARNING_GRID_LEVELS: usize = 10;
const LEARN_CE_TOL: f64 = 0.05;

pub fn dispatch(cmd: &Command, r: &Resolved) -> Result<Report, CliError> {
    match cmd {
        Command::Waterfill { user } => waterfill(r, *user),
        Command::Iw => iw(r),
        Command::Stackelberg { leader } => stackelberg(r, *leader),
        Command::Pareto { weights } => pareto(r, weights.iter().map(|w| w.0.clone()).collect()),
        Command::Region => region(r),
        Command::Matrix { action: MatrixCommand::Solve } => matrix_solve(r),
        Command::Ce { action: CeCommand::Check { dist, tol } } => ce_check(r, dist.as_ref().map(|d| d.0.clone()), *tol),
        Command::Ce { action: CeCommand::Optimize { weights } } => {
            ce_optimize(r, weights.as_ref().map(|w| w.0.clone()))
        }
        Command::Learn { rounds } => learn(r, *rounds),
        Command::Vok { profiles, game } => vok(r, profiles, *game),
        Command::Ensemble { realizations } => ensemble(r, *realizations),
    }
}

fn power(r: &Resolved) -> Result<&PowerScenario, CliError> {
    r.power.as_ref().ok_or_else(|| CliError::Usage("this command needs a `power` section".into()))
}

fn game(r: &Resolved) -> Result<&NormalFormGame, CliError> {
    r.game.as_ref().ok_or_else(|| CliError::Usage("this command needs a `matrix` section".into()))
}

fn user_index(n: usize, users: usize, what: &str) -> Result<usize, CliError> {
    if n == 0 || n > users {
        return Err(CliError::Usage(format!("--{what} must be between 1 and {users}")));
    }
    Ok(n - 1)
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("({})", parts.join(", "))
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

fn region_table(users: usize) -> Table {
    let headers: Vec<String> =
        std::iter::once("method".to_string()).chain(numbered("p", users)).chain(numbered("R_", users)).collect();
    Table::new("region", headers)
}

fn push_sample(t: &mut Table, s: &RegionSample) {
    let row = std::iter::once(text(s.method.name()))
        .chain(s.params.iter().map(|p| num(*p)))
        .chain(s.rates.iter().map(|x| num(*x)))
        .collect();
    t.push(row);
}

fn allocation_table(alloc: &PowerAllocation) -> Table {
    let mut t = Table::new("allocation", ["user", "k", "psd"]);
    for n in 0..alloc.user_count() {
        for (k, p) in alloc.row(n).iter().enumerate() {
            t.push(vec![int(n + 1), int(k), num(*p)]);
        }
    }
    t
}

fn distribution_table(game: &NormalFormGame, dist: &JointDistribution) -> Table {
    let mut t = Table::new("distribution", ["profile", "prob"]);
    for (i, p) in dist.probabilities().iter().enumerate() {
        t.push(vec![text(game.profile_label(&game.profile_at(i))), num(*p)]);
    }
    t
}

fn waterfill(r: &Resolved, user: usize) -> Result<Report, CliError> {
    let sc = power(r)?;
    let u = user_index(user, sc.user_count(), "user")?;
    let wf = water_fill(sc.channels.direct(u), sc.noise.row(u), sc.budgets.get(u), &sc.grid)?;
    let mut alloc = PowerAllocation::zeros(sc.user_count(), sc.bin_count());
    alloc.set_row(u, &wf.psd)?;
    let rate = sc.rates(&alloc)?[u];
    let mut t = Table::new("waterfill", ["k", "psd"]);
    for (k, p) in wf.psd.iter().enumerate() {
        t.push(vec![int(k), num(*p)]);
    }
    let mut rep = Report { tables: vec![t], ..Report::default() };
    rep.line(format!("user {user}: water level {:.6}, rate {rate:.6}", wf.level));
    Ok(rep)
}

fn iw(r: &Resolved) -> Result<Report, CliError> {
    let sc = power(r)?;
    let res = iterative_water_filling(sc, r.solver.iw)?;
    let mut t = region_table(sc.user_count());
    push_sample(
        &mut t,
        &RegionSample {
            method: RegionMethod::Iw,
            params: sc.budgets.as_slice().to_vec(),
            rates: res.rates.clone(),
            converged: res.converged,
        },
    );
    let mut rep = Report { tables: vec![t, allocation_table(&res.allocation)], ..Report::default() };
    if res.converged {
        rep.line(format!("IW converged after {} sweeps (residual {:.3e})", res.iterations, res.residual));
    } else {
        rep.line(format!("IW did not converge within {} sweeps (residual {:.3e})", res.iterations, res.residual));
    }
    rep.line(format!("rates {}", fmt_vec(&res.rates)));
    Ok(rep)
}

fn stackelberg(r: &Resolved, leader: usize) -> Result<Report, CliError> {
    let sc = power(r)?;
    let l = user_index(leader, sc.user_count(), "leader")?;
    let st = stackelberg_leader_search(sc, l, &r.solver)?;
    let budgets = sc.budgets.as_slice().to_vec();
    let mut t = region_table(sc.user_count());
    push_sample(
        &mut t,
        &RegionSample {
            method: RegionMethod::Iw,
            params: budgets.clone(),
            rates: st.nash_rates.clone(),
            converged: st.nash_converged,
        },
    );
    push_sample(
        &mut t,
        &RegionSample { method: RegionMethod::Stackelberg, params: budgets, rates: st.rates.clone(), converged: true },
    );
    let mut rep = Report { tables: vec![t, allocation_table(&st.allocation())], ..Report::default() };
    rep.line(format!("leader: user {leader}, {} candidates evaluated", st.candidates_evaluated));
    rep.line(format!("IW rates {}", fmt_vec(&st.nash_rates)));
    rep.line(format!("Stackelberg rates {}", fmt_vec(&st.rates)));
    if !st.nash_converged {
        rep.line("warning: IW starting point did not converge");
    }
    Ok(rep)
}

fn pareto(r: &Resolved, weights: Vec<Vec<f64>>) -> Result<Report, CliError> {
    let sc = power(r)?;
    let weights = if !weights.is_empty() {
        weights
    } else {
        match r.doc.sweep.as_ref().map(|s| s.weights.clone()).filter(|w| !w.is_empty()) {
            Some(w) => w,
            None => vec![vec![1.0; sc.user_count()]],
        }
    };
    let samples = rate_region_sweep(RegionMethod::Pareto, sc, &weights, &r.solver)?;
    let mut t = region_table(sc.user_count());
    for s in &samples {
        push_sample(&mut t, s);
    }
    let mut rep = Report { tables: vec![t], ..Report::default() };
    for s in &samples {
        rep.line(format!("weights {} -> rates {}", fmt_vec(&s.params), fmt_vec(&s.rates)));
    }
    Ok(rep)
}

fn region(r: &Resolved) -> Result<Report, CliError> {
    let sc = power(r)?;
    let sweep = r.doc.sweep.clone().unwrap_or(crate::document::SweepSection { budget_pairs: vec![], weights: vec![] });
    let budgets = if sweep.budget_pairs.is_empty() { vec![sc.budgets.as_slice().to_vec()] } else { sweep.budget_pairs };
    let weights =
        if sweep.weights.is_empty() { vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]] } else { sweep.weights };
    let samples = region_comparison(sc, &budgets, &weights, &r.solver)?;
    let mut t = region_table(sc.user_count());
    for s in &samples {
        push_sample(&mut t, s);
    }
    let mut rep = Report { tables: vec![t], ..Report::default() };
    let unconverged = samples.iter().filter(|s| !s.converged).count();
    rep.line(format!("{} region samples, {unconverged} from unconverged IW runs", samples.len()));
    Ok(rep)
}

fn matrix_solve(r: &Resolved) -> Result<Report, CliError> {
    let g = game(r)?;
    let players = g.player_count();
    let headers: Vec<String> =
        ["result".to_string(), "profile".to_string()].into_iter().chain(numbered("u_", players)).collect();
    let mut t = Table::new("solution", headers);
    let mut rep = Report::default();
    let row = |result: String, profile: String, utilities: &[f64]| {
        [text(result), text(profile)].into_iter().chain(utilities.iter().map(|u| num(*u))).collect::<Vec<_>>()
    };

    let nash = pure_nash(g);
    for p in &nash {
        t.push(row("pure_nash".into(), g.profile_label(p), g.utilities(p)));
    }
    let labels: Vec<String> = nash.iter().map(|p| g.profile_label(p)).collect();
    rep.line(format!("pure NE: {{{}}}", labels.join(", ")));

    for n in 0..players {
        if let Some(a) = strictly_dominant_action(g, n) {
            let blanks = vec![serde_json::Value::Null; players];
            t.push(
                [text(format!("dominant_{}", n + 1)), text(g.action_name(n, a))].into_iter().chain(blanks).collect(),
            );
            rep.line(format!("strictly dominant action for user {}: {}", n + 1, g.action_name(n, a)));
        }
    }

    if players == 2 {
        let shape = (g.action_count(0), g.action_count(1));
        if shape == (2, 2) {
            match mixed_nash_2x2(g) {
                Ok(m) => {
                    let p: Vec<f64> = (0..2).map(|n| m.strategy.player(n)[0]).collect();
                    t.push(row("mixed_nash".into(), fmt_vec(&p), &m.values));
                    rep.line(format!(
                        "mixed NE: user 1 plays {} w.p. {:.4}, user 2 plays {} w.p. {:.4}, value {}",
                        g.action_name(0, 0),
                        p[0],
                        g.action_name(1, 0),
                        p[1],
                        fmt_vec(&m.values)
                    ));
                }
                Err(Error::Degenerate(why)) => rep.line(format!("mixed NE: none in the interior ({why})")),
                Err(e) => return Err(e.into()),
            }
        }
        for leader in 0..2 {
            let st = stackelberg_finite(g, leader)?;
            t.push(row(format!("stackelberg_leader_{}", leader + 1), g.profile_label(&st.profile), &st.utilities));
            rep.line(format!(
                "Stackelberg with user {} leading: {} value {}",
                leader + 1,
                g.profile_label(&st.profile),
                fmt_vec(&st.utilities)
            ));
        }
    }
    rep.tables.push(t);
    Ok(rep)
}

fn ce_check(r: &Resolved, dist: Option<Vec<f64>>, tol: Option<f64>) -> Result<Report, CliError> {
    let g = game(r)?;
    let ce = r.doc.ce.clone();
    let probs = dist
        .or_else(|| ce.as_ref().and_then(|c| c.distribution.clone()))
        .ok_or_else(|| CliError::Usage("no distribution: pass --dist or set `ce.distribution`".into()))?;
    let tol = tol.or(ce.and_then(|c| c.tol)).unwrap_or(1e-9);
    let dist = JointDistribution::new(probs)?;
    let check = is_correlated_equilibrium(g, &dist, tol)?;
    let mut verdict = Table::new("ce_check", ["is_ce", "max_violation", "tol"]);
    verdict.push(vec![serde_json::Value::Bool(check.is_ce), num(check.max_violation), num(tol)]);
    let mut rep = Report { tables: vec![distribution_table(g, &dist), verdict], ..Report::default() };
    rep.line(format!(
        "{} a correlated equilibrium (largest obedience gain {:.3e}, tol {tol:e})",
        if check.is_ce { "is" } else { "is not" },
        check.max_violation
    ));
    rep.line(format!("expected utilities {}", fmt_vec(&dist.expected_utilities(g))));
    Ok(rep)
}

fn ce_optimize(r: &Resolved, weights: Option<Vec<f64>>) -> Result<Report, CliError> {
    let g = game(r)?;
    let weights = weights
        .or_else(|| r.doc.ce.as_ref().and_then(|c| c.weights.clone()))
        .unwrap_or_else(|| vec![1.0; g.player_count()]);
    let opt = optimize_ce(g, &weights)?;
    let mut rep = Report { tables: vec![distribution_table(g, &opt.distribution)], ..Report::default() };
    rep.line(format!("optimal weighted value {:.6} for weights {}", opt.value, fmt_vec(&weights)));
    rep.line(format!("expected utilities {}", fmt_vec(&opt.distribution.expected_utilities(g))));
    Ok(rep)
}

fn learn(r: &Resolved, rounds: Option<usize>) -> Result<Report, CliError> {
    let built;
    let g = match (&r.game, &r.power) {
        (Some(g), _) => g,
        (None, Some(sc)) => {
            built = build_power_game_grid(sc, LEARNING_GRID_LEVELS, GridFill::Exact)?;
            &built
        }
        (None, None) => return Err(CliError::Usage("learn needs a `matrix` or `power` section".into())),
    };
    let n = g.player_count();
    let specs = r.doc.learners.clone().unwrap_or_else(|| vec![LearnerSpec::of(LearnerKind::RegretMatching); n]);
    let learners = specs.iter().enumerate().map(|(i, s)| Learner::new(g, i, *s)).collect::<Result<Vec<_>, _>>()?;
    let learning = r.doc.learning.clone();
    let rounds = rounds.or(learning.as_ref().map(|l| l.rounds)).unwrap_or(DEFAULT_ROUNDS);
    let run = run_repeated_game(g, learners, rounds, r.seed)?;
    let trace = &run.trace;

    let headers: Vec<String> =
        std::iter::once("t".to_string()).chain(numbered("a_", n)).chain(numbered("u_", n)).collect();
    let mut tt = Table::new("trace", headers);
    for t in 0..trace.rounds() {
        let row = std::iter::once(int(t + 1))
            .chain(trace.profile(t).iter().map(|a| int(*a)))
            .chain(trace.utilities(t).iter().map(|u| num(*u)))
            .collect();
        tt.push(row);
    }
    let dist = empirical_joint_distribution(trace, g)?;
    let mut regret = Table::new("regret", ["player", "action", "regret"]);
    for p in 0..n {
        for (a, x) in trace.regrets(trace.rounds() - 1, p).iter().enumerate() {
            regret.push(vec![int(p + 1), text(g.action_name(p, a)), num(*x)]);
        }
    }
    let (start, len) = learning.and_then(|l| l.window).map_or((0, rounds), |[s, l]| (s, l));
    let avg = value_of_learning(trace, start, len)?;
    let check = is_correlated_equilibrium(g, &dist, LEARN_CE_TOL)?;

    let mut rep = Report { tables: vec![tt, distribution_table(g, &dist), regret], ..Report::default() };
    let kinds: Vec<String> = specs.iter().map(|s| format!("{:?}", s.kind)).collect();
    rep.line(format!("{rounds} rounds, seed {}, learners [{}]", r.seed, kinds.join(", ")));
    rep.line(format!("time-average utilities over rounds {}..{}: {}", start + 1, start + len, fmt_vec(&avg)));
    rep.line(format!("largest final regret {:.3e}", trace.final_max_regret()));
    rep.line(format!(
        "empirical distribution {} the CE check at tol {LEARN_CE_TOL} (largest obedience gain {:.3e})",
        if check.is_ce { "passes" } else { "fails" },
        check.max_violation
    ));
    Ok(rep)
}

fn default_profiles(users: usize) -> Vec<KnowledgeProfile> {
    let private = vec![KnowledgeLevel::Private; users];
    let mut leader = private.clone();
    leader[0] = KnowledgeLevel::HeterogeneousLeader;
    [private, leader, vec![KnowledgeLevel::Complete; users]]
        .into_iter()
        .map(|l| KnowledgeProfile::new(l).expect("static profiles are valid"))
        .collect()
}

fn vok(r: &Resolved, profiles: &[KnowledgeProfile], view: Option<GameView>) -> Result<Report, CliError> {
    let section = r.doc.knowledge.clone();
    let view = match view {
        Some(v) => v,
        None if r.game.is_some() => GameView::Finite,
        None => GameView::Power,
    };
    let (scenario, users) = match view {
        GameView::Finite => {
            let g = game(r)?;
            let start = match section.as_ref().and_then(|k| k.start.clone()) {
                Some(names) => {
                    action_indices(g, &names).map_err(|e| CliError::Config(format!("knowledge.start: {e}")))?
                }
                None => vec![0; g.player_count()],
            };
            (KnowledgeScenario::Finite { game: g, start }, g.player_count())
        }
        GameView::Power => {
            let sc = power(r)?;
            (KnowledgeScenario::Power(sc), sc.user_count())
        }
    };
    let profiles = if !profiles.is_empty() {
        profiles.to_vec()
    } else {
        match section.as_ref().map(|k| k.profiles.clone()).filter(|p| !p.is_empty()) {
            Some(p) => p,
            None => default_profiles(users),
        }
    };
    let opts = KnowledgeOptions { solver: r.solver, welfare_weights: section.and_then(|k| k.welfare_weights) };
    let headers: Vec<String> =
        ["knowledge".to_string(), "outcome".to_string()].into_iter().chain(numbered("U_", users)).collect();
    let mut t = Table::new("knowledge", headers);
    let mut rep = Report::default();
    for p in &profiles {
        let v = value_of_knowledge(&scenario, p, &opts)?;
        let outcome = match (&scenario, &v.profile) {
            (KnowledgeScenario::Finite { game, .. }, Some(joint)) => game.profile_label(joint),
            _ => match p.regime() {
                spectrum_games::experiments::KnowledgeRegime::AllPrivate => "iw".to_string(),
                spectrum_games::experiments::KnowledgeRegime::Leader(_) => "stackelberg".to_string(),
                spectrum_games::experiments::KnowledgeRegime::AllComplete => "pareto".to_string(),
            },
        };
        t.push(
            [text(p.to_string()), text(outcome.clone())]
                .into_iter()
                .chain(v.utilities.iter().map(|u| num(*u)))
                .collect(),
        );
        rep.line(format!("{p} -> {} at {outcome}", fmt_vec(&v.utilities)));
        if !v.converged {
            rep.line(format!("warning: IW did not converge for {p}"));
        }
    }
    rep.tables.push(t);
    Ok(rep)
}

fn ensemble(r: &Resolved, realizations: Option<usize>) -> Result<Report, CliError> {
    let mut cfg = r.doc.ensemble.clone().unwrap_or_default();
    if r.seed_given {
        cfg.seed = r.seed;
    }
    if let Some(m) = realizations {
        cfg.realizations = m;
    }
    let report = channel_ensemble_study(&cfg, &r.solver)?;
    let mut t = Table::new("ensemble", ["idx", "ratio_1", "ratio_2"]);
    for real in &report.realizations {
        t.push(vec![int(real.index), num(real.ratios[0]), num(real.ratios[1])]);
    }
    t.push(vec![text("mean"), num(report.mean_ratios[0]), num(report.mean_ratios[1])]);
    let mut h = Table::new("histogram", ["user", "lo", "hi", "count"]);
    for (u, hist) in report.histograms.iter().enumerate() {
        for (i, c) in hist.counts.iter().enumerate() {
            h.push(vec![int(u + 1), num(hist.edges[i]), num(hist.edges[i + 1]), int(*c)]);
        }
    }
    let mut rep = Report { tables: vec![t, h], ..Report::default() };
    rep.line(format!(
        "{} realizations (seed {}), {} redrawn for IW non-convergence",
        report.realizations.len(),
        cfg.seed,
        report.skipped
    ));
    rep.line(format!("mean Stackelberg/IW rate ratios {}", fmt_vec(&report.mean_ratios)));
    Ok(rep)
}
