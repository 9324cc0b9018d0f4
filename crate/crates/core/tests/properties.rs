use proptest::prelude::*;

use spectrum_games::continuous::{
    iterative_water_filling, weighted_sum_optimize, IwOptions, PowerScenario, SolverOptions,
};
use spectrum_games::experiments::{channel_ensemble_study, EnsembleConfig};
use spectrum_games::learning::{
    empirical_joint_distribution, regret_vector, run_repeated_game, Learner, LearnerKind, LearnerSpec,
};
use spectrum_games::matrix::{is_correlated_equilibrium, optimize_ce, NormalFormGame};
use spectrum_games::spectrum::{generate_multipath_channels, water_fill, FrequencyGrid, NoiseProfile, PowerBudget};
use spectrum_games::Execution;

fn rate(psd: &[f64], gain: &[f64], noise: &[f64], df: f64) -> f64 {
    psd.iter().zip(gain).zip(noise).map(|((p, g), s)| df * (1.0 + p * g / s).log2()).sum()
}

fn bins() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..12).prop_flat_map(|k| (prop::collection::vec(0.0f64..4.0, k), prop::collection::vec(0.01f64..3.0, k)))
}

proptest! {
    #[test]
    fn water_fill_spends_budget_and_beats_uniform(
        (gain, noise) in bins(),
        budget in 0.01f64..100.0,
        band in 0.1f64..20.0,
    ) {
        prop_assume!(gain.iter().any(|g| *g > 0.0));
        let grid = FrequencyGrid::new(gain.len(), band).unwrap();
        let df = grid.bin_width();
        let wf = water_fill(&gain, &noise, budget, &grid).unwrap();
        let spent: f64 = wf.psd.iter().sum::<f64>() * df;
        prop_assert!((spent - budget).abs() <= 1e-9 * budget);
        prop_assert!(wf.psd.iter().all(|p| *p >= 0.0));
        for ((p, g), _) in wf.psd.iter().zip(&gain).zip(&noise) {
            if *g == 0.0 {
                prop_assert_eq!(*p, 0.0);
            }
        }
        let uniform = vec![budget / (df * gain.len() as f64); gain.len()];
        prop_assert!(rate(&wf.psd, &gain, &noise, df) >= rate(&uniform, &gain, &noise, df) - 1e-9);
    }

    #[test]
    fn water_fill_is_scale_covariant_in_band(
        (gain, noise) in bins(),
        budget in 0.1f64..50.0,
    ) {
        prop_assume!(gain.iter().any(|g| *g > 0.0));
        // Doubling bandwidth and budget together leaves the PSD unchanged.
        let k = gain.len();
        let a = water_fill(&gain, &noise, budget, &FrequencyGrid::new(k, 1.0).unwrap()).unwrap();
        let b = water_fill(&gain, &noise, 2.0 * budget, &FrequencyGrid::new(k, 2.0).unwrap()).unwrap();
        for (x, y) in a.psd.iter().zip(&b.psd) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn iw_fixed_point_on_random_channels(seed in any::<u64>(), k in 2usize..10) {
        let grid = FrequencyGrid::new(k, k as f64).unwrap();
        let channels = generate_multipath_channels(seed, 2, &grid, 3, 1.0, 0.3).unwrap();
        let sc = PowerScenario::new(
            grid,
            channels,
            NoiseProfile::uniform(2, k, 0.1).unwrap(),
            PowerBudget::new(vec![k as f64, k as f64]).unwrap(),
        )
        .unwrap();
        let iw = iterative_water_filling(&sc, IwOptions::default()).unwrap();
        prop_assume!(iw.converged);
        prop_assert!(sc.best_response_gap(&iw.allocation).unwrap() <= 1e-6);
        iw.allocation.check_budget(&sc.budgets, &sc.grid).unwrap();
    }

    #[test]
    fn regret_matching_regret_shrinks(payoffs in prop::collection::vec(-5.0f64..5.0, 8), seed in any::<u64>()) {
        let names = vec![vec!["a".to_string(), "b".to_string()]; 2];
        let g = NormalFormGame::from_fn(names, |p| {
            let i = 2 * (2 * p[0] + p[1]);
            vec![payoffs[i], payoffs[i + 1]]
        })
        .unwrap();
        let learners = (0..2)
            .map(|i| Learner::new(&g, i, LearnerSpec::of(LearnerKind::RegretMatching)).unwrap())
            .collect();
        let run = run_repeated_game(&g, learners, 20_000, seed).unwrap();
        let span = 10.0;
        prop_assert!(run.trace.final_max_regret() <= 0.05 * span);
        let last = regret_vector(&run.trace, &g, 0, run.trace.rounds()).unwrap();
        for (a, b) in last.iter().zip(run.trace.regrets(run.trace.rounds() - 1, 0)) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        let dist = empirical_joint_distribution(&run.trace, &g).unwrap();
        prop_assert!(is_correlated_equilibrium(&g, &dist, 0.1 * span).unwrap().is_ce);
    }

    #[test]
    fn ce_optimum_is_feasible(payoffs in prop::collection::vec(-5.0f64..5.0, 8), w in 0.0f64..1.0) {
        let names = vec![vec!["a".to_string(), "b".to_string()]; 2];
        let g = NormalFormGame::from_fn(names, |p| {
            let i = 2 * (2 * p[0] + p[1]);
            vec![payoffs[i], payoffs[i + 1]]
        })
        .unwrap();
        let opt = optimize_ce(&g, &[w, 1.0 - w]).unwrap();
        prop_assert!(is_correlated_equilibrium(&g, &opt.distribution, 1e-7).unwrap().is_ce);
        // Every pure NE is a CE, so the optimum is at least as good.
        for ne in spectrum_games::matrix::pure_nash(&g) {
            let v = w * g.payoff(&ne, 0) + (1.0 - w) * g.payoff(&ne, 1);
            prop_assert!(opt.value >= v - 1e-7);
        }
    }
}

#[test]
fn sequential_and_parallel_agree() {
    let cfg = EnsembleConfig { realizations: 6, ..EnsembleConfig::default() };
    let seq = SolverOptions { execution: Execution::Sequential, ..SolverOptions::default() };
    let par = SolverOptions { execution: Execution::Parallel, ..SolverOptions::default() };
    assert_eq!(channel_ensemble_study(&cfg, &seq).unwrap(), channel_ensemble_study(&cfg, &par).unwrap());

    let small = EnsembleConfig { bin_count: 2, total_band: 2.0, budgets: vec![2.0, 2.0], ..cfg };
    let sc = small.scenario(small.realization_seed(0, 0)).unwrap();
    let seq = SolverOptions { levels: 30, ..seq };
    let par = SolverOptions { levels: 30, ..par };
    assert_eq!(
        weighted_sum_optimize(&sc, &[0.3, 0.7], &seq).unwrap(),
        weighted_sum_optimize(&sc, &[0.3, 0.7], &par).unwrap()
    );
}
