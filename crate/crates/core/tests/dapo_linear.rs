mod common;

use common::{instance, seeded};
use delaypo_core::dapo::known::q_hat;
use delaypo_core::dapo::linear::{
    default_params_linear, default_params_linear_preset, exact_covariance, exact_inverse_covariance,
    geometric_resampling, local_bonuses_linear, op_norm, propagate_bonus, q_hat_linear, resampling_parameters,
    run_linear, series_depth, theta_hat, BonusCoefficients, BonusMode, BonusProcedure, CovarianceMode,
    FeaturizedMdp, LinearConfig, LinearGammaPreset, LinearQEnv, SigmaPlus, SimulatorBudget,
};
use delaypo_core::dapo::ratio;
use delaypo_core::env::{evaluate_table, occupancy, sample_episode};
use delaypo_core::rng;
use delaypo_core::scenario::{make_costs, make_linear_costs, random_tabular};
use delaypo_core::{CostKind, DelaySchedule, Error, Policy, SaTable, Shape, TabularMdp};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

#[test]
fn theta_and_estimate_examples() {
    let id = DMatrix::<f64>::identity(3, 3);
    let theta = theta_hat(&id, &[1.0, 0.0, 0.0], 2.0);
    assert_eq!(theta, DVector::from_vec(vec![2.0, 0.0, 0.0]));
    assert_eq!(theta_hat(&id, &[0.3, 0.4, 0.0], 0.0), DVector::zeros(3));
    assert_eq!(q_hat_linear(1.0, &[1.5, 0.0, 0.0], &theta), 3.0);
    assert_eq!(q_hat_linear(0.7, &[0.2, 0.1, 0.0], &DVector::zeros(3)), 0.0);
}

#[test]
fn theta_matches_manual_product() {
    let mut rng = seeded(71);
    for _ in 0..50 {
        let n = rng.random_range(1..6);
        let m = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>());
        let phi: Vec<f64> = (0..n).map(|_| rng.random::<f64>() / n as f64).collect();
        let l = rng.random::<f64>() * 3.0;
        let theta = theta_hat(&m, &phi, l);
        for i in 0..n {
            let manual: f64 = (0..n).map(|j| m[(i, j)] * phi[j]).sum::<f64>() * l;
            assert!((theta[i] - manual).abs() < 1e-12);
        }
    }
}

#[test]
fn identity_covariance_gives_half_identity() {
    let shape = Shape::new(1, 1, 1).unwrap();
    let mdp = TabularMdp::new(shape, 0, vec![]).unwrap();
    let env = FeaturizedMdp::one_hot(mdp);
    let sp = exact_inverse_covariance(&env, &Policy::uniform(shape), 1.0).unwrap();
    assert!((sp.step(0)[(0, 0)] - 0.5).abs() < 1e-15);
}

#[test]
fn one_hot_exact_oracle_matches_the_tabular_estimator() {
    let mut rng = seeded(72);
    let shape = Shape::new(3, 2, 3).unwrap();
    for _ in 0..20 {
        let inst = instance(shape, &mut rng);
        let env = FeaturizedMdp::one_hot(inst.mdp.clone());
        let gamma = 0.25;
        let sp = exact_inverse_covariance(&env, &inst.policy, gamma).unwrap();
        let q = occupancy(&inst.mdp, &inst.policy).unwrap();
        for h in 0..3 {
            for s in 0..3 {
                for a in 0..2 {
                    let expected = 1.0 / (q.pair(h, s, a) + gamma);
                    let i = s * 2 + a;
                    assert!((sp.step(h)[(i, i)] - expected).abs() < 1e-12);
                }
            }
        }
        let r = ratio(&inst.policy, &inst.other).unwrap();
        let traj = sample_episode(&inst.mdp, &inst.policy, &inst.cost, &mut rng);
        let tabular = q_hat(&traj, &r, &q, &inst.policy, gamma).unwrap();
        for h in 0..3 {
            let theta = theta_hat(sp.step(h), env.features().phi(h, traj.states[h], traj.actions[h]), traj.cost_to_go[h]);
            for s in 0..3 {
                for a in 0..2 {
                    let linear = q_hat_linear(r.get(h, s, a), env.features().phi(h, s, a), &theta);
                    assert!((linear - tabular.get(h, s, a)).abs() < 1e-10);
                }
            }
        }
    }
}

fn low_rank(seed: u64, dim: usize) -> FeaturizedMdp {
    FeaturizedMdp::random_low_rank(Shape::new(4, 2, 3).unwrap(), dim, 0, &mut seeded(seed)).unwrap()
}

#[test]
fn low_rank_q_functions_are_linear_in_the_features() {
    let env = low_rank(73, 3);
    let mut rng = seeded(74);
    let costs = make_linear_costs(&CostKind::IidUniform {}, env.features(), 1, &mut rng).unwrap();
    let policy = delaypo_core::scenario::random_policy(env.shape(), &mut rng);
    let q = evaluate_table(env.mdp(), &policy, costs[0].table()).unwrap().q;
    for h in 0..3 {
        let rows: Vec<usize> = (0..8).collect();
        let phi = DMatrix::from_fn(8, 3, |i, j| env.features().phi(h, rows[i] / 2, rows[i] % 2)[j]);
        let y = DVector::from_fn(8, |i, _| q.get(h, i / 2, i % 2));
        let theta = (phi.transpose() * &phi).try_inverse().unwrap() * phi.transpose() * &y;
        let residual = (&phi * theta - y).amax();
        assert!(residual < 1e-9, "{residual}");
    }
}

#[test]
fn resampling_stays_inside_the_operator_ball() {
    let env = low_rank(75, 3);
    let policy = Policy::uniform(env.shape());
    let sp = geometric_resampling(&env, &policy, 200, 30, 0.3, &mut rng::stream(75, 4)).unwrap();
    for h in 0..3 {
        assert!(op_norm(sp.step(h)) <= 1.0 / 0.3 + 1e-12);
        let m = sp.step(h);
        assert!((m - m.transpose()).amax() < 1e-10);
    }
    assert!(geometric_resampling(&env, &policy, 0, 30, 0.3, &mut rng::stream(75, 4)).is_err());
}

#[test]
fn resampling_approaches_the_exact_inverse() {
    let env = low_rank(76, 2);
    let policy = Policy::uniform(env.shape());
    let gamma = 0.3;
    let exact = exact_inverse_covariance(&env, &policy, gamma).unwrap();
    let sp = geometric_resampling(&env, &policy, 4000, series_depth(gamma, 0.05), gamma, &mut rng::stream(76, 4))
        .unwrap();
    for h in 0..3 {
        assert!(op_norm(&(sp.step(h) - exact.step(h))) < 0.1);
    }
}

#[test]
fn resampling_parameter_formulas() {
    assert_eq!(series_depth(0.1, 0.05), 106);
    let (m, n) = resampling_parameters(0.5, 0.1, 0.1, 2, 10, 3);
    let expected = (24.0 / (0.25 * 0.01) * (10.0f64 * 4.0 * 10.0 * 3.0 / 0.1).ln()).ceil() as u64;
    assert_eq!(m, expected);
    assert_eq!(n, ((2.0 / 0.5) * (1.0f64 / 0.05).ln()).ceil() as usize);
}

fn sigma(env: &FeaturizedMdp, policy: &Policy, gamma: f64) -> SigmaPlus {
    exact_inverse_covariance(env, policy, gamma).unwrap()
}

#[test]
fn bonuses_match_term_by_term_recomputation() {
    let env = low_rank(77, 3);
    let mut rng = seeded(78);
    let (pi_j, pi_now) = (
        delaypo_core::scenario::random_policy(env.shape(), &mut rng),
        delaypo_core::scenario::random_policy(env.shape(), &mut rng),
    );
    let gamma = 0.2;
    let sp = sigma(&env, &pi_j, gamma);
    let r = ratio(&pi_j, &pi_now).unwrap();
    let coeffs = BonusCoefficients::defaults(3, 3, gamma, 0.01);
    let m = 3;
    let terms = local_bonuses_linear(&r, &pi_now, m, &env, &sp, &coeffs).unwrap();
    let total = terms.total();
    for h in 0..3 {
        for s in 0..4 {
            let norm_sq = |a: usize| {
                let phi = DVector::from_column_slice(env.features().phi(h, s, a));
                (phi.transpose() * sp.step(h) * &phi)[(0, 0)]
            };
            let sum_w = |f: &dyn Fn(f64) -> f64| -> f64 {
                (0..2).map(|a| r.get(h, s, a) * pi_now.prob(h, s, a) * f(norm_sq(a))).sum()
            };
            let b1 = coeffs.beta_1 * sum_w(&|x| x.sqrt());
            let bv = coeffs.beta_v * m as f64 * sum_w(&|x| x);
            let bf = coeffs.beta_f * sum_w(&|x| x);
            for a in 0..2 {
                let ra = r.get(h, s, a);
                let b2 = coeffs.beta_2 * ra * norm_sq(a).sqrt();
                let br = coeffs.beta_r * (1.0 - ra);
                let bg = coeffs.beta_g * ra * norm_sq(a);
                assert!((total.get(h, s, a) - (b1 + b2 + bv + br + bf + bg)).abs() < 1e-12);
            }
        }
    }
    assert!(terms.min_term() >= 0.0);
}

#[test]
fn bonus_edge_cases() {
    let env = low_rank(79, 2);
    let policy = Policy::uniform(env.shape());
    let sp = sigma(&env, &policy, 0.2);
    let same = ratio(&policy, &policy).unwrap();
    let coeffs = BonusCoefficients::defaults(3, 2, 0.2, 0.01);
    let terms = local_bonuses_linear(&same, &policy, 1, &env, &sp, &coeffs).unwrap();
    assert_eq!(terms.ratio.max(), 0.0);
    let zero = BonusCoefficients::defaults(3, 2, 0.0, 0.01);
    let terms = local_bonuses_linear(&same, &policy, 1, &env, &sp, &zero).unwrap();
    assert_eq!(terms.one.max() + terms.two.max() + terms.f.max() + terms.g.max(), 0.0);
}

#[test]
fn bonus_procedure_memoizes_and_counts_calls() {
    let env = low_rank(80, 2);
    let policy = Policy::uniform(env.shape());
    let local = SaTable::filled(env.shape(), 0.5);
    let mut procedure = BonusProcedure::new(&local, &policy);
    let mut budget = SimulatorBudget::new(None);
    let mut rng = rng::stream(80, 4);
    assert_eq!(procedure.value(2, 1, 0, &env, &mut budget, &mut rng).unwrap(), 0.5);
    assert_eq!(budget.used(), 0);
    let first = procedure.value(0, 0, 1, &env, &mut budget, &mut rng).unwrap();
    let used = budget.used();
    assert_eq!(used, 2);
    assert_eq!(first, 1.5);
    let second = procedure.value(0, 0, 1, &env, &mut budget, &mut rng).unwrap();
    assert_eq!(first, second);
    assert_eq!(budget.used(), used);
}

#[test]
fn bonus_budget_is_enforced() {
    let env = low_rank(81, 2);
    let policy = Policy::uniform(env.shape());
    let local = SaTable::filled(env.shape(), 0.1);
    let mut budget = SimulatorBudget::new(Some(3));
    let result = propagate_bonus(&local, &policy, &env, BonusMode::Sampled, &mut budget, &mut rng::stream(0, 4));
    assert!(matches!(result, Err(Error::Resource(_))));
}

#[test]
fn deterministic_transitions_make_the_procedure_exact() {
    let shape = Shape::new(2, 2, 3).unwrap();
    let mut kernel = Vec::new();
    for _h in 0..2 {
        for s in 0..2 {
            for a in 0..2 {
                kernel.extend(if (s + a) % 2 == 0 { [1.0, 0.0] } else { [0.0, 1.0] });
            }
        }
    }
    let env = FeaturizedMdp::one_hot(TabularMdp::new(shape, 0, kernel).unwrap());
    let policy = Policy::deterministic(shape, &[0, 1, 1, 0, 0, 0]).unwrap();
    let mut rng = seeded(82);
    let local = SaTable::from_vec(shape, (0..12).map(|_| rng.random::<f64>()).collect()).unwrap();
    let mut budget = SimulatorBudget::new(None);
    let sampled = propagate_bonus(&local, &policy, &env, BonusMode::Sampled, &mut budget, &mut rng).unwrap();
    let exact = evaluate_table(env.mdp(), &policy, &local).unwrap().q;
    for (x, y) in sampled.as_slice().iter().zip(exact.as_slice()) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn default_parameter_formulas() {
    let (gamma, _, _) = default_params_linear(3, 50, 50, 0, 0);
    assert_eq!(gamma, 1.0);
    let (_, _, skip) = default_params_linear(3, 4, 100, 0, 0);
    assert_eq!(skip, 0.0);
    let (gamma, eta, skip) = default_params_linear(3, 4, 10_000, 160_000, 30);
    assert!((gamma - 0.02).abs() < 1e-15);
    let expected_eta = (0.02f64 / (10.0 * 3.0 * 30.0)).min(1.0 / (3.0 * 170_000f64.powf(0.75)));
    assert!((eta - expected_eta).abs() < 1e-18);
    assert!((skip - 20.0).abs() < 1e-12);
    let (analysis, _, _) = default_params_linear_preset(3, 4, 10_000, 160_000, 30, LinearGammaPreset::Analysis);
    assert!((analysis - 0.06).abs() < 1e-15);
}

fn exact_config(env: &FeaturizedMdp, schedule: &DelaySchedule) -> LinearConfig {
    let mut config = LinearConfig::tuned(3, env.features().dim(), schedule, 0.1, LinearGammaPreset::Statement);
    config.covariance = CovarianceMode::Exact;
    config.bonus_mode = BonusMode::Exact;
    config
}

#[test]
fn one_hot_exact_run_keeps_every_invariant() {
    let shape = Shape::new(3, 2, 3).unwrap();
    let mut rng = seeded(83);
    let env = FeaturizedMdp::one_hot(random_tabular(shape, &mut rng).unwrap());
    let costs = make_costs(&CostKind::PiecewiseConstant { period: 40 }, shape, 400, &mut rng).unwrap();
    let schedule = DelaySchedule::new((0..400).map(|k| k % 6).collect());
    let config = exact_config(&env, &schedule);
    let out = run_linear(&env, &costs, &schedule, &config, &mut rng::stream(83, 3)).unwrap();
    let d = &out.diagnostics;
    assert!(d.clean(), "{d:?}");
    assert!(d.min_hedge_exponent > -1.0);
}

#[test]
fn sampled_run_is_reproducible_and_bounded() {
    let env = low_rank(84, 3);
    let mut rng = seeded(85);
    let costs = make_linear_costs(&CostKind::IidUniform {}, env.features(), 40, &mut rng).unwrap();
    let schedule = DelaySchedule::new((0..40).map(|k| k % 4).collect());
    let config = LinearConfig::tuned(3, 3, &schedule, 0.1, LinearGammaPreset::Statement).with_resampling(50, 20);
    let a = run_linear(&env, &costs, &schedule, &config, &mut rng::stream(85, 3)).unwrap();
    let b = run_linear(&env, &costs, &schedule, &config, &mut rng::stream(85, 3)).unwrap();
    assert_eq!(a.report.to_csv_string(), b.report.to_csv_string());
    assert!(a.diagnostics.clean(), "{:?}", a.diagnostics);
    assert_eq!(a.diagnostics.simulator_trajectories, 50 * 20 * a.diagnostics.arrivals_used as u64);
}

#[test]
fn single_episode_keeps_the_uniform_policy() {
    let env = low_rank(86, 2);
    let costs = make_linear_costs(&CostKind::IidUniform {}, env.features(), 1, &mut seeded(86)).unwrap();
    let schedule = DelaySchedule::zeros(1);
    let config = LinearConfig {
        record_policies: true,
        enforce_hedge_precondition: false,
        ..exact_config(&env, &schedule)
    };
    let out = run_linear(&env, &costs, &schedule, &config, &mut rng::stream(86, 3)).unwrap();
    assert_eq!(out.policies.unwrap()[0], Policy::uniform(env.shape()));
}

#[test]
fn oversized_learning_rate_trips_the_precondition() {
    let env = low_rank(87, 2);
    let costs = make_linear_costs(&CostKind::IidUniform {}, env.features(), 30, &mut seeded(87)).unwrap();
    let schedule = DelaySchedule::new(vec![2; 30]);
    let mut config = exact_config(&env, &schedule);
    config.eta = 50.0;
    config.coefficients = BonusCoefficients::defaults(3, 2, config.gamma, config.eta);
    assert!(matches!(
        run_linear(&env, &costs, &schedule, &config, &mut rng::stream(87, 3)),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn covariance_is_a_second_moment() {
    let env = low_rank(88, 3);
    let policy = Policy::uniform(env.shape());
    for sigma in exact_covariance(&env, &policy).unwrap() {
        assert!((sigma.clone() - sigma.transpose()).amax() < 1e-15);
        assert!(sigma.symmetric_eigenvalues().iter().all(|&x| x >= -1e-12));
    }
}
