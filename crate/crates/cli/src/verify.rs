//! Self-checks against brute-force oracles and the learners' audited invariants.

use std::time::Instant;

use delaypo_core::dapo::known::{self, q_hat, DapoKnownConfig};
use delaypo_core::dapo::linear::{
    exact_inverse_covariance, geometric_resampling, op_norm, q_hat_linear, series_depth, theta_hat, FeaturizedMdp,
    LinearQEnv,
};
use delaypo_core::dapo::unknown::{
    box_simplex_extremize, occupancy_bounds, run_unknown, ConfidenceSet, Counters, DapoUnknownConfig, Sense,
    TransitionModel,
};
use delaypo_core::dapo::{ratio, Fault};
use delaypo_core::delay::{delayed_indicator_sum, make_schedule};
use delaypo_core::env::{occupancy, sample_episode, value_difference_check};
use delaypo_core::hedge::hedge_regret_audit;
use delaypo_core::oracle::{
    best_in_hindsight_by_enumeration, box_simplex_by_vertices, estimator_mean_closed_form,
    expectation_by_enumeration, occupancy_bounds_by_grid, value_by_enumeration,
};
use delaypo_core::rng::{stream, streams, SimRng};
use delaypo_core::scenario::{make_costs, random_policy, random_tabular};
use delaypo_core::{
    run_baseline, BaselineKind, CostFunction, CostKind, DelayKind, DelaySchedule, Error, Policy, Result, Shape,
    TabularMdp,
};
use rand::Rng;

use crate::config::{Algorithm, RunConfig};
use crate::harness::{self, mean_std, RunOptions, SeedRun, SweepAxis};
use crate::scenarios;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VerifyOptions {
    pub fault: Option<Fault>,
}

impl VerifyOptions {
    fn run_options(&self) -> RunOptions {
        RunOptions { fault: self.fault, record_policies: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

pub struct Check {
    pub name: &'static str,
    pub about: &'static str,
    /// Wall-clock limit in seconds; exceeding it fails the check.
    pub limit_secs: Option<f64>,
    run: fn(&VerifyOptions) -> Result<Outcome>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub seconds: f64,
    pub detail: String,
}

pub fn checks() -> Vec<Check> {
    vec![
        Check {
            name: "estimator-mean",
            about: "E[Q̂] by trajectory enumeration equals r·q·Q/(q+γ) on every shape with S≤3, A≤2, H≤2",
            limit_secs: Some(10.0),
            run: estimator_mean,
        },
        Check {
            name: "value-difference",
            about: "value-difference identity on 100 random instances",
            limit_secs: Some(5.0),
            run: value_difference,
        },
        Check {
            name: "hedge-bounds",
            about: "delayed hedge regret below both audited bounds on 20 random streams",
            limit_secs: Some(10.0),
            run: hedge_bounds,
        },
        Check {
            name: "delay-indicator",
            about: "delayed-indicator sum at most D + K on 100 random schedules",
            limit_secs: Some(5.0),
            run: delay_indicator,
        },
        Check {
            name: "ratio-invariant",
            about: "r·π^now ≤ π^source on every arrival of every shipped scenario",
            limit_secs: None,
            run: ratio_invariant,
        },
        Check {
            name: "magnitude-bounds",
            about: "estimate and bonus magnitudes within their bounds on every shipped scenario",
            limit_secs: None,
            run: magnitude_bounds,
        },
        Check {
            name: "confidence-sandwich",
            about: "true kernel in the confidence set and occupancy sandwich, 10 seeds, K = 5000",
            limit_secs: Some(300.0),
            run: confidence_sandwich,
        },
        Check {
            name: "box-simplex",
            about: "water-filling extremizer against vertex enumeration on 500 instances",
            limit_secs: Some(30.0),
            run: box_simplex,
        },
        Check {
            name: "resampling",
            about: "geometric resampling within 2ε of the exact inverse in 90% of 20 runs, norm ≤ 1/γ always",
            limit_secs: Some(300.0),
            run: resampling,
        },
        Check {
            name: "zero-delay",
            about: "with no delays the adapted learner and the naive baseline are bitwise identical",
            limit_secs: None,
            run: zero_delay,
        },
        Check {
            name: "sublinearity",
            about: "average regret decreases from K/4 to K at d = 50, K = 20000",
            limit_secs: Some(600.0),
            run: sublinearity,
        },
        Check {
            name: "learner-values",
            about: "reported learner values and regret match enumeration",
            limit_secs: None,
            run: learner_values,
        },
        Check {
            name: "determinism",
            about: "repeated runs produce byte-identical output",
            limit_secs: None,
            run: determinism,
        },
        Check {
            name: "occupancy-grid",
            about: "occupancy bounds match a kernel grid search on two-state instances",
            limit_secs: None,
            run: occupancy_grid,
        },
        Check {
            name: "unknown-exact",
            about: "the unknown-kernel learner with the true kernel reproduces the known-kernel learner",
            limit_secs: None,
            run: unknown_exact,
        },
        Check {
            name: "linear-one-hot",
            about: "linear estimates with one-hot features equal the tabular estimates",
            limit_secs: None,
            run: linear_one_hot,
        },
    ]
}

/// Run the checks whose names match the glob `filter` (all when `None`).
pub fn run_checks(filter: Option<&str>, options: &VerifyOptions) -> Result<Vec<CheckResult>> {
    let pattern = filter
        .map(glob::Pattern::new)
        .transpose()
        .map_err(|e| Error::Config(format!("bad filter: {e}")))?;
    let selected: Vec<Check> =
        checks().into_iter().filter(|c| pattern.as_ref().is_none_or(|p| p.matches(c.name))).collect();
    if selected.is_empty() {
        return Err(Error::Config(format!("no check matches `{}`", filter.unwrap_or(""))));
    }
    Ok(selected.iter().map(|c| run_check(c, options)).collect())
}

pub fn run_check(check: &Check, options: &VerifyOptions) -> CheckResult {
    let start = Instant::now();
    let outcome = (check.run)(options);
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match outcome {
        Ok(o) => (o.passed, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(limit) = check.limit_secs {
        if seconds > limit {
            passed = false;
            detail = format!("{detail}; took {seconds:.1}s, limit {limit}s");
        }
    }
    CheckResult { name: check.name, passed, seconds, detail }
}

pub const TSV_HEADER: &str = "check\tstatus\tseconds\tdetail";

pub fn to_tsv(results: &[CheckResult]) -> String {
    let mut out = String::from(TSV_HEADER);
    out.push('\n');
    for r in results {
        let status = if r.passed { "pass" } else { "fail" };
        out.push_str(&format!("{}\t{status}\t{:.3}\t{}\n", r.name, r.seconds, r.detail.replace(['\t', '\n'], " ")));
    }
    out
}

fn rng(seed: u64) -> SimRng {
    stream(seed, streams::ENVIRONMENT)
}

fn random_shape(rng: &mut SimRng, max_s: usize, max_a: usize, max_h: usize) -> Result<Shape> {
    Shape::new(rng.random_range(1..=max_s), rng.random_range(1..=max_a), rng.random_range(1..=max_h))
}

fn random_cost(shape: Shape, rng: &mut SimRng) -> Result<CostFunction> {
    Ok(make_costs(&CostKind::IidUniform {}, shape, 1, rng)?.remove(0))
}

fn estimator_mean(_: &VerifyOptions) -> Result<Outcome> {
    let mut rng = rng(101);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for s in 1..=3 {
        for a in 1..=2 {
            for h in 1..=2 {
                let shape = Shape::new(s, a, h)?;
                for gamma in [0.05, 0.3, 1.0] {
                    for _ in 0..4 {
                        let mdp = random_tabular(shape, &mut rng)?;
                        let policy = random_policy(shape, &mut rng);
                        let now = random_policy(shape, &mut rng);
                        let cost = random_cost(shape, &mut rng)?;
                        let q = occupancy(&mdp, &policy)?;
                        let r = ratio(&policy, &now)?;
                        let mean =
                            expectation_by_enumeration(&mdp, &policy, &cost, |t| q_hat(t, &r, &q, &policy, gamma))?;
                        let closed = estimator_mean_closed_form(&mdp, &policy, &cost, &r, gamma)?;
                        for (x, y) in mean.as_slice().iter().zip(closed.as_slice()) {
                            worst = worst.max((x - y).abs());
                        }
                        cases += 1;
                    }
                }
            }
        }
    }
    Ok(Outcome::new(worst <= 1e-12, format!("{cases} instances, max gap {worst:.2e} (tol 1e-12)")))
}

fn value_difference(_: &VerifyOptions) -> Result<Outcome> {
    let mut rng = rng(102);
    let mut worst_identity = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for _ in 0..100 {
        let shape = random_shape(&mut rng, 3, 3, 3)?;
        let mdp = random_tabular(shape, &mut rng)?;
        let pi = random_policy(shape, &mut rng);
        let star = random_policy(shape, &mut rng);
        let cost = random_cost(shape, &mut rng)?;
        let (lhs, rhs) = value_difference_check(&mdp, &pi, &star, &cost)?;
        let brute = value_by_enumeration(&mdp, &pi, &cost) - value_by_enumeration(&mdp, &star, &cost);
        worst_identity = worst_identity.max((brute - rhs).abs());
        worst_oracle = worst_oracle.max((brute - lhs).abs());
    }
    Ok(Outcome::new(
        worst_identity <= 1e-10 && worst_oracle <= 1e-10,
        format!("100 instances, max |lhs - rhs| {worst_identity:.2e}, evaluator vs enumeration {worst_oracle:.2e} (tol 1e-10)"),
    ))
}

fn hedge_bounds(_: &VerifyOptions) -> Result<Outcome> {
    let mut rng = rng(103);
    let mut violations = 0;
    let mut tightest = f64::INFINITY;
    for _ in 0..20 {
        let k = rng.random_range(50..500);
        let actions = rng.random_range(2..8);
        let floor = if rng.random_bool(0.5) { 0.0 } else { 0.5 };
        let losses: Vec<Vec<f64>> =
            (0..k).map(|_| (0..actions).map(|_| rng.random::<f64>() * (1.0 + floor) - floor).collect()).collect();
        let hi = rng.random_range(0..40);
        let schedule = make_schedule(&DelayKind::Uniform { lo: 0, hi }, k, &mut rng)?;
        let eta = rng.random_range(0.01..0.3);
        let audit = hedge_regret_audit(&losses, &schedule, eta, floor)?;
        if !audit.holds() {
            violations += 1;
        }
        tightest = tightest.min(audit.shifted_bound - audit.measured_regret);
        if let Some(b) = audit.arrival_bound {
            tightest = tightest.min(b - audit.measured_regret);
        }
    }
    Ok(Outcome::new(violations == 0, format!("20 streams, {violations} violations, smallest slack {tightest:.3}")))
}

fn brute_indicator_sum(schedule: &DelaySchedule) -> u64 {
    let k = schedule.episodes();
    let mut total = 0;
    for a in 1..=k {
        for i in 1..=k {
            let arrival = i + schedule.delay(i);
            if a <= arrival && arrival < a + schedule.delay(a) {
                total += 1;
            }
        }
    }
    total
}

fn delay_indicator(_: &VerifyOptions) -> Result<Outcome> {
    let mut rng = rng(104);
    let mut violations = 0;
    let mut mismatches = 0;
    for i in 0..100 {
        let k = rng.random_range(1..300);
        let kind = match i % 3 {
            0 => DelayKind::Uniform { lo: 0, hi: rng.random_range(0..80) },
            1 => DelayKind::Constant { delay: rng.random_range(0..50) },
            _ => DelayKind::Spike { period: rng.random_range(1..20), height: rng.random_range(0..100) },
        };
        let schedule = make_schedule(&kind, k, &mut rng)?;
        let sum = delayed_indicator_sum(&schedule);
        if sum != brute_indicator_sum(&schedule) {
            mismatches += 1;
        }
        if sum > schedule.total() + k as u64 {
            violations += 1;
        }
    }
    Ok(Outcome::new(
        violations == 0 && mismatches == 0,
        format!("100 schedules, {violations} violations, {mismatches} mismatches against brute force"),
    ))
}

fn shipped_runs(options: &VerifyOptions) -> Result<Vec<(&'static str, RunConfig, Vec<SeedRun>)>> {
    scenarios::all()?
        .into_iter()
        .map(|(name, config)| {
            let runs = harness::run_all(&config, options.run_options())?;
            Ok((name, config, runs))
        })
        .collect()
}

fn ratio_invariant(options: &VerifyOptions) -> Result<Outcome> {
    let mut checks = 0u64;
    let mut violations = 0u64;
    let mut unchecked = Vec::new();
    for (name, config, runs) in shipped_runs(options)? {
        let adapted = !matches!(config.algorithm, Algorithm::Baseline(_));
        for run in &runs {
            let d = &run.output.diagnostics;
            checks += d.ratio_checks;
            violations += d.ratio_violations;
            if adapted && d.ratio_checks == 0 {
                unchecked.push(format!("{name}/{}", run.seed));
            }
        }
    }
    let mut detail = format!("{checks} ratio checks, {violations} violations");
    if !unchecked.is_empty() {
        detail.push_str(&format!("; no checks in {}", unchecked.join(", ")));
    }
    Ok(Outcome::new(violations == 0 && unchecked.is_empty(), detail))
}

fn magnitude_bounds(options: &VerifyOptions) -> Result<Outcome> {
    let mut violations = 0u64;
    let mut parts = Vec::new();
    for (name, _, runs) in shipped_runs(options)? {
        let mut q = 0.0f64;
        let mut b = 0.0f64;
        let mut big_b = 0.0f64;
        let mut bounds = (0.0, 0.0, 0.0);
        for run in &runs {
            let d = &run.output.diagnostics;
            violations += d.bound_violations;
            q = q.max(d.max_q_hat.max(-d.min_q_hat));
            b = b.max(d.max_local_bonus);
            big_b = big_b.max(d.max_bonus);
            bounds = (d.q_hat_bound, d.local_bonus_bound, d.bonus_bound);
        }
        parts.push(format!(
            "{name}: |Q̂| {q:.3}/{:.3}, b {b:.3}/{:.3}, B {big_b:.3}/{:.3}",
            bounds.0, bounds.1, bounds.2
        ));
    }
    Ok(Outcome::new(violations == 0, format!("{violations} violations; {}", parts.join("; "))))
}

fn confidence_sandwich(options: &VerifyOptions) -> Result<Outcome> {
    let config = scenarios::shipped("sandwich")?;
    let runs = harness::run_all(&config, options.run_options())?;
    let (mut checks, mut sandwich, mut outside) = (0, 0, 0);
    for run in &runs {
        let d = &run.output.diagnostics;
        checks += d.sandwich_checks;
        sandwich += d.sandwich_violations;
        outside += d.kernel_outside_set;
    }
    Ok(Outcome::new(
        checks > 0 && sandwich == 0 && outside == 0,
        format!(
            "{} seeds, {checks} sandwich checks, {sandwich} sandwich violations, {outside} episodes with the kernel outside the set",
            runs.len()
        ),
    ))
}

fn random_distribution(rng: &mut SimRng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

fn box_simplex(_: &VerifyOptions) -> Result<Outcome> {
    let mut rng = rng(108);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(1..=4);
        let p = random_distribution(&mut rng, n);
        let radius: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 0.6).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 1.0).collect();
        for sense in [Sense::Max, Sense::Min] {
            let x = box_simplex_extremize(&p, &radius, &v, sense)?;
            let got: f64 = x.iter().zip(&v).map(|(a, b)| a * b).sum();
            let brute = box_simplex_by_vertices(&p, &radius, &v, sense)
                .ok_or_else(|| Error::Structural("empty feasible set".into()))?;
            worst = worst.max((got - brute).abs());
        }
    }
    Ok(Outcome::new(worst <= 1e-9, format!("500 instances, max gap {worst:.2e} (tol 1e-9)")))
}

fn resampling(_: &VerifyOptions) -> Result<Outcome> {
    let (gamma, eps, reps, runs) = (0.1, 0.05, 10_000, 20);
    let shape = Shape::new(2, 2, 2)?;
    let env = FeaturizedMdp::random_low_rank(shape, 3, 0, &mut rng(109))?;
    let policy = Policy::uniform(shape);
    let depth = series_depth(gamma, eps);
    let exact = exact_inverse_covariance(&env, &policy, gamma)?;
    let mut within = 0;
    let mut bounded = 0;
    let mut worst = 0.0f64;
    for seed in 0..runs {
        let sampled = geometric_resampling(&env, &policy, reps, depth, gamma, &mut stream(seed, streams::SIMULATOR))?;
        let err = (0..shape.horizon).map(|h| op_norm(&(sampled.step(h) - exact.step(h)))).fold(0.0, f64::max);
        worst = worst.max(err);
        if err <= 2.0 * eps {
            within += 1;
        }
        if sampled.max_op_norm() <= 1.0 / gamma + 1e-12 {
            bounded += 1;
        }
    }
    Ok(Outcome::new(
        within * 10 >= runs * 9 && bounded == runs,
        format!("M = {reps}, N = {depth}: {within}/{runs} within 2ε (worst {worst:.4}), {bounded}/{runs} with norm ≤ 1/γ"),
    ))
}

fn zero_delay(options: &VerifyOptions) -> Result<Outcome> {
    let mut mismatches = Vec::new();
    for (seed, shape) in [(0, Shape::new(3, 2, 3)?), (1, Shape::new(5, 3, 4)?), (2, Shape::new(2, 4, 2)?)] {
        let mut env_rng = rng(110 + seed);
        let mdp = random_tabular(shape, &mut env_rng)?;
        let k = 500;
        let costs = make_costs(&CostKind::Sinusoidal { period: 97 }, shape, k, &mut env_rng)?;
        let schedule = DelaySchedule::zeros(k);
        let mut config = DapoKnownConfig::tuned(&mdp, k, 0);
        config.record_policies = true;
        config.fault = options.fault;
        let adapted = known::run(&mdp, &costs, &schedule, &config, &mut stream(seed, streams::LEARNER))?;
        let naive = run_baseline(
            BaselineKind::NaiveDelayedPo,
            &mdp,
            &costs,
            &schedule,
            &config,
            &mut stream(seed, streams::LEARNER),
        )?;
        let same = adapted.report.to_csv_string() == naive.report.to_csv_string()
            && adapted.policies == naive.policies
            && adapted.final_policy == naive.final_policy;
        if !same {
            mismatches.push(seed.to_string());
        }
    }
    let detail = if mismatches.is_empty() {
        "3 instances, identical reports and policies".to_string()
    } else {
        format!("runs differ for seeds {}", mismatches.join(", "))
    };
    Ok(Outcome::new(mismatches.is_empty(), detail))
}

/// Mean of `R_k / k` across seeds.
fn mean_average_regret(runs: &[SeedRun], k: usize) -> f64 {
    let values: Vec<f64> = runs.iter().map(|r| r.output.report.regret_at(k) / k as f64).collect();
    mean_std(&values).0
}

fn mean_final(runs: &[SeedRun]) -> f64 {
    let values: Vec<f64> = runs.iter().map(|r| r.output.report.final_regret()).collect();
    mean_std(&values).0
}

fn sublinearity(options: &VerifyOptions) -> Result<Outcome> {
    let config = scenarios::shipped("sublinearity")?;
    let k = config.episodes;
    let delayed = harness::run_all(&config, options.run_options())?;
    let undelayed = harness::run_all(&SweepAxis::Delay.apply(&config, 0.0)?, options.run_options())?;
    let naive_config =
        RunConfig { algorithm: Algorithm::Baseline(BaselineKind::NaiveDelayedPo), ..config.clone() };
    let naive = harness::run_all(&naive_config, options.run_options())?;

    let late = mean_average_regret(&delayed, k);
    let early = mean_average_regret(&delayed, k / 4);
    let (r_delayed, r_undelayed, r_naive) = (mean_final(&delayed), mean_final(&undelayed), mean_final(&naive));
    Ok(Outcome::new(
        late < early,
        format!(
            "R_K/K {late:.4} vs R_(K/4)/(K/4) {early:.4}; mean R_K {r_delayed:.1}, with no delay {r_undelayed:.1} (ratio {:.3}), naive {r_naive:.1} (gap {:+.1})",
            r_delayed / r_undelayed,
            r_naive - r_delayed
        ),
    ))
}

fn small_instance(seed: u64, shape: Shape, k: usize) -> Result<(TabularMdp, Vec<CostFunction>)> {
    let mdp = random_tabular(shape, &mut stream(seed, streams::ENVIRONMENT))?;
    let costs = make_costs(&CostKind::IidUniform {}, shape, k, &mut stream(seed, streams::COSTS))?;
    Ok((mdp, costs))
}

fn learner_values(options: &VerifyOptions) -> Result<Outcome> {
    let shape = Shape::new(3, 2, 3)?;
    let k = 60;
    let (mdp, costs) = small_instance(7, shape, k)?;
    let schedule = make_schedule(&DelayKind::Uniform { lo: 0, hi: 6 }, k, &mut stream(7, streams::DELAYS))?;
    let mut config = DapoKnownConfig::tuned(&mdp, k, schedule.total());
    config.record_policies = true;
    config.fault = options.fault;
    let out = known::run(&mdp, &costs, &schedule, &config, &mut stream(7, streams::LEARNER))?;
    let policies = out.policies.as_ref().ok_or_else(|| Error::Structural("policies were not recorded".into()))?;
    let mut worst = 0.0f64;
    for (i, (policy, cost)) in policies.iter().zip(&costs).enumerate() {
        worst = worst.max((value_by_enumeration(&mdp, policy, cost) - out.report.learner_values[i]).abs());
    }
    let best = best_in_hindsight_by_enumeration(&mdp, &costs)?;
    let regret_gap = (out.report.learner_total() - best - out.report.final_regret()).abs();
    Ok(Outcome::new(
        worst <= 1e-10 && regret_gap <= 1e-9,
        format!("{k} episodes, max value gap {worst:.2e}, final regret gap {regret_gap:.2e}"),
    ))
}

fn determinism(options: &VerifyOptions) -> Result<Outcome> {
    let mut differing = Vec::new();
    for name in ["drift", "linear_low_rank"] {
        let config = scenarios::shipped(name)?;
        let first = harness::run_all(&config, options.run_options())?;
        let second = harness::run_all(&config, options.run_options())?;
        let csv = |runs: &[SeedRun]| runs.iter().map(|r| r.output.report.to_csv_string()).collect::<Vec<_>>();
        let summary = |runs: &[SeedRun]| serde_json::to_string(&harness::summarize(&config, runs));
        if csv(&first) != csv(&second) || summary(&first)? != summary(&second)? {
            differing.push(name);
        }
    }
    Ok(Outcome::new(differing.is_empty(), format!("2 scenarios rerun, differing: {differing:?}")))
}

fn occupancy_grid(_: &VerifyOptions) -> Result<Outcome> {
    let mut rng = rng(114);
    let shape = Shape::new(2, 2, 3)?;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let mdp = random_tabular(shape, &mut rng)?;
        let mut counters = Counters::new(shape);
        let uniform = Policy::uniform(shape);
        let zero = CostFunction::zeros(shape);
        for _ in 0..30 {
            counters.record(&sample_episode(&mdp, &uniform, &zero, &mut rng));
        }
        let confidence = ConfidenceSet::from_counters(&counters, 0.05);
        let policy = random_policy(shape, &mut rng);
        let bounds = occupancy_bounds(&confidence, &policy, 0)?;
        let (upper, lower) = occupancy_bounds_by_grid(&confidence, &policy, 0, 3)?;
        for h in 0..shape.horizon {
            for s in 0..shape.states {
                worst = worst.max((bounds.upper.get(h, s) - upper[h][s]).abs());
                worst = worst.max((bounds.lower.get(h, s) - lower[h][s]).abs());
            }
        }
    }
    Ok(Outcome::new(worst <= 1e-9, format!("5 instances, max gap {worst:.2e} (tol 1e-9)")))
}

fn unknown_exact(options: &VerifyOptions) -> Result<Outcome> {
    let shape = Shape::new(4, 2, 3)?;
    let k = 300;
    let (mdp, costs) = small_instance(15, shape, k)?;
    let schedule = DelaySchedule::new((0..k).map(|i| i % 9).collect());
    let base = DapoKnownConfig::tuned(&mdp, k, schedule.total());
    let known_config =
        DapoKnownConfig { record_policies: true, fault: options.fault, ..DapoKnownConfig::new(base.eta, base.gamma) };
    let unknown_config = DapoUnknownConfig {
        model: TransitionModel::Exact,
        record_policies: true,
        fault: options.fault,
        ..DapoUnknownConfig::new(base.eta, base.gamma, 0.1)
    };
    let a = known::run(&mdp, &costs, &schedule, &known_config, &mut stream(15, streams::LEARNER))?;
    let b = run_unknown(&mdp, &costs, &schedule, &unknown_config, &mut stream(15, streams::LEARNER))?;
    let same = a.policies == b.policies && a.report == b.report;
    Ok(Outcome::new(same, if same { "identical policies and reports" } else { "runs differ" }))
}

fn linear_one_hot(_: &VerifyOptions) -> Result<Outcome> {
    let mut rng = rng(116);
    let shape = Shape::new(3, 2, 3)?;
    let gamma = 0.25;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mdp = random_tabular(shape, &mut rng)?;
        let policy = random_policy(shape, &mut rng);
        let now = random_policy(shape, &mut rng);
        let cost = random_cost(shape, &mut rng)?;
        let env = FeaturizedMdp::one_hot(mdp.clone());
        let sigma = exact_inverse_covariance(&env, &policy, gamma)?;
        let q = occupancy(&mdp, &policy)?;
        let r = ratio(&policy, &now)?;
        let traj = sample_episode(&mdp, &policy, &cost, &mut rng);
        let tabular = q_hat(&traj, &r, &q, &policy, gamma)?;
        for h in 0..shape.horizon {
            let phi = env.features().phi(h, traj.states[h], traj.actions[h]);
            let theta = theta_hat(sigma.step(h), phi, traj.cost_to_go[h]);
            for s in 0..shape.states {
                for a in 0..shape.actions {
                    let linear = q_hat_linear(r.get(h, s, a), env.features().phi(h, s, a), &theta);
                    worst = worst.max((linear - tabular.get(h, s, a)).abs());
                }
            }
        }
    }
    Ok(Outcome::new(worst <= 1e-10, format!("20 instances, max gap {worst:.2e} (tol 1e-10)")))
}
