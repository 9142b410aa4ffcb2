//! Release acceptance gate. Each test checks one criterion end to end and
//! prints a single `ACCEPTANCE <n> <name>: PASS|FAIL` line (visible under
//! `cargo test --test acceptance -- --nocapture`) before asserting.
//!
//! Criteria 5-7 retrain real agents and take a few minutes combined; the
//! rest finish in seconds.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::OnceLock;

use asl_core::env::{
    enumerate_actions, equivalence_classes, gen_scenarios, initial_state, is_success,
    observe_task, perturb, solve, transition, Action, ElementKind, EnvError, Family,
    FlagSet, Observation, PerturbationKind, PerturbationSpec, Scenario, Screen,
    SuccessPredicate, Task, TransitionEffect, UiElement, UiState,
};
use asl_core::evaluate::{compare_agents, run_policy, EvalMode};
use asl_core::policy::{score_actions, FeatureConfig, PolicyParams};
use asl_core::rngs::stream;
use asl_core::runlog::Cell;
use asl_core::see::{shaped_reward, thresholded_reward, SeeContext};
use asl_core::train::{
    advantage, annotate_dataset, asl_loss_and_grad, augmented_reward,
    collect_trajectories, digirl_loss_and_grad, filtered_bc_loss_and_grad, fit_value,
    monte_carlo_returns, rl_train, semantic_loss_and_grad, semantic_loss_and_grad_exact,
    sft_loss_and_grad, train_supervised, FbcVariant, RlAlgorithm, RlConfig, StepSample,
    SupervisedAlgorithm, SupervisedConfig, TrajStep, ValueFeatureConfig,
};
use rand::Rng;

/// Collects violations instead of panicking mid-criterion, so every test can
/// still emit its verdict line with the first few failures attached.
struct Check {
    total: usize,
    first: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check { total: 0, first: Vec::new() }
    }

    fn ok(&mut self, cond: bool, msg: impl FnOnce() -> String) {
        if !cond {
            self.total += 1;
            if self.first.len() < 8 {
                self.first.push(msg());
            }
        }
    }

    fn finish(self, number: usize, name: &str, detail: &str) {
        let pass = self.total == 0;
        let status = if pass { "PASS" } else { "FAIL" };
        let detail = if pass {
            detail.to_string()
        } else {
            format!("{detail}; {} violations, e.g. {}", self.total, self.first.join(" | "))
        };
        println!("ACCEPTANCE {number} {name}: {status} ({detail})");
        assert!(pass, "ACCEPTANCE {number} {name}: {status} ({detail})");
    }
}

const H: f64 = 1e-5;
const FD_TOL: f64 = 1e-5;
const INSTANCES: usize = 100;

fn fd_features() -> FeatureConfig {
    FeatureConfig { dim: 48, ngram: 3, salt: 0xace }
}

fn chain_suite(count: usize, seed: u64) -> Vec<Scenario> {
    gen_scenarios(Family::Chain, count, seed).expect("chain suite")
}

fn mixed_suite(seed: u64) -> Vec<Scenario> {
    let mut suite = gen_scenarios(Family::Chain, 3, seed).expect("chain");
    suite.extend(gen_scenarios(Family::MenuTree, 2, seed + 1).expect("menu_tree"));
    suite.extend(gen_scenarios(Family::FormFill, 2, seed + 2).expect("form_fill"));
    suite
}

fn random_params(cfg: FeatureConfig, seed: u64) -> PolicyParams {
    let mut params = PolicyParams::zeros(cfg);
    let mut rng = stream(seed, "acceptance-params", 0);
    for w in &mut params.weights {
        *w = rng.gen_range(-0.8..0.8);
    }
    params
}

/// Relative error with an absolute regime for near-zero pairs.
fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-7 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Central finite differences of `f` at `params`, one coordinate at a time;
/// returns the worst relative error against `analytic`.
fn fd_max_rel_err(
    params: &PolicyParams,
    analytic: &[f64],
    f: impl Fn(&PolicyParams) -> f64,
) -> f64 {
    assert_eq!(analytic.len(), params.weights.len());
    let mut worst = 0.0f64;
    for (i, &g) in analytic.iter().enumerate() {
        let mut plus = params.clone();
        plus.weights[i] += H;
        let mut minus = params.clone();
        minus.weights[i] -= H;
        let fd = (f(&plus) - f(&minus)) / (2.0 * H);
        worst = worst.max(rel_err(fd, g));
    }
    worst
}

fn fd_fixtures() -> (Vec<Scenario>, Vec<StepSample>) {
    let mut suite = mixed_suite(810);
    suite.extend(chain_suite(2, 811));
    let dataset = annotate_dataset(&suite).expect("annotate");
    assert!(dataset.len() >= 20, "dataset too thin: {}", dataset.len());
    (suite, dataset)
}

fn scenario_of<'a>(suite: &'a [Scenario], sample: &StepSample) -> &'a Scenario {
    suite.iter().find(|s| s.name == sample.scenario).expect("scenario")
}

fn log_prob_in(params: &PolicyParams, obs: &Observation, canonical: &str) -> f64 {
    let scores = score_actions(params, obs).expect("score");
    let idx = scores
        .actions
        .iter()
        .position(|a| a.canonical() == canonical)
        .expect("pinned action enumerable");
    scores.log_probs[idx]
}

fn collected_steps(suite: &[Scenario], seed: u64) -> Vec<TrajStep> {
    let see = SeeContext::default();
    let params = random_params(fd_features(), seed);
    let trajectories =
        collect_trajectories(suite, &params, 2, &see, 0.6, seed, 0, 1).expect("collect");
    let steps: Vec<TrajStep> =
        trajectories.into_iter().flat_map(|t| t.steps).collect();
    assert!(steps.len() >= 20, "too few collected steps");
    steps
}

/// States visited by the canonical solution, excluding terminal ones.
fn solution_states(scenario: &Scenario, task: &Task) -> Vec<UiState> {
    let solution = solve(scenario, task).expect("solvable");
    let mut state = initial_state(scenario, task).expect("initial");
    let mut states = vec![state.clone()];
    for action in &solution.actions {
        state = transition(scenario, &state, action).expect("transition");
        if !is_success(task, &state) && !state.terminal {
            states.push(state.clone());
        }
    }
    states
}

#[test]
fn a1_analytic_gradients_match_finite_differences() {
    let (suite, dataset) = fd_fixtures();
    let see = SeeContext::default();
    let mut check = Check::new();

    let mut worst_sft = 0.0f64;
    for i in 0..INSTANCES {
        let params = random_params(fd_features(), 10_000 + i as u64);
        let sample = &dataset[i % dataset.len()];
        let (_, grad) = sft_loss_and_grad(&params, sample).expect("sft loss");
        let w = fd_max_rel_err(&params, &grad, |p| {
            sft_loss_and_grad(p, sample).expect("sft loss").0
        });
        worst_sft = worst_sft.max(w);
    }
    check.ok(worst_sft < FD_TOL, || format!("cloning loss rel err {worst_sft:.2e}"));

    // The sampled action and its reward are pinned from the call under test,
    // turning the stochastic loss into a fixed scalar surrogate.
    let mut worst_sem = 0.0f64;
    for i in 0..INSTANCES {
        let params = random_params(fd_features(), 11_000 + i as u64);
        let sample = &dataset[i % dataset.len()];
        let scenario = scenario_of(&suite, sample);
        let mut rng = stream(81, "a1-sem", i as u64);
        let out =
            semantic_loss_and_grad(&params, scenario, sample, &see, &mut rng).expect("loss");
        let pinned = out.action.canonical();
        let r = out.raw_reward;
        let w = fd_max_rel_err(&params, &out.grad, |p| {
            -r * log_prob_in(p, &sample.obs, &pinned)
        });
        worst_sem = worst_sem.max(w);
    }
    check.ok(worst_sem < FD_TOL, || format!("semantic loss rel err {worst_sem:.2e}"));

    let mut worst_asl = 0.0f64;
    for i in 0..INSTANCES {
        let params = random_params(fd_features(), 12_000 + i as u64);
        let sample = &dataset[i % dataset.len()];
        let scenario = scenario_of(&suite, sample);
        let mut rng = stream(82, "a1-asl", i as u64);
        let out = asl_loss_and_grad(&params, scenario, sample, &see, &mut rng).expect("loss");
        let pinned = out.sampled.as_ref().expect("sampled action").canonical();
        let gt = sample.ground_truth.canonical();
        let (r, lambda) = (out.raw_reward, out.lambda);
        let w = fd_max_rel_err(&params, &out.grad, |p| {
            -r * log_prob_in(p, &sample.obs, &pinned)
                + lambda * (-log_prob_in(p, &sample.obs, &gt))
        });
        worst_asl = worst_asl.max(w);
    }
    check.ok(worst_asl < FD_TOL, || format!("combined loss rel err {worst_asl:.2e}"));

    let steps = collected_steps(&mixed_suite(812), 812);

    let mut worst_adv = 0.0f64;
    for i in 0..INSTANCES {
        let params = random_params(fd_features(), 13_000 + i as u64);
        let step = &steps[i % steps.len()];
        let adv = if i % 5 == 4 { -0.3 } else { 0.25 + (i % 3) as f64 * 0.5 };
        let (_, grad) = digirl_loss_and_grad(&params, step, adv).expect("loss");
        let pinned = step.action.canonical();
        let w = fd_max_rel_err(&params, &grad, |p| {
            if adv > 0.0 {
                -log_prob_in(p, &step.obs, &pinned)
            } else {
                0.0
            }
        });
        worst_adv = worst_adv.max(w);
    }
    check.ok(worst_adv < FD_TOL, || format!("advantage-filtered rel err {worst_adv:.2e}"));

    let mut worst_fbc = 0.0f64;
    for i in 0..INSTANCES {
        let params = random_params(fd_features(), 14_000 + i as u64);
        let step = &steps[i % steps.len()];
        let variant = if i % 2 == 0 { FbcVariant::See } else { FbcVariant::Plain };
        let (_, grad) = filtered_bc_loss_and_grad(&params, step, true, variant).expect("loss");
        let r_tilde = match variant {
            FbcVariant::Plain => 0.0,
            FbcVariant::See => step.r_tilde,
        };
        // The mixing weight is a frozen coefficient, so take it at base
        // parameters and keep it constant through the differencing.
        let alpha = log_prob_in(&params, &step.obs, &step.action.canonical()).exp();
        let lambda = 1.0 - (1.0 - alpha) * r_tilde;
        let pinned = step.action.canonical();
        let w = fd_max_rel_err(&params, &grad, |p| {
            -(r_tilde + lambda) * log_prob_in(p, &step.obs, &pinned)
        });
        worst_fbc = worst_fbc.max(w);
    }
    check.ok(worst_fbc < FD_TOL, || format!("filtered-cloning rel err {worst_fbc:.2e}"));

    check.finish(
        1,
        "gradient-correctness",
        &format!(
            "{INSTANCES} instances per loss, worst rel err: cloning {worst_sft:.1e}, \
             semantic {worst_sem:.1e}, combined {worst_asl:.1e}, \
             advantage-filtered {worst_adv:.1e}, filtered-cloning {worst_fbc:.1e}"
        ),
    );
}

#[test]
fn a2_single_sample_semantic_gradient_is_unbiased() {
    let (suite, dataset) = fd_fixtures();
    let see = SeeContext::default();
    let mut check = Check::new();
    let mut checked = 0usize;
    let mut worst_gap = 0.0f64;

    for i in 0..60 {
        let params = random_params(fd_features(), 20_000 + i as u64);
        let sample = &dataset[i % dataset.len()];
        let scenario = scenario_of(&suite, sample);
        let scores = score_actions(&params, &sample.obs).expect("score");
        let dim = params.feature_config.dim;

        // Probability-weighted average of the per-action single-sample
        // gradients, rewards taken straight from the estimator.
        let mut weighted_loss = 0.0;
        let mut weighted_grad = vec![0.0; dim];
        let mut expected_r = 0.0;
        for idx in 0..scores.actions.len() {
            let r = see
                .reward(
                    scenario,
                    &sample.state,
                    &sample.obs,
                    &scores.actions[idx],
                    &sample.ground_truth,
                    0.0,
                )
                .expect("reward")
                .raw;
            let p = scores.probs[idx];
            weighted_loss += p * (-r * scores.log_probs[idx]);
            expected_r += p * r;
            for (acc, g) in weighted_grad.iter_mut().zip(scores.grad_log_prob(idx)) {
                *acc += p * (-r * g);
            }
        }

        let (loss, grad, mean_r) =
            semantic_loss_and_grad_exact(&params, scenario, sample, &see).expect("exact");
        worst_gap = worst_gap
            .max((loss - weighted_loss).abs())
            .max((mean_r - expected_r).abs());
        for (a, b) in grad.iter().zip(&weighted_grad) {
            worst_gap = worst_gap.max((a - b).abs());
        }

        // One sampled draw must also equal its own formula exactly.
        let mut rng = stream(83, "a2-unbias", i as u64);
        let one =
            semantic_loss_and_grad(&params, scenario, sample, &see, &mut rng).expect("loss");
        let idx = scores.position(&one.action).expect("sampled action scored");
        let direct: Vec<f64> =
            scores.grad_log_prob(idx).iter().map(|g| -one.raw_reward * g).collect();
        check.ok(one.grad == direct, || {
            format!("instance {i}: sampled gradient diverges from its own formula")
        });
        checked += 1;
    }

    check.ok(checked >= 50, || format!("only {checked} instances"));
    check.ok(worst_gap <= 1e-10, || format!("worst enumeration gap {worst_gap:.2e}"));
    check.finish(
        2,
        "estimator-unbiasedness",
        &format!("{checked} instances, worst enumeration gap {worst_gap:.1e}"),
    );
}

#[test]
fn a3_semantic_scores_separate_equivalence_classes() {
    let see = SeeContext::default();
    let mut check = Check::new();
    let mut details = Vec::new();

    for (family, count, seed) in
        [(Family::Chain, 4, 821u64), (Family::MenuTree, 3, 822), (Family::FormFill, 3, 823)]
    {
        let suite = gen_scenarios(family, count, seed).expect("suite");
        let mut within: Vec<f64> = Vec::new();
        let mut cross: Vec<f64> = Vec::new();
        for scenario in &suite {
            for task in &scenario.tasks {
                for state in solution_states(scenario, task) {
                    let obs = observe_task(scenario, task, &state, &[]).expect("observe");
                    let classes =
                        equivalence_classes(scenario, &state, &obs).expect("classes");
                    for (ci, class) in classes.iter().enumerate() {
                        for a in class {
                            for (cj, other) in classes.iter().enumerate() {
                                for b in other {
                                    if ci == cj && a.canonical() == b.canonical() {
                                        continue;
                                    }
                                    let r = see
                                        .reward(scenario, &state, &obs, a, b, 0.0)
                                        .expect("reward")
                                        .raw;
                                    check.ok((0.0..=1.0).contains(&r), || {
                                        format!("raw score {r} out of range")
                                    });
                                    if ci == cj {
                                        check.ok(r == 1.0, || {
                                            format!(
                                                "{}: same-class pair {} vs {} scored {r}",
                                                scenario.name,
                                                a.canonical(),
                                                b.canonical()
                                            )
                                        });
                                        within.push(r);
                                    } else {
                                        cross.push(r);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        check.ok(!within.is_empty() && !cross.is_empty(), || {
            format!("{}: no class pairs to compare", family.name())
        });
        let (w, c) = (mean(&within), mean(&cross));
        check.ok(w > c, || {
            format!("{}: within mean {w:.3} not above cross mean {c:.3}", family.name())
        });
        details.push(format!(
            "{} within {:.2} ({}) vs cross {:.2} ({})",
            family.name(),
            w,
            within.len(),
            c,
            cross.len()
        ));
    }

    check.finish(3, "see-soundness", &details.join(", "));
}

#[test]
fn a4_formula_identities_hold() {
    let (suite, dataset) = fd_fixtures();
    let see = SeeContext::default();
    let mut check = Check::new();

    // Mixing weight: bounds everywhere, pure cloning at zero reward, pure
    // confidence at full reward (one rounding of 1 - (1 - alpha)).
    let mut r_zero = 0usize;
    let mut r_one = 0usize;
    for i in 0..200 {
        let params = random_params(fd_features(), 40_000 + i as u64);
        let sample = &dataset[i % dataset.len()];
        let scenario = scenario_of(&suite, sample);
        let mut rng = stream(84, "a4-lambda", i as u64);
        let out = asl_loss_and_grad(&params, scenario, sample, &see, &mut rng).expect("loss");
        check.ok(out.lambda == 1.0 - (1.0 - out.alpha) * out.raw_reward, || {
            format!("instance {i}: lambda formula broken")
        });
        check.ok((0.0..=1.0).contains(&out.raw_reward), || {
            format!("instance {i}: reward {}", out.raw_reward)
        });
        check.ok(out.alpha > 0.0 && out.alpha <= 1.0, || {
            format!("instance {i}: alpha {}", out.alpha)
        });
        check.ok(out.lambda <= 1.0 && out.lambda >= out.alpha - f64::EPSILON, || {
            format!("instance {i}: lambda {} outside [alpha, 1]", out.lambda)
        });
        if out.raw_reward == 0.0 {
            r_zero += 1;
            check.ok(out.lambda == 1.0, || {
                format!("instance {i}: lambda {} at zero reward", out.lambda)
            });
        }
        if out.raw_reward == 1.0 {
            r_one += 1;
            check.ok((out.lambda - out.alpha).abs() <= f64::EPSILON, || {
                format!("instance {i}: lambda {} vs alpha {}", out.lambda, out.alpha)
            });
        }
    }
    // Exact zeros are rare (orthogonal description embeddings), so one real
    // hit suffices; the identity equality above pins the library to this
    // formula, whose endpoints are then exact on dyadic alpha.
    check.ok(r_zero >= 1 && r_one >= 5, || {
        format!("reward endpoints unexercised: {r_zero}x zero, {r_one}x one")
    });
    for k in 1..=16u32 {
        let alpha = f64::from(k) / 16.0;
        check.ok(1.0 - (1.0 - alpha) * 0.0 == 1.0, || {
            format!("zero-reward endpoint broken at alpha {alpha}")
        });
        check.ok(1.0 - (1.0 - alpha) * 1.0 == alpha, || {
            format!("full-reward endpoint broken at alpha {alpha}")
        });
    }

    // Strict threshold: a score exactly at tau is suppressed.
    for k in 0..=20 {
        let t = k as f64 / 20.0;
        check.ok(thresholded_reward(t, t).expect("in range") == 0.0, || {
            format!("threshold not strict at {t}")
        });
        if t < 1.0 {
            let above = (t + 0.03).min(1.0);
            check.ok(thresholded_reward(above, t).expect("in range") == above, || {
                format!("score above tau {t} not passed through")
            });
        }
    }

    // Advantage boundaries on sampled trajectories with a fitted critic.
    let rl_suite = mixed_suite(841);
    let params = random_params(fd_features(), 842);
    let trajectories =
        collect_trajectories(&rl_suite, &params, 2, &see, 0.6, 842, 0, 1).expect("collect");
    let beta = 0.5;
    let vcfg = ValueFeatureConfig { dim: 16, salt: 0x41 };
    let mut targets = Vec::new();
    for traj in &trajectories {
        let returns = monte_carlo_returns(traj, beta);
        for (step, g) in traj.steps.iter().zip(returns) {
            targets.push((&step.obs, g));
        }
    }
    let v = fit_value(&vcfg, &targets).expect("value fit");
    let mut steps_checked = 0usize;
    for traj in &trajectories {
        let h = traj.steps.len() - 1;
        for i in 0..traj.steps.len() {
            let v_i = v.predict(&traj.steps[i].obs);
            let v_next = if i == h { 0.0 } else { v.predict(&traj.steps[i + 1].obs) };
            let td = v_next + augmented_reward(&traj.steps[i], beta) - v_i;
            let last = advantage(traj, i, &v, 0.37, beta).expect("advantage");
            if i == h {
                check.ok(last == traj.env_reward, || {
                    format!("terminal advantage {last} vs env reward {}", traj.env_reward)
                });
            }
            let eta0 = advantage(traj, i, &v, 0.0, beta).expect("advantage");
            let want0 = if i == h { traj.env_reward } else { td };
            check.ok(eta0 == want0, || format!("eta 0 advantage {eta0} vs {want0}"));
            let eta1 = advantage(traj, i, &v, 1.0, beta).expect("advantage");
            check.ok(eta1 == traj.env_reward, || {
                format!("eta 1 advantage {eta1} vs env reward {}", traj.env_reward)
            });
            steps_checked += 1;
        }
    }
    check.ok(steps_checked >= 30, || format!("only {steps_checked} steps checked"));

    // Shaped reward decomposes back into its two parts.
    let mut comp_worst = 0.0f64;
    let mut rng = stream(85, "a4-comp", 0);
    for _ in 0..500 {
        let r_env = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
        let r_tilde: f64 = rng.gen_range(0.0..=1.0);
        let b: f64 = rng.gen_range(0.0..=1.0);
        let gap = (shaped_reward(r_env, r_tilde, b) - r_env - b * r_tilde).abs();
        comp_worst = comp_worst.max(gap);
        check.ok(shaped_reward(0.0, r_tilde, b) == b * r_tilde, || {
            "composition not exact at zero env reward".into()
        });
    }
    check.ok(comp_worst <= f64::EPSILON, || format!("composition gap {comp_worst:.2e}"));

    // Reductions: zero shaping weight and an always-suppressed semantic
    // reward collapse the see variants onto their plain counterparts bitwise.
    let red_suite = chain_suite(3, 843);
    let base = RlConfig {
        algorithm: RlAlgorithm::Digirl,
        learning_rate: 0.3,
        iterations: 2,
        rollouts_per_task: 2,
        actor_epochs: 4,
        seed: 9,
        tau: 0.6,
        beta: 0.5,
        eta: 0.5,
        feature_config: fd_features(),
        value_config: ValueFeatureConfig { dim: 16, salt: 0x41 },
        init: None,
    };
    let (p_plain, log_plain) = rl_train(&red_suite, &base, &see, 1).expect("digirl");
    let mut cfg = base.clone();
    cfg.algorithm = RlAlgorithm::DigirlSee;
    cfg.beta = 0.0;
    let (p_see, log_see) = rl_train(&red_suite, &cfg, &see, 1).expect("digirl_see");
    check.ok(p_plain.weights == p_see.weights, || {
        "zero beta does not collapse the shaped advantage variant".into()
    });
    check.ok(log_plain == log_see, || "shaped advantage logs differ at zero beta".into());

    let mut cfg_bc = base.clone();
    cfg_bc.algorithm = RlAlgorithm::FilteredBc;
    cfg_bc.tau = 1.0;
    let mut cfg_bc_see = cfg_bc.clone();
    cfg_bc_see.algorithm = RlAlgorithm::FilteredBcSee;
    let (p_bc, log_bc) = rl_train(&red_suite, &cfg_bc, &see, 1).expect("filtered_bc");
    let (p_bc_see, log_bc_see) =
        rl_train(&red_suite, &cfg_bc_see, &see, 1).expect("filtered_bc_see");
    check.ok(p_bc.weights == p_bc_see.weights, || {
        "suppressed semantic reward does not collapse the cloning variant".into()
    });
    check.ok(log_bc == log_bc_see, || "cloning logs differ with suppressed reward".into());

    check.finish(
        4,
        "formula-identities",
        &format!(
            "reward endpoints {r_zero}x0/{r_one}x1, {steps_checked} advantage steps, \
             composition worst {comp_worst:.1e}, reductions bitwise"
        ),
    );
}

/// One retrained pair of agents plus its perturbed evaluations; shared by
/// the two robustness criteria so the expensive runs happen once.
struct RobustnessRun {
    clean_sft: f64,
    clean_asl: f64,
    perturbed_sft: f64,
    perturbed_asl: f64,
}

const ROBUSTNESS_TRAIN_SEEDS: [u64; 5] = [1, 2, 3, 17, 99];

fn robustness_suite() -> Vec<Scenario> {
    let mut suite = gen_scenarios(Family::Chain, 12, 401).expect("chain");
    suite.extend(gen_scenarios(Family::MenuTree, 10, 402).expect("menu_tree"));
    suite
}

fn robustness_runs() -> &'static [RobustnessRun] {
    static RUNS: OnceLock<Vec<RobustnessRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let suite = robustness_suite();
        let dataset = annotate_dataset(&suite).expect("annotate");
        let see = SeeContext::default();
        let kinds =
            [PerturbationKind::EquivalentPathRemoval, PerturbationKind::SynonymRelabel];
        let perturb_seeds = [0, 1, 2, 3, 4];
        ROBUSTNESS_TRAIN_SEEDS
            .iter()
            .map(|&seed| {
                let train = |algorithm| {
                    let cfg = SupervisedConfig {
                        algorithm,
                        learning_rate: 0.1,
                        epochs: 100,
                        seed,
                        feature_config: FeatureConfig { dim: 512, ngram: 3, salt: 21 },
                        exact_expectation: false,
                    };
                    train_supervised(&suite, &dataset, &cfg, &see).expect("train").0
                };
                let p_sft = train(SupervisedAlgorithm::Sft);
                let p_asl = train(SupervisedAlgorithm::Asl);
                let report = compare_agents(
                    "robustness",
                    &suite,
                    &p_sft,
                    &p_asl,
                    &kinds,
                    &perturb_seeds,
                    EvalMode::Greedy,
                    1,
                )
                .expect("compare");
                let n = report.rows.len() as f64;
                RobustnessRun {
                    clean_sft: report.clean_sft,
                    clean_asl: report.clean_asl,
                    perturbed_sft: report.rows.iter().map(|r| r.tsr_sft).sum::<f64>() / n,
                    perturbed_asl: report.rows.iter().map(|r| r.tsr_asl).sum::<f64>() / n,
                }
            })
            .collect()
    })
}

#[test]
fn a5_cloned_policies_break_under_semantic_perturbations() {
    let tasks: usize = robustness_suite().iter().map(|s| s.tasks.len()).sum();
    let runs = robustness_runs();
    let mut check = Check::new();

    check.ok(tasks >= 20, || format!("suite has only {tasks} tasks"));
    for (seed, run) in ROBUSTNESS_TRAIN_SEEDS.iter().zip(runs) {
        check.ok(run.clean_sft >= 0.9, || {
            format!("seed {seed}: clean task success {:.3}", run.clean_sft)
        });
    }
    let n = runs.len() as f64;
    let mean_clean = runs.iter().map(|r| r.clean_sft).sum::<f64>() / n;
    let mean_drop =
        runs.iter().map(|r| r.clean_sft - r.perturbed_sft).sum::<f64>() / n;
    check.ok(mean_drop > 0.1, || {
        format!("mean clean-to-perturbed drop only {mean_drop:.3}")
    });

    check.finish(
        5,
        "cloning-brittleness",
        &format!(
            "{tasks} tasks, {} seeds, clean {mean_clean:.2}, mean drop {mean_drop:.3}",
            runs.len()
        ),
    );
}

#[test]
fn a6_semantic_training_is_more_robust_than_cloning() {
    let runs = robustness_runs();
    let n = runs.len() as f64;
    let gap = runs.iter().map(|r| r.perturbed_asl - r.perturbed_sft).sum::<f64>() / n;
    let clean_sft = runs.iter().map(|r| r.clean_sft).sum::<f64>() / n;
    let clean_asl = runs.iter().map(|r| r.clean_asl).sum::<f64>() / n;

    let mut check = Check::new();
    check.ok(gap > 0.05, || format!("perturbed success gap only {gap:+.3}"));
    check.ok(clean_asl >= clean_sft - 0.02, || {
        format!("clean regression: {clean_asl:.3} vs {clean_sft:.3}")
    });
    check.finish(
        6,
        "semantic-robustness-gap",
        &format!(
            "perturbed gap {gap:+.3} over {} seeds, clean {clean_asl:.2} vs {clean_sft:.2}",
            runs.len()
        ),
    );
}

#[test]
fn a7_semantic_shaping_helps_rl() {
    let suite = chain_suite(12, 301);
    let see = SeeContext::default();
    let final_reward = |algorithm: RlAlgorithm, seed: u64| -> f64 {
        let cfg = RlConfig {
            algorithm,
            learning_rate: 0.1,
            iterations: 4,
            rollouts_per_task: 4,
            actor_epochs: 20,
            seed,
            tau: 0.6,
            beta: 0.5,
            eta: 0.5,
            feature_config: FeatureConfig { dim: 512, ngram: 3, salt: 21 },
            value_config: ValueFeatureConfig::default(),
            init: None,
        };
        let (_, log) = rl_train(&suite, &cfg, &see, 1).expect("rl train");
        let col = log
            .columns
            .iter()
            .position(|c| c == "mean_env_reward")
            .expect("reward column");
        match &log.rows.last().expect("at least one iteration")[col] {
            Cell::Float(v) => *v,
            other => panic!("unexpected cell {other:?}"),
        }
    };

    let mut check = Check::new();
    let mut details = Vec::new();
    let pairs = [
        (RlAlgorithm::Digirl, RlAlgorithm::DigirlSee),
        (RlAlgorithm::FilteredBc, RlAlgorithm::FilteredBcSee),
    ];
    for (plain, shaped) in pairs {
        let mut mean_plain = 0.0;
        let mut mean_shaped = 0.0;
        let mut regressions = 0usize;
        for seed in 0..5u64 {
            let a = final_reward(plain, seed);
            let b = final_reward(shaped, seed);
            mean_plain += a / 5.0;
            mean_shaped += b / 5.0;
            if b < a {
                regressions += 1;
            }
        }
        check.ok(mean_shaped >= mean_plain, || {
            format!(
                "{} mean {mean_shaped:.3} below {} mean {mean_plain:.3}",
                shaped.name(),
                plain.name()
            )
        });
        check.ok(regressions <= 1, || {
            format!("{}: {regressions}/5 seeds regressed", shaped.name())
        });
        details.push(format!(
            "{} {mean_plain:.3} -> {mean_shaped:.3}, {regressions}/5 regressions",
            plain.name()
        ));
    }

    check.finish(7, "rl-shaping-direction", &details.join("; "));
}

fn asl_bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asl"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = asl_bin(dir, args);
    assert!(
        out.status.success(),
        "command {args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// First scenario file as a path relative to `dir`, so every pipeline run
/// receives byte-identical arguments regardless of its temp directory.
fn first_scenario(dir: &Path) -> String {
    let mut files: Vec<String> = fs::read_dir(dir.join("suite"))
        .expect("suite dir")
        .map(|e| {
            let path = e.expect("entry").path();
            path.strip_prefix(dir).expect("relative").display().to_string()
        })
        .collect();
    files.sort();
    files.into_iter().next().expect("one scenario")
}

/// Runs every artifact-producing command once and returns each command's
/// stdout, leaving the artifacts in `dir`.
fn drive_pipeline(dir: &Path, threads: &str) -> Vec<String> {
    let mut stdouts = Vec::new();
    let mut go = |args: &[&str]| stdouts.push(run_ok(dir, args));

    go(&["gen-scenario", "--family", "chain", "--count", "2", "--seed", "17", "--out", "suite"]);
    go(&["gen-scenario", "--family", "menu_tree", "--count", "1", "--seed", "18", "--out", "suite_m"]);

    for (alg, out) in [("sft", "sft_run"), ("asl", "asl_run")] {
        fs::write(
            dir.join(format!("{alg}.json")),
            format!(
                r#"{{"algorithm":"{alg}","learning_rate":0.5,"epochs":12,"seed":5,
                     "scenarios":["suite"],
                     "feature_config":{{"dim":96,"ngram":3,"salt":4}},
                     "out_dir":"{out}"}}"#
            ),
        )
        .expect("config write");
        go(&["train", "--config", &format!("{alg}.json"), "--threads", threads]);
    }

    fs::write(
        dir.join("rl.json"),
        r#"{"algorithm":"digirl_see","learning_rate":0.2,"iterations":2,"rollouts_per_task":3,
            "seed":11,"scenarios":["suite"],
            "feature_config":{"dim":96,"ngram":3,"salt":4},"value_config":{"dim":24,"salt":9},
            "init_params":"sft_run/params.json"}"#,
    )
    .expect("config write");
    go(&["train", "--config", "rl.json", "--out", "rl_run", "--threads", threads]);

    fs::write(dir.join("kinds.json"), r#"{"kinds":["index_shuffle","synonym_relabel"]}"#)
        .expect("kinds write");
    go(&[
        "eval", "--params", "sft_run/params.json", "--scenario", "suite", "--perturb",
        "kinds.json", "--seeds", "2", "--out", "eval.csv", "--threads", threads,
    ]);
    go(&[
        "compare", "--sft", "sft_run/params.json", "--asl", "asl_run/params.json",
        "--scenario", "suite", "--perturb", "kinds.json", "--seeds", "2", "--out", "cmp",
        "--threads", threads,
    ]);
    go(&["report", "eval.csv", "--out", "summary.csv", "--svg", "chart.svg"]);

    let scenario = first_scenario(dir);
    go(&["equiv", "--scenario", &scenario, "--task", "t0"]);
    go(&[
        "score", "--scenario", &scenario, "--task", "t0", "--step", "0", "--pred",
        r#"{"action_type":"click","index":0}"#,
    ]);
    go(&[
        "rollout", "--scenario", &scenario, "--params", "sft_run/params.json", "--task",
        "t0", "--seed", "4",
    ]);
    stdouts
}

fn collect_files(root: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(dir: &Path, root: &Path, acc: &mut Vec<(String, Vec<u8>)>) {
        let mut entries: Vec<_> = fs::read_dir(dir)
            .expect("read dir")
            .map(|e| e.expect("entry").path())
            .collect();
        entries.sort();
        for path in entries {
            if path.is_dir() {
                walk(&path, root, acc);
            } else {
                let rel = path.strip_prefix(root).expect("relative").display().to_string();
                acc.push((rel, fs::read(&path).expect("file read")));
            }
        }
    }
    let mut acc = Vec::new();
    walk(root, root, &mut acc);
    acc.sort_by(|a, b| a.0.cmp(&b.0));
    acc
}

#[test]
fn a8_artifacts_are_byte_identical_across_reruns_and_threads() {
    let run = |threads: &str| {
        let dir = tempfile::tempdir().expect("tempdir");
        let stdouts = drive_pipeline(dir.path(), threads);
        let files = collect_files(dir.path());
        (stdouts, files)
    };
    let (out_a, files_a) = run("1");
    let (out_b, files_b) = run("1");
    let (out_c, files_c) = run("4");

    let mut check = Check::new();
    check.ok(files_a.len() >= 15, || format!("only {} artifacts found", files_a.len()));
    check.ok(out_a == out_b, || "stdout differs between identical reruns".into());
    check.ok(out_a == out_c, || "stdout differs across worker threads".into());

    for (label, other) in [("rerun", &files_b), ("4 threads", &files_c)] {
        let names_a: Vec<&String> = files_a.iter().map(|(n, _)| n).collect();
        let names_o: Vec<&String> = other.iter().map(|(n, _)| n).collect();
        check.ok(names_a == names_o, || format!("{label}: artifact sets differ"));
        for ((name, bytes), (_, other_bytes)) in files_a.iter().zip(other) {
            check.ok(bytes == other_bytes, || format!("{label}: {name} differs"));
        }
    }

    check.finish(
        8,
        "byte-stable-artifacts",
        &format!("{} files and {} command outputs x 3 runs", files_a.len(), out_a.len()),
    );
}

/// Exact success probability of the uniform policy by dynamic programming
/// over (state identity, steps used); uniformity makes rollouts a Markov
/// chain, so the recursion needs no policy code.
fn uniform_success_probability(scenario: &Scenario, task: &Task) -> f64 {
    fn go(
        scenario: &Scenario,
        task: &Task,
        state: &UiState,
        memo: &mut HashMap<(asl_core::env::StateKey, usize), f64>,
    ) -> f64 {
        if is_success(task, state) {
            return 1.0;
        }
        if state.terminal || state.step_count >= task.max_steps {
            return 0.0;
        }
        let key = (state.key(), state.step_count);
        if let Some(&p) = memo.get(&key) {
            return p;
        }
        let obs = observe_task(scenario, task, state, &[]).expect("observe");
        let actions = enumerate_actions(&obs);
        let mut total = 0.0;
        for action in &actions {
            let next = transition(scenario, state, action).expect("transition");
            total += go(scenario, task, &next, memo);
        }
        let p = total / actions.len() as f64;
        memo.insert(key, p);
        p
    }
    let state = initial_state(scenario, task).expect("initial");
    go(scenario, task, &state, &mut HashMap::new())
}

fn toggle_scenario() -> Scenario {
    Scenario {
        name: "mc-toggle".into(),
        version: 1,
        screens: vec![Screen {
            id: "home".into(),
            elements: vec![UiElement {
                id: "wifi".into(),
                label: "Wi-Fi".into(),
                kind: ElementKind::Toggle,
                effect: TransitionEffect::toggle("wifi"),
            }],
        }],
        tasks: vec![Task {
            id: "t1".into(),
            goal: "turn wifi on".into(),
            initial_screen: "home".into(),
            success: SuccessPredicate {
                screen_is: None,
                field_equals: vec![],
                flags_set: vec![FlagSet { flag: "wifi".into(), value: true }],
            },
            max_steps: 3,
            input_candidates: vec![],
        }],
        synonym_sets: vec![],
    }
}

#[test]
fn a9_environment_oracles_hold() {
    let mut check = Check::new();

    // Perturbations keep every task solvable within budget and change at
    // least one canonical solution string.
    let suite = mixed_suite(941);
    let mut applied = 0usize;
    for kind in PerturbationKind::ALL {
        let mut successes = 0usize;
        for (i, scenario) in suite.iter().enumerate() {
            let spec = PerturbationSpec { kind, seed: 8_000 + i as u64 };
            let (mutated, report) = match perturb(scenario, &spec) {
                Ok(pair) => pair,
                Err(EnvError::PerturbationInfeasible { .. }) => continue,
                Err(other) => panic!("unexpected failure: {other}"),
            };
            successes += 1;
            check.ok(report.kind == kind, || format!("{kind:?}: report kind mismatch"));
            for (task, evidence) in scenario.tasks.iter().zip(&report.tasks) {
                check.ok(evidence.task_id == task.id, || {
                    format!("{kind:?}: evidence order broken on {}", scenario.name)
                });
                check.ok(!evidence.changed_steps.is_empty(), || {
                    format!("{kind:?}: empty evidence on {}", task.id)
                });
                let base = solve(scenario, task).expect("base solvable").canonical_strings();
                match solve(&mutated, task) {
                    Ok(after) => {
                        check.ok(after.actions.len() <= task.max_steps, || {
                            format!("{kind:?} blew the budget on {}", task.id)
                        });
                        check.ok(base != after.canonical_strings(), || {
                            format!("{kind:?} left the solution of {} untouched", task.id)
                        });
                    }
                    Err(e) => check.ok(false, || format!("{kind:?} broke {}: {e}", task.id)),
                }
            }
        }
        check.ok(successes >= 2, || format!("{kind:?} almost never applicable"));
        applied += successes;
    }

    // Equivalence classes partition the action set, members agree on the
    // next state, and distinct classes lead to distinct states.
    let mut states_classed = 0usize;
    for scenario in mixed_suite(942) {
        for task in &scenario.tasks {
            for state in solution_states(&scenario, task) {
                let obs = observe_task(&scenario, task, &state, &[]).expect("observe");
                let classes = equivalence_classes(&scenario, &state, &obs).expect("classes");

                let mut from_classes: Vec<String> =
                    classes.iter().flatten().map(Action::canonical).collect();
                from_classes.sort();
                let mut enumerated: Vec<String> =
                    enumerate_actions(&obs).iter().map(Action::canonical).collect();
                enumerated.sort();
                check.ok(from_classes == enumerated, || {
                    format!("{}: classes do not partition the action set", scenario.name)
                });

                let outcomes: Vec<UiState> = classes
                    .iter()
                    .map(|c| transition(&scenario, &state, &c[0]).expect("transition"))
                    .collect();
                for (ci, class) in classes.iter().enumerate() {
                    for action in class {
                        let next =
                            transition(&scenario, &state, action).expect("transition");
                        check.ok(next == outcomes[ci], || {
                            format!("{}: member disagrees with its class", scenario.name)
                        });
                    }
                }
                for i in 0..outcomes.len() {
                    for j in i + 1..outcomes.len() {
                        check.ok(outcomes[i] != outcomes[j], || {
                            format!("{}: two classes share an outcome", scenario.name)
                        });
                    }
                }
                states_classed += 1;
            }
        }
    }
    check.ok(states_classed >= 10, || format!("only {states_classed} states classed"));

    // Canonical action strings are injective, including hostile text inputs.
    let mut seen: HashMap<String, Action> = HashMap::new();
    let mut collisions = 0usize;
    let mut record = |action: Action| {
        let canon = action.canonical();
        if let Some(prev) = seen.get(&canon) {
            if prev != &action {
                collisions += 1;
            }
        } else {
            seen.insert(canon, action);
        }
    };
    for scenario in mixed_suite(943) {
        for task in &scenario.tasks {
            for state in solution_states(&scenario, task) {
                let obs = observe_task(&scenario, task, &state, &[]).expect("observe");
                for action in enumerate_actions(&obs) {
                    record(action);
                }
            }
        }
    }
    let tricky = [
        "hi", "hi'", "a\\'b", "3: click", "click 3", "input_text 2 'x'", "", " ",
        "quote\"inside", "back\\slash", "'", "''", "\\'",
    ];
    for (i, text) in tricky.iter().enumerate() {
        for idx in 0..3 {
            record(Action::input_text(idx, (*text).to_string()));
        }
        record(Action::input_text(i, "fixed".to_string()));
    }
    check.ok(collisions == 0, || format!("{collisions} canonical string collisions"));
    check.ok(seen.len() >= 60, || format!("only {} distinct actions exercised", seen.len()));

    // Sampled rollouts of the uniform policy match the exact chain
    // probabilities at ten thousand draws.
    let rollouts = 10_000usize;
    let params = PolicyParams::zeros(FeatureConfig::default());
    let mut targets: Vec<(Scenario, usize)> = vec![(toggle_scenario(), 0)];
    targets.push((chain_suite(2, 944)[0].clone(), 0));
    let mut mc_details = Vec::new();
    for (round, (scenario, ti)) in targets.iter().enumerate() {
        let task = &scenario.tasks[*ti];
        let exact = uniform_success_probability(scenario, task);
        let mut hits = 0usize;
        for i in 0..rollouts {
            let mut rng = stream(56, "a9-mc", (round * rollouts + i) as u64);
            let rollout =
                run_policy(scenario, task, &params, Some(&mut rng)).expect("rollout");
            hits += usize::from(rollout.success);
        }
        let empirical = hits as f64 / rollouts as f64;
        check.ok((empirical - exact).abs() <= 0.02, || {
            format!("{}: sampled {empirical:.4} vs exact {exact:.4}", scenario.name)
        });
        if scenario.name == "mc-toggle" {
            let by_hand = 0.2 * (1.0 + 0.6 + 0.36);
            check.ok((exact - by_hand).abs() < 1e-12, || {
                format!("toggle dp {exact} disagrees with pencil and paper {by_hand}")
            });
        }
        mc_details.push(format!("{} {empirical:.3}~{exact:.3}", scenario.name));
    }

    check.finish(
        9,
        "environment-oracles",
        &format!(
            "{applied} perturbations applied, {states_classed} states classed, \
             {} actions injective, rollouts {}",
            seen.len(),
            mc_details.join(" / ")
        ),
    );
}
