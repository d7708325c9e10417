use inac::agents::{fqi_train, inac_train, oracle_max_train, Bootstrap, InacAgent, TrainConfig};
use inac::data::{estimate_behavior, Transition};
use inac::envs::{Action, FourRooms};
use inac::experiment::{generate_dataset, Recipe};
use inac::mdp::{exact_policy_value, uniform_policy, QTable};
use inac::operators::BackupKind;
use inac::solvers::{value_iteration, SolveOptions};

fn env() -> FourRooms<f64> {
    FourRooms::new()
}

fn start_value(env: &FourRooms<f64>, pi: &inac::Policy<f64>) -> f64 {
    exact_policy_value(env.mdp(), pi).unwrap().get(env.start_state())
}

/// The shortest path enters the goal on step 24.
fn optimum() -> f64 {
    10.0 * 0.9f64.powi(23)
}

#[test]
fn zero_updates_evaluates_the_initial_actor() {
    let env = env();
    let data = generate_dataset(&env, Recipe::Expert, 1000, 0).unwrap();
    let cfg = TrainConfig { updates: 0, bc_steps: 0, ..TrainConfig::default() };
    let run = inac_train(&data, &cfg, env.mdp(), env.start_state()).unwrap();
    assert_eq!(run.curve.points.len(), 1);
    assert_eq!(run.curve.points[0].update, 0);
    // zero logits: uniform actor
    assert_eq!(run.policy, uniform_policy(env.n_states(), 4));
    let uniform = start_value(&env, &uniform_policy(env.n_states(), 4));
    assert_eq!(run.curve.points[0].exact_start_value, uniform);
}

#[test]
fn unit_weight_actor_loss_is_scaled_cloning() {
    // q = v = init everywhere and a uniform behavior model give weight |A|
    let cfg = TrainConfig { tau: 0.3, ..TrainConfig::default() };
    let agent = InacAgent::<f64>::new(5, 4, 0.9, &cfg).unwrap();
    let batch: Vec<Transition<f64>> = (0..12)
        .map(|i| Transition { state: i % 5, action: (i * 7) % 4, reward: 0.0, next_state: (i + 1) % 5 })
        .collect();
    for t in &batch {
        assert!((agent.actor_weight(t.state, t.action) - 4.0).abs() < 1e-12);
    }
    assert!((agent.actor_loss(&batch) - 4.0 * agent.behavior_loss(&batch)).abs() < 1e-12);
}

#[test]
fn inac_on_expert_data_matches_oracle_max() {
    let env = env();
    let data = generate_dataset(&env, Recipe::Expert, 10_000, 0).unwrap();
    let cfg = TrainConfig { lr: 0.1, ..TrainConfig::default() };
    let inac = inac_train(&data, &cfg, env.mdp(), env.start_state()).unwrap();
    let oracle = oracle_max_train(&data, &cfg, env.mdp(), env.start_state()).unwrap();
    let b = estimate_behavior(&data, env.n_states(), 4).unwrap();
    let (a1, a2) = (inac.policy.mode_actions(), oracle.policy.mode_actions());
    for s in 0..env.n_states() {
        if b.is_visited(s) {
            assert_eq!(a1[s], a2[s], "state {s}");
        }
    }
    let last = inac.curve.last().unwrap();
    assert!(last.rollout_return_mean >= 0.95 * oracle.curve.last().unwrap().rollout_return_mean);
}

#[test]
fn oracle_max_reaches_the_in_sample_optimum() {
    let env = env();
    let cfg = TrainConfig { lr: 0.01, updates: 20_000, ..TrainConfig::default() };
    for recipe in [Recipe::Expert, Recipe::Random] {
        let data = generate_dataset(&env, recipe, 10_000, 0).unwrap();
        let support = estimate_behavior(&data, env.n_states(), 4).unwrap().support().clone();
        let vi = value_iteration(
            env.mdp(),
            &BackupKind::InSampleHardMax(support.clone()),
            &QTable::zeros(env.n_states(), 4),
            &SolveOptions::default().with_tol(1e-12),
        )
        .unwrap();
        let s0 = env.start_state();
        let target = vi.q.row(s0).iter().zip(support.row(s0)).filter(|(_, &ok)| ok).map(|(&q, _)| q).fold(f64::MIN, f64::max);
        let run = oracle_max_train(&data, &cfg, env.mdp(), s0).unwrap();
        let got = start_value(&env, &run.policy);
        assert!((got - target).abs() < 1e-3, "{recipe}: {got} vs {target}");
        assert!((target - optimum()).abs() < 1e-9);
    }
}

#[test]
fn oracle_max_never_bootstraps_removed_actions() {
    let env = env();
    let data = generate_dataset(&env, Recipe::MissingAction, 10_000, 0).unwrap();
    let cfg = TrainConfig { updates: 10, ..TrainConfig::default() };
    let run = oracle_max_train(&data, &cfg, env.mdp(), env.start_state()).unwrap();
    let Bootstrap::InSample(support) = run.agent.bootstrap() else {
        panic!("oracle-max bootstraps in-sample");
    };
    for s in env.upper_left_room() {
        assert!(!support.allows(s, Action::Down.index()));
    }
}

#[test]
fn fqi_depends_on_coverage() {
    let env = env();
    let cfg = TrainConfig { lr: 0.01, ..TrainConfig::default() };
    let random = generate_dataset(&env, Recipe::Random, 10_000, 0).unwrap();
    let run = fqi_train(&random, &cfg, env.mdp(), env.start_state()).unwrap();
    assert!((start_value(&env, &run.policy) - optimum()).abs() < 1e-6);
    let expert = generate_dataset(&env, Recipe::Expert, 10_000, 0).unwrap();
    let fqi = fqi_train(&expert, &cfg, env.mdp(), env.start_state()).unwrap();
    let oracle = oracle_max_train(&expert, &cfg, env.mdp(), env.start_state()).unwrap();
    assert!(fqi.curve.last().unwrap().rollout_return_mean < oracle.curve.last().unwrap().rollout_return_mean);
}

#[test]
fn training_is_deterministic() {
    let env = env();
    let data = generate_dataset(&env, Recipe::Mixed, 2000, 4).unwrap();
    let cfg = TrainConfig { updates: 2000, seed: 11, ..TrainConfig::default() };
    let a = inac_train(&data, &cfg, env.mdp(), env.start_state()).unwrap();
    let b = inac_train(&data, &cfg, env.mdp(), env.start_state()).unwrap();
    assert_eq!(a.curve.to_csv(), b.curve.to_csv());
    assert_eq!(a.policy, b.policy);
}

#[test]
fn exact_normalizer_and_count_behavior_also_learn() {
    let env = env();
    let data = generate_dataset(&env, Recipe::Expert, 10_000, 0).unwrap();
    let cfg = TrainConfig {
        lr: 0.1,
        updates: 20_000,
        behavior: inac::agents::BehaviorSource::Counts,
        normalizer: inac::agents::Normalizer::ExactTabular,
        ..TrainConfig::default()
    };
    let run = inac_train(&data, &cfg, env.mdp(), env.start_state()).unwrap();
    assert!(start_value(&env, &run.policy) > 0.95 * optimum());
}
