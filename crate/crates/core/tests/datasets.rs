use inac::data::{estimate_behavior, read_dataset, write_dataset, OfflineDataset};
use inac::envs::{Action, FourRooms};
use inac::experiment::{generate_dataset, optimal_policy, Recipe};
use inac::mdp::SupportSet;

fn env() -> FourRooms<f64> {
    FourRooms::new()
}

#[test]
fn expert_data_follows_the_optimal_path() {
    let env = env();
    let data = generate_dataset(&env, Recipe::Expert, 10_000, 0).unwrap();
    assert_eq!(data.len(), 10_000);
    assert_eq!(data.source_counts(), vec![("expert".to_string(), 10_000)]);
    let pi = optimal_policy(&env).unwrap();
    for t in &data.transitions {
        assert_eq!(pi.prob(t.state, t.action), 1.0);
    }
    // every state on the start-to-goal path shows up
    let mdp = env.mdp();
    let mut s = env.start_state();
    let b = estimate_behavior(&data, mdp.n_states(), 4).unwrap();
    for _ in 0..30 {
        assert!(b.is_visited(s));
        let a = pi.mode_actions()[s];
        s = mdp.successors(s, a)[0].0;
    }
    assert_eq!(s, env.goal_state());
}

#[test]
fn random_data_covers_every_pair() {
    let env = env();
    for seed in 0..20 {
        let data = generate_dataset(&env, Recipe::Random, 10_000, seed).unwrap();
        let b = estimate_behavior(&data, env.n_states(), 4).unwrap();
        assert_eq!(b.support(), &SupportSet::full(env.n_states(), 4), "seed {seed}");
    }
}

#[test]
fn random_actions_are_uniform() {
    let env = env();
    let data = generate_dataset(&env, Recipe::Random, 10_000, 3).unwrap();
    let mut counts = [0usize; 4];
    for t in &data.transitions {
        counts[t.action] += 1;
    }
    // binomial(10000, 1/4): sd about 43
    for c in counts {
        assert!((c as f64 - 2500.0).abs() < 5.0 * 43.3, "{counts:?}");
    }
}

#[test]
fn mixed_and_missing_action_recipes() {
    let env = env();
    let mixed = generate_dataset(&env, Recipe::Mixed, 10_000, 0).unwrap();
    assert_eq!(mixed.len(), 10_000);
    let counts = mixed.source_counts();
    assert_eq!(counts, vec![("expert".to_string(), 100), ("random".to_string(), 9900)]);
    assert!(mixed.meta[..100].iter().all(|m| mixed.sources[m.source as usize] == "expert"));

    let missing = generate_dataset(&env, Recipe::MissingAction, 10_000, 0).unwrap();
    let room = env.upper_left_room();
    let down = Action::Down.index();
    assert!(!missing.transitions.iter().any(|t| t.action == down && room.contains(&t.state)));
    let removed = mixed.transitions.iter().filter(|t| t.action == down && room.contains(&t.state)).count();
    assert!(removed > 0);
    assert_eq!(missing.len() + removed, mixed.len());
    let b = estimate_behavior(&missing, env.n_states(), 4).unwrap();
    for &s in &room {
        if b.is_visited(s) {
            assert!(!b.support().allows(s, down));
        }
    }
}

#[test]
fn datasets_are_deterministic_and_round_trip() {
    let env = env();
    let a = generate_dataset(&env, Recipe::MissingAction, 2000, 9).unwrap();
    let b = generate_dataset(&env, Recipe::MissingAction, 2000, 9).unwrap();
    assert_eq!(a, b);
    let dir = tempfile_dir();
    let path = dir.join("d.csv");
    write_dataset(&a, &path).unwrap();
    let back: OfflineDataset<f64> = read_dataset(&path).unwrap();
    assert_eq!(back.transitions, a.transitions);
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("inac-datasets-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
