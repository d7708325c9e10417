use inac::envs::{random_mdp, FourRooms};
use inac::mdp::{exact_policy_value, uniform_policy, Policy, QTable, SupportSet, TabularMdp};
use inac::operators::{insample_softmax_policy_table, BackupKind, Temperature};
use inac::scalar::sup_norm_diff;
use inac::solvers::{
    brute_force_insample_optimum, exact_soft_q, insample_soft_policy_iteration, tau_limit_check, value_iteration,
    SolveOptions,
};

fn tau(t: f64) -> Temperature<f64> {
    Temperature::new(t).unwrap()
}

fn seed7() -> TabularMdp<f64> {
    random_mdp(8, 3, 3, 7).unwrap()
}

/// Action `s % 3` removed at even states.
fn seed7_support() -> SupportSet {
    let mask = (0..8).flat_map(|s| (0..3).map(move |a| s % 2 == 1 || a != s % 3)).collect();
    SupportSet::from_mask(8, 3, mask).unwrap()
}

// reference values from an independent numpy solve of the same MDP text
const SOFT_ROW0: [f64; 3] = [6.1391305893194295, 6.441994881027441, 5.949502378576451];
const SOFT_V0: f64 = 6.442718583058266;
const HARD_ROW0: [f64; 3] = [6.002486825753209, 6.33822370230703, 5.817883173551062];
const UNIFORM_ROW0: [f64; 3] = [5.17096979088188, 5.299635776447553, 5.0180081226204365];

#[test]
fn insample_fixed_points_match_reference() {
    let mdp = seed7();
    let opts = SolveOptions::default().with_tol(1e-13);
    let zero = QTable::zeros(8, 3);
    let kind = BackupKind::InSampleSoftMax(seed7_support(), tau(0.1));
    let soft = value_iteration(&mdp, &kind, &zero, &opts).unwrap();
    assert!(sup_norm_diff(soft.q.row(0), &SOFT_ROW0) < 1e-9);
    assert!((kind.state_value(soft.q.row(0), 0).unwrap() - SOFT_V0).abs() < 1e-9);
    let hard = value_iteration(&mdp, &BackupKind::InSampleHardMax(seed7_support()), &zero, &opts).unwrap();
    assert!(sup_norm_diff(hard.q.row(0), &HARD_ROW0) < 1e-9);
}

#[test]
fn uniform_soft_evaluation_matches_reference() {
    let q = exact_soft_q(&seed7(), &uniform_policy(8, 3), tau(0.1)).unwrap();
    assert!(sup_norm_diff(q.row(0), &UNIFORM_ROW0) < 1e-10);
}

#[test]
fn exact_evaluation_matches_long_iteration() {
    let mdp = random_mdp::<f64>(3, 2, 2, 0).unwrap();
    let pi = uniform_policy(3, 2);
    let exact = exact_policy_value(&mdp, &pi).unwrap();
    let mut v = vec![0.0; 3];
    for _ in 0..1_000_000 {
        v = (0..3)
            .map(|s| {
                (0..2)
                    .map(|a| {
                        let next: f64 = mdp.transition_row(s, a).iter().zip(&v).map(|(p, x)| p * x).sum();
                        0.5 * (mdp.reward(s, a) + mdp.gamma() * next)
                    })
                    .sum()
            })
            .collect();
    }
    for (s, &x) in v.iter().enumerate() {
        assert!((exact.get(s) - x).abs() < 1e-8);
    }
}

#[test]
fn fixed_point_independent_of_start() {
    let mdp = seed7();
    let opts = SolveOptions::default();
    let kind = BackupKind::InSampleSoftMax(seed7_support(), tau(0.1));
    let a = value_iteration(&mdp, &kind, &QTable::filled(8, 3, 30.0), &opts).unwrap();
    let b = value_iteration(&mdp, &kind, &QTable::filled(8, 3, -30.0), &opts).unwrap();
    // each run stops within gamma tol / (1 - gamma) of the fixed point
    assert!(a.q.sup_distance(&b.q) <= 2.0 * 9.0 * opts.tol);
}

#[test]
fn policy_iteration_matches_value_iteration() {
    let mdp = random_mdp::<f64>(6, 3, 3, 3).unwrap();
    let beta = uniform_policy(6, 3);
    let t = tau(0.1);
    let pi = insample_soft_policy_iteration(&mdp, &beta, t, 1e-12, 200).unwrap();
    assert!(pi.report.converged);
    let vi = value_iteration(
        &mdp,
        &BackupKind::InSampleSoftMax(SupportSet::full(6, 3), t),
        &QTable::zeros(6, 3),
        &SolveOptions::default().with_tol(1e-12),
    )
    .unwrap();
    assert!(pi.q.sup_distance(&vi.q) < 1e-6);
    let consistent = insample_softmax_policy_table(&pi.q, &beta, t).unwrap();
    assert!(sup_norm_diff(consistent.as_slice(), pi.policy.as_slice()) < 1e-6);
}

#[test]
fn enumeration_matches_hard_vi_on_tiny_instance() {
    let mdp = random_mdp::<f64>(2, 2, 2, 1).unwrap();
    let support = SupportSet::from_mask(2, 2, vec![true, true, false, true]).unwrap();
    assert_eq!(support.deterministic_policy_count(), 2);
    let brute: QTable<f64> = brute_force_insample_optimum(&mdp, &support).unwrap();
    let vi = value_iteration(
        &mdp,
        &BackupKind::InSampleHardMax(support),
        &QTable::zeros(2, 2),
        &SolveOptions::default().with_tol(1e-13),
    )
    .unwrap();
    assert!(brute.sup_distance(&vi.q) < 1e-8);
}

#[test]
fn tau_gap_shrinks_on_random_mdps() {
    let schedule = [1.0, 0.1, 0.01, 1e-3, 1e-4];
    for seed in 0..5 {
        let mdp = random_mdp::<f64>(8, 4, 3, seed).unwrap();
        let gaps = tau_limit_check(&mdp, &SupportSet::full(8, 4), &schedule, &SolveOptions::default().with_tol(1e-12))
            .unwrap();
        assert!(gaps.last().unwrap().gap <= 1e-3);
        for w in gaps.windows(2) {
            assert!(w[1].gap <= w[0].gap + 1e-9);
        }
        for g in &gaps {
            assert!(g.gap <= g.bound);
        }
    }
}

#[test]
fn four_rooms_optimum_closed_form() {
    let env = FourRooms::<f64>::new();
    let vi = value_iteration(
        env.mdp(),
        &BackupKind::HardMax,
        &QTable::zeros(env.n_states(), 4),
        &SolveOptions::default().with_tol(1e-12),
    )
    .unwrap();
    let start = env.start_state();
    let v = vi.q.row(start).iter().cloned().fold(f64::MIN, f64::max);
    // the shortest path enters the goal on step 24 and keeps bouncing into it
    let closed = 10.0 * 0.9f64.powi(23);
    assert!((v - closed).abs() < 1e-9);
    assert!(v <= 10.0);
    let greedy: Policy<f64> = inac::mdp::greedy_policy(&vi.q, &SupportSet::full(env.n_states(), 4)).unwrap();
    let exact = exact_policy_value(env.mdp(), &greedy).unwrap();
    assert!((exact.get(start) - closed).abs() < 1e-12);
}
