use proptest::prelude::*;

use inac::envs::random_mdp;
use inac::mdp::{Policy, QTable, SupportSet};
use inac::operators::{
    backup, insample_softmax_policy, insample_softmax_value, log_sum_exp, onpolicy_soft_backup, softmax_value,
    BackupKind, Temperature,
};

fn row(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, n)
}

/// Probability row with at least one positive entry.
fn beta(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.01..1.0f64], n).prop_map(|mut w| {
        if w.iter().all(|&x| x == 0.0) {
            w[0] = 1.0;
        }
        let s: f64 = w.iter().sum();
        w.iter().map(|x| x / s).collect()
    })
}

fn tau() -> impl Strategy<Value = Temperature<f64>> {
    (1e-3..10.0f64).prop_map(|t| Temperature::new(t).unwrap())
}

proptest! {
    #[test]
    fn lse_shift_invariant(q in row(6), c in -1e3..1e3f64) {
        let mask = vec![true; 6];
        let shifted: Vec<f64> = q.iter().map(|x| x + c).collect();
        let a = log_sum_exp(&q, &mask).unwrap() + c;
        let b = log_sum_exp(&shifted, &mask).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + c.abs()));
    }

    #[test]
    fn insample_value_between_max_and_max_plus_entropy(q in row(5), b in beta(5), t in tau()) {
        let mask: Vec<bool> = b.iter().map(|&x| x > 0.0).collect();
        let k = mask.iter().filter(|&&m| m).count() as f64;
        let v = insample_softmax_value(&q, &mask, t).unwrap();
        let m = q.iter().zip(&mask).filter(|(_, &ok)| ok).map(|(&x, _)| x).fold(f64::MIN, f64::max);
        prop_assert!(v >= m - 1e-12);
        prop_assert!(v <= m + t.get() * k.ln() + 1e-9);
        prop_assert!(v <= softmax_value(&q, t) + 1e-9);
    }

    #[test]
    fn insample_policy_is_a_distribution_on_the_support(q in row(5), b in beta(5), t in tau()) {
        let pi = insample_softmax_policy(&q, &b, t).unwrap();
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (p, bb) in pi.iter().zip(&b) {
            prop_assert!(*p >= 0.0);
            if *bb == 0.0 {
                prop_assert_eq!(*p, 0.0);
            }
        }
    }

    #[test]
    fn backups_are_monotone(seed in 0u64..1000, bump in prop::collection::vec(0.0..5.0f64, 15), t in tau()) {
        let mdp = random_mdp::<f64>(5, 3, 2, seed).unwrap();
        let q2 = QTable::from_vec(5, 3, (0..15).map(|i| (i as f64 * 0.37).sin()).collect());
        let q1 = QTable::from_vec(5, 3, q2.as_slice().iter().zip(&bump).map(|(a, b)| a + b).collect());
        let support = SupportSet::from_mask(5, 3, (0..15).map(|i| i % 3 != 1 || i == 1).collect()).unwrap();
        for kind in [BackupKind::HardMax, BackupKind::SoftMax(t), BackupKind::InSampleSoftMax(support, t)] {
            let (t1, t2) = (backup(&mdp, &q1, &kind).unwrap(), backup(&mdp, &q2, &kind).unwrap());
            for (a, b) in t1.as_slice().iter().zip(t2.as_slice()) {
                prop_assert!(a + 1e-12 >= *b);
            }
        }
        let pi = Policy::new(5, 3, vec![1.0 / 3.0; 15]).unwrap();
        let (t1, t2) = (onpolicy_soft_backup(&mdp, &q1, &pi, t), onpolicy_soft_backup(&mdp, &q2, &pi, t));
        for (a, b) in t1.as_slice().iter().zip(t2.as_slice()) {
            prop_assert!(a + 1e-12 >= *b);
        }
    }
}

#[test]
fn single_precision_backup_agrees_with_double() {
    let m64 = random_mdp::<f64>(6, 3, 3, 2).unwrap();
    let m32 = random_mdp::<f32>(6, 3, 3, 2).unwrap();
    let q64 = QTable::from_vec(6, 3, (0..18).map(|i| i as f64 * 0.1).collect());
    let q32 = QTable::from_vec(6, 3, (0..18).map(|i| i as f32 * 0.1).collect());
    let k64 = BackupKind::SoftMax(Temperature::new(0.5f64).unwrap());
    let k32 = BackupKind::SoftMax(Temperature::new(0.5f32).unwrap());
    let (a, b) = (backup(&m64, &q64, &k64).unwrap(), backup(&m32, &q32, &k32).unwrap());
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        assert!((x - *y as f64).abs() < 1e-4);
    }
}
