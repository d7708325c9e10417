//! Softmax and Bellman backup operators.
//!
//! Every log-sum-exp subtracts the maximum over the masked-in entries before
//! exponentiating, so temperatures as small as 1e-4 stay finite. Actions with
//! zero behavior probability are removed from a sum before any `log` or `exp`
//! is taken, which is how `0 * inf = 0` and `0 * log 0 = 0` are realized.

use crate::error::{Error, Result};
use crate::mdp::{check_policy_shape, Policy, QTable, SupportSet, TabularMdp, VTable};
use crate::scalar::Scalar;

/// Strictly positive softmax temperature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Temperature<T>(T);

impl<T: Scalar> Temperature<T> {
    pub fn new(tau: T) -> Result<Self> {
        if tau > T::zero() && tau.is_finite() {
            Ok(Self(tau))
        } else {
            Err(Error::BadTemperature(tau.to_f64_lossy()))
        }
    }

    pub fn get(self) -> T {
        self.0
    }
}

/// Which maximization a Bellman backup bootstraps with.
#[derive(Clone, Debug, PartialEq)]
pub enum BackupKind<T> {
    /// `max_a q(s', a)`
    HardMax,
    /// `tau log sum_a exp(q(s', a) / tau)`
    SoftMax(Temperature<T>),
    /// `max` restricted to the supported actions of `s'`.
    InSampleHardMax(SupportSet),
    /// Log-sum-exp restricted to the supported actions of `s'`.
    InSampleSoftMax(SupportSet, Temperature<T>),
}

impl<T: Scalar> BackupKind<T> {
    pub fn support(&self) -> Option<&SupportSet> {
        match self {
            BackupKind::InSampleHardMax(s) | BackupKind::InSampleSoftMax(s, _) => Some(s),
            _ => None,
        }
    }

    /// Bootstrap value of one q row, `None` when the support row is empty.
    pub fn state_value(&self, q_row: &[T], state: usize) -> Option<T> {
        match self {
            BackupKind::HardMax => Some(masked_max(q_row, None)),
            BackupKind::SoftMax(tau) => Some(softmax_value(q_row, *tau)),
            BackupKind::InSampleHardMax(support) => {
                let mask = support.row(state);
                mask.iter().any(|&m| m).then(|| masked_max(q_row, Some(mask)))
            }
            BackupKind::InSampleSoftMax(support, tau) => {
                insample_softmax_value(q_row, support.row(state), *tau).ok()
            }
        }
    }
}

/// What an in-sample backup does with a successor state that has no
/// supported action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EmptySupport<T> {
    /// Report [`Error::EmptySupport`].
    Reject,
    /// Use this constant as the successor's value.
    Bootstrap(T),
}

fn masked_max<T: Scalar>(values: &[T], mask: Option<&[bool]>) -> T {
    values
        .iter()
        .enumerate()
        .filter(|(i, _)| mask.map_or(true, |m| m[*i]))
        .fold(T::neg_infinity(), |acc, (_, &v)| acc.max(v))
}

/// `log sum_{i: mask_i} exp(values_i)`, shifted by the masked maximum.
pub fn log_sum_exp<T: Scalar>(values: &[T], mask: &[bool]) -> Result<T> {
    assert_eq!(values.len(), mask.len(), "log_sum_exp: mask length");
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyMask);
    }
    Ok(shifted_lse(values, Some(mask), T::one()))
}

/// `m + tau * log sum exp((x - m) / tau)` over masked entries, `m` the masked max.
fn shifted_lse<T: Scalar>(values: &[T], mask: Option<&[bool]>, tau: T) -> T {
    let m = masked_max(values, mask);
    if !m.is_finite() {
        return m;
    }
    let sum: T = values
        .iter()
        .enumerate()
        .filter(|(i, _)| mask.map_or(true, |mk| mk[*i]))
        .map(|(_, &v)| ((v - m) / tau).exp())
        .sum();
    m + tau * sum.ln()
}

/// `tau log sum_a exp(q(a) / tau)` over all actions.
pub fn softmax_value<T: Scalar>(q_row: &[T], tau: Temperature<T>) -> T {
    shifted_lse(q_row, None, tau.get())
}

/// `tau log sum_{a in support} exp(q(a) / tau)`.
pub fn insample_softmax_value<T: Scalar>(
    q_row: &[T],
    support_row: &[bool],
    tau: Temperature<T>,
) -> Result<T> {
    assert_eq!(q_row.len(), support_row.len(), "support row length");
    if !support_row.iter().any(|&m| m) {
        return Err(Error::EmptyMask);
    }
    Ok(shifted_lse(q_row, Some(support_row), tau.get()))
}

/// In-sample softmax greedy distribution: zero where `beta` is zero,
/// proportional to `exp(q / tau)` elsewhere.
pub fn insample_softmax_policy<T: Scalar>(
    q_row: &[T],
    beta_row: &[T],
    tau: Temperature<T>,
) -> Result<Vec<T>> {
    assert_eq!(q_row.len(), beta_row.len(), "behavior row length");
    let mask: Vec<bool> = beta_row.iter().map(|&b| b > T::zero()).collect();
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyMask);
    }
    let m = masked_max(q_row, Some(&mask));
    let mut out: Vec<T> = q_row
        .iter()
        .zip(&mask)
        .map(|(&q, &on)| {
            if on {
                ((q - m) / tau.get()).exp()
            } else {
                T::zero()
            }
        })
        .collect();
    let z: T = out.iter().copied().sum();
    out.iter_mut().for_each(|p| *p /= z);
    Ok(out)
}

/// Row-wise [`insample_softmax_policy`] over a whole table.
pub fn insample_softmax_policy_table<T: Scalar>(
    q: &QTable<T>,
    beta: &Policy<T>,
    tau: Temperature<T>,
) -> Result<Policy<T>> {
    let mut probs = Vec::with_capacity(q.as_slice().len());
    for s in 0..q.n_states() {
        probs.extend(insample_softmax_policy(q.row(s), beta.row(s), tau).map_err(|_| Error::EmptySupport(s))?);
    }
    Policy::new(q.n_states(), q.n_actions(), probs)
}

/// Importance-weighted form of the in-sample softmax:
/// `tau log E_{a ~ beta}[exp(q(a)/tau - log beta(a))]`, the expectation taken
/// exactly over `beta`.
pub fn expected_insample_softmax_value<T: Scalar>(
    q_row: &[T],
    beta_row: &[T],
    tau: Temperature<T>,
) -> Result<T> {
    let tau = tau.get();
    let terms: Vec<(T, T)> = q_row
        .iter()
        .zip(beta_row)
        .filter(|(_, &b)| b > T::zero())
        .map(|(&q, &b)| (b, q / tau - b.ln()))
        .collect();
    if terms.is_empty() {
        return Err(Error::EmptyMask);
    }
    let m = terms.iter().fold(T::neg_infinity(), |acc, &(_, x)| acc.max(x));
    let sum: T = terms.iter().map(|&(b, x)| b * (x - m).exp()).sum();
    Ok(tau * (m + sum.ln()))
}

/// Monte-Carlo estimate of the in-sample softmax from actions drawn from
/// `beta`: `tau log (1/n) sum_i exp(q(a_i)/tau - log beta(a_i))`.
pub fn sampled_insample_softmax_value<T: Scalar>(
    q_row: &[T],
    beta_row: &[T],
    samples: &[usize],
    tau: Temperature<T>,
) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let tau = tau.get();
    let mut xs = Vec::with_capacity(samples.len());
    for &a in samples {
        let b = beta_row[a];
        if !(b > T::zero()) {
            return Err(Error::ZeroProbabilitySample { action: a });
        }
        xs.push(q_row[a] / tau - b.ln());
    }
    let m = xs.iter().fold(T::neg_infinity(), |acc, &x| acc.max(x));
    let sum: T = xs.iter().map(|&x| (x - m).exp()).sum();
    Ok(tau * (m + (sum / T::from_usize_lossy(samples.len())).ln()))
}

/// Entropy-regularized state value `sum_a pi(a|s) (q(s,a) - tau log pi(a|s))`.
pub fn soft_policy_value<T: Scalar>(q: &QTable<T>, pi: &Policy<T>, tau: Temperature<T>, state: usize) -> T {
    soft_row_value(q.row(state), pi.row(state), tau.get())
}

pub(crate) fn soft_row_value<T: Scalar>(q_row: &[T], pi_row: &[T], tau: T) -> T {
    q_row
        .iter()
        .zip(pi_row)
        .filter(|(_, &p)| p > T::zero())
        .map(|(&q, &p)| p * (q - tau * p.ln()))
        .sum()
}

/// Bootstrap value of every state under `kind`.
pub fn bootstrap_values<T: Scalar>(
    q: &QTable<T>,
    kind: &BackupKind<T>,
    empty: EmptySupport<T>,
) -> Result<Vec<Option<T>>> {
    if let Some(support) = kind.support() {
        crate::mdp::check_support_shape(q, support)?;
    }
    Ok((0..q.n_states())
        .map(|s| match kind.state_value(q.row(s), s) {
            Some(v) => Some(v),
            None => match empty {
                EmptySupport::Bootstrap(c) => Some(c),
                EmptySupport::Reject => None,
            },
        })
        .collect())
}

/// One application of the chosen optimality operator:
/// `r(s,a) + gamma E_{s'}[g(q(s', .))]`.
///
/// Fails if an in-sample support is empty at a successor reached with positive
/// probability; see [`backup_with`] for a constant fallback.
pub fn backup<T: Scalar>(mdp: &TabularMdp<T>, q: &QTable<T>, kind: &BackupKind<T>) -> Result<QTable<T>> {
    backup_with(mdp, q, kind, EmptySupport::Reject)
}

pub fn backup_with<T: Scalar>(
    mdp: &TabularMdp<T>,
    q: &QTable<T>,
    kind: &BackupKind<T>,
    empty: EmptySupport<T>,
) -> Result<QTable<T>> {
    check_q_shape(mdp, q)?;
    let boot = bootstrap_values(q, kind, empty)?;
    let mut out = Vec::with_capacity(q.as_slice().len());
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let mut acc = T::zero();
            for &(next, p) in mdp.successors(s, a) {
                acc += p * boot[next].ok_or(Error::EmptySupport(next))?;
            }
            out.push(mdp.reward(s, a) + mdp.gamma() * acc);
        }
    }
    Ok(QTable::from_vec(mdp.n_states(), mdp.n_actions(), out))
}

pub(crate) fn check_q_shape<T: Scalar>(mdp: &TabularMdp<T>, q: &QTable<T>) -> Result<()> {
    if q.n_states() != mdp.n_states() || q.n_actions() != mdp.n_actions() {
        return Err(Error::Shape {
            expected: format!("{}x{} q table", mdp.n_states(), mdp.n_actions()),
            got: format!("{}x{}", q.n_states(), q.n_actions()),
        });
    }
    Ok(())
}

/// On-policy entropy-regularized backup
/// `r + gamma E_{s', a' ~ P^pi}[q(s', a') - tau log pi(a'|s')]`.
///
/// Panics if the shapes of `mdp`, `q` and `pi` disagree.
pub fn onpolicy_soft_backup<T: Scalar>(
    mdp: &TabularMdp<T>,
    q: &QTable<T>,
    pi: &Policy<T>,
    tau: Temperature<T>,
) -> QTable<T> {
    check_q_shape(mdp, q).expect("onpolicy_soft_backup: q shape");
    check_policy_shape(mdp, pi).expect("onpolicy_soft_backup: policy shape");
    let v = VTable::new(
        (0..mdp.n_states())
            .map(|s| soft_policy_value(q, pi, tau, s))
            .collect(),
    );
    mdp.q_from_v(&v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(x: f64) -> Temperature<f64> {
        Temperature::new(x).unwrap()
    }

    // 2 + ln(1 + e^-1), evaluated with 40-digit arithmetic.
    const TWO_PLUS_LOG1P_EINV: f64 = 2.313_261_687_518_222_8;

    #[test]
    fn temperature_rejects_non_positive() {
        assert!(Temperature::new(0.0).is_err());
        assert!(Temperature::new(-1.0).is_err());
        assert!(Temperature::new(f64::NAN).is_err());
    }

    #[test]
    fn log_sum_exp_examples() {
        let v = log_sum_exp(&[0.0, 0.0], &[true, true]).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(log_sum_exp(&[5.0, f64::MIN], &[true, false]).unwrap(), 5.0);
        let v = log_sum_exp(&[1000.0, 1000.0], &[true, true]).unwrap();
        assert!((v - (1000.0 + std::f64::consts::LN_2)).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[1.0f64], &[false]), Err(Error::EmptyMask));
    }

    #[test]
    fn softmax_value_examples() {
        assert!((softmax_value(&[0.0, 0.0], t(1.0)) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((softmax_value(&[1.0, 2.0, 3.0], t(0.01)) - 3.0).abs() < 1e-3);
        assert!((softmax_value(&[1.0, 2.0], t(1.0)) - TWO_PLUS_LOG1P_EINV).abs() < 1e-14);
    }

    #[test]
    fn insample_softmax_value_examples() {
        let q = [1.0, 2.0, 5.0];
        let v = insample_softmax_value(&q, &[true, true, false], t(1.0)).unwrap();
        assert!((v - TWO_PLUS_LOG1P_EINV).abs() < 1e-14);
        assert_eq!(insample_softmax_value(&q, &[false, false, true], t(0.3)).unwrap(), 5.0);
        let full = insample_softmax_value(&q, &[true; 3], t(0.7)).unwrap();
        assert_eq!(full, softmax_value(&q, t(0.7)));
        assert!(insample_softmax_value(&q, &[false; 3], t(1.0)).is_err());
    }

    #[test]
    fn insample_softmax_policy_examples() {
        let p = insample_softmax_policy(&[0.0, 0.0], &[0.9, 0.1], t(1.0)).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        let p = insample_softmax_policy(&[1.0, 2.0, 9.0], &[0.5, 0.5, 0.0], t(1.0)).unwrap();
        let e = std::f64::consts::E;
        assert!((p[0] - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((p[1] - e / (1.0 + e)).abs() < 1e-15);
        assert_eq!(p[2], 0.0);
        assert_eq!(
            insample_softmax_policy(&[100.0, -3.0], &[0.0, 1.0], t(0.01)).unwrap(),
            vec![0.0, 1.0]
        );
        assert!(insample_softmax_policy(&[1.0, 2.0], &[0.0, 0.0], t(1.0)).is_err());
    }

    #[test]
    fn sampled_value_examples() {
        let q = [1.0, 2.0, 5.0];
        let beta = [0.25, 0.5, 0.25];
        let exhaustive = sampled_insample_softmax_value(&q, &beta, &[0, 1, 1, 2], t(1.0)).unwrap();
        let exact = insample_softmax_value(&q, &[true; 3], t(1.0)).unwrap();
        assert!((exhaustive - exact).abs() < 1e-12);
        let v = sampled_insample_softmax_value(&[3.0, 7.5], &[0.0, 1.0], &[1], t(0.2)).unwrap();
        assert_eq!(v, 7.5);
        assert_eq!(
            sampled_insample_softmax_value(&q, &[0.5, 0.5, 0.0], &[2], t(1.0)),
            Err(Error::ZeroProbabilitySample { action: 2 })
        );
    }

    #[test]
    fn soft_policy_value_examples() {
        let q = QTable::from_vec(1, 2, vec![0.0, 0.0]);
        let uni = crate::mdp::uniform_policy(1, 2);
        assert!((soft_policy_value(&q, &uni, t(1.0), 0) - std::f64::consts::LN_2).abs() < 1e-15);
        let q = QTable::from_vec(1, 2, vec![3.0, -1.0]);
        let det = Policy::deterministic(&[0], 2).unwrap();
        assert_eq!(soft_policy_value(&q, &det, t(5.0), 0), 3.0);
    }

    #[test]
    fn backup_single_state_fixed_points() {
        let mdp = TabularMdp::new(1, 2, vec![1.0, 1.0], vec![0.0, 1.0], 0.9).unwrap();
        let q = QTable::from_vec(1, 2, vec![9.0, 10.0]);
        let next = backup(&mdp, &q, &BackupKind::HardMax).unwrap();
        assert!(next.sup_distance(&q) < 1e-12);

        let support = SupportSet::from_mask(1, 2, vec![true, false]).unwrap();
        let q = QTable::from_vec(1, 2, vec![0.0, 1.0]);
        let next = backup(&mdp, &q, &BackupKind::InSampleHardMax(support)).unwrap();
        assert!(next.sup_distance(&q) < 1e-12);

        let mdp0 = TabularMdp::new(1, 2, vec![1.0, 1.0], vec![0.0, 0.0], 0.9).unwrap();
        let x = 9.0 * std::f64::consts::LN_2;
        let q = QTable::from_vec(1, 2, vec![x, x]);
        let next = backup(&mdp0, &q, &BackupKind::SoftMax(t(1.0))).unwrap();
        assert!(next.sup_distance(&q) < 1e-12);
    }

    #[test]
    fn backup_rejects_reachable_empty_support() {
        let mdp = TabularMdp::new(2, 1, vec![0.0, 1.0, 0.0, 1.0], vec![0.0, 0.0], 0.5).unwrap();
        let support = SupportSet::from_mask(2, 1, vec![true, false]).unwrap();
        let q = QTable::zeros(2, 1);
        let kind = BackupKind::InSampleHardMax(support);
        assert_eq!(backup(&mdp, &q, &kind), Err(Error::EmptySupport(1)));
        let q1 = backup_with(&mdp, &q, &kind, EmptySupport::Bootstrap(2.0)).unwrap();
        assert_eq!(q1.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn onpolicy_backup_examples() {
        let mdp = TabularMdp::new(1, 2, vec![1.0, 1.0], vec![0.0, 0.0], 0.9).unwrap();
        let uni = crate::mdp::uniform_policy(1, 2);
        let x = 9.0 * std::f64::consts::LN_2;
        let q = QTable::from_vec(1, 2, vec![x, x]);
        assert!(onpolicy_soft_backup(&mdp, &q, &uni, t(1.0)).sup_distance(&q) < 1e-12);

        let q = QTable::from_vec(1, 2, vec![1.0, 4.0]);
        let det = Policy::deterministic(&[1], 2).unwrap();
        let out = onpolicy_soft_backup(&mdp, &q, &det, t(3.0));
        assert_eq!(out.as_slice(), &[3.6, 3.6]);

        let plain = mdp.q_from_v(&VTable::new(vec![2.5]));
        let tiny = onpolicy_soft_backup(&mdp, &q, &uni, t(1e-12));
        assert!(tiny.sup_distance(&plain) < 1e-9);
    }
}
