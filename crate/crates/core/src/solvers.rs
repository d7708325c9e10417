//! Fixed-point solvers: value iteration for every backup kind, entropy
//! regularized policy evaluation, in-sample soft policy iteration, and an
//! enumeration oracle for the in-sample hard-max optimum.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mdp::{
    check_policy_shape, exact_policy_value, policy_kernel, solve_policy_system, Policy, QTable, SupportSet,
    TabularMdp, VTable,
};
use crate::operators::{
    backup_with, check_q_shape, insample_softmax_policy_table, onpolicy_soft_backup, soft_row_value,
    BackupKind, EmptySupport, Temperature,
};
use crate::scalar::{sup_norm_diff, Scalar};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Outcome of a fixed-point iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport<T> {
    pub q: QTable<T>,
    pub iterations: usize,
    /// Sup-norm change per iteration.
    pub residuals: Vec<T>,
    pub converged: bool,
}

impl<T: Scalar> SolveReport<T> {
    pub fn final_residual(&self) -> T {
        *self.residuals.last().expect("residual history is never empty")
    }

    /// `iteration,residual` rows, 1-based iteration numbers.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,residual\n");
        for (i, r) in self.residuals.iter().enumerate() {
            let _ = writeln!(out, "{},{:e}", i + 1, r.to_f64_lossy());
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions<T> {
    pub tol: T,
    pub max_iter: usize,
    /// Successor value used for states with no supported action.
    pub empty_support: EmptySupport<T>,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(DEFAULT_TOL),
            max_iter: DEFAULT_MAX_ITER,
            empty_support: EmptySupport::Bootstrap(T::zero()),
        }
    }
}

impl<T: Scalar> SolveOptions<T> {
    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn strict(mut self) -> Self {
        self.empty_support = EmptySupport::Reject;
        self
    }

    fn check(&self) -> Result<()> {
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Sup-norm change, ignoring the rows of `skip` states.
fn residual<T: Scalar>(a: &QTable<T>, b: &QTable<T>, skip: &[bool]) -> T {
    (0..a.n_states())
        .filter(|&s| !skip[s])
        .map(|s| sup_norm_diff(a.row(s), b.row(s)))
        .fold(T::zero(), T::max)
}

/// Iterates `q <- backup(q)` until the sup-norm change drops to `tol`.
/// States without supported actions are left out of the residual.
pub fn value_iteration<T: Scalar>(
    mdp: &TabularMdp<T>,
    kind: &BackupKind<T>,
    q0: &QTable<T>,
    opts: &SolveOptions<T>,
) -> Result<SolveReport<T>> {
    opts.check()?;
    check_q_shape(mdp, q0)?;
    let skip: Vec<bool> = match kind.support() {
        Some(sup) => (0..mdp.n_states()).map(|s| sup.is_empty_at(s)).collect(),
        None => vec![false; mdp.n_states()],
    };
    let mut q = q0.clone();
    let mut residuals = Vec::new();
    for _ in 0..opts.max_iter {
        let next = backup_with(mdp, &q, kind, opts.empty_support)?;
        let r = residual(&next, &q, &skip);
        residuals.push(r);
        q = next;
        if r <= opts.tol {
            return Ok(SolveReport {
                q,
                iterations: residuals.len(),
                residuals,
                converged: true,
            });
        }
    }
    Ok(SolveReport {
        q,
        iterations: residuals.len(),
        residuals,
        converged: false,
    })
}

/// Iterates the on-policy entropy-regularized backup from `q = 0`.
pub fn soft_policy_evaluation<T: Scalar>(
    mdp: &TabularMdp<T>,
    pi: &Policy<T>,
    tau: Temperature<T>,
    opts: &SolveOptions<T>,
) -> Result<SolveReport<T>> {
    soft_policy_evaluation_from(mdp, pi, tau, &QTable::zeros(mdp.n_states(), mdp.n_actions()), opts)
}

pub fn soft_policy_evaluation_from<T: Scalar>(
    mdp: &TabularMdp<T>,
    pi: &Policy<T>,
    tau: Temperature<T>,
    q0: &QTable<T>,
    opts: &SolveOptions<T>,
) -> Result<SolveReport<T>> {
    opts.check()?;
    check_policy_shape(mdp, pi)?;
    check_q_shape(mdp, q0)?;
    let mut q = q0.clone();
    let mut residuals = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let next = onpolicy_soft_backup(mdp, &q, pi, tau);
        let r = next.sup_distance(&q);
        residuals.push(r);
        q = next;
        if r <= opts.tol {
            converged = true;
            break;
        }
    }
    Ok(SolveReport {
        q,
        iterations: residuals.len(),
        residuals,
        converged,
    })
}

/// Entropy-regularized action values of `pi` from one linear solve.
pub fn exact_soft_q<T: Scalar>(mdp: &TabularMdp<T>, pi: &Policy<T>, tau: Temperature<T>) -> Result<QTable<T>> {
    check_policy_shape(mdp, pi)?;
    let tau = tau.get();
    // entropy bonus: -tau sum_a pi log pi
    let (r_pi, p_pi) = policy_kernel(mdp, pi, |s| {
        let zeros = vec![T::zero(); mdp.n_actions()];
        soft_row_value(&zeros, pi.row(s), tau)
    });
    let v = solve_policy_system(mdp, r_pi, p_pi);
    Ok(mdp.q_from_v(&VTable::new(v)))
}

/// Result of [`insample_soft_policy_iteration`], including every iterate.
#[derive(Clone, Debug)]
pub struct PolicyIterationOutcome<T> {
    pub policy: Policy<T>,
    pub q: QTable<T>,
    /// Residuals are the sup-norm policy changes per outer step.
    pub report: SolveReport<T>,
    /// `policies[t]` and `q_values[t]` are the t-th iterate and its soft values.
    pub policies: Vec<Policy<T>>,
    pub q_values: Vec<QTable<T>>,
}

/// In-sample soft policy iteration starting from `beta` itself.
pub fn insample_soft_policy_iteration<T: Scalar>(
    mdp: &TabularMdp<T>,
    beta: &Policy<T>,
    tau: Temperature<T>,
    tol: T,
    max_outer: usize,
) -> Result<PolicyIterationOutcome<T>> {
    insample_soft_policy_iteration_from(mdp, beta, beta, tau, tol, max_outer)
}

/// Alternates exact soft evaluation with the closed-form improvement
/// `pi <- insample_softmax_policy(q_pi, beta, tau)` until the policy moves by
/// at most `tol` in sup norm. `initial` must satisfy `initial ⪯ beta`.
pub fn insample_soft_policy_iteration_from<T: Scalar>(
    mdp: &TabularMdp<T>,
    beta: &Policy<T>,
    initial: &Policy<T>,
    tau: Temperature<T>,
    tol: T,
    max_outer: usize,
) -> Result<PolicyIterationOutcome<T>> {
    check_policy_shape(mdp, beta)?;
    check_policy_shape(mdp, initial)?;
    if !initial.is_supported_by(beta) {
        return Err(Error::InvalidArgument(
            "initial policy leaves the behavior support".into(),
        ));
    }
    if max_outer == 0 || !(tol > T::zero()) {
        return Err(Error::InvalidArgument("need tol > 0 and max_outer > 0".into()));
    }
    let mut pi = initial.clone();
    let mut q = exact_soft_q(mdp, &pi, tau)?;
    let mut policies = vec![pi.clone()];
    let mut q_values = vec![q.clone()];
    let mut residuals = Vec::new();
    let mut converged = false;
    for _ in 0..max_outer {
        let next = insample_softmax_policy_table(&q, beta, tau)?;
        let change = sup_norm_diff(next.as_slice(), pi.as_slice());
        residuals.push(change);
        pi = next;
        q = exact_soft_q(mdp, &pi, tau)?;
        policies.push(pi.clone());
        q_values.push(q.clone());
        if change <= tol {
            converged = true;
            break;
        }
    }
    Ok(PolicyIterationOutcome {
        policy: pi,
        q: q.clone(),
        report: SolveReport {
            q,
            iterations: residuals.len(),
            residuals,
            converged,
        },
        policies,
        q_values,
    })
}

/// Upper limit on the number of policies [`brute_force_insample_optimum`] enumerates.
pub const MAX_ENUMERATED_POLICIES: usize = 1 << 20;

/// In-sample optimal action values found by evaluating every deterministic
/// policy that respects `support`. Meant as an independent check of value
/// iteration on small instances (at most 12 states and 4 actions).
pub fn brute_force_insample_optimum<T: Scalar>(mdp: &TabularMdp<T>, support: &SupportSet) -> Result<QTable<T>> {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    if n > 12 || m > 4 {
        return Err(Error::TooLarge(format!("{n} states x {m} actions")));
    }
    if support.n_states() != n || support.n_actions() != m {
        return Err(Error::Shape {
            expected: format!("{n}x{m} support"),
            got: format!("{}x{}", support.n_states(), support.n_actions()),
        });
    }
    if let Some(s) = support.empty_states().first() {
        return Err(Error::EmptySupport(*s));
    }
    let count = support.deterministic_policy_count();
    if count > MAX_ENUMERATED_POLICIES {
        return Err(Error::TooLarge(format!("{count} policies")));
    }
    let choices: Vec<Vec<usize>> = (0..n).map(|s| support.allowed_actions(s).collect()).collect();
    let mut digits = vec![0usize; n];
    let mut best: Option<VTable<T>> = None;
    loop {
        let actions: Vec<usize> = digits.iter().zip(&choices).map(|(&d, c)| c[d]).collect();
        let pi = Policy::deterministic(&actions, m)?;
        let v = exact_policy_value(mdp, &pi)?;
        let better = match &best {
            None => true,
            Some(b) => v.values.iter().copied().sum::<T>() > b.values.iter().copied().sum::<T>(),
        };
        if better {
            best = Some(v);
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == n {
                let v = best.expect("at least one policy enumerated");
                return Ok(mdp.q_from_v(&v));
            }
            digits[i] += 1;
            if digits[i] < choices[i].len() {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// Sup-norm gap between the in-sample softmax and in-sample hard-max fixed
/// points at one temperature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TauGap<T> {
    pub tau: T,
    pub gap: T,
    /// `tau log(n_actions) / (1 - gamma)`
    pub bound: T,
}

/// Solves the in-sample hard-max and in-sample softmax fixed points for each
/// temperature of a decreasing schedule and reports their distance.
pub fn tau_limit_check<T: Scalar>(
    mdp: &TabularMdp<T>,
    support: &SupportSet,
    taus: &[T],
    opts: &SolveOptions<T>,
) -> Result<Vec<TauGap<T>>> {
    if taus.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("temperature schedule must decrease".into()));
    }
    let q0 = QTable::zeros(mdp.n_states(), mdp.n_actions());
    let hard = value_iteration(mdp, &BackupKind::InSampleHardMax(support.clone()), &q0, opts)?.q;
    let log_a = T::from_usize_lossy(mdp.n_actions()).ln();
    taus.iter()
        .map(|&tau| {
            let kind = BackupKind::InSampleSoftMax(support.clone(), Temperature::new(tau)?);
            let soft = value_iteration(mdp, &kind, &q0, opts)?.q;
            Ok(TauGap {
                tau,
                gap: soft.sup_distance(&hard),
                bound: tau * log_a / (T::one() - mdp.gamma()),
            })
        })
        .collect()
}
