//! Randomized property suite for the operators, solvers and agent losses.
//!
//! Every check reports the worst measured quantity over its trials next to
//! the bound it must respect. A failing check carries the seed of its worst
//! trial, which reproduces that trial through [`trial_rng`].

use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agents::{ApproxKind, InacAgent, TrainConfig};
use crate::data::Transition;
use crate::envs::random_mdp_with_gamma;
use crate::error::{Error, Result};
use crate::mdp::{greedy_policy, Policy, QTable, SupportSet, TabularMdp};
use crate::nn::{mlp, Features};
use crate::operators::{
    backup, expected_insample_softmax_value, insample_softmax_policy, insample_softmax_policy_table,
    insample_softmax_value, onpolicy_soft_backup, sampled_insample_softmax_value, softmax_value, BackupKind, Temperature,
};
use crate::scalar::sup_norm_diff;
use crate::solvers::{
    brute_force_insample_optimum, exact_soft_q, insample_soft_policy_iteration, tau_limit_check, value_iteration,
    SolveOptions,
};

/// Trials for algebraic identities.
pub const IDENTITY_TRIALS: usize = 1000;
/// Random MDP/value pairs for the contraction check.
pub const CONTRACTION_TRIALS: usize = 1000;
/// MDPs for solver-level checks.
pub const SOLVER_MDPS: usize = 100;
pub const ONPOLICY_TRIALS: usize = 200;
pub const PI_MDPS: usize = 50;
pub const TAU_MDPS: usize = 20;
pub const TAU_SCHEDULE: [f64; 5] = [1.0, 0.1, 0.01, 1e-3, 1e-4];
pub const GRADIENT_TRIALS: usize = 20;
/// Finite-difference step.
pub const FD_STEP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Identities,
    Contraction,
    Monotonicity,
    Improvement,
    TauLimit,
    Optimality,
    Gradients,
    All,
}

impl Suite {
    pub const EACH: [Suite; 7] = [
        Suite::Identities,
        Suite::Contraction,
        Suite::Monotonicity,
        Suite::Improvement,
        Suite::TauLimit,
        Suite::Optimality,
        Suite::Gradients,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Identities => "identities",
            Suite::Contraction => "contraction",
            Suite::Monotonicity => "monotonicity",
            Suite::Improvement => "improvement",
            Suite::TauLimit => "tau-limit",
            Suite::Optimality => "optimality",
            Suite::Gradients => "gradients",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    /// Worst value over all trials, in the units of `bound`.
    pub measured: f64,
    pub bound: f64,
    pub trials: usize,
    /// Seed of the worst trial.
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("suite,check,pass,measured,bound,trials,seed\n");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{},{},{},{:e},{:e},{},{}",
                c.suite, c.name, c.passed, c.measured, c.bound, c.trials, c.seed
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{} {:<13} {:<28} measured {:>12.4e}  bound {:>10.3e}  trials {:>5}  seed {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.suite,
                c.name,
                c.measured,
                c.bound,
                c.trials,
                c.seed
            );
        }
        let n_fail = self.failures().len();
        let _ = writeln!(out, "{} checks, {} failed", self.checks.len(), n_fail);
        out
    }
}

/// Tracks the worst trial of a check.
struct Worst {
    value: f64,
    seed: u64,
    trials: usize,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            seed: 0,
            trials: 0,
        }
    }

    fn record(&mut self, value: f64, seed: u64) {
        self.trials += 1;
        // the first NaN counts as worst and sticks
        if !self.value.is_nan() && (value.is_nan() || value > self.value) {
            self.value = value;
            self.seed = seed;
        }
    }

    /// Passes when the worst value is at most `bound`.
    fn at_most(self, suite: Suite, name: &'static str, bound: f64) -> Check {
        Check {
            suite: suite.name(),
            name,
            passed: self.value <= bound,
            measured: self.value,
            bound,
            trials: self.trials,
            seed: self.seed,
        }
    }
}

/// Seed of trial `i` of check `tag` under the suite seed.
pub fn trial_seed(seed: u64, tag: &str, i: usize) -> u64 {
    let mut h = seed ^ 0xCBF2_9CE4_8422_2325;
    for b in tag.bytes().chain((i as u64).to_le_bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

pub fn trial_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn temp(tau: f64) -> Temperature<f64> {
    Temperature::new(tau).expect("positive temperature")
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn random_row<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Distribution over `n` actions with each entry zeroed with probability
/// `p_zero`; at least one entry stays positive.
fn random_beta<R: Rng>(rng: &mut R, n: usize, p_zero: f64) -> Vec<f64> {
    let keep = random_mask(rng, n, p_zero);
    let mut w: Vec<f64> = keep
        .iter()
        .map(|&k| if k { rng.gen_range(0.05..1.0) } else { 0.0 })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

fn random_mask<R: Rng>(rng: &mut R, n: usize, p_zero: f64) -> Vec<bool> {
    let mut m: Vec<bool> = (0..n).map(|_| !rng.gen_bool(p_zero)).collect();
    if !m.iter().any(|&x| x) {
        m[rng.gen_range(0..n)] = true;
    }
    m
}

/// Random policy on the support of `beta`; one in four rows is deterministic.
fn random_policy_under<R: Rng>(rng: &mut R, beta: &Policy<f64>) -> Policy<f64> {
    let na = beta.n_actions();
    let mut probs = Vec::with_capacity(beta.n_states() * na);
    for s in 0..beta.n_states() {
        let allowed: Vec<usize> = (0..na).filter(|&a| beta.prob(s, a) > 0.0).collect();
        let mut row = vec![0.0; na];
        if rng.gen_bool(0.25) {
            row[allowed[rng.gen_range(0..allowed.len())]] = 1.0;
        } else {
            for &a in &allowed {
                row[a] = rng.gen_range(0.01..1.0);
            }
            let t: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= t);
        }
        probs.extend(row);
    }
    Policy::new(beta.n_states(), na, probs).expect("rows normalized")
}

fn random_behavior<R: Rng>(rng: &mut R, n_states: usize, n_actions: usize, p_zero: f64) -> Policy<f64> {
    let probs = (0..n_states).flat_map(|_| random_beta(rng, n_actions, p_zero)).collect();
    Policy::new(n_states, n_actions, probs).expect("rows normalized")
}

fn random_small_mdp<R: Rng>(rng: &mut R, max_states: usize, n_actions: usize, gamma: Option<f64>) -> TabularMdp<f64> {
    let ns = rng.gen_range(2..=max_states);
    let branching = rng.gen_range(1..=ns);
    let gamma = gamma.unwrap_or_else(|| rng.gen_range(0.5..0.99));
    random_mdp_with_gamma(ns, n_actions, branching, gamma, rng.gen()).expect("valid sizes")
}

fn random_qtable<R: Rng>(rng: &mut R, ns: usize, na: usize, scale: f64) -> QTable<f64> {
    QTable::from_vec(ns, na, random_row(rng, ns * na, -scale, scale))
}

pub fn run(suite: Suite, seed: u64) -> VerifyReport {
    let mut checks = Vec::new();
    let suites: Vec<Suite> = if suite == Suite::All { Suite::EACH.to_vec() } else { vec![suite] };
    for s in suites {
        checks.extend(match s {
            Suite::Identities => identities(seed),
            Suite::Contraction => contraction(seed),
            Suite::Monotonicity => monotonicity(seed),
            Suite::Improvement => improvement(seed),
            Suite::TauLimit => tau_limit(seed),
            Suite::Optimality => optimality(seed),
            Suite::Gradients => gradients(seed),
            Suite::All => unreachable!("expanded above"),
        });
    }
    VerifyReport { checks }
}

pub fn identities(seed: u64) -> Vec<Check> {
    let suite = Suite::Identities;
    let mut reform = Worst::new();
    let mut identity = Worst::new();
    let mut dominance = Worst::new();
    let mut nonexp = Worst::new();
    let mut shift = Worst::new();
    let mut limit = Worst::new();
    for i in 0..IDENTITY_TRIALS {
        let ts = trial_seed(seed, "identities", i);
        let mut rng = trial_rng(ts);
        let n = 10;
        let q = random_row(&mut rng, n, -5.0, 5.0);
        let beta = random_beta(&mut rng, n, 0.3);
        let mask: Vec<bool> = beta.iter().map(|&b| b > 0.0).collect();
        let tau = temp(log_uniform(&mut rng, 0.01, 10.0));

        let f = insample_softmax_value(&q, &mask, tau).expect("non-empty support");
        let g = expected_insample_softmax_value(&q, &beta, tau).expect("non-empty support");
        reform.record((f - g).abs(), ts);

        let pi = insample_softmax_policy(&q, &beta, tau).expect("non-empty support");
        let objective = |p: &[f64]| -> f64 {
            p.iter()
                .zip(&q)
                .filter(|(&pa, _)| pa > 0.0)
                .map(|(&pa, &qa)| pa * (qa - tau.get() * pa.ln()))
                .sum()
        };
        identity.record((objective(&pi) - f).abs(), ts);
        let mut excess = f64::NEG_INFINITY;
        for _ in 0..1000 {
            let mut p: Vec<f64> = mask
                .iter()
                .map(|&m| if m { rng.gen_range(0.0..1.0f64).powi(3) } else { 0.0 })
                .collect();
            let s: f64 = p.iter().sum();
            if s == 0.0 {
                continue;
            }
            p.iter_mut().for_each(|x| *x /= s);
            excess = excess.max(objective(&p) - f);
        }
        dominance.record(excess, ts);

        let q2: Vec<f64> = q.iter().map(|&x| x + rng.gen_range(-3.0..3.0)).collect();
        let f2 = insample_softmax_value(&q2, &mask, tau).expect("non-empty support");
        nonexp.record((f - f2).abs() - sup_norm_diff(&q, &q2), ts);

        let c = rng.gen_range(-100.0..100.0);
        let qc: Vec<f64> = q.iter().map(|&x| x + c).collect();
        let pc = insample_softmax_policy(&qc, &beta, tau).expect("non-empty support");
        let value_shift = (softmax_value(&qc, tau) - softmax_value(&q, tau) - c).abs();
        shift.record(value_shift.max(sup_norm_diff(&pc, &pi)), ts);

        let max = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gap = softmax_value(&q, tau) - max;
        limit.record((-gap).max(gap - tau.get() * (n as f64).ln()), ts);
    }

    // Monte-Carlo version of the reformulation on one fixed instance
    let mut mc = Worst::new();
    let ts = trial_seed(seed, "identities-mc", 0);
    let mut rng = trial_rng(ts);
    let (q, beta) = ([1.0, 2.0, 5.0], [0.5, 0.5, 0.0]);
    let samples: Vec<usize> = (0..100_000).map(|_| rng.gen_range(0..2)).collect();
    let est = sampled_insample_softmax_value(&q, &beta, &samples, temp(1.0)).expect("supported samples");
    mc.record((est - (2.0 + (-1.0f64).exp().ln_1p())).abs(), ts);

    vec![
        reform.at_most(suite, "sampling-reformulation", 1e-10),
        identity.at_most(suite, "max-entropy-identity", 1e-9),
        dominance.at_most(suite, "max-entropy-dominance", 1e-9),
        nonexp.at_most(suite, "softmax-nonexpansion", 1e-12),
        shift.at_most(suite, "shift-covariance", 1e-9),
        limit.at_most(suite, "softmax-tau-window", 1e-12),
        mc.at_most(suite, "sampled-estimate", 0.01),
    ]
}

pub fn contraction(seed: u64) -> Vec<Check> {
    let suite = Suite::Contraction;
    let mut insample = Worst::new();
    let mut ratio = Worst::new();
    let mut others = Worst::new();
    for i in 0..CONTRACTION_TRIALS {
        let ts = trial_seed(seed, "contraction", i);
        let mut rng = trial_rng(ts);
        let na = rng.gen_range(2..=4);
        let mdp = random_small_mdp(&mut rng, 8, na, None);
        let ns = mdp.n_states();
        let support = SupportSet::from_mask(ns, na, (0..ns).flat_map(|_| random_mask(&mut rng, na, 0.4)).collect())
            .expect("mask shape");
        let tau = temp(log_uniform(&mut rng, 0.01, 10.0));
        let scale = rng.gen_range(0.1..50.0);
        let q1 = random_qtable(&mut rng, ns, na, scale);
        let q2 = random_qtable(&mut rng, ns, na, scale);
        let dist = |kind: &BackupKind<f64>| -> f64 {
            let t1 = backup(&mdp, &q1, kind).expect("full support rows");
            let t2 = backup(&mdp, &q2, kind).expect("full support rows");
            t1.sup_distance(&t2)
        };
        let gap = |kind: &BackupKind<f64>| dist(kind) - mdp.gamma() * q1.sup_distance(&q2);
        let d = dist(&BackupKind::InSampleSoftMax(support.clone(), tau));
        insample.record(d - mdp.gamma() * q1.sup_distance(&q2), ts);
        ratio.record(d / q1.sup_distance(&q2) - mdp.gamma(), ts);
        let worst_other = [
            BackupKind::HardMax,
            BackupKind::SoftMax(tau),
            BackupKind::InSampleHardMax(support),
        ]
        .iter()
        .map(gap)
        .fold(f64::NEG_INFINITY, f64::max);
        others.record(worst_other, ts);
    }

    let mut unique = Worst::new();
    let tol = SolveOptions::<f64>::default().tol;
    for i in 0..SOLVER_MDPS {
        let ts = trial_seed(seed, "uniqueness", i);
        let mut rng = trial_rng(ts);
        let mdp = random_small_mdp(&mut rng, 8, 3, None);
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        let support = SupportSet::from_mask(ns, na, (0..ns).flat_map(|_| random_mask(&mut rng, na, 0.4)).collect())
            .expect("mask shape");
        let kind = BackupKind::InSampleSoftMax(support, temp(log_uniform(&mut rng, 0.01, 1.0)));
        // a step change of tol (1 - gamma) / gamma puts each run within tol of the fixed point
        let g = mdp.gamma();
        let opts = SolveOptions::default().with_tol(tol * (1.0 - g) / g);
        let hi = value_iteration(&mdp, &kind, &QTable::filled(ns, na, 50.0), &opts).expect("valid inputs");
        let lo = value_iteration(&mdp, &kind, &QTable::filled(ns, na, -50.0), &opts).expect("valid inputs");
        let d = if hi.converged && lo.converged { hi.q.sup_distance(&lo.q) } else { f64::INFINITY };
        unique.record(d, ts);
    }

    vec![
        insample.at_most(suite, "insample-softmax-contraction", 1e-12),
        ratio.at_most(suite, "lipschitz-ratio-over-gamma", 1e-12),
        others.at_most(suite, "other-backups-contraction", 1e-12),
        unique.at_most(suite, "fixed-point-uniqueness", 2.0 * tol),
    ]
}

pub fn monotonicity(seed: u64) -> Vec<Check> {
    let suite = Suite::Monotonicity;
    let mut rate = Worst::new();
    let mut mono = Worst::new();
    for i in 0..ONPOLICY_TRIALS {
        let ts = trial_seed(seed, "onpolicy", i);
        let mut rng = trial_rng(ts);
        let na = rng.gen_range(2..=4);
        let mdp = random_small_mdp(&mut rng, 8, na, None);
        let ns = mdp.n_states();
        let pi = random_behavior(&mut rng, ns, na, 0.3);
        let tau = temp(log_uniform(&mut rng, 0.01, 5.0));
        let fixed = exact_soft_q(&mdp, &pi, tau).expect("valid policy");
        let mut q = random_qtable(&mut rng, ns, na, 20.0);
        let d0 = q.sup_distance(&fixed);
        let mut worst = f64::NEG_INFINITY;
        let mut gk = 1.0;
        for _ in 1..=50 {
            q = onpolicy_soft_backup(&mdp, &q, &pi, tau);
            gk *= mdp.gamma();
            worst = worst.max(q.sup_distance(&fixed) - gk * d0);
        }
        rate.record(worst, ts);

        let q2 = random_qtable(&mut rng, ns, na, 20.0);
        let bump: Vec<f64> = (0..ns * na).map(|_| if rng.gen_bool(0.5) { rng.gen_range(0.0..5.0) } else { 0.0 }).collect();
        let q1 = QTable::from_vec(ns, na, q2.as_slice().iter().zip(&bump).map(|(a, b)| a + b).collect());
        let t1 = onpolicy_soft_backup(&mdp, &q1, &pi, tau);
        let t2 = onpolicy_soft_backup(&mdp, &q2, &pi, tau);
        let violation = t2
            .as_slice()
            .iter()
            .zip(t1.as_slice())
            .map(|(a, b)| a - b)
            .fold(f64::NEG_INFINITY, f64::max);
        mono.record(violation, ts);
    }
    vec![
        rate.at_most(suite, "onpolicy-convergence-rate", 1e-10),
        mono.at_most(suite, "onpolicy-monotonicity", 1e-12),
    ]
}

pub fn improvement(seed: u64) -> Vec<Check> {
    let suite = Suite::Improvement;
    let mut improve = Worst::new();
    let mut support = Worst::new();
    let mut agree = Worst::new();
    let opts = SolveOptions::default().with_tol(1e-11);
    for i in 0..PI_MDPS {
        let ts = trial_seed(seed, "improvement", i);
        let mut rng = trial_rng(ts);
        let na = rng.gen_range(2..=4);
        let mdp = random_small_mdp(&mut rng, 8, na, None);
        let ns = mdp.n_states();
        let beta = random_behavior(&mut rng, ns, na, 0.4);
        let tau = temp(log_uniform(&mut rng, 0.05, 2.0));
        let out = insample_soft_policy_iteration(&mdp, &beta, tau, 1e-10, 1000).expect("valid inputs");
        let mut drop = f64::NEG_INFINITY;
        for w in out.q_values.windows(2) {
            for (prev, next) in w[0].as_slice().iter().zip(w[1].as_slice()) {
                drop = drop.max(prev - next);
            }
        }
        improve.record(if out.report.converged { drop.max(0.0) } else { f64::INFINITY }, ts);
        let outside = out
            .policies
            .iter()
            .flat_map(|p| {
                p.as_slice()
                    .iter()
                    .zip(beta.as_slice())
                    .map(|(&x, &b)| if b > 0.0 { 0.0 } else { x })
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max);
        support.record(outside, ts);
        let kind = BackupKind::InSampleSoftMax(SupportSet::from_policy(&beta), tau);
        let vi = value_iteration(&mdp, &kind, &QTable::zeros(ns, na), &opts).expect("valid inputs");
        agree.record(if vi.converged { vi.q.sup_distance(&out.q) } else { f64::INFINITY }, ts);
    }
    vec![
        improve.at_most(suite, "soft-policy-improvement", 1e-9),
        support.at_most(suite, "iterates-stay-on-support", 0.0),
        agree.at_most(suite, "pi-matches-vi", 1e-6),
    ]
}

/// Argmax over supported actions and its margin over the runner-up.
fn supported_margin(row: &[f64], mask: &[bool]) -> (usize, f64) {
    let mut idx: Vec<usize> = (0..row.len()).filter(|&a| mask[a]).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    let margin = if idx.len() > 1 { row[idx[0]] - row[idx[1]] } else { f64::INFINITY };
    (idx[0], margin)
}

pub fn tau_limit(seed: u64) -> Vec<Check> {
    let suite = Suite::TauLimit;
    let mut bound = Worst::new();
    let mut monotone = Worst::new();
    let mut greedy = Worst::new();
    let mut brute = Worst::new();
    let opts = SolveOptions::default().with_tol(1e-12);
    for i in 0..TAU_MDPS {
        let ts = trial_seed(seed, "tau-limit", i);
        let mut rng = trial_rng(ts);
        let mdp = random_small_mdp(&mut rng, 10, 4, Some(0.9));
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        let support = loop {
            let s = SupportSet::from_mask(ns, na, (0..ns).flat_map(|_| random_mask(&mut rng, na, 0.5)).collect())
                .expect("mask shape");
            if s.deterministic_policy_count() <= 4096 {
                break s;
            }
        };
        let gaps = tau_limit_check(&mdp, &support, &TAU_SCHEDULE, &opts).expect("valid schedule");
        bound.record(gaps.iter().map(|g| g.gap / g.bound).fold(f64::NEG_INFINITY, f64::max), ts);
        monotone.record(gaps.windows(2).map(|w| w[1].gap - w[0].gap).fold(f64::NEG_INFINITY, f64::max), ts);

        let zero = QTable::zeros(ns, na);
        let hard = value_iteration(&mdp, &BackupKind::InSampleHardMax(support.clone()), &zero, &opts)
            .expect("valid inputs")
            .q;
        let kind = BackupKind::InSampleSoftMax(support.clone(), temp(1e-4));
        let soft = value_iteration(&mdp, &kind, &zero, &opts).expect("valid inputs").q;
        let soft_greedy = greedy_policy(&soft, &support).expect("non-empty support").mode_actions();
        let mismatches = (0..ns)
            .filter(|&s| {
                let (a, margin) = supported_margin(hard.row(s), support.row(s));
                margin > 1e-2 && soft_greedy[s] != a
            })
            .count();
        greedy.record(mismatches as f64, ts);
        let oracle = brute_force_insample_optimum(&mdp, &support).expect("small instance");
        brute.record(oracle.sup_distance(&hard), ts);
    }
    vec![
        bound.at_most(suite, "gap-within-bound", 1.0),
        monotone.at_most(suite, "gap-non-increasing", 1e-9),
        greedy.at_most(suite, "greedy-coincides", 0.0),
        brute.at_most(suite, "hardmax-matches-enumeration", 1e-8),
    ]
}

pub fn optimality(seed: u64) -> Vec<Check> {
    let suite = Suite::Optimality;
    let mut dominance = Worst::new();
    let mut optimal = Worst::new();
    let mut matches_pi = Worst::new();
    let opts = SolveOptions::default().with_tol(1e-13);
    let n_mdps = SOLVER_MDPS / 5;
    for i in 0..n_mdps {
        let ts = trial_seed(seed, "optimality", i);
        let mut rng = trial_rng(ts);
        let na = rng.gen_range(2..=4);
        let mdp = random_small_mdp(&mut rng, 8, na, None);
        let ns = mdp.n_states();
        let beta = random_behavior(&mut rng, ns, na, 0.4);
        let sup = SupportSet::from_policy(&beta);
        let tau = temp(log_uniform(&mut rng, 0.05, 2.0));
        let kind = BackupKind::InSampleSoftMax(sup.clone(), tau);

        // iterates from an upper bound stay super-solutions: q >= T q
        let top = 1.0 / (1.0 - mdp.gamma()) * (1.0 + tau.get() * (na as f64).ln()) + 1.0;
        let mut q = QTable::filled(ns, na, top);
        for _ in 0..rng.gen_range(0..20) {
            q = backup(&mdp, &q, &kind).expect("non-empty support");
        }
        let tq = backup(&mdp, &q, &kind).expect("non-empty support");
        let super_gap = tq.as_slice().iter().zip(q.as_slice()).map(|(a, b)| a - b).fold(0.0, f64::max);

        let star = value_iteration(&mdp, &kind, &QTable::zeros(ns, na), &opts).expect("valid inputs").q;
        let v_star: Vec<f64> = (0..ns)
            .map(|s| insample_softmax_value(star.row(s), sup.row(s), tau).expect("non-empty support"))
            .collect();
        let mut worst_dom = super_gap;
        let mut worst_opt = f64::NEG_INFINITY;
        for _ in 0..100 {
            let pi = random_policy_under(&mut rng, &beta);
            let qp = exact_soft_q(&mdp, &pi, tau).expect("valid policy");
            for (a, b) in qp.as_slice().iter().zip(q.as_slice()) {
                worst_dom = worst_dom.max(a - b);
            }
            for s in 0..ns {
                let vp: f64 = pi
                    .row(s)
                    .iter()
                    .zip(qp.row(s))
                    .filter(|(&p, _)| p > 0.0)
                    .map(|(&p, &x)| p * (x - tau.get() * p.ln()))
                    .sum();
                worst_opt = worst_opt.max(vp - v_star[s]);
            }
        }
        dominance.record(worst_dom, ts);
        optimal.record(worst_opt, ts);
        let pi_out = insample_soft_policy_iteration(&mdp, &beta, tau, 1e-10, 1000).expect("valid inputs");
        let star_policy = insample_softmax_policy_table(&star, &beta, tau).expect("non-empty support");
        let d = pi_out.q.sup_distance(&star).max(sup_norm_diff(pi_out.policy.as_slice(), star_policy.as_slice()));
        matches_pi.record(d, ts);
    }
    vec![
        dominance.at_most(suite, "supersolution-dominance", 1e-9),
        optimal.at_most(suite, "optimal-value-dominates", 1e-9),
        matches_pi.at_most(suite, "optimum-matches-pi", 1e-6),
    ]
}

/// `max |a - n| / max(max |a|, max |n|)` over one gradient vector.
fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(0.0f64, |m, &x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    sup_norm_diff(analytic, numeric) / scale
}

/// Central differences of `loss` with respect to `params`.
fn numeric_grad(params: &mut [f64], mut loss: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..params.len())
        .map(|i| {
            let orig = params[i];
            params[i] = orig + FD_STEP;
            let up = loss(params);
            params[i] = orig - FD_STEP;
            let down = loss(params);
            params[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

struct GradCase {
    agent: InacAgent<f64>,
    batch: Vec<Transition<f64>>,
    actions: Vec<usize>,
}

fn gradient_case(ts: u64) -> GradCase {
    let mut rng = trial_rng(ts);
    let ns = rng.gen_range(3..=6);
    let na = rng.gen_range(2..=4);
    let approx = if rng.gen_bool(0.5) {
        ApproxKind::Table
    } else {
        ApproxKind::Mlp { hidden: vec![6, 5] }
    };
    let config = TrainConfig {
        tau: log_uniform(&mut rng, 0.05, 1.0),
        approx,
        seed: rng.gen(),
        ..TrainConfig::default()
    };
    let mut agent = InacAgent::new(ns, na, 0.9, &config).expect("valid config");
    for net in [
        &mut agent.actor,
        &mut agent.critic,
        &mut agent.critic_target,
        &mut agent.baseline,
        &mut agent.baseline_target,
        &mut agent.behavior,
    ] {
        for p in net.params_mut() {
            *p = rng.gen_range(-1.0..1.0);
        }
    }
    let batch: Vec<Transition<f64>> = (0..8)
        .map(|_| Transition {
            state: rng.gen_range(0..ns),
            action: rng.gen_range(0..na),
            reward: rng.gen_range(0.0..1.0),
            next_state: rng.gen_range(0..ns),
        })
        .collect();
    let actions = (0..batch.len()).map(|_| rng.gen_range(0..na)).collect();
    GradCase { agent, batch, actions }
}

pub fn gradients(seed: u64) -> Vec<Check> {
    let suite = Suite::Gradients;
    let mut behavior = Worst::new();
    let mut critic = Worst::new();
    let mut baseline = Worst::new();
    let mut actor = Worst::new();
    let mut network = Worst::new();
    for i in 0..GRADIENT_TRIALS {
        let ts = trial_seed(seed, "gradients", i);
        let GradCase { mut agent, batch, actions } = gradient_case(ts);

        agent.behavior.zero_grad();
        agent.accumulate_behavior_grad(&batch).expect("forward recorded");
        let analytic = agent.behavior.grads().to_vec();
        let mut params = agent.behavior.params().to_vec();
        let numeric = numeric_grad(&mut params, |p| {
            agent.behavior.params_mut().copy_from_slice(p);
            agent.behavior_loss(&batch)
        });
        agent.behavior.params_mut().copy_from_slice(&params);
        behavior.record(relative_error(&analytic, &numeric), ts);

        agent.critic.zero_grad();
        agent.accumulate_critic_grad(&batch).expect("forward recorded");
        let analytic = agent.critic.grads().to_vec();
        let mut params = agent.critic.params().to_vec();
        let numeric = numeric_grad(&mut params, |p| {
            agent.critic.params_mut().copy_from_slice(p);
            agent.critic_loss(&batch)
        });
        agent.critic.params_mut().copy_from_slice(&params);
        critic.record(relative_error(&analytic, &numeric), ts);

        agent.baseline.zero_grad();
        agent.accumulate_baseline_grad(&batch, &actions).expect("forward recorded");
        let analytic = agent.baseline.grads().to_vec();
        let mut params = agent.baseline.params().to_vec();
        let numeric = numeric_grad(&mut params, |p| {
            agent.baseline.params_mut().copy_from_slice(p);
            agent.baseline_loss(&batch, &actions)
        });
        agent.baseline.params_mut().copy_from_slice(&params);
        baseline.record(relative_error(&analytic, &numeric), ts);

        agent.actor.zero_grad();
        agent.accumulate_actor_grad(&batch).expect("forward recorded");
        let analytic = agent.actor.grads().to_vec();
        let mut params = agent.actor.params().to_vec();
        let numeric = numeric_grad(&mut params, |p| {
            agent.actor.params_mut().copy_from_slice(p);
            agent.actor_loss(&batch)
        });
        agent.actor.params_mut().copy_from_slice(&params);
        actor.record(relative_error(&analytic, &numeric), ts);

        let mut rng = trial_rng(ts ^ 0xA5A5);
        let sizes = [rng.gen_range(2..=5), rng.gen_range(2..=7), rng.gen_range(2..=7), rng.gen_range(1..=4)];
        let mut net = mlp::<f64>(&sizes, rng.gen()).expect("valid sizes");
        for p in net.params_mut() {
            *p = rng.gen_range(-1.0..1.0);
        }
        let x = random_row(&mut rng, sizes[0], -1.0, 1.0);
        let up = random_row(&mut rng, sizes[3], -1.0, 1.0);
        net.zero_grad();
        net.forward(Features::Dense(&x));
        net.backward(&up).expect("forward recorded");
        let analytic = net.grads().to_vec();
        let mut params = net.params().to_vec();
        let numeric = numeric_grad(&mut params, |p| {
            net.params_mut().copy_from_slice(p);
            net.eval(Features::Dense(&x)).iter().zip(&up).map(|(o, u)| o * u).sum()
        });
        network.record(relative_error(&analytic, &numeric), ts);
    }
    vec![
        behavior.at_most(suite, "behavior-loss-gradient", 1e-5),
        critic.at_most(suite, "critic-loss-gradient", 1e-5),
        baseline.at_most(suite, "baseline-loss-gradient", 1e-5),
        actor.at_most(suite, "actor-loss-gradient", 1e-5),
        network.at_most(suite, "mlp-backward", 1e-5),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_parse() {
        for s in Suite::EACH {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert_eq!("all".parse::<Suite>().unwrap(), Suite::All);
        assert!("everything".parse::<Suite>().is_err());
    }

    #[test]
    fn worst_keeps_seed_of_max() {
        let mut w = Worst::new();
        w.record(1.0, 10);
        w.record(3.0, 11);
        w.record(2.0, 12);
        let c = w.at_most(Suite::Identities, "x", 2.5);
        assert!(!c.passed);
        assert_eq!((c.measured, c.seed, c.trials), (3.0, 11, 3));
    }

    #[test]
    fn nan_fails() {
        let mut w = Worst::new();
        w.record(0.0, 1);
        w.record(f64::NAN, 2);
        w.record(5.0, 3);
        let c = w.at_most(Suite::Identities, "x", 1.0);
        assert!(!c.passed);
        assert_eq!(c.seed, 2);
    }

    #[test]
    fn trial_seeds_differ() {
        assert_ne!(trial_seed(0, "a", 0), trial_seed(0, "a", 1));
        assert_ne!(trial_seed(0, "a", 0), trial_seed(0, "b", 0));
        assert_ne!(trial_seed(0, "a", 0), trial_seed(1, "a", 0));
    }
}
