//! Offline agents trained from a fixed dataset: the In-Sample Actor-Critic
//! and the tabular Oracle-Max / FQI baselines.

mod curve;
mod inac;
mod qlearning;

pub use curve::{CurvePoint, LearningCurve, CURVE_HEADER};
pub use inac::{inac_train, InacAgent, InacRun};
pub use qlearning::{fqi_train, oracle_max_train, Bootstrap, QLearningAgent, QRun};

use rand::Rng;

use crate::data::Transition;
use crate::envs::{rollout, EpisodeSimulator, DEFAULT_HORIZON};
use crate::error::{Error, Result};
use crate::mdp::{exact_policy_value, Policy, TabularMdp};
use crate::nn::{mlp, onehot_linear, Approximator};
use crate::scalar::Scalar;

/// Optimistic, neutral and pessimistic starting values for the value tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitPreset {
    Plus10,
    Zero,
    Minus20,
}

impl InitPreset {
    pub fn value(self) -> f64 {
        match self {
            InitPreset::Plus10 => 10.0,
            InitPreset::Zero => 0.0,
            InitPreset::Minus20 => -20.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InitPreset::Plus10 => "+10",
            InitPreset::Zero => "0",
            InitPreset::Minus20 => "-20",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "+10" | "10" => Some(InitPreset::Plus10),
            "0" => Some(InitPreset::Zero),
            "-20" => Some(InitPreset::Minus20),
            _ => None,
        }
    }
}

/// Function class used for every learned component of an agent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ApproxKind {
    /// One parameter per (state, output).
    Table,
    /// ReLU network over one-hot state features.
    Mlp { hidden: Vec<usize> },
}

/// Where InAC's behavior model comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BehaviorSource {
    /// Maximum-likelihood pre-training of softmax logits.
    Clone,
    /// Log of the empirical action frequencies (tables only).
    Counts,
}

/// What InAC divides the in-sample greedy policy by.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalizer {
    /// The learned baseline `v(s)`.
    Baseline,
    /// `tau log sum_{a: count > 0} pi_D(a|s) exp(q(s,a)/tau - log pi_omega(a|s))`
    /// from dataset counts; a diagnostic.
    ExactTabular,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub updates: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub init: InitPreset,
    pub seed: u64,
    /// Upper clip on the exponent of the actor weight.
    pub exp_clip: f64,
    /// Lower clip on the actor weight itself; `0` disables it.
    pub weight_floor: f64,
    pub polyak: f64,
    pub approx: ApproxKind,
    pub behavior: BehaviorSource,
    pub bc_steps: usize,
    pub bc_lr: f64,
    /// Keep training the behavior model inside the main loop.
    pub bc_during_training: bool,
    pub normalizer: Normalizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            tau: 0.01,
            batch_size: 100,
            updates: 50_000,
            eval_interval: 1_000,
            eval_episodes: 5,
            init: InitPreset::Plus10,
            seed: 0,
            exp_clip: 20.0,
            weight_floor: 1e-8,
            polyak: 0.995,
            approx: ApproxKind::Table,
            behavior: BehaviorSource::Clone,
            bc_steps: 5_000,
            bc_lr: 0.01,
            bc_during_training: false,
            normalizer: Normalizer::Baseline,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, dataset_len: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_owned()));
        if !(self.lr > 0.0) || !(self.bc_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.tau > 0.0) {
            return bad("tau must be positive");
        }
        if self.batch_size == 0 || self.eval_interval == 0 || self.eval_episodes == 0 {
            return bad("batch size, evaluation interval and episode count must be positive");
        }
        if dataset_len == 0 {
            return Err(Error::NoTransitions);
        }
        if self.batch_size > dataset_len {
            return bad("batch size exceeds dataset size");
        }
        if !(self.weight_floor >= 0.0) || self.weight_floor.ln() >= self.exp_clip {
            return bad("weight floor must be non-negative and below the clip");
        }
        if !(0.0..=1.0).contains(&self.polyak) {
            return bad("polyak rate must be in [0, 1]");
        }
        if self.behavior == BehaviorSource::Counts && self.approx != ApproxKind::Table {
            return bad("count-based behavior needs tabular approximators");
        }
        Ok(())
    }
}

pub(crate) fn make_approx<T: Scalar>(
    kind: &ApproxKind,
    n_states: usize,
    n_outputs: usize,
    init: T,
    seed: u64,
) -> Result<Approximator<T>> {
    match kind {
        ApproxKind::Table => Ok(onehot_linear(n_states, n_outputs, init)),
        ApproxKind::Mlp { hidden } => {
            let mut sizes = vec![n_states];
            sizes.extend(hidden);
            sizes.push(n_outputs);
            let mut net = mlp(&sizes, seed)?;
            // shift the output bias so the initial outputs sit near `init`
            let n = net.params().len();
            for b in &mut net.params_mut()[n - n_outputs..] {
                *b = init;
            }
            Ok(net)
        }
    }
}

/// Uniform minibatch with replacement.
pub(crate) fn sample_batch<T: Scalar, R: Rng>(
    rng: &mut R,
    data: &[Transition<T>],
    batch: usize,
    out: &mut Vec<Transition<T>>,
) {
    out.clear();
    out.extend((0..batch).map(|_| data[rng.gen_range(0..data.len())]));
}

/// Exact start-state value plus Monte-Carlo rollouts of `pi`.
pub fn evaluate_policy<T: Scalar>(
    mdp: &TabularMdp<T>,
    start: usize,
    pi: &Policy<T>,
    episodes: usize,
    seed: u64,
    update: usize,
) -> Result<CurvePoint> {
    let exact = exact_policy_value(mdp, pi)?.get(start).to_f64_lossy();
    let mut sim = EpisodeSimulator::new(mdp, start, DEFAULT_HORIZON, seed);
    let returns: Vec<f64> = (0..episodes).map(|_| rollout(&mut sim, pi).ret.to_f64_lossy()).collect();
    let (mean, stderr) = mean_stderr(&returns);
    Ok(CurvePoint {
        update,
        exact_start_value: exact,
        rollout_return_mean: mean,
        rollout_return_stderr: stderr,
    })
}

/// Sample mean and standard error (`n - 1` denominator; zero for one sample).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Seed for the evaluation rollouts at one checkpoint of a run.
pub(crate) fn eval_seed(run_seed: u64, update: usize) -> u64 {
    run_seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(update as u64)
        .rotate_left(17)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_stderr_values() {
        assert_eq!(mean_stderr(&[3.0]), (3.0, 0.0));
        let (m, se) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let cfg = TrainConfig::default();
        assert!(cfg.validate(10_000).is_ok());
        assert!(cfg.validate(50).is_err());
        assert_eq!(cfg.validate(0), Err(Error::NoTransitions));
        let bad = TrainConfig { tau: 0.0, ..TrainConfig::default() };
        assert!(bad.validate(10_000).is_err());
    }

    #[test]
    fn presets() {
        for p in [InitPreset::Plus10, InitPreset::Zero, InitPreset::Minus20] {
            assert_eq!(InitPreset::parse(p.name()), Some(p));
        }
    }
}
