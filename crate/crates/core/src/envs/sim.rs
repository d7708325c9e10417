use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mdp::{Policy, TabularMdp};
use crate::scalar::Scalar;

/// Episode length used throughout the Four Rooms experiments.
pub const DEFAULT_HORIZON: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome<T> {
    pub state: usize,
    pub action: usize,
    pub reward: T,
    pub next_state: usize,
    /// The step counter reached the horizon with this step.
    pub truncated: bool,
}

/// Samples trajectories of a [`TabularMdp`] from a fixed start state.
#[derive(Clone, Debug)]
pub struct EpisodeSimulator<'a, T> {
    mdp: &'a TabularMdp<T>,
    start: usize,
    state: usize,
    steps: usize,
    horizon: usize,
    rng: ChaCha8Rng,
}

/// Draws an index from a probability row by inverse CDF.
pub(crate) fn sample_index<T: Scalar, R: Rng>(rng: &mut R, probs: &[T]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.iter().enumerate() {
        let p = p.to_f64_lossy();
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

impl<'a, T: Scalar> EpisodeSimulator<'a, T> {
    pub fn new(mdp: &'a TabularMdp<T>, start: usize, horizon: usize, seed: u64) -> Self {
        assert!(start < mdp.n_states(), "start state out of range");
        Self {
            mdp,
            start,
            state: start,
            steps: 0,
            horizon,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn reset(&mut self) -> usize {
        self.state = self.start;
        self.steps = 0;
        self.state
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn done(&self) -> bool {
        self.steps >= self.horizon
    }

    pub fn mdp(&self) -> &TabularMdp<T> {
        self.mdp
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Advances one step. Panics if called after the horizon.
    pub fn step(&mut self, action: usize) -> StepOutcome<T> {
        assert!(!self.done(), "episode already truncated");
        let row = self.mdp.transition_row(self.state, action);
        let next = sample_index(&mut self.rng, row);
        let out = StepOutcome {
            state: self.state,
            action,
            reward: self.mdp.reward(self.state, action),
            next_state: next,
            truncated: self.steps + 1 >= self.horizon,
        };
        self.state = next;
        self.steps += 1;
        out
    }

    /// Samples an action from `pi` in the current state.
    pub fn sample_action(&mut self, pi: &Policy<T>) -> usize {
        sample_index(&mut self.rng, pi.row(self.state))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rollout<T> {
    pub ret: T,
    pub discounted_return: T,
    pub steps: usize,
}

/// Resets the simulator and runs one episode under `pi` until the horizon.
pub fn rollout<T: Scalar>(sim: &mut EpisodeSimulator<'_, T>, pi: &Policy<T>) -> Rollout<T> {
    sim.reset();
    let gamma = sim.mdp().gamma();
    let mut ret = T::zero();
    let mut disc = T::zero();
    let mut weight = T::one();
    while !sim.done() {
        let a = sim.sample_action(pi);
        let out = sim.step(a);
        ret += out.reward;
        disc += weight * out.reward;
        weight *= gamma;
    }
    Rollout {
        ret,
        discounted_return: disc,
        steps: sim.steps(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{Action, FourRooms};
    use crate::mdp::{greedy_policy, QTable, SupportSet};
    use crate::operators::BackupKind;
    use crate::solvers::{value_iteration, SolveOptions};

    #[test]
    fn optimal_policy_reaches_goal() {
        let env = FourRooms::<f64>::new();
        let n = env.n_states();
        let q = value_iteration(env.mdp(), &BackupKind::HardMax, &QTable::zeros(n, 4), &SolveOptions::default())
            .unwrap()
            .q;
        let pi = greedy_policy(&q, &SupportSet::full(n, 4)).unwrap();
        let mut sim = EpisodeSimulator::new(env.mdp(), env.start_state(), DEFAULT_HORIZON, 0);
        let r = rollout(&mut sim, &pi);
        assert_eq!(r.steps, 100);
        // goal entered on step 24, then 76 more paying bounces
        assert_eq!(r.ret, 77.0);
        assert!(r.discounted_return > 0.0);
        let again = rollout(&mut EpisodeSimulator::new(env.mdp(), env.start_state(), 100, 99), &pi);
        assert_eq!(r, again);
    }

    #[test]
    fn policy_that_never_arrives_earns_nothing() {
        let env = FourRooms::<f64>::new();
        let left = Policy::deterministic(&vec![Action::Left.index(); env.n_states()], 4).unwrap();
        let mut sim = EpisodeSimulator::new(env.mdp(), env.start_state(), DEFAULT_HORIZON, 3);
        let r = rollout(&mut sim, &left);
        assert_eq!(r.ret, 0.0);
        assert_eq!(r.discounted_return, 0.0);
    }

    #[test]
    fn step_counter_respects_horizon() {
        let env = FourRooms::<f64>::new();
        let mut sim = EpisodeSimulator::new(env.mdp(), env.start_state(), 2, 0);
        assert!(!sim.step(0).truncated);
        assert!(sim.step(0).truncated);
        assert!(sim.done());
    }
}
