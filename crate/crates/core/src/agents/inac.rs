//! In-Sample Actor-Critic.
//!
//! Losses, averaged over a minibatch of dataset transitions `(s, a, r, s')`:
//!
//! ```text
//! behavior  -log pi_omega(a|s)
//! critic    1/2 (r + gamma v_target(s') - q(s,a))^2
//! baseline  1/2 (v(s) - (q_target(s,a') - tau log pi_psi(a'|s)))^2,  a' ~ pi_psi(.|s)
//! actor     -w(s,a) log pi_psi(a|s)
//!           w(s,a) = clamp(exp((q(s,a) - v(s)) / tau - log pi_omega(a|s)), floor, exp(C))
//! ```
//!
//! Bootstrap targets and the actor weight are constants for differentiation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    eval_seed, evaluate_policy, make_approx, sample_batch, BehaviorSource, LearningCurve, Normalizer, TrainConfig,
};
use crate::data::{estimate_behavior, OfflineDataset, Transition};
use crate::envs::sim_sample;
use crate::error::{Error, Result};
use crate::mdp::{Policy, SupportSet, TabularMdp};
use crate::nn::{polyak_update, Approximator, Features, Optimizer};
use crate::scalar::Scalar;

/// Log-probability of a clamped-away action in a count-based behavior table.
const COUNT_LOG_FLOOR: f64 = -30.0;

fn log_softmax_into<T: Scalar>(logits: &[T], out: &mut [T]) {
    let m = logits.iter().fold(T::neg_infinity(), |acc, &x| acc.max(x));
    let lse = m + logits.iter().map(|&x| (x - m).exp()).sum::<T>().ln();
    for (o, &x) in out.iter_mut().zip(logits) {
        *o = x - lse;
    }
}

/// Probabilities and log-probabilities from one pass of exponentials.
fn softmax_parts_into<T: Scalar>(logits: &[T], probs: &mut [T], logp: &mut [T]) {
    let m = logits.iter().fold(T::neg_infinity(), |acc, &x| acc.max(x));
    let mut sum = T::zero();
    for (p, &x) in probs.iter_mut().zip(logits) {
        *p = (x - m).exp();
        sum += *p;
    }
    let (inv, ln_sum) = (T::one() / sum, sum.ln());
    for ((p, l), &x) in probs.iter_mut().zip(logp.iter_mut()).zip(logits) {
        *p *= inv;
        *l = x - m - ln_sum;
    }
}

#[derive(Clone, Debug)]
pub struct InacAgent<T> {
    pub actor: Approximator<T>,
    pub critic: Approximator<T>,
    pub critic_target: Approximator<T>,
    pub baseline: Approximator<T>,
    pub baseline_target: Approximator<T>,
    pub behavior: Approximator<T>,
    actor_opt: Optimizer<T>,
    critic_opt: Optimizer<T>,
    baseline_opt: Optimizer<T>,
    behavior_opt: Optimizer<T>,
    n_actions: usize,
    gamma: T,
    tau: T,
    exp_clip: T,
    weight_floor: T,
    polyak: T,
    normalizer: Normalizer,
    support: Option<SupportSet>,
    rng: ChaCha8Rng,
    row: Vec<T>,
    probs: Vec<T>,
    logp: Vec<T>,
    upstream: Vec<T>,
    one: [T; 1],
    /// `log pi_omega` for every state while the behavior model is frozen.
    behavior_logp: Option<Vec<T>>,
    actor_reads: Option<Vec<(usize, usize)>>,
}

impl<T: Scalar> InacAgent<T> {
    pub fn new(n_states: usize, n_actions: usize, gamma: T, config: &TrainConfig) -> Result<Self> {
        let init = T::lit(config.init.value());
        let s = config.seed;
        let critic = make_approx(&config.approx, n_states, n_actions, init, s ^ 0x11)?;
        let baseline = make_approx(&config.approx, n_states, 1, init, s ^ 0x22)?;
        let actor = make_approx(&config.approx, n_states, n_actions, T::zero(), s ^ 0x33)?;
        let behavior = make_approx(&config.approx, n_states, n_actions, T::zero(), s ^ 0x44)?;
        let lr = T::lit(config.lr);
        Ok(Self {
            actor_opt: Optimizer::adam(lr, actor.params().len())?,
            critic_opt: Optimizer::adam(lr, critic.params().len())?,
            baseline_opt: Optimizer::adam(lr, baseline.params().len())?,
            behavior_opt: Optimizer::adam(T::lit(config.bc_lr), behavior.params().len())?,
            critic_target: critic.clone(),
            baseline_target: baseline.clone(),
            actor,
            critic,
            baseline,
            behavior,
            n_actions,
            gamma,
            tau: T::lit(config.tau),
            exp_clip: T::lit(config.exp_clip),
            weight_floor: T::lit(config.weight_floor),
            polyak: T::lit(config.polyak),
            normalizer: config.normalizer,
            support: None,
            rng: ChaCha8Rng::seed_from_u64(s),
            row: vec![T::zero(); n_actions],
            probs: vec![T::zero(); n_actions],
            logp: vec![T::zero(); n_actions],
            upstream: vec![T::zero(); n_actions],
            one: [T::zero()],
            behavior_logp: None,
            actor_reads: None,
        })
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Support used by [`Normalizer::ExactTabular`].
    pub fn set_support(&mut self, support: SupportSet) {
        self.support = Some(support);
    }

    /// Start recording every `(state, action)` the actor loss reads.
    pub fn record_actor_reads(&mut self) {
        self.actor_reads = Some(Vec::new());
    }

    pub fn actor_reads(&self) -> Option<&[(usize, usize)]> {
        self.actor_reads.as_deref()
    }

    /// Behavior model logits set to the log of empirical frequencies.
    pub fn set_behavior_from_counts(&mut self, data: &OfflineDataset<T>, n_states: usize) -> Result<()> {
        let est = estimate_behavior(data, n_states, self.n_actions)?;
        let na = self.n_actions;
        self.behavior_logp = None;
        let params = self.behavior.params_mut();
        if params.len() != n_states * na {
            return Err(Error::InvalidArgument("count-based behavior needs a table".into()));
        }
        for s in 0..n_states {
            if !est.is_visited(s) {
                continue;
            }
            for (a, &p) in est.probs(s).iter().enumerate() {
                params[s * na + a] = if p > T::zero() { p.ln() } else { T::lit(COUNT_LOG_FLOOR) };
            }
        }
        Ok(())
    }

    /// Caches `log pi_omega` for all states; dropped by the next behavior update.
    pub fn freeze_behavior(&mut self, n_states: usize) {
        let mut table = vec![T::zero(); n_states * self.n_actions];
        for (s, out) in table.chunks_mut(self.n_actions).enumerate() {
            log_softmax_into(&self.behavior.eval(Features::OneHot(s)), out);
        }
        self.behavior_logp = Some(table);
    }

    fn behavior_log_prob(&self, state: usize, action: usize) -> T {
        match &self.behavior_logp {
            Some(t) => t[state * self.n_actions + action],
            None => {
                let mut logp = vec![T::zero(); self.n_actions];
                log_softmax_into(&self.behavior.eval(Features::OneHot(state)), &mut logp);
                logp[action]
            }
        }
    }

    pub fn behavior_probs(&self, state: usize) -> Vec<T> {
        crate::nn::softmax(&self.behavior.eval(Features::OneHot(state)))
    }

    pub fn actor_probs(&self, state: usize) -> Vec<T> {
        crate::nn::softmax(&self.actor.eval(Features::OneHot(state)))
    }

    /// The actor as a tabular policy.
    pub fn policy(&self, n_states: usize) -> Result<Policy<T>> {
        let probs = (0..n_states).flat_map(|s| self.actor_probs(s)).collect();
        Policy::new(n_states, self.n_actions, probs)
    }

    fn batch_scale(batch: &[Transition<T>]) -> T {
        T::one() / T::from_usize_lossy(batch.len())
    }

    pub fn behavior_loss(&self, batch: &[Transition<T>]) -> T {
        let mut logp = vec![T::zero(); self.n_actions];
        let mut loss = T::zero();
        for t in batch {
            log_softmax_into(&self.behavior.eval(Features::OneHot(t.state)), &mut logp);
            loss -= logp[t.action];
        }
        loss * Self::batch_scale(batch)
    }

    pub fn accumulate_behavior_grad(&mut self, batch: &[Transition<T>]) -> Result<T> {
        let k = Self::batch_scale(batch);
        let mut loss = T::zero();
        for t in batch {
            self.behavior.forward_into(Features::OneHot(t.state), &mut self.row);
            softmax_parts_into(&self.row, &mut self.probs, &mut self.logp);
            loss -= self.logp[t.action];
            for (j, u) in self.upstream.iter_mut().enumerate() {
                let hit = if j == t.action { T::one() } else { T::zero() };
                *u = k * (self.probs[j] - hit);
            }
            self.behavior.backward(&self.upstream)?;
        }
        Ok(loss * k)
    }

    pub fn behavior_cloning_update(&mut self, batch: &[Transition<T>]) -> Result<T> {
        self.behavior_logp = None;
        self.behavior.zero_grad();
        let loss = self.accumulate_behavior_grad(batch)?;
        self.behavior_opt.step(&mut self.behavior)?;
        Ok(loss)
    }

    fn critic_target_value(&self, t: &Transition<T>) -> T {
        let mut v = [T::zero()];
        self.baseline_target.eval_into(Features::OneHot(t.next_state), &mut v);
        t.reward + self.gamma * v[0]
    }

    pub fn critic_loss(&self, batch: &[Transition<T>]) -> T {
        let mut loss = T::zero();
        for t in batch {
            let d = self.critic.eval(Features::OneHot(t.state))[t.action] - self.critic_target_value(t);
            loss += T::lit(0.5) * d * d;
        }
        loss * Self::batch_scale(batch)
    }

    pub fn accumulate_critic_grad(&mut self, batch: &[Transition<T>]) -> Result<T> {
        let k = Self::batch_scale(batch);
        let mut loss = T::zero();
        for t in batch {
            let y = self.critic_target_value(t);
            self.critic.forward_into(Features::OneHot(t.state), &mut self.row);
            let d = self.row[t.action] - y;
            loss += T::lit(0.5) * d * d;
            self.upstream.fill(T::zero());
            self.upstream[t.action] = k * d;
            self.critic.backward(&self.upstream)?;
        }
        Ok(loss * k)
    }

    pub fn critic_update(&mut self, batch: &[Transition<T>]) -> Result<T> {
        self.critic.zero_grad();
        let loss = self.accumulate_critic_grad(batch)?;
        self.critic_opt.step(&mut self.critic)?;
        Ok(loss)
    }

    /// One action per batch state drawn from the current actor.
    pub fn sample_actor_actions(&mut self, batch: &[Transition<T>]) -> Vec<usize> {
        let mut out = Vec::with_capacity(batch.len());
        self.sample_actor_actions_into(batch, &mut out);
        out
    }

    fn sample_actor_actions_into(&mut self, batch: &[Transition<T>], out: &mut Vec<usize>) {
        out.clear();
        for t in batch {
            self.actor.eval_into(Features::OneHot(t.state), &mut self.row);
            softmax_parts_into(&self.row, &mut self.probs, &mut self.logp);
            out.push(sim_sample(&mut self.rng, &self.probs));
        }
    }

    fn baseline_target_value(&self, state: usize, action: usize, logp: &mut [T]) -> T {
        let q = self.critic_target.eval(Features::OneHot(state))[action];
        log_softmax_into(&self.actor.eval(Features::OneHot(state)), logp);
        q - self.tau * logp[action]
    }

    pub fn baseline_loss(&self, batch: &[Transition<T>], actions: &[usize]) -> T {
        let mut logp = vec![T::zero(); self.n_actions];
        let mut loss = T::zero();
        for (t, &a) in batch.iter().zip(actions) {
            let y = self.baseline_target_value(t.state, a, &mut logp);
            let d = self.baseline.eval(Features::OneHot(t.state))[0] - y;
            loss += T::lit(0.5) * d * d;
        }
        loss * Self::batch_scale(batch)
    }

    pub fn accumulate_baseline_grad(&mut self, batch: &[Transition<T>], actions: &[usize]) -> Result<T> {
        if actions.len() != batch.len() {
            return Err(Error::Shape {
                expected: format!("{} actions", batch.len()),
                got: actions.len().to_string(),
            });
        }
        let k = Self::batch_scale(batch);
        let mut loss = T::zero();
        let mut logp = std::mem::take(&mut self.logp);
        for (t, &a) in batch.iter().zip(actions) {
            self.critic_target.eval_into(Features::OneHot(t.state), &mut self.row);
            let q = self.row[a];
            self.actor.eval_into(Features::OneHot(t.state), &mut self.row);
            log_softmax_into(&self.row, &mut logp);
            let y = q - self.tau * logp[a];
            self.baseline.forward_into(Features::OneHot(t.state), &mut self.one);
            let d = self.one[0] - y;
            loss += T::lit(0.5) * d * d;
            self.baseline.backward(&[k * d])?;
        }
        self.logp = logp;
        Ok(loss * k)
    }

    /// Samples `a' ~ pi_psi(.|s)` per transition and takes one step on the
    /// baseline loss. Draws the same actions as [`InacAgent::sample_actor_actions`].
    pub fn baseline_update(&mut self, batch: &[Transition<T>]) -> Result<T> {
        let k = Self::batch_scale(batch);
        let mut loss = T::zero();
        self.baseline.zero_grad();
        for t in batch {
            let s = Features::OneHot(t.state);
            self.actor.eval_into(s, &mut self.row);
            softmax_parts_into(&self.row, &mut self.probs, &mut self.logp);
            let a = sim_sample(&mut self.rng, &self.probs);
            let entropy_term = self.tau * self.logp[a];
            self.critic_target.eval_into(s, &mut self.row);
            let y = self.row[a] - entropy_term;
            self.baseline.forward_into(s, &mut self.one);
            let d = self.one[0] - y;
            loss += T::lit(0.5) * d * d;
            self.baseline.backward(&[k * d])?;
        }
        self.baseline_opt.step(&mut self.baseline)?;
        Ok(loss * k)
    }

    /// Normalizer at `state`: the learned baseline, or the exact in-sample
    /// log-partition computed from `q_row`.
    fn normalizer_value(&self, state: usize, q_row: &[T]) -> T {
        match (self.normalizer, &self.support) {
            (Normalizer::ExactTabular, Some(support)) if !support.is_empty_at(state) => {
                let mask = support.row(state);
                let m = q_row
                    .iter()
                    .zip(mask)
                    .filter(|(_, &ok)| ok)
                    .fold(T::neg_infinity(), |acc, (&q, _)| acc.max(q));
                let sum: T = q_row
                    .iter()
                    .zip(mask)
                    .filter(|(_, &ok)| ok)
                    .map(|(&q, _)| ((q - m) / self.tau).exp())
                    .sum();
                m + self.tau * sum.ln()
            }
            _ => {
                let mut v = [T::zero()];
                self.baseline.eval_into(Features::OneHot(state), &mut v);
                v[0]
            }
        }
    }

    /// Clipped importance weight of a dataset pair; no gradient flows through it.
    pub fn actor_weight(&self, state: usize, action: usize) -> T {
        let q_row = self.critic.eval(Features::OneHot(state));
        let z = self.normalizer_value(state, &q_row);
        self.weight_from(q_row[action], z, self.behavior_log_prob(state, action))
    }

    fn weight_from(&self, q: T, z: T, log_behavior: T) -> T {
        ((q - z) / self.tau - log_behavior).min(self.exp_clip).exp().max(self.weight_floor)
    }

    pub fn actor_loss(&self, batch: &[Transition<T>]) -> T {
        let mut logp = vec![T::zero(); self.n_actions];
        let mut loss = T::zero();
        for t in batch {
            let w = self.actor_weight(t.state, t.action);
            log_softmax_into(&self.actor.eval(Features::OneHot(t.state)), &mut logp);
            loss -= w * logp[t.action];
        }
        loss * Self::batch_scale(batch)
    }

    pub fn accumulate_actor_grad(&mut self, batch: &[Transition<T>]) -> Result<T> {
        let k = Self::batch_scale(batch);
        let mut loss = T::zero();
        for t in batch {
            let (s, a) = (t.state, t.action);
            if let Some(reads) = self.actor_reads.as_mut() {
                reads.push((s, a));
            }
            self.critic.eval_into(Features::OneHot(s), &mut self.row);
            let q = self.row[a];
            let z = self.normalizer_value(s, &self.row);
            let w = self.weight_from(q, z, self.behavior_log_prob(s, a));
            self.actor.forward_into(Features::OneHot(s), &mut self.row);
            softmax_parts_into(&self.row, &mut self.probs, &mut self.logp);
            loss -= w * self.logp[a];
            for (j, u) in self.upstream.iter_mut().enumerate() {
                let hit = if j == a { T::one() } else { T::zero() };
                *u = k * w * (self.probs[j] - hit);
            }
            self.actor.backward(&self.upstream)?;
        }
        Ok(loss * k)
    }

    pub fn actor_update(&mut self, batch: &[Transition<T>]) -> Result<T> {
        self.actor.zero_grad();
        let loss = self.accumulate_actor_grad(batch)?;
        self.actor_opt.step(&mut self.actor)?;
        Ok(loss)
    }

    pub fn update_targets(&mut self) -> Result<()> {
        polyak_update(&mut self.critic_target, &self.critic, self.polyak)?;
        polyak_update(&mut self.baseline_target, &self.baseline, self.polyak)
    }
}

#[derive(Clone, Debug)]
pub struct InacRun<T> {
    pub agent: InacAgent<T>,
    pub curve: LearningCurve,
    pub policy: Policy<T>,
}

/// Full training run: behavior pre-training, then critic, baseline and
/// actor steps on uniform minibatches, evaluating the actor every
/// `eval_interval` updates.
pub fn inac_train<T: Scalar>(
    data: &OfflineDataset<T>,
    config: &TrainConfig,
    mdp: &TabularMdp<T>,
    start: usize,
) -> Result<InacRun<T>> {
    config.validate(data.len())?;
    let (n_states, n_actions) = (mdp.n_states(), mdp.n_actions());
    data.check_indices(n_states, n_actions)?;
    let mut agent = InacAgent::new(n_states, n_actions, mdp.gamma(), config)?;
    if config.normalizer == Normalizer::ExactTabular {
        agent.set_support(estimate_behavior(data, n_states, n_actions)?.support().clone());
    }
    let mut batch = Vec::with_capacity(config.batch_size);
    match config.behavior {
        BehaviorSource::Counts => agent.set_behavior_from_counts(data, n_states)?,
        BehaviorSource::Clone => {
            for _ in 0..config.bc_steps {
                sample_batch(&mut agent.rng, &data.transitions, config.batch_size, &mut batch);
                agent.behavior_cloning_update(&batch)?;
            }
        }
    }
    let mut curve = LearningCurve::default();
    let mut evaluate = |agent: &InacAgent<T>, update: usize| -> Result<Policy<T>> {
        let pi = agent.policy(n_states)?;
        curve.push(evaluate_policy(mdp, start, &pi, config.eval_episodes, eval_seed(config.seed, update), update)?);
        Ok(pi)
    };
    let train_behavior = config.bc_during_training && config.behavior == BehaviorSource::Clone;
    if !train_behavior {
        agent.freeze_behavior(n_states);
    }
    let mut policy = evaluate(&agent, 0)?;
    for u in 1..=config.updates {
        sample_batch(&mut agent.rng, &data.transitions, config.batch_size, &mut batch);
        agent.critic_update(&batch)?;
        agent.baseline_update(&batch)?;
        agent.actor_update(&batch)?;
        if train_behavior {
            agent.behavior_cloning_update(&batch)?;
        }
        agent.update_targets()?;
        if u % config.eval_interval == 0 || u == config.updates {
            policy = evaluate(&agent, u)?;
        }
    }
    Ok(InacRun { agent, curve, policy })
}
