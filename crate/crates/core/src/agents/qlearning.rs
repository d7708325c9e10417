//! Minibatch Q-learning on a fixed dataset, with the bootstrap max taken
//! either over dataset-supported actions (Oracle-Max) or over every action
//! (FQI).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{eval_seed, evaluate_policy, make_approx, sample_batch, LearningCurve, TrainConfig};
use crate::data::{estimate_behavior, OfflineDataset, Transition};
use crate::error::Result;
use crate::mdp::{greedy_policy, Policy, QTable, SupportSet, TabularMdp};
use crate::nn::{polyak_update, Approximator, Features, Optimizer};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub enum Bootstrap {
    /// `max_{a': count(s', a') > 0} q(s', a')`; states never visited bootstrap 0.
    InSample(SupportSet),
    /// `max_{a'} q(s', a')`.
    Max,
}

#[derive(Clone, Debug)]
pub struct QLearningAgent<T> {
    pub q: Approximator<T>,
    pub q_target: Approximator<T>,
    opt: Optimizer<T>,
    bootstrap: Bootstrap,
    n_states: usize,
    n_actions: usize,
    gamma: T,
    polyak: T,
    row: Vec<T>,
    upstream: Vec<T>,
}

impl<T: Scalar> QLearningAgent<T> {
    pub fn new(n_states: usize, n_actions: usize, gamma: T, bootstrap: Bootstrap, config: &TrainConfig) -> Result<Self> {
        let q = make_approx(&config.approx, n_states, n_actions, T::lit(config.init.value()), config.seed ^ 0x55)?;
        Ok(Self {
            opt: Optimizer::adam(T::lit(config.lr), q.params().len())?,
            q_target: q.clone(),
            q,
            bootstrap,
            n_states,
            n_actions,
            gamma,
            polyak: T::lit(config.polyak),
            row: vec![T::zero(); n_actions],
            upstream: vec![T::zero(); n_actions],
        })
    }

    pub fn bootstrap(&self) -> &Bootstrap {
        &self.bootstrap
    }

    /// Bootstrap value of `state` under the target network.
    pub fn next_value(&mut self, state: usize) -> T {
        self.q_target.eval_into(Features::OneHot(state), &mut self.row);
        match &self.bootstrap {
            Bootstrap::Max => self.row.iter().fold(T::neg_infinity(), |m, &q| m.max(q)),
            Bootstrap::InSample(support) => {
                if support.is_empty_at(state) {
                    return T::zero();
                }
                self.row
                    .iter()
                    .zip(support.row(state))
                    .filter(|(_, &ok)| ok)
                    .fold(T::neg_infinity(), |m, (&q, _)| m.max(q))
            }
        }
    }

    pub fn update(&mut self, batch: &[Transition<T>]) -> Result<T> {
        let k = T::one() / T::from_usize_lossy(batch.len());
        let mut loss = T::zero();
        self.q.zero_grad();
        for t in batch {
            let y = t.reward + self.gamma * self.next_value(t.next_state);
            self.q.forward_into(Features::OneHot(t.state), &mut self.row);
            let d = self.row[t.action] - y;
            loss += T::lit(0.5) * d * d;
            self.upstream.fill(T::zero());
            self.upstream[t.action] = k * d;
            self.q.backward(&self.upstream)?;
        }
        self.opt.step(&mut self.q)?;
        polyak_update(&mut self.q_target, &self.q, self.polyak)?;
        Ok(loss * k)
    }

    pub fn q_table(&self) -> QTable<T> {
        let values = (0..self.n_states).flat_map(|s| self.q.eval(Features::OneHot(s))).collect();
        QTable::from_vec(self.n_states, self.n_actions, values)
    }

    /// Greedy policy over the bootstrap's action set; unvisited states fall
    /// back to the full action set.
    pub fn policy(&self) -> Result<Policy<T>> {
        let q = self.q_table();
        let support = match &self.bootstrap {
            Bootstrap::Max => SupportSet::full(self.n_states, self.n_actions),
            Bootstrap::InSample(s) => {
                let mask = (0..self.n_states)
                    .flat_map(|st| {
                        let empty = s.is_empty_at(st);
                        s.row(st).iter().map(move |&ok| ok || empty)
                    })
                    .collect();
                SupportSet::from_mask(self.n_states, self.n_actions, mask)?
            }
        };
        greedy_policy(&q, &support)
    }
}

#[derive(Clone, Debug)]
pub struct QRun<T> {
    pub agent: QLearningAgent<T>,
    pub curve: LearningCurve,
    pub policy: Policy<T>,
}

fn q_train<T: Scalar>(
    data: &OfflineDataset<T>,
    config: &TrainConfig,
    mdp: &TabularMdp<T>,
    start: usize,
    bootstrap: Bootstrap,
) -> Result<QRun<T>> {
    config.validate(data.len())?;
    data.check_indices(mdp.n_states(), mdp.n_actions())?;
    let mut agent = QLearningAgent::new(mdp.n_states(), mdp.n_actions(), mdp.gamma(), bootstrap, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut batch = Vec::with_capacity(config.batch_size);
    let mut curve = LearningCurve::default();
    let mut evaluate = |agent: &QLearningAgent<T>, update: usize| -> Result<Policy<T>> {
        let pi = agent.policy()?;
        curve.push(evaluate_policy(mdp, start, &pi, config.eval_episodes, eval_seed(config.seed, update), update)?);
        Ok(pi)
    };
    let mut policy = evaluate(&agent, 0)?;
    for u in 1..=config.updates {
        sample_batch(&mut rng, &data.transitions, config.batch_size, &mut batch);
        agent.update(&batch)?;
        if u % config.eval_interval == 0 || u == config.updates {
            policy = evaluate(&agent, u)?;
        }
    }
    Ok(QRun { agent, curve, policy })
}

/// Q-learning whose bootstrap only maximizes over actions seen in the data.
pub fn oracle_max_train<T: Scalar>(
    data: &OfflineDataset<T>,
    config: &TrainConfig,
    mdp: &TabularMdp<T>,
    start: usize,
) -> Result<QRun<T>> {
    let support = estimate_behavior(data, mdp.n_states(), mdp.n_actions())?.support().clone();
    q_train(data, config, mdp, start, Bootstrap::InSample(support))
}

/// Q-learning with the ordinary max bootstrap.
pub fn fqi_train<T: Scalar>(
    data: &OfflineDataset<T>,
    config: &TrainConfig,
    mdp: &TabularMdp<T>,
    start: usize,
) -> Result<QRun<T>> {
    q_train(data, config, mdp, start, Bootstrap::Max)
}
