//! Offline datasets: collection recipes, count-based behavior estimates and
//! the CSV file format.
//!
//! File format (UTF-8):
//!
//! ```text
//! state,action,reward,next_state
//! 12,0,0.0,13
//! ...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envs::{EpisodeSimulator, DEFAULT_HORIZON};
use crate::error::{Error, Result};
use crate::mdp::{Policy, SupportSet, TabularMdp};
use crate::scalar::Scalar;

pub const CSV_HEADER: &str = "state,action,reward,next_state";
/// Expert transitions at the head of a mixed dataset.
pub const MIXED_EXPERT: usize = 100;
/// Random-restart transitions following the expert block.
pub const MIXED_RANDOM: usize = 9_900;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition<T> {
    pub state: usize,
    pub action: usize,
    pub reward: T,
    pub next_state: usize,
}

/// Per-transition bookkeeping that is not part of the file format.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct TransitionMeta {
    /// Index into [`OfflineDataset::sources`].
    pub source: u8,
    /// Last transition of an episode cut at the horizon.
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OfflineDataset<T> {
    pub transitions: Vec<Transition<T>>,
    pub meta: Vec<TransitionMeta>,
    /// Source names referenced by [`TransitionMeta::source`].
    pub sources: Vec<String>,
    pub env: String,
    pub recipe: String,
    pub seed: u64,
}

impl<T: Scalar> OfflineDataset<T> {
    pub fn new(transitions: Vec<Transition<T>>, env: &str, recipe: &str, seed: u64) -> Self {
        let meta = vec![TransitionMeta::default(); transitions.len()];
        Self {
            transitions,
            meta,
            sources: vec![recipe.to_owned()],
            env: env.to_owned(),
            recipe: recipe.to_owned(),
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Number of transitions per source name, in `sources` order.
    pub fn source_counts(&self) -> Vec<(String, usize)> {
        let mut counts = vec![0usize; self.sources.len()];
        for m in &self.meta {
            counts[m.source as usize] += 1;
        }
        self.sources.iter().cloned().zip(counts).collect()
    }

    /// Checks that every index is in range for an MDP of the given size.
    pub fn check_indices(&self, n_states: usize, n_actions: usize) -> Result<()> {
        for (i, t) in self.transitions.iter().enumerate() {
            if t.state >= n_states || t.next_state >= n_states || t.action >= n_actions {
                return Err(Error::InvalidArgument(format!(
                    "transition {i} out of range for {n_states} states x {n_actions} actions"
                )));
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.len() * 16);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for t in &self.transitions {
            let _ = writeln!(out, "{},{},{:?},{}", t.state, t.action, t.reward.to_f64_lossy(), t.next_state);
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::NoTransitions)?;
        if header.trim() != CSV_HEADER {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header `{CSV_HEADER}`"),
            });
        }
        let mut transitions = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Parse { line: line_no, msg };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(bad(format!("expected 4 fields, found {}", fields.len())));
            }
            let idx = |s: &str| s.trim().parse::<usize>().map_err(|e| bad(format!("{s:?}: {e}")));
            let reward = fields[2]
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("{:?}: {e}", fields[2])))?;
            transitions.push(Transition {
                state: idx(fields[0])?,
                action: idx(fields[1])?,
                reward: T::from_f64(reward).ok_or_else(|| bad("reward not representable".into()))?,
                next_state: idx(fields[3])?,
            });
        }
        if transitions.is_empty() {
            return Err(Error::NoTransitions);
        }
        Ok(Self::new(transitions, "file", "file", 0))
    }
}

pub fn write_dataset<T: Scalar>(data: &OfflineDataset<T>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, data.to_csv_string())?;
    Ok(())
}

pub fn read_dataset<T: Scalar>(path: impl AsRef<Path>) -> Result<OfflineDataset<T>> {
    let text = std::fs::read_to_string(path)?;
    OfflineDataset::from_csv_str(&text)
}

/// Runs horizon-length episodes from `start` under `behavior` until
/// `n_transitions` have been recorded. The last step of each episode is kept
/// as an ordinary transition and marked truncated in the metadata.
pub fn collect_episodic<T: Scalar>(
    mdp: &TabularMdp<T>,
    start: usize,
    behavior: &Policy<T>,
    n_transitions: usize,
    seed: u64,
) -> Result<OfflineDataset<T>> {
    if n_transitions == 0 {
        return Err(Error::InvalidArgument("n_transitions must be positive".into()));
    }
    crate::mdp::check_policy_shape(mdp, behavior)?;
    let mut sim = EpisodeSimulator::new(mdp, start, DEFAULT_HORIZON, seed);
    let mut transitions = Vec::with_capacity(n_transitions);
    let mut meta = Vec::with_capacity(n_transitions);
    while transitions.len() < n_transitions {
        if sim.done() {
            sim.reset();
        }
        let a = sim.sample_action(behavior);
        let out = sim.step(a);
        transitions.push(Transition {
            state: out.state,
            action: out.action,
            reward: out.reward,
            next_state: out.next_state,
        });
        meta.push(TransitionMeta {
            source: 0,
            truncated: out.truncated,
        });
    }
    let mut data = OfflineDataset::new(transitions, "", "episodic", seed);
    data.meta = meta;
    Ok(data)
}

/// Independent one-step samples: a uniformly random state, a uniformly random
/// action, and the sampled successor.
pub fn collect_random_restart<T: Scalar>(
    mdp: &TabularMdp<T>,
    n_transitions: usize,
    seed: u64,
) -> Result<OfflineDataset<T>> {
    if n_transitions == 0 {
        return Err(Error::InvalidArgument("n_transitions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transitions = (0..n_transitions)
        .map(|_| {
            let s = rng.gen_range(0..mdp.n_states());
            let a = rng.gen_range(0..mdp.n_actions());
            let next = crate::envs::sim_sample(&mut rng, mdp.transition_row(s, a));
            Transition {
                state: s,
                action: a,
                reward: mdp.reward(s, a),
                next_state: next,
            }
        })
        .collect();
    Ok(OfflineDataset::new(transitions, "", "random", seed))
}

/// The first 100 expert transitions followed by the first 9900 random ones.
pub fn make_mixed<T: Scalar>(expert: &OfflineDataset<T>, random: &OfflineDataset<T>) -> Result<OfflineDataset<T>> {
    make_mixed_with(expert, random, MIXED_EXPERT, MIXED_RANDOM)
}

pub fn make_mixed_with<T: Scalar>(
    expert: &OfflineDataset<T>,
    random: &OfflineDataset<T>,
    n_expert: usize,
    n_random: usize,
) -> Result<OfflineDataset<T>> {
    if expert.len() < n_expert || random.len() < n_random {
        return Err(Error::InvalidArgument(format!(
            "mixed dataset needs {n_expert} expert and {n_random} random transitions, got {} and {}",
            expert.len(),
            random.len()
        )));
    }
    let mut transitions = expert.transitions[..n_expert].to_vec();
    transitions.extend_from_slice(&random.transitions[..n_random]);
    let mut meta: Vec<TransitionMeta> = expert.meta[..n_expert]
        .iter()
        .map(|m| TransitionMeta { source: 0, ..*m })
        .collect();
    meta.extend(random.meta[..n_random].iter().map(|m| TransitionMeta { source: 1, ..*m }));
    Ok(OfflineDataset {
        transitions,
        meta,
        sources: vec!["expert".into(), "random".into()],
        env: expert.env.clone(),
        recipe: "mixed".into(),
        seed: expert.seed,
    })
}

/// Drops every transition that takes `removed_action` in one of `region`'s
/// states; everything else keeps its order.
pub fn make_missing_action<T: Scalar>(
    data: &OfflineDataset<T>,
    region: &[usize],
    removed_action: usize,
) -> OfflineDataset<T> {
    let keep: Vec<bool> = data
        .transitions
        .iter()
        .map(|t| !(t.action == removed_action && region.contains(&t.state)))
        .collect();
    let pick = |i: &usize| keep[*i];
    let idx: Vec<usize> = (0..data.len()).filter(pick).collect();
    OfflineDataset {
        transitions: idx.iter().map(|&i| data.transitions[i]).collect(),
        meta: idx.iter().map(|&i| data.meta[i]).collect(),
        sources: data.sources.clone(),
        env: data.env.clone(),
        recipe: "missing-action".into(),
        seed: data.seed,
    }
}

/// Count-based maximum-likelihood estimate of the behavior policy.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalBehavior<T> {
    n_states: usize,
    n_actions: usize,
    counts: Vec<usize>,
    probs: Vec<T>,
    support: SupportSet,
}

impl<T: Scalar> EmpiricalBehavior<T> {
    pub fn count(&self, state: usize, action: usize) -> usize {
        self.counts[state * self.n_actions + action]
    }

    pub fn state_count(&self, state: usize) -> usize {
        self.counts[state * self.n_actions..(state + 1) * self.n_actions].iter().sum()
    }

    /// Estimated probabilities; rows of unvisited states are all zero.
    pub fn probs(&self, state: usize) -> &[T] {
        &self.probs[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    pub fn is_visited(&self, state: usize) -> bool {
        self.state_count(state) > 0
    }

    pub fn unvisited_states(&self) -> Vec<usize> {
        self.support.empty_states()
    }

    /// The estimate as a [`Policy`], with uniform rows at unvisited states.
    pub fn to_policy_with_uniform_fallback(&self) -> Policy<T> {
        let uniform = T::one() / T::from_usize_lossy(self.n_actions);
        let mut probs = self.probs.clone();
        for s in self.unvisited_states() {
            probs[s * self.n_actions..(s + 1) * self.n_actions].fill(uniform);
        }
        Policy::new(self.n_states, self.n_actions, probs).expect("count estimate rows are distributions")
    }
}

pub fn estimate_behavior<T: Scalar>(
    data: &OfflineDataset<T>,
    n_states: usize,
    n_actions: usize,
) -> Result<EmpiricalBehavior<T>> {
    if data.is_empty() {
        return Err(Error::NoTransitions);
    }
    data.check_indices(n_states, n_actions)?;
    let mut counts = vec![0usize; n_states * n_actions];
    for t in &data.transitions {
        counts[t.state * n_actions + t.action] += 1;
    }
    let mut probs = vec![T::zero(); counts.len()];
    for s in 0..n_states {
        let row = &counts[s * n_actions..(s + 1) * n_actions];
        let total: usize = row.iter().sum();
        if total == 0 {
            continue;
        }
        for a in 0..n_actions {
            probs[s * n_actions + a] = T::from_usize_lossy(row[a]) / T::from_usize_lossy(total);
        }
    }
    let support = SupportSet::from_mask(n_states, n_actions, counts.iter().map(|&c| c > 0).collect())?;
    Ok(EmpiricalBehavior {
        n_states,
        n_actions,
        counts,
        probs,
        support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::FourRooms;
    use crate::mdp::uniform_policy;

    fn tr(state: usize, action: usize) -> Transition<f64> {
        Transition {
            state,
            action,
            reward: 0.0,
            next_state: state,
        }
    }

    #[test]
    fn counts_example() {
        let data = OfflineDataset::new(vec![tr(3, 0), tr(3, 1), tr(3, 0)], "t", "t", 0);
        let b = estimate_behavior(&data, 5, 4).unwrap();
        assert_eq!(b.probs(3), &[2.0 / 3.0, 1.0 / 3.0, 0.0, 0.0]);
        assert_eq!(b.support().row(3), &[true, true, false, false]);
        assert_eq!(b.unvisited_states(), vec![0, 1, 2, 4]);
        assert_eq!(b.to_policy_with_uniform_fallback().row(0), &[0.25; 4]);
        assert_eq!(
            estimate_behavior(&OfflineDataset::<f64>::new(vec![], "t", "t", 0), 2, 2),
            Err(Error::NoTransitions)
        );
    }

    #[test]
    fn episodic_single_transition_starts_at_start() {
        let env = FourRooms::<f64>::new();
        let pi = uniform_policy(env.n_states(), 4);
        let d = collect_episodic(env.mdp(), env.start_state(), &pi, 1, 5).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.transitions[0].state, env.start_state());
        let d2 = collect_episodic(env.mdp(), env.start_state(), &pi, 250, 5).unwrap();
        assert_eq!(collect_episodic(env.mdp(), env.start_state(), &pi, 250, 5).unwrap(), d2);
        assert_eq!(d2.meta.iter().filter(|m| m.truncated).count(), 2);
        assert_eq!(d2.transitions[100].state, env.start_state());
    }

    #[test]
    fn mixed_layout_and_provenance() {
        let env = FourRooms::<f64>::new();
        let expert = collect_random_restart(env.mdp(), 200, 1).unwrap();
        let random = collect_random_restart(env.mdp(), 10_000, 2).unwrap();
        let mixed = make_mixed(&expert, &random).unwrap();
        assert_eq!(mixed.len(), 10_000);
        assert_eq!(mixed.transitions[..100], expert.transitions[..100]);
        assert_eq!(mixed.transitions[100..], random.transitions[..9_900]);
        assert_eq!(
            mixed.source_counts(),
            vec![("expert".to_string(), 100), ("random".to_string(), 9_900)]
        );
        assert!(make_mixed(&expert, &expert).is_err());
    }

    #[test]
    fn missing_action_filter() {
        let data = OfflineDataset::new(vec![tr(0, 1), tr(0, 2), tr(5, 1), tr(1, 1)], "t", "t", 0);
        let out = make_missing_action(&data, &[0, 1], 1);
        assert_eq!(out.transitions, vec![tr(0, 2), tr(5, 1)]);
        let untouched = make_missing_action(&data, &[7], 1);
        assert_eq!(untouched.transitions, data.transitions);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let data = OfflineDataset::new(
            vec![
                Transition { state: 1, action: 2, reward: 1.0, next_state: 3 },
                Transition { state: 0, action: 0, reward: -0.25, next_state: 0 },
            ],
            "t",
            "t",
            0,
        );
        let text = data.to_csv_string();
        assert!(text.starts_with("state,action,reward,next_state\n1,2,1.0,3\n"));
        let back = OfflineDataset::<f64>::from_csv_str(&text).unwrap();
        assert_eq!(back.transitions, data.transitions);

        assert!(matches!(
            OfflineDataset::<f64>::from_csv_str("s,a,r,s2\n1,2,3,4\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert_eq!(OfflineDataset::<f64>::from_csv_str(""), Err(Error::NoTransitions));
        assert_eq!(OfflineDataset::<f64>::from_csv_str("state,action,reward,next_state\n"), Err(Error::NoTransitions));
        assert!(matches!(
            OfflineDataset::<f64>::from_csv_str("state,action,reward,next_state\n1,2,1.0,3\n1,x,0,0\n"),
            Err(Error::Parse { line: 3, .. })
        ));
    }
}
