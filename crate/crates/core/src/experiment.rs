//! Four Rooms experiment plumbing: dataset recipes, agent dispatch, seeded
//! learning-rate sweeps and the flat `key = value` experiment config.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::agents::{
    fqi_train, inac_train, mean_stderr, oracle_max_train, ApproxKind, BehaviorSource, CurvePoint, InitPreset,
    LearningCurve, Normalizer, TrainConfig,
};
use crate::data::{collect_episodic, collect_random_restart, make_missing_action, make_mixed_with, OfflineDataset};
use crate::envs::{Action, FourRooms};
use crate::error::{Error, Result};
use crate::mdp::{greedy_policy, Policy, QTable, SupportSet};
use crate::operators::BackupKind;
use crate::scalar::Scalar;
use crate::solvers::{value_iteration, SolveOptions};

pub const ENV_NAME: &str = "fourrooms";
/// Learning rates swept for every agent.
pub const DEFAULT_LRS: [f64; 5] = [0.1, 0.03, 0.01, 0.003, 0.001];
pub const DEFAULT_N: usize = 10_000;
pub const DEFAULT_SEEDS: u64 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recipe {
    Expert,
    Random,
    Mixed,
    MissingAction,
}

impl Recipe {
    pub const ALL: [Recipe; 4] = [Recipe::Expert, Recipe::Random, Recipe::Mixed, Recipe::MissingAction];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::Expert => "expert",
            Recipe::Random => "random",
            Recipe::Mixed => "mixed",
            Recipe::MissingAction => "missing-action",
        }
    }
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Recipe::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown recipe `{s}`")))
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum AgentKind {
    Inac,
    OracleMax,
    Fqi,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [AgentKind::Inac, AgentKind::OracleMax, AgentKind::Fqi];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Inac => "inac",
            AgentKind::OracleMax => "oracle-max",
            AgentKind::Fqi => "fqi",
        }
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown agent `{s}`")))
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Deterministic optimal policy from hard-max value iteration.
pub fn optimal_policy<T: Scalar>(env: &FourRooms<T>) -> Result<Policy<T>> {
    let mdp = env.mdp();
    let (n, na) = (mdp.n_states(), mdp.n_actions());
    let opts = SolveOptions::default().with_tol(T::lit(1e-12));
    let rep = value_iteration(mdp, &BackupKind::HardMax, &QTable::zeros(n, na), &opts)?;
    greedy_policy(&rep.q, &SupportSet::full(n, na))
}

/// Builds a dataset of `n` transitions. The mixed recipe keeps the 1:99
/// expert-to-random proportion (100 and 9900 at `n = 10000`); missing-action
/// removes `Down` in the upper-left room from a mixed set.
pub fn generate_dataset<T: Scalar>(env: &FourRooms<T>, recipe: Recipe, n: usize, seed: u64) -> Result<OfflineDataset<T>> {
    let mdp = env.mdp();
    let expert = |n| -> Result<OfflineDataset<T>> {
        let pi = optimal_policy(env)?;
        collect_episodic(mdp, env.start_state(), &pi, n, seed)
    };
    let mixed = || -> Result<OfflineDataset<T>> {
        let n_expert = (n / 100).max(1).min(n);
        let e = expert(n_expert)?;
        let r = collect_random_restart(mdp, n - n_expert, seed.wrapping_add(1));
        match r {
            Ok(r) => make_mixed_with(&e, &r, n_expert, n - n_expert),
            Err(_) => Ok(e),
        }
    };
    let mut data = match recipe {
        Recipe::Expert => expert(n)?,
        Recipe::Random => collect_random_restart(mdp, n, seed)?,
        Recipe::Mixed => mixed()?,
        Recipe::MissingAction => make_missing_action(&mixed()?, &env.upper_left_room(), Action::Down.index()),
    };
    if matches!(recipe, Recipe::Expert | Recipe::Random) {
        data.sources = vec![recipe.name().to_owned()];
    }
    data.env = ENV_NAME.into();
    data.recipe = recipe.name().into();
    data.seed = seed;
    Ok(data)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub curve: LearningCurve,
    pub policy: Policy<T>,
}

pub fn train_agent<T: Scalar>(
    kind: AgentKind,
    data: &OfflineDataset<T>,
    config: &TrainConfig,
    env: &FourRooms<T>,
) -> Result<TrainOutcome<T>> {
    let (mdp, start) = (env.mdp(), env.start_state());
    Ok(match kind {
        AgentKind::Inac => {
            let r = inac_train(data, config, mdp, start)?;
            TrainOutcome { curve: r.curve, policy: r.policy }
        }
        AgentKind::OracleMax => {
            let r = oracle_max_train(data, config, mdp, start)?;
            TrainOutcome { curve: r.curve, policy: r.policy }
        }
        AgentKind::Fqi => {
            let r = fqi_train(data, config, mdp, start)?;
            TrainOutcome { curve: r.curve, policy: r.policy }
        }
    })
}

/// All seeds of one learning rate.
#[derive(Clone, Debug)]
pub struct SweepEntry<T> {
    pub lr: f64,
    pub seeds: Vec<u64>,
    pub curves: Vec<LearningCurve>,
    /// Final policy of each seed.
    pub policies: Vec<Policy<T>>,
}

impl<T> SweepEntry<T> {
    pub fn finals(&self) -> Vec<CurvePoint> {
        self.curves.iter().filter_map(|c| c.last().copied()).collect()
    }

    /// Mean and standard error over seeds of the final exact start value.
    pub fn final_exact(&self) -> (f64, f64) {
        mean_stderr(&self.finals().iter().map(|p| p.exact_start_value).collect::<Vec<_>>())
    }

    /// Mean and standard error over seeds of the final rollout return.
    pub fn final_return(&self) -> (f64, f64) {
        mean_stderr(&self.finals().iter().map(|p| p.rollout_return_mean).collect::<Vec<_>>())
    }

    /// Seed-averaged curve; every run shares the evaluation schedule.
    pub fn mean_curve(&self) -> LearningCurve {
        let Some(first) = self.curves.first() else {
            return LearningCurve::default();
        };
        let points = (0..first.points.len())
            .map(|i| {
                let col = |f: fn(&CurvePoint) -> f64| self.curves.iter().map(|c| f(&c.points[i])).collect::<Vec<_>>();
                let (exact, _) = mean_stderr(&col(|p| p.exact_start_value));
                let (ret, se) = mean_stderr(&col(|p| p.rollout_return_mean));
                CurvePoint {
                    update: first.points[i].update,
                    exact_start_value: exact,
                    rollout_return_mean: ret,
                    rollout_return_stderr: se,
                }
            })
            .collect();
        LearningCurve { points }
    }
}

#[derive(Clone, Debug)]
pub struct Sweep<T> {
    pub agent: AgentKind,
    pub entries: Vec<SweepEntry<T>>,
    /// Index into `entries` of the winning learning rate.
    pub best: usize,
}

impl<T> Sweep<T> {
    pub fn best_entry(&self) -> &SweepEntry<T> {
        &self.entries[self.best]
    }

    /// One row per learning rate.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("agent,lr,seeds,final_exact_mean,final_exact_stderr,final_return_mean,final_return_stderr,best\n");
        for (i, e) in self.entries.iter().enumerate() {
            let (em, es) = e.final_exact();
            let (rm, rs) = e.final_return();
            out.push_str(&format!(
                "{},{:?},{},{:?},{:?},{:?},{:?},{}\n",
                self.agent,
                e.lr,
                e.seeds.len(),
                em,
                es,
                rm,
                rs,
                i == self.best
            ));
        }
        out
    }
}

/// Values closer than this count as tied when picking a sweep winner.
pub const TIE_TOL: f64 = 1e-9;

/// Highest mean final exact start value; ties (within [`TIE_TOL`]) go to the
/// lower learning rate.
pub fn select_best<T>(entries: &[SweepEntry<T>]) -> usize {
    let mut best = 0;
    for (i, e) in entries.iter().enumerate().skip(1) {
        let (cur, _) = entries[best].final_exact();
        let (cand, _) = e.final_exact();
        let tied = (cand - cur).abs() <= TIE_TOL;
        if (!tied && cand > cur) || (tied && e.lr < entries[best].lr) {
            best = i;
        }
    }
    best
}

/// Trains `kind` once per (learning rate, seed). Runs are spread over up to
/// `jobs` threads; results are placed by index so the output does not depend
/// on scheduling.
pub fn run_sweep<T: Scalar>(
    kind: AgentKind,
    data: &OfflineDataset<T>,
    base: &TrainConfig,
    lrs: &[f64],
    seeds: &[u64],
    env: &FourRooms<T>,
    jobs: usize,
) -> Result<Sweep<T>> {
    if lrs.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one learning rate and one seed".into()));
    }
    let tasks: Vec<(usize, usize)> = (0..lrs.len()).flat_map(|i| (0..seeds.len()).map(move |j| (i, j))).collect();
    let run = |&(i, j): &(usize, usize)| {
        let cfg = TrainConfig {
            lr: lrs[i],
            seed: seeds[j],
            ..base.clone()
        };
        train_agent(kind, data, &cfg, env)
    };
    let jobs = jobs.clamp(1, tasks.len());
    let results: Vec<Result<TrainOutcome<T>>> = if jobs == 1 {
        tasks.iter().map(run).collect()
    } else {
        let mut slots: Vec<Option<Result<TrainOutcome<T>>>> = vec![None; tasks.len()];
        std::thread::scope(|scope| {
            let chunks: Vec<_> = slots.chunks_mut(tasks.len().div_ceil(jobs)).enumerate().collect();
            let size = tasks.len().div_ceil(jobs);
            for (c, chunk) in chunks {
                let tasks = &tasks;
                let run = &run;
                scope.spawn(move || {
                    for (k, slot) in chunk.iter_mut().enumerate() {
                        *slot = Some(run(&tasks[c * size + k]));
                    }
                });
            }
        });
        slots.into_iter().map(|s| s.expect("every task ran")).collect()
    };
    let mut entries: Vec<SweepEntry<T>> = lrs
        .iter()
        .map(|&lr| SweepEntry {
            lr,
            seeds: seeds.to_vec(),
            curves: Vec::with_capacity(seeds.len()),
            policies: Vec::with_capacity(seeds.len()),
        })
        .collect();
    for (&(i, _), r) in tasks.iter().zip(results) {
        let out = r?;
        entries[i].curves.push(out.curve);
        entries[i].policies.push(out.policy);
    }
    let best = select_best(&entries);
    Ok(Sweep { agent: kind, entries, best })
}

/// Flat experiment description; see [`ExperimentConfig::parse`] for keys.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub env: String,
    pub gamma: f64,
    pub recipe: Recipe,
    pub agent: AgentKind,
    pub data: Option<String>,
    pub n: usize,
    pub data_seed: u64,
    pub train: TrainConfig,
    pub lrs: Vec<f64>,
    pub seeds: Vec<u64>,
    pub out_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: ENV_NAME.into(),
            gamma: crate::envs::GAMMA,
            recipe: Recipe::Expert,
            agent: AgentKind::Inac,
            data: None,
            n: DEFAULT_N,
            data_seed: 0,
            train: TrainConfig::default(),
            lrs: DEFAULT_LRS.to_vec(),
            seeds: (0..DEFAULT_SEEDS).collect(),
            out_dir: "out".into(),
        }
    }
}

pub const CONFIG_KEYS: [&str; 26] = [
    "env",
    "gamma",
    "recipe",
    "agent",
    "data",
    "n",
    "data_seed",
    "lr",
    "lrs",
    "seeds",
    "out_dir",
    "tau",
    "batch_size",
    "updates",
    "eval_interval",
    "eval_episodes",
    "init",
    "exp_clip",
    "weight_floor",
    "polyak",
    "approx",
    "behavior",
    "bc_steps",
    "bc_lr",
    "bc_during_training",
    "normalizer",
];

fn parse_list<X: FromStr>(key: &str, v: &str) -> Result<Vec<X>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| bad_value(key, s)))
        .collect()
}

fn bad_value(key: &str, v: &str) -> Error {
    Error::InvalidArgument(format!("bad value `{v}` for key `{key}`"))
}

fn join<X: fmt::Debug>(xs: &[X]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Sets one key. Unknown keys are an error naming the key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        fn num<X: FromStr>(key: &str, v: &str) -> Result<X> {
            v.parse().map_err(|_| bad_value(key, v))
        }
        let t = &mut self.train;
        match key {
            "env" => {
                if v != ENV_NAME {
                    return Err(Error::InvalidArgument(format!("unknown env `{v}`")));
                }
                self.env = v.into();
            }
            "gamma" => {
                let g: f64 = num(key, v)?;
                if !(0.0..1.0).contains(&g) {
                    return Err(bad_value(key, v));
                }
                self.gamma = g;
            }
            "recipe" => self.recipe = v.parse()?,
            "agent" => self.agent = v.parse()?,
            "data" => self.data = if v.is_empty() { None } else { Some(v.into()) },
            "n" => self.n = num(key, v)?,
            "data_seed" => self.data_seed = num(key, v)?,
            "lr" => {
                t.lr = num(key, v)?;
                self.lrs = vec![t.lr];
            }
            "lrs" => self.lrs = parse_list(key, v)?,
            "seeds" => self.seeds = parse_seeds(v)?,
            "out_dir" => self.out_dir = v.into(),
            "tau" => t.tau = num(key, v)?,
            "batch_size" => t.batch_size = num(key, v)?,
            "updates" => t.updates = num(key, v)?,
            "eval_interval" => t.eval_interval = num(key, v)?,
            "eval_episodes" => t.eval_episodes = num(key, v)?,
            "init" => t.init = InitPreset::parse(v).ok_or_else(|| bad_value(key, v))?,
            "exp_clip" => t.exp_clip = num(key, v)?,
            "weight_floor" => t.weight_floor = num(key, v)?,
            "polyak" => t.polyak = num(key, v)?,
            "approx" => {
                t.approx = match v {
                    "table" => ApproxKind::Table,
                    _ => match v.strip_prefix("mlp:") {
                        Some(h) => ApproxKind::Mlp {
                            hidden: h.split('x').map(|s| num(key, s)).collect::<Result<_>>()?,
                        },
                        None => return Err(bad_value(key, v)),
                    },
                }
            }
            "behavior" => {
                t.behavior = match v {
                    "clone" => BehaviorSource::Clone,
                    "counts" => BehaviorSource::Counts,
                    _ => return Err(bad_value(key, v)),
                }
            }
            "bc_steps" => t.bc_steps = num(key, v)?,
            "bc_lr" => t.bc_lr = num(key, v)?,
            "bc_during_training" => t.bc_during_training = num(key, v)?,
            "normalizer" => {
                t.normalizer = match v {
                    "baseline" => Normalizer::Baseline,
                    "exact" => Normalizer::ExactTabular,
                    _ => return Err(bad_value(key, v)),
                }
            }
            _ => return Err(Error::InvalidArgument(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let t = &self.train;
        Some(match key {
            "env" => self.env.clone(),
            "gamma" => format!("{:?}", self.gamma),
            "recipe" => self.recipe.to_string(),
            "agent" => self.agent.to_string(),
            "data" => self.data.clone().unwrap_or_default(),
            "n" => self.n.to_string(),
            "data_seed" => self.data_seed.to_string(),
            "lr" => format!("{:?}", t.lr),
            "lrs" => join(&self.lrs),
            "seeds" => join(&self.seeds),
            "out_dir" => self.out_dir.clone(),
            "tau" => format!("{:?}", t.tau),
            "batch_size" => t.batch_size.to_string(),
            "updates" => t.updates.to_string(),
            "eval_interval" => t.eval_interval.to_string(),
            "eval_episodes" => t.eval_episodes.to_string(),
            "init" => t.init.name().into(),
            "exp_clip" => format!("{:?}", t.exp_clip),
            "weight_floor" => format!("{:?}", t.weight_floor),
            "polyak" => format!("{:?}", t.polyak),
            "approx" => match &t.approx {
                ApproxKind::Table => "table".into(),
                ApproxKind::Mlp { hidden } => format!(
                    "mlp:{}",
                    hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join("x")
                ),
            },
            "behavior" => match t.behavior {
                BehaviorSource::Clone => "clone".into(),
                BehaviorSource::Counts => "counts".into(),
            },
            "bc_steps" => t.bc_steps.to_string(),
            "bc_lr" => format!("{:?}", t.bc_lr),
            "bc_during_training" => t.bc_during_training.to_string(),
            "normalizer" => match t.normalizer {
                Normalizer::Baseline => "baseline".into(),
                Normalizer::ExactTabular => "exact".into(),
            },
            _ => return None,
        })
    }

    /// `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    /// Applies the assignments in `text` on top of `self`.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, found `{line}`"),
            })?;
            self.set(k.trim(), v).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        CONFIG_KEYS
            .iter()
            .filter(|&&k| k != "lr")
            .map(|k| format!("{k} = {}\n", self.get(k).expect("listed key")))
            .collect()
    }

    pub fn as_map(&self) -> BTreeMap<&'static str, String> {
        CONFIG_KEYS.iter().map(|&k| (k, self.get(k).expect("listed key"))).collect()
    }
}

/// `"0,1,2"` or a range `"0..10"`.
pub fn parse_seeds(v: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = v.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad_value("seeds", v))?;
        let b: u64 = b.trim().parse().map_err(|_| bad_value("seeds", v))?;
        if a >= b {
            return Err(bad_value("seeds", v));
        }
        return Ok((a..b).collect());
    }
    parse_list("seeds", v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipe_and_agent_names() {
        for r in Recipe::ALL {
            assert_eq!(r.name().parse::<Recipe>().unwrap(), r);
        }
        for k in AgentKind::ALL {
            assert_eq!(k.name().parse::<AgentKind>().unwrap(), k);
        }
        assert!("medium".parse::<Recipe>().is_err());
    }

    #[test]
    fn config_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("lrs", "0.1, 0.03,0.001").unwrap();
        cfg.set("seeds", "0..3").unwrap();
        cfg.set("approx", "mlp:64x64").unwrap();
        cfg.set("init", "-20").unwrap();
        cfg.set("recipe", "missing-action").unwrap();
        let back = ExperimentConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.seeds, vec![0, 1, 2]);
    }

    #[test]
    fn config_errors_name_the_key() {
        let e = ExperimentConfig::parse("tau = 0.01\nlearning_rate = 3\n").unwrap_err();
        assert!(e.to_string().contains("learning_rate"), "{e}");
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(ExperimentConfig::parse("tau 0.01").is_err());
        assert!(ExperimentConfig::parse("env = gridworld").is_err());
    }

    #[test]
    fn datasets_by_recipe() {
        let env = FourRooms::<f64>::new();
        let mixed = generate_dataset(&env, Recipe::Mixed, 10_000, 3).unwrap();
        assert_eq!(mixed.len(), 10_000);
        assert_eq!(mixed.source_counts(), vec![("expert".into(), 100), ("random".into(), 9_900)]);
        let missing = generate_dataset(&env, Recipe::MissingAction, 10_000, 3).unwrap();
        let room = env.upper_left_room();
        assert!(missing.len() < 10_000);
        assert!(!missing
            .transitions
            .iter()
            .any(|t| t.action == Action::Down.index() && room.contains(&t.state)));
        let a = generate_dataset(&env, Recipe::Expert, 500, 9).unwrap();
        let b = generate_dataset(&env, Recipe::Expert, 500, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn best_lr_ties_go_low() {
        let curve = |v| LearningCurve {
            points: vec![CurvePoint {
                update: 1,
                exact_start_value: v,
                rollout_return_mean: 0.0,
                rollout_return_stderr: 0.0,
            }],
        };
        let entry = |lr, v| SweepEntry::<f64> {
            lr,
            seeds: vec![0],
            curves: vec![curve(v)],
            policies: vec![],
        };
        assert_eq!(select_best(&[entry(0.1, 1.0), entry(0.01, 2.0), entry(0.001, 2.0)]), 2);
        assert_eq!(select_best(&[entry(0.1, 3.0), entry(0.01, 2.0)]), 0);
        assert_eq!(select_best(&[entry(0.1, 2.0 + 1e-15), entry(0.01, 2.0)]), 1);
    }
}
