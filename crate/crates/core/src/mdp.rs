//! Finite MDPs, policies, value tables and support masks.
//!
//! Tables are stored row-major: a [`QTable`] or [`Policy`] entry for
//! `(state, action)` lives at `state * n_actions + action`, and the transition
//! row for `(state, action)` is the slice of next-state probabilities at
//! `(state * n_actions + action) * n_states`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::scalar::Scalar;

/// Above this many state-action pairs policy evaluation switches from a
/// direct linear solve to fixed-point iteration.
pub const DIRECT_SOLVE_LIMIT: usize = 10_000;

fn stochastic_tol<T: Scalar>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(64.0))
}

/// A finite MDP with a dense transition tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularMdp<T> {
    n_states: usize,
    n_actions: usize,
    transition: Vec<T>,
    reward: Vec<T>,
    gamma: T,
    successors: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> TabularMdp<T> {
    /// Builds and validates an MDP. `transition` has length
    /// `n_states * n_actions * n_states`, `reward` has length `n_states * n_actions`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<T>,
        reward: Vec<T>,
        gamma: T,
    ) -> Result<Self> {
        let mdp = Self::new_unchecked(n_states, n_actions, transition, reward, gamma)?;
        validate_mdp(&mdp)?;
        Ok(mdp)
    }

    /// Builds an MDP checking only the table shapes. Use [`validate_mdp`] to
    /// check the probabilistic invariants.
    pub fn new_unchecked(
        n_states: usize,
        n_actions: usize,
        transition: Vec<T>,
        reward: Vec<T>,
        gamma: T,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidArgument(
                "an MDP needs at least one state and one action".into(),
            ));
        }
        let sa = n_states * n_actions;
        if transition.len() != sa * n_states {
            return Err(Error::Shape {
                expected: format!("{} transition entries", sa * n_states),
                got: transition.len().to_string(),
            });
        }
        if reward.len() != sa {
            return Err(Error::Shape {
                expected: format!("{sa} reward entries"),
                got: reward.len().to_string(),
            });
        }
        let successors = transition
            .chunks(n_states)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p != T::zero())
                    .map(|(s, &p)| (s, p))
                    .collect()
            })
            .collect();
        Ok(Self {
            n_states,
            n_actions,
            transition,
            reward,
            gamma,
            successors,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn reward(&self, state: usize, action: usize) -> T {
        self.reward[state * self.n_actions + action]
    }

    pub fn rewards(&self) -> &[T] {
        &self.reward
    }

    /// Dense next-state distribution for `(state, action)`.
    pub fn transition_row(&self, state: usize, action: usize) -> &[T] {
        let start = (state * self.n_actions + action) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    /// Next states with non-zero probability, in increasing state order.
    pub fn successors(&self, state: usize, action: usize) -> &[(usize, T)] {
        &self.successors[state * self.n_actions + action]
    }

    /// `r(s,a) + gamma * sum_s' P(s'|s,a) v(s')` for every pair.
    pub fn q_from_v(&self, v: &VTable<T>) -> QTable<T> {
        let mut out = Vec::with_capacity(self.n_states * self.n_actions);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let boot: T = self
                    .successors(s, a)
                    .iter()
                    .map(|&(next, p)| p * v.values[next])
                    .sum();
                out.push(self.reward(s, a) + self.gamma * boot);
            }
        }
        QTable::from_vec(self.n_states, self.n_actions, out)
    }
}

/// Checks every [`TabularMdp`] invariant, reporting the first violation.
pub fn validate_mdp<T: Scalar>(mdp: &TabularMdp<T>) -> Result<()> {
    if !(mdp.gamma >= T::zero() && mdp.gamma < T::one()) {
        return Err(Error::BadDiscount(mdp.gamma.to_f64_lossy()));
    }
    let tol = stochastic_tol::<T>();
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            if !mdp.reward(s, a).is_finite() {
                return Err(Error::NonFiniteReward { state: s, action: a });
            }
            let row = mdp.transition_row(s, a);
            if let Some(next) = row.iter().position(|&p| !(p >= T::zero())) {
                return Err(Error::NegativeProbability {
                    state: s,
                    action: a,
                    next_state: next,
                });
            }
            let sum: T = row.iter().copied().sum();
            if (sum - T::one()).abs() > tol {
                return Err(Error::RowNotStochastic {
                    state: s,
                    action: a,
                    sum: sum.to_f64_lossy(),
                });
            }
        }
    }
    Ok(())
}

/// Per-state action distributions.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy<T> {
    n_states: usize,
    n_actions: usize,
    probs: Vec<T>,
}

impl<T: Scalar> Policy<T> {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<T>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::Shape {
                expected: format!("{} policy entries", n_states * n_actions),
                got: probs.len().to_string(),
            });
        }
        let tol = stochastic_tol::<T>();
        for (s, row) in probs.chunks(n_actions).enumerate() {
            let sum: T = row.iter().copied().sum();
            if row.iter().any(|&p| !(p >= T::zero())) || (sum - T::one()).abs() > tol {
                return Err(Error::BadPolicyRow {
                    state: s,
                    sum: sum.to_f64_lossy(),
                });
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    /// Deterministic policy choosing `actions[s]` in state `s`.
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self> {
        let mut probs = vec![T::zero(); actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::InvalidArgument(format!(
                    "action {a} out of range at state {s}"
                )));
            }
            probs[s * n_actions + a] = T::one();
        }
        Ok(Self {
            n_states: actions.len(),
            n_actions,
            probs,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, state: usize) -> &[T] {
        &self.probs[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn prob(&self, state: usize, action: usize) -> T {
        self.probs[state * self.n_actions + action]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.probs
    }

    /// Most probable action per state (lowest index on ties).
    pub fn mode_actions(&self) -> Vec<usize> {
        (0..self.n_states).map(|s| argmax(self.row(s))).collect()
    }

    /// `self ⪯ other`: zero wherever `other` is zero.
    pub fn is_supported_by(&self, other: &Policy<T>) -> bool {
        self.probs
            .iter()
            .zip(&other.probs)
            .all(|(&p, &q)| q > T::zero() || p == T::zero())
    }
}

/// Index of the largest element, lowest index on ties.
pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate().skip(1) {
        if x > row[best] {
            best = i;
        }
    }
    best
}

/// Action values for every state-action pair.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable<T> {
    n_states: usize,
    n_actions: usize,
    values: Vec<T>,
}

impl<T: Scalar> QTable<T> {
    pub fn filled(n_states: usize, n_actions: usize, value: T) -> Self {
        Self::from_vec(n_states, n_actions, vec![value; n_states * n_actions])
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::filled(n_states, n_actions, T::zero())
    }

    /// Panics on shape mismatch; use [`QTable::new`] for checked construction.
    pub fn from_vec(n_states: usize, n_actions: usize, values: Vec<T>) -> Self {
        assert_eq!(values.len(), n_states * n_actions, "q table shape");
        Self {
            n_states,
            n_actions,
            values,
        }
    }

    pub fn new(n_states: usize, n_actions: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::Shape {
                expected: format!("{} q entries", n_states * n_actions),
                got: values.len().to_string(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                state: i / n_actions,
                action: i % n_actions,
            });
        }
        Ok(Self::from_vec(n_states, n_actions, values))
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, state: usize, action: usize) -> T {
        self.values[state * self.n_actions + action]
    }

    pub fn set(&mut self, state: usize, action: usize, value: T) {
        self.values[state * self.n_actions + action] = value;
    }

    pub fn row(&self, state: usize) -> &[T] {
        &self.values[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn sup_distance(&self, other: &QTable<T>) -> T {
        crate::scalar::sup_norm_diff(&self.values, &other.values)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_vec(
            self.n_states,
            self.n_actions,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }
}

/// State values.
#[derive(Clone, Debug, PartialEq)]
pub struct VTable<T> {
    pub values: Vec<T>,
}

impl<T: Scalar> VTable<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn get(&self, state: usize) -> T {
        self.values[state]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Boolean mask of allowed actions per state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportSet {
    n_states: usize,
    n_actions: usize,
    mask: Vec<bool>,
}

impl SupportSet {
    pub fn full(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            mask: vec![true; n_states * n_actions],
        }
    }

    pub fn from_mask(n_states: usize, n_actions: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != n_states * n_actions {
            return Err(Error::Shape {
                expected: format!("{} mask entries", n_states * n_actions),
                got: mask.len().to_string(),
            });
        }
        Ok(Self {
            n_states,
            n_actions,
            mask,
        })
    }

    /// Support of a policy: entries with strictly positive probability.
    pub fn from_policy<T: Scalar>(pi: &Policy<T>) -> Self {
        Self {
            n_states: pi.n_states(),
            n_actions: pi.n_actions(),
            mask: pi.as_slice().iter().map(|&p| p > T::zero()).collect(),
        }
    }

    /// Same action set in every state.
    pub fn uniform_rows(n_states: usize, n_actions: usize, allowed: &[usize]) -> Self {
        let mut mask = vec![false; n_states * n_actions];
        for s in 0..n_states {
            for &a in allowed {
                mask[s * n_actions + a] = true;
            }
        }
        Self {
            n_states,
            n_actions,
            mask,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn allows(&self, state: usize, action: usize) -> bool {
        self.mask[state * self.n_actions + action]
    }

    pub fn row(&self, state: usize) -> &[bool] {
        &self.mask[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_empty_at(&self, state: usize) -> bool {
        !self.row(state).iter().any(|&m| m)
    }

    pub fn empty_states(&self) -> Vec<usize> {
        (0..self.n_states).filter(|&s| self.is_empty_at(s)).collect()
    }

    pub fn allowed_actions(&self, state: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(state)
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(a, _)| a)
    }

    /// Number of deterministic policies respecting the support (saturating).
    pub fn deterministic_policy_count(&self) -> usize {
        (0..self.n_states)
            .map(|s| self.allowed_actions(s).count().max(1))
            .fold(1usize, |acc, k| acc.saturating_mul(k))
    }
}

pub fn uniform_policy<T: Scalar>(n_states: usize, n_actions: usize) -> Policy<T> {
    assert!(n_actions >= 1, "uniform policy needs at least one action");
    let p = T::one() / T::from_usize_lossy(n_actions);
    Policy {
        n_states,
        n_actions,
        probs: vec![p; n_states * n_actions],
    }
}

/// Deterministic policy that picks the supported action with the largest q,
/// lowest index on ties.
pub fn greedy_policy<T: Scalar>(q: &QTable<T>, support: &SupportSet) -> Result<Policy<T>> {
    check_support_shape(q, support)?;
    let mut actions = Vec::with_capacity(q.n_states());
    for s in 0..q.n_states() {
        let row = q.row(s);
        let best = support
            .allowed_actions(s)
            .fold(None, |best: Option<usize>, a| match best {
                Some(b) if row[b] >= row[a] => Some(b),
                _ => Some(a),
            })
            .ok_or(Error::EmptySupport(s))?;
        actions.push(best);
    }
    Policy::deterministic(&actions, q.n_actions())
}

pub(crate) fn check_support_shape<T: Scalar>(q: &QTable<T>, support: &SupportSet) -> Result<()> {
    if q.n_states() != support.n_states() || q.n_actions() != support.n_actions() {
        return Err(Error::Shape {
            expected: format!("{}x{} support", q.n_states(), q.n_actions()),
            got: format!("{}x{}", support.n_states(), support.n_actions()),
        });
    }
    Ok(())
}

pub(crate) fn check_policy_shape<T: Scalar>(mdp: &TabularMdp<T>, pi: &Policy<T>) -> Result<()> {
    if pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions() {
        return Err(Error::Shape {
            expected: format!("{}x{} policy", mdp.n_states(), mdp.n_actions()),
            got: format!("{}x{}", pi.n_states(), pi.n_actions()),
        });
    }
    Ok(())
}

/// Expected one-step reward and state-to-state kernel under `pi`.
pub(crate) fn policy_kernel<T: Scalar>(
    mdp: &TabularMdp<T>,
    pi: &Policy<T>,
    bonus: impl Fn(usize) -> T,
) -> (Vec<T>, Vec<T>) {
    let n = mdp.n_states();
    let mut r_pi = vec![T::zero(); n];
    let mut p_pi = vec![T::zero(); n * n];
    for s in 0..n {
        let mut r = bonus(s);
        for a in 0..mdp.n_actions() {
            let w = pi.prob(s, a);
            if w == T::zero() {
                continue;
            }
            r += w * mdp.reward(s, a);
            for &(next, p) in mdp.successors(s, a) {
                p_pi[s * n + next] += w * p;
            }
        }
        r_pi[s] = r;
    }
    (r_pi, p_pi)
}

/// Solves `v = r_pi + gamma P_pi v`, directly for desk-scale problems and by
/// fixed-point iteration to 1e-10 otherwise.
pub(crate) fn solve_policy_system<T: Scalar>(
    mdp: &TabularMdp<T>,
    r_pi: Vec<T>,
    p_pi: Vec<T>,
) -> Vec<T> {
    let n = mdp.n_states();
    let gamma = mdp.gamma();
    if n * mdp.n_actions() <= DIRECT_SOLVE_LIMIT {
        let mut a = p_pi.iter().map(|&p| -gamma * p).collect::<Vec<_>>();
        for s in 0..n {
            a[s * n + s] += T::one();
        }
        if let Ok(v) = solve_dense(a, r_pi.clone()) {
            return v;
        }
    }
    let tol = T::lit(1e-10).max(T::epsilon() * T::lit(16.0));
    let mut v = vec![T::zero(); n];
    loop {
        let next: Vec<T> = (0..n)
            .map(|s| {
                let row = &p_pi[s * n..(s + 1) * n];
                r_pi[s] + gamma * row.iter().zip(&v).map(|(&p, &x)| p * x).sum::<T>()
            })
            .collect();
        let delta = crate::scalar::sup_norm_diff(&next, &v);
        v = next;
        if delta <= tol * (T::one() - gamma) {
            return v;
        }
    }
}

/// Value of `pi` in the unregularized MDP.
pub fn exact_policy_value<T: Scalar>(mdp: &TabularMdp<T>, pi: &Policy<T>) -> Result<VTable<T>> {
    check_policy_shape(mdp, pi)?;
    let (r_pi, p_pi) = policy_kernel(mdp, pi, |_| T::zero());
    Ok(VTable::new(solve_policy_system(mdp, r_pi, p_pi)))
}

/// Largest Bellman expectation residual `|v - (R^pi + gamma P^pi v)|`.
pub fn bellman_residual<T: Scalar>(mdp: &TabularMdp<T>, pi: &Policy<T>, v: &VTable<T>) -> T {
    let (r_pi, p_pi) = policy_kernel(mdp, pi, |_| T::zero());
    let n = mdp.n_states();
    (0..n)
        .map(|s| {
            let row = &p_pi[s * n..(s + 1) * n];
            let rhs = r_pi[s] + mdp.gamma() * row.iter().zip(&v.values).map(|(&p, &x)| p * x).sum::<T>();
            (v.values[s] - rhs).abs()
        })
        .fold(T::zero(), T::max)
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

/// Serializes an MDP to the line-oriented text format:
///
/// ```text
/// n_states 2
/// n_actions 1
/// gamma 0.9
/// reward
/// <one line per state: n_actions rewards>
/// transition
/// <one line per (state, action), state-major: n_states probabilities>
/// ```
///
/// Numbers are written in shortest round-trip decimal form. Blank lines and
/// lines starting with `#` are ignored on input.
pub fn write_mdp_text<T: Scalar>(mdp: &TabularMdp<T>) -> String {
    let mut out = String::new();
    let join = |xs: &[T]| {
        xs.iter()
            .map(|x| format!("{:?}", x.to_f64_lossy()))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(out, "n_states {}", mdp.n_states());
    let _ = writeln!(out, "n_actions {}", mdp.n_actions());
    let _ = writeln!(out, "gamma {:?}", mdp.gamma().to_f64_lossy());
    out.push_str("reward\n");
    for row in mdp.reward.chunks(mdp.n_actions()) {
        let _ = writeln!(out, "{}", join(row));
    }
    out.push_str("transition\n");
    for row in mdp.transition.chunks(mdp.n_states()) {
        let _ = writeln!(out, "{}", join(row));
    }
    out
}

pub fn parse_mdp_text<T: Scalar>(text: &str) -> Result<TabularMdp<T>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut next_line = |what: &str| {
        lines.next().ok_or(Error::Parse {
            line: 0,
            msg: format!("unexpected end of input, expected {what}"),
        })
    };
    let header = |(line, l): (usize, &str), key: &str| -> Result<String> {
        let mut parts = l.split_whitespace();
        if parts.next() != Some(key) {
            return Err(Error::Parse {
                line,
                msg: format!("expected `{key}`"),
            });
        }
        parts.next().map(str::to_owned).ok_or(Error::Parse {
            line,
            msg: format!("missing value for `{key}`"),
        })
    };
    let parse_usize = |line: usize, s: &str| {
        s.parse::<usize>().map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })
    };
    let parse_num = |line: usize, s: &str| -> Result<T> {
        let x = s.parse::<f64>().map_err(|e| Error::Parse {
            line,
            msg: format!("{s:?}: {e}"),
        })?;
        T::from_f64(x).ok_or(Error::Parse {
            line,
            msg: format!("{s} not representable"),
        })
    };
    let l = next_line("n_states")?;
    let n_states = parse_usize(l.0, &header(l, "n_states")?)?;
    let l = next_line("n_actions")?;
    let n_actions = parse_usize(l.0, &header(l, "n_actions")?)?;
    let l = next_line("gamma")?;
    let gamma = parse_num(l.0, &header(l, "gamma")?)?;

    let mut read_block = |key: &str, rows: usize, width: usize| -> Result<Vec<T>> {
        let (line, l) = next_line(key)?;
        if l != key {
            return Err(Error::Parse {
                line,
                msg: format!("expected `{key}`"),
            });
        }
        let mut out = Vec::with_capacity(rows * width);
        for _ in 0..rows {
            let (line, l) = next_line("a table row")?;
            let row = l
                .split_whitespace()
                .map(|tok| parse_num(line, tok))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != width {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {width} values, found {}", row.len()),
                });
            }
            out.extend(row);
        }
        Ok(out)
    };
    let reward = read_block("reward", n_states, n_actions)?;
    let transition = read_block("transition", n_states * n_actions, n_states)?;
    TabularMdp::new(n_states, n_actions, transition, reward, gamma)
}

fn write_table_csv<T: Scalar>(n_actions: usize, values: &[T]) -> String {
    let mut out = String::from("state");
    for a in 0..n_actions {
        let _ = write!(out, ",a{a}");
    }
    out.push('\n');
    for (s, row) in values.chunks(n_actions.max(1)).enumerate() {
        let _ = write!(out, "{s}");
        for x in row {
            let _ = write!(out, ",{:?}", x.to_f64_lossy());
        }
        out.push('\n');
    }
    out
}

/// Reads the `state,a0,...` table layout; rows must appear in state order.
fn parse_table_csv<T: Scalar>(text: &str) -> Result<(usize, usize, Vec<T>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty table".into() })?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    let bad_header = cols[0] != "state" || cols[1..].iter().enumerate().any(|(a, c)| *c != format!("a{a}"));
    if bad_header || cols.len() < 2 {
        return Err(Error::Parse { line: 1, msg: "expected header `state,a0,a1,...`".into() });
    }
    let n_actions = cols.len() - 1;
    let mut values = Vec::new();
    let mut n_states = 0;
    for (i, line) in lines {
        let bad = |msg: String| Error::Parse { line: i + 1, msg };
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != n_actions + 1 {
            return Err(bad(format!("expected {} fields, found {}", n_actions + 1, f.len())));
        }
        if f[0].parse::<usize>().ok() != Some(n_states) {
            return Err(bad(format!("expected state {n_states}, found {:?}", f[0])));
        }
        for tok in &f[1..] {
            let x = tok.parse::<f64>().map_err(|e| bad(format!("{tok:?}: {e}")))?;
            values.push(T::from_f64(x).ok_or_else(|| bad(format!("{tok} not representable")))?);
        }
        n_states += 1;
    }
    if n_states == 0 {
        return Err(Error::Parse { line: 2, msg: "table has no rows".into() });
    }
    Ok((n_states, n_actions, values))
}

/// One CSV row per state: `state,a0,a1,...`.
pub fn write_policy_csv<T: Scalar>(pi: &Policy<T>) -> String {
    write_table_csv(pi.n_actions(), pi.as_slice())
}

pub fn parse_policy_csv<T: Scalar>(text: &str) -> Result<Policy<T>> {
    let (n_states, n_actions, probs) = parse_table_csv(text)?;
    Policy::new(n_states, n_actions, probs)
}

pub fn write_qtable_csv<T: Scalar>(q: &QTable<T>) -> String {
    write_table_csv(q.n_actions(), q.as_slice())
}

pub fn parse_qtable_csv<T: Scalar>(text: &str) -> Result<QTable<T>> {
    let (n_states, n_actions, values) = parse_table_csv(text)?;
    QTable::new(n_states, n_actions, values)
}
