//! Small differentiable function approximators (a bias-free one-hot linear
//! table and a dense ReLU network), gradient accumulation, SGD/Adam, Polyak
//! averaging and parameter checkpoints.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Architecture {
    /// `out = x W` with `W` of shape `n_inputs x n_outputs` and no bias. With a
    /// one-hot input this is a table lookup.
    OneHotLinear { n_inputs: usize, n_outputs: usize },
    /// Dense layers `sizes[0] -> sizes[1] -> ... -> sizes[k]`, ReLU between
    /// layers, linear output.
    Mlp { sizes: Vec<usize> },
}

impl Architecture {
    pub fn n_inputs(&self) -> usize {
        match self {
            Architecture::OneHotLinear { n_inputs, .. } => *n_inputs,
            Architecture::Mlp { sizes } => sizes[0],
        }
    }

    pub fn n_outputs(&self) -> usize {
        match self {
            Architecture::OneHotLinear { n_outputs, .. } => *n_outputs,
            Architecture::Mlp { sizes } => *sizes.last().expect("mlp has layers"),
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            Architecture::OneHotLinear { n_inputs, n_outputs } => n_inputs * n_outputs,
            Architecture::Mlp { sizes } => sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum(),
        }
    }

    fn header(&self) -> String {
        match self {
            Architecture::OneHotLinear { n_inputs, n_outputs } => format!("onehot-linear {n_inputs} {n_outputs}"),
            Architecture::Mlp { sizes } => {
                let s: Vec<String> = sizes.iter().map(|x| x.to_string()).collect();
                format!("mlp {}", s.join(" "))
            }
        }
    }

    fn parse(text: &str) -> Option<Self> {
        let mut parts = text.split_whitespace();
        let kind = parts.next()?;
        let nums: Vec<usize> = parts.map(|p| p.parse().ok()).collect::<Option<_>>()?;
        match kind {
            "onehot-linear" if nums.len() == 2 => Some(Architecture::OneHotLinear {
                n_inputs: nums[0],
                n_outputs: nums[1],
            }),
            "mlp" if nums.len() >= 2 => Some(Architecture::Mlp { sizes: nums }),
            _ => None,
        }
    }
}

/// Network input: a one-hot index or a dense feature vector.
#[derive(Clone, Copy, Debug)]
pub enum Features<'a, T> {
    OneHot(usize),
    Dense(&'a [T]),
}

#[derive(Clone, Debug)]
enum Cache<T> {
    OneHot(usize),
    Dense {
        /// Input to every layer; `inputs[0]` is the network input.
        inputs: Vec<Vec<T>>,
        /// Pre-activations of every layer.
        pre: Vec<Vec<T>>,
    },
}

#[derive(Clone, Debug)]
pub struct Approximator<T> {
    arch: Architecture,
    params: Vec<T>,
    grads: Vec<T>,
    cache: Option<Cache<T>>,
}

/// Tabular approximator with every parameter set to `init_value`.
pub fn onehot_linear<T: Scalar>(n_inputs: usize, n_outputs: usize, init_value: T) -> Approximator<T> {
    let arch = Architecture::OneHotLinear { n_inputs, n_outputs };
    let n = arch.n_params();
    Approximator {
        arch,
        params: vec![init_value; n],
        grads: vec![T::zero(); n],
        cache: None,
    }
}

/// Dense ReLU network. Weights are drawn uniformly from
/// `±sqrt(6 / (fan_in + fan_out))`, biases start at zero.
pub fn mlp<T: Scalar>(sizes: &[usize], seed: u64) -> Result<Approximator<T>> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::InvalidArgument(format!("bad layer sizes {sizes:?}")));
    }
    let arch = Architecture::Mlp { sizes: sizes.to_vec() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::with_capacity(arch.n_params());
    for w in sizes.windows(2) {
        let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
        params.extend((0..w[0] * w[1]).map(|_| T::lit(rng.gen_range(-limit..limit))));
        params.extend(std::iter::repeat(T::zero()).take(w[1]));
    }
    let n = params.len();
    Ok(Approximator {
        arch,
        params,
        grads: vec![T::zero(); n],
        cache: None,
    })
}

impl<T: Scalar> Approximator<T> {
    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn grads(&self) -> &[T] {
        &self.grads
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = T::zero());
    }

    pub fn n_outputs(&self) -> usize {
        self.arch.n_outputs()
    }

    /// Forward pass without recording activations.
    pub fn eval(&self, x: Features<'_, T>) -> Vec<T> {
        match (&self.arch, x) {
            (Architecture::OneHotLinear { n_outputs, .. }, Features::OneHot(i)) => {
                self.params[i * n_outputs..(i + 1) * n_outputs].to_vec()
            }
            (Architecture::OneHotLinear { n_inputs, n_outputs }, Features::Dense(v)) => {
                assert_eq!(v.len(), *n_inputs, "input width");
                let mut out = vec![T::zero(); *n_outputs];
                for (i, &xi) in v.iter().enumerate() {
                    if xi == T::zero() {
                        continue;
                    }
                    for (o, &w) in out.iter_mut().zip(&self.params[i * n_outputs..(i + 1) * n_outputs]) {
                        *o += xi * w;
                    }
                }
                out
            }
            (Architecture::Mlp { .. }, x) => self.mlp_forward(x).0.pop().expect("output layer"),
        }
    }

    /// Like [`Approximator::eval`] but writes into `out`; allocation free for tables.
    pub fn eval_into(&self, x: Features<'_, T>, out: &mut [T]) {
        match (&self.arch, x) {
            (Architecture::OneHotLinear { n_outputs, .. }, Features::OneHot(i)) => {
                out.copy_from_slice(&self.params[i * n_outputs..(i + 1) * n_outputs]);
            }
            _ => out.copy_from_slice(&self.eval(x)),
        }
    }

    /// Like [`Approximator::forward`] but writes into `out`.
    pub fn forward_into(&mut self, x: Features<'_, T>, out: &mut [T]) {
        match (&self.arch, x) {
            (Architecture::OneHotLinear { .. }, Features::OneHot(i)) => {
                self.cache = Some(Cache::OneHot(i));
                self.eval_into(x, out);
            }
            _ => out.copy_from_slice(&self.forward(x)),
        }
    }

    /// Single output of a one-hot table, `params[i * n_outputs + j]`.
    pub fn table_value(&self, i: usize, j: usize) -> T {
        match &self.arch {
            Architecture::OneHotLinear { n_outputs, .. } => self.params[i * n_outputs + j],
            Architecture::Mlp { .. } => self.eval(Features::OneHot(i))[j],
        }
    }

    /// Forward pass that records what [`Approximator::backward`] needs.
    pub fn forward(&mut self, x: Features<'_, T>) -> Vec<T> {
        match (&self.arch, x) {
            (Architecture::OneHotLinear { .. }, Features::OneHot(i)) => {
                self.cache = Some(Cache::OneHot(i));
                self.eval(x)
            }
            (Architecture::OneHotLinear { .. }, Features::Dense(v)) => {
                self.cache = Some(Cache::Dense {
                    inputs: vec![v.to_vec()],
                    pre: Vec::new(),
                });
                self.eval(x)
            }
            (Architecture::Mlp { .. }, x) => {
                let (mut acts, pre) = self.mlp_forward(x);
                let out = acts.pop().expect("output layer");
                self.cache = Some(Cache::Dense { inputs: acts, pre });
                out
            }
        }
    }

    fn one_hot(&self, i: usize) -> Vec<T> {
        let mut v = vec![T::zero(); self.arch.n_inputs()];
        v[i] = T::one();
        v
    }

    /// Returns (activations per layer including input and output, pre-activations).
    fn mlp_forward(&self, x: Features<'_, T>) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
        let Architecture::Mlp { sizes } = &self.arch else {
            unreachable!("mlp_forward on a table")
        };
        let input = match x {
            Features::OneHot(i) => self.one_hot(i),
            Features::Dense(v) => {
                assert_eq!(v.len(), sizes[0], "input width");
                v.to_vec()
            }
        };
        let n_layers = sizes.len() - 1;
        let mut acts = vec![input];
        let mut pres = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for (l, w) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let bias = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let prev = acts.last().expect("input present");
            let mut z = bias.to_vec();
            for (i, &xi) in prev.iter().enumerate() {
                if xi == T::zero() {
                    continue;
                }
                for (zj, &wij) in z.iter_mut().zip(&weights[i * fan_out..(i + 1) * fan_out]) {
                    *zj += xi * wij;
                }
            }
            let a = if l + 1 < n_layers {
                z.iter().map(|&v| v.max(T::zero())).collect()
            } else {
                z.clone()
            };
            pres.push(z);
            acts.push(a);
        }
        (acts, pres)
    }

    /// Accumulates `d(upstream · output) / d params` for the last recorded
    /// forward pass into the gradient buffer.
    pub fn backward(&mut self, upstream: &[T]) -> Result<()> {
        let cache = self.cache.as_ref().ok_or(Error::NoForward)?;
        if upstream.len() != self.arch.n_outputs() {
            return Err(Error::Shape {
                expected: format!("{} upstream entries", self.arch.n_outputs()),
                got: upstream.len().to_string(),
            });
        }
        match (&self.arch, cache) {
            (Architecture::OneHotLinear { n_outputs, .. }, Cache::OneHot(i)) => {
                for (g, &u) in self.grads[i * n_outputs..(i + 1) * n_outputs].iter_mut().zip(upstream) {
                    *g += u;
                }
            }
            (Architecture::OneHotLinear { n_outputs, .. }, Cache::Dense { inputs, .. }) => {
                for (i, &xi) in inputs[0].iter().enumerate() {
                    for (g, &u) in self.grads[i * n_outputs..(i + 1) * n_outputs].iter_mut().zip(upstream) {
                        *g += xi * u;
                    }
                }
            }
            (Architecture::Mlp { sizes }, Cache::Dense { inputs, pre }) => {
                let mut offsets = Vec::with_capacity(sizes.len() - 1);
                let mut off = 0;
                for w in sizes.windows(2) {
                    offsets.push(off);
                    off += w[0] * w[1] + w[1];
                }
                let mut delta = upstream.to_vec();
                for l in (0..sizes.len() - 1).rev() {
                    let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
                    if l + 1 < sizes.len() - 1 {
                        for (d, &z) in delta.iter_mut().zip(&pre[l]) {
                            if z <= T::zero() {
                                *d = T::zero();
                            }
                        }
                    }
                    let base = offsets[l];
                    let x = &inputs[l];
                    for i in 0..fan_in {
                        if x[i] == T::zero() {
                            continue;
                        }
                        for j in 0..fan_out {
                            self.grads[base + i * fan_out + j] += x[i] * delta[j];
                        }
                    }
                    for j in 0..fan_out {
                        self.grads[base + fan_in * fan_out + j] += delta[j];
                    }
                    if l > 0 {
                        let weights = &self.params[base..base + fan_in * fan_out];
                        delta = (0..fan_in)
                            .map(|i| {
                                weights[i * fan_out..(i + 1) * fan_out]
                                    .iter()
                                    .zip(&delta)
                                    .map(|(&w, &d)| w * d)
                                    .sum()
                            })
                            .collect();
                    }
                }
            }
            (Architecture::Mlp { .. }, Cache::OneHot(_)) => unreachable!("mlp never caches a bare index"),
        }
        Ok(())
    }

    /// Text checkpoint: an `architecture` line, a `params` count line, then
    /// one shortest-round-trip decimal per line.
    pub fn to_checkpoint(&self) -> String {
        let mut out = format!("architecture {}\nparams {}\n", self.arch.header(), self.params.len());
        for p in &self.params {
            let _ = writeln!(out, "{:?}", p.to_f64_lossy());
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let bad = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_owned(),
        };
        let (ln, first) = lines.next().ok_or_else(|| bad(1, "empty checkpoint"))?;
        let arch = first
            .strip_prefix("architecture ")
            .and_then(Architecture::parse)
            .ok_or_else(|| bad(ln, "expected `architecture <kind> <sizes..>`"))?;
        let (ln, second) = lines.next().ok_or_else(|| bad(2, "missing params line"))?;
        let count: usize = second
            .strip_prefix("params ")
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| bad(ln, "expected `params <count>`"))?;
        if count != arch.n_params() {
            return Err(bad(ln, "parameter count does not match the architecture"));
        }
        let mut params = Vec::with_capacity(count);
        for (ln, l) in lines.filter(|(_, l)| !l.is_empty()) {
            let x: f64 = l.parse().map_err(|_| bad(ln, "bad number"))?;
            params.push(T::from_f64(x).ok_or_else(|| bad(ln, "number not representable"))?);
        }
        if params.len() != count {
            return Err(bad(0, "truncated parameter list"));
        }
        Ok(Approximator {
            arch,
            grads: vec![T::zero(); count],
            params,
            cache: None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerKind<T> {
    Sgd,
    Adam { beta1: T, beta2: T, eps: T },
}

impl<T: Scalar> OptimizerKind<T> {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Optimizer<T> {
    kind: OptimizerKind<T>,
    lr: T,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
    beta1_pow: T,
    beta2_pow: T,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind<T>, lr: T, n_params: usize) -> Result<Self> {
        if !(lr > T::zero()) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        let (m, v) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam { .. } => (vec![T::zero(); n_params], vec![T::zero(); n_params]),
        };
        Ok(Self {
            kind,
            lr,
            m,
            v,
            t: 0,
            beta1_pow: T::one(),
            beta2_pow: T::one(),
        })
    }

    pub fn sgd(lr: T, n_params: usize) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, lr, n_params)
    }

    pub fn adam(lr: T, n_params: usize) -> Result<Self> {
        Self::new(OptimizerKind::adam(), lr, n_params)
    }

    pub fn lr(&self) -> T {
        self.lr
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// One descent step with the accumulated gradients. Gradients are left in
    /// place; call [`Approximator::zero_grad`] before the next accumulation.
    pub fn step(&mut self, approx: &mut Approximator<T>) -> Result<()> {
        let n = approx.params.len();
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, &g) in approx.params.iter_mut().zip(&approx.grads) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if self.m.len() != n {
                    return Err(Error::Shape {
                        expected: format!("{} moment entries", self.m.len()),
                        got: n.to_string(),
                    });
                }
                self.t += 1;
                self.beta1_pow *= beta1;
                self.beta2_pow *= beta2;
                let c1 = T::one() - self.beta1_pow;
                let c2 = T::one() - self.beta2_pow;
                let (one_b1, one_b2) = (T::one() - beta1, T::one() - beta2);
                for i in 0..n {
                    let g = approx.grads[i];
                    let m = beta1 * self.m[i] + one_b1 * g;
                    let v = beta2 * self.v[i] + one_b2 * g * g;
                    self.m[i] = m;
                    self.v[i] = v;
                    approx.params[i] -= self.lr * (m / c1) / ((v / c2).sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}

/// `target <- rate * target + (1 - rate) * online`.
pub fn polyak_update<T: Scalar>(target: &mut Approximator<T>, online: &Approximator<T>, rate: T) -> Result<()> {
    if target.arch != online.arch {
        return Err(Error::Shape {
            expected: target.arch.header(),
            got: online.arch.header(),
        });
    }
    let keep = T::one() - rate;
    for (t, &o) in target.params.iter_mut().zip(&online.params) {
        *t = rate * *t + keep * o;
    }
    Ok(())
}

/// Numerically stable `log softmax`.
pub fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().fold(T::neg_infinity(), |acc, &x| acc.max(x));
    let lse = m + logits.iter().map(|&x| (x - m).exp()).sum::<T>().ln();
    logits.iter().map(|&x| x - lse).collect()
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    log_softmax(logits).into_iter().map(T::exp).collect()
}
