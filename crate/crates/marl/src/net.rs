//! Linear layers, the feed-forward Q-network, and parameter plumbing.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::mat::{add_bias, bias_grad_acc, matmul_nn_acc, matmul_nt, matmul_tn_acc, tanh_inplace};

/// Uniform access to every parameter tensor of a network, used by the SGD
/// step, the finite-difference oracle, and checkpointing.
pub trait ParamTensors {
    fn tensors(&self) -> Vec<(String, [usize; 2], &[f64])>;
    fn tensors_mut(&mut self) -> Vec<(String, [usize; 2], &mut Vec<f64>)>;
}

/// Total parameter count.
pub fn param_count(p: &impl ParamTensors) -> usize {
    p.tensors().iter().map(|(_, _, d)| d.len()).sum()
}

/// Squared L2 norm over all tensors.
pub fn grad_sq_norm(g: &impl ParamTensors) -> f64 {
    g.tensors()
        .iter()
        .map(|(_, _, d)| d.iter().map(|v| v * v).sum::<f64>())
        .sum()
}

/// In-place scale of every tensor.
pub fn scale_params(g: &mut impl ParamTensors, factor: f64) {
    for (_, _, data) in g.tensors_mut() {
        for v in data.iter_mut() {
            *v *= factor;
        }
    }
}

/// params -= lr * grads.
pub fn sgd_step<P: ParamTensors>(params: &mut P, grads: &P, lr: f64) {
    let gs = grads.tensors();
    for ((_, _, p), (_, _, g)) in params.tensors_mut().into_iter().zip(gs) {
        debug_assert_eq!(p.len(), g.len());
        for (pv, gv) in p.iter_mut().zip(g.iter()) {
            *pv -= lr * gv;
        }
    }
}

/// Hard copy of one parameter set onto another of identical shape.
pub fn copy_params<P: ParamTensors>(dst: &mut P, src: &P) {
    let ss = src.tensors();
    for ((_, _, d), (_, _, s)) in dst.tensors_mut().into_iter().zip(ss) {
        d.copy_from_slice(s);
    }
}

/// Dense layer, weights stored row-major as (out_dim x in_dim).
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Linear {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            w: vec![0.0; in_dim * out_dim],
            b: vec![0.0; out_dim],
        }
    }

    /// Uniform init in [-1/sqrt(in), 1/sqrt(in)].
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let mut layer = Self::zeros(in_dim, out_dim);
        for v in layer.w.iter_mut() {
            *v = rng.gen_range(-bound..bound);
        }
        for v in layer.b.iter_mut() {
            *v = rng.gen_range(-bound..bound);
        }
        layer
    }

    /// y (m x out) = x (m x in) · W^T + b.
    pub fn forward(&self, x: &[f64], m: usize, y: &mut Vec<f64>) {
        y.resize(m * self.out_dim, 0.0);
        matmul_nt(x, &self.w, m, self.in_dim, self.out_dim, y);
        add_bias(y, &self.b, m, self.out_dim);
    }

    /// Accumulates dW, db into `grads` and optionally dx += dy · W.
    pub fn backward(
        &self,
        x: &[f64],
        dy: &[f64],
        m: usize,
        grads: &mut Linear,
        dx: Option<&mut [f64]>,
    ) {
        matmul_tn_acc(dy, x, m, self.out_dim, self.in_dim, &mut grads.w);
        bias_grad_acc(dy, m, self.out_dim, &mut grads.b);
        if let Some(dx) = dx {
            matmul_nn_acc(dy, &self.w, m, self.out_dim, self.in_dim, dx);
        }
    }

    fn tensor_entries(&self, prefix: &str) -> Vec<(String, [usize; 2], &[f64])> {
        vec![
            (
                format!("{prefix}.w"),
                [self.out_dim, self.in_dim],
                self.w.as_slice(),
            ),
            (format!("{prefix}.b"), [self.out_dim, 1], self.b.as_slice()),
        ]
    }

    fn tensor_entries_mut(&mut self, prefix: &str) -> Vec<(String, [usize; 2], &mut Vec<f64>)> {
        vec![
            (
                format!("{prefix}.w"),
                [self.out_dim, self.in_dim],
                &mut self.w,
            ),
            (format!("{prefix}.b"), [self.out_dim, 1], &mut self.b),
        ]
    }
}

/// Feed-forward agent Q-network: two tanh hidden layers and a linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpQNet {
    pub l1: Linear,
    pub l2: Linear,
    pub l3: Linear,
}

/// Activation buffers of one batched forward pass.
#[derive(Debug, Default, Clone)]
pub struct MlpCache {
    pub x: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub q: Vec<f64>,
    pub rows: usize,
}

impl MlpQNet {
    pub fn zeros(in_dim: usize, hidden: usize, out_dim: usize) -> Self {
        Self {
            l1: Linear::zeros(in_dim, hidden),
            l2: Linear::zeros(hidden, hidden),
            l3: Linear::zeros(hidden, out_dim),
        }
    }

    pub fn init(in_dim: usize, hidden: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            l1: Linear::init(in_dim, hidden, rng),
            l2: Linear::init(hidden, hidden, rng),
            l3: Linear::init(hidden, out_dim, rng),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.l1.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.l3.out_dim
    }

    /// Batched forward over `m` rows; activations land in `cache`.
    pub fn forward(&self, x: &[f64], m: usize, cache: &mut MlpCache) {
        debug_assert_eq!(x.len(), m * self.l1.in_dim);
        cache.rows = m;
        cache.x.clear();
        cache.x.extend_from_slice(x);
        self.l1.forward(x, m, &mut cache.h1);
        tanh_inplace(&mut cache.h1);
        self.l2.forward(&cache.h1, m, &mut cache.h2);
        tanh_inplace(&mut cache.h2);
        self.l3.forward(&cache.h2, m, &mut cache.q);
    }

    /// Q-values for a single observation.
    pub fn q_values(&self, obs: &[f64]) -> Vec<f64> {
        let mut cache = MlpCache::default();
        self.forward(obs, 1, &mut cache);
        cache.q
    }

    /// Backpropagates dL/dq, accumulating parameter gradients.
    pub fn backward(&self, cache: &MlpCache, dq: &[f64], grads: &mut MlpQNet) {
        let m = cache.rows;
        let hidden = self.l2.out_dim;
        let mut dh2 = vec![0.0; m * hidden];
        self.l3.backward(&cache.h2, dq, m, &mut grads.l3, Some(&mut dh2));
        for (d, &a) in dh2.iter_mut().zip(cache.h2.iter()) {
            *d *= 1.0 - a * a;
        }
        let mut dh1 = vec![0.0; m * hidden];
        self.l2.backward(&cache.h1, &dh2, m, &mut grads.l2, Some(&mut dh1));
        for (d, &a) in dh1.iter_mut().zip(cache.h1.iter()) {
            *d *= 1.0 - a * a;
        }
        self.l1.backward(&cache.x, &dh1, m, &mut grads.l1, None);
    }
}

impl ParamTensors for MlpQNet {
    fn tensors(&self) -> Vec<(String, [usize; 2], &[f64])> {
        let mut out = self.l1.tensor_entries("l1");
        out.extend(self.l2.tensor_entries("l2"));
        out.extend(self.l3.tensor_entries("l3"));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, [usize; 2], &mut Vec<f64>)> {
        let Self { l1, l2, l3 } = self;
        let mut out = l1.tensor_entries_mut("l1");
        out.extend(l2.tensor_entries_mut("l2"));
        out.extend(l3.tensor_entries_mut("l3"));
        out
    }
}
