//! Joint-value mixing: additive (VDN) and state-conditioned monotonic (Q-mix).

use rand_chacha::ChaCha8Rng;

use crate::net::{Linear, ParamTensors};

/// Additive mixing: the joint action value is the sum of per-agent values.
pub fn vdn_mix(agent_qs: &[f64]) -> f64 {
    agent_qs.iter().sum()
}

/// State-conditioned monotonic mixer.
///
/// Hypernetworks map the global state to mixing weights and biases:
///
///   w1 = hyper_w1(s)^2   (n_agents x embed)     b1 = hyper_b1(s)
///   w2 = hyper_w2(s)^2   (embed)                b2 = hyper_b2b(tanh(hyper_b2a(s)))
///   hid_k = sum_i q_i * w1[i,k] + b1_k
///   q_tot = sum_k hid_k * w2_k + b2
///
/// Squaring keeps every mixing weight non-negative, so dq_tot/dq_i =
/// sum_k w1[i,k] * w2_k >= 0 for any parameters and any state, and the
/// decentralized per-agent argmax equals the joint argmax. Zero hypernet
/// weights with unit/identity biases reduce the mixer exactly to the sum.
#[derive(Debug, Clone, PartialEq)]
pub struct QmixMixer {
    pub n_agents: usize,
    pub embed: usize,
    pub state_dim: usize,
    pub hyper_w1: Linear,
    pub hyper_b1: Linear,
    pub hyper_w2: Linear,
    pub hyper_b2a: Linear,
    pub hyper_b2b: Linear,
}

/// Buffers of one batched mixing pass.
#[derive(Debug, Default, Clone)]
pub struct MixerCache {
    pub state: Vec<f64>,
    pub q: Vec<f64>,
    pub w1_raw: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2_raw: Vec<f64>,
    pub b2_hidden_pre: Vec<f64>,
    pub b2_hidden: Vec<f64>,
    pub b2: Vec<f64>,
    pub hid: Vec<f64>,
    pub q_tot: Vec<f64>,
    pub rows: usize,
}

impl QmixMixer {
    pub fn zeros(n_agents: usize, state_dim: usize, embed: usize) -> Self {
        Self {
            n_agents,
            embed,
            state_dim,
            hyper_w1: Linear::zeros(state_dim, n_agents * embed),
            hyper_b1: Linear::zeros(state_dim, embed),
            hyper_w2: Linear::zeros(state_dim, embed),
            hyper_b2a: Linear::zeros(state_dim, embed),
            hyper_b2b: Linear::zeros(embed, 1),
        }
    }

    pub fn init(n_agents: usize, state_dim: usize, embed: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            n_agents,
            embed,
            state_dim,
            hyper_w1: Linear::init(state_dim, n_agents * embed, rng),
            hyper_b1: Linear::init(state_dim, embed, rng),
            hyper_w2: Linear::init(state_dim, embed, rng),
            hyper_b2a: Linear::init(state_dim, embed, rng),
            hyper_b2b: Linear::init(embed, 1, rng),
        }
    }

    /// A parameterization whose mixing is exactly the sum of agent values:
    /// zero hypernet weights, identity-pattern biases.
    pub fn identity(n_agents: usize, state_dim: usize) -> Self {
        let embed = n_agents;
        let mut mixer = Self::zeros(n_agents, state_dim, embed);
        for i in 0..n_agents {
            // w1 bias = 1 on the diagonal, so w1 = bias^2 = I.
            mixer.hyper_w1.b[i * embed + i] = 1.0;
        }
        for k in 0..embed {
            mixer.hyper_w2.b[k] = 1.0;
        }
        mixer
    }

    /// Batched mixing of q (m x n_agents) under state (m x state_dim).
    pub fn forward(&self, q: &[f64], state: &[f64], m: usize, cache: &mut MixerCache) {
        let n = self.n_agents;
        let e = self.embed;
        debug_assert_eq!(q.len(), m * n);
        debug_assert_eq!(state.len(), m * self.state_dim);
        cache.rows = m;
        cache.state.clear();
        cache.state.extend_from_slice(state);
        cache.q.clear();
        cache.q.extend_from_slice(q);

        self.hyper_w1.forward(state, m, &mut cache.w1_raw);
        self.hyper_b1.forward(state, m, &mut cache.b1);
        self.hyper_w2.forward(state, m, &mut cache.w2_raw);
        self.hyper_b2a.forward(state, m, &mut cache.b2_hidden_pre);
        cache.b2_hidden.clear();
        cache
            .b2_hidden
            .extend(cache.b2_hidden_pre.iter().map(|v| v.tanh()));
        self.hyper_b2b.forward(&cache.b2_hidden, m, &mut cache.b2);

        cache.hid.resize(m * e, 0.0);
        cache.q_tot.resize(m, 0.0);
        for row in 0..m {
            let q_row = &q[row * n..(row + 1) * n];
            let w1_row = &cache.w1_raw[row * n * e..(row + 1) * n * e];
            let b1_row = &cache.b1[row * e..(row + 1) * e];
            let hid_row = &mut cache.hid[row * e..(row + 1) * e];
            for k in 0..e {
                let mut acc = b1_row[k];
                for (i, &qi) in q_row.iter().enumerate() {
                    let w = w1_row[i * e + k];
                    acc += qi * w * w;
                }
                hid_row[k] = acc;
            }
            let w2_row = &cache.w2_raw[row * e..(row + 1) * e];
            let mut tot = cache.b2[row];
            for k in 0..e {
                tot += hid_row[k] * w2_row[k] * w2_row[k];
            }
            cache.q_tot[row] = tot;
        }
    }

    /// Mixes a single sample.
    pub fn mix(&self, agent_qs: &[f64], state: &[f64]) -> f64 {
        let mut cache = MixerCache::default();
        self.forward(agent_qs, state, 1, &mut cache);
        cache.q_tot[0]
    }

    /// dq_tot/dq_i for a single sample; non-negative by construction.
    pub fn mixing_weights(&self, state: &[f64]) -> Vec<f64> {
        let mut cache = MixerCache::default();
        let q = vec![0.0; self.n_agents];
        self.forward(&q, state, 1, &mut cache);
        let n = self.n_agents;
        let e = self.embed;
        (0..n)
            .map(|i| {
                let mut acc = 0.0;
                for k in 0..e {
                    let w1 = cache.w1_raw[i * e + k];
                    let w2 = cache.w2_raw[k];
                    acc += w1 * w1 * w2 * w2;
                }
                acc
            })
            .collect()
    }

    /// Backpropagates dL/dq_tot (length m); accumulates parameter gradients
    /// and writes dL/dq into `dq` (m x n_agents).
    pub fn backward(
        &self,
        cache: &MixerCache,
        dq_tot: &[f64],
        grads: &mut QmixMixer,
        dq: &mut [f64],
    ) {
        let m = cache.rows;
        let n = self.n_agents;
        let e = self.embed;
        debug_assert_eq!(dq_tot.len(), m);
        debug_assert_eq!(dq.len(), m * n);

        let mut d_w1_raw = vec![0.0; m * n * e];
        let mut d_b1 = vec![0.0; m * e];
        let mut d_w2_raw = vec![0.0; m * e];
        let mut d_b2 = vec![0.0; m];

        for row in 0..m {
            let g = dq_tot[row];
            let q_row = &cache.q[row * n..(row + 1) * n];
            let w1_row = &cache.w1_raw[row * n * e..(row + 1) * n * e];
            let w2_row = &cache.w2_raw[row * e..(row + 1) * e];
            let hid_row = &cache.hid[row * e..(row + 1) * e];
            d_b2[row] = g;
            let d_w2_row = &mut d_w2_raw[row * e..(row + 1) * e];
            let d_b1_row = &mut d_b1[row * e..(row + 1) * e];
            let d_w1_row = &mut d_w1_raw[row * n * e..(row + 1) * n * e];
            let dq_row = &mut dq[row * n..(row + 1) * n];
            for k in 0..e {
                // q_tot = sum_k hid_k * w2_k^2 + b2
                let dhid = g * w2_row[k] * w2_row[k];
                d_w2_row[k] = g * hid_row[k] * 2.0 * w2_row[k];
                d_b1_row[k] = dhid;
                for (i, &qi) in q_row.iter().enumerate() {
                    let w1 = w1_row[i * e + k];
                    d_w1_row[i * e + k] = dhid * qi * 2.0 * w1;
                    dq_row[i] += dhid * w1 * w1;
                }
            }
        }

        self.hyper_w1
            .backward(&cache.state, &d_w1_raw, m, &mut grads.hyper_w1, None);
        self.hyper_b1
            .backward(&cache.state, &d_b1, m, &mut grads.hyper_b1, None);
        self.hyper_w2
            .backward(&cache.state, &d_w2_raw, m, &mut grads.hyper_w2, None);

        // b2 = hyper_b2b(tanh(hyper_b2a(s)))
        let mut d_b2_hidden = vec![0.0; m * e];
        self.hyper_b2b.backward(
            &cache.b2_hidden,
            &d_b2,
            m,
            &mut grads.hyper_b2b,
            Some(&mut d_b2_hidden),
        );
        for (d, &a) in d_b2_hidden.iter_mut().zip(cache.b2_hidden.iter()) {
            *d *= 1.0 - a * a;
        }
        self.hyper_b2a
            .backward(&cache.state, &d_b2_hidden, m, &mut grads.hyper_b2a, None);
    }
}

impl ParamTensors for QmixMixer {
    fn tensors(&self) -> Vec<(String, [usize; 2], &[f64])> {
        let entries = [
            ("mixer.hyper_w1", &self.hyper_w1),
            ("mixer.hyper_b1", &self.hyper_b1),
            ("mixer.hyper_w2", &self.hyper_w2),
            ("mixer.hyper_b2a", &self.hyper_b2a),
            ("mixer.hyper_b2b", &self.hyper_b2b),
        ];
        let mut out = Vec::new();
        for (name, layer) in entries {
            out.push((
                format!("{name}.w"),
                [layer.out_dim, layer.in_dim],
                layer.w.as_slice(),
            ));
            out.push((format!("{name}.b"), [layer.out_dim, 1], layer.b.as_slice()));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, [usize; 2], &mut Vec<f64>)> {
        let Self {
            hyper_w1,
            hyper_b1,
            hyper_w2,
            hyper_b2a,
            hyper_b2b,
            ..
        } = self;
        let entries = [
            ("mixer.hyper_w1", hyper_w1),
            ("mixer.hyper_b1", hyper_b1),
            ("mixer.hyper_w2", hyper_w2),
            ("mixer.hyper_b2a", hyper_b2a),
            ("mixer.hyper_b2b", hyper_b2b),
        ];
        let mut out = Vec::new();
        for (name, layer) in entries {
            out.push((
                format!("{name}.w"),
                [layer.out_dim, layer.in_dim],
                &mut layer.w,
            ));
            out.push((format!("{name}.b"), [layer.out_dim, 1], &mut layer.b));
        }
        out
    }
}
