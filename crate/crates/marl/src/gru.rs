//! Gated recurrent unit cell and the recurrent agent Q-network (MLP-GRU-MLP).

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::mat::{add_bias, bias_grad_acc, matmul_nn_acc, matmul_nt, matmul_tn_acc, sigmoid_inplace, tanh_inplace};
use crate::net::{Linear, ParamTensors};

/// One GRU cell:
///   z = sigma(Wz x + Uz h + bz)
///   r = sigma(Wr x + Ur h + br)
///   n = tanh(Wn x + Un (r .* h) + bn)
///   h' = (1 - z) .* n + z .* h
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub x_dim: usize,
    pub h_dim: usize,
    pub wz: Vec<f64>,
    pub uz: Vec<f64>,
    pub bz: Vec<f64>,
    pub wr: Vec<f64>,
    pub ur: Vec<f64>,
    pub br: Vec<f64>,
    pub wn: Vec<f64>,
    pub un: Vec<f64>,
    pub bn: Vec<f64>,
}

/// Buffers of one batched cell application.
#[derive(Debug, Default, Clone)]
pub struct GruCache {
    pub x: Vec<f64>,
    pub h_in: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub rh: Vec<f64>,
    pub n: Vec<f64>,
    pub h_out: Vec<f64>,
    pub rows: usize,
}

impl GruCell {
    pub fn zeros(x_dim: usize, h_dim: usize) -> Self {
        Self {
            x_dim,
            h_dim,
            wz: vec![0.0; h_dim * x_dim],
            uz: vec![0.0; h_dim * h_dim],
            bz: vec![0.0; h_dim],
            wr: vec![0.0; h_dim * x_dim],
            ur: vec![0.0; h_dim * h_dim],
            br: vec![0.0; h_dim],
            wn: vec![0.0; h_dim * x_dim],
            un: vec![0.0; h_dim * h_dim],
            bn: vec![0.0; h_dim],
        }
    }

    pub fn init(x_dim: usize, h_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut cell = Self::zeros(x_dim, h_dim);
        let bound = 1.0 / (h_dim as f64).sqrt();
        for tensor in [
            &mut cell.wz,
            &mut cell.uz,
            &mut cell.bz,
            &mut cell.wr,
            &mut cell.ur,
            &mut cell.br,
            &mut cell.wn,
            &mut cell.un,
            &mut cell.bn,
        ] {
            for v in tensor.iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
        }
        cell
    }

    /// h_out (m x h) from x (m x x_dim) and h_in (m x h).
    pub fn forward(&self, x: &[f64], h_in: &[f64], m: usize, cache: &mut GruCache) {
        let h = self.h_dim;
        debug_assert_eq!(x.len(), m * self.x_dim);
        debug_assert_eq!(h_in.len(), m * h);
        cache.rows = m;
        cache.x.clear();
        cache.x.extend_from_slice(x);
        cache.h_in.clear();
        cache.h_in.extend_from_slice(h_in);

        let gate = |w: &[f64], u: &[f64], b: &[f64], hx: &[f64], out: &mut Vec<f64>| {
            out.resize(m * h, 0.0);
            matmul_nt(x, w, m, self.x_dim, h, out);
            let mut uh = vec![0.0; m * h];
            matmul_nt(hx, u, m, h, h, &mut uh);
            for (o, v) in out.iter_mut().zip(uh.iter()) {
                *o += v;
            }
            add_bias(out, b, m, h);
        };

        gate(&self.wz, &self.uz, &self.bz, h_in, &mut cache.z);
        sigmoid_inplace(&mut cache.z);
        gate(&self.wr, &self.ur, &self.br, h_in, &mut cache.r);
        sigmoid_inplace(&mut cache.r);

        cache.rh.resize(m * h, 0.0);
        for i in 0..m * h {
            cache.rh[i] = cache.r[i] * h_in[i];
        }
        gate(&self.wn, &self.un, &self.bn, &cache.rh, &mut cache.n);
        tanh_inplace(&mut cache.n);

        cache.h_out.resize(m * h, 0.0);
        for i in 0..m * h {
            cache.h_out[i] = (1.0 - cache.z[i]) * cache.n[i] + cache.z[i] * h_in[i];
        }
    }

    /// Backpropagates dL/dh_out; accumulates parameter gradients and
    /// dL/dx. The stored incoming hidden state is treated as an input, so
    /// its gradient is dropped.
    pub fn backward(&self, cache: &GruCache, dh_out: &[f64], grads: &mut GruCell, dx: &mut [f64]) {
        let m = cache.rows;
        let h = self.h_dim;
        debug_assert_eq!(dh_out.len(), m * h);
        debug_assert_eq!(dx.len(), m * self.x_dim);

        let mut dz_pre = vec![0.0; m * h];
        let mut dn_pre = vec![0.0; m * h];
        for i in 0..m * h {
            let z = cache.z[i];
            let n = cache.n[i];
            let h_in = cache.h_in[i];
            dz_pre[i] = dh_out[i] * (h_in - n) * z * (1.0 - z);
            dn_pre[i] = dh_out[i] * (1.0 - z) * (1.0 - n * n);
        }

        // n-gate: dRH = dn_pre · Un, then split into the r-gate path.
        let mut drh = vec![0.0; m * h];
        matmul_nn_acc(&dn_pre, &self.un, m, h, h, &mut drh);
        let mut dr_pre = vec![0.0; m * h];
        for i in 0..m * h {
            let r = cache.r[i];
            dr_pre[i] = drh[i] * cache.h_in[i] * r * (1.0 - r);
        }

        // Parameter gradients.
        matmul_tn_acc(&dz_pre, &cache.x, m, h, self.x_dim, &mut grads.wz);
        matmul_tn_acc(&dz_pre, &cache.h_in, m, h, h, &mut grads.uz);
        bias_grad_acc(&dz_pre, m, h, &mut grads.bz);
        matmul_tn_acc(&dr_pre, &cache.x, m, h, self.x_dim, &mut grads.wr);
        matmul_tn_acc(&dr_pre, &cache.h_in, m, h, h, &mut grads.ur);
        bias_grad_acc(&dr_pre, m, h, &mut grads.br);
        matmul_tn_acc(&dn_pre, &cache.x, m, h, self.x_dim, &mut grads.wn);
        matmul_tn_acc(&dn_pre, &cache.rh, m, h, h, &mut grads.un);
        bias_grad_acc(&dn_pre, m, h, &mut grads.bn);

        // Input gradient.
        matmul_nn_acc(&dz_pre, &self.wz, m, h, self.x_dim, dx);
        matmul_nn_acc(&dr_pre, &self.wr, m, h, self.x_dim, dx);
        matmul_nn_acc(&dn_pre, &self.wn, m, h, self.x_dim, dx);
    }

    fn tensor_entries(&self, prefix: &str) -> Vec<(String, [usize; 2], &[f64])> {
        vec![
            (format!("{prefix}.wz"), [self.h_dim, self.x_dim], self.wz.as_slice()),
            (format!("{prefix}.uz"), [self.h_dim, self.h_dim], self.uz.as_slice()),
            (format!("{prefix}.bz"), [self.h_dim, 1], self.bz.as_slice()),
            (format!("{prefix}.wr"), [self.h_dim, self.x_dim], self.wr.as_slice()),
            (format!("{prefix}.ur"), [self.h_dim, self.h_dim], self.ur.as_slice()),
            (format!("{prefix}.br"), [self.h_dim, 1], self.br.as_slice()),
            (format!("{prefix}.wn"), [self.h_dim, self.x_dim], self.wn.as_slice()),
            (format!("{prefix}.un"), [self.h_dim, self.h_dim], self.un.as_slice()),
            (format!("{prefix}.bn"), [self.h_dim, 1], self.bn.as_slice()),
        ]
    }

    fn tensor_entries_mut(&mut self, prefix: &str) -> Vec<(String, [usize; 2], &mut Vec<f64>)> {
        let Self {
            x_dim,
            h_dim,
            wz,
            uz,
            bz,
            wr,
            ur,
            br,
            wn,
            un,
            bn,
        } = self;
        let (x_dim, h_dim) = (*x_dim, *h_dim);
        vec![
            (format!("{prefix}.wz"), [h_dim, x_dim], wz),
            (format!("{prefix}.uz"), [h_dim, h_dim], uz),
            (format!("{prefix}.bz"), [h_dim, 1], bz),
            (format!("{prefix}.wr"), [h_dim, x_dim], wr),
            (format!("{prefix}.ur"), [h_dim, h_dim], ur),
            (format!("{prefix}.br"), [h_dim, 1], br),
            (format!("{prefix}.wn"), [h_dim, x_dim], wn),
            (format!("{prefix}.un"), [h_dim, h_dim], un),
            (format!("{prefix}.bn"), [h_dim, 1], bn),
        ]
    }
}

/// Recurrent agent Q-network: tanh encoder, GRU cell, linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentQNet {
    pub enc: Linear,
    pub gru: GruCell,
    pub head: Linear,
}

/// Buffers of one batched recurrent forward pass.
#[derive(Debug, Default, Clone)]
pub struct RecurrentCache {
    pub x: Vec<f64>,
    pub e: Vec<f64>,
    pub gru: GruCache,
    pub q: Vec<f64>,
    pub rows: usize,
}

impl RecurrentQNet {
    pub fn zeros(in_dim: usize, hidden: usize, out_dim: usize) -> Self {
        Self {
            enc: Linear::zeros(in_dim, hidden),
            gru: GruCell::zeros(hidden, hidden),
            head: Linear::zeros(hidden, out_dim),
        }
    }

    pub fn init(in_dim: usize, hidden: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            enc: Linear::init(in_dim, hidden, rng),
            gru: GruCell::init(hidden, hidden, rng),
            head: Linear::init(hidden, out_dim, rng),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.enc.in_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.gru.h_dim
    }

    pub fn out_dim(&self) -> usize {
        self.head.out_dim
    }

    /// Batched forward; Q-values land in `cache.q`, the new hidden state in
    /// `cache.gru.h_out`.
    pub fn forward(&self, x: &[f64], h_in: &[f64], m: usize, cache: &mut RecurrentCache) {
        cache.rows = m;
        cache.x.clear();
        cache.x.extend_from_slice(x);
        self.enc.forward(x, m, &mut cache.e);
        tanh_inplace(&mut cache.e);
        self.gru.forward(&cache.e, h_in, m, &mut cache.gru);
        self.head.forward(&cache.gru.h_out, m, &mut cache.q);
    }

    /// Q-values plus new hidden state for a single observation.
    pub fn q_values(&self, obs: &[f64], hidden: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut cache = RecurrentCache::default();
        self.forward(obs, hidden, 1, &mut cache);
        (cache.q, cache.gru.h_out)
    }

    /// Backpropagates dL/dq through head, GRU cell, and encoder.
    pub fn backward(&self, cache: &RecurrentCache, dq: &[f64], grads: &mut RecurrentQNet) {
        let m = cache.rows;
        let hidden = self.gru.h_dim;
        let mut dh = vec![0.0; m * hidden];
        self.head
            .backward(&cache.gru.h_out, dq, m, &mut grads.head, Some(&mut dh));
        let mut de = vec![0.0; m * hidden];
        self.gru.backward(&cache.gru, &dh, &mut grads.gru, &mut de);
        for (d, &a) in de.iter_mut().zip(cache.e.iter()) {
            *d *= 1.0 - a * a;
        }
        self.enc.backward(&cache.x, &de, m, &mut grads.enc, None);
    }
}

impl ParamTensors for RecurrentQNet {
    fn tensors(&self) -> Vec<(String, [usize; 2], &[f64])> {
        let mut out = vec![
            (
                "enc.w".to_string(),
                [self.enc.out_dim, self.enc.in_dim],
                self.enc.w.as_slice(),
            ),
            ("enc.b".to_string(), [self.enc.out_dim, 1], self.enc.b.as_slice()),
        ];
        out.extend(self.gru.tensor_entries("gru"));
        out.push((
            "head.w".to_string(),
            [self.head.out_dim, self.head.in_dim],
            self.head.w.as_slice(),
        ));
        out.push((
            "head.b".to_string(),
            [self.head.out_dim, 1],
            self.head.b.as_slice(),
        ));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, [usize; 2], &mut Vec<f64>)> {
        let Self { enc, gru, head } = self;
        let mut out = vec![
            ("enc.w".to_string(), [enc.out_dim, enc.in_dim], &mut enc.w),
            ("enc.b".to_string(), [enc.out_dim, 1], &mut enc.b),
        ];
        out.extend(gru.tensor_entries_mut("gru"));
        out.push((
            "head.w".to_string(),
            [head.out_dim, head.in_dim],
            &mut head.w,
        ));
        out.push(("head.b".to_string(), [head.out_dim, 1], &mut head.b));
        out
    }
}
