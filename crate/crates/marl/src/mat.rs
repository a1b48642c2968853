//! Flat row-major matrix kernels for the batched network passes.
//!
//! Everything is `f64` and allocation-light; callers hold the buffers and the
//! kernels only loop. Shapes are passed explicitly and checked with debug
//! assertions so release builds stay tight.

/// c (m x n) = a (m x k) · b (n x k)^T, i.e. rows of `b` are output features.
pub fn matmul_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        for (j, c_ij) in c_row.iter_mut().enumerate() {
            let b_row = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for t in 0..k {
                acc += a_row[t] * b_row[t];
            }
            *c_ij = acc;
        }
    }
}

/// c (m x n) += a (m x k) · b (k x n); used for gradient flow dX = dY · W.
pub fn matmul_nn_acc(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        for (t, &a_it) in a_row.iter().enumerate() {
            if a_it == 0.0 {
                continue;
            }
            let b_row = &b[t * n..(t + 1) * n];
            for j in 0..n {
                c_row[j] += a_it * b_row[j];
            }
        }
    }
}

/// c (k x n) += a (m x k)^T · b (m x n); used for weight gradients dW = dY^T · X.
pub fn matmul_tn_acc(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(c.len(), k * n);
    for r in 0..m {
        let a_row = &a[r * k..(r + 1) * k];
        let b_row = &b[r * n..(r + 1) * n];
        for (t, &a_rt) in a_row.iter().enumerate() {
            if a_rt == 0.0 {
                continue;
            }
            let c_row = &mut c[t * n..(t + 1) * n];
            for j in 0..n {
                c_row[j] += a_rt * b_row[j];
            }
        }
    }
}

/// Adds the bias row to every row of `c` (m x n).
pub fn add_bias(c: &mut [f64], bias: &[f64], m: usize, n: usize) {
    debug_assert_eq!(c.len(), m * n);
    debug_assert_eq!(bias.len(), n);
    for i in 0..m {
        let row = &mut c[i * n..(i + 1) * n];
        for j in 0..n {
            row[j] += bias[j];
        }
    }
}

/// bias_grad (n) += column sums of dY (m x n).
pub fn bias_grad_acc(dy: &[f64], m: usize, n: usize, bias_grad: &mut [f64]) {
    debug_assert_eq!(dy.len(), m * n);
    debug_assert_eq!(bias_grad.len(), n);
    for i in 0..m {
        let row = &dy[i * n..(i + 1) * n];
        for j in 0..n {
            bias_grad[j] += row[j];
        }
    }
}

pub fn tanh_inplace(x: &mut [f64]) {
    for v in x.iter_mut() {
        *v = v.tanh();
    }
}

pub fn sigmoid_inplace(x: &mut [f64]) {
    for v in x.iter_mut() {
        *v = 1.0 / (1.0 + (-*v).exp());
    }
}
