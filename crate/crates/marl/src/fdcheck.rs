//! Central finite-difference validation of the analytic gradients.
//!
//! The relative error uses `|a - b| / max(|a|, |b|, 1e-4)`: gradients above
//! the floor are compared relatively, near-zero gradients must agree to
//! about 1e-8 absolute, which is the noise floor of central differences at
//! h = 1e-5 on these loss scales.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use evshunt_core::env::OBS_DIM;
use evshunt_core::station::PileKind;

use crate::gru::RecurrentQNet;
use crate::loss::{qmix_loss_and_gradients, vdn_loss_and_gradients, QmixParams, VdnParams};
use crate::mixer::QmixMixer;
use crate::net::{MlpQNet, ParamTensors};
use crate::replay::Transition;

pub const FD_STEP: f64 = 1e-5;

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

/// Worst relative error between `analytic` and central differences of
/// `loss_fn` over every parameter. Perturbs in place and restores.
pub fn max_relative_error<P: ParamTensors>(
    params: &mut P,
    analytic: &P,
    mut loss_fn: impl FnMut(&P) -> f64,
    h: f64,
) -> f64 {
    let n_tensors = params.tensors().len();
    let mut worst = 0.0f64;
    for ti in 0..n_tensors {
        let len = params.tensors()[ti].2.len();
        for i in 0..len {
            let original = params.tensors()[ti].2[i];
            params.tensors_mut()[ti].2[i] = original + h;
            let loss_plus = loss_fn(params);
            params.tensors_mut()[ti].2[i] = original - h;
            let loss_minus = loss_fn(params);
            params.tensors_mut()[ti].2[i] = original;
            let fd = (loss_plus - loss_minus) / (2.0 * h);
            let g = analytic.tensors()[ti].2[i];
            worst = worst.max(relative_error(fd, g));
        }
    }
    worst
}

/// Synthetic transition with every agent active; values scaled so the loss
/// stays O(1)-O(100).
pub fn random_transition(
    n_agents: usize,
    levels: usize,
    hidden_dim: usize,
    state_dim: usize,
    rng: &mut ChaCha8Rng,
) -> Transition {
    let mut vec_of = |len: usize, lo: f64, hi: f64| -> Vec<f64> {
        (0..len).map(|_| rng.gen_range(lo..hi)).collect()
    };
    let obs = vec_of(n_agents * OBS_DIM, -1.0, 1.0);
    let next_obs = vec_of(n_agents * OBS_DIM, -1.0, 1.0);
    let global = vec_of(state_dim, -1.0, 1.0);
    let next_global = vec_of(state_dim, -1.0, 1.0);
    let hidden = vec_of(n_agents * hidden_dim, -0.5, 0.5);
    let next_hidden = vec_of(n_agents * hidden_dim, -0.5, 0.5);
    Transition {
        obs,
        next_obs,
        global,
        next_global,
        actions: (0..n_agents).map(|_| rng.gen_range(0..levels) as u16).collect(),
        prev_actions: (0..n_agents).map(|_| rng.gen_range(0..levels) as u16).collect(),
        reward: rng.gen_range(-2.0..2.0),
        done: rng.gen_bool(0.2),
        mask: (0..n_agents).map(|_| rng.gen_bool(0.85)).collect(),
        next_mask: (0..n_agents).map(|_| rng.gen_bool(0.85)).collect(),
        hidden,
        next_hidden,
    }
}

fn alternating_kinds(n_agents: usize) -> Vec<PileKind> {
    (0..n_agents)
        .map(|i| if i % 2 == 0 { PileKind::Fc } else { PileKind::Nc })
        .collect()
}

/// One random draw of the additive path; returns the worst relative error.
pub fn vdn_gradient_check(rng: &mut ChaCha8Rng) -> f64 {
    let n_agents = 3;
    let levels = 4;
    let hidden = 6;
    let kinds = alternating_kinds(n_agents);
    let mut params = VdnParams {
        nc: MlpQNet::init(OBS_DIM, hidden, levels, rng),
        fc: MlpQNet::init(OBS_DIM, hidden, levels, rng),
    };
    let target = VdnParams {
        nc: MlpQNet::init(OBS_DIM, hidden, levels, rng),
        fc: MlpQNet::init(OBS_DIM, hidden, levels, rng),
    };
    let gamma = rng.gen_range(0.5..0.99);
    let batch: Vec<Transition> = (0..4)
        .map(|_| random_transition(n_agents, levels, 0, 1, rng))
        .collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let (_, grads) = vdn_loss_and_gradients(&refs, &params, &target, &kinds, gamma);
    max_relative_error(
        &mut params,
        &grads,
        |p| vdn_loss_and_gradients(&refs, p, &target, &kinds, gamma).0,
        FD_STEP,
    )
}

/// One random draw of the monotonic path (through the GRU and the mixer).
pub fn qmix_gradient_check(rng: &mut ChaCha8Rng) -> f64 {
    let n_agents = 3;
    let levels = 4;
    let hidden = 5;
    let embed = 3;
    let state_dim = 7;
    let kinds = alternating_kinds(n_agents);
    let in_dim = OBS_DIM + levels;
    let mut params = QmixParams {
        nc: RecurrentQNet::init(in_dim, hidden, levels, rng),
        fc: RecurrentQNet::init(in_dim, hidden, levels, rng),
        mixer: QmixMixer::init(n_agents, state_dim, embed, rng),
    };
    let target = QmixParams {
        nc: RecurrentQNet::init(in_dim, hidden, levels, rng),
        fc: RecurrentQNet::init(in_dim, hidden, levels, rng),
        mixer: QmixMixer::init(n_agents, state_dim, embed, rng),
    };
    let gamma = rng.gen_range(0.5..0.99);
    let batch: Vec<Transition> = (0..3)
        .map(|_| random_transition(n_agents, levels, hidden, state_dim, rng))
        .collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let (_, grads) = qmix_loss_and_gradients(&refs, &params, &target, &kinds, gamma);
    max_relative_error(
        &mut params,
        &grads,
        |p| qmix_loss_and_gradients(&refs, p, &target, &kinds, gamma).0,
        FD_STEP,
    )
}
