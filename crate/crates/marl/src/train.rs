//! The price-scheduling training procedure: episode rollouts with
//! epsilon-greedy control, per-step mini-batch updates, and a periodically
//! synchronized target network.

use std::fmt;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use evshunt_core::env::{Env, JointState, WorldConfig, OBS_DIM};
use evshunt_core::error::CoreError;
use evshunt_core::ev::{sample_population, CommuteDistributions};
use evshunt_core::rng::{seeded_rng, streams};
use evshunt_core::station::PileKind;

use crate::action::ActionGrid;
use crate::checkpoint::Checkpoint;
use crate::greedy::epsilon_greedy;
use crate::gru::RecurrentQNet;
use crate::loss::{qmix_loss_and_gradients, vdn_loss_and_gradients, QmixParams, VdnParams};
use crate::mixer::QmixMixer;
use crate::net::{copy_params, grad_sq_norm, scale_params, sgd_step, MlpQNet, ParamTensors};
use crate::replay::{ReplayBuffer, Transition};

/// Which value-decomposition path to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Vdn,
    Qmix,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Vdn => write!(f, "vdn"),
            Algorithm::Qmix => write!(f, "qmix"),
        }
    }
}

/// Training hyperparameters; defaults follow the experiment setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub episodes: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of episodes over which epsilon anneals linearly.
    pub epsilon_anneal_fraction: f64,
    /// Update steps between target-network refreshes.
    pub target_sync_steps: usize,
    pub action_levels: usize,
    pub hidden_width: usize,
    pub mixer_embed: usize,
    /// Global gradient-norm clip applied before each descent step.
    pub grad_clip_norm: f64,
    /// Disable to roll out the initial parameters without learning.
    pub updates_enabled: bool,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            episodes: 1500,
            batch_size: 32,
            buffer_capacity: 2000,
            gamma: 0.99,
            learning_rate: 0.001,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_anneal_fraction: 0.6,
            target_sync_steps: 200,
            action_levels: 11,
            hidden_width: 64,
            mixer_embed: 16,
            grad_clip_norm: 10.0,
            updates_enabled: true,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.episodes == 0 {
            return Err(CoreError::Config("episodes must be positive".into()));
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return Err(CoreError::Config(format!(
                "batch size {} must be in 1..=buffer capacity {}",
                self.batch_size, self.buffer_capacity
            )));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(CoreError::Config(format!(
                "gamma {} must be in [0, 1)",
                self.gamma
            )));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(CoreError::Config("learning rate must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start)
            || !(0.0..=1.0).contains(&self.epsilon_end)
            || !(0.0..=1.0).contains(&self.epsilon_anneal_fraction)
        {
            return Err(CoreError::Config("epsilon schedule outside [0, 1]".into()));
        }
        if self.target_sync_steps == 0 {
            return Err(CoreError::Config("target sync interval must be positive".into()));
        }
        if self.action_levels < 2 {
            return Err(CoreError::Config("need at least 2 action levels".into()));
        }
        if self.hidden_width == 0 || self.mixer_embed == 0 {
            return Err(CoreError::Config("network widths must be positive".into()));
        }
        if !(self.grad_clip_norm > 0.0) {
            return Err(CoreError::Config("gradient clip norm must be positive".into()));
        }
        Ok(())
    }

    /// Linearly annealed exploration rate for an episode index.
    pub fn epsilon_at(&self, episode: usize) -> f64 {
        let anneal_span = (self.episodes as f64 * self.epsilon_anneal_fraction).ceil();
        if anneal_span <= 0.0 {
            return self.epsilon_end;
        }
        let progress = (episode as f64 / anneal_span).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * progress
    }
}

/// Where the reward series settled and what it settled to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// First episode whose 50-episode moving average stays within 5% of the
    /// final 100-episode mean; equals `episodes` when the run never settles.
    pub convergence_episode: usize,
    /// Mean reward from the convergence episode onward.
    pub average_reward_at_convergence: f64,
    /// Mean of the final 100 episode rewards.
    pub final_mean: f64,
}

/// Detects convergence of a reward series.
pub fn convergence_report(rewards: &[f64]) -> ConvergenceReport {
    let n = rewards.len();
    assert!(n > 0, "empty reward series");
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let final_mean = mean(&rewards[n.saturating_sub(100)..]);
    let window = 50.min(n);
    let tolerance = (0.05 * final_mean.abs()).max(1e-9);

    // Last moving-average point outside the band decides the episode.
    let mut convergence = window - 1;
    let mut acc: f64 = rewards[..window].iter().sum();
    let mut check = |episode: usize, acc: f64, convergence: &mut usize| {
        let ma = acc / window as f64;
        if (ma - final_mean).abs() > tolerance {
            *convergence = episode + 1;
        }
    };
    check(window - 1, acc, &mut convergence);
    for e in window..n {
        acc += rewards[e] - rewards[e - window];
        check(e, acc, &mut convergence);
    }
    if convergence >= n {
        return ConvergenceReport {
            convergence_episode: n,
            average_reward_at_convergence: final_mean,
            final_mean,
        };
    }
    ConvergenceReport {
        convergence_episode: convergence,
        average_reward_at_convergence: mean(&rewards[convergence..]),
        final_mean,
    }
}

/// Output of one training run.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub episode_rewards: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub convergence: ConvergenceReport,
    pub checkpoint: Checkpoint,
}

/// Training failures.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    /// The loss left the finite range; carries the failing episode/step.
    Diverged { episode: usize, step: usize, loss: f64 },
    World(CoreError),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::Diverged { episode, step, loss } => write!(
                f,
                "training diverged at episode {episode}, update step {step}: loss = {loss}"
            ),
            TrainError::World(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for TrainError {}

impl From<CoreError> for TrainError {
    fn from(e: CoreError) -> Self {
        TrainError::World(e)
    }
}

enum Params {
    Vdn { current: VdnParams, target: VdnParams },
    Qmix { current: QmixParams, target: QmixParams },
}

/// Runs the full training procedure for one (world, algorithm, seed) triple.
///
/// Every episode draws a fresh commuting population and environment stream
/// from seeds derived off `seed`, so runs are reproducible bit for bit.
pub fn train(
    world: &WorldConfig,
    distributions: &CommuteDistributions,
    ev_count: u32,
    hp: &Hyperparameters,
    algorithm: Algorithm,
    seed: u64,
) -> Result<TrainResult, TrainError> {
    world.validate()?;
    distributions.validate()?;
    hp.validate()?;

    let grid = ActionGrid::uniform(hp.action_levels)?;
    let levels = grid.len();
    let idle = grid.idle_index() as u16;

    let agent_kinds: Vec<PileKind> = world
        .stations
        .iter()
        .flat_map(|s| s.pile_specs(&world.nc_spec, &world.fc_spec))
        .map(|spec| spec.kind)
        .collect();
    let n_agents = agent_kinds.len();
    let global_dim = JointState::global_dim(n_agents);

    let mut init_rng = seeded_rng(seed, streams::NET_INIT, 0);
    let mut params = match algorithm {
        Algorithm::Vdn => {
            let current = VdnParams {
                nc: MlpQNet::init(OBS_DIM, hp.hidden_width, levels, &mut init_rng),
                fc: MlpQNet::init(OBS_DIM, hp.hidden_width, levels, &mut init_rng),
            };
            let target = current.clone();
            Params::Vdn { current, target }
        }
        Algorithm::Qmix => {
            let in_dim = OBS_DIM + levels;
            let current = QmixParams {
                nc: RecurrentQNet::init(in_dim, hp.hidden_width, levels, &mut init_rng),
                fc: RecurrentQNet::init(in_dim, hp.hidden_width, levels, &mut init_rng),
                mixer: QmixMixer::init(n_agents, global_dim, hp.mixer_embed, &mut init_rng),
            };
            let target = current.clone();
            Params::Qmix { current, target }
        }
    };
    let hidden_dim = match &params {
        Params::Vdn { .. } => 0,
        Params::Qmix { current, .. } => current.nc.hidden_dim(),
    };

    let mut buffer = ReplayBuffer::new(hp.buffer_capacity);
    let mut train_rng = seeded_rng(seed, streams::EXPLORATION, 0);
    let mut episode_rewards = Vec::with_capacity(hp.episodes);
    let mut epsilons = Vec::with_capacity(hp.episodes);
    let mut update_steps = 0usize;

    for episode in 0..hp.episodes {
        let epsilon = hp.epsilon_at(episode);
        let mut population_rng = seeded_rng(seed, streams::POPULATION, episode as u64);
        let population = sample_population(
            ev_count,
            distributions,
            world.fc_fraction(),
            &mut population_rng,
        )?;
        let env_rng = seeded_rng(seed, streams::ENV, episode as u64);
        let mut env = Env::new(world.clone(), population, env_rng)?;

        let mut state = env.joint_state();
        let mut hiddens = vec![0.0; n_agents * hidden_dim];
        let mut prev_actions = vec![idle; n_agents];
        let mut episode_reward = 0.0;

        loop {
            let mask = state.agent_mask();
            let mut actions = vec![idle; n_agents];
            let mut new_hiddens = hiddens.clone();
            for agent in 0..n_agents {
                if !mask[agent] {
                    continue;
                }
                let obs = state.agent_obs(agent);
                let q_values = match &params {
                    Params::Vdn { current, .. } => match agent_kinds[agent] {
                        PileKind::Nc => current.nc.q_values(&obs),
                        PileKind::Fc => current.fc.q_values(&obs),
                    },
                    Params::Qmix { current, .. } => {
                        let mut input = vec![0.0; OBS_DIM + levels];
                        input[..OBS_DIM].copy_from_slice(&obs);
                        input[OBS_DIM + prev_actions[agent] as usize] = 1.0;
                        let h_in = &hiddens[agent * hidden_dim..(agent + 1) * hidden_dim];
                        let net = match agent_kinds[agent] {
                            PileKind::Nc => &current.nc,
                            PileKind::Fc => &current.fc,
                        };
                        let (q, h_out) = net.q_values(&input, h_in);
                        new_hiddens[agent * hidden_dim..(agent + 1) * hidden_dim]
                            .copy_from_slice(&h_out);
                        q
                    }
                };
                actions[agent] = epsilon_greedy(&q_values, epsilon, &mut train_rng) as u16;
            }

            let fractions: Vec<f64> = actions.iter().map(|&a| grid.fraction(a as usize)).collect();
            let (next_state, reward, done) = env.step(&fractions)?;
            episode_reward += reward.total;
            let next_mask = next_state.agent_mask();

            // Agents reset their recurrent state when the pile empties.
            for agent in 0..n_agents {
                if hidden_dim > 0 && !next_mask[agent] {
                    new_hiddens[agent * hidden_dim..(agent + 1) * hidden_dim].fill(0.0);
                }
            }

            if mask.iter().any(|&m| m) {
                buffer.push(Transition {
                    obs: flatten_obs(&state),
                    next_obs: flatten_obs(&next_state),
                    global: state.flatten(),
                    next_global: next_state.flatten(),
                    actions: actions.clone(),
                    prev_actions: prev_actions.clone(),
                    reward: reward.total,
                    done,
                    mask,
                    next_mask: next_mask.clone(),
                    hidden: hiddens.clone(),
                    next_hidden: new_hiddens.clone(),
                });
            }

            // Arrivals and departures reset the per-pile action history.
            for agent in 0..n_agents {
                prev_actions[agent] = if next_mask[agent] { actions[agent] } else { idle };
            }
            hiddens = new_hiddens;
            state = next_state;

            if hp.updates_enabled && buffer.len() >= hp.batch_size {
                let indices = buffer.sample_indices(hp.batch_size, &mut train_rng);
                let batch: Vec<&Transition> = indices.iter().map(|&i| buffer.get(i)).collect();
                let loss = match &mut params {
                    Params::Vdn { current, target } => {
                        let (loss, mut grads) = vdn_loss_and_gradients(
                            &batch,
                            current,
                            target,
                            &agent_kinds,
                            hp.gamma,
                        );
                        clip_and_step(current, &mut grads, hp);
                        loss
                    }
                    Params::Qmix { current, target } => {
                        let (loss, mut grads) = qmix_loss_and_gradients(
                            &batch,
                            current,
                            target,
                            &agent_kinds,
                            hp.gamma,
                        );
                        clip_and_step(current, &mut grads, hp);
                        loss
                    }
                };
                if !loss.is_finite() {
                    return Err(TrainError::Diverged {
                        episode,
                        step: update_steps,
                        loss,
                    });
                }
                update_steps += 1;
                if update_steps % hp.target_sync_steps == 0 {
                    match &mut params {
                        Params::Vdn { current, target } => copy_params(target, current),
                        Params::Qmix { current, target } => copy_params(target, current),
                    }
                }
            }

            if done {
                break;
            }
        }
        episode_rewards.push(episode_reward);
        epsilons.push(epsilon);
    }

    let convergence = convergence_report(&episode_rewards);
    let checkpoint = match &params {
        Params::Vdn { current, .. } => Checkpoint::from_params("vdn", current),
        Params::Qmix { current, .. } => Checkpoint::from_params("qmix", current),
    };
    Ok(TrainResult {
        episode_rewards,
        epsilons,
        convergence,
        checkpoint,
    })
}

fn flatten_obs(state: &JointState) -> Vec<f64> {
    let n = state.agent_count();
    let mut out = Vec::with_capacity(n * OBS_DIM);
    for agent in 0..n {
        out.extend_from_slice(&state.agent_obs(agent));
    }
    out
}

fn clip_and_step<P: ParamTensors>(params: &mut P, grads: &mut P, hp: &Hyperparameters) {
    let norm = grad_sq_norm(grads).sqrt();
    if norm > hp.grad_clip_norm {
        scale_params(grads, hp.grad_clip_norm / norm);
    }
    sgd_step(params, grads, hp.learning_rate);
}

/// Reward series rows for CSV export: (episode, total reward, epsilon).
pub fn reward_series_csv(result: &TrainResult) -> String {
    let mut out = String::from("episode,total_reward,epsilon\n");
    for (e, (r, eps)) in result
        .episode_rewards
        .iter()
        .zip(result.epsilons.iter())
        .enumerate()
    {
        out.push_str(&format!("{e},{r},{eps}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use evshunt_core::ev::SocPolicy;
    use evshunt_core::preference::PreferenceWeights;
    use evshunt_core::pricing::PriceAdjustment;
    use evshunt_core::station::{PileSpec, StationConfig, StationId};
    use evshunt_core::tariff::{station0_tariff, station1_tariff};

    fn tiny_world() -> WorldConfig {
        let nc = PileSpec::default_nc();
        let fc = PileSpec::default_fc();
        WorldConfig {
            stations: [
                StationConfig {
                    station_id: StationId(0),
                    nc_count: 1,
                    fc_count: 1,
                    tariff: station0_tariff(),
                    p_max_station: StationConfig::default_power_cap(1, 1, &nc, &fc),
                },
                StationConfig {
                    station_id: StationId(1),
                    nc_count: 1,
                    fc_count: 1,
                    tariff: station1_tariff(),
                    p_max_station: StationConfig::default_power_cap(1, 1, &nc, &fc),
                },
            ],
            nc_spec: nc,
            fc_spec: fc,
            soc_policy: SocPolicy::default(),
            weights: PreferenceWeights::default(),
            adjustment: PriceAdjustment::default(),
            scale_a: 10.0,
            pricing_enabled: true,
            dt: 1.0,
        }
    }

    fn tiny_hp(episodes: usize) -> Hyperparameters {
        Hyperparameters {
            episodes,
            batch_size: 8,
            buffer_capacity: 64,
            hidden_width: 8,
            mixer_embed: 4,
            action_levels: 5,
            ..Hyperparameters::default()
        }
    }

    #[test]
    fn epsilon_schedule_anneals_linearly() {
        let hp = Hyperparameters {
            episodes: 100,
            epsilon_start: 1.0,
            epsilon_end: 0.0,
            epsilon_anneal_fraction: 0.5,
            ..Hyperparameters::default()
        };
        assert_eq!(hp.epsilon_at(0), 1.0);
        assert!((hp.epsilon_at(25) - 0.5).abs() < 1e-12);
        assert_eq!(hp.epsilon_at(50), 0.0);
        assert_eq!(hp.epsilon_at(99), 0.0);
    }

    #[test]
    fn no_learning_rollout_is_deterministic() {
        let world = tiny_world();
        let dists = CommuteDistributions::default();
        let mut hp = tiny_hp(1);
        hp.updates_enabled = false;
        let a = train(&world, &dists, 2, &hp, Algorithm::Vdn, 7).unwrap();
        let b = train(&world, &dists, 2, &hp, Algorithm::Vdn, 7).unwrap();
        assert_eq!(a.episode_rewards, b.episode_rewards);
    }

    #[test]
    fn training_run_is_reproducible_bit_for_bit() {
        let world = tiny_world();
        let dists = CommuteDistributions::default();
        let hp = tiny_hp(6);
        for algorithm in [Algorithm::Vdn, Algorithm::Qmix] {
            let a = train(&world, &dists, 2, &hp, algorithm, 99).unwrap();
            let b = train(&world, &dists, 2, &hp, algorithm, 99).unwrap();
            assert_eq!(a.episode_rewards, b.episode_rewards, "{algorithm}");
            assert_eq!(a.checkpoint, b.checkpoint, "{algorithm}");
        }
    }

    #[test]
    fn different_seeds_differ() {
        let world = tiny_world();
        let dists = CommuteDistributions::default();
        let hp = tiny_hp(2);
        let a = train(&world, &dists, 2, &hp, Algorithm::Vdn, 1).unwrap();
        let b = train(&world, &dists, 2, &hp, Algorithm::Vdn, 2).unwrap();
        assert_ne!(a.episode_rewards, b.episode_rewards);
    }

    #[test]
    fn convergence_report_on_settling_series() {
        // 20 noisy episodes then flat at -100.
        let mut rewards = vec![-500.0; 20];
        rewards.extend(vec![-100.0; 180]);
        let report = convergence_report(&rewards);
        // The moving average needs 50 in-band episodes after the jump.
        assert!(report.convergence_episode > 20);
        assert!(report.convergence_episode < 100);
        assert!((report.final_mean - (-100.0)).abs() < 1e-9);
    }

    #[test]
    fn convergence_report_flags_unsettled_series() {
        // Strictly drifting series: the moving average never stays inside
        // the final band, so the run reports no convergence.
        let rewards: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let report = convergence_report(&rewards);
        assert_eq!(report.convergence_episode, 200);
        assert_eq!(report.average_reward_at_convergence, report.final_mean);
    }
}
