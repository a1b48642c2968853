//! Multi-agent value-decomposition learning for the charging MDP.
//!
//! Per-pile agents share a Q-network per pile kind (feed-forward for the
//! additive path, MLP-GRU-MLP for the monotonic path). Joint values come
//! from either a plain sum or a state-conditioned monotonic mixer, trained
//! off-policy from a bounded replay buffer with exact analytic gradients,
//! epsilon-greedy exploration, and a periodically synchronized target
//! network.

pub mod action;
pub mod checkpoint;
pub mod fdcheck;
pub mod greedy;
pub mod gru;
pub mod loss;
pub mod mat;
pub mod mixer;
pub mod net;
pub mod replay;
pub mod train;

pub use action::ActionGrid;
pub use checkpoint::Checkpoint;
pub use greedy::{argmax, epsilon_greedy};
pub use gru::{GruCell, RecurrentQNet};
pub use loss::{qmix_loss_and_gradients, td_target, vdn_loss_and_gradients, QmixParams, VdnParams};
pub use mixer::{vdn_mix, QmixMixer};
pub use net::{MlpQNet, ParamTensors};
pub use replay::{ReplayBuffer, Transition};
pub use train::{
    convergence_report, train, Algorithm, ConvergenceReport, Hyperparameters, TrainError,
    TrainResult,
};
