//! The charging MDP: joint state, reward, and the episode environment.

mod reward;
mod state;
mod world;

pub use reward::{
    action_to_power, emergency, station_power_total, step_reward, EvCharge, RewardBreakdown,
};
pub use state::{
    AgentLayout, JointState, PileState, StationState, EMERGENCY_NORM, HOUR_NORM, OBS_DIM,
    POWER_NORM,
};
pub use world::{ChargeRecord, Env, TraceRow, WorldConfig, EPISODE_HOURS};
