//! Joint per-pile/per-station state exposed to the learning stack.

use serde::{Deserialize, Serialize};

use crate::station::StationId;

/// Feature scaling constants for network inputs.
pub const POWER_NORM: f64 = 30.0;
pub const HOUR_NORM: f64 = 24.0;
pub const EMERGENCY_NORM: f64 = 100.0;

/// Width of one agent observation vector.
pub const OBS_DIM: usize = 10;

/// Per-pile state tuple. Unoccupied piles carry a zeroed tuple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PileState {
    pub soc: f64,
    pub p_max: f64,
    pub p_min: f64,
    /// Remaining staying time of the attached EV, hours.
    pub t_stay: f64,
    pub occupied: bool,
}

impl PileState {
    pub fn vacant() -> Self {
        Self {
            soc: 0.0,
            p_max: 0.0,
            p_min: 0.0,
            t_stay: 0.0,
            occupied: false,
        }
    }
}

/// Per-station state tuple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationState {
    /// Current hour.
    pub t_cur: f64,
    /// Posted price this hour, CNY/kWh.
    pub price: f64,
    /// Sum of per-EV charge emergencies, kW.
    pub emergency_total: f64,
}

/// Fixed assignment of agents (piles) to stations.
///
/// Agents are ordered by (station id, pile index); pile index within a
/// station runs over FC piles first, then NC piles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentLayout {
    pub piles_per_station: [usize; 2],
}

impl AgentLayout {
    pub fn total(&self) -> usize {
        self.piles_per_station[0] + self.piles_per_station[1]
    }

    /// Station and in-station pile index of a global agent index.
    pub fn locate(&self, agent: usize) -> (StationId, usize) {
        if agent < self.piles_per_station[0] {
            (StationId(0), agent)
        } else {
            (StationId(1), agent - self.piles_per_station[0])
        }
    }
}

/// Snapshot of every agent's pile tuple plus both station tuples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub layout: AgentLayout,
    pub piles: Vec<PileState>,
    pub stations: [StationState; 2],
}

impl JointState {
    pub fn agent_count(&self) -> usize {
        self.piles.len()
    }

    pub fn agent_mask(&self) -> Vec<bool> {
        self.piles.iter().map(|p| p.occupied).collect()
    }

    /// Observation vector for one agent: its pile tuple, its station tuple,
    /// and identity features (station id, pile position).
    pub fn agent_obs(&self, agent: usize) -> [f64; OBS_DIM] {
        let (station, pile_index) = self.layout.locate(agent);
        let pile = &self.piles[agent];
        let st = &self.stations[station.index()];
        let station_piles = self.layout.piles_per_station[station.index()].max(1);
        [
            pile.soc,
            pile.p_max / POWER_NORM,
            pile.p_min / POWER_NORM,
            pile.t_stay / HOUR_NORM,
            if pile.occupied { 1.0 } else { 0.0 },
            st.t_cur / HOUR_NORM,
            st.price,
            st.emergency_total / EMERGENCY_NORM,
            station.0 as f64,
            (pile_index + 1) as f64 / station_piles as f64,
        ]
    }

    /// Width of the flattened global state.
    pub fn global_dim(agent_count: usize) -> usize {
        5 * agent_count + 6
    }

    /// Flattened global state: every pile tuple followed by both station
    /// tuples, scaled like the observations.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(Self::global_dim(self.agent_count()));
        for pile in &self.piles {
            out.push(pile.soc);
            out.push(pile.p_max / POWER_NORM);
            out.push(pile.p_min / POWER_NORM);
            out.push(pile.t_stay / HOUR_NORM);
            out.push(if pile.occupied { 1.0 } else { 0.0 });
        }
        for st in &self.stations {
            out.push(st.t_cur / HOUR_NORM);
            out.push(st.price);
            out.push(st.emergency_total / EMERGENCY_NORM);
        }
        out
    }
}
