//! Charging stations and pile hardware.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::tariff::TariffSchedule;

/// Identifier of one of the two stations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StationId(pub u8);

impl StationId {
    pub fn other(self) -> StationId {
        StationId(1 - self.0)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Pile hardware class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PileKind {
    /// Normal charging.
    Nc,
    /// Fast charging.
    Fc,
}

/// Power limits of one pile and the battery capacity of the EV class it serves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PileSpec {
    pub kind: PileKind,
    /// Maximum charging power, kW.
    pub p_max: f64,
    /// Minimum power, kW (negative allows discharging).
    pub p_min: f64,
    /// Battery capacity of the served EV class, kWh.
    pub battery_capacity: f64,
}

impl PileSpec {
    pub fn new(kind: PileKind, p_max: f64, p_min: f64, battery_capacity: f64) -> Result<Self> {
        let spec = Self {
            kind,
            p_max,
            p_min,
            battery_capacity,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_min <= 0.0 && 0.0 <= self.p_max) {
            return Err(CoreError::Config(format!(
                "pile power range [{}, {}] must straddle zero",
                self.p_min, self.p_max
            )));
        }
        if !(self.battery_capacity > 0.0) {
            return Err(CoreError::Config(format!(
                "battery capacity {} must be positive",
                self.battery_capacity
            )));
        }
        Ok(())
    }

    /// Normal-charging pile: 6 kW on a 24 kWh battery, discharge symmetric.
    pub fn default_nc() -> Self {
        Self {
            kind: PileKind::Nc,
            p_max: 6.0,
            p_min: -6.0,
            battery_capacity: 24.0,
        }
    }

    /// Fast-charging pile: 30 kW on a 180 kWh battery, discharge symmetric.
    pub fn default_fc() -> Self {
        Self {
            kind: PileKind::Fc,
            p_max: 30.0,
            p_min: -30.0,
            battery_capacity: 180.0,
        }
    }
}

/// Static description of one charging station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationConfig {
    pub station_id: StationId,
    pub nc_count: u32,
    pub fc_count: u32,
    pub tariff: TariffSchedule,
    /// Station-level power cap, kW.
    pub p_max_station: f64,
}

impl StationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.station_id.0 > 1 {
            return Err(CoreError::Config(format!(
                "station id {} must be 0 or 1",
                self.station_id.0
            )));
        }
        if self.nc_count + self.fc_count == 0 {
            return Err(CoreError::Config(format!(
                "station {} has no piles",
                self.station_id.0
            )));
        }
        if !(self.p_max_station > 0.0) {
            return Err(CoreError::Config(format!(
                "station {} power cap {} must be positive",
                self.station_id.0, self.p_max_station
            )));
        }
        Ok(())
    }

    /// Total pile count N_z.
    pub fn pile_count(&self) -> u32 {
        self.nc_count + self.fc_count
    }

    /// Pile specs in agent order: all FC piles first, then all NC piles.
    pub fn pile_specs(&self, nc: &PileSpec, fc: &PileSpec) -> Vec<PileSpec> {
        let mut specs = Vec::with_capacity(self.pile_count() as usize);
        specs.extend(std::iter::repeat(*fc).take(self.fc_count as usize));
        specs.extend(std::iter::repeat(*nc).take(self.nc_count as usize));
        specs
    }

    /// Default station cap: 80% of the summed pile maxima, so the cap can
    /// bind when most piles charge at once.
    pub fn default_power_cap(nc_count: u32, fc_count: u32, nc: &PileSpec, fc: &PileSpec) -> f64 {
        0.8 * (nc_count as f64 * nc.p_max + fc_count as f64 * fc.p_max)
    }
}
