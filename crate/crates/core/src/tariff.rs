//! Hourly time-of-use tariff tables.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// One tariff band: an inclusive hour interval with a fixed price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TariffBand {
    /// First hour covered, 0-23.
    pub start_hour: u8,
    /// Last hour covered (inclusive), 0-23.
    pub end_hour: u8,
    /// Price in CNY/kWh.
    pub price: f64,
}

/// A full-day tariff schedule.
///
/// The constructor enforces that every hour 0-23 is covered by exactly one
/// band and that all prices are strictly positive, so lookups are total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<TariffBand>", into = "Vec<TariffBand>")]
pub struct TariffSchedule {
    entries: Vec<TariffBand>,
}

impl TariffSchedule {
    pub fn new(entries: Vec<TariffBand>) -> Result<Self> {
        let mut covered = [0u8; 24];
        for band in &entries {
            if band.start_hour > 23 || band.end_hour > 23 {
                return Err(CoreError::Config(format!(
                    "tariff band {}-{} outside 0-23",
                    band.start_hour, band.end_hour
                )));
            }
            if band.start_hour > band.end_hour {
                return Err(CoreError::Config(format!(
                    "tariff band starts at {} after it ends at {}",
                    band.start_hour, band.end_hour
                )));
            }
            if !(band.price > 0.0) {
                return Err(CoreError::Config(format!(
                    "tariff price {} must be strictly positive",
                    band.price
                )));
            }
            for hour in band.start_hour..=band.end_hour {
                covered[hour as usize] += 1;
            }
        }
        for (hour, count) in covered.iter().enumerate() {
            match count {
                0 => {
                    return Err(CoreError::Config(format!(
                        "tariff schedule leaves hour {hour} uncovered"
                    )))
                }
                1 => {}
                n => {
                    return Err(CoreError::Config(format!(
                        "tariff schedule covers hour {hour} {n} times"
                    )))
                }
            }
        }
        Ok(Self { entries })
    }

    /// Price of the unique band covering `hour`.
    ///
    /// # Panics
    /// Panics if `hour > 23`; coverage of 0-23 is a construction invariant.
    pub fn price_at(&self, hour: u8) -> f64 {
        assert!(hour <= 23, "hour {hour} out of range");
        self.entries
            .iter()
            .find(|b| b.start_hour <= hour && hour <= b.end_hour)
            .map(|b| b.price)
            .expect("schedule covers every hour by construction")
    }

    /// Smallest price across all bands.
    pub fn min_price(&self) -> f64 {
        self.entries
            .iter()
            .map(|b| b.price)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn bands(&self) -> &[TariffBand] {
        &self.entries
    }
}

impl TryFrom<Vec<TariffBand>> for TariffSchedule {
    type Error = CoreError;
    fn try_from(entries: Vec<TariffBand>) -> Result<Self> {
        TariffSchedule::new(entries)
    }
}

impl From<TariffSchedule> for Vec<TariffBand> {
    fn from(s: TariffSchedule) -> Self {
        s.entries
    }
}

fn band(start_hour: u8, end_hour: u8, price: f64) -> TariffBand {
    TariffBand {
        start_hour,
        end_hour,
        price,
    }
}

/// Station 0 time-of-use tariff.
///
/// The published table leaves the hours 06, 10, 13, 17 and 19 unassigned;
/// each preceding band is extended by one hour so the day is fully covered
/// (the wrap-around night band is split into its 0-6 and 20-23 halves).
pub fn station0_tariff() -> TariffSchedule {
    TariffSchedule::new(vec![
        band(0, 6, 0.3946),
        band(7, 10, 1.0044),
        band(11, 13, 0.6950),
        band(14, 17, 1.0044),
        band(18, 19, 0.6950),
        band(20, 23, 0.3946),
    ])
    .expect("static tariff table is valid")
}

/// Station 1 time-of-use tariff (same bands, higher prices).
pub fn station1_tariff() -> TariffSchedule {
    TariffSchedule::new(vec![
        band(0, 6, 0.4946),
        band(7, 10, 1.2044),
        band(11, 13, 0.7950),
        band(14, 17, 1.2044),
        band(18, 19, 0.7950),
        band(20, 23, 0.4946),
    ])
    .expect("static tariff table is valid")
}
