//! Real-time price competition and the per-EV discount/reclaim ledger.
//!
//! When pile occupancy is imbalanced the less occupied station posts its
//! base price minus a fixed reduction. An EV that lands on the discounted
//! station pays the offer at that step and is charged back the base price of
//! the discount step plus the reduction at the next step, so the station's
//! revenue over the pair of steps is neutral.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::station::StationId;
use crate::tariff::TariffSchedule;

/// Fixed per-station price reductions (alpha for CS 0, beta for CS 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceAdjustment {
    pub alpha: f64,
    pub beta: f64,
}

impl PriceAdjustment {
    /// Validates against the stations' tariffs: a reduction must leave every
    /// posted price strictly positive.
    pub fn validate(&self, tariff0: &TariffSchedule, tariff1: &TariffSchedule) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return Err(CoreError::Config(format!(
                "price reductions ({}, {}) must be non-negative",
                self.alpha, self.beta
            )));
        }
        if self.alpha >= tariff0.min_price() {
            return Err(CoreError::Config(format!(
                "alpha {} is not below station 0's minimum tariff {}",
                self.alpha,
                tariff0.min_price()
            )));
        }
        if self.beta >= tariff1.min_price() {
            return Err(CoreError::Config(format!(
                "beta {} is not below station 1's minimum tariff {}",
                self.beta,
                tariff1.min_price()
            )));
        }
        Ok(())
    }
}

impl Default for PriceAdjustment {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 0.1,
        }
    }
}

/// Posted prices for one hour after the occupancy comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceOffer {
    pub offer0: f64,
    pub offer1: f64,
    pub discounted_station: Option<StationId>,
}

impl PriceOffer {
    pub fn offer(&self, station: StationId) -> f64 {
        if station.0 == 0 {
            self.offer0
        } else {
            self.offer1
        }
    }

    /// Reduction applied at the discounted station, if any.
    pub fn discount(&self, adj: &PriceAdjustment) -> f64 {
        match self.discounted_station {
            Some(StationId(0)) => adj.alpha,
            Some(_) => adj.beta,
            None => 0.0,
        }
    }
}

/// The station with fewer occupied piles posts its base price minus its
/// reduction; the other posts its base price. Equal occupancy posts bases.
pub fn competitive_price(
    n0: u32,
    n1: u32,
    base0: f64,
    base1: f64,
    adj: &PriceAdjustment,
) -> PriceOffer {
    debug_assert!(base0 > 0.0 && base1 > 0.0);
    if n0 < n1 {
        PriceOffer {
            offer0: base0 - adj.alpha,
            offer1: base1,
            discounted_station: Some(StationId(0)),
        }
    } else if n0 > n1 {
        PriceOffer {
            offer0: base0,
            offer1: base1 - adj.beta,
            discounted_station: Some(StationId(1)),
        }
    } else {
        PriceOffer {
            offer0: base0,
            offer1: base1,
            discounted_station: None,
        }
    }
}

/// One discount granted to one EV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub ev_id: u32,
    pub station_id: StationId,
    /// Reduction off the base price, CNY/kWh.
    pub discount: f64,
    /// Base tariff price at the discount step.
    pub base_at_discount: f64,
    /// Hour the discount applied.
    pub step_applied: u8,
    /// Hour the surcharge was collected, once reclaimed.
    pub reclaim_step: Option<u8>,
}

impl LedgerEntry {
    pub fn reclaimed(&self) -> bool {
        self.reclaim_step.is_some()
    }

    /// Surcharge above the discount-step base price. The reclaim price is
    /// defined as `base_at_discount + discount`, so the surcharge equals the
    /// discount by construction and the pair is revenue-neutral.
    pub fn surcharge(&self) -> f64 {
        self.discount
    }
}

/// Append-only record of granted discounts and their reclaims.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PriceLedger {
    entries: Vec<LedgerEntry>,
}

impl PriceLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    fn open_entry(&self, ev_id: u32) -> Option<&LedgerEntry> {
        self.entries
            .iter()
            .find(|e| e.ev_id == ev_id && !e.reclaimed())
    }

    /// Records a discount granted to `ev_id` at `step`.
    ///
    /// An EV may hold at most one open (unreclaimed) discount; a second one
    /// signals double-discounting and is rejected.
    pub fn record_attraction(
        &mut self,
        ev_id: u32,
        station_id: StationId,
        discount: f64,
        base_at_discount: f64,
        step: u8,
    ) -> Result<()> {
        if !(discount > 0.0) {
            return Err(CoreError::Ledger(format!(
                "discount {discount} for EV {ev_id} must be positive"
            )));
        }
        if self.open_entry(ev_id).is_some() {
            return Err(CoreError::Ledger(format!(
                "EV {ev_id} already holds an open discount"
            )));
        }
        self.entries.push(LedgerEntry {
            ev_id,
            station_id,
            discount,
            base_at_discount,
            step_applied: step,
            reclaim_step: None,
        });
        Ok(())
    }

    /// Closes every open entry of `station_id` granted at `step - 1` and
    /// returns the effective reclaim price per EV (discount-step base plus
    /// discount). EVs absent from the map pay the current base price.
    pub fn reclaim_step(&mut self, station_id: StationId, step: u8) -> BTreeMap<u32, f64> {
        let mut reclaimed = BTreeMap::new();
        for entry in &mut self.entries {
            if entry.station_id == station_id
                && !entry.reclaimed()
                && step >= 1
                && entry.step_applied == step - 1
            {
                entry.reclaim_step = Some(step);
                reclaimed.insert(entry.ev_id, entry.base_at_discount + entry.discount);
            }
        }
        reclaimed
    }

    /// Audit trail as CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ev_id,station,step,discount,reclaim_step\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.ev_id,
                e.station_id.0,
                e.step_applied,
                e.discount,
                e.reclaim_step.map_or(String::from(""), |s| s.to_string())
            ));
        }
        out
    }
}
